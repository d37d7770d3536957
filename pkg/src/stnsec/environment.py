"""Sequential decision environments for scheduling and power control.

``SchedulingEnv`` drives the slot-occupation stage: a core-network unit
picks the satellite band layout once per period (a slow timescale) and
every node assigns each of its UEs one frequency slot per time step
through masked sequential sub-decisions.  The global reward per step is

    r = c1 P_e + c2 P_u - c3 R_occ - c4 R_coll - c5 R_tier,

where P_e / P_u are the mean closed-form secrecy/reliability values of the
active UEs (gated: c1 = 1 iff P_e meets the security target, likewise c2),
R_occ flags choices landing on already-busy slots (sensed occupancy AND
the chosen rows), R_coll same-node slot collisions, and R_tier co-channel
use across nodes weighted through the band plan and the satellite coupling
tensor.

``PowerEnv`` drives the power stage on a frozen plan: each node picks one
(data, decoy) level pair per step from a budget-masked lattice, rewarded by

    r' = d1 P_e - d2 * sum_k p_a / p_max          (averaged over nodes)

with d1 gated like c1.  Decoy-free actions earn exactly d1 P_e.

Both environments are deterministic given (seed, state, joint action);
episode traces (state hashes, actions, reward components) stream to an
optional line-delimited log.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import (
    AdversarialPlan,
    BandPlan,
    GridDims,
    OccupancyPlan,
    PowerPlan,
    ResourcePlan,
)
from .metrics import (
    LinkSet,
    ReliabilityParams,
    SecrecyParams,
    reliability_probability,
    secrecy_probability,
)

__all__ = [
    "RewardWeights",
    "JammerConfig",
    "JammerProcess",
    "GlobalState",
    "Observation",
    "observe",
    "inject_jammer",
    "EnvConfig",
    "SchedulingEnv",
    "feasible_slot_mask",
    "SchedSnapshot",
    "PowerEnv",
    "PowerSnapshot",
    "band_options",
    "power_lattice",
]


@dataclass(frozen=True)
class RewardWeights:
    """Penalty weights; the c1/c2/d1 gates are computed per step."""

    c3: float = 0.1
    c4: float = 0.1
    c5: float = 0.1
    d2: float = 0.5


@dataclass(frozen=True)
class JammerConfig:
    kind: str = "none"  # "none" | "sweep" | "random"
    power_watt: float = 0.0
    duty_cycle: float = 0.0  # random kind: per-slot jam probability
    stride: int = 1          # sweep kind: slots advanced per step

    def __post_init__(self) -> None:
        if self.kind not in ("none", "sweep", "random"):
            raise ValueError(f"unknown jammer kind {self.kind!r}")
        if not 0.0 <= self.duty_cycle <= 1.0:
            raise ValueError("duty cycle must lie in [0, 1]")


class JammerProcess:
    """Realized jam pattern for one episode of ``length`` steps."""

    def __init__(self, config: JammerConfig, q: int, length: int, rng: np.random.Generator):
        self.config = config
        self.q = q
        if config.kind == "none":
            self.rows = np.zeros((length, q), dtype=np.int8)
        elif config.kind == "sweep":
            self.rows = np.zeros((length, q), dtype=np.int8)
            for t in range(length):
                self.rows[t, (t * config.stride) % q] = 1
        else:
            self.rows = (rng.random((length, q)) < config.duty_cycle).astype(np.int8)

    def row(self, t: int) -> np.ndarray:
        return self.rows[t]


@dataclass(frozen=True)
class GlobalState:
    """Team-level state: previous band plan, satellite coupling tensor,
    sensed slot occupancy, and the UE attachment vector."""

    prev_band_plan: np.ndarray   # (n_sats, q)
    coupling: np.ndarray         # (q, n_sats, n_sats)
    slot_occupancy: np.ndarray   # (q,)
    attachment: np.ndarray       # (n_ues,)

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                self.prev_band_plan.reshape(-1).astype(float),
                self.coupling.reshape(-1).astype(float),
                self.slot_occupancy.astype(float),
                self.attachment.astype(float),
            ]
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.prev_band_plan, self.coupling, self.slot_occupancy, self.attachment):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class Observation:
    """One agent's view of the global state."""

    agent: tuple
    parts: dict
    vector: np.ndarray


def observe(state: GlobalState, agent: tuple) -> Observation:
    """Local observations:

    - core network: vec(previous band plan) then the q coupling matrices;
    - satellite n: its band index, occupancy restricted to its band, its
      served-UE indicator;
    - base station m: the occupancy vector and its served-UE indicator.
    """
    n_sats = state.prev_band_plan.shape[0]
    if agent == ("cn",):
        vec = np.concatenate(
            [state.prev_band_plan.reshape(-1).astype(float), state.coupling.reshape(-1).astype(float)]
        )
        return Observation(agent, {"band_plan": state.prev_band_plan, "coupling": state.coupling}, vec)
    kind = agent[0]
    if kind == "sat":
        n = agent[1]
        if not 0 <= n < n_sats:
            raise ValueError(f"unknown satellite agent {agent}")
        slots = np.flatnonzero(state.prev_band_plan[n])
        band_index = int(slots[0]) if slots.size else -1
        local = state.slot_occupancy[slots] if slots.size else np.zeros(0, dtype=np.int8)
        served = (state.attachment == n).astype(float)
        vec = np.concatenate([[float(band_index)], local.astype(float), served])
        return Observation(agent, {"band_index": band_index, "local_occupancy": local, "served": served}, vec)
    if kind == "bs":
        m = agent[1]
        node = n_sats + m
        served = (state.attachment == node).astype(float)
        vec = np.concatenate([state.slot_occupancy.astype(float), served])
        return Observation(agent, {"occupancy": state.slot_occupancy, "served": served}, vec)
    raise ValueError(f"unknown agent identity {agent!r}")


def inject_jammer(state: GlobalState, jam_row: np.ndarray) -> GlobalState:
    """Mark jammed slots busy in the sensed occupancy."""
    if not jam_row.any():
        return state
    occ = np.maximum(state.slot_occupancy, jam_row.astype(state.slot_occupancy.dtype))
    return replace(state, slot_occupancy=occ)


def band_options(dims: GridDims) -> list[np.ndarray]:
    """Disjoint placements of one fixed-width contiguous band per satellite."""
    if dims.n_sats == 0:
        return [np.zeros((0, dims.freq_slots), dtype=np.int8)]
    w = min(dims.band_width, dims.freq_slots)
    starts = list(range(dims.freq_slots - w + 1))
    options: list[np.ndarray] = []

    def rec(placed: list[int]) -> None:
        if len(placed) == dims.n_sats:
            m = np.zeros((dims.n_sats, dims.freq_slots), dtype=np.int8)
            for n, s0 in enumerate(placed):
                m[n, s0 : s0 + w] = 1
            options.append(m)
            return
        for s0 in starts:
            if all(s0 + w <= p or p + w <= s0 for p in placed):
                rec(placed + [s0])

    rec([])
    if not options:
        raise ValueError("no disjoint band placement exists for these dimensions")
    if len(options) > 4096:
        raise ValueError(f"{len(options)} band layouts exceed the desk-scale cap")
    return options


def _coupling_tensor(dims: GridDims, footprint: np.ndarray) -> np.ndarray:
    """C[j, n, n'] = 1 iff footprints overlap and slot j lies in candidate
    bands of both satellites.  With sliding fixed-width candidates every
    slot is coverable by every satellite, so each slice equals the
    footprint-overlap matrix (zero diagonal, symmetric)."""
    c = np.repeat(footprint[None, :, :].astype(float), dims.freq_slots, axis=0)
    for j in range(dims.freq_slots):
        np.fill_diagonal(c[j], 0.0)
    return c


@dataclass(frozen=True)
class EnvConfig:
    dims: GridDims
    links: LinkSet
    budgets: tuple[float, ...]
    tau_e: float
    tau_u: float
    eps_e: float
    eps_u: float
    weights: RewardWeights = RewardWeights()
    jammer: JammerConfig = JammerConfig()
    binary_penalties: bool = True
    cn_replans_each_slot: bool = False
    stage1_data_fraction: float = 0.5  # provisional per-UE power split (rest decoy)
    footprint_overlap: np.ndarray | None = None

    def __post_init__(self) -> None:
        if len(self.budgets) != self.dims.n_nodes:
            raise ValueError("one power budget per node required")
        if not 0.0 < self.stage1_data_fraction <= 1.0:
            raise ValueError("stage1_data_fraction must be in (0, 1]")

    def overlap_matrix(self) -> np.ndarray:
        if self.footprint_overlap is not None:
            return np.asarray(self.footprint_overlap, dtype=bool)
        return np.ones((self.dims.n_sats, self.dims.n_sats), dtype=bool)

    def provisional_powers(self, z: int) -> tuple[float, float]:
        """Stage-one per-UE (data, decoy) watts: an equal share of the node
        budget split by ``stage1_data_fraction``."""
        k = max(self.dims.ue_counts[z], 1)
        share = self.budgets[z] / k
        return share * self.stage1_data_fraction, share * (1.0 - self.stage1_data_fraction)


@dataclass(frozen=True)
class SchedSnapshot:
    """Everything a decision pass needs; cheap to copy and hash."""

    t: int
    band_index: int              # index into band_options, -1 before the first pick
    prev_band_index: int
    legit_occupancy: np.ndarray  # (q,) transmissions of the previous step
    sensed_occupancy: np.ndarray # (q,) legit OR jammer, what agents see now
    used: tuple[np.ndarray, ...] # per node (K_z, q), slots spent by each UE so far
    done: bool = False

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64([self.t, self.band_index, self.prev_band_index]).tobytes())
        h.update(self.legit_occupancy.tobytes())
        h.update(self.sensed_occupancy.tobytes())
        for u in self.used:
            h.update(u.tobytes())
        return h.hexdigest()[:16]


def feasible_slot_mask(
    dims: GridDims,
    base_allowed: np.ndarray,
    used_node: np.ndarray,
    k: int,
    picked: dict[int, int],
    later_steps: int,
    flow_cache: dict | None = None,
) -> np.ndarray:
    """Feasible slots for UE ``k`` of one node given the period history.

    ``base_allowed`` is the node's admissible slot set (a satellite's band,
    or the whole grid), ``used_node`` the (K, q) per-UE slots already spent
    this period, ``picked`` the slots other UEs of the node chose in the
    current step, and ``later_steps`` how many steps follow this one.
    Excludes slots the UE already used, slots taken within the node this
    step, and, on tight grids where greedy picks can dead-end, any choice
    whose remaining assignment problem has no completion.
    """
    q = base_allowed.size
    k_z = used_node.shape[0]
    allowed = base_allowed.copy()
    allowed &= used_node[k] == 0
    for slot in picked.values():
        allowed[slot] = False
    band_size = int(base_allowed.sum())
    total_steps = later_steps + 1 + int(used_node[k].sum())
    if band_size >= total_steps + k_z - 1 or not allowed.any():
        return allowed
    cache: dict = flow_cache if flow_cache is not None else {}
    pending = [kk for kk in range(k_z) if kk != k and kk not in picked]
    for slot in np.flatnonzero(allowed):
        rem = []
        for kk in range(k_z):
            free = set(np.flatnonzero(base_allowed & (used_node[kk] == 0)).tolist())
            if kk == k:
                free.discard(int(slot))
            if kk in picked:
                free.discard(picked[kk])
            rem.append(frozenset(free))
        step_taken = frozenset(picked.values()) | {int(slot)}
        if not _finish_step(rem, pending, step_taken, later_steps, cache):
            allowed[slot] = False
    return allowed


def _finish_step(rem, pending, step_taken, later_steps, cache) -> bool:
    """Complete the in-flight step for ``pending`` UEs, then check the
    later steps with the exact completability test."""
    if not pending:
        return _completable(tuple(rem), later_steps, cache)
    kk, rest = pending[0], pending[1:]
    for slot in sorted(rem[kk] - step_taken):
        nxt = list(rem)
        nxt[kk] = rem[kk] - {slot}
        if _finish_step(nxt, rest, step_taken | {slot}, later_steps, cache):
            return True
    return False


def _max_flow(caps: list[list[int]], adj: list[list[int]], src: int, snk: int) -> int:
    """Integer max-flow by BFS augmenting paths on adjacency lists (the
    graphs here have ~20 nodes, so plain lists beat anything fancier)."""
    n = len(caps)
    flow = 0
    while True:
        parent = [-1] * n
        parent[src] = src
        frontier = [src]
        found = False
        while frontier and not found:
            nxt = []
            for u in frontier:
                row = caps[u]
                for v in adj[u]:
                    if parent[v] < 0 and row[v] > 0:
                        parent[v] = u
                        if v == snk:
                            found = True
                            break
                        nxt.append(v)
                if found:
                    break
            frontier = nxt
        if not found:
            return flow
        push = None
        v = snk
        while v != src:
            u = parent[v]
            c = caps[u][v]
            push = c if push is None or c < push else push
            v = u
        v = snk
        while v != src:
            u = parent[v]
            caps[u][v] -= push
            caps[v][u] += push
            v = u
        flow += push


def _completable(remaining: tuple[frozenset, ...], steps: int, cache: dict) -> bool:
    """Can each UE pick ``steps`` more distinct slots from its remaining
    set, with per-step distinctness inside the node?

    Exact via max-flow: UEs demand ``steps`` units, each (UE, slot) edge
    carries at most one, each slot absorbs at most ``steps``.  A saturating
    flow is a bipartite graph with UE degrees = steps and slot degrees <=
    steps, which edge-colors into ``steps`` parallel matchings (Koenig), one
    per remaining time slot; conversely any valid schedule is such a flow.
    """
    if steps == 0:
        return True
    key = (tuple(sorted(tuple(sorted(s)) for s in remaining)), steps)
    if key in cache:
        return cache[key]
    k = len(remaining)
    if any(len(s) < steps for s in remaining):
        cache[key] = False
        return False
    slots = sorted(set().union(*remaining))
    slot_id = {s: k + 1 + i for i, s in enumerate(slots)}
    src, snk = 0, k + 1 + len(slots)
    n = snk + 1
    caps = [[0] * n for _ in range(n)]
    adj: list[list[int]] = [[] for _ in range(n)]

    def edge(u, v, c):
        caps[u][v] = c
        adj[u].append(v)
        adj[v].append(u)  # residual

    for i, rem in enumerate(remaining):
        edge(src, i + 1, steps)
        for s in rem:
            edge(i + 1, slot_id[s], 1)
    for s in slots:
        edge(slot_id[s], snk, steps)
    out = _max_flow(caps, adj, src, snk) == k * steps
    cache[key] = out
    return out


class SchedulingEnv:
    """Masked sequential slot assignment over one transmission period."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.dims = config.dims
        self.bands = band_options(config.dims)
        self.coupling = _coupling_tensor(config.dims, config.overlap_matrix())
        self._jam: JammerProcess | None = None
        self._trace = None
        self._mask_cache: dict = {}
        self._flow_cache: dict = {}

    # -- lifecycle ---------------------------------------------------------

    def reset(self, rng: np.random.Generator) -> SchedSnapshot:
        q = self.dims.freq_slots
        self._jam = JammerProcess(self.config.jammer, q, self.dims.time_slots, rng)
        legit = np.zeros(q, dtype=np.int8)
        sensed = np.maximum(legit, self._jam.row(0))
        return SchedSnapshot(
            t=0,
            band_index=-1,
            prev_band_index=-1,
            legit_occupancy=legit,
            sensed_occupancy=sensed,
            used=tuple(
                np.zeros((self.dims.ue_counts[z], q), dtype=np.int8) for z in range(self.dims.n_nodes)
            ),
            done=False,
        )

    def attach_trace(self, fh) -> None:
        self._trace = fh

    # -- agent surface -----------------------------------------------------

    def global_state(self, snap: SchedSnapshot) -> GlobalState:
        prev = (
            self.bands[snap.prev_band_index]
            if snap.prev_band_index >= 0
            else np.zeros((self.dims.n_sats, self.dims.freq_slots), dtype=np.int8)
        )
        return GlobalState(
            prev_band_plan=prev,
            coupling=self.coupling,
            slot_occupancy=snap.sensed_occupancy.copy(),
            attachment=np.asarray(self.dims.attachment, dtype=np.int8),
        )

    def decision_units(self) -> list[tuple]:
        units: list[tuple] = []
        if self.dims.n_sats:
            units.append(("cn",))
        for z in range(self.dims.n_nodes):
            for k in range(self.dims.ue_counts[z]):
                units.append(("ue", z, k))
        return units

    def net_key(self, unit: tuple) -> tuple:
        return ("cn",) if unit == ("cn",) else ("node", unit[1])

    def n_actions(self, unit: tuple) -> int:
        return len(self.bands) if unit == ("cn",) else self.dims.freq_slots

    def state_vector(self, snap: SchedSnapshot) -> np.ndarray:
        return self.global_state(snap).as_vector()

    def unit_obs(self, snap: SchedSnapshot, unit: tuple, partial: dict) -> np.ndarray:
        """Fixed-width decision input: the agent's local view plus the
        sub-decision context (UE tag, spent slots, slots taken this step)."""
        frac_t = snap.t / max(self.dims.time_slots, 1)
        if unit == ("cn",):
            base = observe(self.global_state(snap), ("cn",))
            return np.concatenate([base.vector, [frac_t]])
        _, z, k = unit
        q = self.dims.freq_slots
        state = self.global_state(snap)
        served = (state.attachment == z).astype(float)
        if self.dims.is_satellite(z):
            band_idx = partial.get(("cn",), snap.band_index)
            w = min(self.dims.band_width, q)
            local = np.zeros(w)
            head = -1.0
            if band_idx >= 0:
                slots = np.flatnonzero(self.bands[band_idx][z])
                head = slots[0] / q if slots.size else -1.0
                local[: slots.size] = snap.sensed_occupancy[slots]
            base = np.concatenate([[head], local, served])
        else:
            base = np.concatenate([snap.sensed_occupancy.astype(float), served])
        onehot = np.zeros(self.dims.ue_counts[z])
        onehot[k] = 1.0
        taken = self._taken_now(z, partial)
        return np.concatenate(
            [base, onehot, snap.used[z][k].astype(float), taken.astype(float), [frac_t]]
        )

    def obs_width(self, unit: tuple) -> int:
        snap = self._probe_snapshot()
        return self.unit_obs(snap, unit, {}).size

    def _probe_snapshot(self) -> SchedSnapshot:
        q = self.dims.freq_slots
        return SchedSnapshot(
            t=0,
            band_index=0,
            prev_band_index=0,
            legit_occupancy=np.zeros(q, dtype=np.int8),
            sensed_occupancy=np.zeros(q, dtype=np.int8),
            used=tuple(
                np.zeros((self.dims.ue_counts[z], q), dtype=np.int8) for z in range(self.dims.n_nodes)
            ),
        )

    def _agent_of(self, unit: tuple, snap: SchedSnapshot, partial: dict) -> tuple:
        if unit == ("cn",):
            return ("cn",)
        _, z, k = unit
        if self.dims.is_satellite(z):
            return ("sat", z)
        return ("bs", z - self.dims.n_sats)

    def _taken_now(self, z: int, partial: dict) -> np.ndarray:
        taken = np.zeros(self.dims.freq_slots, dtype=np.int8)
        for unit, action in partial.items():
            if unit[0] == "ue" and unit[1] == z:
                taken[action] = 1
        return taken

    def unit_mask(self, snap: SchedSnapshot, unit: tuple, partial: dict) -> np.ndarray:
        """Feasible actions for one sub-decision given earlier picks.

        CN: every disjoint band layout at period start, else hold.  UE:
        slots inside the node's band, unused by this UE this period, not
        taken within the node this step, and (on tight grids) leaving the
        remaining assignment completable.
        """
        if unit == ("cn",):
            mask = np.zeros(len(self.bands), dtype=bool)
            replan = snap.t == 0 or self.config.cn_replans_each_slot
            if replan or snap.band_index < 0:
                mask[:] = True
            else:
                mask[snap.band_index] = True
            return mask
        _, z, k = unit
        q = self.dims.freq_slots
        band_idx = partial.get(("cn",), snap.band_index)
        base_allowed = np.ones(q, dtype=bool)
        if self.dims.is_satellite(z):
            base_allowed = (
                self.bands[band_idx][z].astype(bool) if band_idx >= 0 else np.zeros(q, dtype=bool)
            )
        picked = {u[2]: act for u, act in partial.items() if u[0] == "ue" and u[1] == z}
        key = (
            z,
            k,
            snap.t,
            band_idx,
            snap.used[z].tobytes(),
            tuple(sorted(picked.items())),
        )
        hit = self._mask_cache.get(key)
        if hit is not None:
            return hit.copy()
        mask = feasible_slot_mask(
            self.dims,
            base_allowed,
            np.asarray(snap.used[z]),
            k,
            picked,
            self.dims.time_slots - snap.t - 1,
            flow_cache=self._flow_cache,
        )
        if len(self._mask_cache) > 200_000:
            self._mask_cache.clear()
        self._mask_cache[key] = mask.copy()
        return mask

    # -- dynamics ----------------------------------------------------------

    def apply(self, snap: SchedSnapshot, actions: dict) -> tuple[SchedSnapshot, float, dict]:
        """Execute one joint step; returns (next snapshot, reward, components)."""
        if snap.done:
            raise ValueError("episode is over; reset the environment")
        d = self.dims
        q = d.freq_slots
        band_idx = actions.get(("cn",), snap.band_index)
        if d.n_sats and band_idx < 0:
            raise ValueError("a band layout must be chosen before scheduling")
        band = self.bands[band_idx] if d.n_sats else np.zeros((0, q), dtype=np.int8)

        step_x = [np.zeros((d.ue_counts[z], q), dtype=np.int8) for z in range(d.n_nodes)]
        for unit, action in actions.items():
            if unit == ("cn",):
                continue
            _, z, k = unit
            if not 0 <= action < q:
                raise ValueError(f"slot {action} out of range for unit {unit}")
            if snap.used[z][k, action]:
                raise ValueError(f"unit {unit} reuses frequency {action} within the period")
            if d.is_satellite(z) and not band[z, action]:
                raise ValueError(f"unit {unit} scheduled outside its satellite band")
            step_x[z][k, action] = 1
        for z in range(d.n_nodes):
            missing = [k for k in range(d.ue_counts[z]) if step_x[z][k].sum() != 1]
            if missing:
                raise ValueError(f"node {z} UEs {missing} have no slot this step")

        reward, comps = self._reward(snap, band, step_x)

        legit = np.zeros(q, dtype=np.int8)
        for z in range(d.n_nodes):
            legit |= (step_x[z].sum(axis=0) > 0).astype(np.int8)
        used = tuple(np.clip(snap.used[z] + step_x[z], 0, 1) for z in range(d.n_nodes))
        t_next = snap.t + 1
        done = t_next >= d.time_slots
        jam_next = self._jam.row(t_next) if (self._jam is not None and not done) else np.zeros(q, dtype=np.int8)
        nxt = SchedSnapshot(
            t=t_next,
            band_index=band_idx,
            prev_band_index=band_idx,
            legit_occupancy=legit,
            sensed_occupancy=np.maximum(legit, jam_next),
            used=used,
            done=done,
        )
        if self._trace is not None:
            rec = {
                "t": snap.t,
                "state": snap.digest(),
                "actions": {str(u): int(a) for u, a in actions.items()},
                "reward": reward,
                **{k: float(v) for k, v in comps.items()},
            }
            self._trace.write(json.dumps(rec, sort_keys=True) + "\n")
        return nxt, reward, comps

    def _reward(self, snap: SchedSnapshot, band: np.ndarray, step_x: list[np.ndarray]) -> tuple[float, dict]:
        d = self.dims
        w = self.config.weights
        sps, rtps = [], []
        for z in range(d.n_nodes):
            if d.ue_counts[z] == 0:
                continue
            p_d, p_a = self.config.provisional_powers(z)
            sat = d.is_satellite(z)
            eve = self.config.links.to_eve(sat)
            user = self.config.links.to_user(sat)
            sp = secrecy_probability(
                SecrecyParams(
                    p_data=eve.mean_received_watt(p_d),
                    p_adv=eve.mean_received_watt(p_a),
                    noise=eve.noise_watt,
                    tau_e=self.config.tau_e,
                    q=d.freq_slots,
                    fading=eve.fading,
                )
            )
            rtp = reliability_probability(
                ReliabilityParams(
                    p_data=user.mean_received_watt(p_d),
                    noise=user.noise_watt,
                    tau_u=self.config.tau_u,
                    fading=user.fading,
                )
            )
            sps.extend([sp] * d.ue_counts[z])
            rtps.extend([rtp] * d.ue_counts[z])
        p_e = float(np.mean(sps)) if sps else 0.0
        p_u = float(np.mean(rtps)) if rtps else 0.0
        c1 = 1.0 if p_e >= 1.0 - self.config.eps_e else 0.0
        c2 = 1.0 if p_u >= 1.0 - self.config.eps_u else 0.0

        n_active = max(sum(int(x.sum()) for x in step_x), 1)
        occ_hits = 0
        for z in range(d.n_nodes):
            occ_hits += int((step_x[z] & snap.sensed_occupancy[None, :]).sum())
        coll = 0
        for z in range(d.n_nodes):
            per_slot = step_x[z].sum(axis=0)
            coll += int(np.maximum(per_slot - 1, 0).sum())
        tier = 0.0
        node_slots = [step_x[z].sum(axis=0) for z in range(d.n_nodes)]
        for z1 in range(d.n_nodes):
            for z2 in range(z1 + 1, d.n_nodes):
                shared = np.flatnonzero((node_slots[z1] > 0) & (node_slots[z2] > 0))
                for f in shared:
                    if z1 < d.n_sats and z2 < d.n_sats:
                        tier += float(self.coupling[f, z1, z2])
                    else:
                        tier += 1.0
        if self.config.binary_penalties:
            r_occ = 1.0 if occ_hits else 0.0
            r_coll = 1.0 if coll else 0.0
            r_tier = 1.0 if tier > 0 else 0.0
        else:
            r_occ = occ_hits / n_active
            r_coll = coll / n_active
            r_tier = tier / n_active
        reward = c1 * p_e + c2 * p_u - w.c3 * r_occ - w.c4 * r_coll - w.c5 * r_tier
        comps = {
            "p_e": p_e,
            "p_u": p_u,
            "c1": c1,
            "c2": c2,
            "r_occ": r_occ,
            "r_coll": r_coll,
            "r_tier": r_tier,
        }
        return reward, comps

    # -- plan assembly -----------------------------------------------------

    def assemble_plan(self, band_idx: int, step_rows: list[list[np.ndarray]]) -> ResourcePlan:
        """Build the period's resource plan from per-step one-hot rows."""
        d = self.dims
        xs = []
        for z in range(d.n_nodes):
            x = np.stack([step_rows[t][z] for t in range(d.time_slots)], axis=0)
            xs.append(x.astype(np.int8))
        band = self.bands[band_idx] if d.n_sats else np.zeros((0, d.freq_slots), dtype=np.int8)
        pd, pa = [], []
        for z in range(d.n_nodes):
            p_d, p_a = self.config.provisional_powers(z)
            pd.append(np.full((d.time_slots, d.ue_counts[z]), p_d))
            pa.append(np.full((d.time_slots, d.ue_counts[z]), p_a))
        return ResourcePlan(
            dims=d,
            s=BandPlan(band),
            x=OccupancyPlan(tuple(xs)),
            a=AdversarialPlan(tuple(np.zeros_like(x) for x in xs)),
            p=PowerPlan(tuple(pd), tuple(pa), self.config.budgets),
        )


def power_lattice(n_levels: int = 9) -> list[tuple[int, int]]:
    """Budget-feasible (data, decoy) level index pairs on the per-UE cap:
    levels i/(n-1) of budget/K_z per class, so i + j <= n - 1."""
    top = n_levels - 1
    return [(i, j) for i in range(n_levels) for j in range(n_levels) if i + j <= top]


@dataclass(frozen=True)
class PowerSnapshot:
    t: int
    done: bool = False

    def digest(self) -> str:
        return f"t={self.t}"


class PowerEnv:
    """Per-node (data, decoy) power-level selection on a frozen plan."""

    def __init__(
        self,
        config: EnvConfig,
        plan: ResourcePlan,
        n_levels: int = 9,
    ):
        self.config = config
        self.dims = config.dims
        self.plan = plan
        self.n_levels = n_levels
        self.lattice = power_lattice(n_levels)
        self._trace = None
        self._rtp_masks = [self._reliability_mask(z) for z in range(self.dims.n_nodes)]

    def attach_trace(self, fh) -> None:
        self._trace = fh

    def level_watts(self, z: int, level: int) -> float:
        cap = self.config.budgets[z] / max(self.dims.ue_counts[z], 1)
        return cap * level / (self.n_levels - 1)

    def _reliability_mask(self, z: int) -> np.ndarray:
        """Keep lattice points whose data level meets the reliability bound;
        if none can, fall back to the whole budget-feasible lattice (the
        bound is unattainable, so best-effort power control proceeds)."""
        user = self.config.links.to_user(self.dims.is_satellite(z))
        ok = np.zeros(len(self.lattice), dtype=bool)
        for idx, (i, _) in enumerate(self.lattice):
            p_d = self.level_watts(z, i)
            if p_d <= 0.0:
                continue
            rtp = reliability_probability(
                ReliabilityParams(user.mean_received_watt(p_d), user.noise_watt, self.config.tau_u, user.fading)
            )
            ok[idx] = rtp >= 1.0 - self.config.eps_u
        if not ok.any():
            ok[:] = True
        return ok

    def reset(self, rng: np.random.Generator) -> PowerSnapshot:
        return PowerSnapshot(t=0)

    def decision_units(self) -> list[tuple]:
        return [("node", z) for z in range(self.dims.n_nodes)]

    def net_key(self, unit: tuple) -> tuple:
        return unit

    def n_actions(self, unit: tuple) -> int:
        return len(self.lattice)

    def state_vector(self, snap: PowerSnapshot) -> np.ndarray:
        d = self.dims
        t = min(snap.t, d.time_slots - 1)
        parts = [np.array([snap.t / d.time_slots])]
        for z in range(d.n_nodes):
            parts.append(self.plan.x[z][t].reshape(-1).astype(float))
            parts.append(self.plan.a[z][t].reshape(-1).astype(float))
        return np.concatenate(parts)

    def unit_obs(self, snap: PowerSnapshot, unit: tuple, partial: dict) -> np.ndarray:
        _, z = unit
        d = self.dims
        t = min(snap.t, d.time_slots - 1)
        return np.concatenate(
            [
                self.plan.x[z][t].reshape(-1).astype(float),
                self.plan.a[z][t].reshape(-1).astype(float),
                [1.0, snap.t / d.time_slots],
            ]
        )

    def obs_width(self, unit: tuple) -> int:
        return self.unit_obs(PowerSnapshot(0), unit, {}).size

    def unit_mask(self, snap: PowerSnapshot, unit: tuple, partial: dict) -> np.ndarray:
        return self._rtp_masks[unit[1]].copy()

    def apply(self, snap: PowerSnapshot, actions: dict) -> tuple[PowerSnapshot, float, dict]:
        """One power decision per node; the security gate applies per node
        (the reward formula is node-indexed), so one node missing its
        target cannot zero every node's incentive to protect."""
        if snap.done:
            raise ValueError("episode is over; reset the environment")
        d = self.dims
        t = snap.t
        sps = []
        gated_terms = []
        cost_terms = []
        for (_, z), a_idx in sorted(actions.items()):
            i, j = self.lattice[a_idx]
            if not self._rtp_masks[z][a_idx] and self._rtp_masks[z].any():
                raise ValueError(f"node {z} picked a masked power level")
            p_d = self.level_watts(z, i)
            p_a = self.level_watts(z, j)
            sat = d.is_satellite(z)
            eve = self.config.links.to_eve(sat)
            k_z = d.ue_counts[z]
            has_decoys = bool(self.plan.a[z][t].any())
            node_sps = []
            for k in range(k_z):
                if p_d <= 0.0:
                    node_sps.append(0.0)
                    continue
                node_sps.append(
                    secrecy_probability(
                        SecrecyParams(
                            p_data=eve.mean_received_watt(p_d),
                            p_adv=eve.mean_received_watt(p_a if has_decoys else 0.0),
                            noise=eve.noise_watt,
                            tau_e=self.config.tau_e,
                            q=d.freq_slots,
                            fading=eve.fading,
                        )
                    )
                )
            node_p_e = float(np.mean(node_sps)) if node_sps else 0.0
            d1_z = 1.0 if node_p_e >= 1.0 - self.config.eps_e else 0.0
            sps.extend(node_sps)
            gated_terms.append(d1_z * node_p_e)
            cost_terms.append(k_z * p_a / self.config.budgets[z])
        p_e = float(np.mean(sps)) if sps else 0.0
        d1 = 1.0 if p_e >= 1.0 - self.config.eps_e else 0.0
        cost = float(np.mean(cost_terms)) if cost_terms else 0.0
        reward = float(np.mean(gated_terms)) if gated_terms else 0.0
        reward -= self.config.weights.d2 * cost
        comps = {"p_e": p_e, "d1": d1, "power_cost": cost}
        t_next = t + 1
        nxt = PowerSnapshot(t=t_next, done=t_next >= d.time_slots)
        if self._trace is not None:
            rec = {
                "t": t,
                "state": snap.digest(),
                "actions": {str(u): int(a) for u, a in actions.items()},
                "reward": reward,
                **comps,
            }
            self._trace.write(json.dumps(rec, sort_keys=True) + "\n")
        return nxt, reward, comps

    def power_plan_from_levels(self, levels: list[dict]) -> PowerPlan:
        """Per-step chosen levels -> a PowerPlan aligned with the frozen plan."""
        d = self.dims
        pd = [np.zeros((d.time_slots, d.ue_counts[z])) for z in range(d.n_nodes)]
        pa = [np.zeros((d.time_slots, d.ue_counts[z])) for z in range(d.n_nodes)]
        for t, step in enumerate(levels):
            for (_, z), a_idx in step.items():
                i, j = self.lattice[a_idx]
                pd[z][t, :] = self.level_watts(z, i)
                pa[z][t, :] = self.level_watts(z, j)
        return PowerPlan(tuple(pd), tuple(pa), self.config.budgets)
