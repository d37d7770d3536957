"""Value-decomposition training with double-estimator targets.

Each decision unit (the core-network band picker, one sub-decision per
served UE in the scheduling stage, one per node in the power stage) owns a
masked discrete action space and shares a value network with its node.  A
state-conditioned monotone mixer aggregates the per-unit values into a team
value: hypernetworks map the global state to non-negative mixing weights
(absolute value of their raw outputs), so the team value can never decrease
when a unit's value increases, and factorized per-unit argmax decodes the
team-optimal joint action.

Updates follow the double-estimator rule: online networks pick the
successor joint action, target networks evaluate it,

    y = r + discount * Q_tot_target(s', a*(s')),

and one stochastic gradient step shrinks (y - Q_tot(s, a))^2 through the
mixer and the unit networks.  Exploration is epsilon-greedy inside the
feasibility masks; replay is uniform over a ring buffer; target parameters
re-sync to the online parameters on a fixed update period.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nn import (
    LayerGrads,
    MlpNet,
    add_grads,
    backward,
    forward,
    load_net,
    save_net,
    sgd_update,
    zero_grads,
)

__all__ = [
    "TrainConfig",
    "Transition",
    "ReplayBuffer",
    "Mixer",
    "mixer_create",
    "qtot",
    "qtot_batch",
    "masked_argmax",
    "greedy_joint_action",
    "ddqn_target",
    "QmixTrainer",
    "TrainingDivergedError",
    "clip_grads",
    "decode_schedule",
    "decode_power_levels",
    "save_policy_bundle",
    "load_policy_bundle",
]


@dataclass(frozen=True)
class TrainConfig:
    episodes: int
    discount: float = 0.98
    learning_rate: float = 0.05
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.6
    target_sync: int = 200
    batch_size: int = 32
    buffer_capacity: int = 10_000
    min_buffer: int = 64
    hidden: tuple[int, ...] = (64, 64)
    mixer_embed: int = 16
    hyper_hidden: int = 16
    clip_norm: float = 5.0
    divergence_loss: float = 1e6

    def __post_init__(self) -> None:
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        if not (0.0 <= self.eps_end <= self.eps_start <= 1.0):
            raise ValueError("epsilon schedule must satisfy 0 <= end <= start <= 1")

    def epsilon(self, episode: int) -> float:
        horizon = max(1, int(self.episodes * self.eps_decay_fraction))
        frac = min(1.0, episode / horizon)
        return self.eps_start + (self.eps_end - self.eps_start) * frac


@dataclass(frozen=True)
class Transition:
    """One replay record; immutable once stored."""

    obs: tuple[np.ndarray, ...]
    actions: tuple[int, ...]
    reward: float
    state_vec: np.ndarray
    next_snap: object
    next_state_vec: np.ndarray | None
    done: bool


class ReplayBuffer:
    """Ring buffer with uniform sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._cursor] = item
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, rng: np.random.Generator, n: int) -> list[Transition]:
        idx = rng.integers(0, len(self._items), size=n)
        return [self._items[i] for i in idx]


@dataclass
class Mixer:
    """State-conditioned monotone aggregation of per-unit values.

    ``identity=True`` degrades to a plain sum (used for single-agent
    training loops); otherwise Q_tot = |w2(s)| . tanh(|W1(s)| q + b1(s)) +
    v(s) with the weight hypernetworks forced non-negative through abs.
    """

    n_agents: int
    embed: int
    hyper_w1: MlpNet | None = None
    hyper_b1: MlpNet | None = None
    hyper_w2: MlpNet | None = None
    hyper_v: MlpNet | None = None
    identity: bool = False

    def nets(self) -> dict[str, MlpNet]:
        if self.identity:
            return {}
        return {
            "hyper_w1": self.hyper_w1,
            "hyper_b1": self.hyper_b1,
            "hyper_w2": self.hyper_w2,
            "hyper_v": self.hyper_v,
        }

    def copy(self) -> "Mixer":
        if self.identity:
            return Mixer(self.n_agents, self.embed, identity=True)
        return Mixer(
            self.n_agents,
            self.embed,
            self.hyper_w1.copy(),
            self.hyper_b1.copy(),
            self.hyper_w2.copy(),
            self.hyper_v.copy(),
        )

    def sync_from(self, other: "Mixer") -> None:
        for mine, theirs in zip(self.nets().values(), other.nets().values()):
            for i in range(len(mine.weights)):
                mine.weights[i][:] = theirs.weights[i]
                mine.biases[i][:] = theirs.biases[i]


def mixer_create(
    state_dim: int,
    n_agents: int,
    embed: int,
    hyper_hidden: int,
    rng: np.random.Generator,
    identity: bool = False,
) -> Mixer:
    if identity:
        return Mixer(n_agents, embed, identity=True)
    mk = lambda out: MlpNet.create([state_dim, hyper_hidden, out], ["tanh", "linear"], rng)
    return Mixer(n_agents, embed, mk(embed * n_agents), mk(embed), mk(embed), mk(1))


def qtot_batch(mixer: Mixer, qs: np.ndarray, states: np.ndarray):
    """Team values for a batch; returns (values, cache for backward)."""
    qs = np.atleast_2d(qs)
    if mixer.identity:
        return qs.sum(axis=1), {"identity": True}
    states = np.atleast_2d(states)
    b = qs.shape[0]
    w1_raw, t_w1 = forward(mixer.hyper_w1, states)
    b1, t_b1 = forward(mixer.hyper_b1, states)
    w2_raw, t_w2 = forward(mixer.hyper_w2, states)
    v, t_v = forward(mixer.hyper_v, states)
    w1 = np.abs(w1_raw).reshape(b, mixer.embed, mixer.n_agents)
    pre = np.einsum("bea,ba->be", w1, qs) + b1
    h = np.tanh(pre)
    w2 = np.abs(w2_raw)
    vals = (w2 * h).sum(axis=1) + v[:, 0]
    cache = {
        "identity": False,
        "qs": qs,
        "w1_raw": w1_raw,
        "w1": w1,
        "h": h,
        "w2_raw": w2_raw,
        "w2": w2,
        "tapes": (t_w1, t_b1, t_w2, t_v),
    }
    return vals, cache


def qtot(mixer: Mixer, agent_values, state_vec) -> float:
    """Team value for one joint evaluation."""
    vals, _ = qtot_batch(mixer, np.asarray(agent_values, dtype=float)[None, :],
                         np.asarray(state_vec, dtype=float)[None, :])
    return float(vals[0])


def qtot_backward(mixer: Mixer, cache: dict, dvals: np.ndarray):
    """Gradients of sum_b dvals_b * qtot_b: per-unit value gradients plus
    parameter gradients for each hypernetwork."""
    if cache["identity"]:
        return np.repeat(dvals[:, None], mixer.n_agents, axis=1), {}
    qs, w1, h, w2 = cache["qs"], cache["w1"], cache["h"], cache["w2"]
    d = dvals[:, None]
    dh = d * w2
    dw2_abs = d * h
    dpre = dh * (1.0 - h * h)
    dq = np.einsum("bea,be->ba", w1, dpre)
    dw1_abs = dpre[:, :, None] * qs[:, None, :]
    t_w1, t_b1, t_w2, t_v = cache["tapes"]
    b = dvals.shape[0]
    dw1_raw = (dw1_abs.reshape(b, -1)) * np.sign(cache["w1_raw"])
    dw2_raw = dw2_abs * np.sign(cache["w2_raw"])
    grads = {}
    grads["hyper_w1"], _ = backward(mixer.hyper_w1, t_w1, dw1_raw)
    grads["hyper_b1"], _ = backward(mixer.hyper_b1, t_b1, dpre)
    grads["hyper_w2"], _ = backward(mixer.hyper_w2, t_w2, dw2_raw)
    grads["hyper_v"], _ = backward(mixer.hyper_v, t_v, d)
    return dq, grads


def masked_argmax(qvals: np.ndarray, mask: np.ndarray) -> int:
    """Greedy feasible action; ties break toward the lowest index."""
    if not mask.any():
        raise ValueError("no feasible action under the mask")
    masked = np.where(mask, qvals, -np.inf)
    return int(np.argmax(masked))


def greedy_joint_action(qvalue_vectors, masks) -> list[int]:
    """Per-agent masked argmax; with a monotone mixer this equals the joint
    argmax of the team value over the product action space."""
    return [masked_argmax(q, m) for q, m in zip(qvalue_vectors, masks)]


def ddqn_target(
    rewards: np.ndarray, next_team_values: np.ndarray, dones: np.ndarray, discount: float
) -> np.ndarray:
    """y = r + discount * Q_tot_target(s', a*) with y = r on terminal steps."""
    return rewards + discount * np.where(dones, 0.0, next_team_values)


def clip_grads(grads: LayerGrads, max_norm: float) -> LayerGrads:
    """Scale the whole gradient so its global L2 norm is at most max_norm."""
    if max_norm <= 0:
        return grads
    total = 0.0
    for dw, db in grads:
        total += float((dw * dw).sum() + (db * db).sum())
    norm = total ** 0.5
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return [(dw * scale, db * scale) for dw, db in grads]


class TrainingDivergedError(RuntimeError):
    def __init__(self, loss: float, updates: int):
        super().__init__(f"loss {loss:.3g} exceeded the divergence guard after {updates} updates")
        self.loss = loss
        self.updates = updates


class QmixTrainer:
    """Centralized training over an environment exposing decision units.

    The environment protocol: ``reset(rng) -> snap``, ``decision_units()``,
    ``unit_obs(snap, unit, partial)``, ``unit_mask(snap, unit, partial)``,
    ``apply(snap, actions) -> (snap', r, info)``, ``state_vector(snap)``,
    ``net_key(unit)``, ``n_actions(unit)``, ``obs_width(unit)``.
    Units sharing a ``net_key`` share parameters.
    """

    def __init__(self, env, config: TrainConfig, rng: np.random.Generator, identity_mixer: bool = False):
        self.env = env
        self.config = config
        self.units = env.decision_units()
        self.keys = []
        for u in self.units:
            k = env.net_key(u)
            if k not in self.keys:
                self.keys.append(k)
        self.online: dict = {}
        self.target: dict = {}
        child = rng.spawn(len(self.keys) + 1)
        for k, r in zip(self.keys, child[:-1]):
            unit = next(u for u in self.units if env.net_key(u) == k)
            widths = [env.obs_width(unit), *config.hidden, env.n_actions(unit)]
            net = MlpNet.create(widths, ["tanh"] * len(config.hidden) + ["linear"], r)
            self.online[k] = net
            self.target[k] = net.copy()
        state_dim = env.state_vector(env.reset(np.random.default_rng(0))).size
        self.mixer = mixer_create(
            state_dim, len(self.units), config.mixer_embed, config.hyper_hidden, child[-1], identity_mixer
        )
        self.mixer_target = self.mixer.copy()
        self.buffer = ReplayBuffer(config.buffer_capacity)
        self.updates = 0

    # -- acting ------------------------------------------------------------

    def unit_q(self, nets: dict, unit, obs: np.ndarray) -> np.ndarray:
        y, _ = forward(nets[self.env.net_key(unit)], obs)
        return y

    def decode_step(self, snap, eps: float, rng: np.random.Generator):
        """Sequential masked decode; exploration draws uniform feasible actions."""
        partial: dict = {}
        obs_list, masks = [], []
        for unit in self.units:
            obs = self.env.unit_obs(snap, unit, partial)
            mask = self.env.unit_mask(snap, unit, partial)
            if eps > 0.0 and rng.random() < eps:
                action = int(rng.choice(np.flatnonzero(mask)))
            else:
                action = masked_argmax(self.unit_q(self.online, unit, obs), mask)
            partial[unit] = action
            obs_list.append(obs)
            masks.append(mask)
        return partial, obs_list, masks

    def _greedy_actions(self, nets: dict, snap) -> tuple[dict, list[np.ndarray]]:
        partial: dict = {}
        obs_list = []
        for unit in self.units:
            obs = self.env.unit_obs(snap, unit, partial)
            mask = self.env.unit_mask(snap, unit, partial)
            partial[unit] = masked_argmax(self.unit_q(nets, unit, obs), mask)
            obs_list.append(obs)
        return partial, obs_list

    # -- learning ----------------------------------------------------------

    def store(self, obs_list, partial, reward, state_vec, next_snap, next_state_vec, done) -> None:
        self.buffer.push(
            Transition(
                obs=tuple(np.array(o, dtype=float) for o in obs_list),
                actions=tuple(partial[u] for u in self.units),
                reward=float(reward),
                state_vec=np.array(state_vec, dtype=float),
                next_snap=next_snap,
                next_state_vec=None if done else np.array(next_state_vec, dtype=float),
                done=bool(done),
            )
        )

    def next_team_value(self, tr: Transition) -> float:
        """Double-estimator successor value: online networks choose the
        joint action, target networks and target mixer evaluate it."""
        if tr.done:
            return 0.0
        astar, next_obs = self._greedy_actions(self.online, tr.next_snap)
        qs = np.array(
            [
                self.unit_q(self.target, unit, next_obs[j])[astar[unit]]
                for j, unit in enumerate(self.units)
            ]
        )
        val, _ = qtot_batch(self.mixer_target, qs[None, :], tr.next_state_vec[None, :])
        return float(val[0])

    def targets(self, batch: list[Transition]) -> np.ndarray:
        rewards = np.array([tr.reward for tr in batch])
        dones = np.array([tr.done for tr in batch])
        memo: dict[int, float] = {}
        next_vals = np.zeros(len(batch))
        for i, tr in enumerate(batch):
            key = id(tr)
            if key not in memo:
                memo[key] = self.next_team_value(tr)
            next_vals[i] = memo[key]
        return ddqn_target(rewards, next_vals, dones, self.config.discount)

    def loss_and_grads(self, batch: list[Transition]):
        """Squared-error loss against the double-estimator targets and its
        gradients through the mixer and the unit networks."""
        b = len(batch)
        n_units = len(self.units)
        y = self.targets(batch)

        qs_cur = np.zeros((b, n_units))
        tapes = {}
        key_rows: dict = {k: [] for k in self.keys}
        for j, unit in enumerate(self.units):
            key_rows[self.env.net_key(unit)].append(j)
        obs_mat = {
            k: np.stack([tr.obs[j] for tr in batch for j in rows])
            for k, rows in key_rows.items()
        }
        act_mat = {
            k: np.array([tr.actions[j] for tr in batch for j in rows], dtype=int)
            for k, rows in key_rows.items()
        }
        for k in self.keys:
            out, tape = forward(self.online[k], obs_mat[k])
            tapes[k] = (out, tape)
            rows = key_rows[k]
            sel = out[np.arange(out.shape[0]), act_mat[k]]
            qs_cur[:, rows] = sel.reshape(b, len(rows))
        states = np.stack([tr.state_vec for tr in batch])
        team, cache = qtot_batch(self.mixer, qs_cur, states)

        err = team - y
        loss = float(np.mean(err**2))
        dvals = 2.0 * err / b
        dq, mixer_grads = qtot_backward(self.mixer, cache, dvals)
        key_grads = {}
        for k in self.keys:
            out, tape = tapes[k]
            dy = np.zeros_like(out)
            rows = key_rows[k]
            dy[np.arange(out.shape[0]), act_mat[k]] = dq[:, rows].reshape(-1)
            key_grads[k], _ = backward(self.online[k], tape, dy)
        return loss, key_grads, mixer_grads

    def update(self, rng: np.random.Generator) -> float:
        """One double-estimator descent step on a uniform replay batch."""
        cfg = self.config
        batch = self.buffer.sample(rng, cfg.batch_size)
        loss, key_grads, mixer_grads = self.loss_and_grads(batch)
        if not np.isfinite(loss) or loss > cfg.divergence_loss:
            raise TrainingDivergedError(loss, self.updates)
        for k in self.keys:
            sgd_update(self.online[k], clip_grads(key_grads[k], cfg.clip_norm), cfg.learning_rate)
        for name, net in self.mixer.nets().items():
            sgd_update(net, clip_grads(mixer_grads[name], cfg.clip_norm), cfg.learning_rate)
        self.updates += 1
        if self.updates % cfg.target_sync == 0:
            self.sync_targets()
        return loss

    def sync_targets(self) -> None:
        for k in self.keys:
            self.target[k] = self.online[k].copy()
        self.mixer_target = self.mixer.copy()

    # -- main loop ---------------------------------------------------------

    def train(self, rng: np.random.Generator, on_episode=None) -> list[dict]:
        """Run the configured episode budget; returns the training curve."""
        cfg = self.config
        curve = []
        for ep in range(cfg.episodes):
            eps = cfg.epsilon(ep)
            snap = self.env.reset(rng)
            ep_reward, ep_losses, infos = 0.0, [], []
            while not snap.done:
                state_vec = self.env.state_vector(snap)
                partial, obs_list, _ = self.decode_step(snap, eps, rng)
                nxt, reward, info = self.env.apply(snap, partial)
                next_vec = None if nxt.done else self.env.state_vector(nxt)
                self.store(obs_list, partial, reward, state_vec, nxt, next_vec, nxt.done)
                ep_reward += reward
                infos.append(info)
                if len(self.buffer) >= max(cfg.min_buffer, cfg.batch_size):
                    ep_losses.append(self.update(rng))
                snap = nxt
            row = {
                "episode": ep,
                "epsilon": eps,
                "reward": ep_reward,
                "loss": float(np.mean(ep_losses)) if ep_losses else float("nan"),
                "p_e": float(np.mean([i.get("p_e", 0.0) for i in infos])),
                "p_u": float(np.mean([i.get("p_u", 0.0) for i in infos])),
            }
            curve.append(row)
            if on_episode is not None:
                on_episode(row)
        return curve

    def greedy_episode(self, rng: np.random.Generator):
        """One exploration-free rollout; returns (actions per step, rewards, infos)."""
        snap = self.env.reset(rng)
        steps, rewards, infos = [], [], []
        while not snap.done:
            partial, _, _ = self.decode_step(snap, 0.0, rng)
            snap, r, info = self.env.apply(snap, partial)
            steps.append(partial)
            rewards.append(r)
            infos.append(info)
        return steps, rewards, infos


def decode_schedule(env, trainer: QmixTrainer, rng: np.random.Generator):
    """Greedy-decode one period into a resource plan."""
    steps, rewards, infos = trainer.greedy_episode(rng)
    d = env.dims
    band = steps[0].get(("cn",), -1)
    rows = []
    for partial in steps:
        step = [np.zeros((d.ue_counts[z], d.freq_slots), dtype=np.int8) for z in range(d.n_nodes)]
        for unit, act in partial.items():
            if unit[0] == "ue":
                step[unit[1]][unit[2], act] = 1
        rows.append(step)
    plan = env.assemble_plan(band, rows)
    return plan, rewards, infos


def decode_power_levels(trainer: QmixTrainer, rng: np.random.Generator):
    """Greedy-decode per-step power level choices on a PowerEnv."""
    steps, rewards, infos = trainer.greedy_episode(rng)
    return steps, rewards, infos


def save_policy_bundle(path: str | Path, trainer: QmixTrainer, metadata: dict) -> None:
    """Checkpoint: one parameter file per network plus a JSON manifest."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    names = {}
    for i, k in enumerate(trainer.keys):
        fname = f"unit_{i}.bin"
        save_net(trainer.online[k], path / fname)
        names[str(k)] = fname
    for name, net in trainer.mixer.nets().items():
        save_net(net, path / f"{name}.bin")
    manifest = {
        "nets": names,
        "mixer": sorted(trainer.mixer.nets()),
        "n_agents": trainer.mixer.n_agents,
        "embed": trainer.mixer.embed,
        "identity_mixer": trainer.mixer.identity,
        **metadata,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_policy_bundle(path: str | Path) -> tuple[dict[str, MlpNet], Mixer, dict]:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    nets = {k: load_net(path / fname) for k, fname in manifest["nets"].items()}
    if manifest.get("identity_mixer"):
        mixer = Mixer(manifest["n_agents"], manifest["embed"], identity=True)
    else:
        mixer = Mixer(
            manifest["n_agents"],
            manifest["embed"],
            load_net(path / "hyper_w1.bin"),
            load_net(path / "hyper_b1.bin"),
            load_net(path / "hyper_w2.bin"),
            load_net(path / "hyper_v.bin"),
        )
    return nets, mixer, manifest