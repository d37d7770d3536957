"""Time-frequency resource plans and the constraint kernel.

A ``ResourcePlan`` bundles the four decision structures for one
transmission period:

- ``BandPlan`` (S): which contiguous frequency-slot run each satellite
  operates; at most one satellite per slot.
- ``OccupancyPlan`` (X): per node, per time slot, the one-hot transmission
  slot of each served UE.
- ``AdversarialPlan`` (A): decoy-signal placements, at most one slot per
  (node, time, UE) and never overlapping that UE's data slot.
- ``PowerPlan`` (P): per-(node, time, UE) data and non-data powers in watts
  under a per-node budget.  The non-data power ``p_a`` radiates on the UE's
  decoy slot when A marks one; when the UE has no decoy entry, ``p_a`` is
  interpreted as artificial noise superposed on the data slot (used by the
  noise-assisted hopping baseline).

``validate`` enforces every hard constraint family and reports each
violation with its offending index.  ``enumerate_candidate_plans`` spans a
documented finite candidate space for tiny instances and
``enumerate_feasible_plans`` filters it through ``validate``; together they
form the brute-force oracle the kernel is checked against.

Plans serialize to a plain-text block format (see ``plan_to_text``) used by
golden-file tests and the CLI.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridDims",
    "BandPlan",
    "OccupancyPlan",
    "AdversarialPlan",
    "PowerPlan",
    "ResourcePlan",
    "Violation",
    "FeasibilityReport",
    "PlanStructureError",
    "CapacityError",
    "validate",
    "cochannel_conflicts",
    "transmissions_at",
    "enumerate_candidate_plans",
    "enumerate_feasible_plans",
    "empty_plan",
    "plan_to_text",
    "plan_from_text",
]


class PlanStructureError(ValueError):
    """Plan components are dimensionally inconsistent."""


class CapacityError(RuntimeError):
    """Requested enumeration exceeds the brute-force search-space guard."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridDims:
    """Grid dimensions and the fixed UE-to-node attachment.

    Nodes are indexed satellites first (0..n_sats-1), then base stations.
    ``ue_counts[z]`` is the number of UEs served by node z; global UE
    indices are node-major.  ``max_band_width`` caps each satellite's
    contiguous run; it defaults to freq_slots // n_sats.
    """

    n_sats: int
    n_bs: int
    time_slots: int
    freq_slots: int
    ue_counts: tuple[int, ...]
    max_band_width: int | None = None

    def __post_init__(self) -> None:
        if self.n_sats < 0 or self.n_bs < 0 or self.n_sats + self.n_bs == 0:
            raise ValueError("need at least one node")
        if self.time_slots < 1 or self.freq_slots < 1:
            raise ValueError("time_slots and freq_slots must be >= 1")
        if len(self.ue_counts) != self.n_nodes:
            raise ValueError(
                f"ue_counts must have one entry per node ({self.n_nodes}), got {len(self.ue_counts)}"
            )
        if any(k < 0 for k in self.ue_counts):
            raise ValueError("ue_counts must be >= 0")
        object.__setattr__(self, "ue_counts", tuple(int(k) for k in self.ue_counts))
        if self.max_band_width is None:
            default = self.freq_slots // self.n_sats if self.n_sats else self.freq_slots
            object.__setattr__(self, "max_band_width", default)
        if self.max_band_width < 1:
            raise ValueError("max_band_width must be >= 1")

    @property
    def n_nodes(self) -> int:
        return self.n_sats + self.n_bs

    @property
    def n_ues(self) -> int:
        return sum(self.ue_counts)

    @property
    def band_width(self) -> int:
        return self.max_band_width

    def is_satellite(self, z: int) -> bool:
        return z < self.n_sats

    @property
    def attachment(self) -> tuple[int, ...]:
        """Node index of each global UE (node-major ordering)."""
        out: list[int] = []
        for z, k in enumerate(self.ue_counts):
            out.extend([z] * k)
        return tuple(out)

    def ue_index(self, z: int, k: int) -> int:
        return sum(self.ue_counts[:z]) + k


@dataclass(frozen=True)
class BandPlan:
    """Binary satellite-by-slot operation matrix."""

    matrix: np.ndarray  # (n_sats, freq_slots), {0, 1}

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.int8)
        if m.ndim != 2:
            raise PlanStructureError("band plan must be a 2-D matrix")
        object.__setattr__(self, "matrix", _frozen(m))

    def band_slots(self, n: int) -> np.ndarray:
        return np.flatnonzero(self.matrix[n])


@dataclass(frozen=True)
class OccupancyPlan:
    """Per-node binary tensors (time_slots, ue_count, freq_slots)."""

    tensors: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        ts = tuple(_frozen(np.asarray(t, dtype=np.int8)) for t in self.tensors)
        if any(t.ndim != 3 for t in ts):
            raise PlanStructureError("occupancy tensors must be 3-D (time, ue, freq)")
        object.__setattr__(self, "tensors", ts)

    def __getitem__(self, z: int) -> np.ndarray:
        return self.tensors[z]


class AdversarialPlan(OccupancyPlan):
    """Decoy placements; same layout as ``OccupancyPlan``."""


@dataclass(frozen=True)
class PowerPlan:
    """Data/non-data powers per (node, time, UE) and per-node budgets."""

    p_data: tuple[np.ndarray, ...]  # each (time_slots, ue_count), watts
    p_adv: tuple[np.ndarray, ...]
    budgets: tuple[float, ...]      # watts per node

    def __post_init__(self) -> None:
        pd = tuple(_frozen(np.asarray(t, dtype=float)) for t in self.p_data)
        pa = tuple(_frozen(np.asarray(t, dtype=float)) for t in self.p_adv)
        if len(pd) != len(pa) or len(pd) != len(self.budgets):
            raise PlanStructureError("power plan needs one (p_data, p_adv, budget) triple per node")
        if any(t.ndim != 2 for t in pd + pa):
            raise PlanStructureError("power tensors must be 2-D (time, ue)")
        object.__setattr__(self, "p_data", pd)
        object.__setattr__(self, "p_adv", pa)
        object.__setattr__(self, "budgets", tuple(float(b) for b in self.budgets))


@dataclass(frozen=True)
class ResourcePlan:
    dims: GridDims
    s: BandPlan
    x: OccupancyPlan
    a: AdversarialPlan
    p: PowerPlan

    def __post_init__(self) -> None:
        d = self.dims
        if self.s.matrix.shape != (d.n_sats, d.freq_slots):
            raise PlanStructureError(
                f"band plan shape {self.s.matrix.shape} != {(d.n_sats, d.freq_slots)}"
            )
        for name, plan in (("occupancy", self.x), ("adversarial", self.a)):
            if len(plan.tensors) != d.n_nodes:
                raise PlanStructureError(f"{name} plan needs one tensor per node")
            for z, t in enumerate(plan.tensors):
                want = (d.time_slots, d.ue_counts[z], d.freq_slots)
                if t.shape != want:
                    raise PlanStructureError(f"{name} tensor for node {z}: {t.shape} != {want}")
        for z in range(d.n_nodes):
            want = (d.time_slots, d.ue_counts[z])
            if self.p.p_data[z].shape != want or self.p.p_adv[z].shape != want:
                raise PlanStructureError(f"power tensors for node {z} must have shape {want}")


@dataclass(frozen=True)
class Violation:
    family: str
    index: tuple
    detail: str

    def __str__(self) -> str:
        return f"{self.family} at {self.index}: {self.detail}"


@dataclass
class FeasibilityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def families(self) -> set[str]:
        return {v.family for v in self.violations}

    def __str__(self) -> str:
        if self.feasible:
            return "feasible"
        return "\n".join(str(v) for v in self.violations)


def validate(plan: ResourcePlan, *, contiguous_bands: bool = True) -> FeasibilityReport:
    """Check every hard constraint family; empty report iff feasible.

    Families reported: band-exclusivity, band-contiguity, band-width,
    slot-unique (one slot per UE per time), node-slot-collision (one UE per
    slot per node per time), freq-reuse (each UE uses a frequency at most
    once per period; reported as freq-reuse-impossible when freq_slots <
    time_slots makes it unsatisfiable outright), adv-multiplicity,
    adv-data-overlap, power-negative, power-budget, and band-coupling
    (satellite UEs only on their satellite's active slots).
    """
    d = plan.dims
    report = FeasibilityReport()
    add = report.violations.append

    col_sums = plan.s.matrix.sum(axis=0)
    for f in np.flatnonzero(col_sums > 1):
        add(Violation("band-exclusivity", (int(f),), f"{col_sums[f]} satellites share slot {f}"))
    for n in range(d.n_sats):
        slots = plan.s.band_slots(n)
        if slots.size:
            if contiguous_bands and slots.size != slots[-1] - slots[0] + 1:
                add(Violation("band-contiguity", (n,), f"active slots {slots.tolist()} are not one run"))
            if slots.size > d.band_width:
                add(Violation("band-width", (n,), f"band spans {slots.size} > {d.band_width} slots"))

    if d.freq_slots < d.time_slots:
        add(
            Violation(
                "freq-reuse-impossible",
                (),
                f"{d.freq_slots} frequency slots cannot support {d.time_slots} "
                "time slots of transmission without frequency reuse",
            )
        )

    for z in range(d.n_nodes):
        x = plan.x[z]
        a = plan.a[z]
        per_row = x.sum(axis=2)
        for l, k in zip(*np.nonzero(per_row != 1)):
            add(Violation("slot-unique", (z, int(l), int(k)), f"UE occupies {per_row[l, k]} slots"))
        per_slot = x.sum(axis=1)
        for l, f in zip(*np.nonzero(per_slot > 1)):
            add(
                Violation(
                    "node-slot-collision", (z, int(l), int(f)), f"{per_slot[l, f]} UEs share the slot"
                )
            )
        per_freq = x.sum(axis=0)
        for k, f in zip(*np.nonzero(per_freq > 1)):
            add(
                Violation(
                    "freq-reuse", (z, int(k), int(f)), f"UE revisits frequency {f} {per_freq[k, f]} times"
                )
            )
        adv_rows = a.sum(axis=2)
        for l, k in zip(*np.nonzero(adv_rows > 1)):
            add(Violation("adv-multiplicity", (z, int(l), int(k)), f"{adv_rows[l, k]} decoy slots"))
        overlap = np.logical_and(x == 1, a == 1)
        for l, k, f in zip(*np.nonzero(overlap)):
            add(
                Violation(
                    "adv-data-overlap", (z, int(l), int(k), int(f)), "decoy placed on the data slot"
                )
            )
        pd, pa = plan.p.p_data[z], plan.p.p_adv[z]
        for l, k in zip(*np.nonzero((pd < 0) | (pa < 0))):
            add(Violation("power-negative", (z, int(l), int(k)), "negative power entry"))
        totals = (pd + pa).sum(axis=1)
        for l in np.flatnonzero(totals > plan.p.budgets[z] * (1 + 1e-12)):
            add(
                Violation(
                    "power-budget",
                    (z, int(l)),
                    f"{totals[l]:.6g} W exceeds budget {plan.p.budgets[z]:.6g} W",
                )
            )
        if d.is_satellite(z):
            allowed = plan.s.matrix[z]
            bad = np.logical_and(x == 1, allowed[None, None, :] == 0)
            for l, k, f in zip(*np.nonzero(bad)):
                add(
                    Violation(
                        "band-coupling",
                        (z, int(l), int(k), int(f)),
                        "scheduled outside the satellite's active band",
                    )
                )
    return report


def transmissions_at(plan: ResourcePlan) -> dict[tuple[int, int], list[tuple[int, int, str]]]:
    """Map (time, freq) -> transmissions [(node, ue, 'data'|'adv'), ...].

    Superposed artificial noise shares the data entry's slot and is not
    listed separately.
    """
    out: dict[tuple[int, int], list[tuple[int, int, str]]] = {}
    for z in range(plan.dims.n_nodes):
        for arr, tag in ((plan.x[z], "data"), (plan.a[z], "adv")):
            for l, k, f in zip(*np.nonzero(arr)):
                out.setdefault((int(l), int(f)), []).append((z, int(k), tag))
    return out


def cochannel_conflicts(plan: ResourcePlan) -> list[tuple[int, int, tuple[tuple[int, int, str], ...]]]:
    """All (time, freq) cells where transmissions from distinct nodes meet."""
    conflicts = []
    for (l, f), txs in sorted(transmissions_at(plan).items()):
        if len({z for z, _, _ in txs}) >= 2:
            conflicts.append((l, f, tuple(sorted(txs))))
    return conflicts


def empty_plan(dims: GridDims, budgets: tuple[float, ...] | None = None) -> ResourcePlan:
    """All-zero plan scaffold (not feasible: every UE must occupy one slot)."""
    if budgets is None:
        budgets = tuple(1.0 for _ in range(dims.n_nodes))
    shape3 = lambda z: (dims.time_slots, dims.ue_counts[z], dims.freq_slots)
    shape2 = lambda z: (dims.time_slots, dims.ue_counts[z])
    return ResourcePlan(
        dims=dims,
        s=BandPlan(np.zeros((dims.n_sats, dims.freq_slots), dtype=np.int8)),
        x=OccupancyPlan(tuple(np.zeros(shape3(z), dtype=np.int8) for z in range(dims.n_nodes))),
        a=AdversarialPlan(tuple(np.zeros(shape3(z), dtype=np.int8) for z in range(dims.n_nodes))),
        p=PowerPlan(
            tuple(np.zeros(shape2(z)) for z in range(dims.n_nodes)),
            tuple(np.zeros(shape2(z)) for z in range(dims.n_nodes)),
            budgets,
        ),
    )


def _band_candidates(dims: GridDims) -> list[np.ndarray]:
    """Per-satellite fixed-width contiguous runs, combined over satellites.

    Width is dims.band_width (or the whole grid when it exceeds it);
    combinations may overlap, which validate flags as band-exclusivity.
    """
    if dims.n_sats == 0:
        return [np.zeros((0, dims.freq_slots), dtype=np.int8)]
    w = min(dims.band_width, dims.freq_slots)
    starts = range(dims.freq_slots - w + 1)
    out = []
    for combo in itertools.product(starts, repeat=dims.n_sats):
        m = np.zeros((dims.n_sats, dims.freq_slots), dtype=np.int8)
        for n, s0 in enumerate(combo):
            m[n, s0 : s0 + w] = 1
        out.append(m)
    return out


def candidate_space_size(
    dims: GridDims, power_levels: tuple[float, ...], include_adversarial: bool = True
) -> int:
    q = dims.freq_slots
    n_rows = dims.time_slots * dims.n_ues
    w = min(dims.band_width, q)
    bands = (q - w + 1) ** dims.n_sats if dims.n_sats else 1
    adv = (q + 1) ** n_rows if include_adversarial else 1
    powers = len(power_levels) ** (dims.n_nodes * (2 if include_adversarial else 1))
    return bands * q**n_rows * adv * powers


def enumerate_candidate_plans(
    dims: GridDims,
    power_levels: tuple[float, ...],
    budgets: tuple[float, ...] | None = None,
    include_adversarial: bool = True,
    guard: int = 10_000_000,
):
    """Yield every plan in the brute-force candidate space.

    Candidates: each satellite picks one fixed-width contiguous band, each
    (node, time, UE) picks one data slot (so one-slot-per-UE holds by
    construction) and optionally one decoy slot or none, and each node
    applies one uniform power level per signal class.  All other constraint
    families can be violated within this space, which is what the oracle
    comparison needs.
    """
    size = candidate_space_size(dims, power_levels, include_adversarial)
    if size > guard:
        raise CapacityError(f"candidate space {size} exceeds guard {guard}")
    if budgets is None:
        budgets = tuple(1.0 for _ in range(dims.n_nodes))
    q = dims.freq_slots
    rows = [(z, l, k) for z in range(dims.n_nodes) for l in range(dims.time_slots) for k in range(dims.ue_counts[z])]
    adv_choices = list(range(-1, q)) if include_adversarial else [-1]
    power_pairs = (
        list(itertools.product(power_levels, repeat=2)) if include_adversarial else [(lv, 0.0) for lv in power_levels]
    )
    for s_matrix in _band_candidates(dims):
        for x_choice in itertools.product(range(q), repeat=len(rows)):
            for a_choice in itertools.product(adv_choices, repeat=len(rows)):
                for node_powers in itertools.product(power_pairs, repeat=dims.n_nodes):
                    x = [np.zeros((dims.time_slots, dims.ue_counts[z], q), dtype=np.int8) for z in range(dims.n_nodes)]
                    a = [np.zeros_like(x[z]) for z in range(dims.n_nodes)]
                    for (z, l, k), xf, af in zip(rows, x_choice, a_choice):
                        x[z][l, k, xf] = 1
                        if af >= 0:
                            a[z][l, k, af] = 1
                    pd = [np.full((dims.time_slots, dims.ue_counts[z]), node_powers[z][0]) for z in range(dims.n_nodes)]
                    pa = [np.full((dims.time_slots, dims.ue_counts[z]), node_powers[z][1]) for z in range(dims.n_nodes)]
                    yield ResourcePlan(
                        dims=dims,
                        s=BandPlan(s_matrix),
                        x=OccupancyPlan(tuple(x)),
                        a=AdversarialPlan(tuple(a)),
                        p=PowerPlan(tuple(pd), tuple(pa), budgets),
                    )


def enumerate_feasible_plans(
    dims: GridDims,
    power_levels: tuple[float, ...],
    budgets: tuple[float, ...] | None = None,
    include_adversarial: bool = True,
    guard: int = 10_000_000,
    contiguous_bands: bool = True,
):
    """Exactly the candidate plans that pass ``validate``."""
    for plan in enumerate_candidate_plans(dims, power_levels, budgets, include_adversarial, guard):
        if validate(plan, contiguous_bands=contiguous_bands).feasible:
            yield plan


def plan_to_text(plan: ResourcePlan) -> str:
    """Serialize to the plain-text block format.

    Header lines (magic, dims, ue_counts, budgets), then the band matrix as
    0/1 rows, then per node the X and A blocks ((time, ue) row-major, one
    frequency row per line) and the PD/PA blocks (one time slot per line,
    decimal watts).
    """
    d = plan.dims
    lines = [
        "STN-PLAN 1",
        f"dims {d.n_sats} {d.n_bs} {d.time_slots} {d.freq_slots} {d.band_width}",
        "ue_counts " + " ".join(str(k) for k in d.ue_counts),
        "budgets " + " ".join(repr(b) for b in plan.p.budgets),
        "S",
    ]
    for n in range(d.n_sats):
        lines.append(" ".join(str(int(v)) for v in plan.s.matrix[n]))
    for z in range(d.n_nodes):
        lines.append(f"node {z}")
        for tag, arr in (("X", plan.x[z]), ("A", plan.a[z])):
            lines.append(tag)
            for l in range(d.time_slots):
                for k in range(d.ue_counts[z]):
                    lines.append(" ".join(str(int(v)) for v in arr[l, k]))
        for tag, arr in (("PD", plan.p.p_data[z]), ("PA", plan.p.p_adv[z])):
            lines.append(tag)
            for l in range(d.time_slots):
                lines.append(" ".join(repr(float(v)) for v in arr[l]))
    return "\n".join(lines) + "\n"


def plan_from_text(text: str) -> ResourcePlan:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    it = iter(lines)
    magic = next(it)
    if magic.strip() != "STN-PLAN 1":
        raise PlanStructureError(f"unrecognized plan header {magic!r}")
    tok = next(it).split()
    if tok[0] != "dims":
        raise PlanStructureError("expected dims line")
    n_sats, n_bs, time_slots, freq_slots, band_width = map(int, tok[1:6])
    counts = tuple(int(v) for v in next(it).split()[1:])
    budgets = tuple(float(v) for v in next(it).split()[1:])
    dims = GridDims(n_sats, n_bs, time_slots, freq_slots, counts, max_band_width=band_width)
    if next(it).strip() != "S":
        raise PlanStructureError("expected S block")
    s = np.array([[int(v) for v in next(it).split()] for _ in range(n_sats)], dtype=np.int8)
    s = s.reshape(n_sats, freq_slots)
    xs, ads, pds, pas = [], [], [], []
    for z in range(dims.n_nodes):
        if next(it).split() != ["node", str(z)]:
            raise PlanStructureError(f"expected node {z} block")
        blocks = {}
        for tag in ("X", "A"):
            if next(it).strip() != tag:
                raise PlanStructureError(f"expected {tag} block for node {z}")
            rows = [
                [int(v) for v in next(it).split()]
                for _ in range(time_slots * counts[z])
            ]
            blocks[tag] = np.array(rows, dtype=np.int8).reshape(time_slots, counts[z], freq_slots)
        for tag in ("PD", "PA"):
            if next(it).strip() != tag:
                raise PlanStructureError(f"expected {tag} block for node {z}")
            rows = [[float(v) for v in next(it).split()] for _ in range(time_slots)]
            blocks[tag] = np.array(rows, dtype=float).reshape(time_slots, counts[z])
        xs.append(blocks["X"])
        ads.append(blocks["A"])
        pds.append(blocks["PD"])
        pas.append(blocks["PA"])
    return ResourcePlan(
        dims=dims,
        s=BandPlan(s),
        x=OccupancyPlan(tuple(xs)),
        a=AdversarialPlan(tuple(ads)),
        p=PowerPlan(tuple(pds), tuple(pas), budgets),
    )
