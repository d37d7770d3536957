"""Comparison schedulers: chaotic-map frequency hopping with superposed
artificial noise, and greedy lowest-slot allocation.

The hopping baseline drives each UE with its own logistic map
x <- r x (1 - x), quantized to a slot index; collisions (within the node,
with the UE's own earlier slots, or with band limits) resolve to the next
feasible slot cyclically.  A configurable fraction of each UE's power is
diverted from the data signal into artificial noise superposed on the same
slot, which lands in the eavesdropper's denominator.

The greedy baseline assigns each UE the lowest-index feasible slot with an
equal power split and no protection at all; its pattern is static and
maximally predictable, which is exactly what makes it a useful floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import band_options, feasible_slot_mask
from .grid import (
    AdversarialPlan,
    BandPlan,
    GridDims,
    OccupancyPlan,
    PowerPlan,
    ResourcePlan,
)

__all__ = ["LogisticHopper", "hop_next", "an_fh_plan", "greedy_plan"]


@dataclass
class LogisticHopper:
    """Deterministic chaotic slot sequence; replayable from (r, x0)."""

    r: float
    state: float
    q: int

    def __post_init__(self) -> None:
        if not 3.57 < self.r <= 4.0:
            raise ValueError(f"map parameter must lie in (3.57, 4.0], got {self.r!r}")
        if not 0.0 < self.state < 1.0:
            raise ValueError(f"state must lie in (0, 1), got {self.state!r}")
        if self.r == 4.0 and self.state == 0.5:
            # x = 0.5 maps to 1.0 and then the orbit collapses to 0
            raise ValueError("x0 = 0.5 is a degenerate seed for r = 4")
        if self.q < 1:
            raise ValueError("slot count must be >= 1")


def hop_next(hopper: LogisticHopper) -> int:
    """Advance the map and return the next slot index."""
    hopper.state = hopper.r * hopper.state * (1.0 - hopper.state)
    return min(int(hopper.state * hopper.q), hopper.q - 1)


def _assign(dims: GridDims, band: np.ndarray, prefer) -> tuple[list[np.ndarray], ...]:
    """Fill the occupancy tensors step by step.

    ``prefer(z, k, t, mask)`` returns the chosen slot among the feasible
    mask.  Raises when some UE has no feasible slot (infeasible dims).
    """
    xs = [np.zeros((dims.time_slots, dims.ue_counts[z], dims.freq_slots), dtype=np.int8) for z in range(dims.n_nodes)]
    used = [np.zeros((dims.ue_counts[z], dims.freq_slots), dtype=np.int8) for z in range(dims.n_nodes)]
    for t in range(dims.time_slots):
        for z in range(dims.n_nodes):
            base = band[z].astype(bool) if dims.is_satellite(z) else np.ones(dims.freq_slots, dtype=bool)
            picked: dict[int, int] = {}
            for k in range(dims.ue_counts[z]):
                mask = feasible_slot_mask(dims, base, used[z], k, picked, dims.time_slots - t - 1)
                if not mask.any():
                    raise ValueError(
                        f"no feasible slot for node {z} UE {k} at step {t}; dimensions are infeasible"
                    )
                slot = prefer(z, k, t, mask)
                picked[k] = slot
                xs[z][t, k, slot] = 1
                used[z][k, slot] = 1
    return xs


def _band_matrix(dims: GridDims, band_index: int) -> np.ndarray:
    if dims.n_sats == 0:
        return np.zeros((0, dims.freq_slots), dtype=np.int8)
    return band_options(dims)[band_index]


def an_fh_plan(
    dims: GridDims,
    hoppers: list[LogisticHopper],
    an_power_fraction: float,
    budgets: tuple[float, ...],
    band_index: int = 0,
) -> ResourcePlan:
    """Logistic-map hopping with artificial noise on the data slot.

    One hopper per UE (node-major order, distinct seeds).  The AN fraction
    of each UE's power share is carried in the plan's non-data power with
    no decoy row, i.e. superposed on the data slot.
    """
    if len(hoppers) != dims.n_ues:
        raise ValueError(f"need one hopper per UE ({dims.n_ues}), got {len(hoppers)}")
    if not 0.0 <= an_power_fraction < 1.0:
        raise ValueError("AN fraction must lie in [0, 1)")
    band = _band_matrix(dims, band_index)
    hopper_of = {
        (z, k): hoppers[dims.ue_index(z, k)]
        for z in range(dims.n_nodes)
        for k in range(dims.ue_counts[z])
    }

    def prefer(z, k, t, mask):
        want = hop_next(hopper_of[(z, k)])
        if dims.is_satellite(z):
            # map the hop onto the satellite's band
            slots = np.flatnonzero(band[z])
            want = int(slots[want % slots.size]) if slots.size else want
        for off in range(dims.freq_slots):
            slot = (want + off) % dims.freq_slots
            if mask[slot]:
                return slot
        raise AssertionError("mask was checked non-empty")

    xs = _assign(dims, band, prefer)
    pd, pa = [], []
    for z in range(dims.n_nodes):
        share = budgets[z] / max(dims.ue_counts[z], 1)
        pd.append(np.full((dims.time_slots, dims.ue_counts[z]), share * (1.0 - an_power_fraction)))
        pa.append(np.full((dims.time_slots, dims.ue_counts[z]), share * an_power_fraction))
    return ResourcePlan(
        dims=dims,
        s=BandPlan(band),
        x=OccupancyPlan(tuple(xs)),
        a=AdversarialPlan(tuple(np.zeros_like(x) for x in xs)),
        p=PowerPlan(tuple(pd), tuple(pa), tuple(budgets)),
    )


def greedy_plan(dims: GridDims, budgets: tuple[float, ...], band_index: int = 0) -> ResourcePlan:
    """Lowest-index feasible slot per UE, equal power split, no protection."""
    band = _band_matrix(dims, band_index)

    def prefer(z, k, t, mask):
        return int(np.flatnonzero(mask)[0])

    xs = _assign(dims, band, prefer)
    pd = []
    for z in range(dims.n_nodes):
        share = budgets[z] / max(dims.ue_counts[z], 1)
        pd.append(np.full((dims.time_slots, dims.ue_counts[z]), share))
    return ResourcePlan(
        dims=dims,
        s=BandPlan(band),
        x=OccupancyPlan(tuple(xs)),
        a=AdversarialPlan(tuple(np.zeros_like(x) for x in xs)),
        p=PowerPlan(tuple(pd), tuple(np.zeros_like(p) for p in pd), tuple(budgets)),
    )
