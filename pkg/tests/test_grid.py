"""Constraint-kernel tests against an independent brute-force checker.

``brute_force_feasible`` below was written before the kernel and checks
every constraint family with plain loops; the oracle-equivalence sweep
compares it with ``validate`` over entire candidate spaces.
"""

import math

import numpy as np
import pytest

from stnsec.grid import (
    AdversarialPlan,
    BandPlan,
    CapacityError,
    GridDims,
    OccupancyPlan,
    PlanStructureError,
    PowerPlan,
    ResourcePlan,
    candidate_space_size,
    cochannel_conflicts,
    enumerate_candidate_plans,
    enumerate_feasible_plans,
    plan_from_text,
    plan_to_text,
    transmissions_at,
    validate,
)
from stnsec.numerics import make_rng


def brute_force_feasible(plan: ResourcePlan, contiguous_bands: bool = True) -> bool:
    """Plain-loop re-statement of every hard constraint."""
    d = plan.dims
    q, L = d.freq_slots, d.time_slots
    # one satellite per slot
    for f in range(q):
        if sum(int(plan.s.matrix[n, f]) for n in range(d.n_sats)) > 1:
            return False
    # contiguous runs of bounded width
    for n in range(d.n_sats):
        slots = [f for f in range(q) if plan.s.matrix[n, f]]
        if slots:
            if contiguous_bands and slots != list(range(slots[0], slots[-1] + 1)):
                return False
            if len(slots) > d.band_width:
                return False
    if q < L:
        return False
    for z in range(d.n_nodes):
        K = d.ue_counts[z]
        x, a = plan.x[z], plan.a[z]
        for l in range(L):
            for k in range(K):
                if sum(int(x[l, k, f]) for f in range(q)) != 1:
                    return False
                if sum(int(a[l, k, f]) for f in range(q)) > 1:
                    return False
                for f in range(q):
                    if x[l, k, f] and a[l, k, f]:
                        return False
                    if d.is_satellite(z) and x[l, k, f] and not plan.s.matrix[z, f]:
                        return False
        for l in range(L):
            for f in range(q):
                if sum(int(x[l, k, f]) for k in range(K)) > 1:
                    return False
        for k in range(K):
            for f in range(q):
                if sum(int(x[l, k, f]) for l in range(L)) > 1:
                    return False
        for l in range(L):
            total = 0.0
            for k in range(K):
                if plan.p.p_data[z][l, k] < 0 or plan.p.p_adv[z][l, k] < 0:
                    return False
                total += plan.p.p_data[z][l, k] + plan.p.p_adv[z][l, k]
            if total > plan.p.budgets[z] * (1 + 1e-12):
                return False
    return True


def tiny_plan(x_row, a_row, pd=0.4, pa=0.4, budget=1.0):
    # 1 BS, 1 UE, L=1, q=len(x_row)
    q = len(x_row)
    dims = GridDims(0, 1, 1, q, (1,))
    return ResourcePlan(
        dims=dims,
        s=BandPlan(np.zeros((0, q), dtype=np.int8)),
        x=OccupancyPlan((np.array([[x_row]], dtype=np.int8),)),
        a=AdversarialPlan((np.array([[a_row]], dtype=np.int8),)),
        p=PowerPlan((np.array([[pd]]),), (np.array([[pa]]),), (budget,)),
    )


class TestValidate:
    def test_minimal_feasible_instance(self):
        report = validate(tiny_plan([1, 0], [0, 1]))
        assert report.feasible

    def test_overlap_flagged_with_index(self):
        report = validate(tiny_plan([1, 0], [1, 0]))
        assert not report.feasible
        v = report.violations[0]
        assert v.family == "adv-data-overlap"
        assert v.index == (0, 0, 0, 0)

    def test_same_slot_two_ues(self):
        dims = GridDims(0, 1, 1, 3, (2,))
        x = np.zeros((1, 2, 3), dtype=np.int8)
        x[0, 0, 1] = 1
        x[0, 1, 1] = 1
        plan = ResourcePlan(
            dims=dims,
            s=BandPlan(np.zeros((0, 3), dtype=np.int8)),
            x=OccupancyPlan((x,)),
            a=AdversarialPlan((np.zeros_like(x),)),
            p=PowerPlan((np.full((1, 2), 0.3),), (np.zeros((1, 2)),), (1.0,)),
        )
        report = validate(plan)
        assert "node-slot-collision" in report.families()
        assert brute_force_feasible(plan) is False

    def test_budget_violation(self):
        report = validate(tiny_plan([1, 0], [0, 1], pd=0.8, pa=0.4, budget=1.0))
        assert report.families() == {"power-budget"}

    def test_band_coupling_and_contiguity(self):
        dims = GridDims(1, 0, 1, 4, (1,))
        s = np.array([[1, 0, 1, 0]], dtype=np.int8)  # not contiguous
        x = np.zeros((1, 1, 4), dtype=np.int8)
        x[0, 0, 1] = 1  # outside the active band
        plan = ResourcePlan(
            dims=dims,
            s=BandPlan(s),
            x=OccupancyPlan((x,)),
            a=AdversarialPlan((np.zeros_like(x),)),
            p=PowerPlan((np.array([[0.1]]),), (np.zeros((1, 1)),), (1.0,)),
        )
        fams = validate(plan).families()
        assert "band-contiguity" in fams and "band-coupling" in fams
        assert validate(plan, contiguous_bands=False).families() == {"band-coupling"}

    def test_freq_reuse_impossible_reported(self):
        dims = GridDims(0, 1, 3, 2, (1,))
        x = np.zeros((3, 1, 2), dtype=np.int8)
        x[0, 0, 0] = x[1, 0, 1] = x[2, 0, 0] = 1
        plan = ResourcePlan(
            dims=dims,
            s=BandPlan(np.zeros((0, 2), dtype=np.int8)),
            x=OccupancyPlan((x,)),
            a=AdversarialPlan((np.zeros_like(x),)),
            p=PowerPlan((np.full((3, 1), 0.1),), (np.zeros((3, 1)),), (1.0,)),
        )
        fams = validate(plan).families()
        assert "freq-reuse-impossible" in fams and "freq-reuse" in fams

    def test_shape_mismatch_is_structural(self):
        dims = GridDims(0, 1, 1, 2, (1,))
        with pytest.raises(PlanStructureError):
            ResourcePlan(
                dims=dims,
                s=BandPlan(np.zeros((0, 2), dtype=np.int8)),
                x=OccupancyPlan((np.zeros((1, 1, 3), dtype=np.int8),)),
                a=AdversarialPlan((np.zeros((1, 1, 2), dtype=np.int8),)),
                p=PowerPlan((np.zeros((1, 1)),), (np.zeros((1, 1)),), (1.0,)),
            )

    def test_deterministic_and_order_independent(self):
        plan = tiny_plan([1, 0], [1, 0], pd=2.0)
        r1 = [str(v) for v in validate(plan).violations]
        r2 = [str(v) for v in validate(plan).violations]
        assert r1 == r2


class TestOracleEquivalence:
    @pytest.mark.parametrize(
        "dims,levels,adv",
        [
            (GridDims(0, 1, 1, 2, (1,)), (0.4,), True),
            (GridDims(0, 1, 2, 3, (1,)), (0.3, 0.8), True),
            (GridDims(0, 1, 1, 4, (2,)), (0.4,), True),
            (GridDims(0, 1, 3, 3, (1,)), (0.4,), False),
            (GridDims(1, 0, 1, 3, (1,)), (0.4,), True),
            (GridDims(1, 1, 1, 2, (1, 1)), (0.4,), True),
        ],
    )
    def test_validate_agrees_with_brute_force(self, dims, levels, adv):
        n = 0
        for plan in enumerate_candidate_plans(dims, levels, include_adversarial=adv, guard=200_000):
            assert validate(plan).feasible == brute_force_feasible(plan)
            n += 1
        assert n == candidate_space_size(dims, levels, adv)

    def test_guard_trips(self):
        dims = GridDims(0, 1, 4, 6, (3,))
        with pytest.raises(CapacityError):
            next(enumerate_candidate_plans(dims, (0.4,)))

    @pytest.mark.parametrize("q,kz", [(2, 1), (3, 2), (4, 2), (5, 3)])
    def test_count_matches_permutation_formula(self, q, kz):
        # Single node, single time slot, no decoys: the only binding
        # constraint is distinct one-hot rows, so the count is q!/(q-K)!.
        dims = GridDims(0, 1, 1, q, (kz,))
        plans = list(enumerate_feasible_plans(dims, (0.1,), include_adversarial=False))
        assert len(plans) == math.perm(q, kz)

    def test_single_ue_two_slots_hand_count(self):
        # One UE, L=1, q=2, one power level: 2 data slots x (other slot or
        # no decoy) = 4 feasible plans.
        dims = GridDims(0, 1, 1, 2, (1,))
        plans = list(enumerate_feasible_plans(dims, (0.4,)))
        assert len(plans) == 4

    def test_pigeonhole_zero_plans(self):
        dims = GridDims(0, 1, 1, 2, (3,))
        assert list(enumerate_feasible_plans(dims, (0.1,), include_adversarial=False)) == []


class TestCochannel:
    def build(self, rows_by_node, q=4, L=1):
        # rows_by_node: list over nodes of list over UEs of (data_slot, adv_slot|None)
        n_bs = len(rows_by_node)
        counts = tuple(len(r) for r in rows_by_node)
        dims = GridDims(0, n_bs, L, q, counts)
        xs, ads = [], []
        for rows in rows_by_node:
            x = np.zeros((L, len(rows), q), dtype=np.int8)
            a = np.zeros_like(x)
            for k, (df, af) in enumerate(rows):
                x[0, k, df] = 1
                if af is not None:
                    a[0, k, af] = 1
            xs.append(x)
            ads.append(a)
        return ResourcePlan(
            dims=dims,
            s=BandPlan(np.zeros((0, q), dtype=np.int8)),
            x=OccupancyPlan(tuple(xs)),
            a=AdversarialPlan(tuple(ads)),
            p=PowerPlan(
                tuple(np.full((L, c), 0.1) for c in counts),
                tuple(np.zeros((L, c)) for c in counts),
                tuple(1.0 for _ in counts),
            ),
        )

    def test_orthogonal_plan_conflict_free(self):
        plan = self.build([[(0, 1)], [(2, 3)]])
        assert cochannel_conflicts(plan) == []

    def test_two_bs_same_cell(self):
        plan = self.build([[(3, None)], [(3, None)]])
        conflicts = cochannel_conflicts(plan)
        assert len(conflicts) == 1
        l, f, txs = conflicts[0]
        assert (l, f) == (0, 3)
        assert {t[0] for t in txs} == {0, 1}

    def test_matches_pairwise_scan(self):
        rng = make_rng(31)
        for _ in range(25):
            q = 5
            rows = [
                [(int(rng.integers(q)), int(rng.integers(q)) if rng.random() < 0.7 else None) for _ in range(2)]
                for _ in range(2)
            ]
            plan = self.build(rows, q=q)
            got = {(l, f) for l, f, _ in cochannel_conflicts(plan)}
            # exhaustive pairwise scan over all transmission pairs
            txs = []
            for z in range(plan.dims.n_nodes):
                for l, k, f in zip(*np.nonzero(plan.x[z])):
                    txs.append((z, int(l), int(f)))
                for l, k, f in zip(*np.nonzero(plan.a[z])):
                    txs.append((z, int(l), int(f)))
            want = set()
            for i in range(len(txs)):
                for j in range(i + 1, len(txs)):
                    zi, li, fi = txs[i]
                    zj, lj, fj = txs[j]
                    if zi != zj and li == lj and fi == fj:
                        want.add((li, fi))
            assert got == want


class TestSerialization:
    def test_round_trip(self):
        dims = GridDims(1, 1, 2, 4, (1, 2))
        s = np.array([[1, 1, 0, 0]], dtype=np.int8)
        x_sat = np.zeros((2, 1, 4), dtype=np.int8)
        x_sat[0, 0, 0] = x_sat[1, 0, 1] = 1
        x_bs = np.zeros((2, 2, 4), dtype=np.int8)
        x_bs[0, 0, 2] = x_bs[0, 1, 3] = x_bs[1, 0, 3] = x_bs[1, 1, 2] = 1
        a_sat = np.zeros_like(x_sat)
        a_sat[0, 0, 1] = 1
        plan = ResourcePlan(
            dims=dims,
            s=BandPlan(s),
            x=OccupancyPlan((x_sat, x_bs)),
            a=AdversarialPlan((a_sat, np.zeros_like(x_bs))),
            p=PowerPlan(
                (np.full((2, 1), 12.5), np.full((2, 2), 0.625)),
                (np.full((2, 1), 3.0601), np.zeros((2, 2))),
                (199.5262314968879, 5.011872336272722),
            ),
        )
        back = plan_from_text(plan_to_text(plan))
        assert back.dims == plan.dims
        assert np.array_equal(back.s.matrix, plan.s.matrix)
        for z in range(2):
            assert np.array_equal(back.x[z], plan.x[z])
            assert np.array_equal(back.a[z], plan.a[z])
            assert np.array_equal(back.p.p_data[z], plan.p.p_data[z])
            assert np.array_equal(back.p.p_adv[z], plan.p.p_adv[z])
        assert back.p.budgets == plan.p.budgets
        # byte-stable: serializing the round-tripped plan is identical
        assert plan_to_text(back) == plan_to_text(plan)

    def test_golden_header(self):
        text = plan_to_text(tiny_plan([1, 0], [0, 1]))
        lines = text.splitlines()
        assert lines[0] == "STN-PLAN 1"
        assert lines[1] == "dims 0 1 1 2 2"
        assert lines[2] == "ue_counts 1"

    def test_rejects_bad_magic(self):
        with pytest.raises(PlanStructureError):
            plan_from_text("NOT-A-PLAN\n")


def test_transmissions_index():
    plan = tiny_plan([0, 1], [1, 0])
    txs = transmissions_at(plan)
    assert txs[(0, 1)] == [(0, 0, "data")]
    assert txs[(0, 0)] == [(0, 0, "adv")]
