"""Closed-form SP/RTP checks against Monte-Carlo oracles and hand values."""

import math

import numpy as np
import pytest

from stnsec.channel import LinkKind, LinkModel
from stnsec.grid import (
    AdversarialPlan,
    BandPlan,
    GridDims,
    OccupancyPlan,
    PowerPlan,
    ResourcePlan,
)
from stnsec.metrics import (
    InfeasiblePlanError,
    LinkSet,
    Receiver,
    ReliabilityParams,
    SecrecyParams,
    assumed_decoy_watt,
    mc_reliability,
    mc_secrecy,
    plan_objective,
    reliability_probability,
    rtp_satellite,
    rtp_terrestrial,
    secrecy_probability,
    sinr_with_interference,
    sp_satellite,
    sp_terrestrial,
)
from stnsec.numerics import ExpPowerDist, RicianPowerDist, make_rng, marcum_q1

NOISE = 1.0  # tests work in normalized received-power units


def sat_params(p_d, p_a, tau=1.0, q=4, omega=3.0, **kw):
    return SecrecyParams(p_d, p_a, NOISE, tau, q, RicianPowerDist(omega), **kw)


def terr_params(p_d, p_a, tau=1.0, q=4, omega_mean=0.75, **kw):
    return SecrecyParams(p_d, p_a, NOISE, tau, q, ExpPowerDist(omega_mean), **kw)


class TestSecrecyClosedForm:
    def test_q_one_keeps_only_the_miss_branch(self):
        p = sat_params(2.0, 1.0, q=1)
        a = math.sqrt(2 * 3.0)
        b = math.sqrt(2 * 4.0 * NOISE * 1.0 / 2.0)
        assert sp_satellite(p) == pytest.approx(1.0 - marcum_q1(a, b), abs=1e-12)

    def test_terrestrial_hand_value_point_five(self):
        # Both exponents at ln 2 with q = 2: 0.5 * 0.5 + 0.5 * 0.5.
        p_d = NOISE * 1.0 / (0.75 * math.log(2))
        p = terr_params(p_d, p_d, tau=1.0, q=2)
        assert sp_terrestrial(p) == pytest.approx(0.5, abs=1e-12)

    def test_terrestrial_strong_decoy_limit(self):
        p_d = NOISE / (0.75 * math.log(2))
        p = terr_params(p_d, 1e15, tau=1.0, q=2)
        assert sp_terrestrial(p) == pytest.approx(0.75, abs=1e-6)

    def test_zero_decoy_drops_the_false_alarm_branch(self):
        p = terr_params(2.0, 0.0, q=8)
        assert sp_terrestrial(p) == pytest.approx((1 / 8) * (1 - math.exp(-1.0 / (0.75 * 2.0))))

    def test_rician_to_rayleigh_reduction(self):
        for ratio in np.linspace(0.1, 4.0, 5):
            for q in (2, 16, 64):
                ps = sat_params(1.0, ratio, q=q, omega=0.0)
                pt = terr_params(1.0, ratio, q=q, omega_mean=1.0)
                assert sp_satellite(ps) == pytest.approx(sp_terrestrial(pt), abs=1e-6)

    def test_family_dispatch_guards(self):
        with pytest.raises(ValueError):
            sp_satellite(terr_params(1.0, 1.0))
        with pytest.raises(ValueError):
            sp_terrestrial(sat_params(1.0, 1.0))

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            sat_params(0.0, 1.0)
        with pytest.raises(ValueError):
            sat_params(1.0, -0.5)
        with pytest.raises(ValueError):
            SecrecyParams(1.0, 1.0, NOISE, 1.0, 0, RicianPowerDist(1.0))

    def test_self_noise_can_make_detection_impossible(self):
        # p_d <= tau_e * p_sn: the data branch is never detected.
        p = terr_params(1.0, 0.0, tau=2.0, q=4, p_self_noise=0.6)
        assert sp_terrestrial(p) == pytest.approx(1 / 4)


class TestReliabilityClosedForm:
    def test_ln2_point(self):
        p = ReliabilityParams(1.0 / math.log(2), NOISE, 1.0, ExpPowerDist(1.0))
        assert rtp_terrestrial(p) == pytest.approx(0.5, abs=1e-12)

    def test_infinite_power_limits(self):
        assert rtp_terrestrial(
            ReliabilityParams(1e15, NOISE, 1.0, ExpPowerDist(1.0))
        ) == pytest.approx(1.0, abs=1e-9)
        assert rtp_satellite(
            ReliabilityParams(1e15, NOISE, 1.0, RicianPowerDist(5.0))
        ) == pytest.approx(1.0, abs=1e-9)

    def test_hand_value(self):
        p = ReliabilityParams(20.0, NOISE, 1.0, ExpPowerDist(1.0))
        assert rtp_terrestrial(p) == pytest.approx(math.exp(-0.05), abs=1e-12)

    def test_monotone_in_power(self):
        sat = [
            rtp_satellite(ReliabilityParams(p, NOISE, 1.0, RicianPowerDist(5.0)))
            for p in np.linspace(0.2, 30, 25)
        ]
        assert all(a < b for a, b in zip(sat, sat[1:]))

    def test_omega_zero_reduction(self):
        for p in np.linspace(0.3, 10, 7):
            a = rtp_satellite(ReliabilityParams(p, NOISE, 1.0, RicianPowerDist(0.0)))
            b = rtp_terrestrial(ReliabilityParams(p, NOISE, 1.0, ExpPowerDist(1.0)))
            assert a == pytest.approx(b, abs=1e-6)


class TestMonteCarloAgreement:
    def test_secrecy_grid(self):
        rng = make_rng(101)
        fadings = [RicianPowerDist(0.5), RicianPowerDist(3.0), RicianPowerDist(8.0),
                   ExpPowerDist(0.75), ExpPowerDist(1.5)]
        for fading in fadings:
            for ratio in (0.1, 0.5, 1.0, 2.0, 5.0):
                for q in (2, 16, 64):
                    params = SecrecyParams(1.0, ratio, NOISE, 1.0, q, fading)
                    theory = secrecy_probability(params)
                    est, se = mc_secrecy(params, 200_000, rng)
                    assert abs(est - theory) <= max(3 * se, 1e-3), (fading, ratio, q)

    def test_reliability_points(self):
        rng = make_rng(103)
        for fading in (RicianPowerDist(5.0), ExpPowerDist(1.0)):
            for p_d in (0.5, 2.0, 10.0):
                params = ReliabilityParams(p_d, NOISE, 1.0, fading)
                theory = reliability_probability(params)
                est, se = mc_reliability(params, 200_000, rng)
                assert abs(est - theory) <= max(3 * se, 1e-3)

    def test_standard_error_scales_with_trials(self):
        rng = make_rng(107)
        params = terr_params(2.0, 1.0)
        _, se_small = mc_secrecy(params, 1_000, rng)
        _, se_big = mc_secrecy(params, 1_000_000, rng)
        assert se_small / se_big == pytest.approx(math.sqrt(1000), rel=0.25)

    def test_self_noise_consistency(self):
        rng = make_rng(109)
        params = terr_params(2.0, 1.0, p_self_noise=0.8)
        theory = secrecy_probability(params)
        est, se = mc_secrecy(params, 400_000, rng)
        assert abs(est - theory) <= max(3 * se, 1e-3)

    def test_sp_monotone_in_decoy_power(self):
        vals = [secrecy_probability(terr_params(2.0, pa)) for pa in np.linspace(0.2, 6.0, 15)]
        assert all(a < b for a, b in zip(vals, vals[1:]))


def default_links(pl=0.0, noise=1.0):
    return LinkSet(
        sat_to_user=LinkModel(LinkKind.SAT_TO_USER, RicianPowerDist(5.0), pl, noise),
        sat_to_eve=LinkModel(LinkKind.SAT_TO_EVE, RicianPowerDist(3.0), pl, noise),
        terr_to_user=LinkModel(LinkKind.TERR_TO_USER, ExpPowerDist(1.0), pl, noise),
        terr_to_eve=LinkModel(LinkKind.TERR_TO_EVE, ExpPowerDist(0.75), pl, noise),
    )


def two_node_plan(q=4, adv=True):
    # 1 satellite UE + 1 BS UE on orthogonal slots, one time slot.
    dims = GridDims(1, 1, 1, q, (1, 1))
    s = np.zeros((1, q), dtype=np.int8)
    s[0, :2] = 1
    x_sat = np.zeros((1, 1, q), dtype=np.int8)
    x_sat[0, 0, 0] = 1
    x_bs = np.zeros((1, 1, q), dtype=np.int8)
    x_bs[0, 0, 2] = 1
    a_sat = np.zeros_like(x_sat)
    a_bs = np.zeros_like(x_bs)
    if adv:
        a_sat[0, 0, 1] = 1
        a_bs[0, 0, 3] = 1
    return ResourcePlan(
        dims=dims,
        s=BandPlan(s),
        x=OccupancyPlan((x_sat, x_bs)),
        a=AdversarialPlan((a_sat, a_bs)),
        p=PowerPlan(
            (np.full((1, 1), 4.0), np.full((1, 1), 2.0)),
            (np.full((1, 1), 6.0) if adv else np.zeros((1, 1)), np.full((1, 1), 3.0) if adv else np.zeros((1, 1))),
            (20.0, 10.0),
        ),
    )


class TestPlanObjective:
    def test_single_ue_objective_is_its_sp(self):
        dims = GridDims(0, 1, 1, 4, (1,))
        x = np.zeros((1, 1, 4), dtype=np.int8)
        x[0, 0, 0] = 1
        a = np.zeros_like(x)
        a[0, 0, 2] = 1
        plan = ResourcePlan(
            dims=dims,
            s=BandPlan(np.zeros((0, 4), dtype=np.int8)),
            x=OccupancyPlan((x,)),
            a=AdversarialPlan((a,)),
            p=PowerPlan((np.full((1, 1), 2.0),), (np.full((1, 1), 3.0),), (10.0,)),
        )
        links = default_links()
        rep = plan_objective(plan, links, 0.2, 0.1, tau_e=1.0, tau_u=1.0)
        want = sp_terrestrial(terr_params(2.0, 3.0, tau=1.0, q=4, omega_mean=0.75))
        assert rep.objective == pytest.approx(want)
        assert rep.per_ue[0].rtp == pytest.approx(math.exp(-0.5))

    def test_mixed_instance_matches_hand_composition(self):
        plan = two_node_plan()
        links = default_links()
        rep = plan_objective(plan, links, 0.2, 0.1, tau_e=1.0, tau_u=1.0)
        sp_sat = sp_satellite(sat_params(4.0, 6.0, tau=1.0, q=4, omega=3.0))
        sp_bs = sp_terrestrial(terr_params(2.0, 3.0, tau=1.0, q=4, omega_mean=0.75))
        assert rep.objective == pytest.approx(sp_sat + sp_bs)
        assert [u.node for u in rep.per_ue] == [0, 1]

    def test_objective_sums_over_identical_ues(self):
        dims = GridDims(0, 1, 1, 4, (2,))
        x = np.zeros((1, 2, 4), dtype=np.int8)
        x[0, 0, 0] = x[0, 1, 1] = 1
        a = np.zeros_like(x)
        a[0, 0, 2] = a[0, 1, 3] = 1
        plan = ResourcePlan(
            dims=dims,
            s=BandPlan(np.zeros((0, 4), dtype=np.int8)),
            x=OccupancyPlan((x,)),
            a=AdversarialPlan((a,)),
            p=PowerPlan((np.full((1, 2), 2.0),), (np.full((1, 2), 3.0),), (10.0,)),
        )
        rep = plan_objective(plan, default_links(), 0.2, 0.1, 1.0, 1.0)
        assert rep.objective == pytest.approx(2 * rep.per_ue[0].sp)

    def test_infeasible_plan_rejected_with_report(self):
        plan = two_node_plan()
        bad = ResourcePlan(
            dims=plan.dims,
            s=plan.s,
            x=plan.x,
            a=plan.a,
            p=PowerPlan(plan.p.p_data, plan.p.p_adv, (0.1, 0.1)),
        )
        with pytest.raises(InfeasiblePlanError) as exc:
            plan_objective(bad, default_links(), 0.2, 0.1, 1.0, 1.0)
        assert "power-budget" in str(exc.value)

    def test_never_touches_interference_path(self, monkeypatch):
        import stnsec.metrics as metrics_mod

        def boom(*a, **kw):
            raise AssertionError("plan_objective must not evaluate interference")

        monkeypatch.setattr(metrics_mod, "sinr_with_interference", boom)
        plan_objective(two_node_plan(), default_links(), 0.2, 0.1, 1.0, 1.0)

    def test_assumed_decoy_falls_back_to_node_mean(self):
        dims = GridDims(0, 1, 1, 4, (2,))
        x = np.zeros((1, 2, 4), dtype=np.int8)
        x[0, 0, 0] = x[0, 1, 1] = 1
        a = np.zeros_like(x)
        a[0, 0, 2] = 1  # only UE 0 deploys a decoy
        plan = ResourcePlan(
            dims=dims,
            s=BandPlan(np.zeros((0, 4), dtype=np.int8)),
            x=OccupancyPlan((x,)),
            a=AdversarialPlan((a,)),
            p=PowerPlan((np.full((1, 2), 2.0),), (np.array([[3.0, 0.5]]),), (10.0,)),
        )
        assert assumed_decoy_watt(plan, 0, 0, 0) == 3.0
        assert assumed_decoy_watt(plan, 0, 0, 1) == 3.0  # node mean of deployed decoys


class TestSinrWithInterference:
    def det_links(self, noise=1.0):
        # Near-deterministic unit gains via a huge line-of-sight factor.
        big = RicianPowerDist(1e9)
        return LinkSet(
            sat_to_user=LinkModel(LinkKind.SAT_TO_USER, big, 0.0, noise),
            sat_to_eve=LinkModel(LinkKind.SAT_TO_EVE, big, 0.0, noise),
            terr_to_user=LinkModel(LinkKind.TERR_TO_USER, ExpPowerDist(1.0), 0.0, noise),
            terr_to_eve=LinkModel(LinkKind.TERR_TO_EVE, ExpPowerDist(0.75), 0.0, noise),
        )

    def colliding_plan(self, q=4):
        # two satellites forced onto the same slot (infeasible by design)
        dims = GridDims(2, 0, 1, q, (1, 1), max_band_width=q)
        s = np.zeros((2, q), dtype=np.int8)
        s[0, :] = 1
        s[1, :] = 1
        x0 = np.zeros((1, 1, q), dtype=np.int8)
        x0[0, 0, 1] = 1
        x1 = np.zeros_like(x0)
        x1[0, 0, 1] = 1
        zeros = np.zeros_like(x0)
        return ResourcePlan(
            dims=dims,
            s=BandPlan(s),
            x=OccupancyPlan((x0, x1)),
            a=AdversarialPlan((zeros, zeros.copy())),
            p=PowerPlan(
                (np.full((1, 1), 1.0), np.full((1, 1), 1.0)),
                (np.zeros((1, 1)), np.zeros((1, 1))),
                (5.0, 5.0),
            ),
        )

    def test_feasible_plan_zero_interference(self):
        plan = two_node_plan()
        rng = make_rng(301)
        links = default_links()
        for f in range(4):
            s = sinr_with_interference(plan, links, Receiver("eve"), 0, f, rng)
            assert s.interference_watt == 0.0

    def test_two_unit_transmitters_interfere_one_watt(self):
        plan = self.colliding_plan()
        rng = make_rng(303)
        s = sinr_with_interference(plan, self.det_links(), Receiver("user", 0, 0), 0, 1, rng)
        assert s.interference_watt == pytest.approx(1.0, rel=1e-3)
        assert s.signal_watt == pytest.approx(1.0, rel=1e-3)

    def test_interference_mean_matches_summation_oracle(self):
        # The mean aggregated interference equals the plain sum of
        # co-channel transmit powers (unit-mean fading, no path loss).
        plan = self.colliding_plan()
        links = default_links()
        rng = make_rng(307)
        draws = [
            sinr_with_interference(plan, links, Receiver("user", 0, 0), 0, 1, rng).interference_watt
            for _ in range(4000)
        ]
        assert np.mean(draws) == pytest.approx(1.0, abs=0.06)

    def test_eve_sees_decoy_as_signal(self):
        plan = two_node_plan()
        rng = make_rng(311)
        s = sinr_with_interference(plan, self.det_links(), Receiver("eve"), 0, 1, rng)
        assert s.signal_watt == pytest.approx(6.0, rel=1e-3)  # satellite decoy power
