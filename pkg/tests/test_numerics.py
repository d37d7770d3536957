"""Oracle checks for the special functions and fading laws.

The oracles here are deliberately independent of the implementations they
check: the Bessel oracle is a re-derived truncated power series, the
Marcum-Q oracle integrates the defining integrand with adaptive quadrature,
and the samplers are checked against closed-form moments and tail laws.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from stnsec.numerics import (
    ExpPowerDist,
    RicianPowerDist,
    bessel_i0,
    db_to_linear,
    dbm_to_watt,
    linear_to_db,
    make_rng,
    marcum_q1,
    sample_exp_power,
    sample_rician_power,
    split_rng,
    watt_to_dbm,
)


def i0_series_oracle(x: float) -> float:
    # Independent implementation: sum (x/2)^{2k} / (k!)^2 to machine precision.
    term, total, k = 1.0, 1.0, 0
    while True:
        k += 1
        term *= (x / 2.0) ** 2 / k**2
        total += term
        if term < 1e-18 * total or k > 500:
            return total


def marcum_quadrature_oracle(a: float, b: float) -> float:
    # Integral form: Q1(a,b) = int_b^inf t exp(-(t^2+a^2)/2) I0(at) dt,
    # evaluated with scipy quadrature and scipy's own (scaled) Bessel
    # function; -(t^2+a^2)/2 + at = -(t-a)^2/2 keeps the integrand finite.
    def integrand(t):
        return t * np.exp(-0.5 * (t - a) ** 2) * special.i0e(a * t)

    val, _ = integrate.quad(integrand, b, np.inf, limit=200)
    return val


class TestBesselI0:
    def test_at_zero(self):
        assert bessel_i0(0.0) == 1.0

    def test_series_value_at_one(self):
        assert bessel_i0(1.0) == pytest.approx(1.2660658777520084, rel=1e-12)

    def test_series_value_at_ten(self):
        assert bessel_i0(10.0) == pytest.approx(i0_series_oracle(10.0), rel=1e-12)

    @pytest.mark.parametrize("x", np.linspace(0.01, 50.0, 41).tolist())
    def test_relative_error_on_domain(self, x):
        assert bessel_i0(x) == pytest.approx(i0_series_oracle(x), rel=1e-10)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            bessel_i0(-1.0)
        with pytest.raises(ValueError):
            bessel_i0(float("nan"))


class TestMarcumQ1:
    def test_b_zero_is_one(self):
        for a in [0.0, 0.5, 3.0, 20.0]:
            assert marcum_q1(a, 0.0) == 1.0

    def test_a_zero_is_gaussian_tail(self):
        assert marcum_q1(0.0, 2.0) == pytest.approx(math.exp(-2.0), abs=1e-12)

    @pytest.mark.parametrize(
        "a,b",
        [(1.0, 1.0), (0.3, 2.5), (5.0, 4.0), (2.0, 7.0), (10.0, 9.5), (18.0, 20.0)],
    )
    def test_against_quadrature_oracle(self, a, b):
        assert marcum_q1(a, b) == pytest.approx(marcum_quadrature_oracle(a, b), abs=1e-9)

    def test_monotone_in_a_and_b(self):
        grid = np.linspace(0.0, 8.0, 17)
        for b in grid:
            vals = [marcum_q1(a, b) for a in grid]
            assert all(x <= y + 1e-12 for x, y in zip(vals, vals[1:]))
        for a in grid:
            vals = [marcum_q1(a, b) for b in grid]
            assert all(x >= y - 1e-12 for x, y in zip(vals, vals[1:]))

    def test_reduction_identity_ties_families(self):
        # 1 - Q1(0, sqrt(2 tau)) = 1 - exp(-tau) for every tau > 0.
        for tau in np.linspace(0.05, 6.0, 25):
            lhs = 1.0 - marcum_q1(0.0, math.sqrt(2.0 * tau))
            assert lhs == pytest.approx(1.0 - math.exp(-tau), abs=1e-12)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            marcum_q1(-0.1, 1.0)
        with pytest.raises(ValueError):
            marcum_q1(1.0, -0.1)

    def test_in_unit_interval(self):
        rng = make_rng(7)
        for _ in range(200):
            a, b = rng.uniform(0, 20, size=2)
            assert 0.0 <= marcum_q1(a, b) <= 1.0


class TestRicianPower:
    def test_density_normalized(self):
        for omega in [0.0, 0.5, 1.0, 3.0, 5.0, 12.0]:
            dist = RicianPowerDist(omega)
            val, _ = integrate.quad(dist.pdf, 0.0, np.inf, limit=300)
            assert val == pytest.approx(1.0, abs=1e-8)

    def test_omega_zero_is_rayleigh(self):
        # Two-sample KS against a unit-mean exponential, 1e5 draws each;
        # statistic must sit below the 1% critical value.
        rng = make_rng(11)
        n = 100_000
        a = sample_rician_power(RicianPowerDist(0.0), rng, size=n)
        b = rng.exponential(1.0, size=n)
        both = np.sort(np.concatenate([a, b]))
        cdf_a = np.searchsorted(np.sort(a), both, side="right") / n
        cdf_b = np.searchsorted(np.sort(b), both, side="right") / n
        ks = np.max(np.abs(cdf_a - cdf_b))
        critical = 1.628 * math.sqrt(2.0 / n)  # c(0.01) * sqrt((n+m)/(nm))
        assert ks < critical

    def test_unit_mean(self):
        rng = make_rng(13)
        g = sample_rician_power(RicianPowerDist(5.0), rng, size=1_000_000)
        assert abs(g.mean() - 1.0) < 0.01

    def test_cdf_matches_marcum_tail(self):
        rng = make_rng(17)
        dist = RicianPowerDist(5.0)
        n = 200_000
        g = sample_rician_power(dist, rng, size=n)
        for tau in [0.2, 0.6, 1.0, 1.8]:
            p_theory = 1.0 - dist.ccdf(tau)
            p_hat = float(np.mean(g <= tau))
            se = math.sqrt(p_theory * (1 - p_theory) / n)
            assert abs(p_hat - p_theory) < 3 * se + 1e-9

    def test_rejects_negative_omega(self):
        with pytest.raises(ValueError):
            RicianPowerDist(-0.5)


class TestExpPower:
    def test_mean(self):
        rng = make_rng(19)
        g = sample_exp_power(ExpPowerDist(1.0), rng, size=1_000_000)
        assert abs(g.mean() - 1.0) < 0.005

    def test_tail_matches_ccdf(self):
        rng = make_rng(23)
        dist = ExpPowerDist(0.75)
        n = 200_000
        g = sample_exp_power(dist, rng, size=n)
        for tau in [0.1, 0.5, 1.5]:
            p = dist.ccdf(tau)
            se = math.sqrt(p * (1 - p) / n)
            assert abs(np.mean(g > tau) - p) < 3 * se + 1e-9

    def test_variance(self):
        rng = make_rng(29)
        dist = ExpPowerDist(0.75)
        g = sample_exp_power(dist, rng, size=1_000_000)
        assert g.var() == pytest.approx(0.75**2, rel=0.02)

    def test_rejects_nonpositive_mean(self):
        with pytest.raises(ValueError):
            ExpPowerDist(0.0)


class TestConversions:
    def test_dbm(self):
        assert dbm_to_watt(30.0) == pytest.approx(1.0)
        assert dbm_to_watt(53.0) == pytest.approx(199.53, abs=0.01)
        assert watt_to_dbm(1.0) == pytest.approx(30.0)

    def test_db(self):
        assert db_to_linear(0.0) == 1.0
        assert db_to_linear(3.0) == pytest.approx(1.9952623, rel=1e-6)
        assert linear_to_db(10.0) == pytest.approx(10.0)

    @given(st.floats(min_value=-80.0, max_value=80.0))
    @settings(max_examples=60, deadline=None)
    def test_db_round_trip(self, x):
        assert linear_to_db(db_to_linear(x)) == pytest.approx(x, abs=1e-9)


def test_split_rng_streams_are_independent_and_deterministic():
    r1 = make_rng(42)
    kids = split_rng(r1, 3)
    vals = [k.random(4).tolist() for k in kids]
    assert vals[0] != vals[1] != vals[2]
    r2 = make_rng(42)
    kids2 = split_rng(r2, 3)
    assert [k.random(4).tolist() for k in kids2] == vals
