import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stnsec.channel import LinkKind, LinkModel, draw_power_gain, los_phase, sinr
from stnsec.numerics import ExpPowerDist, RicianPowerDist, make_rng

NOISE = 1e-13


def sat_link(pl_db=0.0, doppler=0.0, phase0=0.0, omega=5.0):
    return LinkModel(LinkKind.SAT_TO_USER, RicianPowerDist(omega), pl_db, NOISE, doppler, phase0)


def terr_link(pl_db=0.0, omega_mean=1.0):
    return LinkModel(LinkKind.TERR_TO_USER, ExpPowerDist(omega_mean), pl_db, NOISE)


class TestLinkModel:
    def test_fading_family_enforced_per_kind(self):
        with pytest.raises(ValueError):
            LinkModel(LinkKind.SAT_TO_EVE, ExpPowerDist(1.0), 0.0, NOISE)
        with pytest.raises(ValueError):
            LinkModel(LinkKind.TERR_TO_EVE, RicianPowerDist(3.0), 0.0, NOISE)

    def test_path_gain(self):
        assert sat_link(3.0).path_gain == pytest.approx(10 ** -0.3)
        assert terr_link(0.0).mean_received_watt(2.0) == 2.0


class TestLosPhase:
    def test_static(self):
        assert los_phase(sat_link(), 0.37) == pytest.approx(1 + 0j)

    def test_quarter_turn(self):
        val = los_phase(sat_link(doppler=1.0), 0.25)
        assert val == pytest.approx(cmath.exp(1j * math.pi / 2))

    def test_unit_magnitude_everywhere(self):
        rng = make_rng(3)
        for _ in range(100):
            fd, phi, t = rng.uniform(-50, 50), rng.uniform(0, 2 * math.pi), rng.uniform(0, 10)
            assert abs(los_phase(sat_link(doppler=fd, phase0=phi), t)) == pytest.approx(1.0)

    def test_terrestrial_rejected(self):
        with pytest.raises(ValueError):
            los_phase(terr_link(), 0.0)


class TestDrawPowerGain:
    def test_zero_loss_reproduces_unit_mean_law(self):
        rng = make_rng(5)
        g = draw_power_gain(sat_link(0.0), rng, size=400_000)
        assert abs(g.mean() - 1.0) < 0.01

    def test_3db_halves_the_mean(self):
        rng = make_rng(7)
        g = draw_power_gain(terr_link(3.0), rng, size=400_000)
        assert g.mean() == pytest.approx(10 ** -0.3, rel=0.02)

    def test_omega_zero_reduces_to_rayleigh(self):
        rng = make_rng(9)
        g = draw_power_gain(sat_link(0.0, omega=0.0), rng, size=200_000)
        # Exponential(1) has variance 1 and P(g > 1) = e^{-1}.
        assert g.var() == pytest.approx(1.0, rel=0.03)
        assert np.mean(g > 1.0) == pytest.approx(math.exp(-1), abs=0.005)


class TestSinr:
    def test_hand_values(self):
        assert sinr(1.0, 1.0, 0.0, 1.0).sinr == 1.0
        assert sinr(2.0, 0.5, 1.0, 1.0).sinr == 0.5
        assert sinr(0.0, 3.3, 0.7, 1.0).sinr == 0.0

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            sinr(-1.0, 1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            sinr(1.0, 1.0, 0.0, 0.0)

    @given(
        st.floats(min_value=1e-3, max_value=1e3),
        st.floats(min_value=1e-3, max_value=1e3),
        st.floats(min_value=0.0, max_value=1e3),
        st.floats(min_value=1e-3, max_value=1e3),
        st.floats(min_value=1e-3, max_value=1e3),
    )
    @settings(max_examples=80, deadline=None)
    def test_scale_invariance(self, p, g, i, n, c):
        # Jointly scaling signal*gain, interference, and noise leaves SINR fixed.
        base = sinr(p, g, i, n).sinr
        scaled = sinr(p * c, g, i * c, n * c).sinr
        assert scaled == pytest.approx(base, rel=1e-9)
