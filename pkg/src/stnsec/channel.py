"""Per-link effective channel models.

A ``LinkModel`` bundles the fading family for one link class with a scalar
path loss and the receiver noise floor.  Satellite links carry a Rician
factor (line-of-sight with Doppler phase rotation), terrestrial links an
exponential mean gain.  ``sinr`` is the shared signal/(interference+noise)
algebra used by both the legitimate and eavesdropper receive paths.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .numerics import (
    ExpPowerDist,
    RicianPowerDist,
    db_to_linear,
    sample_exp_power,
    sample_rician_power,
)

__all__ = ["LinkKind", "LinkModel", "SinrSample", "los_phase", "draw_power_gain", "sinr"]


class LinkKind(Enum):
    SAT_TO_USER = "satellite-to-user"
    SAT_TO_EVE = "satellite-to-eve"
    TERR_TO_USER = "terrestrial-to-user"
    TERR_TO_EVE = "terrestrial-to-eve"

    @property
    def satellite(self) -> bool:
        return self in (LinkKind.SAT_TO_USER, LinkKind.SAT_TO_EVE)


@dataclass(frozen=True)
class LinkModel:
    """Channel statistics for one link class.

    ``fading`` must be a ``RicianPowerDist`` for satellite kinds and an
    ``ExpPowerDist`` for terrestrial kinds.  ``doppler_hz`` and ``phase0``
    only affect the line-of-sight phase of satellite links; power-gain
    statistics (and everything derived from them) depend on |h|^2 alone.
    """

    kind: LinkKind
    fading: RicianPowerDist | ExpPowerDist
    path_loss_db: float
    noise_watt: float
    doppler_hz: float = 0.0
    phase0: float = 0.0

    def __post_init__(self) -> None:
        if self.kind.satellite and not isinstance(self.fading, RicianPowerDist):
            raise ValueError(f"{self.kind.value} link requires Rician fading")
        if not self.kind.satellite and not isinstance(self.fading, ExpPowerDist):
            raise ValueError(f"{self.kind.value} link requires exponential fading")
        if self.path_loss_db < 0.0:
            raise ValueError(f"path loss must be >= 0 dB, got {self.path_loss_db!r}")
        if self.noise_watt <= 0.0:
            raise ValueError(f"noise power must be > 0 W, got {self.noise_watt!r}")

    @property
    def path_gain(self) -> float:
        """Linear power attenuation 10^(-path_loss_db/10)."""
        return db_to_linear(-self.path_loss_db)

    def mean_received_watt(self, tx_watt: float) -> float:
        """Mean received power for a transmit power (unit-mean fading)."""
        return tx_watt * self.path_gain


@dataclass(frozen=True)
class SinrSample:
    signal_watt: float
    interference_watt: float
    noise_watt: float
    sinr: float


def los_phase(model: LinkModel, t: float) -> complex:
    """Deterministic unit-amplitude line-of-sight phasor e^{j(2 pi f_D t + phi0)}."""
    if not model.kind.satellite:
        raise ValueError(f"los_phase is defined for satellite links only, got {model.kind.value}")
    return cmath.exp(1j * (2.0 * math.pi * model.doppler_hz * t + model.phase0))


def draw_power_gain(model: LinkModel, rng: np.random.Generator, size=None):
    """Fading draw scaled by the linear path loss."""
    if isinstance(model.fading, RicianPowerDist):
        g = sample_rician_power(model.fading, rng, size)
    else:
        g = sample_exp_power(model.fading, rng, size)
    return g * model.path_gain


def sinr(signal_power: float, gain: float, interference_watt: float, noise_watt: float) -> SinrSample:
    """Received SINR sample: signal_power * gain / (interference + noise)."""
    if signal_power < 0 or gain < 0 or interference_watt < 0:
        raise ValueError("signal, gain, and interference must be >= 0")
    if noise_watt <= 0:
        raise ValueError(f"noise power must be > 0 W, got {noise_watt!r}")
    s = signal_power * gain
    return SinrSample(
        signal_watt=s,
        interference_watt=interference_watt,
        noise_watt=noise_watt,
        sinr=s / (interference_watt + noise_watt),
    )
