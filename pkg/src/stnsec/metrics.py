"""Secrecy and reliability probabilities, closed form and Monte Carlo.

The secrecy probability (SP) of one UE is the chance the eavesdropper's
slot-level hypothesis test errs.  With the monitored slot carrying that
UE's data w.p. 1/q (uniform slot randomization over q slots) and decoy
power on the idle branch,

    SP = (1/q) P(gamma_d < tau_e)  +  (1 - 1/q) P(gamma_a > tau_e),

where gamma_d and gamma_a are the received data/decoy SNRs at the
eavesdropper.  The reliable transmission probability (RTP) of a UE is
P(gamma_u > tau_u) at its own receiver.  For Rician gains the tail is a
first-order Marcum-Q, for exponential gains a plain exponential.  The
Monte-Carlo estimators simulate the same two-branch experiment directly
and are the oracles the closed forms are held to.

``plan_objective`` scores a feasible resource plan: orthogonal scheduling
zeroes all interference terms by construction, so per-UE SP/RTP come from
the closed forms alone.  ``sinr_with_interference`` is the general receive
path for plans (feasible or not) that do collide.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import LinkKind, LinkModel
from .grid import FeasibilityReport, ResourcePlan, transmissions_at, validate
from .numerics import ExpPowerDist, RicianPowerDist, sample_exp_power, sample_rician_power

__all__ = [
    "SecrecyParams",
    "ReliabilityParams",
    "sp_satellite",
    "sp_terrestrial",
    "secrecy_probability",
    "rtp_satellite",
    "rtp_terrestrial",
    "reliability_probability",
    "mc_secrecy",
    "mc_reliability",
    "InfeasiblePlanError",
    "LinkSet",
    "UeMetrics",
    "ObjectiveReport",
    "plan_objective",
    "assumed_decoy_watt",
    "superposed_noise_watt",
    "Receiver",
    "sinr_with_interference",
    "write_curve_csv",
]


@dataclass(frozen=True)
class SecrecyParams:
    """Inputs of the two-branch secrecy test, all powers as received watts.

    ``p_adv`` may be zero, in which case the idle-branch false alarm never
    fires and the second term vanishes.  ``p_self_noise`` is artificial
    noise superposed on the data slot (same channel as the data signal); it
    inflates the eavesdropper's denominator on the data branch only.
    """

    p_data: float
    p_adv: float
    noise: float
    tau_e: float
    q: int
    fading: RicianPowerDist | ExpPowerDist
    p_self_noise: float = 0.0

    def __post_init__(self) -> None:
        if not (self.p_data > 0 and math.isfinite(self.p_data)):
            raise ValueError(f"data power must be finite and > 0, got {self.p_data!r}")
        if self.p_adv < 0 or self.p_self_noise < 0:
            raise ValueError("decoy and self-noise powers must be >= 0")
        if self.noise <= 0 or self.tau_e <= 0:
            raise ValueError("noise and tau_e must be > 0")
        if self.q < 1:
            raise ValueError(f"slot count must be >= 1, got {self.q!r}")


@dataclass(frozen=True)
class ReliabilityParams:
    p_data: float
    noise: float
    tau_u: float
    fading: RicianPowerDist | ExpPowerDist

    def __post_init__(self) -> None:
        if not (self.p_data > 0 and math.isfinite(self.p_data)):
            raise ValueError(f"data power must be finite and > 0, got {self.p_data!r}")
        if self.noise <= 0 or self.tau_u <= 0:
            raise ValueError("noise and tau_u must be > 0")


def _detect_gain_threshold(p: SecrecyParams) -> float:
    """Gain above which the data slot is detected: gamma_d >= tau_e.

    gamma_d = p_d g / (p_sn g + N0), so detection needs
    g (p_d - tau_e p_sn) >= tau_e N0; with p_d <= tau_e p_sn detection is
    impossible at any gain.
    """
    margin = p.p_data - p.tau_e * p.p_self_noise
    if margin <= 0.0:
        return math.inf
    return p.tau_e * p.noise / margin


def secrecy_probability(params: SecrecyParams) -> float:
    """Closed-form SP for either fading family."""
    miss = 1.0 - _tail(params.fading, _detect_gain_threshold(params))
    if params.p_adv > 0.0:
        false_alarm = _tail(params.fading, params.tau_e * params.noise / params.p_adv)
    else:
        false_alarm = 0.0
    hit = 1.0 / params.q
    return hit * miss + (1.0 - hit) * false_alarm


def _tail(fading: RicianPowerDist | ExpPowerDist, threshold: float) -> float:
    if math.isinf(threshold):
        return 0.0
    return fading.ccdf(threshold)


def sp_satellite(params: SecrecyParams) -> float:
    """SP against a Rician (satellite-class) eavesdropper channel."""
    if not isinstance(params.fading, RicianPowerDist):
        raise ValueError("sp_satellite requires Rician fading parameters")
    return secrecy_probability(params)


def sp_terrestrial(params: SecrecyParams) -> float:
    """SP against an exponential (terrestrial-class) eavesdropper channel."""
    if not isinstance(params.fading, ExpPowerDist):
        raise ValueError("sp_terrestrial requires exponential fading parameters")
    return secrecy_probability(params)


def reliability_probability(params: ReliabilityParams) -> float:
    return _tail(params.fading, params.tau_u * params.noise / params.p_data)


def rtp_satellite(params: ReliabilityParams) -> float:
    if not isinstance(params.fading, RicianPowerDist):
        raise ValueError("rtp_satellite requires Rician fading parameters")
    return reliability_probability(params)


def rtp_terrestrial(params: ReliabilityParams) -> float:
    if not isinstance(params.fading, ExpPowerDist):
        raise ValueError("rtp_terrestrial requires exponential fading parameters")
    return reliability_probability(params)


def _draw(fading, rng: np.random.Generator, size: int) -> np.ndarray:
    if isinstance(fading, RicianPowerDist):
        return sample_rician_power(fading, rng, size)
    return sample_exp_power(fading, rng, size)


def mc_secrecy(params: SecrecyParams, trials: int, rng: np.random.Generator) -> tuple[float, float]:
    """Unbiased two-branch estimator of the SP with its standard error.

    Each trial draws the slot-hit Bernoulli(1/q) and one channel gain, then
    applies the threshold test of the realized branch (data power on a hit,
    decoy power otherwise) with zero interference.
    """
    if trials < 1_000:
        raise ValueError(f"need at least 1000 trials, got {trials}")
    hit = rng.random(trials) < (1.0 / params.q)
    g = _draw(params.fading, rng, trials)
    gamma_d = params.p_data * g / (params.p_self_noise * g + params.noise)
    gamma_a = params.p_adv * g / params.noise
    secure = np.where(hit, gamma_d < params.tau_e, gamma_a > params.tau_e)
    p_hat = float(secure.mean())
    return p_hat, math.sqrt(p_hat * (1.0 - p_hat) / trials)


def mc_reliability(params: ReliabilityParams, trials: int, rng: np.random.Generator) -> tuple[float, float]:
    if trials < 1_000:
        raise ValueError(f"need at least 1000 trials, got {trials}")
    g = _draw(params.fading, rng, trials)
    ok = params.p_data * g / params.noise > params.tau_u
    p_hat = float(ok.mean())
    return p_hat, math.sqrt(p_hat * (1.0 - p_hat) / trials)


class InfeasiblePlanError(ValueError):
    """Raised when an operation requires a feasible plan."""

    def __init__(self, report: FeasibilityReport):
        super().__init__(f"plan is infeasible:\n{report}")
        self.report = report


@dataclass(frozen=True)
class LinkSet:
    """One ``LinkModel`` per link class."""

    sat_to_user: LinkModel
    sat_to_eve: LinkModel
    terr_to_user: LinkModel
    terr_to_eve: LinkModel

    def __post_init__(self) -> None:
        want = {
            "sat_to_user": LinkKind.SAT_TO_USER,
            "sat_to_eve": LinkKind.SAT_TO_EVE,
            "terr_to_user": LinkKind.TERR_TO_USER,
            "terr_to_eve": LinkKind.TERR_TO_EVE,
        }
        for name, kind in want.items():
            if getattr(self, name).kind is not kind:
                raise ValueError(f"{name} must be a {kind.value} link")

    def to_user(self, satellite: bool) -> LinkModel:
        return self.sat_to_user if satellite else self.terr_to_user

    def to_eve(self, satellite: bool) -> LinkModel:
        return self.sat_to_eve if satellite else self.terr_to_eve


def superposed_noise_watt(plan: ResourcePlan, z: int, l: int, k: int) -> float:
    """Non-data power riding the data slot: p_adv when the UE has no decoy row."""
    if plan.a[z][l, k].any():
        return 0.0
    return float(plan.p.p_adv[z][l, k])


def assumed_decoy_watt(plan: ResourcePlan, z: int, l: int, k: int) -> float:
    """Decoy power backing the idle branch of UE (z, k) at time l.

    The UE's own decoy power when it deploys one; otherwise the node's mean
    deployed decoy power at that time (the eavesdropper cannot attribute
    decoys to UEs); zero when the node deploys none.
    """
    if plan.a[z][l, k].any():
        return float(plan.p.p_adv[z][l, k])
    deployed = [
        float(plan.p.p_adv[z][l, kk])
        for kk in range(plan.dims.ue_counts[z])
        if plan.a[z][l, kk].any()
    ]
    return float(np.mean(deployed)) if deployed else 0.0


@dataclass(frozen=True)
class UeMetrics:
    node: int
    ue: int
    sp: float
    rtp: float
    sp_ok: bool
    rtp_ok: bool


@dataclass(frozen=True)
class ObjectiveReport:
    per_ue: tuple[UeMetrics, ...]
    objective: float
    eps_e: float
    eps_u: float

    @property
    def all_secure(self) -> bool:
        return all(u.sp_ok for u in self.per_ue)

    @property
    def all_reliable(self) -> bool:
        return all(u.rtp_ok for u in self.per_ue)

    @property
    def mean_sp(self) -> float:
        return self.objective / len(self.per_ue) if self.per_ue else 0.0

    @property
    def mean_rtp(self) -> float:
        return float(np.mean([u.rtp for u in self.per_ue])) if self.per_ue else 0.0


def ue_secrecy_params(
    plan: ResourcePlan, links: LinkSet, z: int, k: int, l: int, tau_e: float
) -> SecrecyParams | None:
    """Received-power secrecy parameters of UE (z, k) at time l, or None if silent."""
    pd = float(plan.p.p_data[z][l, k])
    if pd <= 0.0:
        return None
    sat = plan.dims.is_satellite(z)
    eve = links.to_eve(sat)
    return SecrecyParams(
        p_data=eve.mean_received_watt(pd),
        p_adv=eve.mean_received_watt(assumed_decoy_watt(plan, z, l, k)),
        noise=eve.noise_watt,
        tau_e=tau_e,
        q=plan.dims.freq_slots,
        fading=eve.fading,
        p_self_noise=eve.mean_received_watt(superposed_noise_watt(plan, z, l, k)),
    )


def plan_objective(
    plan: ResourcePlan,
    links: LinkSet,
    eps_e: float,
    eps_u: float,
    tau_e: float,
    tau_u: float,
) -> ObjectiveReport:
    """Per-UE SP/RTP of a feasible plan and the security objective.

    Requires a feasible plan (raises ``InfeasiblePlanError`` with the full
    report otherwise); feasibility means orthogonal scheduling, so the
    interference terms are zero by design and the closed forms apply
    directly.  Per-UE values are averaged over the period's time slots.
    A UE failing its reliability bound still contributes its SP to the
    objective; only the satisfaction flag records the failure.
    """
    report = validate(plan)
    if not report.feasible:
        raise InfeasiblePlanError(report)
    d = plan.dims
    per_ue: list[UeMetrics] = []
    for z in range(d.n_nodes):
        sat = d.is_satellite(z)
        user = links.to_user(sat)
        for k in range(d.ue_counts[z]):
            sps, rtps = [], []
            for l in range(d.time_slots):
                sp_params = ue_secrecy_params(plan, links, z, k, l, tau_e)
                if sp_params is None:
                    sps.append(0.0)
                    rtps.append(0.0)
                    continue
                sps.append(secrecy_probability(sp_params))
                pd = float(plan.p.p_data[z][l, k])
                rtps.append(
                    reliability_probability(
                        ReliabilityParams(
                            p_data=user.mean_received_watt(pd),
                            noise=user.noise_watt,
                            tau_u=tau_u,
                            fading=user.fading,
                        )
                    )
                )
            sp = float(np.mean(sps))
            rtp = float(np.mean(rtps))
            per_ue.append(
                UeMetrics(z, k, sp, rtp, sp_ok=sp >= 1.0 - eps_e, rtp_ok=rtp >= 1.0 - eps_u)
            )
    return ObjectiveReport(
        per_ue=tuple(per_ue),
        objective=float(sum(u.sp for u in per_ue)),
        eps_e=eps_e,
        eps_u=eps_u,
    )


@dataclass(frozen=True)
class Receiver:
    """Receive point for SINR evaluation: a served UE or an eavesdropper."""

    kind: str  # "user" | "eve"
    node: int | None = None
    ue: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("user", "eve"):
            raise ValueError(f"receiver kind must be 'user' or 'eve', got {self.kind!r}")
        if self.kind == "user" and (self.node is None or self.ue is None):
            raise ValueError("user receivers need (node, ue)")


def sinr_with_interference(
    plan: ResourcePlan,
    links: LinkSet,
    receiver: Receiver,
    t: int,
    f: int,
    rng: np.random.Generator,
):
    """Realized SINR at (t, f) including every co-channel transmission.

    The serving transmission (the receiver's own data slot for a UE, the
    examined slot's occupant for an eavesdropper) contributes the signal;
    all other co-channel transmissions, data and decoy alike, contribute
    received interference power.  Superposed artificial noise arrives over
    the same channel draw as its data signal.
    """
    from .channel import sinr as sinr_op

    d = plan.dims
    txs = transmissions_at(plan).get((t, f), [])
    eve_side = receiver.kind == "eve"

    def link_for(tx_node: int) -> LinkModel:
        sat = d.is_satellite(tx_node)
        return links.to_eve(sat) if eve_side else links.to_user(sat)

    def tx_power(z: int, k: int, tag: str) -> float:
        return float(plan.p.p_data[z][t, k] if tag == "data" else plan.p.p_adv[z][t, k])

    serving = None
    if receiver.kind == "user":
        for z, k, tag in txs:
            if z == receiver.node and k == receiver.ue and tag == "data":
                serving = (z, k, tag)
                break
    elif txs:
        serving = txs[0]

    noise = (links.to_eve(True) if eve_side else links.to_user(True)).noise_watt
    signal_watt, gain, interference = 0.0, 0.0, 0.0
    for z, k, tag in txs:
        link = link_for(z)
        g = float(np.atleast_1d(_draw(link.fading, rng, 1))[0]) * link.path_gain
        p = tx_power(z, k, tag)
        if (z, k, tag) == serving:
            signal_watt, gain = p, g
            if tag == "data":
                interference += superposed_noise_watt(plan, z, t, k) * g
        else:
            interference += p * g
    return sinr_op(signal_watt, gain if signal_watt else 0.0, interference, noise)


def write_curve_csv(path: str | Path, rows: list[dict], comment_lines: list[str] | None = None) -> None:
    """Write curve rows as CSV, optionally preceded by '#' comment lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in comment_lines or []:
            fh.write(f"# {line}\n")
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
