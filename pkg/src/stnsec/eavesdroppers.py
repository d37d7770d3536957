"""Adversary models: energy detection, learned classification, and
predictive slot targeting.

All three eavesdroppers share one physical layer: per monitored slot they
receive an effective SNR statistic (data power over noise plus any
superposed artificial noise, or decoy power over noise on idle slots) and
decide "data present" or not.  They differ in how they pick slots and how
they decide:

- energy: uniform random slots, fixed threshold test;
- classifier: uniform random slots, a max-margin linear rule trained on
  labeled energy samples (hinge loss, subgradient descent);
- predictive: a value network trained on past periods' observed occupancy
  ranks slots for focused monitoring, threshold decisions.

Eavesdroppers only ever see received energies and public timing, never the
plans; ``empirical_sp`` holds the plan on the network side and scores one
secrecy Bernoulli outcome per transmission: a monitored data slot is
secure iff the decision missed it, an unmonitored one iff the decoy-power
draw pulls a false detection (the deception branch of the closed form).
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import ResourcePlan, transmissions_at
from .metrics import LinkSet, assumed_decoy_watt, superposed_noise_watt
from .nn import MlpNet, forward
from .numerics import ExpPowerDist, RicianPowerDist, sample_exp_power, sample_rician_power

__all__ = [
    "EveConfig",
    "InterceptOutcome",
    "EnergyEve",
    "ClassifierEve",
    "PredictiveEve",
    "measure_slot",
    "energy_eve_step",
    "classifier_eve_train",
    "warmup_classifier",
    "predictive_eve_train",
    "EveTrainEnv",
    "empirical_sp",
    "intercept_log_rows",
    "write_intercept_log",
]


@dataclass(frozen=True)
class EveConfig:
    kind: str                 # "energy" | "classifier" | "predictive"
    monitored_slots: int = 4  # slots examined per time step
    tau_e: float = 1.585      # linear detection threshold
    history_window: int = 3   # periods of occupancy history (learning kinds)

    def __post_init__(self) -> None:
        if self.kind not in ("energy", "classifier", "predictive"):
            raise ValueError(f"unknown eavesdropper kind {self.kind!r}")
        if self.monitored_slots < 0:
            raise ValueError("monitored slot count must be >= 0")
        if self.history_window < 1:
            raise ValueError("history window must be >= 1 period")


@dataclass(frozen=True)
class InterceptOutcome:
    period: int
    t: int
    slot: int
    data_present: bool
    detected: bool

    @property
    def correct_intercept(self) -> bool:
        return self.data_present and self.detected


def _draw_gain(fading, rng):
    if isinstance(fading, RicianPowerDist):
        return float(sample_rician_power(fading, rng))
    return float(sample_exp_power(fading, rng))


def measure_slot(
    plan: ResourcePlan, links: LinkSet, t: int, f: int, rng: np.random.Generator
) -> tuple[float, bool]:
    """Received detection statistic at (t, f) and the data-presence truth.

    Data transmissions contribute signal; superposed artificial noise from
    the same transmitter lands in the denominator (same channel draw).  A
    slot carrying only decoys presents their received power over noise,
    which is exactly what makes decoys detectable.
    """
    txs = transmissions_at(plan).get((t, f), [])
    noise = links.sat_to_eve.noise_watt
    signal = 0.0
    denom = noise
    decoy = 0.0
    has_data = False
    for z, k, tag in txs:
        link = links.to_eve(plan.dims.is_satellite(z))
        g = _draw_gain(link.fading, rng) * link.path_gain
        if tag == "data":
            has_data = True
            signal += float(plan.p.p_data[z][t, k]) * g
            denom += superposed_noise_watt(plan, z, t, k) * g
        else:
            decoy += float(plan.p.p_adv[z][t, k]) * g
    if has_data:
        return signal / denom, True
    return decoy / noise, False


class EnergyEve:
    """Radiometer adversary: uniform slot choice, fixed threshold."""

    def __init__(self, config: EveConfig, q: int):
        self.config = config
        self.q = q

    def choose_slots(self, t: int, rng: np.random.Generator) -> np.ndarray:
        e = min(self.config.monitored_slots, self.q)
        if e == 0:
            return np.empty(0, dtype=int)
        return rng.choice(self.q, size=e, replace=False)

    def decide(self, statistic: float) -> bool:
        return statistic >= self.config.tau_e

    def observe_period(self, observed_occupancy: np.ndarray) -> None:
        pass


@dataclass
class LinearRule:
    """Max-margin separator over the scalar energy feature."""

    w: float
    b: float
    mean: float
    scale: float
    majority: int | None = None  # set when training data was single-class

    def predict(self, statistic: float) -> bool:
        if self.majority is not None:
            return bool(self.majority)
        z = (statistic - self.mean) / self.scale
        return self.w * z + self.b >= 0.0


def classifier_eve_train(
    energies: np.ndarray,
    labels: np.ndarray,
    rng: np.random.Generator,
    epochs: int = 40,
    reg: float = 1e-4,
) -> LinearRule:
    """Hinge-loss subgradient descent on standardized energy features.

    Labels are 1 for slots that carried data, 0 otherwise.  Single-class
    training data degrades to a majority predictor.
    """
    energies = np.asarray(energies, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if energies.shape != labels.shape:
        raise ValueError("energies and labels must align")
    classes = np.unique(labels)
    if classes.size < 2:
        return LinearRule(0.0, 0.0, 0.0, 1.0, majority=int(classes[0]) if classes.size else 0)
    mean = float(energies.mean())
    scale = float(energies.std()) or 1.0
    xs = (energies - mean) / scale
    ys = np.where(labels == 1, 1.0, -1.0)
    w, b = 0.0, 0.0
    step_count = 0
    for _ in range(epochs):
        for i in rng.permutation(xs.size):
            step_count += 1
            lr = 1.0 / (reg * step_count + 10.0)
            margin = ys[i] * (w * xs[i] + b)
            gw = reg * w - (ys[i] * xs[i] if margin < 1.0 else 0.0)
            gb = -(ys[i] if margin < 1.0 else 0.0)
            w -= lr * gw
            b -= lr * gb
    return LinearRule(w, b, mean, scale)


def warmup_classifier(
    next_plan,
    links: LinkSet,
    probes: int,
    rng: np.random.Generator,
    balance: bool = True,
    epochs: int = 40,
) -> LinearRule:
    """Adversary warm-up: probe random (time, slot) cells with ground-truth
    labels, optionally rebalancing the classes (idle cells dominate a
    uniform probe), then fit the max-margin rule."""
    stats, labels = [], []
    plan = next_plan(rng)
    d = plan.dims
    for _ in range(probes):
        t = int(rng.integers(d.time_slots))
        f = int(rng.integers(d.freq_slots))
        stat, has_data = measure_slot(plan, links, t, f, rng)
        stats.append(stat)
        labels.append(int(has_data))
    stats = np.array(stats)
    labels = np.array(labels)
    if balance and (labels == 1).any() and (labels == 0).any():
        pos = np.flatnonzero(labels == 1)
        neg = np.flatnonzero(labels == 0)
        n = min(pos.size, neg.size)
        keep = np.concatenate([pos[:n], neg[:n]])
        stats, labels = stats[keep], labels[keep]
    return classifier_eve_train(stats, labels, rng, epochs=epochs)


class ClassifierEve:
    """Uniform monitoring with a trained decision rule."""

    def __init__(self, config: EveConfig, q: int, rule: LinearRule):
        self.config = config
        self.q = q
        self.rule = rule

    def choose_slots(self, t: int, rng: np.random.Generator) -> np.ndarray:
        e = min(self.config.monitored_slots, self.q)
        if e == 0:
            return np.empty(0, dtype=int)
        return rng.choice(self.q, size=e, replace=False)

    def decide(self, statistic: float) -> bool:
        return self.rule.predict(statistic)

    def observe_period(self, observed_occupancy: np.ndarray) -> None:
        pass


class PredictiveEve:
    """Focused monitoring from a value network over per-time occupancy
    frequencies of the last W periods."""

    def __init__(self, config: EveConfig, q: int, time_slots: int, qnet: MlpNet):
        self.config = config
        self.q = q
        self.time_slots = time_slots
        self.qnet = qnet
        self.history: deque[np.ndarray] = deque(maxlen=config.history_window)

    def features(self, t: int) -> np.ndarray:
        if not self.history:
            freq = np.zeros(self.q)
        else:
            freq = np.mean([h[t] for h in self.history], axis=0)
        return np.concatenate([freq, [t / max(self.time_slots, 1)]])

    def choose_slots(self, t: int, rng: np.random.Generator) -> np.ndarray:
        e = min(self.config.monitored_slots, self.q)
        if e == 0:
            return np.empty(0, dtype=int)
        qvals, _ = forward(self.qnet, self.features(t))
        # ties break toward the lowest slot index (stable argsort on -q)
        order = np.argsort(-qvals, kind="stable")
        return order[:e]

    def decide(self, statistic: float) -> bool:
        return statistic >= self.config.tau_e

    def observe_period(self, observed_occupancy: np.ndarray) -> None:
        self.history.append(np.asarray(observed_occupancy, dtype=float))


def energy_eve_step(
    eve, plan: ResourcePlan, links: LinkSet, period: int, t: int, rng: np.random.Generator
) -> list[InterceptOutcome]:
    """One monitoring step: choose slots, measure, decide."""
    outcomes = []
    for f in eve.choose_slots(t, rng):
        stat, has_data = measure_slot(plan, links, t, int(f), rng)
        outcomes.append(
            InterceptOutcome(period, t, int(f), has_data, eve.decide(stat))
        )
    return outcomes


def observed_occupancy(plan: ResourcePlan) -> np.ndarray:
    """Per-(time, slot) transmission presence as a wideband sensor sees it;
    decoys are indistinguishable from data at this level."""
    d = plan.dims
    occ = np.zeros((d.time_slots, d.freq_slots), dtype=float)
    for (l, f), txs in transmissions_at(plan).items():
        occ[l, f] = 1.0
    return occ


class EveTrainEnv:
    """Single-agent decision process for the predictive eavesdropper.

    One episode is one period against a plan drawn from ``next_plan``; the
    action is the slot to monitor and the reward the number of correct
    intercepts.  Occupancy history carries across episodes, exactly like
    an adversary accumulating observations.
    """

    def __init__(self, config: EveConfig, links: LinkSet, next_plan, q: int, time_slots: int):
        self.config = config
        self.links = links
        self.next_plan = next_plan
        self.q = q
        self.time_slots = time_slots
        self.history: deque[np.ndarray] = deque(maxlen=config.history_window)
        self._plan: ResourcePlan | None = None
        self._rng: np.random.Generator | None = None

    @dataclass(frozen=True)
    class Snap:
        t: int
        features: tuple
        done: bool = False

    def _features(self, t: int) -> np.ndarray:
        if not self.history:
            freq = np.zeros(self.q)
        else:
            freq = np.mean([h[t] for h in self.history], axis=0)
        return np.concatenate([freq, [t / max(self.time_slots, 1)]])

    def reset(self, rng: np.random.Generator):
        self._rng = rng
        self._plan = self.next_plan(rng)
        return self.Snap(0, tuple(self._features(0)))

    def decision_units(self):
        return [("eve",)]

    def net_key(self, unit):
        return unit

    def n_actions(self, unit) -> int:
        return self.q

    def obs_width(self, unit) -> int:
        return self.q + 1

    def state_vector(self, snap) -> np.ndarray:
        return np.asarray(snap.features, dtype=float)

    def unit_obs(self, snap, unit, partial) -> np.ndarray:
        return np.asarray(snap.features, dtype=float)

    def unit_mask(self, snap, unit, partial) -> np.ndarray:
        return np.ones(self.q, dtype=bool)

    def apply(self, snap, actions):
        f = actions[("eve",)]
        stat, has_data = measure_slot(self._plan, self.links, snap.t, int(f), self._rng)
        detected = stat >= self.config.tau_e
        reward = 1.0 if (has_data and detected) else 0.0
        t_next = snap.t + 1
        done = t_next >= self.time_slots
        if done:
            self.history.append(observed_occupancy(self._plan))
            nxt = self.Snap(snap.t, snap.features, done=True)
        else:
            nxt = self.Snap(t_next, tuple(self._features(t_next)))
        return nxt, reward, {"hit": float(has_data), "detected": float(detected)}


def predictive_eve_train(
    config: EveConfig,
    links: LinkSet,
    next_plan,
    q: int,
    time_slots: int,
    episodes: int,
    rng: np.random.Generator,
    warmup_periods: int | None = None,
    train_config=None,
) -> PredictiveEve:
    """Train the slot-targeting value network against a plan source."""
    from .marl import QmixTrainer, TrainConfig

    env = EveTrainEnv(config, links, next_plan, q, time_slots)
    for _ in range(warmup_periods if warmup_periods is not None else config.history_window):
        env.history.append(observed_occupancy(next_plan(rng)))
    if train_config is None:
        train_config = TrainConfig(
            episodes=episodes,
            hidden=(32, 32),
            mixer_embed=4,
            hyper_hidden=4,
            learning_rate=0.05,
            eps_end=0.02,
            target_sync=100,
            min_buffer=32,
        )
    trainer = QmixTrainer(env, train_config, rng, identity_mixer=True)
    trainer.train(rng)
    eve = PredictiveEve(config, q, time_slots, trainer.online[("eve",)])
    eve.history = env.history
    return eve


def empirical_sp(
    next_plan,
    eve,
    links: LinkSet,
    trials: int,
    rng: np.random.Generator,
    collect_outcomes: bool = False,
):
    """Secrecy estimate over at least ``trials`` transmission events.

    Each legitimate transmission scores one Bernoulli outcome per step:
    if its slot was monitored, secure iff the eavesdropper's decision on
    the physical measurement missed it; otherwise secure iff a decision on
    the transmission's assumed decoy power fires (the eavesdropper is
    pulled into a false intercept).  An eavesdropper that monitors nothing
    never intercepts, so secrecy is 1 by convention.
    """
    secure_events = 0
    total_events = 0
    outcomes: list[InterceptOutcome] = []
    hits = 0
    steps = 0
    period = 0
    while total_events < trials:
        plan = next_plan(rng)
        d = plan.dims
        for t in range(d.time_slots):
            slots = set(int(f) for f in eve.choose_slots(t, rng))
            decisions: dict[int, tuple[bool, bool]] = {}
            for f in sorted(slots):
                stat, has_data = measure_slot(plan, links, t, f, rng)
                det = eve.decide(stat)
                decisions[f] = (has_data, det)
                if collect_outcomes:
                    outcomes.append(InterceptOutcome(period, t, f, has_data, det))
            steps += 1
            for z in range(d.n_nodes):
                link = links.to_eve(d.is_satellite(z))
                for k in range(d.ue_counts[z]):
                    row = np.flatnonzero(plan.x[z][t, k])
                    if row.size == 0 or plan.p.p_data[z][t, k] <= 0:
                        continue
                    f_k = int(row[0])
                    total_events += 1
                    if not slots:
                        secure_events += 1
                        continue
                    if f_k in slots:
                        hits += 1
                        has_data, det = decisions[f_k]
                        secure_events += 0 if det else 1
                    else:
                        p_dec = assumed_decoy_watt(plan, z, t, k)
                        if p_dec > 0:
                            g = _draw_gain(link.fading, rng) * link.path_gain
                            stat = p_dec * g / link.noise_watt
                            secure_events += 1 if eve.decide(stat) else 0
        if hasattr(eve, "observe_period"):
            eve.observe_period(observed_occupancy(plan))
        period += 1
    p_hat = secure_events / total_events if total_events else 1.0
    se = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / total_events) if total_events else 0.0
    extras = {"hit_rate": hits / max(total_events, 1), "steps": steps, "events": total_events}
    if collect_outcomes:
        return p_hat, se, outcomes, extras
    return p_hat, se, extras


def intercept_log_rows(outcomes: list[InterceptOutcome]) -> list[dict]:
    return [
        {
            "period": o.period,
            "t": o.t,
            "slot": o.slot,
            "hypothesis": "H1" if o.data_present else "H0",
            "decision": int(o.detected),
            "correct": int(o.correct_intercept),
        }
        for o in outcomes
    ]


def write_intercept_log(path: str | Path, outcomes: list[InterceptOutcome]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = intercept_log_rows(outcomes)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["period", "t", "slot", "hypothesis", "decision", "correct"])
        writer.writeheader()
        writer.writerows(rows)
