"""Experiment configuration: profiles, validation, and hashing.

A configuration file is a nested key-value YAML document; the packaged
profiles (``paper``, ``toy``, ``stage1_toy``) ship the full-scale setup
values and the desk-scale defaults.  Every run embeds the SHA-256 hash of
its resolved configuration in all outputs, so a (hash, seed) pair pins a
run byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from ..channel import LinkKind, LinkModel
from ..environment import EnvConfig, JammerConfig, RewardWeights
from ..grid import GridDims
from ..metrics import LinkSet
from ..numerics import ExpPowerDist, RicianPowerDist, db_to_linear, dbm_to_watt

__all__ = ["ExperimentConfig", "load_profile", "load_config_file", "PROFILE_NAMES"]

PROFILE_NAMES = ("paper", "toy", "stage1_toy")


def _deep_update(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_update(out[k], v)
        else:
            out[k] = v
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment configuration (all values explicit)."""

    raw: dict

    # -- construction --------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        cfg = cls(raw=json.loads(json.dumps(data)))  # deep, JSON-clean copy
        cfg.validate()
        return cfg

    def override(self, extra: dict) -> "ExperimentConfig":
        return ExperimentConfig.from_dict(_deep_update(self.raw, extra))

    def validate(self) -> None:
        required = {
            "name": str,
            "grid": dict,
            "channel": dict,
            "powers": dict,
            "thresholds": dict,
            "targets": dict,
            "reward": dict,
            "training": dict,
            "gan": dict,
            "eves": dict,
            "mc": dict,
        }
        for key, typ in required.items():
            if key not in self.raw:
                raise ValueError(f"configuration is missing section {key!r}")
            if not isinstance(self.raw[key], typ):
                raise ValueError(f"configuration section {key!r} must be a {typ.__name__}")
        g = self.raw["grid"]
        dims = self.dims()  # raises on inconsistent grid values
        if dims.freq_slots < max(dims.ue_counts, default=0):
            raise ValueError("freq_slots must be at least the largest per-node UE count")
        t = self.raw["targets"]
        if not (0.0 < t["security"] < 1.0 and 0.0 < t["reliability"] < 1.0):
            raise ValueError("targets must lie strictly inside (0, 1)")

    # -- derived objects ------------------------------------------------

    @property
    def name(self) -> str:
        return self.raw["name"]

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def dims(self) -> GridDims:
        g = self.raw["grid"]
        return GridDims(
            n_sats=int(g["n_sats"]),
            n_bs=int(g["n_bs"]),
            time_slots=int(g["time_slots"]),
            freq_slots=int(g["freq_slots"]),
            ue_counts=tuple(int(k) for k in g["ue_counts"]),
            max_band_width=g.get("max_band_width"),
        )

    def noise_watt(self) -> float:
        return dbm_to_watt(float(self.raw["channel"]["noise_dbm"]))

    def links(self) -> LinkSet:
        ch = self.raw["channel"]
        noise = self.noise_watt()
        sat_eve_pl = float(ch.get("sat_eve_path_loss_db", ch["sat_path_loss_db"]))
        terr_eve_pl = float(ch.get("terr_eve_path_loss_db", ch["terr_path_loss_db"]))
        return LinkSet(
            sat_to_user=LinkModel(
                LinkKind.SAT_TO_USER,
                RicianPowerDist(float(ch["omega_user"])),
                float(ch["sat_path_loss_db"]),
                noise,
            ),
            sat_to_eve=LinkModel(
                LinkKind.SAT_TO_EVE,
                RicianPowerDist(float(ch["omega_eve"])),
                sat_eve_pl,
                noise,
            ),
            terr_to_user=LinkModel(
                LinkKind.TERR_TO_USER,
                ExpPowerDist(float(ch["mean_gain_user"])),
                float(ch["terr_path_loss_db"]),
                noise,
            ),
            terr_to_eve=LinkModel(
                LinkKind.TERR_TO_EVE,
                ExpPowerDist(float(ch["mean_gain_eve"])),
                terr_eve_pl,
                noise,
            ),
        )

    def budgets(self) -> tuple[float, ...]:
        dims = self.dims()
        p = self.raw["powers"]
        sat = dbm_to_watt(float(p["sat_dbm"]))
        bs = dbm_to_watt(float(p["bs_dbm"]))
        return tuple(sat if z < dims.n_sats else bs for z in range(dims.n_nodes))

    def tau_e(self) -> float:
        return db_to_linear(float(self.raw["thresholds"]["tau_e_db"]))

    def tau_u(self) -> float:
        return db_to_linear(float(self.raw["thresholds"]["tau_u_db"]))

    def eps_e(self) -> float:
        return 1.0 - float(self.raw["targets"]["security"])

    def eps_u(self) -> float:
        return 1.0 - float(self.raw["targets"]["reliability"])

    def reward_weights(self) -> RewardWeights:
        r = self.raw["reward"]
        return RewardWeights(c3=float(r["c3"]), c4=float(r["c4"]), c5=float(r["c5"]), d2=float(r["d2"]))

    def jammer(self) -> JammerConfig:
        j = self.raw.get("jammer", {"kind": "none"})
        return JammerConfig(
            kind=j.get("kind", "none"),
            power_watt=float(j.get("power_watt", 0.0)),
            duty_cycle=float(j.get("duty_cycle", 0.0)),
            stride=int(j.get("stride", 1)),
        )

    def env_config(self) -> EnvConfig:
        return EnvConfig(
            dims=self.dims(),
            links=self.links(),
            budgets=self.budgets(),
            tau_e=self.tau_e(),
            tau_u=self.tau_u(),
            eps_e=self.eps_e(),
            eps_u=self.eps_u(),
            weights=self.reward_weights(),
            jammer=self.jammer(),
            stage1_data_fraction=float(self.raw["training"].get("stage1_data_fraction", 0.5)),
        )

    def train_config(self, stage: int):
        from ..marl import TrainConfig

        t = self.raw["training"]
        episodes = int(t["stage1_episodes"] if stage == 1 else t["stage3_episodes"])
        return TrainConfig(
            episodes=episodes,
            discount=float(t.get("discount", 0.98)),
            learning_rate=float(t.get("learning_rate", 0.05)),
            eps_start=float(t.get("eps_start", 1.0)),
            eps_end=float(t.get("eps_end", 0.05)),
            eps_decay_fraction=float(t.get("eps_decay_fraction", 0.6)),
            target_sync=int(t.get("target_sync", 200)),
            batch_size=int(t.get("batch_size", 32)),
            buffer_capacity=int(t.get("buffer_capacity", 10_000)),
            min_buffer=int(t.get("min_buffer", 64)),
            hidden=tuple(int(w) for w in t.get("hidden", (64, 64))),
            mixer_embed=int(t.get("mixer_embed", 16)),
            hyper_hidden=int(t.get("hyper_hidden", 16)),
        )

    def gan_config(self):
        from ..advgen import GanConfig

        g = self.raw["gan"]
        return GanConfig(
            lambda_gp=float(g.get("lambda_gp", 10.0)),
            alpha=float(g.get("alpha", 1.0)),
            beta=float(g.get("beta", 1.0)),
            n_critic=int(g.get("n_critic", 5)),
            noise_dim=int(g.get("noise_dim", 16)),
            iterations=int(g.get("iterations", 400)),
            batch_size=int(g.get("batch_size", 32)),
            learning_rate=float(g.get("learning_rate", 0.01)),
            hidden=tuple(int(w) for w in g.get("hidden", (128, 128))),
        )

    def eve_config(self, kind: str):
        from ..eavesdroppers import EveConfig

        e = self.raw["eves"]
        return EveConfig(
            kind=kind,
            monitored_slots=int(e.get("monitored_slots", 4)),
            tau_e=self.tau_e(),
            history_window=int(e.get("history_window", 3)),
        )

    def power_levels(self) -> int:
        return int(self.raw["training"].get("power_levels", 9))


def load_profile(name: str) -> ExperimentConfig:
    if name not in PROFILE_NAMES:
        raise ValueError(f"unknown profile {name!r}; choose from {PROFILE_NAMES}")
    text = resources.files("stnsec.profiles").joinpath(f"{name}.yaml").read_text()
    return ExperimentConfig.from_dict(yaml.safe_load(text))


def load_config_file(path: str | Path) -> ExperimentConfig:
    data = yaml.safe_load(Path(path).read_text())
    return ExperimentConfig.from_dict(data)
