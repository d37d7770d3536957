"""Command-line entry point.

Verbs: validate-config, fig3, train, evaluate, trend, inspect-checkpoint.
The output directory resolves from --out, then the STNSEC_OUT environment
variable, then ./runs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import PROFILE_NAMES, ExperimentConfig, load_config_file, load_profile
from .scenarios import TREND_AXES, run_evaluate, run_fig3, run_trend, train_pipeline


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a configuration YAML file")
    p.add_argument("--profile", choices=PROFILE_NAMES, default="toy", help="packaged profile")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory (default: $STNSEC_OUT or ./runs)")


def _resolve_config(args) -> ExperimentConfig:
    if args.config:
        return load_config_file(args.config)
    return load_profile(args.profile)


def _resolve_out(args, sub: str) -> Path:
    base = args.out or os.environ.get("STNSEC_OUT") or "runs"
    return Path(base) / sub


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stnsec",
        description="Secure downlink scheduling experiments for satellite-terrestrial networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-config", help="resolve and check a configuration")
    _add_common(p)

    p = sub.add_parser("fig3", help="theory-vs-simulation curves over a power sweep")
    _add_common(p)

    p = sub.add_parser("train", help="run the offline training stages")
    _add_common(p)
    p.add_argument("--stage", choices=["1", "2", "3", "all"], default="all")

    p = sub.add_parser("evaluate", help="frozen-policy comparison against all adversaries")
    _add_common(p)

    p = sub.add_parser("trend", help="directional sweep over one axis")
    _add_common(p)
    p.add_argument("--axis", choices=TREND_AXES, required=True)
    p.add_argument("--seeds", type=int, help="seeds per sweep point")

    p = sub.add_parser("inspect-checkpoint", help="print a checkpoint manifest and shapes")
    p.add_argument("path", help="checkpoint directory or parameter file")
    return parser


def cmd_validate_config(args) -> int:
    cfg = _resolve_config(args)
    dims = cfg.dims()
    print(f"profile: {cfg.name}")
    print(f"config_hash: {cfg.config_hash()}")
    print(
        f"grid: {dims.n_sats} satellites + {dims.n_bs} base stations, "
        f"{dims.time_slots} time x {dims.freq_slots} frequency slots, {dims.n_ues} UEs"
    )
    print(f"budgets_watt: {[round(b, 3) for b in cfg.budgets()]}")
    print(f"targets: security>={1 - cfg.eps_e():.2f} reliability>={1 - cfg.eps_u():.2f}")
    print("ok")
    return 0


def cmd_fig3(args) -> int:
    cfg = _resolve_config(args)
    out = _resolve_out(args, f"fig3_{cfg.name}_seed{args.seed}")
    result = run_fig3(cfg, args.seed, out)
    bad = [r for r in result["rows"] if not r["within_tol"]]
    print(f"wrote {result['csv']} and {result['figure']}")
    print(f"{len(result['rows']) - len(bad)}/{len(result['rows'])} points within tolerance")
    return 0 if not bad else 1


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out = _resolve_out(args, f"train_{cfg.name}_seed{args.seed}")
    stages = (1, 2, 3) if args.stage == "all" else (int(args.stage),)
    art = train_pipeline(cfg, args.seed, out, stages=stages)
    print(f"artifacts in {out}")
    if art.final_plan is not None:
        from .scenarios import adversarial_power_ratio, closed_form_summary

        summary = closed_form_summary(cfg, art.final_plan)
        print(
            f"final plan: mean SP {summary['sp_closed']:.4f}, mean RTP {summary['rtp_closed']:.4f}, "
            f"adversarial power ratio {adversarial_power_ratio(art.final_plan):.3f}"
        )
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    train_dir = _resolve_out(args, f"train_{cfg.name}_seed{args.seed}")
    if not (train_dir / "manifest.json").exists():
        print(f"no training artifacts under {train_dir}; run `stnsec train` first", file=sys.stderr)
        return 2
    art = train_pipeline(cfg, args.seed, train_dir, stages=())
    # stages=() loads the stored plans/generators without training
    out = _resolve_out(args, f"evaluate_{cfg.name}_seed{args.seed}")
    result = run_evaluate(cfg, art, args.seed, out)
    print(f"wrote {result['csv']}")
    print(f"no_learning audit: {'pass' if result['no_learning'] else 'FAIL'}")
    for row in result["rows"]:
        print(
            f"  {row['method']:>12} vs {row['eve']:<10} SP={row['sp_empirical']:.4f} "
            f"(closed {row['sp_closed']:.4f}) ratio={row['adv_power_ratio']:.3f}"
        )
    return 0


def cmd_trend(args) -> int:
    cfg = _resolve_config(args)
    out = _resolve_out(args, f"trend_{cfg.name}_seed{args.seed}")
    result = run_trend(cfg, args.axis, seed=args.seed, out_dir=out, n_seeds=args.seeds)
    print(f"wrote {result['csv']}")
    for k, v in result["flags"].items():
        print(f"  {k}: {v}")
    return 0


def cmd_inspect_checkpoint(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        manifest = path / "manifest.json"
        if manifest.exists():
            print(manifest.read_text())
        from ..nn import load_net

        for f in sorted(path.glob("*.bin")):
            net = load_net(f)
            widths = [net.in_width] + [w.shape[0] for w in net.weights]
            print(f"{f.name}: widths={widths} activations={net.activations} params={net.n_params}")
        return 0
    from ..nn import load_net

    net = load_net(path)
    widths = [net.in_width] + [w.shape[0] for w in net.weights]
    print(f"{path.name}: widths={widths} activations={net.activations} params={net.n_params}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "validate-config": cmd_validate_config,
        "fig3": cmd_fig3,
        "train": cmd_train,
        "evaluate": cmd_evaluate,
        "trend": cmd_trend,
        "inspect-checkpoint": cmd_inspect_checkpoint,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
