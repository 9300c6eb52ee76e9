"""Operator entry point.

Subcommands: ``dataset`` (render a pair corpus), ``run`` (one servo
episode), ``bench`` (seeded batch trials), ``eval-loss`` (offline loss
over a manifest plus predictions file).

Exit codes: 0 success/converged, 1 ran but did not converge, 2 usage or
config error, 3 estimator failure.  ``SERVOBENCH_ESTIMATOR`` overrides
the external-estimator command line from the environment.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import presets, servo_sim
from .estimator import EstimatorError
from .loss_metrics import DEFAULT_BETA, LossConfig, pose_loss, rotation_error_deg, translation_error
from .pose_algebra import PoseSE3, PoseVector, ZeroQuaternionError, canonicalize
from .scene_renderer import DEFAULT_INTRINSICS

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_CONFIG = 2
EXIT_ESTIMATOR = 3

ESTIMATOR_ENV = "SERVOBENCH_ESTIMATOR"


class ConfigError(ValueError):
    pass


def _load_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config not found: {path}")
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


def _echo_config(resolved: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.resolved.json", "w") as f:
        json.dump(resolved, f, indent=2)
        f.write("\n")


def _apply_estimator_env(resolved: dict) -> dict:
    command = os.environ.get(ESTIMATOR_ENV)
    if command and resolved.get("estimator", {}).get("kind") == "external":
        resolved = dict(resolved)
        resolved["estimator"] = dict(resolved["estimator"], command=command)
    return resolved


def _build_trajectory(spec: dict) -> ds.Trajectory:
    kind = spec.get("kind", "random_ball")
    if kind == "directory":
        return ds.load_trajectory(spec["path"])
    if kind == "random_ball":
        center = (
            presets.pose_from_json(spec["center"])
            if spec.get("center")
            else PoseSE3.identity()
        )
        return ds.random_ball_trajectory(
            seed=int(spec.get("seed", 0)),
            n_frames=int(spec["n_frames"]),
            center=center,
            radius_t=float(spec.get("radius_t_mm", 50.0)) / 1000.0,
            radius_r_deg=float(spec.get("radius_r_deg", 5.0)),
        )
    raise ConfigError(f"unknown trajectory kind {kind!r}")


def cmd_dataset(config_path, out_dir) -> int:
    try:
        cfg = _load_json(config_path)
        out = Path(out_dir)
        window = int(cfg.get("window", 10))
        if window < 1:
            raise ConfigError("window must be >= 1")
        if "scene" not in cfg or "trajectory" not in cfg:
            raise ConfigError("dataset config needs 'scene' and 'trajectory'")
        scene = presets.parse_scene(cfg["scene"])
        intrinsics = (
            presets.parse_intrinsics(cfg["intrinsics"])
            if "intrinsics" in cfg
            else DEFAULT_INTRINSICS
        )
        trajectory = _build_trajectory(cfg["trajectory"])
        _echo_config(cfg, out)
        summary = ds.export_dataset(
            trajectory, scene, intrinsics, window, out,
            splat_radius=int(cfg.get("splat_radius", 1)),
        )
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"exported {summary.pair_count} pairs "
          f"({summary.image_count} frames) to {out_dir}")
    return EXIT_OK


def cmd_run(config_path, out_dir) -> int:
    try:
        user_cfg = _load_json(config_path)
        resolved = _apply_estimator_env(presets.resolve_config(user_cfg))
        out = Path(out_dir)
        _echo_config(resolved, out)
        cfg = presets.build_servo_config(resolved)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = servo_sim.run(cfg)
    except EstimatorError as exc:
        print(f"estimator failure: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    servo_sim.write_run_csv(result, out / "run.csv")
    with open(out / "run.json", "w") as f:
        json.dump(servo_sim.run_summary(result), f, indent=2)
        f.write("\n")
    print(
        f"{'converged' if result.converged else 'not converged'} "
        f"after {result.iters_used} iterations "
        f"(t_err {result.final_t_err_mm:.4f} mm, "
        f"r_err {result.final_r_err_deg:.4f} deg)"
    )
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_bench(preset_name, trials, seed, out_dir) -> int:
    if preset_name not in presets.PRESETS:
        print(f"error: unknown preset {preset_name!r}; "
              f"known: {sorted(presets.PRESETS)}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        preset = presets.PRESETS[preset_name]
        out = Path(out_dir)
        _echo_config(
            {"preset": preset_name, "trials": trials, "seed": seed,
             **presets.resolve_config({"preset": preset_name})},
            out,
        )
        summary = servo_sim.benchmark(preset, trials, seed)
    except (ValueError, EstimatorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    payload = json.dumps(summary, indent=2) + "\n"
    (out / "bench.json").write_text(payload)
    print(payload, end="")
    return EXIT_OK


def _read_jsonl(path) -> list:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    records = []
    with open(path) as f:
        for n, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{n}: invalid JSON: {exc}") from exc
    return records


def cmd_eval_loss(manifest_path, predictions_path, beta) -> int:
    try:
        manifest = _read_jsonl(manifest_path)
        predictions = _read_jsonl(predictions_path)
        if len(manifest) != len(predictions):
            raise ConfigError(
                f"record count mismatch: manifest has {len(manifest)}, "
                f"predictions has {len(predictions)}"
            )
        cfg = LossConfig(beta=beta)
        losses, t_errs, r_errs = [], [], []
        for n, (gt, pred) in enumerate(zip(manifest, predictions), start=1):
            for key in ("cur", "des"):
                if key in pred and pred[key] != gt[key]:
                    raise ConfigError(
                        f"record {n}: pair id mismatch "
                        f"({pred[key]!r} vs {gt[key]!r})"
                    )
            losses.append(pose_loss((pred["x"], pred["q"]), (gt["x"], gt["q"]), cfg))
            gt_pv = PoseVector(np.asarray(gt["x"], dtype=float), canonicalize(gt["q"]))
            pred_pv = PoseVector(
                np.asarray(pred["x"], dtype=float), canonicalize(pred["q"])
            )
            t_errs.append(translation_error(pred_pv, gt_pv))
            r_errs.append(rotation_error_deg(pred_pv, gt_pv))
    except (ConfigError, ZeroQuaternionError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = {
        "pairs": len(losses),
        "mean_loss": float(np.mean(losses)),
        "mean_t_err_mm": float(np.mean(t_errs)),
        "mean_r_err_deg": float(np.mean(r_errs)),
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="servobench",
        description="Relative-pose visual servoing simulator and benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset", help="render a training-pair dataset")
    p.add_argument("--config", required=True, help="dataset config JSON")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("run", help="run one servo episode")
    p.add_argument("--config", required=True, help="servo config JSON")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("bench", help="run seeded benchmark trials")
    p.add_argument("--preset", required=True, help="preset name")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("eval-loss", help="evaluate loss over predictions")
    p.add_argument("--manifest", required=True, help="ground-truth manifest.jsonl")
    p.add_argument("--predictions", required=True, help="predictions .jsonl")
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)

    return parser


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; keep that contract
        return int(exc.code) if exc.code else EXIT_OK
    if args.command == "dataset":
        return cmd_dataset(args.config, args.out)
    if args.command == "run":
        return cmd_run(args.config, args.out)
    if args.command == "bench":
        return cmd_bench(args.preset, args.trials, args.seed, args.out)
    if args.command == "eval-loss":
        return cmd_eval_loss(args.manifest, args.predictions, args.beta)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
