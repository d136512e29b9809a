"""Command-line entry points: ``run``, ``sweep`` and ``stepsize-study``.

Exit codes: 0 success, 2 invalid configuration, 3 runtime failure
(divergence, or every sweep cell failing). Diagnostics go to stderr; stdout
carries only the path of the manifest (or leaderboard / study table) written.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, apply_overrides, load_raw
from .core import DATASET, l2_norm, make_rng
from .data import generate_synthetic_regression
from .orchestrator import RoundFailure, build_dataset, run_experiment, step_size_study

log = logging.getLogger("dpfedexp")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

ROUND_COLUMNS = ["round", "eta_g", "eta_target", "c_bar_norm", "train_loss", "dist_to_optimum", "eps_spent", "rho_spent"]
STUDY_COLUMNS = ["M", "rule", "mean", "std", "eta_target"]
LEADERBOARD_WINDOW = 5


def fmt(x) -> str:
    """17 significant digits, '.' decimal, empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def rounds_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROUND_COLUMNS)
    for r in reports:
        led = r.privacy
        rho = led.rho_total if led.regime in ("ldp-gaussian", "cdp") else None
        writer.writerow(
            [fmt(r.round), fmt(r.eta_g), fmt(r.eta_target), fmt(r.c_bar_norm), fmt(r.train_loss),
             fmt(r.dist_to_optimum), fmt(led.eps), fmt(rho)]
        )
    return buf.getvalue()


def summarize(config: ExperimentConfig, dataset, final, reports, wall_time: float) -> dict:
    w0 = np.zeros(dataset.model_dim)
    last = reports[-1]
    window = reports[-LEADERBOARD_WINDOW:]
    summary = {
        "algorithm": config.server.algorithm,
        "step_rule": config.rule_variant,
        "rounds": len(reports),
        "initial_loss": dataset.mean_loss(w0),
        "initial_distance": None if dataset.optimum is None else l2_norm(w0 - dataset.optimum),
        "final_loss": dataset.mean_loss(final),
        "final_distance": None if dataset.optimum is None else l2_norm(final - dataset.optimum),
        "last_iterate_loss": last.train_loss,
        "last_iterate_distance": last.dist_to_optimum,
        "mean_train_loss_last_5": float(np.mean([r.train_loss for r in window])),
        "privacy": last.privacy.to_dict(),
        "wall_time_s": wall_time,
    }
    return summary


def execute_run(config: ExperimentConfig, out_dir: Path, workers: int) -> Path:
    """Run one experiment and write CSV, summary and manifest; returns the manifest path."""
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = build_dataset(config)
    t0 = time.perf_counter()
    final, reports = run_experiment(config, dataset, workers=workers)
    wall = time.perf_counter() - t0
    csv_path = out_dir / "rounds.csv"
    summary_path = out_dir / "summary.json"
    csv_path.write_text(rounds_csv(reports))
    summary_path.write_text(json.dumps(summarize(config, dataset, final, reports, wall), indent=2))
    manifest = {
        "config": config.to_dict(),
        "version": version_string(),
        "seed": config.run.seed,
        "rounds_csv": str(csv_path),
        "summary_json": str(summary_path),
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path


def _config_from_args(args) -> tuple[dict, ExperimentConfig]:
    raw = load_raw(args.config)
    overrides = list(args.override or [])
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    raw = apply_overrides(raw, overrides)
    return raw, ExperimentConfig.from_dict(raw)


def cmd_run(args) -> int:
    try:
        _, config = _config_from_args(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = execute_run(config, Path(args.out_dir), args.workers)
    except RoundFailure as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, OSError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(manifest)
    return EXIT_OK


def _grid(section: dict, key: str, flag):
    if flag is not None:
        return [float(v) for v in flag.split(",") if v.strip()]
    values = section.get(key)
    if not values:
        raise ConfigError(f"sweep.{key}", "grid is missing or empty")
    if not isinstance(values, list):
        raise ConfigError(f"sweep.{key}", "grid must be a list")
    return [float(v) for v in values]


def cmd_sweep(args) -> int:
    try:
        raw, base = _config_from_args(args)
        sweep = raw.get("sweep", {})
        eta_grid = _grid(sweep, "eta_l", args.eta_l_grid)
        clip_grid = _grid(sweep, "clip_C", args.clip_grid)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, eta_l in enumerate(eta_grid):
        for j, clip_C in enumerate(clip_grid):
            cell = out_dir / f"cell_{i:02d}_{j:02d}"
            entry = {"eta_l": eta_l, "clip_C": clip_C, "dir": str(cell)}
            try:
                cfg = ExperimentConfig.from_dict(apply_overrides(raw, [f"client.eta_l={eta_l!r}", f"client.clip_C={clip_C!r}"]))
                manifest = execute_run(cfg, cell, args.workers)
                summary = json.loads(Path(json.loads(manifest.read_text())["summary_json"]).read_text())
                score = summary["mean_train_loss_last_5"]
                entry.update(status="ok", manifest=str(manifest), score=score if np.isfinite(score) else None)
            except (RoundFailure, ValueError) as exc:
                print(f"cell eta_l={eta_l}, clip_C={clip_C} failed: {exc}", file=sys.stderr)
                entry.update(status="failed", error=str(exc), score=None)
            entries.append(entry)
    ranked = sorted(entries, key=lambda e: (e["score"] is None, e["score"] if e["score"] is not None else 0.0))
    for rank, e in enumerate(ranked, 1):
        e["rank"] = rank
    board = {"criterion": f"mean training loss over the last {LEADERBOARD_WINDOW} rounds (lower is better)", "entries": ranked}
    board_path = out_dir / "leaderboard.json"
    board_path.write_text(json.dumps(board, indent=2))
    print(board_path)
    return EXIT_OK if any(e["status"] == "ok" for e in entries) else EXIT_RUNTIME


def study_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(STUDY_COLUMNS)
    for r in rows:
        writer.writerow([fmt(r.M), r.rule, fmt(r.mean), fmt(r.std), fmt(r.eta_target)])
    return buf.getvalue()


def cmd_stepsize_study(args) -> int:
    try:
        raw, config = _config_from_args(args)
        study = raw.get("study", {})
        M_grid = [int(m) for m in study.get("M_grid", [10, 100, 1000])]
        reps = int(study.get("reps", 20))
        mechanisms = tuple(study.get("mechanisms", ["gaussian", "privunit"]))
        if config.dataset.kind != "regression":
            raise ConfigError("dataset.kind", "the step-size study needs a regression dataset")
        if not M_grid or min(M_grid) < 1 or reps < 1:
            raise ConfigError("study", "M_grid entries and reps must be positive")
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    C = config.client.clip_C
    sigma = config.mechanism.sigma if config.mechanism.sigma is not None else 0.7 * C
    dataset = generate_synthetic_regression(max(M_grid), config.dataset.d, make_rng(config.run.seed, 0, DATASET))
    m = config.mechanism
    try:
        rows = step_size_study(dataset, M_grid, config.local, sigma, (m.eps0, m.eps1, m.eps2), reps, config.run.seed, mechanisms)
    except (ValueError, ArithmeticError) as exc:
        print(f"study failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "stepsize_study.csv"
    path.write_text(study_csv(rows))
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpfedexp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out-dir", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="client-phase worker threads")
        p.add_argument("--override", action="append", metavar="KEY=VALUE", help="e.g. client.eta_l=0.01 (repeatable)")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("run", help="run one experiment"))
    p = sub.add_parser("sweep", help="grid search over eta_l and clip_C")
    common(p)
    p.add_argument("--eta-l-grid", default=None, help="comma-separated eta_l values (default: [sweep].eta_l)")
    p.add_argument("--clip-grid", default=None, help="comma-separated clip_C values (default: [sweep].clip_C)")
    common(sub.add_parser("stepsize-study", help="step sizes at initialization over a grid of M"))
    return parser


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "stepsize-study": cmd_stepsize_study}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
