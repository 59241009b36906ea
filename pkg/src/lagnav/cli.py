"""Command-line pipeline: generate a dataset, run the smoother, evaluate.

Exit codes are a stable contract:

    0  run converged (or generate/eval completed)
    1  usage, configuration or data error
    2  iteration cap reached without convergence
    3  divergence guard tripped

`run` writes one trajectory_<i>.csv and labels_<i>.csv per smoothing pass
plus report.json; `eval` recomputes metrics from those files and the
ground-truth files.
"""

from __future__ import annotations

import argparse
import dataclasses
import glob
import os
import sys

import numpy as np

from . import dataio
from .config import RunConfig, load_config
from .errors import ConfigError, CsvFormatError
from .iterative import Dataset, IterationReport, iterate
from .synthdata import (
    evaluate,
    make_dataset,
    precision_recall,
    rmse_against_truth,
)

__all__ = ["main", "cmd_generate", "cmd_run", "cmd_eval"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lagnav",
        description="Iterative fixed-lag smoothing with chi-squared outlier rejection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("generate", "write a synthetic dataset (imu, measurements, truth, labels)"),
        ("run", "run iterative smoothing on a dataset"),
        ("eval", "compute metrics from run outputs and ground truth"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to the JSON configuration")
        cmd.add_argument("--seed", type=int, default=None, help="override rng_seed")
        cmd.add_argument("--lag", type=int, default=None, help="override lag_steps")
        cmd.add_argument("--chi2-p", type=float, default=None, help="override chi2_p")
        cmd.add_argument(
            "--max-iters", type=int, default=None, help="override max_iterations"
        )
    return parser


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    overrides = {}
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    if args.lag is not None:
        overrides["lag_steps"] = args.lag
    if args.chi2_p is not None:
        overrides["chi2_p"] = args.chi2_p
    if args.max_iters is not None:
        overrides["max_iterations"] = args.max_iters
    if not overrides:
        return cfg
    return dataclasses.replace(cfg, **overrides)


def cmd_generate(cfg: RunConfig) -> int:
    """Write imu.csv, meas.csv, truth.csv and labels_true.csv to dataset_dir."""
    ds = make_dataset(cfg.scenario_config())
    out = cfg.dataset_dir
    os.makedirs(out, exist_ok=True)
    dataio.write_imu_csv(os.path.join(out, "imu.csv"), ds.imu)
    dataio.write_meas_csv(os.path.join(out, "meas.csv"), ds.meas)
    dataio.write_truth_csv(os.path.join(out, "truth.csv"), ds.ground_truth)
    dataio.write_true_labels_csv(
        os.path.join(out, "labels_true.csv"),
        np.array([z.t for z in ds.meas]),
        ds.true_labels,
        ds.offsets,
    )
    return 0


def _load_dataset(cfg: RunConfig) -> Dataset:
    imu = dataio.read_imu_csv(os.path.join(cfg.dataset_dir, "imu.csv"))
    meas = dataio.read_meas_csv(os.path.join(cfg.dataset_dir, "meas.csv"))
    ds = Dataset(imu=imu, meas=meas)
    truth_path = os.path.join(cfg.dataset_dir, "truth.csv")
    labels_path = os.path.join(cfg.dataset_dir, "labels_true.csv")
    if os.path.exists(truth_path):
        ds.ground_truth = dataio.read_truth_csv(truth_path)
    if os.path.exists(labels_path):
        _, flags, _ = dataio.read_true_labels_csv(labels_path)
        ds.true_labels = flags
    return ds


def _write_run_outputs(cfg: RunConfig, ds: Dataset, report: IterationReport) -> None:
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    for i, result in enumerate(report.passes, start=1):
        dataio.write_trajectory_csv(
            os.path.join(out, f"trajectory_{i}.csv"), result.trajectory
        )
        dataio.write_labels_csv(os.path.join(out, f"labels_{i}.csv"), result.records)
    metrics = None
    if report.passes and ds.ground_truth is not None and ds.true_labels is not None:
        metrics = evaluate(report, ds).as_dict()
    dataio.write_json(
        os.path.join(out, "report.json"),
        {
            "converged": report.converged,
            "iterations_used": report.iterations_used,
            "inlier_counts": [len(r.inlier_set) for r in report.passes],
            "metrics": metrics,
            "divergence": report.divergence.as_dict() if report.divergence else None,
        },
    )


def cmd_run(cfg: RunConfig) -> int:
    """Run iterative smoothing; write per-pass outputs and report.json."""
    ds = _load_dataset(cfg)
    report = iterate(ds, cfg)
    _write_run_outputs(cfg, ds, report)
    if report.divergence is not None:
        return 3
    if not report.converged:
        return 2
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    """Recompute per-pass metrics from files; write metrics.json."""
    truth = dataio.read_truth_csv(os.path.join(cfg.dataset_dir, "truth.csv"))
    _, true_flags, _ = dataio.read_true_labels_csv(
        os.path.join(cfg.dataset_dir, "labels_true.csv")
    )
    paths = sorted(
        glob.glob(os.path.join(cfg.output_dir, "trajectory_*.csv")),
        key=lambda p: int(os.path.basename(p).split("_")[1].split(".")[0]),
    )
    if not paths:
        raise FileNotFoundError(f"no trajectory_*.csv files in {cfg.output_dir}")
    metrics = {"pos_rmse": [], "euler_rmse": [], "precision": [], "recall": []}
    for path in paths:
        i = int(os.path.basename(path).split("_")[1].split(".")[0])
        traj = dataio.read_trajectory_csv(path)
        pr, er = rmse_against_truth(traj.t, traj.x, truth)
        _, _, _, inlier_flags = dataio.read_labels_csv(
            os.path.join(cfg.output_dir, f"labels_{i}.csv")
        )
        pcs, rcl = precision_recall(~inlier_flags, true_flags)
        metrics["pos_rmse"].append(pr)
        metrics["euler_rmse"].append(er)
        metrics["precision"].append(pcs)
        metrics["recall"].append(rcl)
    dataio.write_json(os.path.join(cfg.output_dir, "metrics.json"), metrics)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_eval(cfg)
    except (ConfigError, CsvFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
