"""Experiment orchestration: multi-seed runs, summary statistics and CSV
artifacts.

Output layout inside the experiment directory:
  {problem}_{optimizer}_seed{K}.csv         per-iteration trace
  {problem}_{optimizer}_seed{K}_params.txt  final parameter checkpoint
  summary.csv                               median/min/max of final errors

The traces are deterministic per (config, seed) in every column except
``wall_ms``, which is measured wall time.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .linalg import pinv_solve
from .network import ParamVector, pushforward, save_params
from .optim import OptimizerConfig, TrainRecord, TRACE_COLUMNS, train
from .problems import GRAM_ENERGY, make_problem

__all__ = [
    "ExperimentConfig",
    "run_experiment",
    "summarize",
    "emit_field_csv",
    "write_summary_csv",
    "SUMMARY_COLUMNS",
]

SUMMARY_COLUMNS = (
    "optimizer", "median_rel_l2", "min_rel_l2", "max_rel_l2",
    "median_rel_h1", "min_rel_h1", "max_rel_h1",
)


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "poisson2d"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seeds: tuple[int, ...] = tuple(range(10))
    out_dir: Path | None = None
    problem_overrides: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seed list must be nonempty and duplicate-free")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _run_name(cfg: ExperimentConfig, seed: int) -> str:
    return f"{cfg.problem}_{cfg.optimizer.kind}_seed{seed}"


def write_trace_csv(path: Path, record: TrainRecord) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for row in record.rows:
            w.writerow([_fmt(v) for v in row])


def read_trace_csv(path: Path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [tuple(float(v) for v in row) for row in reader]
    return header, rows


def _train_one(cfg: ExperimentConfig, seed: int) -> TrainRecord:
    problem = make_problem(cfg.problem, **cfg.problem_overrides)
    return train(problem, cfg.optimizer, seed)


def _stats(values) -> tuple[float, float, float]:
    arr = np.asarray(values, dtype=float)
    return float(np.median(arr)), float(np.min(arr)), float(np.max(arr))


def summary_row(optimizer: str, records) -> dict:
    l2 = _stats([r.final_rel_l2 for r in records])
    h1 = _stats([r.final_rel_h1 for r in records])
    return dict(zip(SUMMARY_COLUMNS, (optimizer, *l2[:1], l2[1], l2[2], *h1[:1], h1[1], h1[2])))


def write_summary_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([row["optimizer"]] + [_fmt(row[c]) for c in SUMMARY_COLUMNS[1:]])


def run_experiment(cfg: ExperimentConfig):
    """Train every seed, write per-run CSVs and a summary CSV.

    Returns (records keyed by seed, summary row dict). Per-seed divergence is
    recorded in the trace, not fatal.
    """
    out = Path(cfg.out_dir) if cfg.out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"output directory {out} is not writable")
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_train_one, [cfg] * len(cfg.seeds), cfg.seeds))
        records = dict(zip(cfg.seeds, results))
    else:
        records = {seed: _train_one(cfg, seed) for seed in cfg.seeds}
    if out is not None:
        problem = make_problem(cfg.problem, **cfg.problem_overrides)
        for seed, rec in records.items():
            write_trace_csv(out / f"{_run_name(cfg, seed)}.csv", rec)
            save_params(out / f"{_run_name(cfg, seed)}_params.txt", ParamVector(problem.arch, rec.final_params))
    row = summary_row(cfg.optimizer.kind, list(records.values()))
    if out is not None:
        # merge with any earlier optimizers summarized in the same directory
        rows = [r for r in _read_summary_rows(out) if r["optimizer"] != cfg.optimizer.kind]
        rows.append(row)
        write_summary_csv(out / "summary.csv", rows)
    return records, row


def _read_summary_rows(out: Path) -> list[dict]:
    path = out / "summary.csv"
    if not path.exists():
        return []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            {c: (row[c] if c == "optimizer" else float(row[c])) for c in SUMMARY_COLUMNS}
            for row in reader
        ]


def summarize(out_dir: Path) -> list[dict]:
    """Recompute summary statistics from the per-run trace CSVs in a directory."""
    out = Path(out_dir)
    finals: dict[str, list[tuple[float, float]]] = {}
    for path in sorted(out.glob("*_seed*.csv")):
        name = path.stem  # {problem}_{optimizer}_seed{K}
        optimizer = name.split("_")[-2]
        _, rows = read_trace_csv(path)
        if rows:
            finals.setdefault(optimizer, []).append((rows[-1][2], rows[-1][3]))
    summary = []
    for optimizer in sorted(finals):
        l2 = _stats([x[0] for x in finals[optimizer]])
        h1 = _stats([x[1] for x in finals[optimizer]])
        summary.append(dict(zip(SUMMARY_COLUMNS, (optimizer, *l2, *h1))))
    return summary


def _normalized(values: np.ndarray):
    """Rescale to [-1, 1] by the max absolute value; flag the zero function."""
    scale = float(np.abs(values).max(initial=0.0))
    if scale == 0.0:
        return values, scale, True
    return values / scale, scale, False


def emit_field_csv(params: ParamVector, problem, out_path: Path, rcond: float = 1e-12) -> dict:
    """Write grid samples of the residual u - u*, the energy-NG pushforward and
    the vanilla-gradient pushforward, each rescaled to [-1, 1].

    A sidecar ``<name>_meta.csv`` records the scale factors and zero flags.
    Returns the metadata dict.
    """
    theta = params.values
    pts = problem.eval_points
    asm = problem.assemble(theta, need_grams=frozenset((GRAM_ENERGY,)))
    psi = pinv_solve(asm.gram_energy, asm.grad, rcond) / problem.hessian_factor
    residual = _model_values(params, pts) - problem.exact(pts)
    fields = {
        "residual": residual,
        "engd_pushforward": pushforward(params, psi, pts),
        "grad_pushforward": pushforward(params, asm.grad, pts),
    }
    meta = {}
    columns, header = [], []
    for j in range(pts.shape[1]):
        header.append("xy"[j] if problem.arch.input_dim == 2 else "x")
        columns.append(pts[:, j])
    if problem.arch.input_dim == 2:
        header = ["x", "y"]
    for name, vals in fields.items():
        scaled, scale, is_zero = _normalized(vals)
        meta[name] = {"scale": scale, "zero": is_zero}
        header.append(name)
        columns.append(scaled)
    out_path = Path(out_path)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])
    meta_path = out_path.with_name(out_path.stem + "_meta.csv")
    with open(meta_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["field", "scale", "zero_function"])
        for name, info in meta.items():
            w.writerow([name, _fmt(info["scale"]), int(info["zero"])])
    return meta


def _model_values(params: ParamVector, pts: np.ndarray) -> np.ndarray:
    from . import network as net

    fw = net.forward(params.arch, params.values, pts, order=0)
    return net.value(fw)
