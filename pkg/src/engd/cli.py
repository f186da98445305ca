"""Command-line interface.

    engd run --problem poisson2d --optimizer engd --iters 500 --seeds 10 --out DIR
    engd summarize DIR
    engd fields --checkpoint FILE --problem poisson2d --out DIR

A flat ``key = value`` config file can seed any run; CLI flags override it.
Recognized keys: problem, out, workers, seeds, optimizer.kind,
optimizer.max_iters, optimizer.rcond, optimizer.log_every, adam.lr0,
adam.decay_start, adam.decay_every, adam.decay_factor, adam.lr_min,
adam.smooth_decay, chain (e.g. "adam:1000,engd:500"), plus problem.* size
overrides (problem.width, problem.n_points, ...).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .optim import AdamConfig, OptimizerConfig
from .network import load_params
from .problems import make_problem
from .runner import ExperimentConfig, emit_field_csv, run_experiment, summarize, write_summary_csv


def load_config(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def _parse_chain(text: str) -> tuple[tuple[str, int], ...]:
    phases = []
    for part in text.split(","):
        kind, _, iters = part.strip().partition(":")
        phases.append((kind, int(iters)))
    return tuple(phases)


def _coerce(value: str):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def build_experiment(cfg: dict[str, str]) -> ExperimentConfig:
    adam_kwargs = {}
    for f in dataclasses.fields(AdamConfig):
        key = f"adam.{f.name}"
        if key in cfg:
            adam_kwargs[f.name] = _coerce(cfg[key])
    opt_kwargs = {"adam": AdamConfig(**adam_kwargs)}
    for name in ("kind", "max_iters", "rcond", "log_every"):
        key = f"optimizer.{name}"
        if key in cfg:
            opt_kwargs[name] = _coerce(cfg[key])
    if "chain" in cfg:
        opt_kwargs["chain"] = _parse_chain(cfg["chain"])
    seeds_raw = cfg.get("seeds", "10")
    if "," in seeds_raw:
        seeds = tuple(int(s) for s in seeds_raw.split(","))
    else:
        seeds = tuple(range(int(seeds_raw)))
    overrides = {key.split(".", 1)[1]: _coerce(val) for key, val in cfg.items() if key.startswith("problem.")}
    return ExperimentConfig(
        problem=cfg.get("problem", "poisson2d"),
        optimizer=OptimizerConfig(**opt_kwargs),
        seeds=seeds,
        out_dir=Path(cfg["out"]) if "out" in cfg else None,
        problem_overrides=overrides,
        workers=int(cfg.get("workers", "1")),
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="engd", description="Natural-gradient PDE network training benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train one optimizer over multiple seeds")
    run_p.add_argument("--config", type=Path, help="flat key = value config file")
    run_p.add_argument("--problem", choices=("poisson2d", "heat1d", "ritz1d"))
    run_p.add_argument("--optimizer", choices=("engd", "hngd", "gd", "adam"))
    run_p.add_argument("--iters", type=int)
    run_p.add_argument("--seeds", help="seed count K (seeds 0..K-1) or comma list")
    run_p.add_argument("--out", type=Path)
    run_p.add_argument("--workers", type=int)

    sum_p = sub.add_parser("summarize", help="recompute summary stats from trace CSVs")
    sum_p.add_argument("dir", type=Path)

    fld_p = sub.add_parser("fields", help="emit residual/pushforward field CSV for a checkpoint")
    fld_p.add_argument("--checkpoint", type=Path, required=True)
    fld_p.add_argument("--problem", choices=("poisson2d", "heat1d", "ritz1d"), required=True)
    fld_p.add_argument("--out", type=Path, required=True)

    args = parser.parse_args(argv)

    if args.command == "run":
        cfg = load_config(args.config) if args.config else {}
        if args.problem:
            cfg["problem"] = args.problem
        if args.optimizer:
            cfg["optimizer.kind"] = args.optimizer
        if args.iters is not None:
            cfg["optimizer.max_iters"] = str(args.iters)
        if args.seeds is not None:
            cfg["seeds"] = args.seeds
        if args.out is not None:
            cfg["out"] = str(args.out)
        if args.workers is not None:
            cfg["workers"] = str(args.workers)
        experiment = build_experiment(cfg)
        _, row = run_experiment(experiment)
        print(
            f"{experiment.problem} {row['optimizer']}: "
            f"rel L2 median {row['median_rel_l2']:.3e} "
            f"(min {row['min_rel_l2']:.3e}, max {row['max_rel_l2']:.3e})"
        )
        return 0

    if args.command == "summarize":
        rows = summarize(args.dir)
        write_summary_csv(Path(args.dir) / "summary.csv", rows)
        for row in rows:
            print(
                f"{row['optimizer']}: rel L2 median {row['median_rel_l2']:.3e} "
                f"(min {row['min_rel_l2']:.3e}, max {row['max_rel_l2']:.3e})"
            )
        return 0

    if args.command == "fields":
        params = load_params(args.checkpoint)
        problem = make_problem(args.problem, width=params.arch.width)
        args.out.mkdir(parents=True, exist_ok=True)
        out_path = Path(args.out) / f"{args.problem}_fields.csv"
        meta = emit_field_csv(params, problem, out_path)
        zero = [name for name, info in meta.items() if info["zero"]]
        note = f" (zero fields: {', '.join(zero)})" if zero else ""
        print(f"wrote {out_path}{note}")
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
