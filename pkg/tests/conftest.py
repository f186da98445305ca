"""Shared helpers for the acceptance suite: a disk cache for heavy training
runs and end-of-run criterion reporting.

Training results are cached under ``tests/.acceptance_cache`` keyed by a hash
of the library source and the run configuration, so re-running the suite after
unrelated edits to the tests is cheap while any change to the library
invalidates the cache.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from engd.optim import OptimizerConfig, TrainRecord, train
from engd.problems import make_problem

CACHE_DIR = Path(__file__).parent / ".acceptance_cache"
_SRC_DIR = Path(__file__).parent.parent / "src" / "engd"

_criterion_results: dict[int, tuple[bool, str]] = {}


def report_criterion(number: int, passed: bool, detail: str) -> None:
    """Record a criterion outcome; one line per criterion prints at the end."""
    _criterion_results[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criterion_results):
        passed, detail = _criterion_results[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"CRITERION {number}: {status} - {detail}")


def _source_hash() -> str:
    h = hashlib.sha256()
    for path in sorted(_SRC_DIR.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()[:16]


def _config_key(problem: str, overrides: dict, optimizer: OptimizerConfig, seed: int) -> str:
    parts = [
        problem,
        repr(sorted(overrides.items())),
        optimizer.kind,
        str(optimizer.max_iters),
        repr(optimizer.rcond),
        repr(tuple(optimizer.ngd_grid.etas)),
        repr(tuple(optimizer.gd_grid.etas)),
        repr(optimizer.adam),
        str(optimizer.log_every),
        repr(optimizer.chain),
        str(seed),
    ]
    return hashlib.sha256("|".join(parts).encode()).hexdigest()[:24]


def cached_train(problem_kind: str, overrides: dict, optimizer: OptimizerConfig, seed: int) -> TrainRecord:
    """Train once per (library source, config, seed); reuse the cached result."""
    CACHE_DIR.mkdir(exist_ok=True)
    key = f"{_source_hash()}_{_config_key(problem_kind, overrides, optimizer, seed)}"
    path = CACHE_DIR / f"{key}.npz"
    if path.exists():
        data = np.load(path)
        rows = [tuple(row) for row in data["rows"]]
        return TrainRecord(rows=rows, final_params=data["final_params"], diverged=bool(data["diverged"]))
    problem = make_problem(problem_kind, **overrides)
    rec = train(problem, optimizer, seed)
    np.savez(
        path,
        rows=np.array(rec.rows, dtype=float),
        final_params=rec.final_params,
        diverged=rec.diverged,
    )
    return rec


def cached_train_many(problem_kind: str, overrides: dict, optimizer: OptimizerConfig, seeds) -> list[TrainRecord]:
    return [cached_train(problem_kind, overrides, optimizer, seed) for seed in seeds]
