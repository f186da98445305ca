"""Optimizers: energy/Hilbert natural gradient descent with line search,
gradient descent with line search, Adam with a step-decay schedule, and the
training loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import DEFAULT_RCOND, pinv_solve
from .network import init_params
from .problems import GRAM_ENERGY, GRAM_HILBERT

__all__ = [
    "LineSearchGrid",
    "LineSearchDiverged",
    "log_grid",
    "default_ngd_grid",
    "default_gd_grid",
    "line_search",
    "ngd_step",
    "gd_step",
    "AdamConfig",
    "AdamState",
    "adam_lr",
    "adam_step",
    "OptimizerConfig",
    "TrainRecord",
    "TRACE_COLUMNS",
    "train",
]

TRACE_COLUMNS = ("iteration", "loss", "rel_l2", "rel_h1", "eta_star", "wall_ms")


@dataclass(frozen=True)
class LineSearchGrid:
    """Sorted candidate step sizes; always contains 0 so a step never increases the loss."""

    etas: np.ndarray

    def __post_init__(self):
        etas = np.asarray(self.etas, dtype=float)
        if etas.ndim != 1 or etas[0] != 0.0 or np.any(np.diff(etas) <= 0):
            raise ValueError("grid must be strictly increasing and start at 0")
        object.__setattr__(self, "etas", etas)


class LineSearchDiverged(RuntimeError):
    """Every candidate loss was non-finite."""


def log_grid(lo: float, hi: float, n: int) -> LineSearchGrid:
    return LineSearchGrid(np.concatenate([[0.0], np.geomspace(lo, hi, n)]))


def default_ngd_grid() -> LineSearchGrid:
    # step size 1 corresponds to the approximate Newton step; the far lower
    # end matters when the solved direction is huge on ill-conditioned Grams,
    # where only a tiny step along it still decreases the loss
    return log_grid(1e-12, 1.0, 60)


def default_gd_grid() -> LineSearchGrid:
    return log_grid(1e-8, 10.0, 50)


def line_search(loss_batch, theta: np.ndarray, direction: np.ndarray, grid: LineSearchGrid):
    """Pick the grid step size minimizing the loss along ``theta - eta * direction``.

    ``loss_batch`` maps a (k, p) candidate matrix to k losses. Ties break
    toward the larger step size.
    """
    if not np.isfinite(direction).all():
        raise ValueError("non-finite search direction")
    candidates = theta[None, :] - grid.etas[:, None] * direction[None, :]
    losses = np.asarray(loss_batch(candidates), dtype=float)
    losses = np.where(np.isfinite(losses), losses, np.inf)
    if not np.isfinite(losses).any():
        raise LineSearchDiverged("all candidate losses non-finite")
    # argmin over the reversed array prefers the largest eta among ties
    i = len(losses) - 1 - int(np.argmin(losses[::-1]))
    return float(grid.etas[i]), float(losses[i])


@dataclass(frozen=True)
class StepInfo:
    eta: float
    loss: float
    stalled: bool = False


def ngd_step(problem, theta: np.ndarray, variant: str = "energy",
             rcond: float = DEFAULT_RCOND, grid: LineSearchGrid | None = None,
             mask: np.ndarray | None = None):
    """One natural-gradient step: solve G psi = grad, then line search on [0, 1].

    ``variant`` selects the energy or Hilbert Gram matrix. The direction is
    divided by the problem's ``hessian_factor`` so that eta = 1 is the
    approximate function-space Newton step. ``mask`` optionally restricts the
    update to a parameter subset (e.g. a frozen hidden layer). On line-search
    divergence the parameters are kept and the step is reported as stalled.
    """
    if variant not in (GRAM_ENERGY, GRAM_HILBERT):
        raise ValueError(f"variant must be 'energy' or 'hilbert', got {variant!r}")
    if grid is None:
        grid = default_ngd_grid()
    asm = problem.assemble(theta, need_grams=frozenset((variant,)))
    gram = asm.gram_energy if variant == GRAM_ENERGY else asm.gram_hilbert
    g = asm.grad
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        sub = pinv_solve(gram[np.ix_(mask, mask)], g[mask], rcond)
        psi = np.zeros_like(g)
        psi[mask] = sub
    else:
        psi = pinv_solve(gram, g, rcond)
    psi = psi / problem.hessian_factor
    try:
        eta, loss = line_search(problem.loss_batch, theta, psi, grid)
    except LineSearchDiverged:
        return theta, StepInfo(0.0, asm.loss, stalled=True)
    return theta - eta * psi, StepInfo(eta, loss)


def gd_step(problem, theta: np.ndarray, grid: LineSearchGrid | None = None):
    """Plain gradient descent step with line search over an extended grid."""
    if grid is None:
        grid = default_gd_grid()
    asm = problem.assemble(theta, need_grams=frozenset())
    try:
        eta, loss = line_search(problem.loss_batch, theta, asm.grad, grid)
    except LineSearchDiverged:
        return theta, StepInfo(0.0, asm.loss, stalled=True)
    return theta - eta * asm.grad, StepInfo(eta, loss)


@dataclass(frozen=True)
class AdamConfig:
    lr0: float = 1e-3
    decay_start: int = 15_000
    decay_every: int = 10_000
    decay_factor: float = 0.1
    lr_min: float = 1e-7
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    smooth_decay: bool = False  # geometric decay alternative to stepwise drops


def adam_lr(iteration: int, cfg: AdamConfig = AdamConfig()) -> float:
    """Learning-rate schedule: lr0 until decay_start, then a decade drop every
    decay_every iterations, floored at lr_min."""
    if iteration < cfg.decay_start:
        return cfg.lr0
    if cfg.smooth_decay:
        lr = cfg.lr0 * cfg.decay_factor ** ((iteration - cfg.decay_start + cfg.decay_every) / cfg.decay_every)
    else:
        drops = 1 + (iteration - cfg.decay_start) // cfg.decay_every
        lr = cfg.lr0 * cfg.decay_factor**drops
    return max(lr, cfg.lr_min)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, p: int) -> "AdamState":
        return cls(np.zeros(p), np.zeros(p))


def adam_step(state: AdamState, theta: np.ndarray, grad: np.ndarray,
              iteration: int, cfg: AdamConfig = AdamConfig()):
    """Standard Adam update with bias correction; ``iteration`` counts from 0."""
    t = iteration + 1
    m = cfg.beta1 * state.m + (1 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1 - cfg.beta2) * grad**2
    mhat = m / (1 - cfg.beta1**t)
    vhat = v / (1 - cfg.beta2**t)
    lr = adam_lr(iteration, cfg)
    theta = theta - lr * mhat / (np.sqrt(vhat) + cfg.eps)
    return AdamState(m, v), theta, lr


OPTIMIZER_KINDS = ("engd", "hngd", "gd", "adam")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "engd"
    max_iters: int = 500
    rcond: float = DEFAULT_RCOND
    ngd_grid: LineSearchGrid = field(default_factory=default_ngd_grid)
    gd_grid: LineSearchGrid = field(default_factory=default_gd_grid)
    adam: AdamConfig = field(default_factory=AdamConfig)
    log_every: int = 100  # trace cadence for gd/adam; ngd records every iteration
    chain: tuple[tuple[str, int], ...] = ()  # optional pre-training phases

    def __post_init__(self):
        for kind, _ in self.phases():
            if kind not in OPTIMIZER_KINDS:
                raise ValueError(f"unknown optimizer {kind!r}; choose from {OPTIMIZER_KINDS}")

    def phases(self) -> tuple[tuple[str, int], ...]:
        return self.chain if self.chain else ((self.kind, self.max_iters),)


@dataclass
class TrainRecord:
    rows: list[tuple]  # TRACE_COLUMNS tuples
    final_params: np.ndarray
    diverged: bool = False

    def column(self, name: str) -> np.ndarray:
        return np.array([row[TRACE_COLUMNS.index(name)] for row in self.rows])

    @property
    def final_rel_l2(self) -> float:
        return self.rows[-1][2]

    @property
    def final_rel_h1(self) -> float:
        return self.rows[-1][3]


def train(problem, config: OptimizerConfig, seed: int) -> TrainRecord:
    """Run the configured optimizer (or chain of phases) from a seeded init.

    Deterministic given (problem, config, seed). Aborts with a partial record
    flagged diverged if the loss turns non-finite.
    """
    theta = init_params(problem.arch, seed).values
    rows: list[tuple] = []

    def record(iteration: int, loss: float, eta: float, wall_ms: float):
        l2, h1 = problem.error_pair(theta)
        rows.append((iteration, loss, l2, h1, eta, wall_ms))

    record(0, problem.loss(theta), 0.0, 0.0)
    it = 0
    diverged = False
    for kind, iters in config.phases():
        adam_state = AdamState.zeros(problem.arch.param_count)
        for k in range(iters):
            t0 = time.perf_counter()
            if kind in ("engd", "hngd"):
                variant = GRAM_ENERGY if kind == "engd" else GRAM_HILBERT
                theta, info = ngd_step(problem, theta, variant, config.rcond, config.ngd_grid)
                loss, eta = info.loss, info.eta
            elif kind == "gd":
                theta, info = gd_step(problem, theta, config.gd_grid)
                loss, eta = info.loss, info.eta
            else:
                asm = problem.assemble(theta, need_grams=frozenset())
                adam_state, theta, eta = adam_step(adam_state, theta, asm.grad, k, config.adam)
                loss = asm.loss
            it += 1
            wall_ms = (time.perf_counter() - t0) * 1e3
            if not np.isfinite(loss):
                rows.append((it, loss, np.nan, np.nan, eta, wall_ms))
                diverged = True
                break
            if kind in ("engd", "hngd") or it % config.log_every == 0 or k == iters - 1:
                if kind == "adam":
                    # asm.loss predates the update; report the post-step loss
                    loss = problem.loss(theta)
                record(it, loss, eta, wall_ms)
        if diverged:
            break
    return TrainRecord(rows, theta, diverged)
