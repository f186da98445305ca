"""The three benchmark problems: losses, exact gradients, residual Jacobians,
energy and Hilbert Gram matrices, exact solutions and relative error norms.

Conventions shared by all problems:
  * every loss term is averaged (or trapezoid-integrated, for the variational
    problem) over its own collocation set, with boundary penalty fixed to 1;
  * the Euclidean gradient is the exact gradient of the discrete loss
    (including the factor 2 from differentiating squared residuals);
  * ``gram_energy`` discretizes the second derivative of the function-space
    energy with the same collocation points as the loss, so for the two
    strong-residual problems it equals J^T diag(weights) J built from the same
    residual Jacobians as the gradient;
  * ``hessian_factor`` records the ratio between the Hessian of the discrete
    loss (for an affine model) and ``gram_energy``: 2 for squared-residual
    losses, 1 for the variational energy. Dividing the natural-gradient
    direction by it makes step size 1 the function-space Newton step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import network as net
from . import quadrature as quad
from .network import Architecture, forward, factors_value, factors_grad, factors_hess, factors_lincomb

__all__ = [
    "CollocationSet",
    "Assembled",
    "Poisson2D",
    "Heat1D",
    "RitzNonlinear1D",
    "make_problem",
    "relative_error_fields",
    "PROBLEM_KINDS",
]

GRAM_ENERGY = "energy"
GRAM_HILBERT = "hilbert"
BOTH_GRAMS = frozenset((GRAM_ENERGY, GRAM_HILBERT))


@dataclass(frozen=True)
class CollocationSet:
    interior: np.ndarray  # (n, input_dim)
    boundary: np.ndarray  # (nb, input_dim) or empty
    initial: np.ndarray  # (ni, input_dim) or empty
    interior_weights: np.ndarray
    boundary_weights: np.ndarray
    initial_weights: np.ndarray


@dataclass
class Assembled:
    """Immutable snapshot of one loss/gradient/Gram assembly."""

    loss: float
    grad: np.ndarray
    residuals: dict[str, np.ndarray] = field(default_factory=dict)
    residual_jacobians: dict[str, np.ndarray] = field(default_factory=dict)
    term_weights: dict[str, np.ndarray] = field(default_factory=dict)
    gram_energy: np.ndarray | None = None
    gram_hilbert: np.ndarray | None = None


def _sym(g: np.ndarray) -> np.ndarray:
    return 0.5 * (g + g.T)


def _weighted_gram(jacobians_and_weights) -> np.ndarray:
    g = None
    for jac, w in jacobians_and_weights:
        term = jac.T @ (w[:, None] * jac) if w.ndim == 1 else (w * (jac.T @ jac))
        g = term if g is None else g + term
    return _sym(g)


def relative_error_fields(
    diff_value: np.ndarray,
    diff_grad: np.ndarray | None,
    ref_value: np.ndarray,
    ref_grad: np.ndarray | None,
    weights: np.ndarray,
    norm: str,
) -> float:
    """Relative L2 or H1 error from sampled value/gradient differences."""
    num = weights @ (diff_value**2)
    den = weights @ (ref_value**2)
    if norm == "h1":
        num += weights @ (diff_grad**2 @ np.ones(diff_grad.shape[1]))
        den += weights @ (ref_grad**2 @ np.ones(ref_grad.shape[1]))
    elif norm != "l2":
        raise ValueError(f"unknown norm {norm!r}")
    assert den > 0, "reference function has zero norm"
    return float(np.sqrt(num / den))


class _ProblemBase:
    kind: str
    arch: Architecture
    collocation: CollocationSet
    hessian_factor: float
    eval_points: np.ndarray
    eval_weights: np.ndarray

    # closed-form exact solution interface -----------------------------------
    def exact(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def exact_grad(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def exact_residual(self, points: np.ndarray) -> np.ndarray:
        """PDE residual of the exact solution, from closed-form derivatives."""
        raise NotImplementedError

    def random_interior(self, n: int, seed: int = 0) -> np.ndarray:
        raise NotImplementedError

    # assembly ----------------------------------------------------------------
    def assemble(self, theta: np.ndarray, need_grams=BOTH_GRAMS) -> Assembled:
        raise NotImplementedError

    def loss_batch(self, thetas: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def loss(self, theta: np.ndarray) -> float:
        return float(self.loss_batch(np.asarray(theta)[None, :])[0])

    # error norms -------------------------------------------------------------
    def relative_error(self, theta: np.ndarray, norm: str = "l2", eval_points=None, eval_weights=None) -> float:
        pts = self.eval_points if eval_points is None else eval_points
        wts = self.eval_weights if eval_weights is None else eval_weights
        fw = forward(self.arch, theta, pts, order=1)
        diff_v = net.value(fw) - self.exact(pts)
        diff_g = net.grad_x(fw) - self.exact_grad(pts) if norm == "h1" else None
        return relative_error_fields(diff_v, diff_g, self.exact(pts), self.exact_grad(pts), wts, norm)

    def error_pair(self, theta: np.ndarray) -> tuple[float, float]:
        """(relative L2, relative H1) on the evaluation grid, sharing one forward pass."""
        pts, wts = self.eval_points, self.eval_weights
        fw = forward(self.arch, theta, pts, order=1)
        ref_v, ref_g = self.exact(pts), self.exact_grad(pts)
        diff_v = net.value(fw) - ref_v
        diff_g = net.grad_x(fw) - ref_g
        l2 = relative_error_fields(diff_v, None, ref_v, None, wts, "l2")
        h1 = relative_error_fields(diff_v, diff_g, ref_v, ref_g, wts, "h1")
        return l2, h1


class Poisson2D(_ProblemBase):
    """PINN for -lap(u) = f on the unit square with zero boundary values.

    Default setup: width 64, 900 interior and 120 boundary collocation
    points, exact solution sin(pi x) sin(pi y).
    """

    kind = "poisson2d"
    hessian_factor = 2.0

    def __init__(self, width: int = 64, n_interior: tuple[int, int] = (30, 30),
                 n_boundary_per_edge: int = 30, eval_grid: tuple[int, int] = (100, 100),
                 source=None):
        self.arch = Architecture(2, width)
        interior, _ = quad.tensor_grid(*n_interior)
        boundary = quad.boundary_grid(n_boundary_per_edge)
        n, nb = interior.shape[0], boundary.shape[0]
        empty = np.zeros((0, 2))
        self.collocation = CollocationSet(
            interior, boundary, empty,
            np.full(n, 1.0 / n), np.full(nb, 1.0 / nb), np.zeros(0),
        )
        self._source = source if source is not None else self.default_source
        self._f = self._source(interior)
        self.eval_points, self.eval_weights = quad.tensor_grid_with_boundary(*eval_grid)

    @staticmethod
    def default_source(points: np.ndarray) -> np.ndarray:
        return 2.0 * np.pi**2 * np.sin(np.pi * points[:, 0]) * np.sin(np.pi * points[:, 1])

    def exact(self, points):
        return np.sin(np.pi * points[:, 0]) * np.sin(np.pi * points[:, 1])

    def exact_grad(self, points):
        sx, cx = np.sin(np.pi * points[:, 0]), np.cos(np.pi * points[:, 0])
        sy, cy = np.sin(np.pi * points[:, 1]), np.cos(np.pi * points[:, 1])
        return np.pi * np.stack([cx * sy, sx * cy], axis=1)

    def exact_residual(self, points):
        # lap(u*) + f with lap(u*) = -2 pi^2 sin sin, evaluated in closed form
        lap = -2.0 * np.pi**2 * np.sin(np.pi * points[:, 0]) * np.sin(np.pi * points[:, 1])
        return lap + self._source(points)

    def random_interior(self, n, seed=0):
        return np.random.default_rng(seed).uniform(0.0, 1.0, (n, 2))

    def _residual_factors(self, fw):
        return factors_lincomb([(1.0, factors_hess(fw, 0)), (1.0, factors_hess(fw, 1))])

    def assemble(self, theta, need_grams=BOTH_GRAMS):
        col = self.collocation
        if col.interior.size == 0 or col.boundary.size == 0:
            raise ValueError("empty collocation set")
        fw = forward(self.arch, theta, col.interior, order=2)
        r = net.hess_diag(fw).sum(axis=1) + self._f
        fwb = forward(self.arch, theta, col.boundary, order=0)
        ub = net.value(fwb)
        wi, wb = col.interior_weights, col.boundary_weights
        out = Assembled(
            loss=float(wi @ r**2 + wb @ ub**2),
            grad=np.zeros(self.arch.param_count),
            residuals={"interior": r, "boundary": ub},
            term_weights={"interior": wi, "boundary": wb},
        )
        res_f = self._residual_factors(fw)
        val_fb = factors_value(fwb)
        if need_grams:
            j_r = net.jacobian(fw, res_f)
            j_b = net.jacobian(fwb, val_fb)
            out.residual_jacobians = {"interior": j_r, "boundary": j_b}
            out.grad = 2.0 * (j_r.T @ (wi * r) + j_b.T @ (wb * ub))
            if GRAM_ENERGY in need_grams:
                out.gram_energy = _weighted_gram([(j_r, wi), (j_b, wb)])
            if GRAM_HILBERT in need_grams:
                # discrete H2-style product on the interior points
                jacs = [net.jacobian(fw, factors_value(fw))]
                jacs += [net.jacobian(fw, factors_grad(fw, j)) for j in range(2)]
                jacs += [net.jacobian(fw, factors_hess(fw, j)) for j in range(2)]
                out.gram_hilbert = _weighted_gram([(j, wi) for j in jacs])
        else:
            out.grad = 2.0 * (net.contract(fw, res_f, wi * r) + net.contract(fwb, val_fb, wb * ub))
        return out

    def loss_batch(self, thetas):
        col = self.collocation
        vi = net.values_many(self.arch, thetas, col.interior, need=("lap",))
        r = vi["lap"] + self._f[None, :]
        vb = net.values_many(self.arch, thetas, col.boundary, need=("value",))
        return r**2 @ col.interior_weights + vb["value"] ** 2 @ col.boundary_weights


class Heat1D(_ProblemBase):
    """PINN for the 1d heat equation u_t = u_xx / 4 on (t, x) in [0, 1]^2.

    Initial condition sin(pi x), zero spatial boundary values; exact solution
    exp(-pi^2 t / 4) sin(pi x). Collocation mirrors the Poisson setup:
    30x30 interior space-time points, 30 initial, 30 per spatial side.
    """

    kind = "heat1d"
    hessian_factor = 2.0

    def __init__(self, width: int = 64, n_interior: tuple[int, int] = (30, 30),
                 n_initial: int = 30, n_boundary_per_side: int = 30,
                 eval_grid: tuple[int, int] = (100, 100)):
        self.arch = Architecture(2, width)
        interior, _ = quad.tensor_grid(*n_interior)
        if n_initial < 1:
            raise ValueError("initial collocation set must be nonempty")
        xs = np.linspace(0.0, 1.0, n_initial)
        initial = np.stack([np.zeros(n_initial), xs], axis=1)
        ts = np.linspace(0.0, 1.0, n_boundary_per_side)
        boundary = np.concatenate([
            np.stack([ts, np.zeros(n_boundary_per_side)], axis=1),
            np.stack([ts, np.ones(n_boundary_per_side)], axis=1),
        ])
        n, nb, ni = interior.shape[0], boundary.shape[0], initial.shape[0]
        self.collocation = CollocationSet(
            interior, boundary, initial,
            np.full(n, 1.0 / n), np.full(nb, 1.0 / nb), np.full(ni, 1.0 / ni),
        )
        self._u0 = np.sin(np.pi * initial[:, 1])
        self.eval_points, self.eval_weights = quad.tensor_grid_with_boundary(*eval_grid)

    def exact(self, points):
        return np.exp(-np.pi**2 * points[:, 0] / 4.0) * np.sin(np.pi * points[:, 1])

    def exact_grad(self, points):
        e = np.exp(-np.pi**2 * points[:, 0] / 4.0)
        s, c = np.sin(np.pi * points[:, 1]), np.cos(np.pi * points[:, 1])
        return np.stack([-np.pi**2 / 4.0 * e * s, np.pi * e * c], axis=1)

    def exact_residual(self, points):
        # u*_t - u*_xx / 4 = (-pi^2/4) u* - (-pi^2/4) u* = 0, in closed form
        e = np.exp(-np.pi**2 * points[:, 0] / 4.0)
        s = np.sin(np.pi * points[:, 1])
        ut = -np.pi**2 / 4.0 * e * s
        uxx = -np.pi**2 * e * s
        return ut - 0.25 * uxx

    def random_interior(self, n, seed=0):
        return np.random.default_rng(seed).uniform(0.0, 1.0, (n, 2))

    def _residual_factors(self, fw):
        return factors_lincomb([(1.0, factors_grad(fw, 0)), (-0.25, factors_hess(fw, 1))])

    def assemble(self, theta, need_grams=BOTH_GRAMS):
        col = self.collocation
        if col.initial.size == 0:
            raise ValueError("empty initial collocation set")
        fw = forward(self.arch, theta, col.interior, order=2)
        g = net.grad_x(fw)
        h = net.hess_diag(fw)
        r = g[:, 0] - 0.25 * h[:, 1]
        fwi = forward(self.arch, theta, col.initial, order=0)
        ri = net.value(fwi) - self._u0
        fwb = forward(self.arch, theta, col.boundary, order=0)
        rb = net.value(fwb)
        wi, wn, wb = col.interior_weights, col.initial_weights, col.boundary_weights
        out = Assembled(
            loss=float(wi @ r**2 + wn @ ri**2 + wb @ rb**2),
            grad=np.zeros(self.arch.param_count),
            residuals={"interior": r, "initial": ri, "boundary": rb},
            term_weights={"interior": wi, "initial": wn, "boundary": wb},
        )
        res_f = self._residual_factors(fw)
        val_fi, val_fb = factors_value(fwi), factors_value(fwb)
        if need_grams:
            j_r = net.jacobian(fw, res_f)
            j_i = net.jacobian(fwi, val_fi)
            j_b = net.jacobian(fwb, val_fb)
            out.residual_jacobians = {"interior": j_r, "initial": j_i, "boundary": j_b}
            out.grad = 2.0 * (j_r.T @ (wi * r) + j_i.T @ (wn * ri) + j_b.T @ (wb * rb))
            if GRAM_ENERGY in need_grams:
                out.gram_energy = _weighted_gram([(j_r, wi), (j_i, wn), (j_b, wb)])
            if GRAM_HILBERT in need_grams:
                # value + d/dt + d/dx + d2/dx2 product on the interior points,
                # keeping the initial/boundary value terms of the loss structure
                jacs = [net.jacobian(fw, factors_value(fw)),
                        net.jacobian(fw, factors_grad(fw, 0)),
                        net.jacobian(fw, factors_grad(fw, 1)),
                        net.jacobian(fw, factors_hess(fw, 1))]
                out.gram_hilbert = _weighted_gram([(j, wi) for j in jacs] + [(j_i, wn), (j_b, wb)])
        else:
            out.grad = 2.0 * (
                net.contract(fw, res_f, wi * r)
                + net.contract(fwi, val_fi, wn * ri)
                + net.contract(fwb, val_fb, wb * rb)
            )
        return out

    def loss_batch(self, thetas):
        col = self.collocation
        vi = net.values_many(self.arch, thetas, col.interior, need=("grad0", "hess1"))
        r = vi["grad0"] - 0.25 * vi["hess1"]
        vn = net.values_many(self.arch, thetas, col.initial, need=("value",))
        vb = net.values_many(self.arch, thetas, col.boundary, need=("value",))
        return (
            r**2 @ col.interior_weights
            + (vn["value"] - self._u0[None, :]) ** 2 @ col.initial_weights
            + vb["value"] ** 2 @ col.boundary_weights
        )


class RitzNonlinear1D(_ProblemBase):
    """Deep Ritz for -u'' + u^3 = f on [-1, 1] with natural boundary conditions.

    Energy E(u) = 1/2 int |u'|^2 + 1/4 int u^4 - int f u, discretized by the
    trapezoidal rule; f chosen so the minimizer is cos(pi x).
    """

    kind = "ritz1d"
    hessian_factor = 1.0

    def __init__(self, width: int = 32, n_points: int = 20000, n_eval: int = 10000):
        self.arch = Architecture(1, width)
        self.grid = quad.grid1d(-1.0, 1.0, n_points)
        interior = self.grid.points[:, None]
        empty = np.zeros((0, 1))
        self.collocation = CollocationSet(
            interior, empty, empty, self.grid.weights, np.zeros(0), np.zeros(0)
        )
        self._f = self.source(interior)
        eg = quad.grid1d(-1.0, 1.0, n_eval)
        self.eval_points, self.eval_weights = eg.points[:, None], eg.weights

    @staticmethod
    def source(points: np.ndarray) -> np.ndarray:
        x = points[:, 0]
        return np.pi**2 * np.cos(np.pi * x) + np.cos(np.pi * x) ** 3

    def exact(self, points):
        return np.cos(np.pi * points[:, 0])

    def exact_grad(self, points):
        return -np.pi * np.sin(np.pi * points[:, 0])[:, None]

    def exact_residual(self, points):
        x = points[:, 0]
        u = np.cos(np.pi * x)
        return np.pi**2 * u + u**3 - self.source(points)

    def random_interior(self, n, seed=0):
        return np.random.default_rng(seed).uniform(-1.0, 1.0, (n, 1))

    def exact_energy(self) -> float:
        """E(u*) from the closed-form integrals: pi^2/2 + 3/16 - (pi^2 + 3/4)."""
        return -np.pi**2 / 2.0 - 9.0 / 16.0

    def assemble(self, theta, need_grams=BOTH_GRAMS):
        col = self.collocation
        w = col.interior_weights
        fw = forward(self.arch, theta, col.interior, order=1)
        u = net.value(fw)
        up = net.grad_x(fw)[:, 0]
        out = Assembled(
            loss=float(w @ (0.5 * up**2 + 0.25 * u**4 - self._f * u)),
            grad=np.zeros(self.arch.param_count),
            residuals={"gradient": up, "value": u},
            term_weights={"interior": w},
        )
        val_f, grd_f = factors_value(fw), factors_grad(fw, 0)
        r1 = w * up
        r0 = w * (u**3 - self._f)
        if need_grams:
            j_v = net.jacobian(fw, val_f)
            j_g = net.jacobian(fw, grd_f)
            out.residual_jacobians = {"gradient": j_g, "value": j_v}
            out.grad = j_g.T @ r1 + j_v.T @ r0
            if GRAM_ENERGY in need_grams:
                out.gram_energy = _weighted_gram([(j_g, w), (j_v, 3.0 * w * u**2)])
            if GRAM_HILBERT in need_grams:
                out.gram_hilbert = _weighted_gram([(j_g, w), (j_v, w)])
        else:
            out.grad = net.contract(fw, grd_f, r1) + net.contract(fw, val_f, r0)
        return out

    def loss_batch(self, thetas):
        col = self.collocation
        vm = net.values_many(self.arch, thetas, col.interior, need=("value", "grad0"))
        u, up = vm["value"], vm["grad0"]
        return (0.5 * up**2 + 0.25 * u**4 - self._f[None, :] * u) @ col.interior_weights


PROBLEM_KINDS = {
    "poisson2d": Poisson2D,
    "heat1d": Heat1D,
    "ritz1d": RitzNonlinear1D,
}


def make_problem(kind: str, **overrides) -> _ProblemBase:
    try:
        cls = PROBLEM_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown problem {kind!r}; choose from {sorted(PROBLEM_KINDS)}") from None
    return cls(**overrides)
