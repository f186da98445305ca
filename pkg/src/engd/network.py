"""Shallow tanh network with closed-form spatial derivatives and parameter
Jacobians.

The model is ``u(x) = sum_k c_k tanh(w_k . x + b_k) + d`` with parameter
layout: hidden weights (row-major, one row per neuron), hidden biases, output
weights, output bias. Everything downstream (residuals, Gram matrices,
pushforwards) is built from the factored derivative structure exposed here.

Each first/second order derivative of ``u`` w.r.t. parameters has the shape

    d(op)/dW[k, l] = c_k * (alpha_k * x_l + beta_{k,l})
    d(op)/db[k]    = c_k * alpha_k
    d(op)/dc[k]    = gamma_k
    d(op)/dd       = const (1 for the value, 0 for derivatives)

for per-point factors ``alpha, beta, gamma``; :class:`OpFactors` captures this
so Jacobian matrices and gradient contractions share one code path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Architecture",
    "ParamVector",
    "Jet",
    "JetBatch",
    "Forward",
    "OpFactors",
    "init_params",
    "forward",
    "factors_value",
    "factors_grad",
    "factors_hess",
    "factors_lincomb",
    "jacobian",
    "contract",
    "eval_batch",
    "evaluate_jet",
    "pushforward",
    "values_many",
    "save_params",
    "load_params",
]


@dataclass(frozen=True)
class Architecture:
    """Shallow tanh network shape: ``input_dim`` in {1, 2}, one hidden layer."""

    input_dim: int
    width: int

    def __post_init__(self):
        if self.input_dim not in (1, 2):
            raise ValueError(f"input_dim must be 1 or 2, got {self.input_dim}")
        if self.width < 1:
            raise ValueError(f"width must be positive, got {self.width}")

    @property
    def param_count(self) -> int:
        return (self.input_dim + 1) * self.width + self.width + 1


@dataclass(frozen=True)
class ParamVector:
    arch: Architecture
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.arch.param_count,):
            raise ValueError(f"expected {self.arch.param_count} parameters, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("non-finite parameter values")
        object.__setattr__(self, "values", v)


def split_params(arch: Architecture, values: np.ndarray):
    """Split a flat parameter vector into (W, b, c, d)."""
    m, d = arch.width, arch.input_dim
    w = values[: m * d].reshape(m, d)
    b = values[m * d : m * d + m]
    c = values[m * d + m : m * d + 2 * m]
    return w, b, c, values[-1]


def init_params(arch: Architecture, seed: int) -> ParamVector:
    """Gaussian initialization, mean 0 and standard deviation 0.1, seeded."""
    rng = np.random.default_rng(seed)
    return ParamVector(arch, rng.normal(0.0, 0.1, arch.param_count))


@dataclass
class Forward:
    """Cached forward pass of the hidden layer at a batch of points."""

    arch: Architecture
    x: np.ndarray  # (n, input_dim)
    w: np.ndarray  # (width, input_dim)
    b: np.ndarray
    c: np.ndarray
    d0: float
    t: np.ndarray  # tanh(a), (n, width)
    s: np.ndarray  # tanh'(a) = 1 - t^2
    sig2: np.ndarray | None = None  # tanh''(a) = -2 t s
    sig3: np.ndarray | None = None  # tanh'''(a) = -2 s (1 - 3 t^2)

    @property
    def n_points(self) -> int:
        return self.x.shape[0]


def forward(arch: Architecture, values: np.ndarray, points: np.ndarray, order: int = 2) -> Forward:
    """Evaluate the hidden layer and its activation derivatives up to ``order``.

    ``order`` counts the highest spatial derivative of ``u`` that will be
    requested; parameter Jacobians of order-k spatial derivatives need
    activation derivatives up to k+1.
    """
    values = np.asarray(values, dtype=float)
    if not np.isfinite(values).all():
        raise ValueError("non-finite parameter values")
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[1] != arch.input_dim:
        raise ValueError(f"points have dimension {x.shape[1]}, expected {arch.input_dim}")
    w, b, c, d0 = split_params(arch, values)
    a = x @ w.T + b
    t = np.tanh(a)
    s = 1.0 - t * t
    fw = Forward(arch, x, w, b, c, float(d0), t, s)
    if order >= 1:
        fw.sig2 = -2.0 * t * s
    if order >= 2:
        fw.sig3 = -2.0 * s * (1.0 - 3.0 * t * t)
    return fw


def value(fw: Forward) -> np.ndarray:
    return fw.t @ fw.c + fw.d0


def grad_x(fw: Forward) -> np.ndarray:
    return (fw.s * fw.c) @ fw.w


def hess_diag(fw: Forward) -> np.ndarray:
    return (fw.sig2 * fw.c) @ (fw.w * fw.w)


@dataclass
class OpFactors:
    """Factored parameter Jacobian of a linear-in-derivatives operator."""

    alpha: np.ndarray  # (n, width)
    beta: np.ndarray | None  # (n, width, input_dim) or None when zero
    gamma: np.ndarray  # (n, width)
    dconst: float


def factors_value(fw: Forward) -> OpFactors:
    return OpFactors(fw.s, None, fw.t, 1.0)


def factors_grad(fw: Forward, j: int) -> OpFactors:
    n, m = fw.t.shape
    beta = np.zeros((n, m, fw.arch.input_dim))
    beta[:, :, j] = fw.s
    return OpFactors(fw.sig2 * fw.w[:, j], beta, fw.s * fw.w[:, j], 0.0)


def factors_hess(fw: Forward, j: int) -> OpFactors:
    n, m = fw.t.shape
    wj = fw.w[:, j]
    beta = np.zeros((n, m, fw.arch.input_dim))
    beta[:, :, j] = 2.0 * fw.sig2 * wj
    return OpFactors(fw.sig3 * (wj * wj), beta, fw.sig2 * (wj * wj), 0.0)


def factors_lincomb(terms: Sequence[tuple[float, OpFactors]]) -> OpFactors:
    """Linear combination of operator factors, e.g. a Laplacian or a heat residual."""
    alpha = sum(coef * f.alpha for coef, f in terms)
    gamma = sum(coef * f.gamma for coef, f in terms)
    dconst = sum(coef * f.dconst for coef, f in terms)
    beta = None
    for coef, f in terms:
        if f.beta is not None:
            beta = coef * f.beta if beta is None else beta + coef * f.beta
    return OpFactors(alpha, beta, gamma, float(dconst))


def jacobian(fw: Forward, f: OpFactors) -> np.ndarray:
    """Materialize the (n_points, param_count) Jacobian of the operator."""
    n, m = fw.t.shape
    dw = (fw.c * f.alpha)[:, :, None] * fw.x[:, None, :]
    if f.beta is not None:
        dw = dw + fw.c[None, :, None] * f.beta
    db = fw.c * f.alpha
    dd = np.full((n, 1), f.dconst)
    return np.concatenate([dw.reshape(n, -1), db, f.gamma, dd], axis=1)


def contract(fw: Forward, f: OpFactors, r: np.ndarray) -> np.ndarray:
    """Compute ``jacobian(fw, f).T @ r`` without materializing the Jacobian."""
    gw = fw.c[:, None] * (f.alpha.T @ (r[:, None] * fw.x))
    if f.beta is not None:
        gw = gw + fw.c[:, None] * np.tensordot(r, f.beta, axes=1)
    gb = fw.c * (f.alpha.T @ r)
    gc = f.gamma.T @ r
    gd = f.dconst * r.sum()
    return np.concatenate([gw.ravel(), gb, gc, [gd]])


@dataclass
class JetBatch:
    """Value, spatial derivatives and their parameter Jacobians on a batch of points."""

    points: np.ndarray
    value: np.ndarray  # (n,)
    grad: np.ndarray | None  # (n, input_dim)
    hess: np.ndarray | None  # (n, input_dim), pure second derivatives
    dvalue: np.ndarray | None  # (n, p)
    dgrad: list[np.ndarray] | None  # per input dim, each (n, p)
    dhess: list[np.ndarray] | None


@dataclass
class Jet:
    """Per-point derivative bundle of the network function."""

    point: np.ndarray
    value: float
    grad_x: np.ndarray  # (input_dim,)
    hess_diag: np.ndarray  # (input_dim,)
    dvalue_dtheta: np.ndarray  # (p,)
    dgrad_dtheta: np.ndarray  # (p, input_dim)
    dhess_dtheta: np.ndarray  # (p, input_dim)


def eval_batch(params: ParamVector, points: np.ndarray, order: int = 2, param_jac: bool = False) -> JetBatch:
    fw = forward(params.arch, params.values, points, order=order)
    d = params.arch.input_dim
    out = JetBatch(fw.x, value(fw), None, None, None, None, None)
    if order >= 1:
        out.grad = grad_x(fw)
    if order >= 2:
        out.hess = hess_diag(fw)
    if param_jac:
        out.dvalue = jacobian(fw, factors_value(fw))
        if order >= 1:
            out.dgrad = [jacobian(fw, factors_grad(fw, j)) for j in range(d)]
        if order >= 2:
            out.dhess = [jacobian(fw, factors_hess(fw, j)) for j in range(d)]
    return out


def evaluate_jet(params: ParamVector, point: np.ndarray) -> Jet:
    jb = eval_batch(params, np.atleast_2d(point), order=2, param_jac=True)
    return Jet(
        point=jb.points[0],
        value=float(jb.value[0]),
        grad_x=jb.grad[0],
        hess_diag=jb.hess[0],
        dvalue_dtheta=jb.dvalue[0],
        dgrad_dtheta=np.stack([g[0] for g in jb.dgrad], axis=1),
        dhess_dtheta=np.stack([h[0] for h in jb.dhess], axis=1),
    )


def pushforward(params: ParamVector, direction: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Function-space image of a parameter direction, sampled on ``grid``."""
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (params.arch.param_count,):
        raise ValueError(f"direction has shape {direction.shape}, expected ({params.arch.param_count},)")
    fw = forward(params.arch, params.values, grid, order=0)
    f = factors_value(fw)
    # jacobian(fw, f) @ direction, assembled blockwise to avoid the (n, p) matrix
    m, d = params.arch.width, params.arch.input_dim
    dw = direction[: m * d].reshape(m, d)
    db = direction[m * d : m * d + m]
    dc = direction[m * d + m : m * d + 2 * m]
    dd = direction[-1]
    out = (f.alpha * (fw.x @ dw.T)) @ fw.c + f.alpha @ (fw.c * db) + f.gamma @ dc + dd
    return out


# ---------------------------------------------------------------------------
# Batched evaluation over many parameter candidates (line-search hot path).

# chunk working set sized to stay cache-resident; tuned on the target box
_CHUNK_ELEMS = 500_000


def values_many(
    arch: Architecture,
    thetas: np.ndarray,
    points: np.ndarray,
    need: Sequence[str] = ("value",),
) -> dict[str, np.ndarray]:
    """Evaluate value/derivative fields for many parameter vectors at once.

    ``need`` entries: 'value', 'grad{j}', 'hess{j}' (pure second derivative),
    'lap' (sum of the pure second derivatives). Returns (n_candidates,
    n_points) arrays. This is the line-search hot path: candidates are
    chunked, elementwise work runs in reused buffers, and every hidden-layer
    reduction is a batched mat-vec, so the streamed temporaries are only
    tanh(a), tanh^2 and (when second derivatives are needed) tanh^3.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    x = np.atleast_2d(np.asarray(points, dtype=float))
    k, n, m, d = thetas.shape[0], x.shape[0], arch.width, arch.input_dim
    out = {key: np.empty((k, n)) for key in need}
    need_t2 = any(key != "value" for key in need)
    need_t3 = any(key.startswith("hess") or key == "lap" for key in need)
    chunk = min(k, max(1, _CHUNK_ELEMS // max(1, n * m)))
    xt = np.ascontiguousarray(x.T)
    a_buf = np.empty((chunk, m, n))
    t2_buf = np.empty((chunk, m, n)) if need_t2 else None
    t3_buf = np.empty((chunk, m, n)) if need_t3 else None
    for lo in range(0, k, chunk):
        hi = min(k, lo + chunk)
        kk = hi - lo
        wk = thetas[lo:hi, : m * d].reshape(kk, m, d)
        b = thetas[lo:hi, m * d : m * d + m]
        c = thetas[lo:hi, m * d + m : m * d + 2 * m]
        d0 = thetas[lo:hi, -1]
        t = a_buf[:kk]
        for i in range(kk):
            np.dot(wk[i], xt, out=t[i])
        t += b[:, :, None]
        np.tanh(t, out=t)
        t2 = t3 = None
        if need_t2:
            t2 = np.multiply(t, t, out=t2_buf[:kk])
        if need_t3:
            t3 = np.multiply(t, t2, out=t3_buf[:kk])

        def reduce(coef, arr):
            # sum_m coef[k, m] * arr[k, m, :] as a batched mat-vec
            return (coef[:, None, :] @ arr)[:, 0, :]

        for key in need:
            if key == "value":
                out[key][lo:hi] = reduce(c, t) + d0[:, None]
            elif key.startswith("grad"):
                # tanh' = 1 - t^2
                q = c * wk[:, :, int(key[4:])]
                out[key][lo:hi] = q.sum(axis=1)[:, None] - reduce(q, t2)
            elif key.startswith("hess") or key == "lap":
                # tanh'' = -2 t (1 - t^2) = -2 t + 2 t^3
                w2 = (wk**2).sum(axis=2) if key == "lap" else wk[:, :, int(key[4:])] ** 2
                q = c * w2
                out[key][lo:hi] = 2.0 * (reduce(q, t3) - reduce(q, t))
            else:
                raise ValueError(f"unknown field {key!r}")
    return out


# ---------------------------------------------------------------------------
# Checkpoint format: one header line "input_dim width", then one parameter
# per line in round-trip-exact decimal.


def save_params(path, params: ParamVector) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{params.arch.input_dim} {params.arch.width}\n")
        for v in params.values:
            fh.write(f"{float(v)!r}\n")


def load_params(path) -> ParamVector:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        arch = Architecture(int(header[0]), int(header[1]))
        vals = np.array([float(line) for line in fh if line.strip()])
    return ParamVector(arch, vals)
