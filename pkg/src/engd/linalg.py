"""Dense symmetric linear algebra: eigendecomposition, truncated pseudo-inverse
solves and range projections.

All Gram matrices handled here are symmetric PSD up to floating point noise,
so the pseudo-inverse is realized through a symmetric eigendecomposition
rather than a general SVD. Every function is pure: identical inputs yield
bit-identical outputs.
"""

from __future__ import annotations

import warnings
from typing import Callable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "EigDecomposition",
    "sym_eig",
    "pinv_solve",
    "project_range",
    "DEFAULT_RCOND",
]

# Double-precision noise floor for matrices up to a few hundred rows.
DEFAULT_RCOND = 1e-12

_SYM_TOL = 1e-12


class EigDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # sorted descending
    eigenvectors: np.ndarray  # orthonormal columns, eigenvectors[:, i] <-> eigenvalues[i]


def _as_symmetric(a: np.ndarray, tol: float = _SYM_TOL) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    bad = ~np.isfinite(a)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValueError(f"non-finite entry {a[i, j]!r} at ({i}, {j})")
    if np.abs(a - a.T).max(initial=0.0) > tol:
        raise ValueError(f"matrix not symmetric within {tol}")
    return a


def sym_eig(a: np.ndarray) -> EigDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues sorted descending."""
    a = _as_symmetric(a)
    # Symmetrize exactly so the LAPACK call sees one canonical input.
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    return EigDecomposition(w[::-1].copy(), v[:, ::-1].copy())


def pinv_solve(a: np.ndarray, b: np.ndarray, rcond: float = DEFAULT_RCOND) -> np.ndarray:
    """Minimum-norm least-squares solve of ``a @ psi = b`` with spectral truncation.

    Eigenvalues at or below ``rcond * max(eigenvalue)`` are truncated, never
    inverted; if everything is truncated the zero vector is returned. Negative
    eigenvalues beyond the truncation window trigger a warning (the matrices
    fed here are PSD in exact arithmetic).
    """
    if rcond < 0:
        raise ValueError(f"rcond must be nonnegative, got {rcond}")
    b = np.asarray(b, dtype=float)
    if b.ndim != 1:
        raise ValueError(f"b must be a vector, got shape {b.shape}")
    eig = sym_eig(a)
    if b.shape[0] != eig.eigenvectors.shape[0]:
        raise ValueError(f"dimension mismatch: matrix is {eig.eigenvectors.shape[0]}, b has {b.shape[0]}")
    lam_max = max(eig.eigenvalues[0], 0.0)
    cut = rcond * lam_max
    if eig.eigenvalues[-1] < -cut:
        warnings.warn(
            f"eigenvalue {eig.eigenvalues[-1]:.3e} below -{cut:.3e}; matrix is not PSD",
            RuntimeWarning,
            stacklevel=2,
        )
    keep = eig.eigenvalues > cut
    if not keep.any():
        return np.zeros_like(b)
    v = eig.eigenvectors[:, keep]
    coef = (v.T @ b) / eig.eigenvalues[keep]
    return v @ coef


def project_range(
    columns: Sequence[np.ndarray] | np.ndarray,
    inner: Callable[[np.ndarray, np.ndarray], float],
    x: np.ndarray,
    rcond: float = DEFAULT_RCOND,
) -> np.ndarray:
    """Project ``x`` onto the span of ``columns`` w.r.t. the bilinear form ``inner``.

    Solves the normal equations with :func:`pinv_solve`; ``inner`` must be
    symmetric PSD on the sampled grid functions.
    """
    x = np.asarray(x, dtype=float)
    cols = [np.asarray(c, dtype=float) for c in (columns.T if isinstance(columns, np.ndarray) and columns.ndim == 2 else columns)]
    if not cols:
        return np.zeros_like(x)
    for c in cols:
        if c.shape != x.shape:
            raise ValueError(f"column shape {c.shape} does not match x shape {x.shape}")
    k = len(cols)
    gram = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            gram[i, j] = gram[j, i] = inner(cols[i], cols[j])
    rhs = np.array([inner(c, x) for c in cols])
    coef = pinv_solve(gram, rhs, rcond)
    return np.stack(cols, axis=1) @ coef
