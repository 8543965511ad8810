"""Dense storage, matrix-free operators and the small factorizations.

Dense matrices are plain ``numpy.ndarray`` objects of dtype float64 in
C (row-major) order. Everything here works on small blocks (at most a
few dozen columns), so the kernels are LAPACK's via ``numpy.linalg``;
each public function checks its own contract and translates LAPACK
failures into :class:`ConvergenceFailure`.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvergenceFailure, NotPositiveSemiDefinite, RankDeficient

ABS_FLOOR = 1e-14


def _tol(rel, scale):
    return max(rel * scale, ABS_FLOOR)


def as_dense(a, name="matrix"):
    """Return ``a`` as a finite 2-D float64 array or raise ``ValueError``."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


class LinearOperator:
    """An m x n matrix known only through products with thin blocks.

    ``apply`` maps an (n, t) block to (m, t); ``apply_transpose`` maps
    (m, t) to (n, t). One-dimensional inputs are treated as a single
    column and a one-dimensional result is returned.
    """

    def __init__(self, rows: int, cols: int, apply: Callable, apply_transpose: Callable):
        if rows < 1 or cols < 1:
            raise ValueError("operator dimensions must be positive")
        self.rows = int(rows)
        self.cols = int(cols)
        self._apply = apply
        self._apply_t = apply_transpose

    @property
    def shape(self):
        return (self.rows, self.cols)

    @classmethod
    def from_dense(cls, a):
        a = np.ascontiguousarray(as_dense(a))
        return cls(a.shape[0], a.shape[1], lambda x: a @ x, lambda y: a.T @ y)

    def _call(self, fn, x, n_in, n_out):
        x = np.asarray(x, dtype=np.float64)
        vector = x.ndim == 1
        block = x[:, None] if vector else x
        if block.shape[0] != n_in:
            raise ValueError(f"expected {n_in} rows, got {block.shape[0]}")
        out = np.asarray(fn(block), dtype=np.float64)
        if out.shape != (n_out, block.shape[1]):
            raise ValueError(f"operator returned shape {out.shape}")
        return out[:, 0] if vector else out

    def apply(self, x):
        return self._call(self._apply, x, self.cols, self.rows)

    def apply_transpose(self, y):
        return self._call(self._apply_t, y, self.rows, self.cols)

    def __matmul__(self, x):
        return self.apply(x)

    def to_dense(self):
        """Materialize by applying to the identity (tests and small inputs only)."""
        return self.apply(np.eye(self.cols))


def aslinearoperator(a):
    if isinstance(a, LinearOperator):
        return a
    return LinearOperator.from_dense(a)


def probe_operator(op: LinearOperator, rng=None, t=3, rtol=1e-10):
    """Check linearity and adjoint consistency on random probes.

    Returns the worst relative discrepancy seen; raises ``AssertionError``
    when it exceeds ``rtol``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    x1 = rng.standard_normal((op.cols, t))
    x2 = rng.standard_normal((op.cols, t))
    y = rng.standard_normal((op.rows, t))
    a, b = rng.standard_normal(2)

    lhs = op.apply(a * x1 + b * x2)
    rhs = a * op.apply(x1) + b * op.apply(x2)
    lin = np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), ABS_FLOOR)

    ylhs = op.apply_transpose(a * y + b * y[:, ::-1])
    yrhs = a * op.apply_transpose(y) + b * op.apply_transpose(y[:, ::-1])
    lin_t = np.linalg.norm(ylhs - yrhs) / max(np.linalg.norm(yrhs), ABS_FLOOR)

    ax = op.apply(x1)
    aty = op.apply_transpose(y)
    inner1 = np.sum(ax * y)
    inner2 = np.sum(x1 * aty)
    scale = max(np.linalg.norm(ax) * np.linalg.norm(y), ABS_FLOOR)
    adj = abs(inner1 - inner2) / scale

    worst = max(lin, lin_t, adj)
    if worst > rtol:
        raise AssertionError(f"operator probe failed: discrepancy {worst:.3e}")
    return worst


@dataclass(frozen=True)
class SymEig:
    """Eigenpairs of a symmetric matrix, values sorted descending."""

    values: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True)
class SvdApprox:
    """A (possibly truncated) SVD ``U diag(S) V^T``.

    U is m x r and V is n x r, both with orthonormal columns; S is
    non-negative and sorted descending.
    """

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @property
    def rank(self):
        return self.S.shape[0]

    def to_dense(self):
        return (self.U * self.S) @ self.V.T


def orthonormalize(y, return_singular_values=False):
    """Orthonormal basis for the column span of a full-rank ``y``.

    Householder QR; numerical rank is decided from the singular values
    of the triangular factor, which equal those of ``y``. With
    ``return_singular_values`` those values are returned too.
    """
    y = as_dense(y, "Y")
    m, ell = y.shape
    if ell > m:
        raise ValueError(f"need rows >= cols, got {y.shape}")
    try:
        q, r = np.linalg.qr(y, mode="reduced")
        s = np.linalg.svd(r, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    if s[-1] <= _tol(1e-12, s[0]):
        raise RankDeficient(f"numerical rank below {ell} (sigma_min={s[-1]:.3e})")
    q = np.ascontiguousarray(q)
    if return_singular_values:
        return q, s
    return q


def thin_svd(b) -> SvdApprox:
    """Thin SVD of a wide (or square) block ``b``: ``b = W diag(s) V^T``."""
    b = as_dense(b, "B")
    if b.shape[0] > b.shape[1]:
        raise ValueError(f"thin_svd expects rows <= cols, got {b.shape}")
    try:
        w, s, vt = np.linalg.svd(b, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return SvdApprox(U=w, S=s, V=np.ascontiguousarray(vt.T))


def sym_eig(m) -> SymEig:
    """Symmetric eigendecomposition with eigenvalues in descending order."""
    m = as_dense(m, "M")
    if m.shape[0] != m.shape[1]:
        raise ValueError("sym_eig needs a square matrix")
    scale = np.linalg.norm(m)
    if np.linalg.norm(m - m.T) > _tol(1e-10, scale):
        raise ValueError("matrix is not symmetric")
    sym = 0.5 * (m + m.T)
    try:
        d, g = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return SymEig(values=d[::-1].copy(), vectors=np.ascontiguousarray(g[:, ::-1]))


def psd_sqrt(m):
    """The symmetric non-negative definite square root ``G diag(sqrt(d)) G^T``."""
    eig = sym_eig(m)
    d = eig.values
    spec = max(abs(d[0]), abs(d[-1]))
    if d[-1] < -_tol(1e-10, spec):
        raise NotPositiveSemiDefinite(f"smallest eigenvalue {d[-1]:.3e}")
    g = eig.vectors
    t = (g * np.sqrt(np.clip(d, 0.0, None))) @ g.T
    return 0.5 * (t + t.T)


def shifted_pinv(m, lam):
    """Moore-Penrose pseudo-inverse of ``lam*I - m`` for symmetric ``m``."""
    eig = sym_eig(m)
    shifted = lam - eig.values
    keep = np.abs(shifted) > 1e-10 * max(1.0, abs(lam))
    inv = np.zeros_like(shifted)
    inv[keep] = 1.0 / shifted[keep]
    g = eig.vectors
    p = (g * inv) @ g.T
    return 0.5 * (p + p.T)
