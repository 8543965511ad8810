"""Hadamard-based test matrices with a known SVD."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dense import LinearOperator, SvdApprox
from .errors import DimensionTooLarge

MAX_HADAMARD_LOG2 = 26
SPECTRUM_BASE = 0.001


def fwht(x, normalized=True):
    """Walsh-Hadamard transform (Sylvester ordering) of each column of ``x``.

    ``x`` has 2^d rows; the transform runs in O(2^d d) per column. With
    ``normalized`` the result is scaled by 2^(-d/2), making the transform
    orthogonal and its own inverse.
    """
    x = np.asarray(x, dtype=np.float64)
    vector = x.ndim == 1
    y = np.array(x[:, None] if vector else x, dtype=np.float64, order="C")
    n, t = y.shape
    if n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    h = 1
    while h < n:
        v = y.reshape(n // (2 * h), 2, h, t)
        top = v[:, 0]
        bottom = v[:, 1]
        diff = top - bottom
        top += bottom
        bottom[...] = diff
        h *= 2
    if normalized:
        y *= 1.0 / np.sqrt(n)
    return y[:, 0] if vector else y


def hadamard_operator(d, normalized=True):
    """The 2^d x 2^d Sylvester-Hadamard matrix as a (symmetric) operator."""
    if d < 0:
        raise ValueError("d must be >= 0")
    if d > MAX_HADAMARD_LOG2:
        raise DimensionTooLarge(f"d={d} exceeds the supported maximum {MAX_HADAMARD_LOG2}")
    n = 2**d
    apply = lambda x: fwht(x, normalized)  # noqa: E731
    return LinearOperator(n, n, apply, apply)


def build_sigma(d, k=10, base=SPECTRUM_BASE):
    """Singular values of the 2^d x 2^(d+1) test matrix.

    Odd j < k: ``base ** (floor(j/2) / (k/2))``; even j <= k: 1.5 times the
    next value; j = k+1: ``base``; then a linear ramp down to zero at j = m.
    With the default k = 10 and base = 0.001 the odd values are 1,
    0.001^(1/5), ..., 0.001 and the sequence is strictly decreasing
    through j = 11.
    """
    if k < 2 or k % 2:
        raise ValueError("k must be a positive even number")
    m = 2**d
    if m < k + 2:
        raise ValueError(f"2^d must be at least {k + 2}")
    half = k // 2
    sigma = np.empty(m)
    for j in range(1, k, 2):
        sigma[j - 1] = base ** ((j // 2) / half)
    sigma[k] = base
    for j in range(2, k + 1, 2):
        sigma[j - 1] = 1.5 * sigma[j]
    j = np.arange(k + 2, m + 1)
    sigma[k + 1:] = base * (m - j) / (m - (k + 1))
    return sigma


@dataclass(frozen=True)
class TestMatrixSpec:
    """``A = H_d diag(sigma) H_{d+1}^T`` of shape 2^d x 2^(d+1)."""

    __test__ = False  # not a pytest class

    d: int
    sigma: np.ndarray

    @classmethod
    def standard(cls, d):
        return cls(d=d, sigma=build_sigma(d))

    def __post_init__(self):
        m = 2**self.d
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if sigma.shape != (m,):
            raise ValueError(f"sigma must have length {m}")
        if np.any(sigma < 0):
            raise ValueError("singular values must be non-negative")
        object.__setattr__(self, "sigma", sigma)


class TestMatrix:
    """Fast operator for a :class:`TestMatrixSpec` plus its exact SVD."""

    __test__ = False

    def __init__(self, spec: TestMatrixSpec):
        self.spec = spec
        self.d = spec.d
        self.sigma = spec.sigma
        self.m = 2**spec.d
        self.n = 2 ** (spec.d + 1)
        if spec.d + 1 > MAX_HADAMARD_LOG2:
            raise DimensionTooLarge(f"d={spec.d} too large")
        self.operator = LinearOperator(self.m, self.n, self._apply, self._apply_t)

    def _apply(self, x):
        z = fwht(x)[: self.m]
        z *= self.sigma[:, None]
        return fwht(z)

    def _apply_t(self, y):
        z = np.zeros((self.n, y.shape[1]))
        z[: self.m] = fwht(y) * self.sigma[:, None]
        return fwht(z)

    @property
    def frobenius_sq(self):
        return float(np.sum(self.sigma**2))

    def left_vectors(self, k):
        e = np.zeros((self.m, k))
        e[np.arange(k), np.arange(k)] = 1.0
        return fwht(e)

    def right_vectors(self, k):
        e = np.zeros((self.n, k))
        e[np.arange(k), np.arange(k)] = 1.0
        return fwht(e)

    def true_svd(self, k) -> SvdApprox:
        return SvdApprox(U=self.left_vectors(k), S=self.sigma[:k].copy(), V=self.right_vectors(k))

    @cached_property
    def _truth10(self):
        return self.true_svd(min(10, self.m))

    def truth(self, k):
        if k <= self._truth10.rank:
            t = self._truth10
            return SvdApprox(U=t.U[:, :k], S=t.S[:k], V=t.V[:, :k])
        return self.true_svd(k)


def test_matrix(spec):
    """Build the operator and ground truth for ``spec`` (or an integer d)."""
    if isinstance(spec, int):
        spec = TestMatrixSpec.standard(spec)
    return TestMatrix(spec)


test_matrix.__test__ = False
