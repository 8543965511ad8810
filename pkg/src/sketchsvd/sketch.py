"""Gaussian sketching and the single-sketch randomized SVD."""

from dataclasses import dataclass, replace

import numpy as np

from .dense import SvdApprox, aslinearoperator, orthonormalize, thin_svd


@dataclass(frozen=True)
class SketchConfig:
    """Run parameters shared by rSVD, iSVD and the KN integration.

    ``ell = k + p`` is the sketch dimension. ``n_sketches`` is ignored by
    :func:`rsvd`.
    """

    k: int
    p: int = 0
    q: int = 0
    n_sketches: int = 1
    tau: float = 1.0
    tol: float = 1e-5
    max_iter: int = 256
    seed: int = 0
    stabilize_power: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.p < 0:
            raise ValueError("p must be >= 0")
        if self.q < 0:
            raise ValueError("q must be >= 0")
        if self.n_sketches < 1:
            raise ValueError("n_sketches must be >= 1")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def ell(self):
        return self.k + self.p

    def check_shape(self, m, n):
        if self.ell > m or self.ell > n:
            raise ValueError(f"sketch dimension {self.ell} exceeds matrix shape {(m, n)}")

    def with_(self, **changes):
        return replace(self, **changes)


def sketch_stream(seed, index):
    """Independent Philox stream for sketch ``index`` under ``seed``.

    Streams are addressed by (seed, index) through numpy's SeedSequence
    spawn keys, so sketch i never depends on how many other sketches were
    drawn or in which order.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def gaussian_matrix(n, ell, stream):
    """n x ell matrix of i.i.d. standard normals (numpy's ziggurat sampler)."""
    return stream.standard_normal((n, ell))


def power_sketch(a, omega, q, stabilize=False):
    """``(A A^T)^q A omega``, optionally re-orthonormalizing after each product."""
    a = aslinearoperator(a)
    y = a.apply(omega)
    if stabilize:
        y = orthonormalize(y)
    for _ in range(q):
        z = a.apply_transpose(y)
        if stabilize:
            z = orthonormalize(z)
        y = a.apply(z)
        if stabilize:
            y = orthonormalize(y)
    return y


def sketch_basis(a, cfg: SketchConfig, index):
    """Orthonormal basis Q_i of sketch ``index`` and the singular values of Y_i."""
    a = aslinearoperator(a)
    cfg.check_shape(a.rows, a.cols)
    omega = gaussian_matrix(a.cols, cfg.ell, sketch_stream(cfg.seed, index))
    y = power_sketch(a, omega, cfg.q, cfg.stabilize_power)
    return orthonormalize(y, return_singular_values=True)


def truncate(approx: SvdApprox, k) -> SvdApprox:
    """Keep the leading ``k`` singular triples."""
    if not 1 <= k <= approx.rank:
        raise ValueError(f"cannot truncate rank {approx.rank} to {k}")
    return SvdApprox(U=approx.U[:, :k], S=approx.S[:k], V=approx.V[:, :k])


def project_svd(a, basis):
    """SVD of ``basis basis^T A`` via the small SVD of ``basis^T A``.

    ``basis^T A`` is formed as ``(A^T basis)^T`` so only operator products
    are needed.
    """
    a = aslinearoperator(a)
    b = a.apply_transpose(basis).T
    small = thin_svd(b)
    return SvdApprox(U=basis @ small.U, S=small.S, V=small.V)


def rsvd(a, cfg: SketchConfig) -> SvdApprox:
    """Rank-k randomized SVD from a single Gaussian sketch (sketch index 0)."""
    q, _ = sketch_basis(a, cfg, 0)
    return truncate(project_svd(a, q), cfg.k)
