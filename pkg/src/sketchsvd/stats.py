"""Empirical checks of the statistical behaviour of sketched projectors.

Dense m x m (and m^2 x m^2) objects are allowed here, always behind
explicit size guards.
"""

from dataclasses import dataclass

import numpy as np

from .dense import SvdApprox, aslinearoperator, shifted_pinv, sym_eig
from .errors import DimensionTooLarge
from .isvd import sketch_ensemble
from .sketch import SketchConfig

MAX_LAMBDA_DIM = 4096
MAX_CLT_DIM = 64


@dataclass(frozen=True)
class LambdaEstimate:
    """Eigendecomposition of an average of sketch projectors."""

    u_hat: np.ndarray
    lambda_hat: np.ndarray

    def matrix(self):
        return (self.u_hat * self.lambda_hat) @ self.u_hat.T


@dataclass(frozen=True)
class CltEstimate:
    j: int
    delta_j: np.ndarray
    t1_hat: np.ndarray
    t2_hat: np.ndarray


def _lambda_config(ell, q, n, seed):
    return SketchConfig(k=ell, p=0, q=q, n_sketches=n, seed=seed)


def projector_ensemble(a, ell, q, n, seed, workers=None):
    a = aslinearoperator(a)
    ensemble, _ = sketch_ensemble(a, _lambda_config(ell, q, n, seed), workers)
    return ensemble


def estimate_lambda(a, ell, q, n, seed, workers=None) -> LambdaEstimate:
    """Eigenpairs of the average of ``n`` sketch projectors of ``a``."""
    a = aslinearoperator(a)
    if a.rows > MAX_LAMBDA_DIM:
        raise DimensionTooLarge(f"m={a.rows} exceeds {MAX_LAMBDA_DIM}")
    pbar = projector_ensemble(a, ell, q, n, seed, workers).dense_pbar()
    eig = sym_eig(pbar)
    return LambdaEstimate(u_hat=eig.vectors, lambda_hat=eig.values)


def projector_samples(a, ell, q, n, seed, workers=None):
    """Rows are vec(Q_i Q_i^T) (column-major vec) for sketches 0..n-1."""
    a = aslinearoperator(a)
    if a.rows > MAX_CLT_DIM:
        raise DimensionTooLarge(f"m={a.rows} exceeds {MAX_CLT_DIM}")
    ensemble = projector_ensemble(a, ell, q, n, seed, workers)
    return np.stack([(qi @ qi.T).ravel(order="F") for qi in ensemble.members])


def align_signs(u_hat, u_ref):
    """Flip columns of ``u_hat`` so that each has a non-negative inner product with ``u_ref``."""
    signs = np.where(np.sum(u_hat * u_ref, axis=0) < 0, -1.0, 1.0)
    return u_hat * signs


def similarity(u_hat, u_true):
    """``|u_hat_j^T u_j|`` for each column pair."""
    u_hat = np.asarray(u_hat, dtype=np.float64)
    u_true = np.asarray(u_true, dtype=np.float64)
    if u_hat.shape != u_true.shape:
        raise ValueError(f"shape mismatch {u_hat.shape} vs {u_true.shape}")
    return np.minimum(np.abs(np.sum(u_hat * u_true, axis=0)), 1.0)


def low_rank_difference_norms(first: SvdApprox, second: SvdApprox):
    """Frobenius and spectral norms of ``U1 S1 V1^T - U2 S2 V2^T``.

    Both factors are stacked and reduced by thin QR, so only a
    (r1+r2)-square core is ever formed.
    """
    if first.U.shape[0] != second.U.shape[0] or first.V.shape[0] != second.V.shape[0]:
        raise ValueError("factorizations have different shapes")
    _, ru = np.linalg.qr(np.hstack([first.U, second.U]))
    _, rv = np.linalg.qr(np.hstack([first.V, second.V]))
    core = (ru * np.concatenate([first.S, -second.S])) @ rv.T
    s = np.linalg.svd(core, compute_uv=False)
    return float(np.linalg.norm(s)), float(s[0])


def rank_k_error(true_svd: SvdApprox, approx: SvdApprox, which_norm="frobenius"):
    fro, spec = low_rank_difference_norms(true_svd, approx)
    if which_norm == "frobenius":
        return fro
    if which_norm == "spectral":
        return spec
    raise ValueError(f"unknown norm {which_norm!r}")


def residual_decomposition(a, sigma, qbar):
    """Split ``||Q Q^T A - A||_F^2`` into the optimal tail and the excess.

    The tail is the energy beyond the basis dimension l, i.e.
    ``sum_{j > l} sigma_j^2``, which is what any rank-l basis must leave
    behind.
    """
    a = aslinearoperator(a)
    sigma = np.sort(np.asarray(sigma, dtype=np.float64))[::-1]
    ell = qbar.shape[1]
    captured = float(np.sum(a.apply_transpose(qbar) ** 2))
    residual_sq = max(float(np.sum(sigma**2)) - captured, 0.0)
    tail_sq = float(np.sum(sigma[ell:] ** 2))
    return residual_sq, tail_sq, residual_sq - tail_sq


def delta_matrix(m_pop, lam, u):
    """Derivative of an eigenvector w.r.t. vec(M): ``u^T kron (lam I - M)^+``."""
    return np.kron(np.asarray(u)[None, :], shifted_pinv(m_pop, lam))


def clt_covariance(truth: LambdaEstimate, samples, j) -> CltEstimate:
    """Delta-method covariance for eigenvector ``j`` (0-based) of the projector mean.

    ``samples`` holds one vec(Q_i Q_i^T) per row; its empirical covariance
    is propagated through the eigenvector derivative at ``truth``.
    """
    m = truth.u_hat.shape[0]
    if m > MAX_CLT_DIM:
        raise DimensionTooLarge(f"m={m} exceeds {MAX_CLT_DIM}")
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != m * m or samples.shape[0] < 2:
        raise ValueError("samples must be an (N >= 2, m^2) array")
    t1 = np.cov(samples, rowvar=False)
    t1 = 0.5 * (t1 + t1.T)
    delta = delta_matrix(truth.matrix(), truth.lambda_hat[j], truth.u_hat[:, j])
    t2 = delta @ t1 @ delta.T
    return CltEstimate(j=j, delta_j=delta, t1_hat=t1, t2_hat=0.5 * (t2 + t2.T))


def loglog_slope(x, y):
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])
