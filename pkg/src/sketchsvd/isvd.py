"""Integrated SVD from many Gaussian sketches."""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dense import SvdApprox, aslinearoperator
from .errors import MaxIterationsExceeded
from .sketch import SketchConfig, project_svd, sketch_basis, truncate
from .stiefel import KnTrace, ProjectorEnsemble, kn_integrate, select_initial

__all__ = ["IsvdResult", "isvd", "sketch_ensemble", "truncate", "worker_count"]


def worker_count():
    """Pool size from ``SKETCHSVD_THREADS``, else the machine's CPU count."""
    env = os.environ.get("SKETCHSVD_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"SKETCHSVD_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError("SKETCHSVD_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass
class IsvdResult:
    approx: SvdApprox
    qbar: np.ndarray
    trace: KnTrace
    per_sketch_traces: list
    # False when the KN loop hit max_iter; approx then uses the last iterate
    converged: bool = True


def sketch_ensemble(a, cfg: SketchConfig, workers=None):
    """Run sketches 0..N-1 and return ``(ensemble, singular_values)`` in index order."""
    a = aslinearoperator(a)
    workers = worker_count() if workers is None else workers
    indices = range(cfg.n_sketches)
    if workers <= 1 or cfg.n_sketches == 1:
        results = [sketch_basis(a, cfg, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: sketch_basis(a, cfg, i), indices))
    qs = [q for q, _ in results]
    sigmas = [s for _, s in results]
    return ProjectorEnsemble(qs), sigmas


def isvd(a, cfg: SketchConfig, workers=None, strict=False) -> IsvdResult:
    """Rank-k SVD from ``cfg.n_sketches`` integrated sketches.

    A KN loop that fails to converge still yields a result (flagged
    ``converged=False``) built from the last iterate, since that iterate is
    a valid orthonormal basis. With ``strict=True`` the pipeline instead
    raises :class:`MaxIterationsExceeded` whose ``result`` is that flagged
    ``IsvdResult``.
    """
    a = aslinearoperator(a)
    cfg.check_shape(a.rows, a.cols)
    ensemble, sigmas = sketch_ensemble(a, cfg, workers)
    q_ini = select_initial(ensemble, sigmas)
    converged = True
    try:
        qbar, trace = kn_integrate(ensemble, q_ini, tau=cfg.tau, tol=cfg.tol, max_iter=cfg.max_iter)
    except MaxIterationsExceeded as exc:
        qbar, trace, converged = exc.result, exc.trace, False

    full = project_svd(a, qbar)
    result = IsvdResult(
        approx=truncate(full, cfg.k),
        qbar=qbar,
        trace=trace,
        per_sketch_traces=[float(np.sum(s)) for s in sigmas],
        converged=converged,
    )
    if strict and not converged:
        raise MaxIterationsExceeded("KN integration did not converge", result=result, trace=trace)
    return result
