"""Stiefel-manifold averaging of sketched subspaces.

Points on the Stiefel manifold St(m, l) and tangent vectors are plain
m x l arrays. The ensemble average of projectors ``P = mean_i Q_i Q_i^T``
is applied to thin blocks through the stacked members; it is formed
only when the members have more columns in total than rows, where no
cheaper exact representation exists.
"""

from dataclasses import dataclass, field

import numpy as np

from .dense import ABS_FLOOR, as_dense, sym_eig
from .errors import ConvergenceFailure, MaxIterationsExceeded, NotPositiveSemiDefinite

ORTHO_TOL = 1e-10


def check_stiefel(q, tol=ORTHO_TOL):
    """Raise ``ValueError`` unless ``q`` has orthonormal columns to ``tol``."""
    q = as_dense(q, "Q")
    if q.shape[1] > q.shape[0]:
        raise ValueError(f"Stiefel point must be tall, got {q.shape}")
    err = np.linalg.norm(q.T @ q - np.eye(q.shape[1]))
    if err >= tol:
        raise ValueError(f"columns not orthonormal (||Q^T Q - I||_F = {err:.2e})")
    return q


class ProjectorEnsemble:
    """N orthonormal bases Q_i of a common shape (m, l)."""

    def __init__(self, members):
        members = [np.asarray(q, dtype=np.float64) for q in members]
        if not members:
            raise ValueError("ensemble needs at least one member")
        shape = members[0].shape
        for q in members:
            if q.shape != shape:
                raise ValueError(f"member shape {q.shape} differs from {shape}")
            check_stiefel(q)
        self.m, self.ell = shape
        self.n = len(members)
        # members side by side: P = S S^T / N
        self._stacked = np.ascontiguousarray(np.hstack(members))
        self._stacked.flags.writeable = False
        # With more stacked columns than rows, P has no low-rank form and any
        # exact representation costs m^2 storage; holding P itself then makes
        # each product a single m x m by m x t multiply.
        self._dense = None
        self._reduced = None
        if self._stacked.shape[1] > self.m:
            self._dense = self._stacked @ self._stacked.T / self.n
            self._dense = 0.5 * (self._dense + self._dense.T)
            self._dense.flags.writeable = False

    def __len__(self):
        return self.n

    def member(self, i):
        return self._stacked[:, i * self.ell:(i + 1) * self.ell]

    @property
    def members(self):
        return [self.member(i) for i in range(self.n)]

    @property
    def stacked(self):
        return self._stacked

    def reduced(self):
        """``(B, M)`` with ``P = B M B^T`` and B an orthonormal basis of the members' span.

        Only built when the members have fewer columns in total than rows;
        returns ``(None, None)`` otherwise. Computed once and cached.
        """
        if self._dense is not None or self.n == 1:
            return None, None
        if self._reduced is None:
            b, r = np.linalg.qr(self._stacked)
            m_small = r @ r.T / self.n
            self._reduced = (b, 0.5 * (m_small + m_small.T))
        return self._reduced

    def dense_pbar(self):
        """Materialized m x m average projector (small m, tests and stats only)."""
        if self._dense is not None:
            return self._dense.copy()
        return self._stacked @ self._stacked.T / self.n


def apply_pbar(ensemble: ProjectorEnsemble, x):
    """``P x`` for the ensemble's average projector, in O(min(N l, m) m t)."""
    if ensemble._dense is not None:
        return ensemble._dense @ x
    s = ensemble.stacked
    return s @ (s.T @ x) / ensemble.n


def objective(ensemble, q):
    """``F(Q) = tr(Q^T P Q) / 2``."""
    return 0.5 * float(np.sum(q * apply_pbar(ensemble, q)))


def euclidean_gradient(ensemble, q):
    return apply_pbar(ensemble, q)


def projected_gradient(ensemble, q):
    """``(I - Q Q^T) P Q``, the gradient of F projected onto the tangent space."""
    g = apply_pbar(ensemble, q)
    return g - q @ (q.T @ g)


def lift(q_c, w):
    """Lift ``w`` to the tangent space at ``q_c``: ``(I - Q Q^T) W W^T Q``."""
    x = w @ (w.T @ q_c)
    return x - q_c @ (q_c.T @ x)


def average_lift(ensemble, q_c):
    """Mean of the lifted members; identical to the projected gradient."""
    return projected_gradient(ensemble, q_c)


@dataclass(frozen=True)
class _CFactor:
    vectors: np.ndarray
    c: np.ndarray
    c_minus_one: np.ndarray

    def matrix(self):
        return (self.vectors * self.c) @ self.vectors.T

    def inverse(self):
        return (self.vectors / self.c) @ self.vectors.T

    def residual(self):
        """``||C - I||_F``, accurate even when C is within roundoff of I."""
        return float(np.linalg.norm(self.c_minus_one))


def _c_factor(x, tau):
    # C = {I/2 + (I/4 - tau^2 X^T X)^(1/2)}^(1/2): every root shares the
    # eigenbasis of X^T X, so one eigendecomposition gives all of them.
    xtx = (tau * tau) * (x.T @ x)
    eig = sym_eig(0.5 * (xtx + xtx.T))
    e = eig.values
    slack = max(1e-10 * 0.25, ABS_FLOOR)
    if e[0] > 0.25 + slack:
        raise NotPositiveSemiDefinite(
            f"I/4 - tau^2 X^T X has eigenvalue {0.25 - e[0]:.3e}; X is not a valid lifted vector"
        )
    e = np.clip(e, 0.0, 0.25)
    s = np.sqrt(0.25 - e)
    c = np.sqrt(0.5 + s)
    # c - 1 without cancellation: c^2 - 1 = s - 1/2 = -e / (1/2 + s)
    c_minus_one = (-e / (0.5 + s)) / (c + 1.0)
    return _CFactor(vectors=eig.vectors, c=c, c_minus_one=c_minus_one)


def matrix_c(x, tau=1.0):
    """Symmetric positive definite C with ``C^4 - C^2 + tau^2 X^T X = 0``."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    return _c_factor(np.asarray(x, dtype=np.float64), tau).matrix()


def _retract(q_c, x, tau):
    cf = _c_factor(x, tau)
    q_plus = q_c @ cf.matrix() + (tau * x) @ cf.inverse()
    return q_plus, cf.residual()


def retract(q_c, x, tau=1.0):
    """Map tangent vector ``tau X`` at ``q_c`` back to the manifold: ``Q C + tau X C^-1``."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    q_plus, _ = _retract(np.asarray(q_c, dtype=np.float64), np.asarray(x, dtype=np.float64), tau)
    return q_plus


def select_initial(ensemble, sigmas):
    """Member with the largest sum of sketch singular values (first one on ties)."""
    if len(sigmas) != ensemble.n:
        raise ValueError("need one singular-value vector per member")
    traces = [float(np.sum(s)) for s in sigmas]
    best = int(np.argmax(traces))
    return ensemble.member(best).copy()


@dataclass
class KnTrace:
    iterations: int = 0
    final_c_residual: float = float("inf")
    objective_history: list = field(default_factory=list)
    converged: bool = False


def kn_integrate(ensemble, q_ini, tau=1.0, tol=1e-5, max_iter=256):
    """Kolmogorov-Nagumo integration of the ensemble into one basis.

    Repeats ``Q <- retract(Q, average_lift(E, Q), tau)`` until
    ``||C - I||_F < tol``. Returns ``(Q_bar, trace)``; on hitting
    ``max_iter`` raises :class:`MaxIterationsExceeded` carrying the last
    iterate and the trace.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    q_c = check_stiefel(np.array(q_ini, dtype=np.float64))
    if q_c.shape != (ensemble.m, ensemble.ell):
        raise ValueError(f"initial iterate shape {q_c.shape} does not match ensemble")
    single = ensemble.n == 1 and np.array_equal(q_c, ensemble.member(0))

    # Every iterate stays in the members' span when the start does, so the
    # loop can run in coordinates of an orthonormal basis B of that span:
    # Q = B Z and P = B M B^T with M of size min(N l, m).
    basis, m_small = (None, None) if single else ensemble.reduced()
    if basis is not None:
        z = basis.T @ q_c
        if np.linalg.norm(basis @ z - q_c) > ORTHO_TOL:
            basis = None
    if basis is None:
        z = q_c
        pbar = lambda v: apply_pbar(ensemble, v)  # noqa: E731
    else:
        pbar = lambda v: m_small @ v  # noqa: E731

    trace = KnTrace()
    for it in range(1, max_iter + 1):
        g = pbar(z)
        trace.objective_history.append(0.5 * float(np.sum(z * g)))
        if single:
            # P = Q Q^T and Q is its own maximizer; the gradient is exactly zero
            x = np.zeros_like(z)
        else:
            x = g - z @ (z.T @ g)
        z, res = _retract(z, x, tau)
        err = np.linalg.norm(z.T @ z - np.eye(ensemble.ell))
        if err >= ORTHO_TOL:
            raise ConvergenceFailure(f"retraction lost orthonormality ({err:.2e})")
        trace.iterations = it
        trace.final_c_residual = res
        if res < tol:
            trace.converged = True
            break
    if basis is not None:
        q_c = basis @ z
        err = np.linalg.norm(q_c.T @ q_c - np.eye(ensemble.ell))
        if err >= ORTHO_TOL:
            raise ConvergenceFailure(f"lost orthonormality mapping back from the span ({err:.2e})")
    else:
        q_c = z
    trace.objective_history.append(objective(ensemble, q_c))
    if not trace.converged:
        raise MaxIterationsExceeded(
            f"KN integration did not reach ||C - I|| < {tol:g} in {max_iter} iterations",
            result=q_c,
            trace=trace,
        )
    return q_c, trace
