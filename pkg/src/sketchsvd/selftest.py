"""Independent numerical oracles, runnable from the command line.

Each check compares a library routine against a separately coded
reference (Gram-Schmidt, dense products, finite differences, dense
eigendecomposition) on small seeded random inputs.
"""

import numpy as np

from . import dense, sketch, stats, stiefel, testmatrix


def _gram_schmidt(y):
    q = np.zeros_like(y)
    for j in range(y.shape[1]):
        v = y[:, j].copy()
        for _ in range(2):
            for i in range(j):
                v -= (q[:, i] @ v) * q[:, i]
        q[:, j] = v / np.linalg.norm(v)
    return q


def _random_stiefel(rng, m, ell):
    return _gram_schmidt(rng.standard_normal((m, ell)))


def check_orthonormalize(rng):
    y = rng.standard_normal((20, 5))
    q = dense.orthonormalize(y)
    ref = _gram_schmidt(y)
    return max(np.linalg.norm(q @ q.T @ y - y) / np.linalg.norm(y),
               np.linalg.norm(q @ q.T - ref @ ref.T))


def check_thin_svd(rng):
    b = rng.standard_normal((5, 9))
    f = dense.thin_svd(b)
    return np.linalg.norm(f.to_dense() - b) / np.linalg.norm(b)


def check_sym_eig(rng):
    r = rng.standard_normal((8, 8))
    m = r + r.T
    e = dense.sym_eig(m)
    return np.linalg.norm((e.vectors * e.values) @ e.vectors.T - m) / np.linalg.norm(m)


def check_psd_sqrt(rng):
    r = rng.standard_normal((6, 6))
    m = r @ r.T
    t = dense.psd_sqrt(m)
    return np.linalg.norm(t @ t - m) / np.linalg.norm(m)


def check_shifted_pinv(rng):
    r = rng.standard_normal((6, 6))
    m = r + r.T
    shifted = 0.37 * np.eye(6) - m
    p = dense.shifted_pinv(m, 0.37)
    return np.linalg.norm(shifted @ p @ shifted - shifted) / np.linalg.norm(shifted)


def check_power_sketch(rng):
    a = rng.standard_normal((8, 12))
    omega = rng.standard_normal((12, 3))
    y = sketch.power_sketch(a, omega, 2)
    ref = a @ a.T @ a @ a.T @ a @ omega
    return np.linalg.norm(y - ref) / np.linalg.norm(ref)


def check_hadamard(rng):
    h = testmatrix.hadamard_operator(6).to_dense()
    return np.linalg.norm(h.T @ h - np.eye(64))


def check_test_matrix(rng):
    tm = testmatrix.test_matrix(4)
    h4 = testmatrix.hadamard_operator(4).to_dense()
    h5 = testmatrix.hadamard_operator(5).to_dense()
    s = np.zeros((16, 32))
    s[np.arange(16), np.arange(16)] = tm.sigma
    ref = h4 @ s @ h5.T
    x = rng.standard_normal((32, 10))
    return np.linalg.norm(tm.operator.apply(x) - ref @ x) / np.linalg.norm(ref @ x)


def _ensemble(rng, m, ell, n):
    return stiefel.ProjectorEnsemble([_random_stiefel(rng, m, ell) for _ in range(n)])


def check_apply_pbar(rng):
    e = _ensemble(rng, 12, 3, 5)
    pbar = sum(q @ q.T for q in e.members) / e.n
    x = rng.standard_normal((12, 3))
    return np.linalg.norm(stiefel.apply_pbar(e, x) - pbar @ x)


def check_average_lift(rng):
    e = _ensemble(rng, 15, 4, 6)
    q = _random_stiefel(rng, 15, 4)
    mean = sum(stiefel.lift(q, w) for w in e.members) / e.n
    return np.linalg.norm(stiefel.average_lift(e, q) - mean)


def check_retraction(rng):
    e = _ensemble(rng, 15, 4, 6)
    q = _random_stiefel(rng, 15, 4)
    x = stiefel.average_lift(e, q)
    c = stiefel.matrix_c(x)
    quartic = np.linalg.norm(c @ c @ c @ c - c @ c + x.T @ x)
    qp = stiefel.retract(q, x)
    return max(quartic, np.linalg.norm(stiefel.lift(q, qp) - x),
               np.linalg.norm(qp.T @ qp - np.eye(4)))


def check_gradient(rng):
    e = _ensemble(rng, 10, 3, 4)
    q = _random_stiefel(rng, 10, 3)
    v = rng.standard_normal((10, 3))
    v -= q @ (q.T @ v)
    v /= np.linalg.norm(v)
    eps = 1e-6
    fd = (stiefel.objective(e, stiefel.retract(q, eps * v)) - stiefel.objective(e, q)) / eps
    an = float(np.sum(stiefel.projected_gradient(e, q) * v))
    return abs(fd - an) / abs(an)


def check_kn_oracle(rng):
    a = np.diag(np.geomspace(1.0, 1e-2, 12)) @ _random_stiefel(rng, 12, 12)
    cfg = sketch.SketchConfig(k=3, n_sketches=8, seed=int(rng.integers(2**32)))
    qs = [sketch.sketch_basis(a, cfg, i) for i in range(cfg.n_sketches)]
    e = stiefel.ProjectorEnsemble([q for q, _ in qs])
    q0 = stiefel.select_initial(e, [s for _, s in qs])
    qbar, _ = stiefel.kn_integrate(e, q0, tol=1e-24, max_iter=20000)
    w, v = np.linalg.eigh(e.dense_pbar())
    top = v[:, -3:]
    return np.linalg.norm(qbar @ qbar.T - top @ top.T)


def check_rank_k_error(rng):
    def rand_svd():
        return dense.SvdApprox(_random_stiefel(rng, 16, 3), np.sort(rng.random(3))[::-1],
                               _random_stiefel(rng, 20, 3))
    a, b = rand_svd(), rand_svd()
    ref = np.linalg.norm(a.to_dense() - b.to_dense())
    return abs(stats.rank_k_error(a, b) - ref) / ref


CHECKS = [
    ("orthonormalize vs Gram-Schmidt", check_orthonormalize, 1e-9),
    ("thin_svd reconstruction", check_thin_svd, 1e-10),
    ("sym_eig reconstruction", check_sym_eig, 1e-10),
    ("psd_sqrt reconstruction", check_psd_sqrt, 1e-10),
    ("shifted_pinv Penrose identity", check_shifted_pinv, 1e-8),
    ("power_sketch vs dense product", check_power_sketch, 1e-9),
    ("Hadamard orthogonality", check_hadamard, 1e-12),
    ("test matrix vs dense product", check_test_matrix, 1e-12),
    ("apply_pbar vs dense average", check_apply_pbar, 1e-12),
    ("average_lift vs mean of lifts", check_average_lift, 1e-12),
    ("retraction identities", check_retraction, 1e-9),
    ("projected gradient vs finite difference", check_gradient, 1e-4),
    ("KN result vs dense eigenprojector", check_kn_oracle, 1e-6),
    ("rank-k error vs dense difference", check_rank_k_error, 1e-10),
]


def run(seed=0, out=print):
    """Run every check; returns True when all pass."""
    rng = np.random.default_rng(seed)
    ok = True
    for name, fn, tol in CHECKS:
        try:
            err = float(fn(rng))
            passed = err <= tol
            detail = f"{err:.2e} (tol {tol:.0e})"
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return ok
