"""Replicated rSVD/iSVD experiments on Hadamard test matrices, with CSV output."""

import csv
import hashlib
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import SketchSvdError
from .isvd import isvd, worker_count
from .sketch import SketchConfig, rsvd
from .stats import rank_k_error, similarity
from .testmatrix import TestMatrixSpec, test_matrix


@dataclass(frozen=True)
class Cell:
    q: int
    n_sketches: int
    ell: int
    k: int


@dataclass
class ExperimentSpec:
    matrix: TestMatrixSpec
    cells: list
    replicates: int = 30
    base_seed: int = 0
    tau: float = 1.0
    tol: float = 1e-5
    max_iter: int = 256

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.cells:
            raise ValueError("experiment grid is empty")

    @classmethod
    def grid(cls, d, qs, ns, ells=(22,), ks=(10,), **kwargs):
        cells = [Cell(q, n, ell, k) for q, n, ell, k in product(qs, ns, ells, ks)]
        return cls(matrix=TestMatrixSpec.standard(d), cells=cells, **kwargs)


ROW_FIELDS = ("d", "q", "N", "ell", "k", "replicate", "error_frobenius")


@dataclass
class ExperimentRow:
    d: int
    q: int
    n_sketches: int
    ell: int
    k: int
    replicate: int
    error_frobenius: float
    similarities: tuple
    kn_iterations: int
    wall_time_ms: float = None
    status: str = "ok"


@dataclass
class SummaryRow:
    d: int
    q: int
    n_sketches: int
    ell: int
    k: int
    replicates: int
    mean_error: float
    std_error: float
    mean_kn_iterations: float
    failures: int
    extra: dict = field(default_factory=dict)


def cell_seed(base_seed, d, cell: Cell, replicate):
    """64-bit seed for one (cell, replicate): base seed XOR a keyed hash."""
    key = f"{d}|{cell.q}|{cell.n_sketches}|{cell.ell}|{cell.k}|{replicate}".encode()
    h = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
    return (int(base_seed) ^ h) & (2**64 - 1)


def run_one(tm, spec: ExperimentSpec, cell: Cell, replicate, record_time=False, on_result=None):
    seed = cell_seed(spec.base_seed, tm.d, cell, replicate)
    cfg = SketchConfig(
        k=cell.k,
        p=cell.ell - cell.k,
        q=cell.q,
        n_sketches=cell.n_sketches,
        tau=spec.tau,
        tol=spec.tol,
        max_iter=spec.max_iter,
        seed=seed,
    )
    start = time.perf_counter()
    status = "ok"
    try:
        if cell.n_sketches == 1:
            approx, iterations, qbar = rsvd(tm.operator, cfg), 0, None
        else:
            res = isvd(tm.operator, cfg, workers=1)
            approx, iterations, qbar = res.approx, res.trace.iterations, res.qbar
            if not res.converged:
                status = "not_converged"
    except (SketchSvdError, ValueError) as exc:
        return ExperimentRow(
            tm.d, cell.q, cell.n_sketches, cell.ell, cell.k, replicate,
            math.nan, (), 0, None, f"error: {type(exc).__name__}: {exc}",
        )
    elapsed = (time.perf_counter() - start) * 1e3
    truth = tm.truth(cell.k)
    if on_result is not None:
        on_result(cell, replicate, approx, qbar)
    return ExperimentRow(
        d=tm.d,
        q=cell.q,
        n_sketches=cell.n_sketches,
        ell=cell.ell,
        k=cell.k,
        replicate=replicate,
        error_frobenius=rank_k_error(truth, approx),
        similarities=tuple(float(s) for s in similarity(approx.U, truth.U)),
        kn_iterations=iterations,
        wall_time_ms=elapsed if record_time else None,
        status=status,
    )


def summarize(rows):
    """Mean and sample standard deviation of the error per grid cell, in first-seen order."""
    groups = {}
    for row in rows:
        key = (row.d, row.q, row.n_sketches, row.ell, row.k)
        groups.setdefault(key, []).append(row)
    out = []
    for (d, q, n, ell, k), group in groups.items():
        errs = np.array([r.error_frobenius for r in group if not r.status.startswith("error")])
        failures = sum(r.status != "ok" for r in group)
        mean = float(np.mean(errs)) if errs.size else math.nan
        std = float(np.std(errs, ddof=1)) if errs.size > 1 else math.nan
        iters = float(np.mean([r.kn_iterations for r in group]))
        out.append(SummaryRow(d, q, n, ell, k, len(group), mean, std, iters, failures))
    return out


def run_experiment(spec: ExperimentSpec, workers=None, record_time=False, on_result=None, progress=None):
    """Run every (cell, replicate) pair; returns ``(rows, summary)``.

    Rows come back in (cell, replicate) order no matter how many workers
    run them. A failing task is recorded in its row and the run goes on.
    """
    tm = test_matrix(spec.matrix)
    tasks = [(cell, r) for cell in spec.cells for r in range(spec.replicates)]
    workers = worker_count() if workers is None else workers

    def task(item):
        row = run_one(tm, spec, item[0], item[1], record_time, on_result)
        if progress is not None:
            progress(row)
        return row

    if workers <= 1:
        rows = [task(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(task, tasks))
    return rows, summarize(rows)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def _parse_float(text):
    return None if text == "" else float(text)


def write_rows(path, rows):
    width = max((len(r.similarities) for r in rows), default=0)
    header = list(ROW_FIELDS) + [f"sim_{j + 1}" for j in range(width)]
    header += ["kn_iterations", "wall_time_ms", "status"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            sims = [_fmt(s) for s in r.similarities] + [""] * (width - len(r.similarities))
            w.writerow(
                [r.d, r.q, r.n_sketches, r.ell, r.k, r.replicate, _fmt(r.error_frobenius)]
                + sims
                + [r.kn_iterations, _fmt(r.wall_time_ms), r.status]
            )


def read_rows(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            sims = []
            j = 1
            while f"sim_{j}" in rec:
                if rec[f"sim_{j}"] != "":
                    sims.append(float(rec[f"sim_{j}"]))
                j += 1
            err = _parse_float(rec["error_frobenius"])
            rows.append(
                ExperimentRow(
                    d=int(rec["d"]),
                    q=int(rec["q"]),
                    n_sketches=int(rec["N"]),
                    ell=int(rec["ell"]),
                    k=int(rec["k"]),
                    replicate=int(rec["replicate"]),
                    error_frobenius=math.nan if err is None else err,
                    similarities=tuple(sims),
                    kn_iterations=int(rec["kn_iterations"]),
                    wall_time_ms=_parse_float(rec["wall_time_ms"]),
                    status=rec["status"],
                )
            )
    return rows


SUMMARY_HEADER = ["d", "q", "N", "ell", "k", "replicates", "mean_error", "std_error",
                  "mean_kn_iterations", "failures"]


def write_summary(path, summary):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for s in summary:
            w.writerow([s.d, s.q, s.n_sketches, s.ell, s.k, s.replicates, _fmt(s.mean_error),
                        _fmt(s.std_error), _fmt(s.mean_kn_iterations), s.failures])


def write_similarities(path, rows):
    """Long-format per-vector similarities: d,q,N,replicate,j,similarity (j is 1-based)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "q", "N", "replicate", "j", "similarity"])
        for r in rows:
            for j, s in enumerate(r.similarities, start=1):
                w.writerow([r.d, r.q, r.n_sketches, r.replicate, j, _fmt(s)])


def read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out
