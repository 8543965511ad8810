"""Command-line entry point: ``sketchsvd {rsvd,isvd,bench,lambda-check,selftest}``.

Exit status is 0 on success, 1 on a usage error and 2 on a numerical
failure.
"""

import argparse
import sys

import numpy as np

from . import bench, selftest
from .dense import LinearOperator
from .errors import SketchSvdError
from .isvd import isvd
from .sketch import SketchConfig, rsvd
from .stats import estimate_lambda, rank_k_error, similarity
from .testmatrix import test_matrix

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_dense(path):
    """Read ``rows cols`` followed by row-major whitespace-separated values."""
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise UsageError(f"{path}: missing 'rows cols' header")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
        values = np.array([float(t) for t in tokens[2:]])
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if rows < 1 or cols < 1 or values.size != rows * cols:
        raise UsageError(f"{path}: expected {rows}x{cols} values, found {values.size}")
    if not np.all(np.isfinite(values)):
        raise UsageError(f"{path}: non-finite entries")
    return values.reshape(rows, cols)


def write_dense(path, a):
    a = np.atleast_2d(a)
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def _int_list(text):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_source(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--d", type=int, help="use the 2^d x 2^(d+1) Hadamard test matrix")
    src.add_argument("--input", help="dense matrix file ('rows cols' then row-major values)")
    p.add_argument("--k", type=int, default=10, help="target rank (default 10)")
    p.add_argument("--p", type=int, default=12, help="oversampling (default 12)")
    p.add_argument("--q", type=int, default=0, help="power exponent (default 0)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stabilize", action="store_true", help="re-orthonormalize inside power iterations")
    p.add_argument("--out", help="write PREFIX_U.txt, PREFIX_S.txt, PREFIX_V.txt")


def build_parser():
    parser = _Parser(prog="sketchsvd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rsvd", help="single-sketch randomized SVD")
    _add_source(p)

    p = sub.add_parser("isvd", help="integrated SVD from multiple sketches")
    _add_source(p)
    p.add_argument("--n-sketches", type=int, default=10)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=256)
    p.add_argument("--strict", action="store_true", help="exit 2 if the KN loop does not converge")

    p = sub.add_parser("bench", help="replicated experiments on Hadamard test matrices")
    p.add_argument("--config", help="flat 'key = value' file; command-line flags take precedence")
    p.add_argument("--d", type=_int_list)
    p.add_argument("--q", type=_int_list)
    p.add_argument("--n-list", type=_int_list)
    p.add_argument("--ell", type=_int_list)
    p.add_argument("--k", type=_int_list)
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--out", help="rows CSV")
    p.add_argument("--summary", help="summary CSV")
    p.add_argument("--similarity", help="per-vector similarity CSV")
    p.add_argument("--record-time", action="store_true",
                   help="fill wall_time_ms (makes the rows CSV non-reproducible)")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("lambda-check", help="estimate the projector-average spectrum of a diagonal matrix")
    p.add_argument("--diag", type=_float_list, default=[25.0, 5.0, 1.0, 0.2])
    p.add_argument("--ell", type=int, default=2)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--n-sketches", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("selftest", help="run the built-in oracle checks")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _load_operator(args):
    if args.d is not None:
        tm = test_matrix(args.d)
        return tm.operator, tm
    return LinearOperator.from_dense(read_dense(args.input)), None


def _config(args, **extra):
    return SketchConfig(k=args.k, p=args.p, q=args.q, seed=args.seed,
                        stabilize_power=args.stabilize, **extra)


def _report(approx, tm, out, prefix):
    out(f"singular_values: {' '.join(repr(float(s)) for s in approx.S)}")
    if tm is not None:
        truth = tm.truth(approx.rank)
        out(f"error_frobenius: {rank_k_error(truth, approx)!r}")
        out(f"similarity: {' '.join(repr(float(s)) for s in similarity(approx.U, truth.U))}")
    if prefix:
        write_dense(f"{prefix}_U.txt", approx.U)
        write_dense(f"{prefix}_S.txt", approx.S[None, :])
        write_dense(f"{prefix}_V.txt", approx.V)


def cmd_rsvd(args, out):
    a, tm = _load_operator(args)
    approx = rsvd(a, _config(args))
    _report(approx, tm, out, args.out)
    return EXIT_OK


def cmd_isvd(args, out):
    a, tm = _load_operator(args)
    cfg = _config(args, n_sketches=args.n_sketches, tau=args.tau, tol=args.tol, max_iter=args.max_iter)
    res = isvd(a, cfg)
    _report(res.approx, tm, out, args.out)
    out(f"kn_iterations: {res.trace.iterations}")
    out(f"kn_c_residual: {res.trace.final_c_residual!r}")
    out(f"converged: {str(res.converged).lower()}")
    if not res.converged:
        print("warning: KN integration hit --max-iter; result uses the last iterate", file=sys.stderr)
        if args.strict:
            return EXIT_NUMERIC
    return EXIT_OK


BENCH_DEFAULTS = {"q": [0], "n_list": [1, 10, 50, 100, 200], "ell": [22], "k": [10],
                  "replicates": 30, "seed": 0, "tau": 1.0, "tol": 1e-5, "max_iter": 256}
_BENCH_TYPES = {"d": _int_list, "q": _int_list, "n_list": _int_list, "ell": _int_list,
                "k": _int_list, "replicates": int, "seed": int, "tau": float, "tol": float,
                "max_iter": int, "out": str, "summary": str, "similarity": str}


def _bench_settings(args):
    settings = dict(BENCH_DEFAULTS)
    if args.config:
        try:
            raw = bench.read_config(args.config)
        except OSError as exc:
            raise UsageError(str(exc)) from None
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        for key, value in raw.items():
            if key not in _BENCH_TYPES:
                raise UsageError(f"{args.config}: unknown key {key!r}")
            try:
                settings[key] = _BENCH_TYPES[key](value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{args.config}: bad value for {key}: {exc}") from None
    for key in _BENCH_TYPES:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if not settings.get("d"):
        raise UsageError("bench needs --d (or 'd' in the config file)")
    if not settings.get("out"):
        raise UsageError("bench needs --out (or 'out' in the config file)")
    return settings


def cmd_bench(args, out):
    s = _bench_settings(args)
    progress = None
    if not args.quiet:
        def progress(row):
            print(f"d={row.d} q={row.q} N={row.n_sketches} ell={row.ell} rep={row.replicate} "
                  f"err={row.error_frobenius:.3e} {row.status}", file=sys.stderr)
    rows, summary = [], []
    for d in s["d"]:
        try:
            spec = bench.ExperimentSpec.grid(d, s["q"], s["n_list"], s["ell"], s["k"],
                                             replicates=s["replicates"], base_seed=s["seed"],
                                             tau=s["tau"], tol=s["tol"], max_iter=s["max_iter"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        r, summ = bench.run_experiment(spec, record_time=args.record_time, progress=progress)
        rows += r
        summary += summ
    bench.write_rows(s["out"], rows)
    if s.get("summary"):
        bench.write_summary(s["summary"], summary)
    if s.get("similarity"):
        bench.write_similarities(s["similarity"], rows)
    for row in summary:
        out(f"d={row.d} q={row.q} N={row.n_sketches} ell={row.ell} k={row.k} "
            f"mean={row.mean_error:.3e} std={row.std_error:.3e} failures={row.failures}")
    if any(r.status.startswith("error") for r in rows):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_lambda_check(args, out):
    diag = np.asarray(args.diag, dtype=np.float64)
    if diag.size < args.ell or args.ell < 1:
        raise UsageError("--ell must be between 1 and the number of diagonal entries")
    est = estimate_lambda(np.diag(diag), args.ell, args.q, args.n_sketches, args.seed)
    order = np.argsort(-np.abs(diag), kind="stable")
    out(f"lambda_hat: {' '.join(f'{v:.4f}' for v in est.lambda_hat)}")
    alignment = np.abs(est.u_hat[order, np.arange(diag.size)])
    out(f"alignment: {' '.join(f'{v:.4f}' for v in alignment)}")
    return EXIT_OK


def cmd_selftest(args, out):
    return EXIT_OK if selftest.run(args.seed, out) else EXIT_NUMERIC


COMMANDS = {"rsvd": cmd_rsvd, "isvd": cmd_isvd, "bench": cmd_bench,
            "lambda-check": cmd_lambda_check, "selftest": cmd_selftest}


def main(argv=None, out=print):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, ValueError, OSError) as exc:
        print(f"sketchsvd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SketchSvdError as exc:
        print(f"sketchsvd: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
