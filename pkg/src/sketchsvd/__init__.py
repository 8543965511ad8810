"""Randomized SVD from one sketch (rSVD) or many integrated sketches (iSVD).

Multiple Gaussian sketches are merged by a Kolmogorov-Nagumo average on
the Stiefel manifold; see :func:`isvd`.
"""

from .dense import (
    LinearOperator,
    SvdApprox,
    SymEig,
    aslinearoperator,
    orthonormalize,
    psd_sqrt,
    shifted_pinv,
    sym_eig,
    thin_svd,
)
from .errors import (
    ConvergenceFailure,
    DimensionTooLarge,
    MaxIterationsExceeded,
    NotPositiveSemiDefinite,
    RankDeficient,
    SketchSvdError,
)
from .isvd import IsvdResult, isvd
from .sketch import SketchConfig, gaussian_matrix, power_sketch, rsvd, sketch_basis, truncate
from .stiefel import KnTrace, ProjectorEnsemble, kn_integrate
from .testmatrix import TestMatrixSpec, build_sigma, hadamard_operator, test_matrix

__all__ = [
    "ConvergenceFailure", "DimensionTooLarge", "IsvdResult", "KnTrace", "LinearOperator",
    "MaxIterationsExceeded", "NotPositiveSemiDefinite", "ProjectorEnsemble", "RankDeficient",
    "SketchConfig", "SketchSvdError", "SvdApprox", "SymEig", "TestMatrixSpec", "aslinearoperator",
    "build_sigma", "gaussian_matrix", "hadamard_operator", "isvd", "kn_integrate",
    "orthonormalize", "power_sketch", "psd_sqrt", "rsvd", "shifted_pinv", "sketch_basis",
    "sym_eig", "test_matrix", "thin_svd", "truncate",
]
