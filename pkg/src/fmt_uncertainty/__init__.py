"""Free metaplectic transforms on sampled signals and uncertainty bounds between their domains."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateParameter,
    DiagonalRequired,
    DimensionMismatch,
    DimensionOdd,
    FmtError,
    GridTooSmall,
    MismatchBeyondTolerance,
    NotCentered,
    NotSymplectic,
    NyquistViolated,
    ShapeRequired,
    SignalLoadError,
    SingularB,
    TooLarge,
    ZeroSignal,
)
from .symplectic import (
    FreeSympMatrix,
    SympMatrix,
    compose,
    free_from_generating,
    inverse,
    make_free,
    matrix_from_spec,
    random_free,
    standard_j,
    special_matrix,
    validate_symplectic,
)
from .grid import (
    GaussianChirp,
    Grid,
    SampledSignal,
    gradient,
    lp_norm,
    normalize,
    polar_decompose,
    recenter,
    sample_gaussian_chirp,
    weighted_lp,
)
from .transform import fmt_apply, fmt_direct, fmt_gradient, fourier_samples, plan_fmt, wigner, wigner_moments
from .moments import (
    MomentSummary,
    analytic_gaussian_moments,
    compute_moments,
    second_moment_fmt,
    second_moment_identity,
    sigma_via_wigner,
)
from .bounds import (
    bound_componentwise,
    bound_extra_strong_diag,
    bound_extra_strong_scalar,
    bound_lp_time_fmt,
    bound_lp_two_fmt,
    bound_lq_time_fmt,
    bound_mo_component,
    bound_mo_trace,
    bound_ordering_check,
    bound_time_fmt,
    bound_trace,
    is_diagonal_pair,
    integral_identity_check,
    lp_time_fmt,
    lp_two_fmt,
    lq_time_fmt,
    robertson_schrodinger_check,
    sign_matrix_scalars,
    singular_value_comparison,
)
from .battery import BoundReport, MatrixPair, run_battery, verify_signal
from .estimators import FMTransformer, MomentEstimator, UncertaintyVerifier

__all__ = [name for name in dir() if not name.startswith("_")]
