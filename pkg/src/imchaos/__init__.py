"""imchaos: a numerical laboratory for imaginary multiplicative chaos.

Simulates truncated log-correlated Gaussian fields (explicit circle
series, Karhunen-Loeve bases, almost star-scale invariant covariances),
evaluates Wick-renormalized chaos integrals with their analytic moment
formulas, constructs smooth phases hitting prescribed integral targets,
and runs reproducible Monte Carlo studies of the chaos law: density
histograms, small-ball probabilities, moment blow-up diagnostics, and
negative-Sobolev ball probabilities.
"""

__version__ = "0.1.0"

from .bessel import (
    bessel_j,
    bessel_j0_root,
    bessel_report,
    circle_map,
    circle_map_jacobian,
    invert_circle_map,
    phi0_flatness,
    phi0_map,
)
from .chaos import (
    ChaosObservable,
    SobolevSpec,
    TestFunction,
    chaos_field,
    chaos_integral,
    default_sobolev_spec,
    second_moment_analytic,
    sobolev_neg_norm,
    test_function,
    truncation_gap,
    wick_weight,
)
from .errors import (
    AliasedGrid,
    DegeneratePerturbations,
    DiagonalSingularity,
    DivergentMoment,
    EmptyEnsemble,
    GridMismatch,
    ImchaosError,
    IndexOutOfRange,
    InvalidWidth,
    NoConvergence,
    NonUnimodalBracket,
    NotPositive,
    SupportTouchesBoundary,
    TargetTooLarge,
    ZeroFunction,
)
from .grids import Grid, box_grid, circle_grid
from .kernels import (
    CircleKernel,
    LogKernel,
    SeedCovariance,
    StarScaleKernel,
    build_seed_covariance,
    circle_kernel_eval,
    circle_partial_sum,
    kernel_from_json,
    kernel_to_json,
    log_kernel_eval,
    star_scale_cov,
    star_scale_variance,
)
from .mc import (
    ChaosEnsemble,
    DensityGrid,
    EnsembleConfig,
    MomentReport,
    SmallBallEstimate,
    density_histogram,
    moment_estimate,
    run_chaos_ensemble,
    small_ball,
    sobolev_ball_probability,
    sobolev_norm_samples,
    wilson_interval,
)
from .phase import (
    PerturbationPair,
    PhaseProfile,
    phase_for_target,
    smooth_zero_phase,
    verify_phase,
    zero_phase,
)
from .sampler import (
    CoefficientShift,
    FieldSample,
    KLBasis,
    kl_decompose,
    sample_circle_field,
    sample_kl,
    sample_shifted,
)
from .testfuncs import builtin_box, builtin_circle

__all__ = [name for name in dir() if not name.startswith("_")]
