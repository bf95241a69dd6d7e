"""Relative power variation of Brownian semistationary processes: simulation,
limit theory and tests for constant intermittency."""

from .errors import (
    ConfigError,
    DegenerateInputError,
    DomainError,
    FactorizationError,
    InputError,
    RegimeError,
    TruncationError,
)
from .kernels import (
    DriftKernelParams,
    GammaKernelParams,
    LambdaSeriesConfig,
    abs_moment,
    c_delta,
    core_covariance,
    fgn_correlation,
    gamma_kernel_eval,
    hermite_coefficients,
    lambda_p,
    lambda_p_series,
)
from .simulate import (
    AbsolutelyContinuous,
    Constant,
    DriftRate,
    ExpOU,
    GammaConvolution,
    NoDrift,
    PiecewiseConstant,
    SamplePath,
    SimConfig,
    Sinusoidal,
    check_drift_negligibility,
    integrated_power,
    parse_vol,
    simulate_bss,
    simulate_gaussian_core,
    simulate_semimartingale,
)
from .variation import (
    RelativeVariation,
    VariationSeries,
    coarse_grained_dissipation,
    energy_dissipation_estimate,
    power_variation,
    relative_energy_dissipation,
    relative_power_variation,
    scaled_variation,
    scaling_exponent,
)
from .inference import (
    ConfidenceBand,
    TestResult,
    asy_variance_estimator,
    cof_estimate_nu,
    confidence_band,
    cvm_limit_cdf,
    cvm_quantile,
    cvm_statistic,
    ks_limit_cdf,
    ks_quantile,
    ks_statistic,
    lambda_for_inference,
    studentized,
)

__version__ = "0.1.0"
