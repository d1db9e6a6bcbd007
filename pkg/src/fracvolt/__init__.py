"""Simulation and asymptotic inference for fractional Volterra processes.

The library covers the pipeline from exact fractional Gaussian noise,
through moving-average simulation of X_i(t) = int_0^t x_i(t-s) dB^H(s)
for H > 1/2, to the asymptotic covariance matrix Lambda of the
time-average central limit theorems, closed forms and moment estimation
for the fractional CAR(2) model, and seeded Monte Carlo experiments that
verify the limit theorems end to end.
"""

from .asymptotics import (
    EtaVector,
    LambdaMatrix,
    ModelSpec,
    eta,
    lambda_matrix,
    rho_bar,
    sigma_t,
    validate_hypotheses,
)
from .car2 import (
    Car2Params,
    ClosedFormReport,
    SpectralConstants,
    Z_99,
    confidence_intervals,
    delta_method_cov,
    empirical_moments,
    estimate_theta,
    lambda_closed_form,
    m_infinity,
    moment_jacobian,
    spectral_constants,
)
from .errors import (
    DegenerateKernel,
    EnvelopeViolation,
    FracvoltError,
    InadmissibleParams,
    NegativeEigenvalue,
    NegativeTime,
    NoSolution,
    NotCentered,
    NumericalError,
    OutOfRange,
    QuadratureUnstable,
    SingularJacobian,
    ToleranceNotMet,
    TooFewSamples,
    ValidationError,
)
from .fgn import (
    GaussianPath,
    HurstParam,
    SimGrid,
    circulant_eigenvalues,
    fbm_from_fgn,
    fgn_autocovariance,
    generate_fgn,
    write_path_csv,
)
from .hermite import (
    HermiteExpansion,
    hermite_coefficients,
    hermite_eval,
    hermite_to_monomial,
    monomial_to_hermite,
)
from .kernels import (
    AdmissibilityReport,
    Car2First,
    Car2Second,
    DecayEnvelope,
    Exponential,
    Tabulated,
    car2_roots,
    check_admissibility,
    eval_kernel,
    kernel_from_dict,
    kernel_to_dict,
)
from .mc import (
    OUT_OF_SCOPE_STAMP,
    QUANTILE_LEVELS,
    ExperimentConfig,
    MCReport,
    compare_covariance,
    normality_diagnostics,
    report_to_dict,
    run_clt_experiment,
)
from .quadrature import (
    CrossCorrelation,
    IntegralResult,
    QuadConfig,
    cross_correlation,
    double_weighted_integral,
    line_integral_power,
    weighted_line_integral,
)
from .volterra import (
    FunctionalSample,
    PathBundle,
    functional_U,
    functional_V,
    sigma_profile,
    simulate_car2_recursion,
    simulate_paths,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "FracvoltError", "ValidationError", "NumericalError",
    "NegativeTime", "InadmissibleParams", "EnvelopeViolation", "NotCentered",
    "DegenerateKernel", "OutOfRange", "TooFewSamples",
    "NegativeEigenvalue", "ToleranceNotMet", "QuadratureUnstable",
    "NoSolution", "SingularJacobian",
    # fgn
    "HurstParam", "SimGrid", "GaussianPath", "fgn_autocovariance",
    "circulant_eigenvalues", "generate_fgn", "fbm_from_fgn", "write_path_csv",
    # kernels
    "DecayEnvelope", "Exponential", "Car2First", "Car2Second", "Tabulated",
    "AdmissibilityReport", "eval_kernel", "car2_roots", "check_admissibility",
    "kernel_to_dict", "kernel_from_dict",
    # quadrature
    "QuadConfig", "IntegralResult", "CrossCorrelation", "cross_correlation",
    "double_weighted_integral", "weighted_line_integral", "line_integral_power",
    # hermite
    "HermiteExpansion", "hermite_eval", "monomial_to_hermite",
    "hermite_to_monomial", "hermite_coefficients",
    # asymptotics
    "ModelSpec", "EtaVector", "LambdaMatrix", "validate_hypotheses",
    "eta", "rho_bar", "sigma_t", "lambda_matrix",
    # car2
    "Car2Params", "SpectralConstants", "ClosedFormReport", "Z_99",
    "spectral_constants", "m_infinity", "lambda_closed_form",
    "estimate_theta", "moment_jacobian", "delta_method_cov",
    "confidence_intervals", "empirical_moments",
    # volterra
    "PathBundle", "FunctionalSample", "simulate_paths",
    "simulate_car2_recursion", "sigma_profile", "functional_U", "functional_V",
    # mc
    "ExperimentConfig", "MCReport", "run_clt_experiment",
    "compare_covariance", "normality_diagnostics", "report_to_dict",
    "OUT_OF_SCOPE_STAMP", "QUANTILE_LEVELS",
]
