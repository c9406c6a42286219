"""Time-varying ARCH(p) models: simulation, kernel-NLS estimation, bandwidth
cross-validation, residual bootstrap, diagnostics and volatility forecasting."""

__version__ = "0.1.0"

from .bandwidth import CvReport, cv_criterion, leave_out_fit, select_bandwidth
from .bootstrap import BootstrapConfig, BootstrapBands, bootstrap_bands, bootstrap_fit, bootstrap_path, pointwise_ci, residual_edf
from .diagnostics import autocov_report, ks_gaussian, ljung_box, moment_summary, sample_autocov_squares
from .errors import (
    BandwidthError,
    CIUnreliableError,
    CVError,
    DiagnosticError,
    DistributionError,
    DivergenceError,
    GridError,
    InitError,
    InsufficientWindowError,
    ModelError,
    NotApplicableError,
    NumericalError,
    ParseError,
    RangeError,
    SingularDesignError,
    StabilityError,
    TvarchError,
)
from .estimator import (
    FitCurve,
    FitPoint,
    ResidualSet,
    clip_coefficients,
    local_mean,
    nls_fit_at,
    nls_fit_curve,
    nls_fit_stationary,
    oracle_refit,
    residuals,
    weighted_ls,
)
from .forecast import (
    ForecastPath,
    aggregate_forecast,
    amse,
    forward_validate_span,
    gaussian_coverage,
    h_step_forecast,
    realized_volatility,
    span_fit,
)
from .kernels import Kernel, eval_kernel, weights_at
from .process import InnovationDist, ParamCurves, ReturnSeries, load_model, save_model, simulate_stationary, simulate_tvarch
from .qml import compare_nls_qml, qml_fit_segment
