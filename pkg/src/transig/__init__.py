"""Sequential detection of transient signals with moving-window charts.

Catalog of exponential-family models, streaming window charts (moving
average, grouped MA, signed-root and adjusted signed-root, windowed
CUSUM/Shiryaev-Roberts, profile variants, Bartlett-adjusted deviance),
analytic false-detection and detection-probability approximations, a
Monte Carlo engine with threshold calibration and benchmark grids, and a
data pipeline plus CLI for monitoring observed series.
"""

from .families import (
    DomainError,
    NoSolutionError,
    DegenerateWindowError,
    Model,
    NormalMean,
    ExpRate,
    NormalVariance,
    NormalTwoParam,
    MODELS,
    get_model,
    CanonicalSample,
    sample_null,
    sample_alt,
    solve_theta_for_mean,
    solve_psi,
    solve_psi_scale,
    mle_two_param,
)
from .charts import (
    CHART_IDS,
    ChartConfig,
    ChartStep,
    WindowState,
    Chart,
    TwoSidedChart,
    make_chart,
    kernel_for,
    ma_step,
    gma_step,
    rstar_1p_step,
    cusum_w_step,
    sr_w_step,
    rstar_var_unknown_mean_step,
    rstar_mean_unknown_var_step,
    tstat_step,
    cusum_profile_step,
    sr_profile_step,
    bartlett_w2_step,
)
from .approx import (
    WeakSignalError,
    SimulationError,
    OvershootEstimate,
    ApproxValue,
    ApproxInputs,
    RHO_PLUS,
    estimate_rho_plus,
    rho_plus_for,
    nu_factor,
    lambda_factor,
    fdp_ma,
    fdp_ma_closed,
    fdp_gma,
    fdp_rstar,
    fdp_cusum,
    fdp_sr,
    fdp_scale_multiparam,
    fdp_bartlett,
    pod_ma,
    pod_rstar,
)
from .mcsim import (
    CalibrationError,
    Scenario,
    ProbabilityEstimate,
    CalibrationResult,
    TableArtifact,
    TABLE_IDS,
    run_scenario,
    run_charts_shared,
    calibrate_threshold,
    reproduce_table,
)
from .pipeline import (
    IngestError,
    MonitorError,
    SeriesSpec,
    Provenance,
    ProcessedSeries,
    ingest,
    read_table,
    sample_acf,
    MonitorRecord,
    Episode,
    MonitorReport,
    monitor,
    synthetic_price_series,
)

__version__ = "1.0.0"

__all__ = [
    "__version__",
    # families
    "DomainError", "NoSolutionError", "DegenerateWindowError",
    "Model", "NormalMean", "ExpRate", "NormalVariance", "NormalTwoParam",
    "MODELS", "get_model", "CanonicalSample", "sample_null", "sample_alt",
    "solve_theta_for_mean", "solve_psi", "solve_psi_scale", "mle_two_param",
    # charts
    "CHART_IDS", "ChartConfig", "ChartStep", "WindowState", "Chart",
    "TwoSidedChart", "make_chart", "kernel_for",
    "ma_step", "gma_step", "rstar_1p_step", "cusum_w_step", "sr_w_step",
    "rstar_var_unknown_mean_step", "rstar_mean_unknown_var_step",
    "tstat_step", "cusum_profile_step", "sr_profile_step", "bartlett_w2_step",
    # approx
    "WeakSignalError", "SimulationError", "OvershootEstimate", "ApproxValue",
    "ApproxInputs", "RHO_PLUS", "estimate_rho_plus", "rho_plus_for",
    "nu_factor", "lambda_factor", "fdp_ma", "fdp_ma_closed", "fdp_gma",
    "fdp_rstar", "fdp_cusum", "fdp_sr", "fdp_scale_multiparam",
    "fdp_bartlett", "pod_ma", "pod_rstar",
    # mcsim
    "CalibrationError", "Scenario", "ProbabilityEstimate", "CalibrationResult",
    "TableArtifact", "TABLE_IDS", "run_scenario", "run_charts_shared",
    "calibrate_threshold", "reproduce_table",
    # pipeline
    "IngestError", "MonitorError", "SeriesSpec", "Provenance",
    "ProcessedSeries", "ingest", "read_table", "sample_acf",
    "MonitorRecord", "Episode", "MonitorReport", "monitor",
    "synthetic_price_series",
]
