"""Data-adaptive symmetric CUSUM change detection for Gaussian streams."""

from .detectors import (
    DETECTOR_KINDS,
    VARIANCE_FLOOR,
    ChangeEvent,
    DetectorConfig,
    GaussianParams,
    InsufficientDataError,
    SequentialDetector,
    cusum_step,
    das_cusum_increment,
    das_cusum_step,
    gaussian_loglik,
    glr_statistic,
    kl_gaussian,
    llr,
    run_detector,
    symmetric_kl,
    window_estimate,
)
from .montecarlo import (
    CalibrationError,
    ConfigurationError,
    CurvePoint,
    MonteCarloEstimate,
    Scenario,
    calibrate_threshold,
    edd_vs_arl_curve,
    estimate_arl,
    estimate_edd,
    trial_generator,
)
from .tuning import (
    TuningInputs,
    TuningOutputs,
    delta0_star,
    edd_theoretical,
    optimal_window,
    threshold_for_arl,
    tune,
    v_star,
)

__all__ = [name for name in dir() if not name.startswith("_")]
