"""Iterative fixed-lag smoothing with chi-squared outlier rejection for
visual-inertial navigation.

The estimator fuses strapdown inertial prediction with direct pose
measurements in an augmented-state fixed-lag smoother, gates measurements
with a Mahalanobis/chi-squared test, and repeats full smoothing passes,
re-classifying outliers each time, until the inlier set converges.
"""

from .bmfls import (
    Innovation,
    LagWindow,
    NoiseConfig,
    PoseMeasurement,
    augmented_measurement_matrix,
    measurement_matrix,
)
from .config import RunConfig, config_from_dict, default_config, load_config
from .errors import (
    ConfigError,
    CsvFormatError,
    DegenerateCovarianceError,
    DivergenceError,
    GimbalLockError,
    WindowNotReadyError,
)
from .gating import GateConfig, GatingRecord, chi2_threshold, classify, mahalanobis_sq
from .geo3d import GIMBAL_GUARD_RAD, dcm_body_to_nav, euler_rate_matrix, wrap_angle
from .iterative import (
    Dataset,
    DivergenceDiagnostic,
    DivergenceGuard,
    IterationReport,
    PassResult,
    SmoothedTrajectory,
    iterate,
    run_pass,
)
from .strapdown import (
    GRAVITY_MPS2,
    GravityModel,
    ImuSample,
    NavState,
    jacobian,
    noise_mapping,
    predict,
)
from .synthdata import (
    HoverMotion,
    LabeledDataset,
    Metrics,
    ScenarioConfig,
    Trajectory,
    evaluate,
    gen_imu,
    gen_measurements,
    gen_trajectory,
    make_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "GIMBAL_GUARD_RAD",
    "GRAVITY_MPS2",
    "ConfigError",
    "CsvFormatError",
    "Dataset",
    "DegenerateCovarianceError",
    "DivergenceDiagnostic",
    "DivergenceError",
    "DivergenceGuard",
    "GateConfig",
    "GatingRecord",
    "GimbalLockError",
    "GravityModel",
    "HoverMotion",
    "ImuSample",
    "Innovation",
    "IterationReport",
    "LabeledDataset",
    "LagWindow",
    "Metrics",
    "NavState",
    "NoiseConfig",
    "PassResult",
    "PoseMeasurement",
    "RunConfig",
    "ScenarioConfig",
    "SmoothedTrajectory",
    "Trajectory",
    "WindowNotReadyError",
    "augmented_measurement_matrix",
    "chi2_threshold",
    "classify",
    "config_from_dict",
    "dcm_body_to_nav",
    "default_config",
    "euler_rate_matrix",
    "evaluate",
    "gen_imu",
    "gen_measurements",
    "gen_trajectory",
    "iterate",
    "jacobian",
    "load_config",
    "mahalanobis_sq",
    "make_dataset",
    "measurement_matrix",
    "noise_mapping",
    "predict",
    "run_pass",
    "wrap_angle",
]
