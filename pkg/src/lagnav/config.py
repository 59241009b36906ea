"""Run configuration: one flat JSON document drives generation, estimation
and evaluation.

Key names carry explicit units. Unknown keys are rejected and every field
is range-checked on load, so a typo fails fast instead of silently running
with a default. Command-line flags may override individual values after
the file is loaded.

The process-noise sigmas are continuous-time densities: a filter matched
to a generated dataset needs q_sigma = imu_noise * sqrt(dt), which is how
the defaults are related (0.02 m/s^2 per sample at 252 Hz gives
0.00125988... in density units).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .bmfls import NoiseConfig
from .errors import ConfigError
from .gating import GateConfig
from .strapdown import GravityModel
from .synthdata import ScenarioConfig

__all__ = ["RunConfig", "load_config", "config_from_dict", "default_config"]

# 0.02 / sqrt(252) and 0.0005 / sqrt(252): densities matched to the default
# per-sample IMU noise at the default rate.
_Q_ACCEL_DEFAULT = 0.001259881576697424
_Q_GYRO_DEFAULT = 3.1497039417435604e-05


def _vec(value, n: int, key: str) -> tuple[float, ...]:
    try:
        out = tuple(float(x) for x in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a list of {n} numbers") from exc
    if len(out) != n:
        raise ConfigError(f"{key} must have {n} entries, got {len(out)}")
    if not all(np.isfinite(out)):
        raise ConfigError(f"{key} must be finite")
    return out


def _positive_vec(value, n: int, key: str) -> tuple[float, ...]:
    out = _vec(value, n, key)
    if any(x <= 0.0 for x in out):
        raise ConfigError(f"{key} entries must be > 0")
    return out


def _non_negative_vec(value, n: int, key: str) -> tuple[float, ...]:
    out = _vec(value, n, key)
    if any(x < 0.0 for x in out):
        raise ConfigError(f"{key} entries must be >= 0")
    return out


@dataclass
class RunConfig:
    """Validated flat configuration for the generate/run/eval pipeline."""

    # Reproducibility
    rng_seed: int = 20260516

    # Scenario (generation)
    duration_s: float = 120.0
    imu_rate_hz: float = 252.0
    cam_rate_hz: float = 26.0
    hover_pos_amp_m: tuple = (0.3, 0.25, 0.12)
    hover_pos_freq_hz: tuple = (0.08, 0.11, 0.05)
    hover_pos_phase_rad: tuple | None = None
    hover_att_amp_rad: tuple = (0.02, 0.02, 0.15)
    hover_att_freq_hz: tuple = (0.13, 0.09, 0.06)
    hover_att_phase_rad: tuple | None = None
    imu_noise_accel_mps2: tuple = (0.02, 0.02, 0.02)
    imu_noise_gyro_radps: tuple = (0.0005, 0.0005, 0.0005)
    meas_noise_pos_m: tuple = (0.04, 0.04, 0.04)
    meas_noise_euler_rad: tuple = (0.005, 0.005, 0.005)
    outlier_rate: float = 0.2
    outlier_offsets_m: tuple = ((2.0, 0.0, 0.0), (4.0, 0.0, 0.0))
    outlier_burst_mean: float = 10.0

    # Smoother
    lag_steps: int = 26
    q_sigma_accel_mps2_per_sqrt_hz: tuple = (_Q_ACCEL_DEFAULT,) * 3
    q_sigma_gyro_radps_per_sqrt_hz: tuple = (_Q_GYRO_DEFAULT,) * 3
    r_sigma_pos_m: tuple = (0.04, 0.04, 0.04)
    r_sigma_euler_rad: tuple = (0.005, 0.005, 0.005)
    p0_sigma_pos_m: tuple = (0.1, 0.1, 0.1)
    p0_sigma_vel_mps: tuple = (0.1, 0.1, 0.1)
    p0_sigma_euler_rad: tuple = (0.02, 0.02, 0.02)
    gravity_mps2: float = 9.80665
    g_matrix_faithful: bool = False

    # Gating and iteration
    chi2_p: float = 0.99
    max_iterations: int = 10
    monotone_removal: bool = False
    max_pos_var_m2: float = 100.0
    max_consec_rejections: int = 50

    # Paths
    dataset_dir: str = "dataset"
    output_dir: str = "out"

    def __post_init__(self):
        self.rng_seed = _int_field(self.rng_seed, "rng_seed", minimum=0)
        self.duration_s = _float_field(self.duration_s, "duration_s", positive=True)
        self.imu_rate_hz = _float_field(self.imu_rate_hz, "imu_rate_hz", positive=True)
        self.cam_rate_hz = _float_field(self.cam_rate_hz, "cam_rate_hz", positive=True)
        if self.cam_rate_hz > self.imu_rate_hz:
            raise ConfigError("cam_rate_hz must not exceed imu_rate_hz")
        self.hover_pos_amp_m = _non_negative_vec(self.hover_pos_amp_m, 3, "hover_pos_amp_m")
        self.hover_pos_freq_hz = _non_negative_vec(self.hover_pos_freq_hz, 3, "hover_pos_freq_hz")
        self.hover_att_amp_rad = _non_negative_vec(self.hover_att_amp_rad, 3, "hover_att_amp_rad")
        self.hover_att_freq_hz = _non_negative_vec(self.hover_att_freq_hz, 3, "hover_att_freq_hz")
        if self.hover_pos_phase_rad is not None:
            self.hover_pos_phase_rad = _vec(self.hover_pos_phase_rad, 3, "hover_pos_phase_rad")
        if self.hover_att_phase_rad is not None:
            self.hover_att_phase_rad = _vec(self.hover_att_phase_rad, 3, "hover_att_phase_rad")
        self.imu_noise_accel_mps2 = _non_negative_vec(
            self.imu_noise_accel_mps2, 3, "imu_noise_accel_mps2"
        )
        self.imu_noise_gyro_radps = _non_negative_vec(
            self.imu_noise_gyro_radps, 3, "imu_noise_gyro_radps"
        )
        self.meas_noise_pos_m = _non_negative_vec(self.meas_noise_pos_m, 3, "meas_noise_pos_m")
        self.meas_noise_euler_rad = _non_negative_vec(
            self.meas_noise_euler_rad, 3, "meas_noise_euler_rad"
        )
        self.outlier_rate = _float_field(self.outlier_rate, "outlier_rate")
        if not (0.0 <= self.outlier_rate < 1.0):
            raise ConfigError("outlier_rate must lie in [0, 1)")
        offsets = self.outlier_offsets_m
        try:
            self.outlier_offsets_m = tuple(_vec(row, 3, "outlier_offsets_m") for row in offsets)
        except TypeError as exc:
            raise ConfigError("outlier_offsets_m must be a list of 3-vectors") from exc
        if len(self.outlier_offsets_m) < 1:
            raise ConfigError("outlier_offsets_m must not be empty")
        self.outlier_burst_mean = _float_field(self.outlier_burst_mean, "outlier_burst_mean")
        if self.outlier_burst_mean < 1.0:
            raise ConfigError("outlier_burst_mean must be >= 1")

        self.lag_steps = _int_field(self.lag_steps, "lag_steps", minimum=0)
        self.q_sigma_accel_mps2_per_sqrt_hz = _positive_vec(
            self.q_sigma_accel_mps2_per_sqrt_hz, 3, "q_sigma_accel_mps2_per_sqrt_hz"
        )
        self.q_sigma_gyro_radps_per_sqrt_hz = _positive_vec(
            self.q_sigma_gyro_radps_per_sqrt_hz, 3, "q_sigma_gyro_radps_per_sqrt_hz"
        )
        self.r_sigma_pos_m = _positive_vec(self.r_sigma_pos_m, 3, "r_sigma_pos_m")
        self.r_sigma_euler_rad = _positive_vec(self.r_sigma_euler_rad, 3, "r_sigma_euler_rad")
        self.p0_sigma_pos_m = _positive_vec(self.p0_sigma_pos_m, 3, "p0_sigma_pos_m")
        self.p0_sigma_vel_mps = _positive_vec(self.p0_sigma_vel_mps, 3, "p0_sigma_vel_mps")
        self.p0_sigma_euler_rad = _positive_vec(self.p0_sigma_euler_rad, 3, "p0_sigma_euler_rad")
        self.gravity_mps2 = _float_field(self.gravity_mps2, "gravity_mps2")
        self.g_matrix_faithful = _bool_field(self.g_matrix_faithful, "g_matrix_faithful")

        self.chi2_p = _float_field(self.chi2_p, "chi2_p")
        if not (0.0 < self.chi2_p < 1.0):
            raise ConfigError("chi2_p must lie in (0, 1)")
        self.max_iterations = _int_field(self.max_iterations, "max_iterations", minimum=1)
        self.monotone_removal = _bool_field(self.monotone_removal, "monotone_removal")
        self.max_pos_var_m2 = _float_field(self.max_pos_var_m2, "max_pos_var_m2", positive=True)
        self.max_consec_rejections = _int_field(
            self.max_consec_rejections, "max_consec_rejections", minimum=1
        )
        if not isinstance(self.dataset_dir, str) or not self.dataset_dir:
            raise ConfigError("dataset_dir must be a non-empty string")
        if not isinstance(self.output_dir, str) or not self.output_dir:
            raise ConfigError("output_dir must be a non-empty string")

    # Adapters to the library objects.

    def noise_config(self) -> NoiseConfig:
        return NoiseConfig(
            np.array(self.q_sigma_accel_mps2_per_sqrt_hz + self.q_sigma_gyro_radps_per_sqrt_hz),
            np.array(self.r_sigma_pos_m + self.r_sigma_euler_rad),
        )

    def gate_config(self) -> GateConfig:
        return GateConfig(dof=6, p=self.chi2_p)

    def gravity_model(self) -> GravityModel:
        return GravityModel(np.array([0.0, 0.0, self.gravity_mps2]))

    def p0_matrix(self) -> np.ndarray:
        sig = np.array(self.p0_sigma_pos_m + self.p0_sigma_vel_mps + self.p0_sigma_euler_rad)
        return np.diag(sig**2)

    def scenario_config(self) -> ScenarioConfig:
        return ScenarioConfig(
            duration_s=self.duration_s,
            imu_rate_hz=self.imu_rate_hz,
            cam_rate_hz=self.cam_rate_hz,
            pos_amp_m=self.hover_pos_amp_m,
            pos_freq_hz=self.hover_pos_freq_hz,
            pos_phase_rad=self.hover_pos_phase_rad,
            att_amp_rad=self.hover_att_amp_rad,
            att_freq_hz=self.hover_att_freq_hz,
            att_phase_rad=self.hover_att_phase_rad,
            imu_noise=np.concatenate(
                (self.imu_noise_accel_mps2, self.imu_noise_gyro_radps)
            ),
            meas_noise=np.concatenate((self.meas_noise_pos_m, self.meas_noise_euler_rad)),
            outlier_rate=self.outlier_rate,
            outlier_offsets_m=self.outlier_offsets_m,
            outlier_burst_mean=self.outlier_burst_mean,
            rng_seed=self.rng_seed,
        )

    def as_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            out[f.name] = value
        return out


def _float_field(value, key: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number")
    value = float(value)
    if not np.isfinite(value):
        raise ConfigError(f"{key} must be finite")
    if positive and value <= 0.0:
        raise ConfigError(f"{key} must be > 0")
    return value


def _int_field(value, key: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}")
    return value


def _bool_field(value, key: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{key} must be true or false")
    return value


def config_from_dict(data: dict) -> RunConfig:
    """Build a validated RunConfig; unknown keys are an error."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    kwargs = dict(data)
    for key in (
        "hover_pos_amp_m",
        "hover_pos_freq_hz",
        "hover_pos_phase_rad",
        "hover_att_amp_rad",
        "hover_att_freq_hz",
        "hover_att_phase_rad",
        "imu_noise_accel_mps2",
        "imu_noise_gyro_radps",
        "meas_noise_pos_m",
        "meas_noise_euler_rad",
        "q_sigma_accel_mps2_per_sqrt_hz",
        "q_sigma_gyro_radps_per_sqrt_hz",
        "r_sigma_pos_m",
        "r_sigma_euler_rad",
        "p0_sigma_pos_m",
        "p0_sigma_vel_mps",
        "p0_sigma_euler_rad",
    ):
        if key in kwargs and kwargs[key] is not None:
            if not isinstance(kwargs[key], (list, tuple)):
                raise ConfigError(f"{key} must be a list")
            kwargs[key] = tuple(kwargs[key])
    if "outlier_offsets_m" in kwargs:
        rows = kwargs["outlier_offsets_m"]
        if not isinstance(rows, (list, tuple)):
            raise ConfigError("outlier_offsets_m must be a list of 3-vectors")
        kwargs["outlier_offsets_m"] = tuple(tuple(r) for r in rows)
    try:
        return RunConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    """Load and validate a flat JSON configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data)


def default_config() -> RunConfig:
    """The standard benchmark configuration."""
    return RunConfig()
