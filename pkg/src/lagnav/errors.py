"""Exception types shared across the library."""

from __future__ import annotations


class GimbalLockError(ValueError):
    """Pitch is within the guard band of +/-90 deg, where the Euler-rate
    kinematics are singular."""

    def __init__(self, pitch_rad: float, guard_rad: float):
        super().__init__(
            f"pitch {pitch_rad:.9g} rad is within {guard_rad:.3g} rad of "
            f"+/-pi/2; Euler-rate matrix is singular there"
        )
        self.pitch_rad = float(pitch_rad)
        self.guard_rad = float(guard_rad)


class DegenerateCovarianceError(RuntimeError):
    """An innovation covariance failed its Cholesky factorization.

    A non positive definite S means the filter state is corrupt; it is
    surfaced instead of being papered over with a pseudo-inverse.
    """


class WindowNotReadyError(RuntimeError):
    """Smoothed output was requested before the lag window finished warm-up."""


class DivergenceError(RuntimeError):
    """The divergence guard tripped during a smoothing pass.

    Carries the diagnostic describing where and why the guard fired; the
    iteration driver converts it into a reported outcome.
    """

    def __init__(self, diagnostic):
        super().__init__(
            f"divergence guard tripped ({diagnostic.reason}) at "
            f"t={diagnostic.t:.3f}s, measurement {diagnostic.meas_index}"
        )
        self.diagnostic = diagnostic


class CsvFormatError(ValueError):
    """A CSV input failed to parse or validate; carries the 1-based line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = int(line_no)


class ConfigError(ValueError):
    """A run configuration failed validation."""
