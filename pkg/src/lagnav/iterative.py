"""Iterative smoothing with outlier re-classification.

A pass is one forward sweep of the fixed-lag smoother over the whole
dataset: every IMU sample propagates the window, and at each measurement
epoch the innovation and Mahalanobis distance are computed for every
measurement, fused or not, while only measurements in the pass's fuse set
are actually applied as updates.

The driver starts by fusing everything (the inertial solution alone drifts
too fast to gate against), then feeds each pass's inlier set to the next
pass as its fuse set, until two consecutive passes agree on the inlier set
or the iteration cap is reached. Because every pass re-gates every
measurement against the refined trajectory, a measurement rejected early
can be re-admitted later.

A divergence guard watches each pass: it trips when the position variance
of the newest state grows past a cap or when too many consecutive
measurements are rejected, and the driver reports that as an outcome
rather than crashing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .bmfls import LagWindow, PoseMeasurement
from .errors import DivergenceError
from .gating import GatingRecord, classify, mahalanobis_sq
from .strapdown import ImuSample, NavState

if TYPE_CHECKING:
    from .config import RunConfig
    from .synthdata import Trajectory

__all__ = [
    "Dataset",
    "SmoothedTrajectory",
    "PassResult",
    "DivergenceDiagnostic",
    "DivergenceGuard",
    "IterationReport",
    "run_pass",
    "iterate",
]


@dataclass
class Dataset:
    """Input streams for one estimation run.

    true_labels, when present, is a boolean array with True marking a
    planted outlier (used only for evaluation, never by the estimator).
    """

    imu: list[ImuSample]
    meas: list[PoseMeasurement]
    ground_truth: "Trajectory | None" = None
    true_labels: np.ndarray | None = None


@dataclass
class SmoothedTrajectory:
    """Smoothed estimates, one row per IMU epoch.

    x columns are [px py pz vx vy vz roll pitch yaw]; p_diag holds the
    matching diagonal of the smoothed covariance block.
    """

    t: np.ndarray
    x: np.ndarray
    p_diag: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def state_at(self, i: int) -> NavState:
        return NavState.from_vector(self.x[i])


@dataclass
class PassResult:
    """One smoothing pass: trajectory, per-measurement gating, inlier set."""

    trajectory: SmoothedTrajectory
    records: list[GatingRecord]
    inlier_set: frozenset[int]


@dataclass
class DivergenceDiagnostic:
    """Where and why the divergence guard tripped."""

    pass_number: int
    meas_index: int
    t: float
    reason: str  # "position_variance" or "consecutive_rejections"
    pos_var_trace: float
    consec_rejections: int

    def as_dict(self) -> dict:
        return {
            "pass": self.pass_number,
            "meas_index": self.meas_index,
            "t": self.t,
            "reason": self.reason,
            "pos_var_trace": self.pos_var_trace,
            "consec_rejections": self.consec_rejections,
        }


@dataclass
class IterationReport:
    """Outcome of the iterative smoothing driver."""

    passes: list[PassResult]
    converged: bool
    iterations_used: int
    divergence: DivergenceDiagnostic | None = None


@dataclass
class DivergenceGuard:
    """Trips on unbounded position variance or a long run of rejections.

    A measurement counts as rejected when the pass neither fused it nor
    accepts it under the current gate: the filter is coasting with data
    available and flagged suspect, which is the signature of a diverging
    estimate. Any fused or gate-accepted measurement breaks the run.
    """

    max_pos_var: float = 100.0
    max_consec_rejections: int = 50
    consec_rejections: int = field(default=0, init=False)

    def observe(self, fused: bool, inlier: bool, pos_var_trace: float) -> str | None:
        """Record one gated measurement; returns a trip reason or None."""
        if fused or inlier:
            self.consec_rejections = 0
        else:
            self.consec_rejections += 1
        if pos_var_trace > self.max_pos_var:
            return "position_variance"
        if self.consec_rejections >= self.max_consec_rejections:
            return "consecutive_rejections"
        return None


def _validate_dataset(ds: Dataset) -> None:
    if not ds.imu:
        raise ValueError("dataset has no IMU samples")
    t_imu = np.array([s.t for s in ds.imu])
    if np.any(np.diff(t_imu) <= 0.0):
        raise ValueError("IMU timestamps must be strictly increasing")
    t_meas = np.array([z.t for z in ds.meas])
    if len(t_meas) > 1 and np.any(np.diff(t_meas) < 0.0):
        raise ValueError("measurement timestamps must be time-sorted")
    if len(t_meas) and (t_meas[0] < t_imu[0] or t_meas[-1] > t_imu[-1]):
        raise ValueError("measurement timestamps must lie within the IMU time span")


def _measurement_epochs(t_imu: np.ndarray, meas: list[PoseMeasurement]) -> dict[int, list[int]]:
    """Map each measurement index to its nearest IMU epoch (ties go earlier)."""
    by_epoch: dict[int, list[int]] = {}
    for j, z in enumerate(meas):
        pos = int(np.searchsorted(t_imu, z.t))
        if pos == 0:
            epoch = 0
        elif pos >= len(t_imu):
            epoch = len(t_imu) - 1
        else:
            left, right = pos - 1, pos
            epoch = left if z.t - t_imu[left] <= t_imu[right] - z.t else right
        by_epoch.setdefault(epoch, []).append(j)
    return by_epoch


def _initial_state(ds: Dataset) -> NavState:
    """Position/attitude seeded from the first pose measurement, zero velocity."""
    if ds.meas:
        z0 = ds.meas[0]
        return NavState(z0.p.copy(), np.zeros(3), z0.euler.copy())
    return NavState.zero()


def run_pass(
    ds: Dataset,
    fuse_set: frozenset[int] | set[int],
    cfg: "RunConfig",
    iteration: int = 1,
) -> PassResult:
    """One forward smoothing sweep.

    Every measurement gets a gating record from this pass's trajectory,
    but only measurements in ``fuse_set`` are applied as updates. Raises
    ``DivergenceError`` if the guard trips.
    """
    _validate_dataset(ds)
    if not set(fuse_set) <= set(range(len(ds.meas))):
        raise ValueError("fuse_set contains indices outside the measurement list")

    t_imu = np.array([s.t for s in ds.imu])
    by_epoch = _measurement_epochs(t_imu, ds.meas)
    n_epochs = len(t_imu)
    n_lag = cfg.lag_steps

    window = LagWindow(
        _initial_state(ds),
        cfg.p0_matrix(),
        n_lag,
        cfg.noise_config(),
        gravity=cfg.gravity_model(),
        g_matrix_faithful=cfg.g_matrix_faithful,
    )
    gate = cfg.gate_config()
    guard = DivergenceGuard(cfg.max_pos_var_m2, cfg.max_consec_rejections)

    records: list[GatingRecord | None] = [None] * len(ds.meas)
    traj_t = np.empty(n_epochs)
    traj_x = np.empty((n_epochs, 9))
    traj_pd = np.empty((n_epochs, 9))
    emitted = 0

    def emit(slot: int) -> None:
        nonlocal emitted
        base = 9 * slot
        traj_t[emitted] = t_imu[window.propagations - slot]
        traj_x[emitted] = window.state_vector(slot)
        traj_pd[emitted] = np.diag(window.P[base : base + 9, base : base + 9])
        emitted += 1

    def process_measurements(epoch: int) -> None:
        for j in by_epoch.get(epoch, ()):
            z = ds.meas[j]
            inn = window.innovation(z)
            d = mahalanobis_sq(inn)
            inlier = classify(d, gate)
            records[j] = GatingRecord(j, z.t, d, inlier, iteration)
            fused = j in fuse_set
            if fused:
                window.update(inn)
            reason = guard.observe(fused, inlier, float(np.trace(window.P[0:3, 0:3])))
            if reason is not None:
                raise DivergenceError(
                    DivergenceDiagnostic(
                        iteration,
                        j,
                        z.t,
                        reason,
                        float(np.trace(window.P[0:3, 0:3])),
                        guard.consec_rejections,
                    )
                )

    process_measurements(0)
    if n_lag == 0:
        emit(0)
    for k in range(1, n_epochs):
        window.propagate(ds.imu[k], t_imu[k] - t_imu[k - 1])
        process_measurements(k)
        if k >= n_lag:
            emit(n_lag)
    # Flush the remaining window so the trajectory covers every epoch.
    for slot in range(min(n_lag - 1, n_epochs - 1), -1, -1):
        emit(slot)

    assert emitted == n_epochs
    inliers = frozenset(j for j, r in enumerate(records) if r is not None and r.inlier)
    return PassResult(
        SmoothedTrajectory(traj_t, traj_x, traj_pd),
        [r for r in records if r is not None],
        inliers,
    )


def iterate(ds: Dataset, cfg: "RunConfig") -> IterationReport:
    """Repeated smoothing passes until the inlier set reaches a fixed point.

    Pass 1 fuses everything; pass i+1 fuses pass i's inliers (or, with
    ``monotone_removal``, only measurements never yet rejected).
    Convergence means two consecutive passes produced identical inlier
    sets, so the result is a true fixed point. Hitting the iteration cap
    reports converged=False; a divergence trip ends the run with the
    diagnostic attached and the completed passes kept.
    """
    _validate_dataset(ds)
    fuse: frozenset[int] = frozenset(range(len(ds.meas)))
    passes: list[PassResult] = []
    prev_inliers: frozenset[int] | None = None
    converged = False
    diagnostic = None

    for it in range(1, cfg.max_iterations + 1):
        try:
            result = run_pass(ds, fuse, cfg, iteration=it)
        except DivergenceError as err:
            diagnostic = err.diagnostic
            break
        passes.append(result)
        if prev_inliers is not None and result.inlier_set == prev_inliers:
            converged = True
            break
        prev_inliers = result.inlier_set
        if cfg.monotone_removal:
            fuse = fuse & result.inlier_set
        else:
            fuse = result.inlier_set

    return IterationReport(passes, converged, len(passes), diagnostic)
