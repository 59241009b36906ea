import dataclasses
import math

import numpy as np
import pytest

from lagnav.bmfls import PoseMeasurement
from lagnav.config import RunConfig
from lagnav.errors import DivergenceError
from lagnav.iterative import (
    Dataset,
    DivergenceGuard,
    iterate,
    run_pass,
)
from lagnav.strapdown import NavState, predict
from lagnav.synthdata import make_dataset


def _small_config(**kw):
    defaults = dict(duration_s=4.0, rng_seed=17, lag_steps=5)
    defaults.update(kw)
    return RunConfig(**defaults)


def _small_dataset(cfg):
    return make_dataset(cfg.scenario_config())


def test_dead_reckoning_equals_prediction_chain():
    # With nothing fused, the emitted trajectory is the pure composition of
    # one-step predictions from the initial state.
    cfg = _small_config(outlier_rate=0.0)
    ds = _small_dataset(cfg)
    result = run_pass(ds, frozenset(), cfg)

    z0 = ds.meas[0]
    x = NavState(z0.p.copy(), np.zeros(3), z0.euler.copy())
    states = [x.as_vector()]
    grav = cfg.gravity_model()
    for k in range(1, len(ds.imu)):
        x = predict(x, ds.imu[k], ds.imu[k].t - ds.imu[k - 1].t, grav)
        states.append(x.as_vector())
    chain = np.array(states)

    order = np.argsort(result.trajectory.t)
    assert np.array_equal(result.trajectory.t[order], np.array([s.t for s in ds.imu]))
    assert np.abs(result.trajectory.x[order] - chain).max() < 1e-12


def test_trajectory_covers_every_epoch_in_order():
    cfg = _small_config(outlier_rate=0.0)
    ds = _small_dataset(cfg)
    result = run_pass(ds, frozenset(range(len(ds.meas))), cfg)
    t = result.trajectory.t
    assert len(t) == len(ds.imu)
    assert np.array_equal(t, np.array([s.t for s in ds.imu]))


def test_excluded_measurement_still_gated():
    cfg = _small_config(outlier_rate=0.0)
    ds = _small_dataset(cfg)
    fuse = frozenset(range(1, len(ds.meas)))  # leave out measurement 0
    result = run_pass(ds, fuse, cfg)
    assert len(result.records) == len(ds.meas)
    rec0 = result.records[0]
    assert rec0.meas_index == 0
    assert math.isfinite(rec0.d)


def test_run_pass_rejects_bad_fuse_set():
    cfg = _small_config()
    ds = _small_dataset(cfg)
    with pytest.raises(ValueError):
        run_pass(ds, frozenset({len(ds.meas)}), cfg)


def test_run_pass_rejects_out_of_span_measurement():
    cfg = _small_config()
    ds = _small_dataset(cfg)
    late = PoseMeasurement(ds.imu[-1].t + 1.0, np.zeros(3), np.zeros(3))
    bad = Dataset(imu=ds.imu, meas=list(ds.meas) + [late])
    with pytest.raises(ValueError):
        run_pass(bad, frozenset(), cfg)


def test_iterate_max_iterations_cap():
    cfg = _small_config(max_iterations=1)
    ds = _small_dataset(cfg)
    report = iterate(ds, cfg)
    assert report.iterations_used == 1
    assert report.converged is False
    assert report.divergence is None


def test_iterate_converges_on_outlier_free_data():
    cfg = _small_config(duration_s=10.0, outlier_rate=0.0)
    ds = _small_dataset(cfg)
    report = iterate(ds, cfg)
    assert report.converged
    assert report.iterations_used <= 2
    # Rejection stays near the nominal gate level.
    frac_out = 1.0 - len(report.passes[0].inlier_set) / len(ds.meas)
    assert frac_out < 0.09


def test_iterate_fixed_point_is_stable():
    cfg = _small_config(duration_s=10.0, outlier_rate=0.0)
    ds = _small_dataset(cfg)
    report = iterate(ds, cfg)
    assert report.converged
    extra = run_pass(ds, report.passes[-1].inlier_set, cfg)
    assert extra.inlier_set == report.passes[-1].inlier_set


def test_iterate_deterministic():
    cfg = _small_config(duration_s=8.0)
    ds = _small_dataset(cfg)
    a = iterate(ds, cfg)
    b = iterate(ds, cfg)
    assert a.converged == b.converged
    assert a.iterations_used == b.iterations_used
    for pa, pb in zip(a.passes, b.passes):
        assert np.array_equal(pa.trajectory.x, pb.trajectory.x)
        assert np.array_equal(pa.trajectory.p_diag, pb.trajectory.p_diag)
        assert pa.inlier_set == pb.inlier_set
        for ra, rb in zip(pa.records, pb.records):
            assert ra.d == rb.d and ra.inlier == rb.inlier


def test_monotone_removal_mode_converges():
    # With monotone removal the fuse set only ever shrinks; labels are
    # still re-gated every pass, and the driver must reach a fixed point
    # on clean data just like the default mode.
    cfg = _small_config(duration_s=10.0, outlier_rate=0.0, monotone_removal=True)
    ds = _small_dataset(cfg)
    report = iterate(ds, cfg)
    assert report.converged
    assert report.divergence is None
    # Every measurement is still gated in every pass, fused or not.
    for result in report.passes:
        assert len(result.records) == len(ds.meas)


def test_guard_counts_only_unfused_rejections():
    guard = DivergenceGuard(max_pos_var=100.0, max_consec_rejections=3)
    # Fused measurements never count, whatever their label.
    for _ in range(5):
        assert guard.observe(True, False, 0.1) is None
    assert guard.consec_rejections == 0
    # Unfused and gate-accepted also resets.
    assert guard.observe(False, False, 0.1) is None
    assert guard.observe(False, False, 0.1) is None
    assert guard.observe(False, True, 0.1) is None
    assert guard.consec_rejections == 0
    # Three unfused rejections in a row trip.
    assert guard.observe(False, False, 0.1) is None
    assert guard.observe(False, False, 0.1) is None
    assert guard.observe(False, False, 0.1) == "consecutive_rejections"


def test_guard_position_variance_rule():
    guard = DivergenceGuard(max_pos_var=1.0, max_consec_rejections=50)
    assert guard.observe(True, True, 0.5) is None
    assert guard.observe(True, True, 1.5) == "position_variance"


def test_dead_reckoning_long_run_trips_covariance_rule():
    # No fusion and an inflated accelerometer noise density: the position
    # covariance grows without bound and the guard must fire on it, not on
    # the rejection counter (unfused but gate-consistent measurements do
    # not count as rejections).
    cfg = _small_config(
        duration_s=60.0,
        outlier_rate=0.0,
        max_pos_var_m2=0.5,
        q_sigma_accel_mps2_per_sqrt_hz=(0.05, 0.05, 0.05),
        imu_noise_accel_mps2=(0.7937, 0.7937, 0.7937),
    )
    ds = _small_dataset(cfg)
    with pytest.raises(DivergenceError) as err:
        run_pass(ds, frozenset(), cfg)
    assert err.value.diagnostic.reason == "position_variance"


def test_iterate_reports_divergence_as_outcome():
    cfg = _small_config(
        duration_s=60.0,
        outlier_rate=0.0,
        max_pos_var_m2=0.5,
        q_sigma_accel_mps2_per_sqrt_hz=(0.05, 0.05, 0.05),
        imu_noise_accel_mps2=(0.7937, 0.7937, 0.7937),
        max_iterations=3,
    )
    ds = _small_dataset(cfg)
    ds = Dataset(imu=ds.imu, meas=ds.meas)
    # Force pass 1 itself to run unfused by emptying the measurement list
    # is not possible (pass 1 fuses all), so instead shrink the position
    # variance cap until even the fused run crosses it: the report must
    # carry the diagnostic instead of raising.
    cfg = dataclasses.replace(cfg, max_pos_var_m2=1e-9)
    report = iterate(ds, cfg)
    assert report.divergence is not None
    assert report.converged is False
    assert report.iterations_used == 0
    assert report.divergence.pass_number == 1


def test_measurements_between_epochs_map_to_nearest():
    # Build a tiny handmade dataset: IMU at 1 Hz, one measurement just
    # before an epoch and one just after; both must be processed (records
    # exist) and the trajectory still covers all epochs.
    from lagnav.strapdown import ImuSample

    imu = [ImuSample(float(t), [0, 0, -9.80665], [0, 0, 0]) for t in range(5)]
    meas = [
        PoseMeasurement(1.49, [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
        PoseMeasurement(2.51, [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
    ]
    ds = Dataset(imu=imu, meas=meas)
    cfg = RunConfig(duration_s=1.0, lag_steps=0)
    result = run_pass(ds, frozenset(range(2)), cfg)
    assert len(result.records) == 2
    assert len(result.trajectory.t) == 5
