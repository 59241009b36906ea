import json
import math
import os

import numpy as np
import pytest

from lagnav import dataio
from lagnav.cli import main
from lagnav.config import RunConfig, config_from_dict, load_config
from lagnav.errors import ConfigError, CsvFormatError


def _write_config(tmp_path, **overrides):
    cfg = RunConfig(
        duration_s=overrides.pop("duration_s", 6.0),
        rng_seed=overrides.pop("rng_seed", 31),
        lag_steps=overrides.pop("lag_steps", 5),
        dataset_dir=str(tmp_path / "dataset"),
        output_dir=str(tmp_path / "out"),
        **overrides,
    )
    os.makedirs(tmp_path, exist_ok=True)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg.as_dict()))
    return path, cfg


# Configuration


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"rng_sead": 4})


def test_config_rejects_bad_ranges():
    with pytest.raises(ConfigError):
        config_from_dict({"outlier_rate": 1.5})
    with pytest.raises(ConfigError):
        config_from_dict({"chi2_p": 0.0})
    with pytest.raises(ConfigError):
        config_from_dict({"lag_steps": -1})
    with pytest.raises(ConfigError):
        config_from_dict({"r_sigma_pos_m": [0.1, 0.1]})
    with pytest.raises(ConfigError):
        config_from_dict({"max_iterations": 0})


def test_config_load_and_overrides(tmp_path):
    path, _ = _write_config(tmp_path)
    cfg = load_config(path)
    assert cfg.rng_seed == 31
    rc = main(["generate", "--config", str(path), "--seed", "77", "--lag", "3"])
    assert rc == 0


def test_config_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


# CSV readers


def test_read_imu_csv_valid(tmp_path):
    path = tmp_path / "imu.csv"
    path.write_text("t,fx,fy,fz,wx,wy,wz\n0.0,0,0,-9.8,0,0,0\n0.1,0,0,-9.8,0,0,0.1\n0.2,1,0,-9.8,0,0,0\n")
    samples = dataio.read_imu_csv(path)
    assert len(samples) == 3
    assert samples[2].f_b[0] == 1.0


def test_read_imu_csv_wrong_field_count(tmp_path):
    path = tmp_path / "imu.csv"
    path.write_text("t,fx,fy,fz,wx,wy,wz\n0.0,0,0,-9.8,0,0\n")
    with pytest.raises(CsvFormatError) as err:
        dataio.read_imu_csv(path)
    assert err.value.line_no == 2


def test_read_imu_csv_duplicate_timestamp(tmp_path):
    path = tmp_path / "imu.csv"
    path.write_text("t,fx,fy,fz,wx,wy,wz\n0.0,0,0,0,0,0,0\n0.0,0,0,0,0,0,0\n")
    with pytest.raises(CsvFormatError) as err:
        dataio.read_imu_csv(path)
    assert err.value.line_no == 3


def test_read_imu_csv_non_finite(tmp_path):
    path = tmp_path / "imu.csv"
    path.write_text("t,fx,fy,fz,wx,wy,wz\n0.0,nan,0,0,0,0,0\n")
    with pytest.raises(CsvFormatError):
        dataio.read_imu_csv(path)


def test_read_imu_csv_bad_header(tmp_path):
    path = tmp_path / "imu.csv"
    path.write_text("time,fx,fy,fz,wx,wy,wz\n")
    with pytest.raises(CsvFormatError) as err:
        dataio.read_imu_csv(path)
    assert err.value.line_no == 1


def test_read_meas_csv_wraps_angles(tmp_path):
    path = tmp_path / "meas.csv"
    path.write_text("t,x,y,z,roll,pitch,yaw,marker_id\n0.5,1,2,3,0,0,7.0,4\n")
    meas = dataio.read_meas_csv(path)
    assert meas[0].euler[2] == pytest.approx(7.0 - 2 * math.pi)
    assert meas[0].marker_id == 4


def test_read_meas_csv_empty_is_valid(tmp_path):
    path = tmp_path / "meas.csv"
    path.write_text("t,x,y,z,roll,pitch,yaw,marker_id\n")
    assert dataio.read_meas_csv(path) == []


def test_csv_round_trip_exact(tmp_path):
    from lagnav.strapdown import ImuSample

    rng = np.random.default_rng(8)
    samples = [
        ImuSample(t / 7.0 + rng.uniform(0, 1e-4), rng.normal(size=3), rng.normal(size=3))
        for t in range(50)
    ]
    path = tmp_path / "imu.csv"
    dataio.write_imu_csv(path, samples)
    back = dataio.read_imu_csv(path)
    for a, b in zip(samples, back):
        assert a.t == b.t
        assert np.array_equal(a.f_b, b.f_b)
        assert np.array_equal(a.w_b, b.w_b)


# generate


def test_generate_outputs(tmp_path):
    path, cfg = _write_config(tmp_path)
    assert main(["generate", "--config", str(path)]) == 0
    dsdir = cfg.dataset_dir
    imu_lines = open(os.path.join(dsdir, "imu.csv")).read().splitlines()
    meas_lines = open(os.path.join(dsdir, "meas.csv")).read().splitlines()
    truth_lines = open(os.path.join(dsdir, "truth.csv")).read().splitlines()
    assert imu_lines[0] == "t,fx,fy,fz,wx,wy,wz"
    assert meas_lines[0] == "t,x,y,z,roll,pitch,yaw,marker_id"
    assert truth_lines[0] == "t,px,py,pz,vx,vy,vz,roll,pitch,yaw"
    # duration * rate + 1 samples
    assert len(imu_lines) - 1 == int(round(cfg.duration_s * cfg.imu_rate_hz)) + 1
    assert len(meas_lines) - 1 == int(round(cfg.duration_s * cfg.cam_rate_hz)) + 1
    assert len(truth_lines) == len(imu_lines)
    labels = open(os.path.join(dsdir, "labels_true.csv")).read().splitlines()
    assert labels[0] == "index,t,label,offset_x,offset_y,offset_z"
    assert len(labels) == len(meas_lines)


def test_generate_deterministic_bytes(tmp_path):
    path_a, cfg_a = _write_config(tmp_path / "a")
    path_b, cfg_b = _write_config(tmp_path / "b")
    assert main(["generate", "--config", str(path_a)]) == 0
    assert main(["generate", "--config", str(path_b)]) == 0
    for name in ("imu.csv", "meas.csv", "truth.csv", "labels_true.csv"):
        a = open(os.path.join(cfg_a.dataset_dir, name), "rb").read()
        b = open(os.path.join(cfg_b.dataset_dir, name), "rb").read()
        assert a == b


# run


def test_run_converges_and_reports(tmp_path):
    path, cfg = _write_config(tmp_path, duration_s=8.0, outlier_rate=0.0)
    assert main(["generate", "--config", str(path)]) == 0
    rc = main(["run", "--config", str(path)])
    assert rc == 0
    report = json.load(open(os.path.join(cfg.output_dir, "report.json")))
    assert report["converged"] is True
    assert report["iterations_used"] == len(report["inlier_counts"])
    assert report["divergence"] is None
    assert report["metrics"] is not None
    # inlier counts agree with the label files line by line
    for i, count in enumerate(report["inlier_counts"], start=1):
        _, _, _, flags = dataio.read_labels_csv(
            os.path.join(cfg.output_dir, f"labels_{i}.csv")
        )
        assert int(flags.sum()) == count


def test_run_exit_2_on_iteration_cap(tmp_path):
    path, cfg = _write_config(tmp_path, duration_s=8.0, max_iterations=1)
    assert main(["generate", "--config", str(path)]) == 0
    assert main(["run", "--config", str(path)]) == 2
    report = json.load(open(os.path.join(cfg.output_dir, "report.json")))
    assert report["converged"] is False


def test_run_exit_1_on_missing_input(tmp_path):
    path, _ = _write_config(tmp_path)
    assert main(["run", "--config", str(path)]) == 1


def test_run_lag0_matches_reference_ekf(tmp_path):
    from oracles import ReferenceEkf
    from lagnav.strapdown import NavState

    path, cfg = _write_config(tmp_path, duration_s=4.0, outlier_rate=0.0, lag_steps=0)
    assert main(["generate", "--config", str(path)]) == 0
    assert main(["run", "--config", str(path)]) in (0, 2)
    traj = dataio.read_trajectory_csv(os.path.join(cfg.output_dir, "trajectory_1.csv"))

    imu = dataio.read_imu_csv(os.path.join(cfg.dataset_dir, "imu.csv"))
    meas = dataio.read_meas_csv(os.path.join(cfg.dataset_dir, "meas.csv"))
    t_imu = np.array([s.t for s in imu])
    by_epoch = {}
    for z in meas:
        e = int(np.argmin(np.abs(t_imu - z.t)))
        by_epoch.setdefault(e, []).append(z)

    ncfg = cfg.noise_config()
    ekf = ReferenceEkf(
        NavState(meas[0].p.copy(), np.zeros(3), meas[0].euler.copy()),
        cfg.p0_matrix(),
        ncfg.q_sigmas,
        ncfg.r_sigmas,
        cfg.gravity_model(),
    )
    states = []
    for z in by_epoch.get(0, []):
        ekf.update(z.p, z.euler)
    states.append(ekf.x.as_vector())
    for k in range(1, len(imu)):
        ekf.predict(imu[k], t_imu[k] - t_imu[k - 1])
        for z in by_epoch.get(k, []):
            ekf.update(z.p, z.euler)
        states.append(ekf.x.as_vector())
    assert np.abs(traj.x - np.array(states)).max() < 1e-10


# eval


def test_eval_zero_rmse_when_trajectory_is_truth(tmp_path):
    path, cfg = _write_config(tmp_path, duration_s=4.0)
    assert main(["generate", "--config", str(path)]) == 0
    truth = dataio.read_truth_csv(os.path.join(cfg.dataset_dir, "truth.csv"))
    _, flags, _ = dataio.read_true_labels_csv(
        os.path.join(cfg.dataset_dir, "labels_true.csv")
    )
    from lagnav.iterative import SmoothedTrajectory
    from lagnav.gating import GatingRecord

    os.makedirs(cfg.output_dir, exist_ok=True)
    x = np.hstack((truth.p, truth.v, truth.eul))
    dataio.write_trajectory_csv(
        os.path.join(cfg.output_dir, "trajectory_1.csv"),
        SmoothedTrajectory(truth.t, x, np.zeros_like(x)),
    )
    records = [
        GatingRecord(j, 0.0, 0.0, not bool(flags[j]), 1) for j in range(len(flags))
    ]
    dataio.write_labels_csv(os.path.join(cfg.output_dir, "labels_1.csv"), records)
    assert main(["eval", "--config", str(path)]) == 0
    metrics = json.load(open(os.path.join(cfg.output_dir, "metrics.json")))
    assert metrics["pos_rmse"] == [0.0]
    assert metrics["euler_rmse"] == [0.0]
    assert metrics["precision"] == [1.0]
    assert metrics["recall"] == [1.0]


def test_eval_missing_truth_is_clean_error(tmp_path):
    path, cfg = _write_config(tmp_path)
    os.makedirs(cfg.output_dir, exist_ok=True)
    assert main(["eval", "--config", str(path)]) == 1


def test_eval_metrics_keys_finite(tmp_path):
    path, cfg = _write_config(tmp_path, duration_s=8.0, outlier_rate=0.0)
    assert main(["generate", "--config", str(path)]) == 0
    assert main(["run", "--config", str(path)]) == 0
    assert main(["eval", "--config", str(path)]) == 0
    metrics = json.load(open(os.path.join(cfg.output_dir, "metrics.json")))
    for key in ("pos_rmse", "euler_rmse", "precision", "recall"):
        assert key in metrics
        assert all(np.isfinite(v) for v in metrics[key])
    # eval recomputes what run reported
    report = json.load(open(os.path.join(cfg.output_dir, "report.json")))
    assert np.allclose(metrics["pos_rmse"], report["metrics"]["pos_rmse"], rtol=1e-12)
