"""CSV and JSON file formats.

All files are UTF-8, comma-separated, '.' decimal point, LF line endings,
angles in radians. Floats are emitted with 17 significant digits so a
write/read round trip reproduces every value exactly. Writes go to a
temporary file in the target directory followed by an atomic rename.

Headers (exact):

    imu.csv         t,fx,fy,fz,wx,wy,wz
    meas.csv        t,x,y,z,roll,pitch,yaw,marker_id
    truth.csv       t,px,py,pz,vx,vy,vz,roll,pitch,yaw
    labels_true.csv index,t,label,offset_x,offset_y,offset_z
    labels_<i>.csv  index,t,d,label
    trajectory_<i>.csv  t, 9 state columns, 9 diagonal-covariance columns
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .bmfls import PoseMeasurement
from .errors import CsvFormatError
from .gating import GatingRecord
from .iterative import SmoothedTrajectory
from .strapdown import ImuSample
from .synthdata import Trajectory

__all__ = [
    "IMU_HEADER",
    "MEAS_HEADER",
    "TRUTH_HEADER",
    "TRUE_LABELS_HEADER",
    "LABELS_HEADER",
    "TRAJECTORY_HEADER",
    "read_imu_csv",
    "read_meas_csv",
    "read_truth_csv",
    "read_true_labels_csv",
    "read_labels_csv",
    "read_trajectory_csv",
    "write_imu_csv",
    "write_meas_csv",
    "write_truth_csv",
    "write_true_labels_csv",
    "write_labels_csv",
    "write_trajectory_csv",
    "write_json",
]

IMU_HEADER = "t,fx,fy,fz,wx,wy,wz"
MEAS_HEADER = "t,x,y,z,roll,pitch,yaw,marker_id"
TRUTH_HEADER = "t,px,py,pz,vx,vy,vz,roll,pitch,yaw"
TRUE_LABELS_HEADER = "index,t,label,offset_x,offset_y,offset_z"
LABELS_HEADER = "index,t,d,label"
TRAJECTORY_HEADER = (
    "t,px,py,pz,vx,vy,vz,roll,pitch,yaw,"
    "var_px,var_py,var_pz,var_vx,var_vy,var_vz,var_roll,var_pitch,var_yaw"
)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_rows(path, header: str, n_fields: int):
    """Yield (line_no, fields) for each data row, validating the header."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CsvFormatError(path, 1, "empty file, header expected")
    if lines[0] != header:
        raise CsvFormatError(path, 1, f"expected header '{header}', got '{lines[0]}'")
    for line_no, line in enumerate(lines[1:], start=2):
        if line == "":
            continue
        fields = line.split(",")
        if len(fields) != n_fields:
            raise CsvFormatError(
                path, line_no, f"expected {n_fields} fields, got {len(fields)}"
            )
        yield line_no, fields


def _parse_floats(path, line_no: int, fields: list[str]) -> list[float]:
    out = []
    for text in fields:
        try:
            value = float(text)
        except ValueError as exc:
            raise CsvFormatError(path, line_no, f"not a number: '{text}'") from exc
        out.append(value)
    return out


def read_imu_csv(path) -> list[ImuSample]:
    """Parse an IMU stream; timestamps must be strictly increasing."""
    samples: list[ImuSample] = []
    last_t = None
    for line_no, fields in _read_rows(path, IMU_HEADER, 7):
        values = _parse_floats(path, line_no, fields)
        try:
            sample = ImuSample(values[0], values[1:4], values[4:7])
        except ValueError as exc:
            raise CsvFormatError(path, line_no, str(exc)) from exc
        if last_t is not None and sample.t <= last_t:
            raise CsvFormatError(
                path, line_no, f"timestamp {sample.t!r} not strictly increasing"
            )
        last_t = sample.t
        samples.append(sample)
    return samples


def read_meas_csv(path) -> list[PoseMeasurement]:
    """Parse pose measurements; angles are wrapped on load, times must be sorted.

    An empty (header-only) file is valid and yields an empty list.
    """
    meas: list[PoseMeasurement] = []
    last_t = None
    for line_no, fields in _read_rows(path, MEAS_HEADER, 8):
        values = _parse_floats(path, line_no, fields[:7])
        try:
            marker_id = int(fields[7])
        except ValueError as exc:
            raise CsvFormatError(path, line_no, f"not an integer: '{fields[7]}'") from exc
        try:
            z = PoseMeasurement(values[0], values[1:4], values[4:7], marker_id)
        except ValueError as exc:
            raise CsvFormatError(path, line_no, str(exc)) from exc
        if last_t is not None and z.t < last_t:
            raise CsvFormatError(path, line_no, f"timestamp {z.t!r} out of order")
        last_t = z.t
        meas.append(z)
    return meas


def read_truth_csv(path) -> Trajectory:
    """Parse a ground-truth trajectory file."""
    rows = []
    last_t = None
    for line_no, fields in _read_rows(path, TRUTH_HEADER, 10):
        values = _parse_floats(path, line_no, fields)
        if last_t is not None and values[0] <= last_t:
            raise CsvFormatError(
                path, line_no, f"timestamp {values[0]!r} not strictly increasing"
            )
        last_t = values[0]
        rows.append(values)
    data = np.array(rows, dtype=float).reshape(len(rows), 10)
    return Trajectory(data[:, 0], data[:, 1:4], data[:, 4:7], data[:, 7:10])


def read_true_labels_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse planted labels; returns (times, outlier_flags, offsets)."""
    times, flags, offsets = [], [], []
    for line_no, fields in _read_rows(path, TRUE_LABELS_HEADER, 6):
        try:
            index = int(fields[0])
        except ValueError as exc:
            raise CsvFormatError(path, line_no, f"not an integer: '{fields[0]}'") from exc
        if index != len(times):
            raise CsvFormatError(path, line_no, f"expected index {len(times)}, got {index}")
        values = _parse_floats(path, line_no, [fields[1]] + fields[3:6])
        if fields[2] not in ("inlier", "outlier"):
            raise CsvFormatError(path, line_no, f"label must be inlier/outlier, got '{fields[2]}'")
        times.append(values[0])
        flags.append(fields[2] == "outlier")
        offsets.append(values[1:4])
    return (
        np.array(times, dtype=float),
        np.array(flags, dtype=bool),
        np.array(offsets, dtype=float).reshape(len(times), 3),
    )


def read_labels_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Parse per-pass gate labels; returns (indices, times, distances, inlier flags)."""
    indices, times, dists, flags = [], [], [], []
    for line_no, fields in _read_rows(path, LABELS_HEADER, 4):
        try:
            indices.append(int(fields[0]))
        except ValueError as exc:
            raise CsvFormatError(path, line_no, f"not an integer: '{fields[0]}'") from exc
        values = _parse_floats(path, line_no, fields[1:3])
        if fields[3] not in ("inlier", "outlier"):
            raise CsvFormatError(path, line_no, f"label must be inlier/outlier, got '{fields[3]}'")
        times.append(values[0])
        dists.append(values[1])
        flags.append(fields[3] == "inlier")
    return (
        np.array(indices, dtype=int),
        np.array(times, dtype=float),
        np.array(dists, dtype=float),
        np.array(flags, dtype=bool),
    )


def read_trajectory_csv(path) -> SmoothedTrajectory:
    """Parse a smoothed trajectory file."""
    rows = []
    for line_no, fields in _read_rows(path, TRAJECTORY_HEADER, 19):
        rows.append(_parse_floats(path, line_no, fields))
    data = np.array(rows, dtype=float).reshape(len(rows), 19)
    return SmoothedTrajectory(data[:, 0], data[:, 1:10], data[:, 10:19])


def write_imu_csv(path, samples: list[ImuSample]) -> None:
    lines = [IMU_HEADER]
    for s in samples:
        lines.append(
            ",".join([_fmt(s.t)] + [_fmt(x) for x in s.f_b] + [_fmt(x) for x in s.w_b])
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def write_meas_csv(path, meas: list[PoseMeasurement]) -> None:
    lines = [MEAS_HEADER]
    for z in meas:
        lines.append(
            ",".join(
                [_fmt(z.t)]
                + [_fmt(x) for x in z.p]
                + [_fmt(x) for x in z.euler]
                + [str(z.marker_id)]
            )
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def write_truth_csv(path, traj: Trajectory) -> None:
    lines = [TRUTH_HEADER]
    for k in range(len(traj)):
        row = [traj.t[k], *traj.p[k], *traj.v[k], *traj.eul[k]]
        lines.append(",".join(_fmt(x) for x in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_true_labels_csv(path, times, flags, offsets) -> None:
    lines = [TRUE_LABELS_HEADER]
    for j in range(len(times)):
        label = "outlier" if flags[j] else "inlier"
        lines.append(
            f"{j},{_fmt(times[j])},{label},"
            + ",".join(_fmt(x) for x in offsets[j])
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def write_labels_csv(path, records: list[GatingRecord]) -> None:
    lines = [LABELS_HEADER]
    for rec in records:
        lines.append(f"{rec.meas_index},{_fmt(rec.t)},{_fmt(rec.d)},{rec.label}")
    _atomic_write(path, "\n".join(lines) + "\n")


def write_trajectory_csv(path, traj: SmoothedTrajectory) -> None:
    lines = [TRAJECTORY_HEADER]
    for k in range(len(traj)):
        row = [traj.t[k], *traj.x[k], *traj.p_diag[k]]
        lines.append(",".join(_fmt(x) for x in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
