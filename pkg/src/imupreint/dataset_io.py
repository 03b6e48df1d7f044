"""Reading EuRoC-style logs and the package's own exchange files.

Input schemas (comma separated, one ``#`` header line):

* IMU log: ``timestamp[ns], wx, wy, wz [rad/s], ax, ay, az [m/s^2]``
* ground truth: ``timestamp[ns], px, py, pz, qw, qx, qy, qz, vx, vy, vz, ...``
  (trailing columns such as the EuRoC bias estimates are ignored)

Exchange schema written here:

* trajectory: ``t, px, py, pz, vx, vy, vz, r11, ..., r33`` with ``t`` in
  seconds printed to 9 decimals and the rotation row-major.

Nanosecond stamps do not fit float64 seconds to 1 ns at epoch-scale values,
so readers subtract an integer ``origin_ns`` before converting. The writers
take the same origin back and print the stamp exactly.
"""
from __future__ import annotations

import logging
import os
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .state import ImuSample, NavState, Trajectory

log = logging.getLogger(__name__)

IMU_HEADER = ("#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],w_RS_S_z [rad s^-1],"
              "a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]")
TRAJECTORY_HEADER = "# t, px, py, pz, vx, vy, vz, r11, r12, r13, r21, r22, r23, r31, r32, r33"

# ground-truth stamps further than this from a query are not matched
MATCH_TOL = 1e-3
QUAT_NORM_TOL = 1e-3


class DatasetFormatError(ValueError):
    pass


def ns_to_seconds(ns: int, origin_ns: int = 0) -> float:
    return (int(ns) - int(origin_ns)) / 1e9


def seconds_to_ns(t: float, origin_ns: int = 0) -> int:
    """Nearest integer nanosecond stamp for ``t`` seconds after ``origin_ns``."""
    return int(origin_ns) + int(round(Fraction(t) * 10**9))


def format_seconds(t: float, origin_ns: int = 0) -> str:
    """``origin_ns + t`` as decimal seconds with exactly 9 fractional digits."""
    ns = seconds_to_ns(t, origin_ns)
    sign = "-" if ns < 0 else ""
    ns = abs(ns)
    return f"{sign}{ns // 10**9}.{ns % 10**9:09d}"


def _fmt(x: float) -> str:
    return repr(float(x))


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows(path, min_fields: int, max_fields: int | None):
    """Yield (line_no, fields) for data rows; validates the header and field counts."""
    path = Path(path)
    with path.open() as f:
        header = f.readline()
        if not header.startswith("#"):
            raise DatasetFormatError(f"{path}:1: expected a '#' header line")
        n_header = len(header.lstrip("#").split(","))
        if n_header < min_fields or (max_fields is not None and n_header > max_fields):
            raise DatasetFormatError(f"{path}:1: header has {n_header} columns")
        for line_no, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            fields = [x.strip() for x in line.split(",")]
            if len(fields) < min_fields or (max_fields is not None and len(fields) > max_fields):
                raise DatasetFormatError(
                    f"{path}:{line_no}: expected {min_fields} fields, got {len(fields)}")
            yield line_no, fields


def _parse_floats(path, line_no: int, fields: Sequence[str]) -> np.ndarray:
    try:
        out = np.array([float(x) for x in fields])
    except ValueError:
        raise DatasetFormatError(f"{path}:{line_no}: non-numeric field") from None
    if not np.all(np.isfinite(out)):
        raise DatasetFormatError(f"{path}:{line_no}: non-finite value")
    return out


def _parse_ns(path, line_no: int, field: str) -> int:
    try:
        return int(field)
    except ValueError:
        raise DatasetFormatError(f"{path}:{line_no}: timestamp {field!r} is not integer ns") from None


def _check_increasing(path, stamps: Sequence[int], line_nos: Sequence[int]) -> None:
    for k in range(1, len(stamps)):
        if stamps[k] <= stamps[k - 1]:
            raise DatasetFormatError(f"{path}:{line_nos[k]}: timestamp not strictly increasing")


def read_imu_ns(path) -> tuple[list[int], np.ndarray]:
    """Raw integer stamps and an (N, 6) array of ``wx, wy, wz, ax, ay, az``."""
    stamps, values, line_nos = [], [], []
    for line_no, fields in _rows(path, 7, 7):
        stamps.append(_parse_ns(path, line_no, fields[0]))
        values.append(_parse_floats(path, line_no, fields[1:]))
        line_nos.append(line_no)
    _check_increasing(path, stamps, line_nos)
    log.info("read %d IMU rows from %s", len(stamps), path)
    return stamps, np.array(values).reshape(-1, 6)


def read_imu_log(path, origin_ns: int = 0) -> list[ImuSample]:
    stamps, values = read_imu_ns(path)
    return [ImuSample(ns_to_seconds(ns, origin_ns), row[0:3], row[3:6])
            for ns, row in zip(stamps, values)]


def write_imu_log(path, samples: Iterable[ImuSample], origin_ns: int = 0) -> None:
    lines = [IMU_HEADER]
    for s in samples:
        ns = seconds_to_ns(s.t, origin_ns)
        lines.append(",".join([str(ns)] + [_fmt(x) for x in (*s.w, *s.a)]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def quat_to_matrix(qw: float, qx: float, qy: float, qz: float) -> np.ndarray:
    """Rotation matrix of a unit Hamilton quaternion (w first)."""
    return np.array([
        [1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qw * qz), 2 * (qx * qz + qw * qy)],
        [2 * (qx * qy + qw * qz), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qw * qx)],
        [2 * (qx * qz - qw * qy), 2 * (qy * qz + qw * qx), 1 - 2 * (qx * qx + qy * qy)],
    ])


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Unit quaternion ``[w, x, y, z]`` with ``w >= 0`` (Shepperd's method)."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    return q if q[0] >= 0 else -q


def read_groundtruth(path, origin_ns: int = 0) -> Trajectory:
    """EuRoC ground truth: position, unit quaternion (w first), velocity."""
    states, stamps, line_nos = [], [], []
    for line_no, fields in _rows(path, 11, None):
        ns = _parse_ns(path, line_no, fields[0])
        vals = _parse_floats(path, line_no, fields[1:11])
        q = vals[3:7]
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > QUAT_NORM_TOL:
            raise DatasetFormatError(f"{path}:{line_no}: quaternion norm {norm:.6f} is not unit")
        q = q / norm
        states.append(NavState(ns_to_seconds(ns, origin_ns), vals[0:3], vals[7:10], quat_to_matrix(*q)))
        stamps.append(ns)
        line_nos.append(line_no)
    _check_increasing(path, stamps, line_nos)
    log.info("read %d ground-truth rows from %s", len(states), path)
    return Trajectory(states)


def write_trajectory(path, traj: Iterable[NavState], origin_ns: int = 0) -> None:
    lines = [TRAJECTORY_HEADER]
    for s in traj:
        vals = [*s.p, *s.v, *s.R.reshape(9)]
        lines.append(", ".join([format_seconds(s.t, origin_ns)] + [_fmt(x) for x in vals]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_trajectory(path, origin_ns: int = 0) -> Trajectory:
    """Read the trajectory exchange format; ``origin_ns`` is subtracted from the stamps."""
    states, times, line_nos = [], [], []
    origin = Fraction(int(origin_ns), 10**9)
    for line_no, fields in _rows(path, 16, 16):
        vals = _parse_floats(path, line_no, fields)
        # exact decimal parse of the stamp before the origin shift
        t = float(Fraction(fields[0]) - origin)
        states.append(NavState(t, vals[1:4], vals[4:7], vals[7:16].reshape(3, 3)))
        times.append(Fraction(fields[0]))
        line_nos.append(line_no)
    _check_increasing(path, times, line_nos)
    return Trajectory(states)


def sniff_truth_format(path) -> str:
    """``"trajectory"`` for the exchange format, ``"euroc"`` for EuRoC ground truth."""
    with Path(path).open() as f:
        header = f.readline()
    first = header.lstrip("#").split(",")[0].strip().lower()
    return "trajectory" if first == "t" else "euroc"


def read_truth(path, origin_ns: int = 0) -> Trajectory:
    if sniff_truth_format(path) == "trajectory":
        return read_trajectory(path, origin_ns)
    return read_groundtruth(path, origin_ns)


def select_keyframes(samples: Sequence[ImuSample], rate_hz: float) -> list[int]:
    """Sample indices nearest a uniform ``1/rate_hz`` grid from the first stamp.

    The first and last samples are always included.
    """
    if not rate_hz > 0:
        raise ValueError(f"keyframe rate must be positive, got {rate_hz}")
    n = len(samples)
    if n == 0:
        return []
    times = np.array([s.t for s in samples])
    if n > 1:
        sample_rate = (n - 1) / (times[-1] - times[0])
        if rate_hz > sample_rate * (1 + 1e-6):
            raise ValueError(f"keyframe rate {rate_hz} Hz exceeds the sample rate {sample_rate:.6g} Hz")
    span = times[-1] - times[0]
    # small slack so grid points landing exactly on the last stamp are kept
    m = int(np.floor(span * rate_hz + 1e-9))
    grid = times[0] + np.arange(m + 1) / rate_hz
    idx = np.searchsorted(times, grid)
    idx = np.clip(idx, 1, n - 1) if n > 1 else np.zeros_like(idx)
    left = idx - 1 if n > 1 else idx
    choose_left = np.abs(grid - times[left]) <= np.abs(times[idx] - grid)
    nearest = np.where(choose_left, left, idx)
    out = sorted(set(int(i) for i in nearest) | {0, n - 1})
    return out


def associate(query_times, ref_times, tol: float = MATCH_TOL) -> tuple[list[tuple[int, int]], int]:
    """Nearest-neighbour match of each query stamp to a reference stamp.

    Returns ``(pairs, dropped)``: index pairs ``(i_query, i_ref)`` within
    ``tol`` seconds, and how many queries found no match.
    """
    q = np.asarray(query_times, dtype=float)
    r = np.asarray(ref_times, dtype=float)
    if len(r) == 0:
        return [], len(q)
    idx = np.clip(np.searchsorted(r, q), 1, max(len(r) - 1, 1)) if len(r) > 1 else np.zeros(len(q), int)
    pairs = []
    for i, j in enumerate(idx):
        cands = [j] if len(r) == 1 else [j - 1, j]
        best = min(cands, key=lambda c: abs(r[c] - q[i]))
        if abs(r[best] - q[i]) <= tol:
            pairs.append((i, int(best)))
    return pairs, len(q) - len(pairs)
