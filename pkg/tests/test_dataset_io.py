import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _builders import random_state
from imupreint.dataset_io import (
    IMU_HEADER,
    DatasetFormatError,
    associate,
    format_seconds,
    matrix_to_quat,
    ns_to_seconds,
    quat_to_matrix,
    read_groundtruth,
    read_imu_log,
    read_imu_ns,
    read_trajectory,
    read_truth,
    seconds_to_ns,
    select_keyframes,
    sniff_truth_format,
    write_imu_log,
    write_trajectory,
)
from imupreint.so3 import mat_E
from imupreint.state import ImuSample, Trajectory

GT_HEADER = "#timestamp, p_x, p_y, p_z, q_w, q_x, q_y, q_z, v_x, v_y, v_z, b_w_x, b_w_y, b_w_z"
ORIGIN = 1403636579758555392


def write(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return path


def test_three_row_fixture(tmp_path):
    path = write(tmp_path / "imu.csv", [
        IMU_HEADER,
        "1403636579758555392,-0.099134701513277898,0.14730578886832138,0.02722713633111154,"
        "8.1476917083333333,-0.37592158333333331,-2.4026292499999999",
        "1403636579763555584,-0.099134701513277898,0.14032447186034408,0.029321531433504733,"
        "8.033280791666666,-0.40861041666666664,-2.4026292499999999",
        "1403636579768555520,-0.098436569812480182,0.12775810124598494,0.037699111843077518,"
        "7.8861810416666662,-0.42495483333333334,-2.4271461249999998",
    ])
    samples = read_imu_log(path, origin_ns=ORIGIN)
    assert len(samples) == 3
    assert samples[0].t == 0.0
    assert samples[1].t == 0.005000192
    assert samples[0].w[0] == float("-0.099134701513277898")
    assert samples[2].a[2] == float("-2.4271461249999998")
    stamps, values = read_imu_ns(path)
    assert stamps[2] == 1403636579768555520
    assert values.shape == (3, 6)


def test_short_row_names_line(tmp_path):
    path = write(tmp_path / "imu.csv", [IMU_HEADER, "1000,0,0,0,0,0,0", "2000,0,0,0,0,0"])
    with pytest.raises(DatasetFormatError, match=r"imu\.csv:3:.*6"):
        read_imu_log(path)


@pytest.mark.parametrize(
    "row, message",
    [("abc,0,0,0,0,0,0", "integer ns"), ("2000,0,x,0,0,0,0", "non-numeric"),
     ("2000,0,nan,0,0,0,0", "non-finite"), ("1000,0,0,0,0,0,0", "strictly increasing"),
     ("500,0,0,0,0,0,0", "strictly increasing")],
)
def test_bad_rows(tmp_path, row, message):
    path = write(tmp_path / "imu.csv", [IMU_HEADER, "1000,0,0,0,0,0,0", row])
    with pytest.raises(DatasetFormatError, match=message):
        read_imu_log(path)


def test_missing_header(tmp_path):
    path = write(tmp_path / "imu.csv", ["1000,0,0,0,0,0,0"])
    with pytest.raises(DatasetFormatError, match=":1:"):
        read_imu_log(path)


def test_nanosecond_conversion():
    ns = 1403636579758555392
    # relative to an origin the value is exact
    assert ns_to_seconds(ns, ns - 758555392) == 0.758555392
    # absolute: float64 cannot hold 1 ns at this magnitude, but the result is the nearest double
    assert abs(Fraction(ns_to_seconds(ns)) - Fraction(ns, 10**9)) <= Fraction(math.ulp(1.4e9)) / 2
    assert format_seconds(ns_to_seconds(ns, ORIGIN), ORIGIN) == "1403636579.758555392"


@given(st.integers(0, 10**12))
def test_ns_round_trip(offset):
    assert seconds_to_ns(ns_to_seconds(ORIGIN + offset, ORIGIN), ORIGIN) == ORIGIN + offset


def test_format_seconds():
    assert format_seconds(0.1) == "0.100000000"
    assert format_seconds(-1.5) == "-1.500000000"
    assert format_seconds(2.0, 5) == "2.000000005"


def test_identity_quaternion():
    np.testing.assert_array_equal(quat_to_matrix(1.0, 0.0, 0.0, 0.0), np.eye(3))


def test_quarter_turn_quaternion():
    h = math.sqrt(0.5)
    np.testing.assert_allclose(quat_to_matrix(h, 0.0, 0.0, h), mat_E([0, 0, math.pi / 2]), atol=1e-15)


def test_quaternion_matches_axis_angle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(0, math.pi)
        q = [math.cos(angle / 2), *(math.sin(angle / 2) * axis)]
        R = mat_E(angle * axis)
        np.testing.assert_allclose(quat_to_matrix(*q), R, atol=1e-14)
        np.testing.assert_allclose(quat_to_matrix(*matrix_to_quat(R)), R, atol=1e-14)


@pytest.mark.parametrize("angle", [0.0, math.pi, math.pi - 1e-9])
@pytest.mark.parametrize("axis", [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]])
def test_matrix_to_quat_branches(angle, axis):
    axis = np.asarray(axis, float) / np.linalg.norm(axis)
    R = mat_E(angle * axis)
    q = matrix_to_quat(R)
    assert q[0] >= 0
    assert abs(np.linalg.norm(q) - 1) < 1e-14
    np.testing.assert_allclose(quat_to_matrix(*q), R, atol=1e-14)


def _gt_row(ns, q, p=(0.0, 0.0, 0.0), v=(0.0, 0.0, 0.0)):
    return ",".join(str(x) for x in (ns, *p, *q, *v, 0.0, 0.0, 0.0))


def test_groundtruth_rows(tmp_path):
    h = math.sqrt(0.5)
    path = write(tmp_path / "gt.csv", [
        GT_HEADER,
        _gt_row(ORIGIN, (1.0, 0.0, 0.0, 0.0), p=(1.0, 2.0, 3.0), v=(0.1, 0.2, 0.3)),
        _gt_row(ORIGIN + 5_000_000, (h, 0.0, 0.0, h)),
        _gt_row(ORIGIN + 10_000_000, (1.0005, 0.0, 0.0, 0.0)),
    ])
    traj = read_groundtruth(path, origin_ns=ORIGIN)
    assert len(traj) == 3
    np.testing.assert_array_equal(traj[0].R, np.eye(3))
    np.testing.assert_array_equal(traj[0].p, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(traj[0].v, [0.1, 0.2, 0.3])
    np.testing.assert_allclose(traj[1].R, mat_E([0, 0, math.pi / 2]), atol=1e-15)
    np.testing.assert_allclose(traj[2].R, np.eye(3), atol=1e-15)
    assert traj[1].t == 0.005


def test_groundtruth_rejects_non_unit_quaternion(tmp_path):
    path = write(tmp_path / "gt.csv", [GT_HEADER, _gt_row(ORIGIN, (0.9, 0.0, 0.0, 0.0))])
    with pytest.raises(DatasetFormatError, match=r"gt\.csv:2:.*quaternion"):
        read_groundtruth(path)


def test_trajectory_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    states = [random_state(rng, t=0.005 * k + 1e-4) for k in range(20)]
    path = tmp_path / "traj.csv"
    write_trajectory(path, Trajectory(states), origin_ns=ORIGIN)
    back = read_trajectory(path, origin_ns=ORIGIN)
    assert len(back) == 20
    for a, b in zip(states, back):
        assert abs(a.t - b.t) <= 1e-12
        np.testing.assert_array_equal(a.p, b.p)
        np.testing.assert_array_equal(a.v, b.v)
        np.testing.assert_array_equal(a.R, b.R)
    first = path.read_text().splitlines()[1]
    assert first.startswith("1403636579.758655392, ")


def test_imu_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    samples = [ImuSample(0.005 * k, rng.normal(size=3), rng.normal(size=3) * 10) for k in range(50)]
    path = tmp_path / "imu.csv"
    write_imu_log(path, samples, origin_ns=ORIGIN)
    back = read_imu_log(path, origin_ns=ORIGIN)
    for a, b in zip(samples, back):
        assert abs(a.t - b.t) <= 1e-12
        np.testing.assert_array_equal(a.w, b.w)
        np.testing.assert_array_equal(a.a, b.a)


def test_sniff_truth_format(tmp_path):
    traj_path = tmp_path / "traj.csv"
    write_trajectory(traj_path, Trajectory([random_state(np.random.default_rng(3))]))
    gt_path = write(tmp_path / "gt.csv", [GT_HEADER, _gt_row(ORIGIN, (1.0, 0, 0, 0))])
    assert sniff_truth_format(traj_path) == "trajectory"
    assert sniff_truth_format(gt_path) == "euroc"
    assert len(read_truth(traj_path)) == 1
    assert len(read_truth(gt_path, ORIGIN)) == 1


def _stream(n, rate):
    return [ImuSample(k / rate, np.zeros(3), np.zeros(3)) for k in range(n)]


def test_keyframes_every_twentieth():
    assert select_keyframes(_stream(201, 200.0), 10.0) == list(range(0, 201, 20))


def test_keyframes_at_sample_rate():
    assert select_keyframes(_stream(50, 200.0), 200.0) == list(range(50))


def test_keyframes_degenerate_span():
    assert select_keyframes(_stream(3, 200.0), 1.0) == [0, 2]


def test_keyframes_keep_last_sample():
    kf = select_keyframes(_stream(205, 200.0), 10.0)
    assert kf[0] == 0 and kf[-1] == 204
    assert kf[:-1] == list(range(0, 201, 20))


def test_keyframes_with_jitter():
    rng = np.random.default_rng(4)
    times = np.arange(401) / 200.0 + rng.uniform(-4e-4, 4e-4, 401)
    times[0] = 0.0
    samples = [ImuSample(t, np.zeros(3), np.zeros(3)) for t in times]
    kf = select_keyframes(samples, 10.0)
    assert kf == list(range(0, 401, 20))


def test_keyframes_reject_bad_rates():
    with pytest.raises(ValueError):
        select_keyframes(_stream(10, 200.0), 0.0)
    with pytest.raises(ValueError, match="exceeds"):
        select_keyframes(_stream(10, 200.0), 400.0)


def test_associate():
    pairs, dropped = associate([0.0, 0.1, 0.2, 0.35], [0.0004, 0.0995, 0.2015, 0.3])
    assert pairs == [(0, 0), (1, 1)]
    assert dropped == 2


def test_associate_picks_nearest():
    pairs, dropped = associate([0.1], [0.0995, 0.1002])
    assert pairs == [(0, 1)] and dropped == 0
    assert associate([1.0], []) == ([], 1)
    assert associate([1.0, 2.0], [1.0005]) == ([(0, 0)], 1)
