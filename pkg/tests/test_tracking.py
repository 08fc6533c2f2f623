import numpy as np
import pytest
from hypothesis import given, strategies as st

from kwnav.errors import InputError, OrderingError
from kwnav.geometry import (FramedTransform, RigidTransform, angle_between,
                            quat_from_axis_angle)
from kwnav.tracking import (KalmanParams, Nav, PoseSample, filter_stream, gate_navigation,
                            interpolate_pose, kalman_init, kalman_update,
                            predicted_covariance, read_pose_stream, write_pose_stream)


def _sample(t, q=(1, 0, 0, 0), p=(0, 0, 0), valid=True, frm="H", to="C"):
    return PoseSample(t, FramedTransform(frm, to, RigidTransform(q, p)), valid)


def test_zero_measurement_noise_tracks_measurement(rng):
    params = KalmanParams(meas_trans_std=0.0, meas_rot_std=0.0)
    state = kalman_init(_sample(0.0), params)
    for k in range(1, 5):
        G = RigidTransform.random(rng)
        s = PoseSample(k * 0.02, FramedTransform("H", "C", G))
        state = kalman_update(state, s, params)
        assert state.pose.xf.isclose(G, atol=1e-9)


def test_ordering_error():
    state = kalman_init(_sample(1.0))
    with pytest.raises(OrderingError):
        kalman_update(state, _sample(1.0))
    with pytest.raises(OrderingError):
        kalman_update(state, _sample(0.5))


def test_stationary_monte_carlo(rng):
    """200 noisy samples of a fixed pose: variance falls, estimate beats raw samples."""
    params = KalmanParams(accel_psd=1.0, meas_trans_std=0.5)
    truth = RigidTransform(quat_from_axis_angle([0, 0, 1], 30.0), [10, 20, 300])
    sig_r = np.radians(params.meas_rot_std)
    filt_err, raw_err = [], []
    for _ in range(50):
        state = None
        traces = []
        for k in range(200):
            noisy = RigidTransform(
                (truth @ RigidTransform.from_rotation_matrix(
                    _small_rot(rng, sig_r))).q,
                truth.t + rng.normal(scale=params.meas_trans_std, size=3))
            s = PoseSample(k / 60, FramedTransform("H", "C", noisy))
            state = kalman_init(s, params) if state is None else kalman_update(state, s, params)
            traces.append(np.trace(state.cov[:3, :3]))
            assert np.linalg.norm(state.q) == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(traces[5:60]) < 0)
        filt_err.append(np.linalg.norm(state.p - truth.t))
        raw_err.append(np.linalg.norm(noisy.t - truth.t))
    assert np.mean(filt_err) < 0.5 * np.mean(raw_err)


def _small_rot(rng, sigma):
    from kwnav.geometry import quat_from_rotvec, quat_to_matrix
    return quat_to_matrix(quat_from_rotvec(rng.normal(scale=sigma, size=3)))


def test_posterior_trace_not_above_prior(rng):
    state = kalman_init(_sample(0.0))
    for k in range(1, 50):
        s = PoseSample(k * 0.03, FramedTransform("H", "C", RigidTransform.random(rng, 5.0)))
        prior = predicted_covariance(state, s.t)
        state = kalman_update(state, s)
        assert np.trace(state.cov) <= np.trace(prior) + 1e-12
        np.testing.assert_allclose(state.cov, state.cov.T, atol=1e-9)
        assert np.min(np.linalg.eigvalsh(state.cov)) > -1e-9


def test_long_run_unit_quaternions(rng):
    samples = [PoseSample(k * 0.01, FramedTransform("H", "P", RigidTransform.random(rng)))
               for k in range(2000)]
    out = filter_stream(samples)
    norms = [np.linalg.norm(s.pose.xf.q) for s in out]
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)
    assert out[-1].pose.frm.value == "H" and out[-1].pose.to.value == "P"


def test_filter_stream_skips_invalid():
    samples = [_sample(0.0), _sample(0.1, valid=False), _sample(0.2)]
    assert [s.t for s in filter_stream(samples)] == [0.0, 0.2]


def test_invalid_sample_rejected():
    with pytest.raises(InputError):
        kalman_update(kalman_init(_sample(0.0)), _sample(1.0, valid=False))


# -- interpolation ----------------------------------------------------------------

def test_interpolate_endpoints(rng):
    a = PoseSample(1.0, FramedTransform("H", "C", RigidTransform.random(rng)))
    b = PoseSample(2.0, FramedTransform("H", "C", RigidTransform.random(rng)))
    assert interpolate_pose(a, b, 1.0) == a.pose.xf
    assert interpolate_pose(a, b, 2.0) == b.pose.xf


def test_interpolate_midpoint_45deg():
    a = _sample(0.0)
    b = _sample(1.0, q=quat_from_axis_angle([0, 0, 1], 90.0), p=(10, 0, 0))
    mid = interpolate_pose(a, b, 0.5)
    np.testing.assert_allclose(mid.q, quat_from_axis_angle([0, 0, 1], 45.0), atol=1e-12)
    np.testing.assert_allclose(mid.t, [5, 0, 0], atol=1e-12)


def test_interpolate_shorter_arc():
    a = _sample(0.0, q=quat_from_axis_angle([0, 0, 1], 170.0))
    b = _sample(1.0, q=-quat_from_axis_angle([0, 0, 1], -170.0))
    mid = interpolate_pose(a, b, 0.5)
    assert angle_between(mid.apply_direction([1, 0, 0]), [-1, 0, 0]) < 1e-9


def test_interpolate_symmetry(rng):
    """Swapping the poses on a mirrored timeline gives the same path."""
    pa, pb = (FramedTransform("H", "C", RigidTransform.random(rng)) for _ in range(2))
    a, b = PoseSample(0.2, pa), PoseSample(0.9, pb)
    a_rev, b_rev = PoseSample(0.2, pb), PoseSample(0.9, pa)
    for t in rng.uniform(0.2, 0.9, 20):
        fwd = interpolate_pose(a, b, t)
        assert fwd.isclose(interpolate_pose(a_rev, b_rev, a.t + b.t - t), atol=1e-9)
        assert fwd.isclose(interpolate_pose(b, a, t), atol=1e-9)


def test_interpolate_range_and_frames():
    with pytest.raises(ValueError):
        interpolate_pose(_sample(0.0), _sample(1.0), 1.5)
    with pytest.raises(InputError):
        interpolate_pose(_sample(0.0), _sample(1.0, to="P"), 0.5)


# -- gating -----------------------------------------------------------------------

def test_gating_examples():
    g = 0.3
    assert gate_navigation(5.0, 5.0, 5.0, g).state is Nav.ACTIVE
    assert gate_navigation(5.0, 5.0 - 2 * g, 5.0, g).state is Nav.SUSPENDED
    assert gate_navigation(5.0 - 0.5 * g, 5.0, 5.0, g).active
    with pytest.raises(ValueError):
        gate_navigation(0, 0, 0, 0.0)


@given(st.floats(0, 5), st.floats(0, 5), st.floats(0.01, 2))
def test_gating_monotone(s_tool, s_pat, grace):
    now = 10.0
    first = gate_navigation(now - s_tool, now - s_pat, now, grace)
    later = gate_navigation(now - s_tool - 0.1, now - s_pat, now, grace)
    if not first.active:
        assert not later.active
    assert first.active == (s_tool <= grace and s_pat <= grace) or abs(s_tool - grace) < 1e-9 \
        or abs(s_pat - grace) < 1e-9


# -- files ------------------------------------------------------------------------

def test_pose_csv_round_trip(tmp_path, rng):
    samples = [PoseSample(k * 0.1, FramedTransform("H", "C" if k % 2 else "P",
                                                   RigidTransform.random(rng)), k != 3)
               for k in range(8)]
    path = tmp_path / "poses.csv"
    write_pose_stream(path, samples)
    back = read_pose_stream(path)
    assert len(back) == 8
    for a, b in zip(samples, back):
        assert a.t == b.t and a.valid == b.valid and a.pose.isclose(b.pose, atol=0)


def test_pose_csv_ordering(tmp_path):
    path = tmp_path / "poses.csv"
    write_pose_stream(path, [_sample(0.1), _sample(0.2, to="P"), _sample(0.1)])
    with pytest.raises(OrderingError):
        read_pose_stream(path)
