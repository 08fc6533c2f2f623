import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from kwnav.errors import FrameError
from kwnav.geometry import (Frame, FramedTransform, Line3, RigidTransform,
                            angle_between, compose, invert, quat_from_axis_angle,
                            transform_direction, transform_point)

FRAMES = list(Frame)


def homogeneous(xf: FramedTransform):
    """Independent oracle: scipy uses (x, y, z, w) ordering."""
    w, x, y, z = xf.xf.q
    M = np.eye(4)
    M[:3, :3] = Rotation.from_quat([x, y, z, w]).as_matrix()
    M[:3, 3] = xf.xf.t
    return M


def rand_ft(rng, frm, to):
    return FramedTransform(frm, to, RigidTransform.random(rng))


seeds = st.integers(0, 2 ** 32 - 1)


def test_identity_left_unit(rng):
    x = rand_ft(rng, "W", "H")
    out = compose(FramedTransform.identity("W"), x)
    assert out.frm is Frame.WORLD and out.to is Frame.HMD
    assert out.isclose(x, 1e-12)


def test_eq1_chain_matches_matrix_product(rng):
    f_tp, f_tm, f_mi = rand_ft(rng, "T", "P"), rand_ft(rng, "T", "M"), rand_ft(rng, "M", "I")
    out = compose(invert(f_tp), f_tm, f_mi)
    oracle = np.linalg.inv(homogeneous(f_tp)) @ homogeneous(f_tm) @ homogeneous(f_mi)
    assert (out.frm, out.to) == (Frame.PATIENT, Frame.IMAGE)
    np.testing.assert_allclose(out.matrix, oracle, atol=1e-12)


def test_compose_frame_mismatch_names_both_frames(rng):
    with pytest.raises(FrameError, match="inner frames H and P differ"):
        compose(rand_ft(rng, "W", "H"), rand_ft(rng, "P", "I"))


def test_invert_identity():
    i = FramedTransform.identity("W")
    assert invert(i).isclose(i, 0)


def test_invert_round_trip(rng):
    for _ in range(50):
        x = rand_ft(rng, "H", "C")
        assert compose(x, invert(x)).isclose(FramedTransform.identity("H"), 1e-12)
        assert invert(invert(x)).isclose(x, 1e-12)


def test_invert_pure_translation():
    x = FramedTransform("W", "H", RigidTransform([1, 0, 0, 0], [0, 0, 10]))
    np.testing.assert_array_equal(invert(x).xf.t, [0, 0, -10])


def test_transform_point_examples():
    assert np.allclose(transform_point(FramedTransform.identity("W"), [1, 2, 3]), [1, 2, 3])
    rz = FramedTransform("W", "H", RigidTransform(quat_from_axis_angle([0, 0, 1], 90), [0, 0, 0]))
    np.testing.assert_allclose(transform_point(rz, [1, 0, 0]), [0, 1, 0], atol=1e-15)


def test_transform_point_matches_oracle(rng):
    x = rand_ft(rng, "P", "I")
    p = rng.normal(size=(20, 3)) * 50
    hom = np.c_[p, np.ones(len(p))] @ homogeneous(x).T
    np.testing.assert_allclose(transform_point(x, p), hom[:, :3], atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_distances_preserved(seed):
    rng = np.random.default_rng(seed)
    x = rand_ft(rng, "W", "H")
    p = rng.normal(size=(8, 3)) * 100
    q = transform_point(x, p)
    d0 = np.linalg.norm(p[:, None] - p[None], axis=-1)
    d1 = np.linalg.norm(q[:, None] - q[None], axis=-1)
    np.testing.assert_allclose(d1, d0, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_associativity(seed):
    rng = np.random.default_rng(seed)
    a, b, c = rand_ft(rng, "W", "H"), rand_ft(rng, "H", "P"), rand_ft(rng, "P", "I")
    np.testing.assert_allclose(compose(compose(a, b), c).matrix,
                               compose(a, compose(b, c)).matrix, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(FRAMES), st.sampled_from(FRAMES), st.sampled_from(FRAMES),
       st.sampled_from(FRAMES))
def test_frame_safety(a, b, c, d):
    x = FramedTransform.identity(a, b)
    y = FramedTransform.identity(c, d)
    if b == c:
        assert compose(x, y).frm == a
    else:
        with pytest.raises(FrameError):
            compose(x, y)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_direction_norm_preserved(seed):
    rng = np.random.default_rng(seed)
    x = rand_ft(rng, "H", "C")
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    assert abs(np.linalg.norm(transform_direction(x, d)) - 1) < 1e-9


def test_rigid_invariants(rng):
    for _ in range(100):
        xf = RigidTransform.random(rng)
        assert abs(np.linalg.norm(xf.q) - 1) < 1e-9
        R = xf.rotation
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-9)
        assert abs(np.linalg.det(R) - 1) < 1e-9


def test_composition_stays_normalized(rng):
    x = FramedTransform.identity("W")
    step = FramedTransform("W", "W", RigidTransform.random(rng, 1.0))
    for _ in range(10000):
        x = compose(x, step)
    assert abs(np.linalg.norm(x.xf.q) - 1) < 1e-12


def test_angle_between():
    assert angle_between([0, 0, 1], [0, 0, 1]) == 0
    assert angle_between([1, 0, 0], [0, 1, 0]) == pytest.approx(90)
    assert angle_between([1, 0, 0], [-1, 0, 0]) == pytest.approx(180)
    assert angle_between([1, 0, 0], [-1, 0, 0], axis_mode=True) == pytest.approx(0)
    # not-quite-unit inputs are normalized
    assert angle_between([2, 0, 0], [0, 0, 3]) == pytest.approx(90)
    with pytest.raises(ValueError):
        angle_between([0, 0, 0], [1, 0, 0])


def test_literal_round_trip(rng):
    x = rand_ft(rng, "P", "I")
    lit = x.to_literal()
    assert set(lit) == {"from", "to", "q", "t"}
    assert FramedTransform.from_literal(lit).isclose(x, 1e-15)


def test_line_direction_normalized():
    line = Line3([0, 0, 0], [0, 0, 5])
    np.testing.assert_array_equal(line.direction, [0, 0, 1])
    with pytest.raises(ValueError):
        Line3([0, 0, 0], [0, 0, 0])
