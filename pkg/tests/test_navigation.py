import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kwnav.errors import FrameError, InputError, InsufficientDataError, NoIntersectionError
from kwnav.geometry import (FramedTransform, Line3, RigidTransform, angle_between,
                            quat_from_axis_angle)
from kwnav.metrics import placement_error
from kwnav.navigation import (TrajectoryPlan, error_indicator, read_point_cloud,
                              surface_marker, tool_axis_world, world_trajectory,
                              write_point_cloud)

I = RigidTransform.identity()
PLAN = TrajectoryPlan([10, 20, 30], [40, 60, -50])


def _chain(rng):
    return (FramedTransform("W", "H", RigidTransform.random(rng)),
            FramedTransform("H", "P", RigidTransform.random(rng)),
            FramedTransform("P", "I", RigidTransform.random(rng)))


def test_world_trajectory_identity():
    e, x, axis = world_trajectory(FramedTransform("W", "H", I), FramedTransform("H", "P", I),
                                  FramedTransform("P", "I", I), PLAN)
    np.testing.assert_allclose(e, PLAN.entry)
    diff = PLAN.entry - PLAN.exit
    np.testing.assert_allclose(axis.direction, diff / np.linalg.norm(diff), atol=1e-15)


def test_world_trajectory_matrix_oracle(rng):
    wh, hp, pi = _chain(rng)
    e, x, axis = world_trajectory(wh, hp, pi, PLAN)
    M = wh.xf.matrix @ hp.xf.matrix @ pi.xf.matrix
    np.testing.assert_allclose(e, (M @ np.append(PLAN.entry, 1))[:3], atol=1e-9)
    np.testing.assert_allclose(x, (M @ np.append(PLAN.exit, 1))[:3], atol=1e-9)
    assert axis.distance_to(x) < 1e-9


def test_world_trajectory_frame_mismatch(rng):
    wh, hp, pi = _chain(rng)
    with pytest.raises(FrameError):
        world_trajectory(wh, FramedTransform("P", "H", hp.xf), pi, PLAN)


def test_degenerate_plan():
    with pytest.raises(InputError):
        TrajectoryPlan([1, 2, 3], [1, 2, 3])


def test_plan_round_trip(tmp_path):
    import json
    p = tmp_path / "plan.json"
    p.write_text(json.dumps(PLAN.to_dict()))
    back = TrajectoryPlan.load(p)
    np.testing.assert_array_equal(back.entry, PLAN.entry)
    assert back.frame == PLAN.frame


def test_tool_axis(rng):
    shaft = Line3([0, 0, 0], [0, 0, 1])
    out = tool_axis_world(FramedTransform("W", "H", I), FramedTransform("H", "C", I), shaft)
    np.testing.assert_allclose(out.direction, shaft.direction)
    R = RigidTransform(quat_from_axis_angle([1, 0, 0], 90.0), [0, 0, 0])
    out = tool_axis_world(FramedTransform("W", "H", R), FramedTransform("H", "C", I), shaft)
    np.testing.assert_allclose(out.direction, [0, -1, 0], atol=1e-12)
    with pytest.raises(FrameError):
        tool_axis_world(FramedTransform("W", "H", I), FramedTransform("C", "H", I), shaft)


# -- indicator --------------------------------------------------------------------

ENTRY = np.array([0.0, 0.0, 100.0])
EXIT = np.array([0.0, 0.0, 0.0])


def test_indicator_aligned():
    g = error_indicator(Line3(ENTRY, [0, 0, -1]), ENTRY, EXIT)
    assert g.entry_radius == 0 and g.end_radius == 0
    assert g.entry_hatch is None and g.end_hatch is None


def test_indicator_parallel_offset():
    g = error_indicator(Line3(ENTRY + [3, 0, 0], [0, 0, 1]), ENTRY, EXIT)
    assert g.entry_radius == pytest.approx(3.0) and g.end_radius == pytest.approx(3.0)
    np.testing.assert_allclose(g.entry_hatch, g.end_hatch)
    np.testing.assert_allclose(g.entry_hatch, [-1, 0, 0])


def test_indicator_tilt_trig_oracle():
    theta = np.radians(2.0)
    tool = Line3(ENTRY, [np.sin(theta), 0, -np.cos(theta)])
    g = error_indicator(tool, ENTRY, EXIT)
    assert g.entry_radius < 1e-12
    assert abs(g.end_radius - 100 * np.tan(theta)) < 1e-9
    assert g.end_radius == pytest.approx(3.49, abs=5e-3)


def test_indicator_near_plane_guard():
    with pytest.raises(NoIntersectionError):
        error_indicator(Line3(ENTRY, [1, 0, 0.01]), ENTRY, EXIT)


def _random_line(rng, near):
    d = np.array([0, 0, -1.0]) + rng.normal(scale=0.2, size=3)
    return Line3(near + rng.normal(scale=5, size=3), d)


def test_indicator_rigid_invariance(rng):
    for _ in range(1000):
        tool = _random_line(rng, ENTRY)
        G = RigidTransform.random(rng)
        a = error_indicator(tool, ENTRY, EXIT)
        moved = Line3(G.apply(tool.point), G.apply_direction(tool.direction))
        b = error_indicator(moved, G.apply(ENTRY), G.apply(EXIT))
        assert abs(a.entry_radius - b.entry_radius) < 1e-9
        assert abs(a.end_radius - b.end_radius) < 1e-9
        pa = placement_error(ENTRY, EXIT, tool)
        pb = placement_error(G.apply(ENTRY), G.apply(EXIT), moved)
        np.testing.assert_allclose(pa.as_tuple(), pb.as_tuple(), atol=1e-9)


def test_indicator_zero_iff_coincident(rng):
    for _ in range(200):
        tool = _random_line(rng, ENTRY)
        g = error_indicator(tool, ENTRY, EXIT)
        coincident = tool.distance_to(ENTRY) < 1e-9 and tool.distance_to(EXIT) < 1e-9
        assert (g.entry_radius < 1e-9 and g.end_radius < 1e-9) == coincident


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_hatch_in_plane_and_pointing_home(seed):
    rng = np.random.default_rng(seed)
    tool = _random_line(rng, ENTRY)
    g = error_indicator(tool, ENTRY, EXIT)
    axis = np.array([0, 0, 1.0])
    for anchor, r, h in ((ENTRY, g.entry_radius, g.entry_hatch), (EXIT, g.end_radius, g.end_hatch)):
        assert abs(h @ axis) < 1e-9
        s = (anchor[2] - tool.point[2]) / tool.direction[2]
        np.testing.assert_allclose(tool.at(s) + r * h, anchor, atol=1e-9)


# -- surface marker ---------------------------------------------------------------

def _grid(n=41, step=1.0):
    xs = (np.arange(n) - n // 2) * step
    X, Y = np.meshgrid(xs, xs)
    return np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])


def test_surface_marker_plane():
    cloud = _grid()
    m = surface_marker(cloud, Line3([10, 10, 50], [0, 0, -1]))
    np.testing.assert_allclose(m.position, [10, 10, 0])
    np.testing.assert_allclose(m.normal, [0, 0, 1], atol=1e-12)
    assert any(np.array_equal(m.position, p) for p in cloud)


def test_surface_marker_normal_faces_tool_side():
    cloud = _grid()
    up = surface_marker(cloud, Line3([0, 0, 50], [0, 0, -1])).normal
    down = surface_marker(cloud, Line3([0, 0, 50], [0, 0, 1])).normal
    np.testing.assert_allclose(up, -down)


def test_surface_marker_noisy_normals(rng):
    base = _grid(61)
    ok = 0
    for _ in range(200):
        cloud = base + np.column_stack([np.zeros((len(base), 2)),
                                        rng.normal(scale=1.0, size=len(base))])
        n = surface_marker(cloud, Line3([0, 0, 50], [0, 0, -1]), k=500).normal
        ok += angle_between(n, [0, 0, 1]) < 2.0
    assert ok >= 0.95 * 200


def test_surface_marker_small_cloud(rng):
    cloud = _grid(10)
    m = surface_marker(cloud, Line3([0, 0, 5], [0, 0, -1]), k=500)
    assert np.linalg.norm(m.normal) == pytest.approx(1.0)


def test_surface_marker_order_invariant(rng):
    cloud = _grid(21)
    cloud[:, 2] = rng.normal(scale=0.5, size=len(cloud))
    axis = Line3([0.5, 0.5, 20], [0.1, 0, -1])
    a = surface_marker(cloud, axis, k=50)
    b = surface_marker(cloud[rng.permutation(len(cloud))], axis, k=50)
    np.testing.assert_array_equal(a.position, b.position)
    np.testing.assert_allclose(a.normal, b.normal, atol=1e-12)


def test_surface_marker_errors():
    with pytest.raises(InputError):
        surface_marker(np.zeros((0, 3)), Line3([0, 0, 0], [0, 0, 1]))
    with pytest.raises(InsufficientDataError):
        surface_marker(np.zeros((2, 3)) + [[0, 0, 0], [1, 0, 0]], Line3([0, 0, 0], [0, 0, 1]))


@pytest.mark.parametrize("name", ["cloud.csv", "cloud.ply"])
def test_point_cloud_round_trip(tmp_path, rng, name):
    P = rng.normal(size=(20, 3))
    write_point_cloud(tmp_path / name, P)
    np.testing.assert_array_equal(read_point_cloud(tmp_path / name), P)


def test_point_cloud_bad_header(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(InputError):
        read_point_cloud(p)
