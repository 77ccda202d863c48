import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualproj.geometry import (BoxObstacle, ContractError, DomainError, HeightField, PointCloud, Pose,
                               Scene, SensorMount, cast_rays, heightfield_sample, ray_cast, read_cloud,
                               wrap_angle, write_cloud)
from dualproj.terrain import TrackSpec, assemble_track, gen_module

from oracles import bilinear, ray_box


def flat(h=0.0, half=5.0, cell=0.05):
    n = int(round(2 * half / cell)) + 1
    return HeightField((-half, -half), cell, np.full((n, n), h))


# -- heightfield ----------------------------------------------------------------

def test_flat_field_samples_constant():
    hf = flat(0.0)
    for x, y in [(0, 0), (1.234, -3.3), (4.99, 4.99), (-5, -5)]:
        assert heightfield_sample(hf, x, y) == 0.0


def test_cell_centre_of_split_corners_is_half():
    hf = HeightField((0.0, 0.0), 1.0, np.array([[0.0, 0.0], [1.0, 1.0]]))
    assert heightfield_sample(hf, 0.5, 0.5) == 0.5


def test_stairs_module_matches_scalar_bilinear():
    patch = gen_module("stairs_up", 0.7, np.random.default_rng(3))
    h = np.repeat(patch.profile[:, None], 5, axis=1)
    hf = HeightField((0.0, -0.1), 0.05, h)
    step_len = patch.params["step_length"]
    hl = h.tolist()
    for k in range(4):
        edge = 1.0 + k * step_len
        for x in (edge - 0.03, edge - 1e-9, edge, edge + 0.01, edge + 0.049):
            for y in (-0.1, -0.02, 0.0, 0.07):
                assert heightfield_sample(hf, x, y) == pytest.approx(bilinear(hl, hf.origin, 0.05, x, y), abs=1e-12)


def test_off_footprint_query_is_domain_error():
    with pytest.raises(DomainError):
        heightfield_sample(flat(), 5.01, 0.0)


def test_invalid_heightfield_rejected():
    with pytest.raises(ContractError):
        HeightField((0, 0), 0.0, np.zeros((3, 3)))
    with pytest.raises(ContractError):
        HeightField((0, 0), 0.1, np.zeros((1, 3)))


@settings(max_examples=60, deadline=None)
@given(st.floats(-4.9, 4.9), st.floats(-4.9, 4.9), st.floats(1e-4, 0.05))
def test_sample_continuity(x, y, dx):
    rng = np.random.default_rng(0)
    h = rng.uniform(-0.5, 0.5, (41, 41))
    hf = HeightField((-5, -5), 0.25, h)
    grad = max(np.abs(np.diff(h, axis=0)).max(), np.abs(np.diff(h, axis=1)).max()) / 0.25
    a = heightfield_sample(hf, x, y)
    b = heightfield_sample(hf, min(x + dx, 5.0), y)
    assert abs(a - b) <= grad * dx * (1 + 1e-9) + 1e-12


# -- rays -------------------------------------------------------------------------

def test_vertical_ray_hits_flat_ground_at_unit_range():
    point, t = ray_cast(Scene(flat()), (0, 0, 1), (0, 0, -1), 5.0)
    assert t == pytest.approx(1.0, abs=1e-4)
    np.testing.assert_allclose(point, [0, 0, 0], atol=1e-4)


def test_parallel_ray_misses():
    assert ray_cast(Scene(flat()), (0, 0, 1), (1, 0, 0), 20.0) is None


def test_ray_into_box_matches_closed_form(backend):
    box = BoxObstacle((3.0, 0.5, 0.5), (0.5, 0.5, 0.5))
    o = np.array([0.0, 0.2, 0.7])
    d = np.array([1.0, 0.1, -0.05])
    d /= np.linalg.norm(d)
    t = cast_rays(Scene(None, [box]), o[None], d[None], 10.0, backend=backend)[0]
    assert t == pytest.approx(ray_box(o, d, box.lo, box.hi), abs=1e-4)


def test_origin_inside_box_hits_at_zero():
    box = BoxObstacle((0, 0, 0), (1, 1, 1))
    assert ray_cast(Scene(None, [box]), (0, 0, 0), (1, 0, 0), 3.0)[1] == 0.0


def test_non_unit_direction_rejected():
    with pytest.raises(ContractError):
        ray_cast(Scene(flat()), (0, 0, 1), (0, 0, -2), 5.0)
    with pytest.raises(ContractError):
        ray_cast(Scene(flat()), (0, 0, 1), (0, 0, -1), 0.0)


def test_sloped_ground_hit_within_tolerance(backend):
    n = 81
    xs = -2 + np.arange(n) * 0.05
    h = np.repeat((0.3 * xs)[:, None], n, axis=1)
    hf = HeightField((-2, -2), 0.05, h)
    d = np.array([1.0, 0.0, -1.0]) / math.sqrt(2)
    t = cast_rays(Scene(hf), np.array([[0.0, 0.0, 1.0]]), d[None], 10.0, backend=backend)[0]
    # z = 1 - s, ground = 0.3 s, s = t / sqrt(2)
    assert t == pytest.approx(math.sqrt(2) / 1.3, abs=1e-4)


_track = assemble_track(TrackSpec(modules=["stairs_up", "beam", "narrow_gate", "drop"], difficulty=0.8, seed=5))
_scene = _track.scene()


@settings(max_examples=80, deadline=None)
@given(st.floats(0.5, 20.0), st.floats(-1.5, 1.5), st.floats(0.0, 2 * math.pi),
       st.floats(-1.2, 0.3), st.floats(0.5, 15.0), st.floats(0.05, 0.95))
def test_range_monotone_in_max_range(x, y, az, el, big, frac):
    d = np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
    o = np.array([x, y, 1.5])
    t_big = cast_rays(_scene, o[None], d[None], big)[0]
    t_small = cast_rays(_scene, o[None], d[None], big * frac)[0]
    assert t_big <= big or math.isinf(t_big)
    if t_big <= big * frac:
        assert t_small == t_big
    else:
        assert math.isinf(t_small)


# -- frames and clouds -------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(*[st.floats(-50, 50)] * 3), min_size=1, max_size=20),
       st.tuples(*[st.floats(-100, 100)] * 3), st.floats(-10, 10))
def test_world_base_round_trip(pts, pos, yaw):
    pose = Pose(pos, yaw)
    cloud = PointCloud(pts, "world")
    back = cloud.world_to_base(pose).base_to_world(pose)
    np.testing.assert_allclose(back.points, cloud.points, atol=1e-9, rtol=0)


def test_sensor_base_round_trip_and_frame_tags():
    mount = SensorMount()
    c = PointCloud([[1.0, 2.0, 3.0]], "sensor")
    b = c.sensor_to_base(mount)
    assert b.frame == "base"
    np.testing.assert_allclose(b.points, [[1.0, -2.0, -2.55]])
    np.testing.assert_allclose(b.base_to_sensor(mount).points, c.points, atol=1e-12)
    with pytest.raises(ContractError):
        c.base_to_world(Pose())


def test_pose_yaw_wrapped():
    assert Pose(yaw=math.pi).yaw == -math.pi
    assert -math.pi <= Pose(yaw=7.0).yaw < math.pi
    assert wrap_angle(3 * math.pi) == -math.pi
    with pytest.raises(ContractError):
        Pose((0, 0, math.nan))


def test_cloud_rejects_non_finite():
    with pytest.raises(ContractError):
        PointCloud([[0, 0, math.inf]])
    with pytest.raises(ContractError):
        PointCloud([[0, 0, 0]], "map")


def test_box_requires_positive_extents():
    with pytest.raises(ContractError):
        BoxObstacle((0, 0, 0), (1, 0, 1))


def test_csv_round_trip_exact(tmp_path):
    pts = np.random.default_rng(1).normal(size=(50, 3))
    write_cloud(tmp_path / "c.csv", PointCloud(pts))
    assert (tmp_path / "c.csv").read_text().startswith("x,y,z\n")
    assert np.array_equal(read_cloud(tmp_path / "c.csv").points, pts)


def test_binary_layout_and_round_trip(tmp_path):
    pts = np.array([[1.0, 2.0, 3.0], [-0.5, 0.25, 8.0]])
    path = tmp_path / "c.bin"
    write_cloud(path, PointCloud(pts))
    raw = path.read_bytes()
    assert raw[:4] == b"DPPC"
    assert int.from_bytes(raw[4:8], "little") == 2
    assert len(raw) == 8 + 2 * 12
    assert np.array_equal(np.frombuffer(raw[8:], "<f4"), pts.astype("<f4").ravel())
    assert np.array_equal(read_cloud(path).points, pts)


def test_truncated_binary_rejected(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"DPPC" + (3).to_bytes(4, "little") + b"\0" * 12)
    with pytest.raises(ValueError):
        read_cloud(path)
