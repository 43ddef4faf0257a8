"""
Tests for the pinhole camera model and the volume lattices.
"""

import numpy as np
import pytest

from app.geometry import (
    Camera,
    CameraIntrinsics,
    CameraPose,
    Resolution,
    VolumeSpec,
    back_project,
    load_camera,
    project,
    project_points,
    save_camera,
    voxel_center,
    voxel_centers,
    world_to_voxel,
)
from app.utils.errors import DatasetIOError, InvalidInputError


def _random_pose(rng: np.random.Generator) -> CameraPose:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return CameraPose(q, rng.normal(size=3))


def test_back_project_direct_substitution():
    intr = CameraIntrinsics(2.0, 3.0, 2.0, 3.0, 8, 8)
    depth = np.full((8, 8), -1.0)
    depth[6, 4] = 2.0
    points = back_project(depth, intr, CameraPose.identity())
    assert points.shape == (1, 3)
    assert np.allclose(points[0], [2.0, 2.0, 2.0], atol=1e-15)


def test_back_project_principal_point_and_invalid_pixels():
    intr = CameraIntrinsics(5.0, 5.0, 3.0, 2.0, 6, 4)
    depth = np.zeros((4, 6))
    assert back_project(depth, intr, CameraPose.identity()).shape == (0, 3)
    depth[2, 3] = 7.5
    depth[0, 0] = np.nan
    points = back_project(depth, intr, CameraPose.identity())
    assert np.allclose(points, [[0.0, 0.0, 7.5]])


def test_back_project_rejects_mismatched_raster(intrinsics):
    with pytest.raises(InvalidInputError):
        back_project(np.ones((3, 3)), intrinsics, CameraPose.identity())


def test_project_optical_axis_and_behind_camera():
    intr = CameraIntrinsics(10.0, 10.0, 4.0, 3.0, 8, 6)
    pixel, valid = project([0.0, 0.0, 5.0], intr, CameraPose.identity())
    assert valid
    assert np.allclose(pixel, [4.0, 3.0])
    _, valid = project([0.0, 0.0, -1.0], intr, CameraPose.identity())
    assert not valid


def test_project_requires_pixel_inside_image():
    intr = CameraIntrinsics(10.0, 10.0, 4.0, 3.0, 8, 6)
    _, valid = project([10.0, 0.0, 1.0], intr, CameraPose.identity())
    assert not valid


def test_projection_inverts_back_projection():
    """1000 random pixels and depths survive back-projection then projection."""
    rng = np.random.default_rng(0)
    intr = CameraIntrinsics(40.0, 35.0, 31.5, 23.5, 64, 48)
    for _ in range(5):
        pose = _random_pose(rng)
        depth = np.full((48, 64), -1.0)
        rows = rng.integers(0, 48, 200)
        cols = rng.integers(0, 64, 200)
        depth[rows, cols] = rng.uniform(0.5, 30.0, 200)
        points = back_project(depth, intr, pose)
        pixels, valid = project_points(points, intr, pose)
        expected_rows, expected_cols = np.nonzero(depth > 0)
        assert valid.all()
        assert np.max(np.abs(pixels - np.stack([expected_cols, expected_rows], axis=-1))) < 1e-9


def test_projection_invariant_to_rigid_motion():
    rng = np.random.default_rng(1)
    intr = CameraIntrinsics(30.0, 30.0, 16.0, 12.0, 32, 24)
    pose = CameraPose.looking_forward([0.0, 0.0, 1.0])
    points = rng.uniform([2.0, -2.0, 0.0], [10.0, 2.0, 2.0], size=(50, 3))
    motion = _random_pose(rng)
    moved_points = motion.ego_to_camera(points)
    # p' = M p, pose' = pose ∘ M^-1
    moved_pose = CameraPose(pose.rotation @ motion.rotation.T,
                            pose.translation - pose.rotation @ motion.rotation.T @ motion.translation)
    before, valid_before = project_points(points, intr, pose)
    after, valid_after = project_points(moved_points, intr, moved_pose)
    assert np.array_equal(valid_before, valid_after)
    assert np.allclose(before, after, atol=1e-9)


def test_looking_forward_camera_sees_ahead():
    intr = CameraIntrinsics(32.0, 32.0, 32.0, 24.0, 64, 48)
    pose = CameraPose.looking_forward([0.0, 0.0, 1.6])
    assert np.allclose(pose.center, [0.0, 0.0, 1.6])
    pixel, valid = project([10.0, 0.0, 1.6], intr, pose)
    assert valid and np.allclose(pixel, [32.0, 24.0])
    # ego +y (left) appears at smaller u, ego +z (up) at smaller v
    left, _ = project([10.0, 1.0, 1.6], intr, pose)
    up, _ = project([10.0, 0.0, 2.6], intr, pose)
    assert left[0] < 32.0 and up[1] < 24.0
    _, valid = project([-5.0, 0.0, 1.6], intr, pose)
    assert not valid


def test_camera_pose_validation():
    with pytest.raises(InvalidInputError):
        CameraPose(np.diag([1.0, 1.0, 2.0]), np.zeros(3))
    with pytest.raises(InvalidInputError):
        CameraPose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(InvalidInputError):
        CameraIntrinsics(0.0, 1.0, 0.0, 0.0, 4, 4)


def test_camera_file_round_trip(tmp_path, intrinsics):
    camera = Camera(intrinsics, CameraPose.looking_forward([0.0, 0.5, 1.2]))
    save_camera(camera, tmp_path / "camera.json")
    assert load_camera(tmp_path / "camera.json") == camera
    (tmp_path / "broken.json").write_text("{\"intrinsics\": {}}")
    with pytest.raises(DatasetIOError):
        load_camera(tmp_path / "broken.json")
    with pytest.raises(DatasetIOError):
        load_camera(tmp_path / "missing.json")


def test_voxel_center_examples():
    spec = VolumeSpec((0.0, 0.0, 0.0), 0.2, (8, 8, 4), (4, 4, 2))
    assert np.allclose(voxel_center((0, 0, 0), spec), [0.1, 0.1, 0.1])
    assert np.allclose(voxel_center((0, 0, 0), spec, Resolution.QUERY), [0.2, 0.2, 0.2])
    with pytest.raises(InvalidInputError):
        voxel_center((8, 0, 0), spec)


def test_world_to_voxel_round_trip_on_every_cell():
    spec = VolumeSpec((-1.0, 2.0, 0.5), 0.25, (8, 8, 4), (4, 4, 2))
    centers = voxel_centers(spec)
    for index in np.ndindex(*spec.dims):
        assert world_to_voxel(centers[index], spec) == index
    assert world_to_voxel(spec.origin, spec) == (0, 0, 0)
    assert world_to_voxel(spec.upper_corner, spec) is None
    assert world_to_voxel([-1.01, 2.5, 1.0], spec) is None


def test_world_to_voxel_lands_within_half_a_cell():
    spec = VolumeSpec((0.0, -3.2, 0.0), 0.4, (16, 16, 4), (8, 8, 2))
    rng = np.random.default_rng(3)
    points = np.asarray(spec.origin) + rng.random((1000, 3)) * spec.extent
    for point in points:
        index = world_to_voxel(point, spec)
        assert np.all(np.abs(voxel_center(index, spec) - point) <= 0.5 * spec.voxel_size + 1e-12)


def test_volume_spec_validation():
    with pytest.raises(InvalidInputError):
        VolumeSpec((0, 0, 0), 0.0, (8, 8, 4), (4, 4, 2))
    with pytest.raises(InvalidInputError):
        VolumeSpec((0, 0, 0), 0.2, (8, 8, 4), (3, 4, 2))
    with pytest.raises(InvalidInputError):
        VolumeSpec((0, 0, 0), 0.2, (8, 8, 4), (4, 4, 4))
    spec = VolumeSpec((0, 0, 0), 0.2, (8, 8, 4), (4, 4, 2))
    assert spec.factor == 2
    assert spec.cell_count(Resolution.QUERY) == 32
    assert VolumeSpec.from_dict(spec.to_dict()) == spec
