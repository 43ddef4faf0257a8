"""
Tests for voxel grids, voxelization, pooling and the voxel file format.
"""

import numpy as np
import pytest

from app.geometry import Resolution, VolumeSpec, voxel_centers, world_to_voxel
from app.utils.errors import DatasetIOError, InvalidInputError
from app.voxel import (
    IGNORE_LABEL,
    OccupancyGrid,
    VoxelGrid,
    decode_voxels,
    downsample_occupancy,
    encode_voxels,
    load_occupancy,
    load_voxel_grid,
    save_occupancy,
    save_voxel_grid,
    voxelize_points,
)
from app.voxel.io import HEADER


@pytest.fixture
def spec():
    return VolumeSpec((0.0, -3.2, 0.0), 0.4, (16, 16, 4), (8, 8, 2))


def test_voxelize_empty_and_single_point(spec):
    assert voxelize_points(np.zeros((0, 3)), spec).popcount == 0
    center = voxel_centers(spec, indices=np.array([[3, 5, 1]]))
    grid = voxelize_points(center, spec)
    assert grid.popcount == 1
    assert grid.bits[3, 5, 1]


def test_voxelize_matches_set_of_cells(spec):
    rng = np.random.default_rng(5)
    lower = np.asarray(spec.origin) - 1.0
    points = rng.uniform(lower, spec.upper_corner + 1.0, size=(10000, 3))
    grid = voxelize_points(points, spec)
    cells = {world_to_voxel(p, spec) for p in points} - {None}
    assert grid.popcount == len(cells)
    for cell in cells:
        assert grid.bits[cell]


def test_voxelize_is_monotone(spec):
    rng = np.random.default_rng(6)
    points = rng.uniform(spec.origin, spec.upper_corner, size=(300, 3))
    smaller = voxelize_points(points[:100], spec).bits
    larger = voxelize_points(points, spec).bits
    assert not np.any(smaller & ~larger)


def test_downsample_single_bit_and_zero(spec):
    assert downsample_occupancy(OccupancyGrid.empty(spec, Resolution.OUTPUT), spec).popcount == 0
    bits = np.zeros(spec.dims, dtype=bool)
    bits[0, 0, 0] = True
    pooled = downsample_occupancy(OccupancyGrid(spec, Resolution.OUTPUT, bits), spec)
    assert pooled.resolution == Resolution.QUERY
    assert pooled.popcount == 1 and pooled.bits[0, 0, 0]


def test_downsample_matches_brute_force(spec):
    rng = np.random.default_rng(7)
    bits = rng.random(spec.dims) < 0.05
    pooled = downsample_occupancy(OccupancyGrid(spec, Resolution.OUTPUT, bits), spec).bits
    f = spec.factor
    for i, j, k in np.ndindex(*spec.query_dims):
        block = bits[i * f:(i + 1) * f, j * f:(j + 1) * f, k * f:(k + 1) * f]
        assert pooled[i, j, k] == block.any()


def test_pooling_commutes_with_coarse_voxelization(spec):
    rng = np.random.default_rng(8)
    points = rng.uniform(spec.origin, spec.upper_corner, size=(200, 3))
    pooled = downsample_occupancy(voxelize_points(points, spec), spec)
    direct = voxelize_points(points, spec, Resolution.QUERY)
    assert pooled == direct


def test_downsample_rejects_query_grid(spec):
    with pytest.raises(InvalidInputError):
        downsample_occupancy(OccupancyGrid.empty(spec, Resolution.QUERY), spec)


def test_grid_validation(spec):
    with pytest.raises(InvalidInputError):
        OccupancyGrid(spec, Resolution.QUERY, np.zeros(spec.dims, dtype=bool))
    with pytest.raises(InvalidInputError):
        VoxelGrid(spec, np.zeros((2, 2, 2)))
    with pytest.raises(InvalidInputError):
        VoxelGrid(spec, np.full(spec.dims, 256))


def test_occupancy_ignores_unobserved_cells(spec):
    labels = np.zeros(spec.dims, dtype=np.uint8)
    labels[0, 0, 0] = 2
    labels[1, 1, 1] = IGNORE_LABEL
    occupancy = VoxelGrid(spec, labels).occupancy()
    assert occupancy.popcount == 1 and occupancy.bits[0, 0, 0]


def test_top_view_shows_highest_label(spec):
    labels = np.zeros(spec.dims, dtype=np.uint8)
    labels[2, 3, 0] = 1
    labels[2, 3, 2] = 3
    labels[4, 4, :] = IGNORE_LABEL
    labels[5, 5, 0] = IGNORE_LABEL
    labels[5, 5, 1] = 2
    top = VoxelGrid(spec, labels).top_view()
    assert top.shape == spec.dims[:2]
    assert top[2, 3] == 3
    assert top[4, 4] == IGNORE_LABEL
    assert top[5, 5] == 2
    assert top[0, 0] == 0


def test_voxel_file_header_and_payload(spec):
    labels = np.zeros(spec.dims, dtype=np.uint8)
    labels[0, 0, 0] = 1
    labels[0, 0, 3] = 1
    blob = encode_voxels(labels, 1, spec.origin, spec.voxel_size)
    assert HEADER.size == 48
    assert blob[:4] == b"SSCV"
    assert len(blob) == 48 + spec.cell_count(Resolution.OUTPUT) // 8
    assert blob[48] == 0b00001001
    decoded = decode_voxels(blob)
    assert np.array_equal(decoded.labels, labels)
    assert decoded.cell_size == spec.voxel_size


def test_voxel_files_round_trip(tmp_path, spec):
    rng = np.random.default_rng(9)
    labels = rng.integers(0, 5, spec.dims).astype(np.uint8)
    labels[0, 0, :] = IGNORE_LABEL
    grid = VoxelGrid(spec, labels)
    save_voxel_grid(grid, tmp_path / "gt.vox")
    assert load_voxel_grid(tmp_path / "gt.vox", spec) == grid

    coarse = OccupancyGrid(spec, Resolution.QUERY, rng.random(spec.query_dims) < 0.3)
    save_occupancy(coarse, tmp_path / "m_out.vox")
    assert load_occupancy(tmp_path / "m_out.vox", spec) == coarse


def test_voxel_file_errors(tmp_path, spec):
    with pytest.raises(DatasetIOError):
        decode_voxels(b"SSCV")
    with pytest.raises(DatasetIOError):
        decode_voxels(b"XXXX" + bytes(60))
    blob = encode_voxels(np.zeros(spec.dims, dtype=np.uint8), 8, spec.origin, spec.voxel_size)
    with pytest.raises(DatasetIOError):
        decode_voxels(blob[:-1])
    (tmp_path / "gt.vox").write_bytes(blob)
    other = VolumeSpec((0.0, 0.0, 0.0), 0.4, (16, 16, 4), (8, 8, 2))
    with pytest.raises(DatasetIOError):
        load_voxel_grid(tmp_path / "gt.vox", other)
    with pytest.raises(DatasetIOError):
        load_voxel_grid(tmp_path / "missing.vox", spec)
