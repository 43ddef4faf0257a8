"""
Point-cloud voxelization and occupancy pooling.
"""

import numpy as np

from app.geometry.volume import Resolution, VolumeSpec, points_to_voxels
from app.utils.errors import InvalidInputError
from app.voxel.grid import OccupancyGrid


def voxelize_points(points: np.ndarray, spec: VolumeSpec,
                    resolution: Resolution = Resolution.OUTPUT) -> OccupancyGrid:
    """
    Mark every cell hit by at least one point.

    Args:
        points: [N, 3] ego-frame points; points outside the volume are ignored
        spec: Volume specification
        resolution: Lattice to voxelize onto (output by default)

    Returns:
        OccupancyGrid at the requested resolution
    """
    indices, inside = points_to_voxels(points, spec, resolution)
    bits = np.zeros(spec.dims_for(resolution), dtype=bool)
    hit = indices[inside]
    bits[hit[:, 0], hit[:, 1], hit[:, 2]] = True
    return OccupancyGrid(spec, resolution, bits)


def downsample_occupancy(grid: OccupancyGrid, spec: VolumeSpec) -> OccupancyGrid:
    """Max-pool an output-resolution grid onto the query lattice."""
    if grid.resolution != Resolution.OUTPUT:
        raise InvalidInputError("downsampling expects an output-resolution grid")
    f = spec.factor
    h, w, z = spec.query_dims
    pooled = grid.bits.reshape(h, f, w, f, z, f).any(axis=(1, 3, 5))
    return OccupancyGrid(spec, Resolution.QUERY, pooled)
