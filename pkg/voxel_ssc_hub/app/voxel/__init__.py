"""
Voxel grids, voxelization and the voxel-grid file format.
"""

from .grid import EMPTY_LABEL, IGNORE_LABEL, OccupancyGrid, VoxelGrid
from .voxelizer import downsample_occupancy, voxelize_points
from .io import (
    decode_voxels,
    encode_voxels,
    load_occupancy,
    load_voxel_grid,
    save_occupancy,
    save_voxel_grid,
)

__all__ = [
    'EMPTY_LABEL',
    'IGNORE_LABEL',
    'OccupancyGrid',
    'VoxelGrid',
    'downsample_occupancy',
    'voxelize_points',
    'decode_voxels',
    'encode_voxels',
    'load_occupancy',
    'load_voxel_grid',
    'save_occupancy',
    'save_voxel_grid',
]
