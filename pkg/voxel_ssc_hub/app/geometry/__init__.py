"""
Camera geometry and volume lattices.
"""

from .camera import (
    Camera,
    CameraIntrinsics,
    CameraPose,
    MIN_DEPTH,
    back_project,
    load_camera,
    project,
    project_points,
    save_camera,
)
from .volume import (
    Resolution,
    VolumeSpec,
    points_to_voxels,
    voxel_center,
    voxel_centers,
    world_to_voxel,
)

__all__ = [
    'Camera',
    'CameraIntrinsics',
    'CameraPose',
    'MIN_DEPTH',
    'back_project',
    'load_camera',
    'project',
    'project_points',
    'save_camera',
    'Resolution',
    'VolumeSpec',
    'points_to_voxels',
    'voxel_center',
    'voxel_centers',
    'world_to_voxel',
]
