"""
Synthetic-world oracle: procedural scenes, ray-cast depth and images.
"""

from .frames import INVALID_DEPTH, DepthRaster, ImageFrame
from .scene import GROUND_CLASS, ObjectTier, Scene, SceneObject, generate_scene, label_scene
from .render import (
    cast_rays,
    frame_offsets,
    render_depth,
    render_image,
    sequence_cameras,
)

__all__ = [
    'INVALID_DEPTH',
    'DepthRaster',
    'ImageFrame',
    'GROUND_CLASS',
    'ObjectTier',
    'Scene',
    'SceneObject',
    'generate_scene',
    'label_scene',
    'cast_rays',
    'frame_offsets',
    'render_depth',
    'render_image',
    'sequence_cameras',
]
