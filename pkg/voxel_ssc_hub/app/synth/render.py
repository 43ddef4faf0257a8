"""
Ray-cast rendering of synthetic scenes: z-depth rasters and class-coloured
images from the same first-hit oracle.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from app.geometry.camera import MIN_DEPTH, Camera, CameraIntrinsics, CameraPose
from app.numerics.rng import make_numpy_rng
from app.synth.frames import INVALID_DEPTH, DepthRaster, ImageFrame
from app.synth.scene import Scene
from app.utils.errors import InvalidInputError

BACKGROUND_COLOR = (0.55, 0.70, 0.90)
# Colour of pixel = palette[class] / (1 + SHADING_RATE * depth)
SHADING_RATE = 0.05
# Shorter box overlaps along a ray count as touching, not hitting
GRAZE_TOLERANCE = 1e-9
CLASS_PALETTE = np.array([
    [0.00, 0.00, 0.00],
    [0.55, 0.27, 0.55],  # ground
    [0.96, 0.59, 0.39],
    [0.39, 0.59, 0.96],
    [0.98, 0.86, 0.20],
    [0.31, 0.71, 0.31],
    [0.90, 0.20, 0.20],
    [0.20, 0.85, 0.85],
    [0.75, 0.75, 0.75],
    [0.60, 0.40, 0.20],
    [0.95, 0.45, 0.75],
    [0.35, 0.35, 0.60],
    [0.70, 0.90, 0.45],
    [0.45, 0.20, 0.65],
    [0.95, 0.75, 0.55],
    [0.25, 0.55, 0.45],
    [0.85, 0.55, 0.10],
    [0.55, 0.55, 0.25],
    [0.15, 0.30, 0.80],
    [0.80, 0.15, 0.55],
])


@dataclass
class RayHits:
    """First hit per pixel: z-depth and object index (-1 for no hit)."""

    depth: np.ndarray
    object_index: np.ndarray


def pixel_rays(intrinsics: CameraIntrinsics, pose: CameraPose) -> np.ndarray:
    """Ego-frame ray directions for every pixel, scaled to unit camera z."""
    u, v = np.meshgrid(np.arange(intrinsics.width, dtype=np.float64),
                       np.arange(intrinsics.height, dtype=np.float64))
    directions = np.stack([(u - intrinsics.cu) / intrinsics.fu,
                           (v - intrinsics.cv) / intrinsics.fv,
                           np.ones_like(u)], axis=-1)
    return directions.reshape(-1, 3) @ pose.rotation


def intersect_box(origin: np.ndarray, directions: np.ndarray,
                  lower: Sequence[float], upper: Sequence[float]) -> np.ndarray:
    """
    Slab test of rays against the half-open box [lower, upper).

    Rays that only touch an edge or a face (zero-length overlap) miss, as
    do rays running inside the plane of an upper face.

    Returns:
        Entry parameter per ray, ``inf`` where the ray misses or starts
        inside the box
    """
    near = np.full(directions.shape[0], -np.inf)
    far = np.full(directions.shape[0], np.inf)
    for axis in range(3):
        d = directions[:, axis]
        lo = lower[axis] - origin[axis]
        hi = upper[axis] - origin[axis]
        parallel = np.abs(d) < 1e-15
        safe = np.where(parallel, 1.0, d)
        ta = lo / safe
        tb = hi / safe
        t_min = np.where(parallel, -np.inf, np.minimum(ta, tb))
        t_max = np.where(parallel, np.inf, np.maximum(ta, tb))
        if lo > 0 or hi <= 0:
            t_min = np.where(parallel, np.inf, t_min)
        near = np.maximum(near, t_min)
        far = np.minimum(far, t_max)
    hit = (far - near > GRAZE_TOLERANCE) & (near > MIN_DEPTH)
    return np.where(hit, near, np.inf)


def cast_rays(scene: Scene, camera: Camera) -> RayHits:
    """First-hit oracle shared by depth and image rendering."""
    intr = camera.intrinsics
    directions = pixel_rays(intr, camera.pose)
    origin = camera.pose.center
    best = np.full(directions.shape[0], np.inf)
    index = np.full(directions.shape[0], -1, dtype=np.int64)
    for i, obj in enumerate(scene.objects):
        t = intersect_box(origin, directions, obj.lower, obj.upper)
        closer = t < best
        best[closer] = t[closer]
        index[closer] = i
    shape = (intr.height, intr.width)
    # directions have unit camera-z, so the ray parameter is the z-depth
    depth = np.where(np.isfinite(best), best, INVALID_DEPTH)
    return RayHits(depth.reshape(shape), index.reshape(shape))


def render_depth(scene: Scene, camera: Camera, noise_level: float = 0.0,
                 noise_seed: int = 0) -> DepthRaster:
    """
    Render the z-depth raster seen by a camera.

    Args:
        scene: Scene to render
        camera: Viewing camera
        noise_level: sigma of the multiplicative Gaussian noise (1 + sigma * eps)
        noise_seed: Seed of the noise draw

    Returns:
        DepthRaster with INVALID_DEPTH where no object is hit
    """
    if noise_level < 0:
        raise InvalidInputError(f"depth noise level must be non-negative, got {noise_level}")
    hits = cast_rays(scene, camera)
    depth = hits.depth.copy()
    valid = hits.object_index >= 0
    if noise_level > 0:
        eps = make_numpy_rng(noise_seed).standard_normal(depth.shape)
        depth = np.where(valid, depth * (1.0 + noise_level * eps), INVALID_DEPTH)
        depth = np.where(depth > 0, depth, INVALID_DEPTH)
    return DepthRaster(depth, camera)


def render_image(scene: Scene, camera: Camera, t: int = 0) -> ImageFrame:
    """Colour each pixel by the class of its first hit, darkened with distance."""
    hits = cast_rays(scene, camera)
    height, width = hits.depth.shape
    pixels = np.empty((height, width, 3), dtype=np.float64)
    pixels[:] = BACKGROUND_COLOR
    valid = hits.object_index >= 0
    if np.any(valid):
        class_ids = np.array([obj.class_id for obj in scene.objects])[hits.object_index[valid]]
        shade = 1.0 / (1.0 + SHADING_RATE * hits.depth[valid])
        pixels[valid] = CLASS_PALETTE[class_ids % len(CLASS_PALETTE)] * shade[:, None]
    return ImageFrame(pixels, t, camera)


def frame_offsets(frames: int, temporal_mode: str = "online") -> List[int]:
    """
    Frame offsets ordered current-first.

    Online uses the current and previous frames (0, -1, -2, ...); offline
    alternates previous and future frames (0, -1, +1, -2, ...).
    """
    if frames < 1:
        raise InvalidInputError("at least one frame is required")
    if temporal_mode == "online":
        return [-k for k in range(frames)]
    if temporal_mode == "offline":
        offsets = [0]
        k = 1
        while len(offsets) < frames:
            offsets.append(-k)
            if len(offsets) < frames:
                offsets.append(k)
            k += 1
        return offsets
    raise InvalidInputError(f"unknown temporal mode '{temporal_mode}'")


def sequence_cameras(intrinsics: CameraIntrinsics, camera_height: float, frames: int,
                     frame_step: float, temporal_mode: str = "online") -> List[Tuple[int, Camera]]:
    """
    Cameras of a sequence moving along ego +x in fixed increments.

    Frame ``t`` sits at ``x = t * frame_step``; the current frame is at the
    ego origin. Poses are known exactly.
    """
    cameras = []
    for t in frame_offsets(frames, temporal_mode):
        pose = CameraPose.looking_forward((t * frame_step, 0.0, camera_height))
        cameras.append((t, Camera(intrinsics, pose)))
    return cameras
