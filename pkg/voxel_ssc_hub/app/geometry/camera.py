"""
Pinhole camera model: depth back-projection and point projection.

Ego frame: x forward, y left, z up (metres). Camera frame: x right, y down,
z along the optical axis. A ``CameraPose`` maps ego coordinates to camera
coordinates, ``p_cam = R @ p_ego + t``. Integer pixel coordinates are pixel
centres, so the image covers ``[-0.5, width - 0.5) x [-0.5, height - 0.5)``.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from app.utils.errors import DatasetIOError, InvalidInputError

# Minimum camera-frame depth for a projection to count as valid (metres).
MIN_DEPTH = 1e-6
ORTHONORMAL_TOLERANCE = 1e-9

# Camera looking along ego +x with its image x-axis pointing to ego -y.
FORWARD_ROTATION = np.array([
    [0.0, -1.0, 0.0],
    [0.0, 0.0, -1.0],
    [1.0, 0.0, 0.0],
])


@dataclass(frozen=True)
class CameraIntrinsics:
    """Focal lengths and principal point in pixels, plus image extents."""

    fu: float
    fv: float
    cu: float
    cv: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fu > 0 and self.fv > 0):
            raise InvalidInputError(f"focal lengths must be positive, got fu={self.fu}, fv={self.fv}")
        if not (np.isfinite(self.cu) and np.isfinite(self.cv)):
            raise InvalidInputError("principal point must be finite")
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError(f"image extents must be positive, got {self.width}x{self.height}")

    def to_dict(self) -> Dict:
        return {'fu': self.fu, 'fv': self.fv, 'cu': self.cu, 'cv': self.cv,
                'width': self.width, 'height': self.height}

    @classmethod
    def from_dict(cls, data: Dict) -> "CameraIntrinsics":
        return cls(float(data['fu']), float(data['fv']), float(data['cu']), float(data['cv']),
                   int(data['width']), int(data['height']))


@dataclass(frozen=True, eq=False)
class CameraPose:
    """Rigid transform from ego coordinates to camera coordinates."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(translation))):
            raise InvalidInputError("camera pose must be finite")
        if np.max(np.abs(rotation.T @ rotation - np.eye(3))) > ORTHONORMAL_TOLERANCE:
            raise InvalidInputError("camera rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOLERANCE:
            raise InvalidInputError("camera rotation must have determinant +1")
        object.__setattr__(self, 'rotation', rotation)
        object.__setattr__(self, 'translation', translation)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CameraPose):
            return NotImplemented
        return (np.array_equal(self.rotation, other.rotation)
                and np.array_equal(self.translation, other.translation))

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def looking_forward(cls, position) -> "CameraPose":
        """Camera at an ego position with its optical axis along ego +x."""
        position = np.asarray(position, dtype=np.float64)
        return cls(FORWARD_ROTATION, -FORWARD_ROTATION @ position)

    @property
    def center(self) -> np.ndarray:
        """Camera centre in ego coordinates."""
        return -self.rotation.T @ self.translation

    def ego_to_camera(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def camera_to_ego(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.translation) @ self.rotation

    def to_dict(self) -> Dict:
        return {'rotation': self.rotation.reshape(-1).tolist(),
                'translation': self.translation.tolist()}

    @classmethod
    def from_dict(cls, data: Dict) -> "CameraPose":
        return cls(np.array(data['rotation'], dtype=np.float64).reshape(3, 3),
                   np.array(data['translation'], dtype=np.float64))


@dataclass(frozen=True)
class Camera:
    """Intrinsics and pose of one view."""

    intrinsics: CameraIntrinsics
    pose: CameraPose

    def to_dict(self) -> Dict:
        return {'intrinsics': self.intrinsics.to_dict(), 'pose': self.pose.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict) -> "Camera":
        return cls(CameraIntrinsics.from_dict(data['intrinsics']), CameraPose.from_dict(data['pose']))


def save_camera(camera: Camera, path: Union[str, Path]) -> None:
    """Write a camera description file (JSON, row-major rotation)."""
    try:
        Path(path).write_text(json.dumps(camera.to_dict(), indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise DatasetIOError(f"cannot write camera file {path}: {e}") from e


def load_camera(path: Union[str, Path]) -> Camera:
    """Read a camera description file."""
    try:
        return Camera.from_dict(json.loads(Path(path).read_text()))
    except OSError as e:
        raise DatasetIOError(f"cannot read camera file {path}: {e}") from e
    except (KeyError, ValueError) as e:
        raise DatasetIOError(f"malformed camera file {path}: {e}") from e


def back_project(depth, intrinsics: CameraIntrinsics, pose: CameraPose) -> np.ndarray:
    """
    Lift every valid depth pixel to an ego-frame point.

    Args:
        depth: DepthRaster or [height, width] array of z-depths; non-positive
            or non-finite entries are skipped
        intrinsics: Camera intrinsics matching the raster extents
        pose: Ego-to-camera pose

    Returns:
        [N, 3] points in row-major pixel order
    """
    values = np.asarray(getattr(depth, 'values', depth), dtype=np.float64)
    if values.shape != (intrinsics.height, intrinsics.width):
        raise InvalidInputError(
            f"depth raster is {values.shape[::-1]} but camera expects "
            f"{intrinsics.width}x{intrinsics.height}")

    with np.errstate(invalid='ignore'):
        valid = np.isfinite(values) & (values > 0)
    rows, cols = np.nonzero(valid)
    z = values[rows, cols]
    x = (cols - intrinsics.cu) * z / intrinsics.fu
    y = (rows - intrinsics.cv) * z / intrinsics.fv
    return pose.camera_to_ego(np.stack([x, y, z], axis=-1))


def project_points(points: np.ndarray, intrinsics: CameraIntrinsics,
                   pose: CameraPose) -> Tuple[np.ndarray, np.ndarray]:
    """
    Project ego-frame points into the image.

    Returns:
        (pixels [N, 2] as (u, v), valid [N]); a point is valid when it lies
        more than MIN_DEPTH in front of the camera and inside the image
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cam = pose.ego_to_camera(points)
    z = cam[:, 2]
    in_front = z > MIN_DEPTH
    safe_z = np.where(in_front, z, 1.0)
    u = intrinsics.fu * cam[:, 0] / safe_z + intrinsics.cu
    v = intrinsics.fv * cam[:, 1] / safe_z + intrinsics.cv
    inside = ((u >= -0.5) & (u < intrinsics.width - 0.5)
              & (v >= -0.5) & (v < intrinsics.height - 0.5))
    return np.stack([u, v], axis=-1), in_front & inside


def project(point, intrinsics: CameraIntrinsics, pose: CameraPose) -> Tuple[np.ndarray, bool]:
    """Project one ego-frame point; returns (pixel pair, validity flag)."""
    pixels, valid = project_points(np.asarray(point, dtype=np.float64).reshape(1, 3), intrinsics, pose)
    return pixels[0], bool(valid[0])
