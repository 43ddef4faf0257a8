"""
Sensor data carried between the renderer, stage-1 and the feature extractor.
"""

from dataclasses import dataclass

import numpy as np

from app.geometry.camera import Camera
from app.utils.errors import InvalidInputError

INVALID_DEPTH = -1.0


@dataclass(eq=False)
class DepthRaster:
    """Z-depth per pixel (metres); ``INVALID_DEPTH`` marks pixels without a hit."""

    values: np.ndarray
    camera: Camera

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        intr = self.camera.intrinsics
        if self.values.shape != (intr.height, intr.width):
            raise InvalidInputError(
                f"depth raster {self.values.shape} does not match camera {intr.height}x{intr.width}")

    @property
    def valid(self) -> np.ndarray:
        with np.errstate(invalid='ignore'):
            return np.isfinite(self.values) & (self.values > 0)


@dataclass(eq=False)
class ImageFrame:
    """RGB pixels in [0, 1] with the camera that observed them and a frame offset ``t``."""

    pixels: np.ndarray
    t: int
    camera: Camera

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        intr = self.camera.intrinsics
        if self.pixels.shape[:2] != (intr.height, intr.width) or self.pixels.ndim != 3:
            raise InvalidInputError(
                f"image {self.pixels.shape} does not match camera {intr.height}x{intr.width}")
        if not np.all(np.isfinite(self.pixels)):
            raise InvalidInputError("image pixels must be finite")
