"""
Dataset files for synthetic scenes.

Depth raster: header ``<4sIId`` (magic ``b"SSCD"``, width, height, invalid
sentinel) followed by row-major little-endian doubles. Images are binary
8-bit PPM. Scenes are JSON object lists.
"""

import json
import struct
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from app.geometry.camera import Camera
from app.synth.frames import INVALID_DEPTH, DepthRaster, ImageFrame
from app.synth.scene import Scene
from app.utils.errors import DatasetIOError

DEPTH_MAGIC = b"SSCD"
DEPTH_HEADER = struct.Struct("<4sIId")

PathLike = Union[str, Path]


def save_depth_raster(raster: DepthRaster, path: PathLike) -> None:
    height, width = raster.values.shape
    values = np.where(raster.valid, raster.values, INVALID_DEPTH).astype('<f8')
    blob = DEPTH_HEADER.pack(DEPTH_MAGIC, width, height, INVALID_DEPTH) + values.tobytes()
    try:
        Path(path).write_bytes(blob)
    except OSError as e:
        raise DatasetIOError(f"cannot write depth raster {path}: {e}") from e


def load_depth_raster(path: PathLike, camera: Camera) -> DepthRaster:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise DatasetIOError(f"cannot read depth raster {path}: {e}") from e
    if len(blob) < DEPTH_HEADER.size:
        raise DatasetIOError(f"{path}: truncated depth raster")
    magic, width, height, invalid = DEPTH_HEADER.unpack_from(blob)
    if magic != DEPTH_MAGIC:
        raise DatasetIOError(f"{path}: not a depth raster")
    values = np.frombuffer(blob, dtype='<f8', offset=DEPTH_HEADER.size)
    if values.size != width * height:
        raise DatasetIOError(f"{path}: payload does not match {width}x{height}")
    values = values.reshape(height, width).astype(np.float64)
    values[values == invalid] = INVALID_DEPTH
    return DepthRaster(values, camera)


def save_image(frame: ImageFrame, path: PathLike) -> None:
    data = np.clip(np.round(frame.pixels * 255.0), 0, 255).astype(np.uint8)
    try:
        Image.fromarray(data).save(path, format="PPM")
    except OSError as e:
        raise DatasetIOError(f"cannot write image {path}: {e}") from e


def load_image(path: PathLike, camera: Camera, t: int = 0) -> ImageFrame:
    try:
        with Image.open(path) as image:
            data = np.asarray(image.convert("RGB"), dtype=np.float64) / 255.0
    except OSError as e:
        raise DatasetIOError(f"cannot read image {path}: {e}") from e
    return ImageFrame(data, t, camera)


def save_scene(scene: Scene, path: PathLike) -> None:
    try:
        Path(path).write_text(json.dumps(scene.to_dict(), indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise DatasetIOError(f"cannot write scene {path}: {e}") from e


def load_scene(path: PathLike) -> Scene:
    try:
        return Scene.from_dict(json.loads(Path(path).read_text()))
    except OSError as e:
        raise DatasetIOError(f"cannot read scene {path}: {e}") from e
    except (KeyError, ValueError) as e:
        raise DatasetIOError(f"malformed scene file {path}: {e}") from e
