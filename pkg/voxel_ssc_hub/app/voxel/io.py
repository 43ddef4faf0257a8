"""
Voxel-grid file format.

Layout (little-endian):

====== ======= =============================================
offset size    field
====== ======= =============================================
0      4       magic ``b"SSCV"``
4      2       format version (1)
6      2       label width in bits (1 or 8)
8      6       H, W, Z as u16
14     2       reserved (0)
16     24      lattice origin x, y, z as f64 (metres)
40     8       cell size as f64 (metres)
48     ...     labels in row-major (H, W, Z) order
====== ======= =============================================

1-bit labels are packed eight per byte, first cell in the least
significant bit; 8-bit labels use one byte per cell.
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from app.geometry.volume import Resolution, VolumeSpec
from app.utils.errors import DatasetIOError, InvalidInputError
from app.voxel.grid import OccupancyGrid, VoxelGrid

MAGIC = b"SSCV"
VERSION = 1
HEADER = struct.Struct("<4sHHHHHH4d")


@dataclass
class VoxelFile:
    """Decoded contents of a voxel-grid file."""

    labels: np.ndarray
    label_bits: int
    origin: Tuple[float, float, float]
    cell_size: float


def encode_voxels(labels: np.ndarray, label_bits: int, origin, cell_size: float) -> bytes:
    """Serialize a label array with its lattice geometry."""
    labels = np.asarray(labels)
    if labels.ndim != 3:
        raise InvalidInputError("voxel file payload must be a 3D grid")
    if label_bits == 1:
        payload = np.packbits(labels.astype(bool).reshape(-1), bitorder='little').tobytes()
    elif label_bits == 8:
        payload = labels.astype(np.uint8).reshape(-1).tobytes()
    else:
        raise InvalidInputError(f"label width must be 1 or 8 bits, got {label_bits}")
    header = HEADER.pack(MAGIC, VERSION, label_bits, *labels.shape, 0,
                         *(float(v) for v in origin), float(cell_size))
    return header + payload


def decode_voxels(blob: bytes) -> VoxelFile:
    """Parse bytes produced by :func:`encode_voxels`."""
    if len(blob) < HEADER.size:
        raise DatasetIOError("voxel file shorter than its header")
    magic, version, label_bits, h, w, z, _, ox, oy, oz, size = HEADER.unpack_from(blob)
    if magic != MAGIC or version != VERSION:
        raise DatasetIOError(f"not a voxel grid file (magic={magic!r}, version={version})")
    count = h * w * z
    body = np.frombuffer(blob, dtype=np.uint8, offset=HEADER.size)
    if label_bits == 1:
        if body.size != (count + 7) // 8:
            raise DatasetIOError("voxel file payload size does not match its header")
        labels = np.unpackbits(body, bitorder='little')[:count].astype(np.uint8)
    elif label_bits == 8:
        if body.size != count:
            raise DatasetIOError("voxel file payload size does not match its header")
        labels = body.copy()
    else:
        raise DatasetIOError(f"unsupported label width {label_bits}")
    return VoxelFile(labels.reshape(h, w, z), label_bits, (ox, oy, oz), size)


def _write(path: Union[str, Path], blob: bytes) -> None:
    try:
        Path(path).write_bytes(blob)
    except OSError as e:
        raise DatasetIOError(f"cannot write voxel file {path}: {e}") from e


def _read(path: Union[str, Path]) -> VoxelFile:
    try:
        return decode_voxels(Path(path).read_bytes())
    except OSError as e:
        raise DatasetIOError(f"cannot read voxel file {path}: {e}") from e


def save_voxel_grid(grid: VoxelGrid, path: Union[str, Path]) -> None:
    _write(path, encode_voxels(grid.labels, 8, grid.spec.origin, grid.spec.voxel_size))


def save_occupancy(grid: OccupancyGrid, path: Union[str, Path]) -> None:
    _write(path, encode_voxels(grid.bits, 1, grid.spec.origin, grid.spec.cell_size(grid.resolution)))


def _check_geometry(decoded: VoxelFile, spec: VolumeSpec, resolution: Resolution, path) -> None:
    if decoded.labels.shape != spec.dims_for(resolution):
        raise DatasetIOError(
            f"{path}: grid is {decoded.labels.shape}, volume expects {spec.dims_for(resolution)}")
    if (not np.allclose(decoded.origin, spec.origin)
            or not np.isclose(decoded.cell_size, spec.cell_size(resolution))):
        raise DatasetIOError(f"{path}: lattice geometry differs from the configured volume")


def load_voxel_grid(path: Union[str, Path], spec: VolumeSpec) -> VoxelGrid:
    decoded = _read(path)
    _check_geometry(decoded, spec, Resolution.OUTPUT, path)
    return VoxelGrid(spec, decoded.labels)


def load_occupancy(path: Union[str, Path], spec: VolumeSpec) -> OccupancyGrid:
    """Load a 1-bit grid; its dims decide between output and query lattice."""
    decoded = _read(path)
    resolution = Resolution.OUTPUT if decoded.labels.shape == spec.dims else Resolution.QUERY
    _check_geometry(decoded, spec, resolution, path)
    return OccupancyGrid(spec, resolution, decoded.labels.astype(bool))
