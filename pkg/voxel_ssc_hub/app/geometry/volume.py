"""
Volume specification and voxel-index <-> metric-coordinate mapping.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from app.utils.errors import InvalidInputError

Index3 = Tuple[int, int, int]


class Resolution(str, Enum):
    """Which lattice of the volume an index refers to."""

    OUTPUT = "output"
    QUERY = "query"


@dataclass(frozen=True)
class VolumeSpec:
    """
    Metric volume in the ego frame.

    ``dims`` is the output lattice (H, W, Z) with cubic cells of
    ``voxel_size`` metres; ``query_dims`` is the coarser query lattice
    (h, w, z), sharing one integer downsample factor on every axis.
    """

    origin: Tuple[float, float, float]
    voxel_size: float
    dims: Index3
    query_dims: Index3

    def __post_init__(self):
        origin = tuple(float(v) for v in self.origin)
        dims = tuple(int(v) for v in self.dims)
        query_dims = tuple(int(v) for v in self.query_dims)
        if len(origin) != 3 or len(dims) != 3 or len(query_dims) != 3:
            raise InvalidInputError("volume origin and dims must be 3-vectors")
        if not np.all(np.isfinite(origin)):
            raise InvalidInputError("volume origin must be finite")
        if not (np.isfinite(self.voxel_size) and self.voxel_size > 0):
            raise InvalidInputError(f"voxel size must be positive, got {self.voxel_size}")
        if min(dims) <= 0 or min(query_dims) <= 0:
            raise InvalidInputError(f"volume dims must be positive, got {dims} / {query_dims}")
        if any(d % q for d, q in zip(dims, query_dims)):
            raise InvalidInputError(f"query dims {query_dims} must divide output dims {dims}")
        factors = {d // q for d, q in zip(dims, query_dims)}
        if len(factors) != 1:
            raise InvalidInputError(f"downsample factor must match on every axis, got {sorted(factors)}")
        object.__setattr__(self, 'origin', origin)
        object.__setattr__(self, 'voxel_size', float(self.voxel_size))
        object.__setattr__(self, 'dims', dims)
        object.__setattr__(self, 'query_dims', query_dims)

    @property
    def factor(self) -> int:
        return self.dims[0] // self.query_dims[0]

    def dims_for(self, resolution: Resolution) -> Index3:
        return self.query_dims if Resolution(resolution) == Resolution.QUERY else self.dims

    def cell_size(self, resolution: Resolution) -> float:
        if Resolution(resolution) == Resolution.QUERY:
            return self.voxel_size * self.factor
        return self.voxel_size

    def cell_count(self, resolution: Resolution) -> int:
        return int(np.prod(self.dims_for(resolution)))

    @property
    def extent(self) -> np.ndarray:
        """Edge lengths of the volume in metres."""
        return np.asarray(self.dims, dtype=np.float64) * self.voxel_size

    @property
    def upper_corner(self) -> np.ndarray:
        return np.asarray(self.origin) + self.extent

    def to_dict(self) -> Dict:
        return {'origin': list(self.origin), 'voxel_size': self.voxel_size,
                'dims': list(self.dims), 'query_dims': list(self.query_dims)}

    @classmethod
    def from_dict(cls, data: Dict) -> "VolumeSpec":
        return cls(tuple(data['origin']), float(data['voxel_size']),
                   tuple(data['dims']), tuple(data['query_dims']))


def voxel_center(index: Sequence[int], spec: VolumeSpec,
                 resolution: Resolution = Resolution.OUTPUT) -> np.ndarray:
    """
    Metric centre of one cell.

    Args:
        index: (i, j, k) within the chosen lattice
        spec: Volume specification
        resolution: Output or query lattice

    Returns:
        3-vector in metres (ego frame)
    """
    dims = spec.dims_for(resolution)
    index = tuple(int(v) for v in index)
    if len(index) != 3 or any(not 0 <= i < d for i, d in zip(index, dims)):
        raise InvalidInputError(f"voxel index {index} outside {Resolution(resolution).value} dims {dims}")
    return np.asarray(spec.origin) + (np.asarray(index, dtype=np.float64) + 0.5) * spec.cell_size(resolution)


def voxel_centers(spec: VolumeSpec, resolution: Resolution = Resolution.OUTPUT,
                  indices: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Centres of many cells.

    Returns:
        [N, 3] for explicit ``indices`` [N, 3], otherwise the full lattice
        as [d0, d1, d2, 3]
    """
    size = spec.cell_size(resolution)
    origin = np.asarray(spec.origin)
    if indices is not None:
        return origin + (np.asarray(indices, dtype=np.float64) + 0.5) * size
    grids = np.meshgrid(*[np.arange(n, dtype=np.float64) for n in spec.dims_for(resolution)],
                        indexing='ij')
    return origin + (np.stack(grids, axis=-1) + 0.5) * size


def points_to_voxels(points: np.ndarray, spec: VolumeSpec,
                     resolution: Resolution = Resolution.OUTPUT) -> Tuple[np.ndarray, np.ndarray]:
    """
    Floor-map points onto a lattice.

    Returns:
        (indices [N, 3] int64, inside [N]); indices of outside points are
        meaningless and must be masked with ``inside``
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    dims = np.asarray(spec.dims_for(resolution))
    scaled = (points - np.asarray(spec.origin)) / spec.cell_size(resolution)
    inside = np.all((scaled >= 0) & (scaled < dims), axis=-1)
    indices = np.zeros(points.shape, dtype=np.int64)
    indices[inside] = np.floor(scaled[inside]).astype(np.int64)
    return indices, inside


def world_to_voxel(point: Sequence[float], spec: VolumeSpec,
                   resolution: Resolution = Resolution.OUTPUT) -> Optional[Tuple[int, int, int]]:
    """Cell containing a point (floor semantics), or None outside the volume."""
    indices, inside = points_to_voxels(np.asarray(point, dtype=np.float64).reshape(1, 3), spec, resolution)
    if not inside[0]:
        return None
    return tuple(int(v) for v in indices[0])
