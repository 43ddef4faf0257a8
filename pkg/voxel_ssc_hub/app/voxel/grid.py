"""
Voxel grid containers: binary occupancy and semantic labels.
"""

from dataclasses import dataclass

import numpy as np

from app.geometry.volume import Resolution, VolumeSpec
from app.utils.errors import InvalidInputError

EMPTY_LABEL = 0
IGNORE_LABEL = 255


@dataclass(eq=False)
class OccupancyGrid:
    """One bit per cell of the output or query lattice."""

    spec: VolumeSpec
    resolution: Resolution
    bits: np.ndarray

    def __post_init__(self):
        self.resolution = Resolution(self.resolution)
        self.bits = np.asarray(self.bits, dtype=bool)
        expected = self.spec.dims_for(self.resolution)
        if self.bits.shape != expected:
            raise InvalidInputError(
                f"{self.resolution.value} occupancy must be {expected}, got {self.bits.shape}")

    @classmethod
    def empty(cls, spec: VolumeSpec, resolution: Resolution) -> "OccupancyGrid":
        return cls(spec, resolution, np.zeros(spec.dims_for(resolution), dtype=bool))

    @classmethod
    def full(cls, spec: VolumeSpec, resolution: Resolution) -> "OccupancyGrid":
        return cls(spec, resolution, np.ones(spec.dims_for(resolution), dtype=bool))

    @property
    def popcount(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (self.spec == other.spec and self.resolution == other.resolution
                and np.array_equal(self.bits, other.bits))


@dataclass(eq=False)
class VoxelGrid:
    """
    Semantic labels on the output lattice.

    Label 0 is empty, 1..M are semantic classes and 255 marks unobserved
    voxels that losses and metrics skip.
    """

    spec: VolumeSpec
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.shape != self.spec.dims:
            raise InvalidInputError(f"label grid must be {self.spec.dims}, got {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() > IGNORE_LABEL):
            raise InvalidInputError("labels must fit in one byte")
        self.labels = labels.astype(np.uint8)

    @classmethod
    def empty(cls, spec: VolumeSpec) -> "VoxelGrid":
        return cls(spec, np.zeros(spec.dims, dtype=np.uint8))

    @property
    def observed(self) -> np.ndarray:
        return self.labels != IGNORE_LABEL

    def occupancy(self) -> OccupancyGrid:
        """Any semantic class counts as occupied; ignored voxels count as free."""
        bits = (self.labels != EMPTY_LABEL) & self.observed
        return OccupancyGrid(self.spec, Resolution.OUTPUT, bits)

    def top_view(self) -> np.ndarray:
        """
        Bird's-eye label map of shape (H, W).

        Each column shows its highest semantic label; empty columns show 0
        and columns with nothing but ignored voxels show 255.
        """
        labels = self.labels
        semantic = (labels != EMPTY_LABEL) & (labels != IGNORE_LABEL)
        top = np.zeros(labels.shape[:2], dtype=np.uint8)
        top[(labels == IGNORE_LABEL).all(axis=2)] = IGNORE_LABEL
        highest = labels.shape[2] - 1 - np.argmax(semantic[:, :, ::-1], axis=2)
        has_class = semantic.any(axis=2)
        rows, cols = np.nonzero(has_class)
        top[rows, cols] = labels[rows, cols, highest[rows, cols]]
        return top

    def __eq__(self, other) -> bool:
        if not isinstance(other, VoxelGrid):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.labels, other.labels)
