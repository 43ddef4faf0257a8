"""
Procedural voxel scenes with semantic ground truth.

A scene is a ground slab plus axis-aligned boxes snapped to the voxel
lattice. Box sizes come in three tiers (pole, car and building scale) so
that small objects and layout both show up in the metrics.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from app.geometry.volume import Resolution, VolumeSpec, voxel_centers
from app.numerics.rng import make_numpy_rng
from app.utils.errors import InvalidInputError
from app.voxel.grid import EMPTY_LABEL, VoxelGrid

GROUND_CLASS = 1


class ObjectTier(str, Enum):
    GROUND = "ground"
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


# (x cells, y cells, z cells) inclusive ranges per tier
TIER_SIZES = {
    ObjectTier.SMALL: ((1, 2), (1, 2), (3, 6)),
    ObjectTier.MEDIUM: ((3, 5), (2, 3), (2, 3)),
    ObjectTier.LARGE: ((4, 8), (4, 8), (4, 7)),
}
OBJECT_TIERS = (ObjectTier.SMALL, ObjectTier.MEDIUM, ObjectTier.LARGE)


@dataclass(frozen=True)
class SceneObject:
    """Axis-aligned box [lower, upper) carrying one semantic class."""

    class_id: int
    lower: Tuple[float, float, float]
    upper: Tuple[float, float, float]
    tier: ObjectTier

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return np.all((points >= np.asarray(self.lower)) & (points < np.asarray(self.upper)), axis=-1)

    def to_dict(self) -> Dict:
        return {'class_id': self.class_id, 'lower': list(self.lower),
                'upper': list(self.upper), 'tier': self.tier.value}

    @classmethod
    def from_dict(cls, data: Dict) -> "SceneObject":
        return cls(int(data['class_id']), tuple(float(v) for v in data['lower']),
                   tuple(float(v) for v in data['upper']), ObjectTier(data['tier']))


@dataclass
class Scene:
    """Objects inside one volume, reproducible from ``seed``."""

    spec: VolumeSpec
    class_count: int
    seed: int
    objects: List[SceneObject] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {'spec': self.spec.to_dict(), 'class_count': self.class_count,
                'seed': self.seed, 'objects': [o.to_dict() for o in self.objects]}

    @classmethod
    def from_dict(cls, data: Dict) -> "Scene":
        return cls(VolumeSpec.from_dict(data['spec']), int(data['class_count']), int(data['seed']),
                   [SceneObject.from_dict(o) for o in data['objects']])


def tier_for_class(class_id: int) -> ObjectTier:
    """Object classes cycle through the size tiers starting at class 2."""
    if class_id == GROUND_CLASS:
        return ObjectTier.GROUND
    return OBJECT_TIERS[(class_id - 2) % len(OBJECT_TIERS)]


def _lattice_box(spec: VolumeSpec, start: Sequence[int], size: Sequence[int]) -> Tuple[tuple, tuple]:
    origin = np.asarray(spec.origin)
    lower = origin + np.asarray(start, dtype=np.float64) * spec.voxel_size
    upper = origin + (np.asarray(start) + np.asarray(size)).astype(np.float64) * spec.voxel_size
    return tuple(float(v) for v in lower), tuple(float(v) for v in upper)


def _ground_slab(spec: VolumeSpec) -> SceneObject:
    H, W, _ = spec.dims
    lower, upper = _lattice_box(spec, (0, 0, 0), (H, W, 1))
    return SceneObject(GROUND_CLASS, lower, upper, ObjectTier.GROUND)


def _random_object(rng: np.random.Generator, spec: VolumeSpec, class_id: int) -> SceneObject:
    H, W, Z = spec.dims
    tier = tier_for_class(class_id)
    limits = (max(H - 2, 1), W, max(Z - 1, 1))
    size = [min(int(rng.integers(lo, hi + 1)), limit)
            for (lo, hi), limit in zip(TIER_SIZES[tier], limits)]
    start_x = int(rng.integers(min(2, H - size[0]), H - size[0] + 1))
    start_y = int(rng.integers(0, W - size[1] + 1))
    start_z = 1 if Z > 1 else 0
    lower, upper = _lattice_box(spec, (start_x, start_y, start_z), size)
    return SceneObject(class_id, lower, upper, tier)


def label_scene(scene: Scene) -> VoxelGrid:
    """
    Label every output voxel by the front-most object containing its centre.

    Front-most means the smallest lower x (nearest along the viewing
    direction); ties go to the earlier object.
    """
    centers = voxel_centers(scene.spec, Resolution.OUTPUT)
    labels = np.full(scene.spec.dims, EMPTY_LABEL, dtype=np.uint8)
    order = sorted(range(len(scene.objects)),
                   key=lambda i: (scene.objects[i].lower[0], i), reverse=True)
    for i in order:
        obj = scene.objects[i]
        labels[obj.contains(centers)] = obj.class_id
    return VoxelGrid(scene.spec, labels)


def generate_scene(seed: int, spec: VolumeSpec, class_count: int,
                   object_count: Union[int, Tuple[int, int]] = (2, 6)) -> Tuple[Scene, VoxelGrid]:
    """
    Build a random scene and its semantic ground truth.

    Args:
        seed: Scene seed; equal seeds give identical scenes
        spec: Volume the scene lives in
        class_count: M, number of semantic classes (ground is class 1)
        object_count: Exact count or inclusive (min, max) range of boxes

    Returns:
        (Scene, VoxelGrid ground truth)
    """
    if class_count < 2:
        raise InvalidInputError("scenes need at least two classes (ground and one object class)")
    low, high = (object_count, object_count) if isinstance(object_count, int) else object_count
    if low < 0 or high < low:
        raise InvalidInputError(f"invalid object count range {object_count}")

    rng = make_numpy_rng(seed)
    count = int(rng.integers(low, high + 1))
    objects = [_ground_slab(spec)]
    for _ in range(count):
        class_id = int(rng.integers(2, class_count + 1))
        objects.append(_random_object(rng, spec, class_id))

    scene = Scene(spec, class_count, int(seed), objects)
    return scene, label_scene(scene)
