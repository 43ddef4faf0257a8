"""
Stage-2 training losses.

The semantic term is class-weighted cross-entropy over observed voxels. The
affinity term scores soft precision, recall and specificity per class, once
over the semantic classes and once over binary occupancy.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from app.numerics.ops import DTYPE, ensure_finite, softmax_normalize
from app.utils.errors import InvalidInputError
from app.voxel.grid import EMPTY_LABEL, IGNORE_LABEL, VoxelGrid

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class ClassWeights:
    """Positive weight per class 0..M, mean one."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise InvalidInputError("class weights must be positive and finite")
        object.__setattr__(self, 'values', values)

    @classmethod
    def uniform(cls, class_count: int) -> "ClassWeights":
        return cls(np.ones(class_count + 1))

    @property
    def class_count(self) -> int:
        return len(self.values) - 1

    def as_tensor(self) -> torch.Tensor:
        return torch.as_tensor(self.values, dtype=DTYPE)


def class_histogram(grids: Sequence[VoxelGrid], class_count: int) -> np.ndarray:
    counts = np.zeros(class_count + 1, dtype=np.int64)
    for grid in grids:
        labels = grid.labels[grid.observed]
        if labels.size and labels.max() > class_count:
            raise InvalidInputError(f"label {labels.max()} exceeds class count {class_count}")
        counts += np.bincount(labels.astype(np.int64), minlength=class_count + 1)
    return counts


def compute_class_weights(grids: Sequence[VoxelGrid], class_count: int) -> ClassWeights:
    """
    Inverse-frequency class weights normalized to mean one.

    Args:
        grids: Ground-truth grids, at least one
        class_count: M; weights cover classes 0..M

    Returns:
        ClassWeights; classes that never occur get frequency
        1 / (observed voxels + M + 1)
    """
    if not grids:
        raise InvalidInputError("class weights need at least one grid")
    counts = class_histogram(grids, class_count)
    total = int(counts.sum())
    smoothed = 1.0 / (total + class_count + 1)
    freq = np.where(counts > 0, counts / max(total, 1), smoothed)
    weights = 1.0 / freq
    return ClassWeights(weights / weights.mean())


def _flatten(logits: torch.Tensor, gt: VoxelGrid):
    if logits.dim() != 4 or tuple(logits.shape[:3]) != gt.spec.dims:
        raise InvalidInputError(f"logits {tuple(logits.shape)} do not match grid {gt.spec.dims}")
    ensure_finite(logits, "logits")
    classes = logits.shape[3]
    labels = gt.labels.reshape(-1)
    observed = labels != IGNORE_LABEL
    if observed.any() and labels[observed].max() >= classes:
        raise InvalidInputError(f"label {labels[observed].max()} has no logit among {classes} classes")
    target = torch.as_tensor(labels.astype(np.int64))
    return logits.reshape(-1, classes), target, torch.as_tensor(observed)


def semantic_loss(logits: torch.Tensor, gt: VoxelGrid, weights: ClassWeights) -> torch.Tensor:
    """
    Class-weighted cross-entropy averaged over observed voxels.

    Args:
        logits: Tensor[H, W, Z, M + 1]
        gt: Ground truth; label 255 voxels are skipped
        weights: One weight per class

    Returns:
        Scalar tensor, zero when no voxel is observed
    """
    flat, target, observed = _flatten(logits, gt)
    if flat.shape[1] != len(weights.values):
        raise InvalidInputError(f"{len(weights.values)} class weights for {flat.shape[1]} logit channels")
    count = int(observed.sum())
    if count == 0:
        return flat.sum() * 0.0
    total = F.cross_entropy(flat, target, weight=weights.as_tensor(),
                            ignore_index=IGNORE_LABEL, reduction="sum")
    return total / count


def _affinity_terms(prob: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """
    -(log P + log R + log S) for one soft prediction against a 0/1 target.

    Precision and recall only enter when the target has positives.
    """
    loss = prob.new_zeros(())
    hit = (prob * target).sum()
    if target.sum() > 0:
        if prob.sum() > 0:
            loss = loss - torch.log((hit / prob.sum()).clamp_min(LOG_FLOOR))
        loss = loss - torch.log((hit / target.sum()).clamp_min(LOG_FLOOR))
    negatives = 1.0 - target
    if negatives.sum() > 0:
        specificity = ((1.0 - prob) * negatives).sum() / negatives.sum()
        loss = loss - torch.log(specificity.clamp_min(LOG_FLOOR))
    return loss


def semantic_affinity(logits: torch.Tensor, gt: VoxelGrid) -> torch.Tensor:
    """Affinity over the semantic classes 1..M present in the observed ground truth."""
    flat, target, observed = _flatten(logits, gt)
    prob = softmax_normalize(flat[observed], dim=-1)
    target = target[observed]
    terms = []
    for c in range(1, flat.shape[1]):
        one_hot = (target == c).to(DTYPE)
        if one_hot.sum() > 0:
            terms.append(_affinity_terms(prob[:, c], one_hot))
    if not terms:
        return flat.sum() * 0.0
    return torch.stack(terms).mean()


def geometric_affinity(logits: torch.Tensor, gt: VoxelGrid) -> torch.Tensor:
    """Affinity over binary occupancy: non-empty probability is 1 - p(empty)."""
    flat, target, observed = _flatten(logits, gt)
    if int(observed.sum()) == 0:
        return flat.sum() * 0.0
    prob = softmax_normalize(flat[observed], dim=-1)
    occupied = 1.0 - prob[:, EMPTY_LABEL]
    return _affinity_terms(occupied, (target[observed] != EMPTY_LABEL).to(DTYPE))


def affinity_loss(logits: torch.Tensor, gt: VoxelGrid) -> torch.Tensor:
    """Semantic plus geometric affinity, each weighted one."""
    return semantic_affinity(logits, gt) + geometric_affinity(logits, gt)


def stage2_loss(logits: torch.Tensor, gt: VoxelGrid, weights: ClassWeights,
                use_affinity: bool = True) -> torch.Tensor:
    loss = semantic_loss(logits, gt, weights)
    if use_affinity:
        loss = loss + affinity_loss(logits, gt)
    return loss
