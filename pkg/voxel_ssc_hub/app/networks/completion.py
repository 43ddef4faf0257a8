"""
Stage 2: sparse-to-dense voxel completion.

Proposed queries gather image evidence through deformable cross-attention,
non-proposed cells are filled with the mask token, the dense grid is
refined by deformable self-attention and finally upsampled and projected to
per-voxel class logits.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from app.geometry.camera import Camera, project_points
from app.geometry.volume import Resolution, VolumeSpec, voxel_centers
from app.networks.attention import CrossAttentionLayer, SelfAttentionLayer
from app.networks.features import FeatureExtractor, FeatureMap
from app.networks.occupancy_net import QueryProposal, propose_queries
from app.networks.queries import VoxelQuerySet
from app.numerics.ops import DTYPE
from app.utils.errors import InvalidInputError
from app.utils.logging_setup import get_logger

logger = get_logger("stage2")


@dataclass(eq=False)
class CameraView:
    """One observing camera with the feature map extracted from its frame."""

    camera: Camera
    features: FeatureMap


def reference_pixels(proposal: QueryProposal, views: Sequence[CameraView],
                     spec: VolumeSpec) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Project proposed voxel centres into every view.

    Returns:
        (Tensor[V, N_p, 2] feature-map coordinates, Tensor[V, N_p] hit mask)
    """
    centers = voxel_centers(spec, Resolution.QUERY, proposal.indices)
    refs, hits = [], []
    for view in views:
        pixels, valid = project_points(centers, view.camera.intrinsics, view.camera.pose)
        refs.append(pixels * view.features.scale)
        hits.append(valid)
    refs = torch.as_tensor(np.stack(refs).reshape(len(views), -1, 2), dtype=DTYPE)
    hits = torch.as_tensor(np.stack(hits).reshape(len(views), -1), dtype=torch.bool)
    return refs, hits


def cross_attend(q_p: torch.Tensor, proposal: QueryProposal, views: Sequence[CameraView],
                 spec: VolumeSpec, layers: Sequence[CrossAttentionLayer],
                 return_weights: bool = False):
    """
    Refine proposed queries with image features.

    Each layer averages deformable attention over the views a query projects
    into; queries no view sees only pass through the residual feed-forward.

    Args:
        q_p: Tensor[N_p, d] proposed queries in scan order
        proposal: Their grid indices
        views: At least one camera view
        spec: Volume specification
        layers: Cross-attention layer stack
        return_weights: Also return per-layer, per-view attention weights

    Returns:
        Tensor[N_p, d] (and the weight lists when requested)
    """
    if not views:
        raise InvalidInputError("cross-attention needs at least one camera view")
    if q_p.shape[0] != proposal.count:
        raise InvalidInputError(f"{q_p.shape[0]} query rows for {proposal.count} proposals")
    all_weights: List[List[torch.Tensor]] = []
    if proposal.count == 0:
        return (q_p, all_weights) if return_weights else q_p

    refs, hits = reference_pixels(proposal, views, spec)
    fmaps = [view.features.tensor for view in views]
    x = q_p
    for layer in layers:
        x, weights = layer(x, refs, hits, fmaps)
        all_weights.append(weights)
    return (x, all_weights) if return_weights else x


def scatter_with_mask_tokens(q_hat: torch.Tensor, proposal: QueryProposal,
                             qset: VoxelQuerySet) -> torch.Tensor:
    """
    Dense voxel features: refined queries at proposed cells, mask token plus
    positional embedding everywhere else.

    Returns:
        F3D Tensor[h, w, z, d]
    """
    if q_hat.dim() != 2 or q_hat.shape[0] != proposal.count or q_hat.shape[1] != qset.feature_dim:
        raise InvalidInputError(
            f"refined queries {tuple(q_hat.shape)} do not align with {proposal.count} proposals")
    dense = qset.mask_tokens().index_copy(0, proposal.flat_indices, q_hat)
    return dense.reshape(*qset.grid_dims, qset.feature_dim)


def self_attend(f3d: torch.Tensor, spec: VolumeSpec,
                layers: Sequence[SelfAttentionLayer], return_weights: bool = False):
    """Refine the dense grid with deformable self-attention."""
    if tuple(f3d.shape[:3]) != spec.query_dims:
        raise InvalidInputError(f"voxel features {tuple(f3d.shape)} do not match query dims {spec.query_dims}")
    all_weights = []
    for layer in layers:
        f3d, weights = layer(f3d)
        all_weights.append(weights)
    return (f3d, all_weights) if return_weights else f3d


def output_head(f3d: torch.Tensor, spec: VolumeSpec, head: nn.Linear) -> torch.Tensor:
    """
    Trilinear upsampling to the output lattice, then a per-voxel projection.

    Returns:
        Logits Tensor[H, W, Z, M + 1]
    """
    if tuple(f3d.shape[:3]) != spec.query_dims:
        raise InvalidInputError(f"voxel features {tuple(f3d.shape)} do not match query dims {spec.query_dims}")
    if spec.factor > 1:
        grid = f3d.permute(3, 0, 1, 2).unsqueeze(0)
        grid = F.interpolate(grid, size=spec.dims, mode="trilinear", align_corners=False)
        f3d = grid[0].permute(1, 2, 3, 0)
    return head(f3d)


class Stage2Model(nn.Module):
    """Feature extractor, voxel queries, attention stacks and output head."""

    def __init__(self, spec: VolumeSpec, class_count: int, feature_dim: int = 32,
                 points: int = 8, heads: int = 1, cross_layers: int = 3, self_layers: int = 2,
                 feature_scale: float = 0.25, radius: float = 1.0,
                 use_cross_attention: bool = True, use_self_attention: bool = True):
        super().__init__()
        self.spec = spec
        self.class_count = int(class_count)
        self.use_cross_attention = use_cross_attention
        self.use_self_attention = use_self_attention
        self.extractor = FeatureExtractor(feature_dim, feature_scale)
        self.qset = VoxelQuerySet(spec, feature_dim)
        self.cross_layers = nn.ModuleList(
            CrossAttentionLayer(feature_dim, points, heads, radius) for _ in range(cross_layers))
        self.self_layers = nn.ModuleList(
            SelfAttentionLayer(feature_dim, points, heads, radius) for _ in range(self_layers))
        self.head = nn.Linear(feature_dim, class_count + 1, dtype=DTYPE)

    def views(self, images: torch.Tensor, cameras: Sequence[Camera]) -> List[CameraView]:
        if images.shape[0] != len(cameras):
            raise InvalidInputError(f"{images.shape[0]} images for {len(cameras)} cameras")
        features = self.extractor(images)
        return [CameraView(camera, FeatureMap(features[t], self.extractor.scale))
                for t, camera in enumerate(cameras)]

    def forward(self, images: torch.Tensor, cameras: Sequence[Camera], m_out) -> torch.Tensor:
        """
        Args:
            images: Tensor[T, 3, H, W], current frame first
            cameras: One camera per image
            m_out: Query-resolution occupancy selecting the proposals

        Returns:
            Logits Tensor[H, W, Z, M + 1]
        """
        q_p, proposal = propose_queries(self.qset, m_out)
        logger.debug(f"proposed {proposal.count} of {self.spec.cell_count(Resolution.QUERY)} queries")
        if self.use_cross_attention:
            q_p = cross_attend(q_p, proposal, self.views(images, cameras), self.spec, self.cross_layers)
        f3d = scatter_with_mask_tokens(q_p, proposal, self.qset)
        if self.use_self_attention:
            f3d = self_attend(f3d, self.spec, self.self_layers)
        return output_head(f3d, self.spec, self.head)
