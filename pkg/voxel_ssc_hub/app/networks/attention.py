"""
Deformable attention over channel-last feature maps.

Each query predicts N_s sampling offsets (per head) around its reference
point and N_s attention logits. Offsets are added to a fixed sampling
pattern: sample 0 on the reference point, the others on a ring whose phase
rotates from head to head. Both prediction heads start at zero, so an
untrained layer samples exactly the pattern with uniform weights.
"""

import math
from typing import List, Optional, Tuple

import torch
import torch.nn.functional as F
from torch import nn

from app.numerics.ops import DTYPE, bilinear_sample, softmax_normalize
from app.utils.errors import InvalidInputError


def sampling_pattern(points: int, heads: int = 1, radius: float = 1.0) -> torch.Tensor:
    """
    Fixed offsets the predicted offsets are added to.

    Returns:
        Tensor[heads, points, 2]; entry 0 of every head is the origin
    """
    pattern = torch.zeros(heads, points, 2, dtype=DTYPE)
    ring = points - 1
    for head in range(heads):
        for s in range(1, points):
            angle = 2.0 * math.pi * ((s - 1) / ring + head / (heads * ring))
            pattern[head, s, 0] = radius * math.cos(angle)
            pattern[head, s, 1] = radius * math.sin(angle)
    return pattern


class DeformableAttention(nn.Module):
    """
    Multi-head deformable attention.

    ``padding`` picks how samples beyond the map behave: ``"zeros"`` for
    image features (a sample off the image sees nothing), ``"border"`` for
    the voxel map.
    """

    def __init__(self, feature_dim: int, points: int = 8, heads: int = 1,
                 radius: float = 1.0, padding: str = "zeros"):
        super().__init__()
        if points < 1:
            raise InvalidInputError(f"deformable attention needs at least one sample, got {points}")
        if heads < 1 or feature_dim % heads:
            raise InvalidInputError(f"{heads} heads do not divide feature dimension {feature_dim}")
        self.feature_dim = int(feature_dim)
        self.points = int(points)
        self.heads = int(heads)
        self.padding = padding
        self.value_proj = nn.Linear(feature_dim, feature_dim, dtype=DTYPE)
        self.sampling_offsets = nn.Linear(feature_dim, heads * points * 2, dtype=DTYPE)
        self.attention_logits = nn.Linear(feature_dim, heads * points, dtype=DTYPE)
        self.output_proj = nn.Linear(feature_dim, feature_dim, dtype=DTYPE)
        self.register_buffer("pattern", sampling_pattern(points, heads, radius), persistent=False)

    def reset_special(self, generator: torch.Generator) -> None:
        with torch.no_grad():
            for head in (self.sampling_offsets, self.attention_logits):
                head.weight.zero_()
                head.bias.zero_()

    def sample_locations(self, queries: torch.Tensor, ref_points: torch.Tensor) -> torch.Tensor:
        """Absolute sample positions, Tensor[N, heads, points, 2]."""
        offsets = self.sampling_offsets(queries).view(-1, self.heads, self.points, 2)
        return ref_points[:, None, None, :] + self.pattern + offsets

    def attention_weights(self, queries: torch.Tensor) -> torch.Tensor:
        """Softmax weights A_s, Tensor[N, heads, points]."""
        logits = self.attention_logits(queries).view(-1, self.heads, self.points)
        return softmax_normalize(logits, dim=-1)

    def forward(self, queries: torch.Tensor, ref_points: torch.Tensor,
                feature_map: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Args:
            queries: Tensor[N, d]
            ref_points: Tensor[N, 2] as (column, row) in feature-map cells
            feature_map: Tensor[b, c, d]

        Returns:
            (Tensor[N, d] attended features, Tensor[N, heads, points] weights)
        """
        n = queries.shape[0]
        head_dim = self.feature_dim // self.heads
        values = self.value_proj(feature_map)
        locations = self.sample_locations(queries, ref_points)
        weights = self.attention_weights(queries)

        per_head = []
        for head in range(self.heads):
            head_values = values[..., head * head_dim:(head + 1) * head_dim]
            samples = bilinear_sample(head_values, locations[:, head], padding=self.padding)
            per_head.append((samples * weights[:, head, :, None]).sum(dim=1))
        attended = torch.cat(per_head, dim=-1) if per_head else queries.new_zeros(n, self.feature_dim)
        return self.output_proj(attended), weights


def deformable_attention(query: torch.Tensor, ref_point, feature_map,
                         layer: DeformableAttention) -> torch.Tensor:
    """
    Attend one query into one feature map.

    Args:
        query: Tensor[d]
        ref_point: (column, row) in the feature map's own cells
        feature_map: FeatureMap or Tensor[b, c, d]
        layer: Attention parameters

    Returns:
        Tensor[d]
    """
    fmap = getattr(feature_map, 'tensor', feature_map)
    ref = torch.as_tensor(ref_point, dtype=DTYPE).reshape(1, 2)
    attended, _ = layer(query.reshape(1, -1), ref, fmap)
    return attended[0]


class FeedForward(nn.Module):
    def __init__(self, feature_dim: int, hidden: Optional[int] = None):
        super().__init__()
        hidden = hidden or 2 * feature_dim
        self.fc1 = nn.Linear(feature_dim, hidden, dtype=DTYPE)
        self.fc2 = nn.Linear(hidden, feature_dim, dtype=DTYPE)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(F.relu(self.fc1(x)))


class CrossAttentionLayer(nn.Module):
    """Pre-norm deformable cross-attention averaged over the hit views, then a feed-forward."""

    def __init__(self, feature_dim: int, points: int = 8, heads: int = 1, radius: float = 1.0):
        super().__init__()
        self.norm_attn = nn.LayerNorm(feature_dim, dtype=DTYPE)
        self.attn = DeformableAttention(feature_dim, points, heads, radius, padding="zeros")
        self.norm_ffn = nn.LayerNorm(feature_dim, dtype=DTYPE)
        self.ffn = FeedForward(feature_dim)

    def forward(self, queries: torch.Tensor, ref_points: torch.Tensor, hits: torch.Tensor,
                feature_maps: List[torch.Tensor]) -> Tuple[torch.Tensor, List[torch.Tensor]]:
        """
        Args:
            queries: Tensor[N, d]
            ref_points: Tensor[V, N, 2] reference points per view
            hits: Tensor[V, N] bool, projection valid in that view
            feature_maps: V tensors [b, c, d]

        Returns:
            (Tensor[N, d], per-view attention weights)
        """
        x = self.norm_attn(queries)
        total = torch.zeros_like(queries)
        weights = []
        for view, fmap in enumerate(feature_maps):
            attended, view_weights = self.attn(x, ref_points[view], fmap)
            total = total + torch.where(hits[view, :, None], attended, torch.zeros_like(attended))
            weights.append(view_weights)
        count = hits.sum(dim=0).to(DTYPE).clamp_min(1.0)
        queries = queries + total / count[:, None]
        return queries + self.ffn(self.norm_ffn(queries)), weights


class SelfAttentionLayer(nn.Module):
    """
    Pre-norm deformable self-attention over the voxel grid.

    The [h, w, z, d] grid is laid out as a 2D map of (h * z) rows and w
    columns: voxel (i, j, k) sits at row i * z + k, column j.
    """

    def __init__(self, feature_dim: int, points: int = 8, heads: int = 1, radius: float = 1.0):
        super().__init__()
        self.norm_attn = nn.LayerNorm(feature_dim, dtype=DTYPE)
        self.attn = DeformableAttention(feature_dim, points, heads, radius, padding="border")
        self.norm_ffn = nn.LayerNorm(feature_dim, dtype=DTYPE)
        self.ffn = FeedForward(feature_dim)

    @staticmethod
    def reference_points(grid_dims) -> torch.Tensor:
        """(column, row) of every voxel in scan order, Tensor[h * w * z, 2]."""
        h, w, z = grid_dims
        i, j, k = torch.meshgrid(torch.arange(h), torch.arange(w), torch.arange(z), indexing="ij")
        return torch.stack([j, i * z + k], dim=-1).reshape(-1, 2).to(DTYPE)

    def forward(self, f3d: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        h, w, z, d = f3d.shape
        x = self.norm_attn(f3d)
        flat = x.reshape(-1, d)
        plane = x.permute(0, 2, 1, 3).reshape(h * z, w, d)
        attended, weights = self.attn(flat, self.reference_points((h, w, z)), plane)
        out = f3d + attended.reshape(h, w, z, d)
        return out + self.ffn(self.norm_ffn(out)), weights
