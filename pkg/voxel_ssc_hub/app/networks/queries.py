"""
Learnable voxel queries, positional embeddings and the shared mask token.
"""

import torch
from torch import nn

from app.geometry.volume import VolumeSpec
from app.networks.init import normal_
from app.numerics.ops import DTYPE

QUERY_INIT_STD = 0.02


class VoxelQuerySet(nn.Module):
    """Q and pos_embed shaped [h, w, z, d] plus one mask token [d]."""

    def __init__(self, spec: VolumeSpec, feature_dim: int):
        super().__init__()
        h, w, z = spec.query_dims
        self.grid_dims = (h, w, z)
        self.feature_dim = int(feature_dim)
        self.queries = nn.Parameter(torch.zeros(h, w, z, feature_dim, dtype=DTYPE))
        self.pos_embed = nn.Parameter(torch.zeros(h, w, z, feature_dim, dtype=DTYPE))
        self.mask_token = nn.Parameter(torch.zeros(feature_dim, dtype=DTYPE))

    def reset_special(self, generator: torch.Generator) -> None:
        for tensor in (self.queries, self.pos_embed, self.mask_token):
            normal_(tensor, QUERY_INIT_STD, generator)

    def embedded(self) -> torch.Tensor:
        """Queries with positional embeddings, flattened to [N_q, d] in scan order."""
        return (self.queries + self.pos_embed).reshape(-1, self.feature_dim)

    def mask_tokens(self) -> torch.Tensor:
        """Mask token plus positional embedding for every cell, [N_q, d]."""
        return (self.mask_token + self.pos_embed).reshape(-1, self.feature_dim)
