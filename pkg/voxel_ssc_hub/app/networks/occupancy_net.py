"""
Stage 1: depth-derived occupancy correction and voxel query proposal.

The occupancy net is a small UNet over the bird's-eye plane that carries the
vertical axis as channels. It reads the output-resolution grid M_in and
predicts query-resolution logits whose thresholded sigmoid is M_out.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from app.geometry.volume import Resolution, VolumeSpec
from app.networks.queries import VoxelQuerySet
from app.numerics.ops import DTYPE, ensure_finite
from app.utils.errors import InvalidInputError
from app.utils.logging_setup import get_logger
from app.voxel.grid import OccupancyGrid, VoxelGrid
from app.voxel.voxelizer import downsample_occupancy

logger = get_logger("stage1")

OCCUPANCY_THRESHOLD = 0.5


def _conv(in_ch: int, out_ch: int, stride: int = 1) -> nn.Conv2d:
    return nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, dtype=DTYPE)


class OccupancyNet(nn.Module):
    """
    UNet with Z as channels.

    Encoder: stem, then log2(factor) + 1 stride-2 convolutions. Decoder: one
    nearest upsample back to query resolution, concatenation with the
    encoder skip at that resolution, a fusion convolution and a head that
    emits one logit channel per query height cell.
    """

    def __init__(self, spec: VolumeSpec, channels: int = 32):
        super().__init__()
        factor = spec.factor
        if factor & (factor - 1):
            raise InvalidInputError(f"occupancy net needs a power-of-two downsample factor, got {factor}")
        H, W, Z = spec.dims
        if H % (2 * factor) or W % (2 * factor):
            raise InvalidInputError(f"output dims {spec.dims} must be divisible by {2 * factor}")
        self.spec = spec
        levels = int(np.log2(factor))

        self.stem = _conv(Z, channels)
        widths = [channels * 2 ** min(i + 1, 2) for i in range(levels + 1)]
        down = []
        in_ch = channels
        for width in widths:
            down.append(_conv(in_ch, width, stride=2))
            in_ch = width
        self.down = nn.ModuleList(down)
        skip_ch = widths[levels - 1] if levels > 0 else channels
        self.fuse = _conv(in_ch + skip_ch, channels)
        self.head = _conv(channels, spec.query_dims[2])

    def forward(self, grid: torch.Tensor) -> torch.Tensor:
        """
        Args:
            grid: Tensor[H, W, Z] of 0/1 occupancy

        Returns:
            Logits Tensor[h, w, z]
        """
        if tuple(grid.shape) != self.spec.dims:
            raise InvalidInputError(f"occupancy input must be {self.spec.dims}, got {tuple(grid.shape)}")
        x = F.relu(self.stem(grid.permute(2, 0, 1).unsqueeze(0)))
        skip = x
        for i, conv in enumerate(self.down):
            x = F.relu(conv(x))
            if i == len(self.down) - 2:
                skip = x
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = F.relu(self.fuse(torch.cat([x, skip], dim=1)))
        return self.head(x)[0].permute(1, 2, 0)


def occupancy_tensor(grid: OccupancyGrid) -> torch.Tensor:
    return torch.as_tensor(grid.bits.astype(np.float64), dtype=DTYPE)


def predict_occupancy(m_in: OccupancyGrid, net: OccupancyNet,
                      threshold: float = OCCUPANCY_THRESHOLD) -> Tuple[torch.Tensor, OccupancyGrid]:
    """
    Correct a depth-derived grid into query-resolution occupancy.

    Args:
        m_in: Output-resolution occupancy from back-projected depth
        net: Occupancy correction network
        threshold: Sigmoid cut-off for M_out

    Returns:
        (logits Tensor[h, w, z], M_out at query resolution)
    """
    if m_in.resolution != Resolution.OUTPUT or m_in.spec.dims != net.spec.dims:
        raise InvalidInputError(
            f"m_in must be an output-resolution grid of {net.spec.dims}, got {m_in.bits.shape}")
    logits = net(occupancy_tensor(m_in))
    bits = (torch.sigmoid(logits) > threshold).detach().cpu().numpy()
    return logits, OccupancyGrid(net.spec, Resolution.QUERY, bits)


@dataclass(eq=False)
class QueryProposal:
    """Set cells of M_out in row-major scan order."""

    indices: np.ndarray
    mask: OccupancyGrid

    @property
    def count(self) -> int:
        return int(self.indices.shape[0])

    @property
    def flat_indices(self) -> torch.Tensor:
        return torch.as_tensor(np.flatnonzero(self.mask.bits.reshape(-1)), dtype=torch.long)

    @classmethod
    def from_mask(cls, mask: OccupancyGrid) -> "QueryProposal":
        if mask.resolution != Resolution.QUERY:
            raise InvalidInputError("query proposals come from a query-resolution mask")
        return cls(np.argwhere(mask.bits).astype(np.int64), mask)


def propose_queries(qset: VoxelQuerySet, m_out: OccupancyGrid) -> Tuple[torch.Tensor, QueryProposal]:
    """
    Gather the proposed voxel queries.

    Args:
        qset: Learnable queries with positional embeddings
        m_out: Query-resolution occupancy selecting the proposals

    Returns:
        (Q_p Tensor[N_p, d], QueryProposal); rows follow scan order
    """
    if tuple(m_out.bits.shape) != qset.grid_dims:
        raise InvalidInputError(f"m_out {m_out.bits.shape} does not match the query grid {qset.grid_dims}")
    proposal = QueryProposal.from_mask(m_out)
    if proposal.count == 0:
        logger.warning("empty query proposal; stage 2 runs on mask tokens only")
    return qset.embedded().index_select(0, proposal.flat_indices), proposal


def stage1_loss(logits: torch.Tensor, target: OccupancyGrid) -> torch.Tensor:
    """Mean binary cross-entropy between logits and query-resolution occupancy."""
    if tuple(logits.shape) != tuple(target.bits.shape):
        raise InvalidInputError(f"logits {tuple(logits.shape)} do not match target {target.bits.shape}")
    ensure_finite(logits, "stage-1 logits")
    return F.binary_cross_entropy_with_logits(logits, occupancy_tensor(target), reduction="mean")


@dataclass(frozen=True)
class QueryMode:
    """
    How M_out is chosen.

    ``occupancy``: thresholded occupancy net output. ``dense``: every cell.
    ``random:p``: p percent of cells drawn uniformly. ``oracle``: pooled
    ground truth. ``raw``: pooled M_in without the correction net.
    """

    kind: str
    percent: float = 0.0

    KINDS = ("occupancy", "dense", "random", "oracle", "raw")

    @classmethod
    def parse(cls, text: str) -> "QueryMode":
        text = str(text).strip().lower()
        kind, _, arg = text.partition(":")
        if kind not in cls.KINDS:
            raise InvalidInputError(f"unknown query mode '{text}'")
        if kind == "random":
            try:
                percent = float(arg.rstrip("%"))
            except ValueError:
                raise InvalidInputError(f"random query mode needs a percentage, got '{text}'") from None
            if not 0.0 < percent <= 100.0:
                raise InvalidInputError(f"random query percentage must be in (0, 100], got {percent}")
            return cls(kind, percent)
        if arg:
            raise InvalidInputError(f"query mode '{kind}' takes no argument")
        return cls(kind)

    def __str__(self) -> str:
        return f"random:{self.percent:g}" if self.kind == "random" else self.kind

    @property
    def needs_network(self) -> bool:
        return self.kind == "occupancy"


def select_query_mask(mode: QueryMode, spec: VolumeSpec, m_in: OccupancyGrid,
                      net: Optional[OccupancyNet] = None, gt: Optional[VoxelGrid] = None,
                      generator: Optional[torch.Generator] = None,
                      threshold: float = OCCUPANCY_THRESHOLD) -> OccupancyGrid:
    """
    Build M_out for a query mode.

    Raises:
        InvalidInputError: when the mode's input (net, ground truth or
            generator) is missing
    """
    if mode.kind == "dense":
        return OccupancyGrid.full(spec, Resolution.QUERY)
    if mode.kind == "raw":
        return downsample_occupancy(m_in, spec)
    if mode.kind == "oracle":
        if gt is None:
            raise InvalidInputError("oracle query mode needs ground truth")
        return downsample_occupancy(gt.occupancy(), spec)
    if mode.kind == "random":
        if generator is None:
            raise InvalidInputError("random query mode needs a generator")
        total = spec.cell_count(Resolution.QUERY)
        count = int(round(total * mode.percent / 100.0))
        chosen = torch.randperm(total, generator=generator)[:count].numpy()
        bits = np.zeros(total, dtype=bool)
        bits[chosen] = True
        return OccupancyGrid(spec, Resolution.QUERY, bits.reshape(spec.query_dims))
    if net is None:
        raise InvalidInputError("occupancy query mode needs a stage-1 network")
    with torch.no_grad():
        _, m_out = predict_occupancy(m_in, net, threshold)
    return m_out
