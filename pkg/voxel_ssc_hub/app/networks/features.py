"""
Image feature extraction.

A small strided convolution stack turns an RGB frame into a channel-last
feature map at a fixed fraction of the input resolution. Feature cell
``(r, c)`` sits on input pixel ``(r / scale, c / scale)``, so a pixel
coordinate maps to feature coordinates by multiplying with ``scale``.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Tuple

import numpy as np
import torch
from torch import nn

from app.numerics.ops import DTYPE
from app.synth.frames import ImageFrame
from app.utils.errors import InvalidInputError

SUPPORTED_SCALES = (1.0, 0.5, 0.25, 0.125, 0.0625)
MIN_BLOCKS = 3


@dataclass(eq=False)
class FeatureMap:
    """Channel-last features ``tensor[b, c, d]`` at ``scale`` of the image size."""

    tensor: torch.Tensor
    scale: float

    @property
    def extents(self) -> Tuple[int, int]:
        return int(self.tensor.shape[0]), int(self.tensor.shape[1])

    @property
    def channels(self) -> int:
        return int(self.tensor.shape[2])


def block_layout(feature_dim: int, scale: float) -> List[Tuple[int, int]]:
    """
    Strides and output widths of the convolution blocks for a scale.

    Returns:
        [(stride, width), ...]; stride-2 blocks first, padded with stride-1
        blocks up to three, widths 16, 32, 64, ... ending at ``feature_dim``
    """
    if float(scale) not in SUPPORTED_SCALES:
        raise InvalidInputError(f"feature scale must be one of {SUPPORTED_SCALES}, got {scale}")
    downsamples = int(round(-np.log2(scale)))
    strides = [2] * downsamples + [1] * max(0, MIN_BLOCKS - downsamples)
    widths = [16 * 2 ** i for i in range(len(strides) - 1)] + [int(feature_dim)]
    return list(zip(strides, widths))


class FeatureExtractor(nn.Module):
    """Strided 3x3 convolution stack; ReLU between blocks, linear last block."""

    def __init__(self, feature_dim: int = 32, scale: float = 0.25):
        super().__init__()
        if feature_dim <= 0:
            raise InvalidInputError(f"feature dimension must be positive, got {feature_dim}")
        self.feature_dim = int(feature_dim)
        self.scale = float(scale)
        layout = block_layout(feature_dim, scale)
        self.stride_product = int(np.prod([s for s, _ in layout]))

        layers: List[nn.Module] = []
        in_ch = 3
        for i, (stride, width) in enumerate(layout):
            layers.append(nn.Conv2d(in_ch, width, 3, stride=stride, padding=1, dtype=DTYPE))
            if i < len(layout) - 1:
                layers.append(nn.ReLU())
            in_ch = width
        self.blocks = nn.Sequential(*layers)

    def check_extents(self, height: int, width: int) -> None:
        if height % self.stride_product or width % self.stride_product:
            raise InvalidInputError(
                f"image {width}x{height} is not divisible by the feature stride "
                f"{self.stride_product} (scale {Fraction(self.scale).limit_denominator()})")

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        """
        Args:
            images: Tensor[T, 3, H, W] with pixel values in [0, 1]

        Returns:
            Tensor[T, H * scale, W * scale, d]
        """
        if images.dim() != 4 or images.shape[1] != 3:
            raise InvalidInputError(f"images must be [T, 3, H, W], got {tuple(images.shape)}")
        self.check_extents(int(images.shape[2]), int(images.shape[3]))
        return self.blocks(images - 0.5).permute(0, 2, 3, 1)


def frame_tensor(frame: ImageFrame) -> torch.Tensor:
    """Image pixels as Tensor[3, H, W] in double precision."""
    return torch.as_tensor(np.ascontiguousarray(frame.pixels.transpose(2, 0, 1)), dtype=DTYPE)


def extract_features(frame: ImageFrame, extractor: FeatureExtractor) -> FeatureMap:
    """
    Feature map of one frame.

    Args:
        frame: RGB frame whose extents are divisible by the stride product
        extractor: Convolution stack holding the parameters

    Returns:
        FeatureMap at the extractor's scale, differentiable w.r.t. its params
    """
    features = extractor(frame_tensor(frame).unsqueeze(0))[0]
    return FeatureMap(features, extractor.scale)
