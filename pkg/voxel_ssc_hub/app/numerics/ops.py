"""
Differentiable primitives shared by every network in the pipeline.

All training-path arithmetic runs in double precision on the CPU. Tensors are
plain ``torch.Tensor`` objects; reverse-mode gradients come from autograd.
"""

from typing import Iterable

import numpy as np
import torch

from app.utils.errors import InvalidInputError

DTYPE = torch.float64


def set_deterministic(seed: int) -> None:
    """Seed the global torch state and request deterministic kernels."""
    torch.manual_seed(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)
    torch.use_deterministic_algorithms(True, warn_only=True)


def as_tensor(values, requires_grad: bool = False) -> torch.Tensor:
    """Copy array-like values into a fresh double tensor."""
    tensor = torch.tensor(np.asarray(values, dtype=np.float64), dtype=DTYPE)
    if requires_grad:
        tensor.requires_grad_(True)
    return tensor


def ensure_finite(tensor: torch.Tensor, name: str) -> None:
    """Reject tensors holding NaN or infinite entries."""
    if not bool(torch.isfinite(tensor).all()):
        raise InvalidInputError(f"{name} contains non-finite values")


def softmax_normalize(logits: torch.Tensor, dim: int = -1) -> torch.Tensor:
    """
    Normalize logits into probabilities along ``dim``.

    Args:
        logits: Finite logits with at least one entry along ``dim``
        dim: Axis to normalize over

    Returns:
        Probabilities in (0, 1) summing to one along ``dim``
    """
    if logits.dim() == 0 or logits.shape[dim] < 1:
        raise InvalidInputError("softmax needs at least one logit")
    ensure_finite(logits, "logits")
    return torch.softmax(logits, dim=dim)


def bilinear_sample(feature_map: torch.Tensor, points: torch.Tensor,
                    padding: str = "zeros") -> torch.Tensor:
    """
    Sample a channel-last feature map at real-valued pixel locations.

    ``points[..., 0]`` is the column (horizontal) coordinate and
    ``points[..., 1]`` the row coordinate; integer coordinates hit grid nodes
    exactly. With ``padding="zeros"`` every corner outside the map
    contributes zero, so samples fully outside return zeros with zero
    gradient. ``padding="border"`` clamps locations onto the map first.

    Args:
        feature_map: Tensor[b, c, d]
        points: Tensor[..., 2] in pixel coordinates
        padding: "zeros" or "border"

    Returns:
        Tensor[..., d], differentiable w.r.t. feature_map and points
    """
    if feature_map.dim() != 3:
        raise InvalidInputError(f"feature map must be [b, c, d], got {tuple(feature_map.shape)}")
    if points.shape[-1] != 2:
        raise InvalidInputError("sample points must have a trailing pair dimension")

    rows, cols, _ = feature_map.shape
    x = points[..., 0]
    y = points[..., 1]
    if padding == "border":
        x = x.clamp(0.0, cols - 1.0)
        y = y.clamp(0.0, rows - 1.0)
    elif padding == "zeros":
        # far-away points are fully outside either way; keeps the index cast bounded
        x = x.clamp(-2.0, cols + 1.0)
        y = y.clamp(-2.0, rows + 1.0)
    else:
        raise InvalidInputError(f"unknown padding mode '{padding}'")

    x0 = torch.floor(x).detach()
    y0 = torch.floor(y).detach()
    fx = x - x0
    fy = y - y0

    result = None
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xi = (x0 + dx).long()
            yi = (y0 + dy).long()
            inside = (xi >= 0) & (xi < cols) & (yi >= 0) & (yi < rows)
            weight = wx * wy * inside.to(feature_map.dtype)
            values = feature_map[yi.clamp(0, rows - 1), xi.clamp(0, cols - 1)]
            term = values * weight.unsqueeze(-1)
            result = term if result is None else result + term
    return result


def parameter_count(parameters: Iterable[torch.Tensor]) -> int:
    """Total number of scalar entries in a parameter collection."""
    return sum(int(p.numel()) for p in parameters)
