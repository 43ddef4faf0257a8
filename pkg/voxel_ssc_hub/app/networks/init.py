"""
Seeded parameter initialization.

Every network is built first and then initialized here from one explicit
``torch.Generator`` so that a run seed fixes every parameter bit.
"""

import math

import torch
from torch import nn

from app.numerics.ops import DTYPE


def _uniform_(tensor: torch.Tensor, bound: float, generator: torch.Generator) -> None:
    draw = torch.rand(tensor.shape, generator=generator, dtype=DTYPE)
    with torch.no_grad():
        tensor.copy_((draw * 2.0 - 1.0) * bound)


def normal_(tensor: torch.Tensor, std: float, generator: torch.Generator) -> None:
    draw = torch.randn(tensor.shape, generator=generator, dtype=DTYPE)
    with torch.no_grad():
        tensor.copy_(draw * std)


def init_parameters(module: nn.Module, generator: torch.Generator) -> None:
    """
    Initialize linear and convolution layers with fan-in scaled uniform draws.

    Layer norms reset to unit scale and zero shift. Modules that define
    ``reset_special(generator)`` (zero-initialized heads, query embeddings)
    run it after the generic pass, in module registration order.

    Args:
        module: Network to initialize in place
        generator: Source of every random draw
    """
    for layer in module.modules():
        if isinstance(layer, (nn.Linear, nn.Conv2d)):
            fan_in = layer.weight[0].numel()
            bound = 1.0 / math.sqrt(fan_in)
            _uniform_(layer.weight, bound, generator)
            if layer.bias is not None:
                _uniform_(layer.bias, bound, generator)
        elif isinstance(layer, nn.LayerNorm):
            with torch.no_grad():
                layer.weight.fill_(1.0)
                layer.bias.zero_()
    for layer in module.modules():
        reset = getattr(layer, 'reset_special', None)
        if callable(reset):
            reset(generator)


def randomize_parameters(module: nn.Module, generator: torch.Generator, std: float = 0.3) -> None:
    """Overwrite every parameter with Gaussian draws, zero-initialized heads included."""
    for param in module.parameters():
        normal_(param, std, generator)
