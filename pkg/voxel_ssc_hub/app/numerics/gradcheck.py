"""
Finite-difference verification of reverse-mode gradients.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import torch

from app.numerics.ops import DTYPE
from app.utils.errors import InvalidInputError


@dataclass
class GradCheckReport:
    """Outcome of a gradient check."""

    max_relative_error: float
    tolerance: float
    checked: int
    finite: bool = True
    worst_input: int = -1
    worst_index: Tuple[int, ...] = field(default_factory=tuple)
    analytic: float = 0.0
    numeric: float = 0.0
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.finite and self.max_relative_error < self.tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if not self.finite:
            return f"{status} non-finite evaluation: {self.message}"
        return (f"{status} max_rel_err={self.max_relative_error:.3e} over {self.checked} coords "
                f"(input {self.worst_input} at {self.worst_index}: "
                f"analytic={self.analytic:.6e}, numeric={self.numeric:.6e})")


def relative_error(analytic: float, numeric: float, floor: float) -> float:
    """|a - n| scaled by the larger magnitude, never by less than ``floor``."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _as_leaf(tensor: torch.Tensor) -> torch.Tensor:
    if tensor.dtype != DTYPE:
        raise InvalidInputError(f"gradient checks need double precision, got {tensor.dtype}")
    if tensor.is_leaf and tensor.requires_grad:
        return tensor
    return tensor.detach().clone().requires_grad_(True)


def grad_check(function: Callable[..., torch.Tensor], inputs: Sequence[torch.Tensor],
               h: float = 1e-5, tolerance: float = 1e-4, floor: float = 1e-3,
               max_coords: Optional[int] = None,
               generator: Optional[torch.Generator] = None) -> GradCheckReport:
    """
    Compare autograd gradients with central differences.

    Leaf tensors that already require grad (e.g. module parameters) are
    perturbed in place and restored exactly; other inputs are copied into
    fresh leaves. ``function`` is always called with the leaves.

    Args:
        function: Scalar-valued computation of the inputs
        inputs: Tensors to differentiate against
        h: Central-difference step
        tolerance: Relative error below which the check passes
        floor: Smallest magnitude used to scale the error
        max_coords: Check at most this many coordinates per input (sampled)
        generator: Generator used to sample coordinates

    Returns:
        GradCheckReport naming the worst coordinate
    """
    if h <= 0:
        raise InvalidInputError("finite-difference step must be positive")

    leaves: List[torch.Tensor] = [_as_leaf(t) for t in inputs]
    value = function(*leaves)
    if value.numel() != 1:
        raise InvalidInputError("grad_check needs a scalar-valued function")
    if not bool(torch.isfinite(value).all()):
        return GradCheckReport(math.inf, tolerance, 0, finite=False,
                               message="function value is not finite")

    grads = torch.autograd.grad(value.reshape(()), leaves, allow_unused=True)
    grads = [torch.zeros_like(leaf) if g is None else g for leaf, g in zip(leaves, grads)]

    report = GradCheckReport(0.0, tolerance, 0)
    with torch.no_grad():
        for position, (leaf, grad) in enumerate(zip(leaves, grads)):
            flat = leaf.detach().view(-1)
            flat_grad = grad.reshape(-1)
            count = flat.numel()
            if max_coords is not None and count > max_coords:
                order = torch.randperm(count, generator=generator)[:max_coords]
                coords = sorted(int(i) for i in order)
            else:
                coords = range(count)

            for index in coords:
                original = float(flat[index])
                flat[index] = original + h
                plus = float(function(*leaves))
                flat[index] = original - h
                minus = float(function(*leaves))
                flat[index] = original

                if not (math.isfinite(plus) and math.isfinite(minus)):
                    report.finite = False
                    report.message = f"non-finite value perturbing input {position} at {index}"
                    report.max_relative_error = math.inf
                    return report

                numeric = (plus - minus) / (2.0 * h)
                analytic = float(flat_grad[index])
                error = relative_error(analytic, numeric, floor)
                report.checked += 1
                if error >= report.max_relative_error:
                    report.max_relative_error = error
                    report.worst_input = position
                    report.worst_index = tuple(int(i) for i in _unravel(index, leaf.shape))
                    report.analytic = analytic
                    report.numeric = numeric
    return report


def _unravel(index: int, shape: torch.Size) -> Tuple[int, ...]:
    coords = []
    for extent in reversed(tuple(shape) or (1,)):
        coords.append(index % extent)
        index //= extent
    return tuple(reversed(coords))
