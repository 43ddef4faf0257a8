"""
Differentiable computation substrate: double-precision torch tensors,
bilinear sampling, softmax normalization and gradient verification.
"""

from .ops import DTYPE, as_tensor, bilinear_sample, ensure_finite, set_deterministic, softmax_normalize
from .gradcheck import GradCheckReport, grad_check
from .rng import derive_seed, make_numpy_rng, make_torch_rng

__all__ = [
    'DTYPE',
    'as_tensor',
    'bilinear_sample',
    'ensure_finite',
    'set_deterministic',
    'softmax_normalize',
    'GradCheckReport',
    'grad_check',
    'derive_seed',
    'make_numpy_rng',
    'make_torch_rng',
]
