"""
Seeded random generators.

Two generators are used, both fully determined by their seed:

- ``torch.Generator`` (CPU, Mersenne Twister MT19937) for parameter
  initialisation and random query proposals.
- ``numpy.random.Generator`` over ``PCG64`` for scene synthesis and depth
  noise.
"""

import numpy as np
import torch

_SEED_MASK = 0xFFFF_FFFF_FFFF_FFFF


def make_torch_rng(seed: int) -> torch.Generator:
    """Create a CPU torch generator seeded with a 64-bit seed."""
    generator = torch.Generator(device="cpu")
    generator.manual_seed(int(seed) & _SEED_MASK)
    return generator


def make_numpy_rng(*seed_parts: int) -> np.random.Generator:
    """
    Create a PCG64 generator from one or more integer seed parts.

    Args:
        seed_parts: e.g. (dataset seed, scene index, frame index)

    Returns:
        numpy Generator; identical parts give identical draw sequences
    """
    sequence = np.random.SeedSequence([int(p) & _SEED_MASK for p in seed_parts])
    return np.random.Generator(np.random.PCG64(sequence))


def derive_seed(*seed_parts: int) -> int:
    """Derive a stable 63-bit child seed from integer parts."""
    sequence = np.random.SeedSequence([int(p) & _SEED_MASK for p in seed_parts])
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
