"""Seeded random generation helpers.

All randomness in the toolkit flows through a ``numpy.random.Generator``
seeded explicitly; batch experiments derive one independent seed per trial by
XOR-ing the base seed with the trial index, so results never depend on
evaluation order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def derived_seed(seed: int, index: int) -> int:
    """Per-trial seed: base seed XOR trial index, as an unsigned 64-bit value."""
    return (int(seed) ^ int(index)) & _MASK64


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def complex_gaussian(rng, shape):
    """Array of i.i.d. standard complex Gaussian entries (unit variance)."""
    return np.sqrt(0.5) * (
        rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    )
