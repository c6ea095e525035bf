"""Deterministic random streams.

Algorithm identifier: ``philox4x64-10/u53/box-muller``.

* A stream for a 64-bit seed ``s`` is numpy's Philox4x64-10 bit generator
  keyed with ``(s, 0)`` and a zero counter (no seed hashing).
* Uniform doubles are ``(next_uint64 >> 11) * 2**-53`` in ``[0, 1)``, which
  is what ``Generator.random`` produces for Philox.
* Standard Gaussians use the cosine branch of Box-Muller:
  ``sqrt(-2 log(1 - u1)) * cos(2 pi u2)``.
* Sub-streams (trials, cells, directions) are keyed by
  ``splitmix64(seed ^ index)`` so parallel and serial runs see the same
  numbers.
"""

import numpy as np

ALGORITHM = "philox4x64-10/u53/box-muller"

_MASK64 = (1 << 64) - 1


def splitmix64(x):
    """One round of the SplitMix64 output mixer on a 64-bit integer."""
    z = (int(x) + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed, index):
    """Seed of the ``index``-th sub-stream of ``seed``."""
    return splitmix64((int(seed) & _MASK64) ^ (int(index) & _MASK64))


def check_seed(seed):
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream(seed):
    """Fresh generator for ``seed``; identical seeds give identical streams."""
    key = np.array([check_seed(seed), 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def uniform(gen, shape):
    return gen.random(shape)


def gaussian(gen, shape):
    u1 = 1.0 - gen.random(shape)
    u2 = gen.random(shape)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def unit_vector(gen, n):
    """Uniformly distributed direction on the unit sphere of R^n."""
    while True:
        z = gaussian(gen, n)
        nrm = np.linalg.norm(z)
        if nrm > 1e-12:
            return z / nrm
