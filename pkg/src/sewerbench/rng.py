"""Seeded random streams shared by every stochastic stage.

All randomness in this package is drawn from numpy's PCG64 bit generator.
To keep corrupted datasets and trained models reproducible even across
numpy upgrades, the non-uniform laws used here (Gaussian, geometric) are
derived from raw uniform doubles rather than numpy's distribution methods,
whose internal algorithms are not covered by a stability guarantee:

* Gaussian draws use the Box-Muller transform.
* Geometric draws use inverse-CDF sampling.

Streams for independent stages (one per perturbed channel, per model seed,
per sweep cell) are derived from the coordinates of the stage, so parallel
scheduling can never change results.
"""

from __future__ import annotations

import zlib

import numpy as np


def _token_to_int(token) -> int:
    if isinstance(token, (int, np.integer)):
        return int(token) & 0xFFFFFFFF
    return zlib.crc32(str(token).encode("utf-8"))


def derive_stream(seed: int, *tokens) -> np.random.Generator:
    """Build an isolated PCG64 stream from a base seed and stage coordinates.

    Tokens may be strings (channel names, error kinds) or integers (rates
    scaled to integers, trial seeds). String tokens are folded to 32-bit
    CRCs so the entropy pool is platform independent.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_token_to_int(t) for t in tokens]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def normal(rng: np.random.Generator, size: int) -> np.ndarray:
    """Standard normal samples via Box-Muller on PCG64 uniforms."""
    if size == 0:
        return np.empty(0)
    n_pairs = (size + 1) // 2
    # random() is in [0, 1); flip to (0, 1] so the log is finite.
    u1 = 1.0 - rng.random(n_pairs)
    u2 = rng.random(n_pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    samples = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])
    return samples[:size]


def geometric(rng: np.random.Generator, mean: float) -> int:
    """One geometric draw with the given mean, support {1, 2, ...}.

    Inverse CDF of the shifted geometric law with p = 1/mean; mean = 1
    degenerates to the constant 1.
    """
    if mean <= 1.0:
        return 1
    p = 1.0 / float(mean)
    u = 1.0 - rng.random()  # (0, 1]
    return int(np.ceil(np.log(u) / np.log1p(-p)))


def permutation(rng: np.random.Generator, n: int) -> np.ndarray:
    """Deterministic permutation of range(n) by sorting uniform keys."""
    return np.argsort(rng.random(n), kind="stable")
