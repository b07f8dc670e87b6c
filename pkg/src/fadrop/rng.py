"""Deterministic 64-bit randomness for reproducible augmentation streams.

Every random decision in this package flows through SplitMix64 (Steele,
Lea & Flood's ``splitmix64``), chosen because it is tiny, fully specified
by two multiplier constants, and trivially portable: an independent
implementation in any language can reproduce our streams bit for bit.

Algorithm (all arithmetic modulo 2**64):

    state <- state + 0x9E3779B97F4A7C15          # golden-ratio increment
    z <- state
    z <- (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9
    z <- (z XOR (z >> 27)) * 0x94D049BB133111EB
    output <- z XOR (z >> 31)

Uniform doubles take the top 53 bits: ``(output >> 11) * 2**-53``, giving
values in [0, 1).

Seeds for individual (step, caption) cells are derived with
:func:`derive_seed`, which absorbs each input through the same finalizer
so that distinct cells get independent streams. The scalar and the
numpy-vectorized paths compute identical bits; tests pin this down.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX_MULT_1 = 0xBF58476D1CE4E5B9
_MIX_MULT_2 = 0x94D049BB133111EB

# 2**-53, the spacing of the 53-bit uniform grid.
_UNIT = 1.1102230246251565e-16


def mix64(x: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit avalanche function."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * _MIX_MULT_1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX_MULT_2) & MASK64
    return x ^ (x >> 31)


def derive_seed(global_seed: int, step: int, caption_index: int) -> int:
    """Derive the per-cell seed for one (step, caption) augmentation cell.

    The global seed and both coordinates are each absorbed through the
    SplitMix64 finalizer, with distinct golden-ratio offsets keeping the
    step and caption domains separated:

        h = mix64(global_seed)
        h = mix64(h XOR (step + GAMMA))
        h = mix64(h XOR (caption_index + 2*GAMMA))

    Identical inputs always map to identical outputs; distinct
    (step, caption_index) pairs collide only with birthday probability
    on 64 bits (about 3e-8 across a million cells).
    """
    h = mix64(global_seed & MASK64)
    h = mix64(h ^ ((step + GOLDEN_GAMMA) & MASK64))
    h = mix64(h ^ ((caption_index + 2 * GOLDEN_GAMMA) & MASK64))
    return h


class SplitMix64:
    """Sequential SplitMix64 generator over a derived seed."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_uint64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        """Next double in [0, 1), from the top 53 bits of the next word."""
        return (self.next_uint64() >> 11) * _UNIT

    def shuffled(self, n: int) -> list[int]:
        """Fisher-Yates permutation of range(n), consuming one word per swap."""
        items = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound), via rejection sampling."""
        limit = MASK64 - (MASK64 % bound)
        while True:
            z = self.next_uint64()
            if z < limit:
                return z % bound


# Vectorized twins of the scalar path. numpy uint64 arithmetic wraps
# modulo 2**64, matching the masked Python-int arithmetic above exactly.

_NP_GAMMA = np.uint64(GOLDEN_GAMMA)
_NP_M1 = np.uint64(_MIX_MULT_1)
_NP_M2 = np.uint64(_MIX_MULT_2)


def mix64_np(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= _NP_M1
    x ^= x >> np.uint64(27)
    x *= _NP_M2
    x ^= x >> np.uint64(31)
    return x


def derive_seeds_np(global_seed: int, step: int, caption_indices: np.ndarray) -> np.ndarray:
    """Vectorized :func:`derive_seed` over an array of caption indices."""
    idx = caption_indices.astype(np.uint64)
    h0 = mix64(global_seed & MASK64)
    h1 = mix64(h0 ^ ((step + GOLDEN_GAMMA) & MASK64))
    h = np.full(idx.shape, np.uint64(h1), dtype=np.uint64)
    h ^= idx + np.uint64((2 * GOLDEN_GAMMA) & MASK64)
    return mix64_np(h)


def uniforms_at_np(seeds: np.ndarray, draw_numbers: np.ndarray) -> np.ndarray:
    """The k-th uniform of each seed's stream, without sequential stepping.

    SplitMix64's k-th output from seed s is ``mix64(s + k * GAMMA)``, so
    draw number k (1-based, as consumed by ``SplitMix64.uniform``) is a
    pure function of (seed, k).
    """
    state = seeds.astype(np.uint64) + draw_numbers.astype(np.uint64) * _NP_GAMMA
    return (mix64_np(state) >> np.uint64(11)).astype(np.float64) * _UNIT
