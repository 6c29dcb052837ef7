"""Key verification and privacy amplification via Toeplitz hashing.

A Toeplitz matrix over GF(2) is parameterized by a single seed of
in_len + out_len - 1 bits: entry T[i, j] = seed[i - j + in_len - 1], so the
first row is seed[in_len-1 .. 0] and the first column seed[in_len-1 ..].
Applying T to a bit vector is a binary convolution, which keeps the hot
path a single numpy call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..bits import as_bits, random_bits
from ..keys import KeyMaterial, KeyStage
from .sifting import LeakageLedger


def binary_entropy(e: float) -> float:
    """Shannon entropy of a Bernoulli(e) bit, in bits; h(0) = h(1) = 0."""
    if not 0.0 <= e <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {e}")
    if e == 0.0 or e == 1.0:
        return 0.0
    return -e * math.log2(e) - (1.0 - e) * math.log2(1.0 - e)


def compute_final_length(
    n_sifted: int,
    e_x: float,
    ledger: LeakageLedger,
    security_margin: int,
) -> int:
    """Asymptotic estimate of the extractable key length after compression.

    out = max(0, floor(n_sifted * (1 - h(e_x))) - syndrome - verification
              - margin); the result never grows when the error rate or any
    leakage term grows. Zero means the round yields no key.
    """
    if n_sifted < 0 or security_margin < 0:
        raise ValueError("inputs must be non-negative")
    usable = math.floor(n_sifted * (1.0 - binary_entropy(e_x)))
    out = usable - ledger.syndrome_bits - ledger.verification_bits - security_margin
    return max(0, out)


@dataclass(frozen=True)
class ToeplitzSeed:
    """Seed bits defining one Toeplitz matrix; length = in_len + out_len - 1."""

    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", as_bits(self.bits))

    @property
    def length(self) -> int:
        return int(self.bits.size)

    @staticmethod
    def required_length(in_len: int, out_len: int) -> int:
        return max(in_len + out_len - 1, 0)

    @classmethod
    def random(cls, in_len: int, out_len: int, rng: np.random.Generator) -> "ToeplitzSeed":
        return cls(bits=random_bits(cls.required_length(in_len, out_len), rng))


def toeplitz_apply(seed: ToeplitzSeed, x: np.ndarray, out_len: int) -> np.ndarray:
    """Multiply the seeded out_len x len(x) Toeplitz matrix by x over GF(2)."""
    x = as_bits(x)
    in_len = int(x.size)
    if out_len < 0:
        raise ValueError("out_len must be non-negative")
    if out_len == 0:
        return np.zeros(0, dtype=np.uint8)
    if seed.length != ToeplitzSeed.required_length(in_len, out_len):
        raise ValueError(
            f"seed length {seed.length} does not match dimensions "
            f"{out_len}x{in_len} (need {ToeplitzSeed.required_length(in_len, out_len)})"
        )
    if in_len == 0:
        return np.zeros(out_len, dtype=np.uint8)
    conv = np.convolve(seed.bits.astype(np.int64), x.astype(np.int64))
    return (conv[in_len - 1 : in_len - 1 + out_len] & 1).astype(np.uint8)


def verify_keys(
    k_a: KeyMaterial,
    k_b: KeyMaterial,
    hash_seed: ToeplitzSeed,
    tag_bits: int,
    ledger: LeakageLedger | None = None,
) -> bool:
    """Compare short hashes of the two keys under a fresh public seed.

    Equal keys always verify; unequal keys collide with probability 2^-tag_bits
    over the seed choice. The disclosed tag adds tag_bits to the ledger.
    """
    if k_a.length != k_b.length:
        raise ValueError(f"key lengths differ: {k_a.length} vs {k_b.length}")
    if tag_bits < 1:
        raise ValueError("tag_bits must be positive")
    tag_a = toeplitz_apply(hash_seed, k_a.bits, tag_bits)
    tag_b = toeplitz_apply(hash_seed, k_b.bits, tag_bits)
    if ledger is not None:
        ledger.add_verification(tag_bits)
    return bool(np.array_equal(tag_a, tag_b))


def amplify_privacy(key: KeyMaterial, seed: ToeplitzSeed, out_len: int) -> KeyMaterial:
    """Compress a verified key into its final form with a seeded Toeplitz hash."""
    if key.stage is not KeyStage.VERIFIED:
        raise ValueError(f"privacy amplification requires a verified key, got {key.stage.name}")
    if out_len > key.length:
        raise ValueError(f"out_len {out_len} exceeds key length {key.length}")
    final_bits = toeplitz_apply(seed, key.bits, out_len)
    return KeyMaterial(bits=final_bits, stage=KeyStage.FINAL)
