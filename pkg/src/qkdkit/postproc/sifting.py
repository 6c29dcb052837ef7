"""Announcements, key sifting and eavesdropping-level estimation.

Sifting keeps only positions that were detected, carried signal intensity
and were prepared and measured in the Z basis (keys are formed from Z-basis
bits only). Positions where both parties used X are disclosed in full and
feed the error-rate estimate that decides whether the session proceeds.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..channel import Basis, IntensityClass
from ..keys import KeyMaterial, KeyStage
from ..protocol import ProtocolError, PulseRecord, check_alignment


@dataclass
class LeakageLedger:
    """Running count of key-relevant bits disclosed over the public channel.

    Counters only grow; `total` feeds the final-length computation together
    with the configured security margin.
    """

    sifting_disclosed: int = 0
    syndrome_bits: int = 0
    verification_bits: int = 0

    def add_sifting(self, n: int) -> None:
        self._add("sifting_disclosed", n)

    def add_syndrome(self, n: int) -> None:
        self._add("syndrome_bits", n)

    def add_verification(self, n: int) -> None:
        self._add("verification_bits", n)

    def _add(self, name: str, n: int) -> None:
        if n < 0:
            raise ValueError("leakage increments must be non-negative")
        setattr(self, name, getattr(self, name) + n)


@dataclass(frozen=True)
class PairedBits:
    """Disclosed bit pairs (sender, receiver) at the same positions."""

    indices: np.ndarray
    alice: np.ndarray
    bob: np.ndarray

    @property
    def size(self) -> int:
        return int(self.alice.size)

    def mismatches(self) -> int:
        return int(np.count_nonzero(self.alice != self.bob))


@dataclass(frozen=True)
class AnnouncementBundle:
    """Everything announced before sifting, kept for audit.

    basis pairs and intensities are aligned with `detected_indices`;
    `x_basis_bits` holds the disclosed bit pairs at detected signal
    positions where both parties used the X basis.
    """

    detected_indices: np.ndarray
    alice_bases: list[Basis]
    bob_bases: list[Basis]
    intensities: list[IntensityClass]
    x_basis_bits: PairedBits


def announce_and_sift(
    alice_t: list[PulseRecord],
    bob_t: list[PulseRecord],
) -> tuple[KeyMaterial, KeyMaterial, PairedBits, AnnouncementBundle, LeakageLedger]:
    """Exchange announcements and sift the raw transcripts.

    Returns (sifted_A, sifted_B, x_sample, bundle, ledger). Sifted keys
    contain exactly the detected, signal-intensity, both-Z positions in
    index order; an empty result is legal and must be handled downstream.
    """
    check_alignment(alice_t, bob_t)

    detected, a_bases, b_bases, intensities = [], [], [], []
    keep_a, keep_b = [], []
    x_idx, x_a, x_b = [], [], []
    for a, b in zip(alice_t, bob_t):
        if not b.detected:
            continue
        if a.bit is None or a.basis is None or a.intensity is None:
            raise ProtocolError(f"sender record {a.index} is missing prepared fields")
        if b.measured_bit is None or b.measured_basis is None:
            raise ProtocolError(f"receiver record {b.index} is missing measured fields")
        detected.append(a.index)
        a_bases.append(a.basis)
        b_bases.append(b.measured_basis)
        intensities.append(a.intensity)
        if a.intensity is not IntensityClass.SIGNAL:
            continue
        if a.basis is Basis.Z and b.measured_basis is Basis.Z:
            keep_a.append(a.bit)
            keep_b.append(b.measured_bit)
        elif a.basis is Basis.X and b.measured_basis is Basis.X:
            x_idx.append(a.index)
            x_a.append(a.bit)
            x_b.append(b.measured_bit)

    x_sample = PairedBits(
        indices=np.asarray(x_idx, dtype=np.int64),
        alice=np.asarray(x_a, dtype=np.uint8),
        bob=np.asarray(x_b, dtype=np.uint8),
    )
    bundle = AnnouncementBundle(
        detected_indices=np.asarray(detected, dtype=np.int64),
        alice_bases=a_bases,
        bob_bases=b_bases,
        intensities=intensities,
        x_basis_bits=x_sample,
    )
    ledger = LeakageLedger()
    # Both parties publish their bits at matched-X signal positions.
    ledger.add_sifting(2 * x_sample.size)

    sifted_a = KeyMaterial(np.asarray(keep_a, dtype=np.uint8), stage=KeyStage.SIFTED)
    sifted_b = KeyMaterial(np.asarray(keep_b, dtype=np.uint8), stage=KeyStage.SIFTED)
    return sifted_a, sifted_b, x_sample, bundle, ledger


class Decision(enum.Enum):
    PROCEED = "proceed"
    ABORT = "abort"


REASON_EMPTY_SAMPLE = "empty-sample"
REASON_THRESHOLD = "error-rate-above-threshold"


@dataclass(frozen=True)
class EstimationResult:
    """Outcome of the eavesdropping-level estimate over the disclosed X sample."""

    e_x: Optional[float]
    sample_size: int
    decision: Decision
    reason: Optional[str] = None
    threshold: float = field(default=0.11)


def estimate_eavesdropping(x_sample: PairedBits, threshold: float) -> EstimationResult:
    """Estimate the X-basis error fraction and decide whether to proceed.

    The protocol aborts when the observed fraction exceeds the threshold,
    or (with a distinct reason) when no sample is available at all.
    """
    if not 0.0 < threshold < 0.5:
        raise ValueError(f"threshold must lie in (0, 0.5), got {threshold}")
    if x_sample.size == 0:
        return EstimationResult(
            e_x=None,
            sample_size=0,
            decision=Decision.ABORT,
            reason=REASON_EMPTY_SAMPLE,
            threshold=threshold,
        )
    e_x = x_sample.mismatches() / x_sample.size
    if e_x > threshold:
        return EstimationResult(
            e_x=e_x,
            sample_size=x_sample.size,
            decision=Decision.ABORT,
            reason=REASON_THRESHOLD,
            threshold=threshold,
        )
    return EstimationResult(
        e_x=e_x, sample_size=x_sample.size, decision=Decision.PROCEED, threshold=threshold
    )
