"""Quantum-phase driver: basis selection, pulse-by-pulse exchange, transcripts.

Runs the prepare/transmit/measure loop for a whole session and returns one
aligned transcript per party. All randomness flows from per-party seeded
sources derived from a single master seed, so identical seeds reproduce
identical transcripts bit for bit.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Optional, Union

from .bits import derive_seed
from .channel import (
    Basis,
    ChannelParams,
    EveModel,
    IntensityClass,
    measure,
    prepare_pulse,
    transmit,
)


class ProtocolError(Exception):
    """Raised when transcripts or configuration violate the protocol contract."""


@dataclass(frozen=True)
class SymmetricRandom:
    """Choose each basis independently with probability 1/2."""


@dataclass(frozen=True)
class AsymmetricRandom:
    """Choose the Z basis with probability p_z > the X basis otherwise."""

    p_z: float

    def __post_init__(self):
        if not 0.0 < self.p_z < 1.0:
            raise ValueError(f"p_z must lie in (0, 1), got {self.p_z}")


@dataclass(frozen=True)
class PresharedSequence:
    """Derive bases pseudo-randomly from a pre-distributed shared secret.

    Both parties expand the same seed, so their basis sequences agree at
    every position and no sifting loss occurs from basis mismatch.
    """

    shared_seed: bytes

    def __post_init__(self):
        if not self.shared_seed:
            raise ValueError("shared_seed must be non-empty")


BasisStrategy = Union[SymmetricRandom, AsymmetricRandom, PresharedSequence]


def _preshared_bit(seed: bytes, position: int) -> int:
    # Counter-mode SHA-256 expansion: block i supplies bits 256*i .. 256*i+255.
    block, offset = divmod(position, 256)
    digest = hashlib.sha256(seed + block.to_bytes(8, "big")).digest()
    return (digest[offset // 8] >> (7 - offset % 8)) & 1


def choose_basis(strategy: BasisStrategy, position: int, rng: random.Random) -> Basis:
    """Select the basis for one position under the configured strategy."""
    if isinstance(strategy, SymmetricRandom):
        return Basis.Z if rng.getrandbits(1) == 0 else Basis.X
    if isinstance(strategy, AsymmetricRandom):
        return Basis.Z if rng.random() < strategy.p_z else Basis.X
    if isinstance(strategy, PresharedSequence):
        return Basis.Z if _preshared_bit(strategy.shared_seed, position) == 0 else Basis.X
    raise TypeError(f"unknown basis strategy: {strategy!r}")


@dataclass(frozen=True)
class ProtocolConfig:
    """Session-level knobs for the quantum phase.

    Bit values are always drawn with probability 1/2; decoy tagging is
    independent per pulse with probability `decoy_probability`.
    """

    n_pulses: int
    strategy: BasisStrategy
    decoy_probability: float = 0.0

    def __post_init__(self):
        if self.n_pulses < 1:
            raise ValueError(f"n_pulses must be >= 1, got {self.n_pulses}")
        if not 0.0 <= self.decoy_probability < 1.0:
            raise ValueError(f"decoy_probability must lie in [0, 1), got {self.decoy_probability}")


@dataclass(frozen=True)
class PulseRecord:
    """Per-position audit record.

    The sender's records carry the prepared fields; the receiver's records
    carry the measured fields, which are present exactly when the pulse was
    detected.
    """

    index: int
    bit: Optional[int] = None
    basis: Optional[Basis] = None
    intensity: Optional[IntensityClass] = None
    detected: bool = False
    measured_bit: Optional[int] = None
    measured_basis: Optional[Basis] = None

    def __post_init__(self):
        if (self.measured_bit is None) != (self.measured_basis is None):
            raise ValueError("measured_bit and measured_basis must be set together")
        if self.measured_bit is not None and not self.detected:
            raise ValueError("measured fields require detected=True")


@dataclass(frozen=True)
class SessionSeeds:
    """Independent seeds for each party's random source plus the channel."""

    alice: int
    bob: int
    channel: int

    @classmethod
    def from_master(cls, master: int) -> "SessionSeeds":
        return cls(
            alice=derive_seed(master, "alice"),
            bob=derive_seed(master, "bob"),
            channel=derive_seed(master, "channel"),
        )


def run_quantum_phase(
    cfg: ProtocolConfig,
    ch: ChannelParams,
    eve: EveModel,
    seeds: SessionSeeds,
) -> tuple[list[PulseRecord], list[PulseRecord]]:
    """Execute the full pulse exchange and return (sender, receiver) transcripts.

    Both transcripts have length cfg.n_pulses with aligned indices. The
    sender transcript carries prepared bits/bases/intensities, the receiver
    transcript detection flags and measured bits/bases. The receiver draws a
    measurement basis for every position, detected or not.
    """
    alice_rng = random.Random(seeds.alice)
    bob_rng = random.Random(seeds.bob)
    channel_rng = random.Random(seeds.channel)

    alice_t: list[PulseRecord] = []
    bob_t: list[PulseRecord] = []
    for i in range(cfg.n_pulses):
        bit = alice_rng.getrandbits(1)
        a_basis = choose_basis(cfg.strategy, i, alice_rng)
        decoy = cfg.decoy_probability > 0.0 and alice_rng.random() < cfg.decoy_probability
        intensity = IntensityClass.DECOY if decoy else IntensityClass.SIGNAL

        pulse = prepare_pulse(bit, a_basis, intensity)
        event = transmit(pulse, ch, eve, channel_rng)
        b_basis = choose_basis(cfg.strategy, i, bob_rng)

        if event is None:
            alice_t.append(PulseRecord(index=i, bit=bit, basis=a_basis, intensity=intensity))
            bob_t.append(PulseRecord(index=i))
            continue

        outcome = measure(event.qubit, b_basis, bob_rng)
        if event.flip:
            outcome ^= 1
        alice_t.append(
            PulseRecord(index=i, bit=bit, basis=a_basis, intensity=intensity, detected=True)
        )
        bob_t.append(
            PulseRecord(
                index=i,
                detected=True,
                measured_bit=outcome,
                measured_basis=b_basis,
            )
        )
    return alice_t, bob_t


def check_alignment(alice_t: list[PulseRecord], bob_t: list[PulseRecord]) -> None:
    """Verify the two transcripts describe the same session."""
    if len(alice_t) != len(bob_t):
        raise ProtocolError(f"transcript lengths differ: {len(alice_t)} vs {len(bob_t)}")
    for i, (a, b) in enumerate(zip(alice_t, bob_t)):
        if a.index != i or b.index != i:
            raise ProtocolError(f"transcript indices misaligned at position {i}")


def dump_transcript(records: list[PulseRecord]) -> str:
    """Render a transcript as audit text, one position per line.

    Line format: index,basis,bit,intensity,detected,measured_basis,measured_bit
    with empty fields for values the party does not hold.
    """
    lines = []
    for r in records:
        lines.append(
            ",".join(
                [
                    str(r.index),
                    r.basis.value if r.basis is not None else "",
                    str(r.bit) if r.bit is not None else "",
                    r.intensity.value if r.intensity is not None else "",
                    "1" if r.detected else "0",
                    r.measured_basis.value if r.measured_basis is not None else "",
                    str(r.measured_bit) if r.measured_bit is not None else "",
                ]
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def parse_transcript(text: str) -> list[PulseRecord]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 7:
            raise ProtocolError(f"line {lineno}: expected 7 fields, got {len(fields)}")
        idx, basis, bit, intensity, detected, m_basis, m_bit = fields
        records.append(
            PulseRecord(
                index=int(idx),
                basis=Basis(basis) if basis else None,
                bit=int(bit) if bit else None,
                intensity=IntensityClass(intensity) if intensity else None,
                detected=detected == "1",
                measured_basis=Basis(m_basis) if m_basis else None,
                measured_bit=int(m_bit) if m_bit else None,
            )
        )
    return records
