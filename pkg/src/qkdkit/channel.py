"""Pulse preparation, lossy channel, eavesdropper and measurement model.

The quantum layer is modeled at the level of the four states used by the
two mutually unbiased bases: a pulse carries exactly one prepared bit in
one basis, measuring in the preparation basis reproduces the bit, and
measuring in the other basis yields a uniformly random outcome.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Optional


class Basis(enum.Enum):
    Z = "Z"
    X = "X"

    def other(self) -> "Basis":
        return Basis.X if self is Basis.Z else Basis.Z


class IntensityClass(enum.Enum):
    SIGNAL = "signal"
    DECOY = "decoy"


class EveKind(enum.Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept_resend"


@dataclass(frozen=True)
class Qubit:
    """One of the four conjugate-coding states, identified by (bit, basis)."""

    prepared_bit: int
    prepared_basis: Basis

    def __post_init__(self):
        if self.prepared_bit not in (0, 1):
            raise ValueError(f"prepared_bit must be 0 or 1, got {self.prepared_bit}")


@dataclass(frozen=True)
class Pulse:
    """A qubit tagged with the intensity class it was transmitted at."""

    qubit: Qubit
    intensity: IntensityClass


@dataclass(frozen=True)
class ChannelParams:
    """Loss and noise knobs of the quantum channel.

    transmittance: probability that a transmitted pulse is detected at all.
    misalignment_error: probability that a detection's matched-basis outcome
        is flipped.
    decoy_detect_scale: extra multiplier on transmittance for decoy pulses.
    """

    transmittance: float = 1.0
    misalignment_error: float = 0.0
    decoy_detect_scale: float = 1.0

    def __post_init__(self):
        for name in ("transmittance", "misalignment_error", "decoy_detect_scale"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def detection_probability(self, intensity: IntensityClass) -> float:
        scale = self.decoy_detect_scale if intensity is IntensityClass.DECOY else 1.0
        return self.transmittance * scale


@dataclass(frozen=True)
class EveModel:
    """Eavesdropper configuration; `fraction` is the portion of pulses attacked."""

    kind: EveKind = EveKind.NONE
    fraction: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction must lie in [0, 1], got {self.fraction}")
        if self.kind is EveKind.NONE and self.fraction != 0.0:
            raise ValueError("fraction must be 0 when no eavesdropper is present")


@dataclass(frozen=True)
class DetectionEvent:
    """A pulse that survived the channel.

    `flip` records a misalignment error sampled at transmission time; it is
    applied to the receiver's measured bit.
    """

    qubit: Qubit
    flip: bool = False


def prepare_pulse(bit: int, basis: Basis, intensity: IntensityClass) -> Pulse:
    """Encode one bit in one basis, producing the unique matching state."""
    return Pulse(qubit=Qubit(prepared_bit=bit, prepared_basis=basis), intensity=intensity)


def measure(q: Qubit, basis: Basis, rng: random.Random) -> int:
    """Measure a qubit in the given basis.

    In the preparation basis the outcome equals the prepared bit; in the
    conjugate basis the outcome is a fresh uniform bit.
    """
    if basis is q.prepared_basis:
        return q.prepared_bit
    return rng.getrandbits(1)


def transmit(
    pulse: Pulse,
    ch: ChannelParams,
    eve: EveModel,
    rng: random.Random,
) -> Optional[DetectionEvent]:
    """Send a pulse through the channel; None means it was never detected.

    A detected pulse is attacked with probability `eve.fraction` when an
    intercept-resend eavesdropper is configured: the attacker measures in a
    uniformly random basis and re-prepares the state from her outcome.
    """
    p_detect = ch.detection_probability(pulse.intensity)
    if p_detect <= 0.0 or rng.random() >= p_detect:
        return None

    qubit = pulse.qubit
    if eve.kind is EveKind.INTERCEPT_RESEND and eve.fraction > 0.0:
        if rng.random() < eve.fraction:
            eve_basis = Basis.Z if rng.getrandbits(1) == 0 else Basis.X
            outcome = measure(qubit, eve_basis, rng)
            qubit = Qubit(prepared_bit=outcome, prepared_basis=eve_basis)

    flip = ch.misalignment_error > 0.0 and rng.random() < ch.misalignment_error
    return DetectionEvent(qubit=qubit, flip=flip)
