"""Application-layer consumers of distributed keys and quantum-risk arithmetic."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .bits import as_bits, xor_bits
from .keys import KeyMaterial, KeyReuseError


class KeyTooShortError(Exception):
    """The pad is shorter than the message it should cover."""


def otp_encrypt(message: np.ndarray, key: KeyMaterial) -> np.ndarray:
    """One-time-pad encryption: ciphertext = message XOR key.

    The key must be at least as long as the message and is marked consumed;
    encrypting twice with the same material raises KeyReuseError.
    """
    message = as_bits(message)
    if key.length < message.size:
        raise KeyTooShortError(f"key has {key.length} bits, message needs {message.size}")
    if key.consumed:
        raise KeyReuseError("one-time pad has already been used")
    pad = key.consume()
    return xor_bits(message, pad[: message.size])


def otp_decrypt(ciphertext: np.ndarray, key: KeyMaterial) -> np.ndarray:
    """Invert the pad: plaintext = ciphertext XOR key.

    Decryption also retires the key so it can never be used to encrypt; the
    receiving side's copy is spent by reading the one message it protects.
    """
    ciphertext = as_bits(ciphertext)
    if key.length < ciphertext.size:
        raise KeyTooShortError(f"key has {key.length} bits, ciphertext needs {ciphertext.size}")
    key.consumed = True
    return xor_bits(ciphertext, key.bits[: ciphertext.size])


@dataclass(frozen=True)
class MoscaParams:
    """Migration-urgency inputs, all in years.

    shelf_life: how long the protected data must stay secret.
    migration: how long switching to quantum-safe tools will take.
    quantum_arrival: time until attacks on current schemes become practical.
    """

    shelf_life: float
    migration: float
    quantum_arrival: float

    def __post_init__(self):
        for name in ("shelf_life", "migration", "quantum_arrival"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


class RiskStatus(enum.Enum):
    AT_RISK = "at_risk"
    SAFE = "safe"


@dataclass(frozen=True)
class MoscaVerdict:
    status: RiskStatus
    slack: float  # quantum_arrival - (shelf_life + migration)


def mosca_check(params: MoscaParams) -> MoscaVerdict:
    """Data is at risk exactly when shelf life plus migration time exceeds
    the time to a practical quantum attack (strict inequality)."""
    slack = params.quantum_arrival - (params.shelf_life + params.migration)
    status = RiskStatus.AT_RISK if slack < 0 else RiskStatus.SAFE
    return MoscaVerdict(status=status, slack=slack)


def grover_adjusted_length(classical_len: int) -> int:
    """Key length delivering the same brute-force margin against a quadratic
    quantum search speedup: twice the classical length."""
    if classical_len < 1:
        raise ValueError("key length must be positive")
    return 2 * classical_len


@dataclass(frozen=True)
class CipherKeyRequest:
    """Key-renewal demand for a symmetric cipher on a point-to-point link."""

    key_len: int
    renewal_interval: float  # seconds
    available_rate: float  # secret bits per second

    def __post_init__(self):
        if self.key_len < 1 or self.renewal_interval <= 0 or self.available_rate <= 0:
            raise ValueError("request fields must be positive")


@dataclass(frozen=True)
class RenewalVerdict:
    feasible: bool
    margin: float  # headroom when feasible, deficit when not (bits/second)


def key_renewal_feasibility(req: CipherKeyRequest) -> RenewalVerdict:
    """A renewal schedule is feasible when its demand rate fits the supply."""
    demand = req.key_len / req.renewal_interval
    if demand <= req.available_rate:
        return RenewalVerdict(feasible=True, margin=req.available_rate - demand)
    return RenewalVerdict(feasible=False, margin=demand - req.available_rate)
