import random
from fractions import Fraction

import pytest
from scipy.stats import binomtest

from oracles import ALL_STATES, intercept_resend_error_probability
from qkdkit.channel import (
    Basis,
    ChannelParams,
    DetectionEvent,
    EveKind,
    EveModel,
    IntensityClass,
    Qubit,
    measure,
    prepare_pulse,
    transmit,
)


def test_prepare_pulse_encodes_all_four_states():
    p = prepare_pulse(0, Basis.Z, IntensityClass.SIGNAL)
    assert p.qubit == Qubit(0, Basis.Z) and p.intensity is IntensityClass.SIGNAL
    p = prepare_pulse(1, Basis.X, IntensityClass.SIGNAL)
    assert p.qubit == Qubit(1, Basis.X)
    p = prepare_pulse(0, Basis.X, IntensityClass.DECOY)
    assert p.qubit == Qubit(0, Basis.X) and p.intensity is IntensityClass.DECOY
    with pytest.raises(ValueError):
        Qubit(2, Basis.Z)


def test_matched_basis_measurement_is_deterministic():
    rng = random.Random(1)
    for bit, basis in ALL_STATES:
        q = Qubit(bit, basis)
        assert all(measure(q, basis, rng) == bit for _ in range(200))


def test_mismatched_basis_measurement_is_uniform():
    rng = random.Random(2)
    n = 100_000
    zeros = sum(measure(Qubit(0, Basis.X), Basis.Z, rng) == 0 for _ in range(n))
    assert abs(zeros / n - 0.5) < 0.01
    # two-sided binomial test for p = 1/2 at significance 1e-3
    assert binomtest(zeros, n, 0.5).pvalue > 1e-3


def test_zero_transmittance_never_detects():
    rng = random.Random(3)
    ch = ChannelParams(transmittance=0.0)
    pulse = prepare_pulse(1, Basis.Z, IntensityClass.SIGNAL)
    assert all(transmit(pulse, ch, EveModel(), rng) is None for _ in range(1000))


def test_noiseless_matched_transmission_is_error_free():
    rng = random.Random(4)
    ch = ChannelParams(transmittance=1.0)
    for bit, basis in ALL_STATES:
        pulse = prepare_pulse(bit, basis, IntensityClass.SIGNAL)
        for _ in range(100):
            event = transmit(pulse, ch, EveModel(), rng)
            assert event is not None and not event.flip
            assert measure(event.qubit, basis, rng) == bit


def test_decoy_detect_scale_reduces_detections():
    rng = random.Random(5)
    ch = ChannelParams(transmittance=1.0, decoy_detect_scale=0.4)
    decoy = prepare_pulse(0, Basis.Z, IntensityClass.DECOY)
    n = 50_000
    detections = sum(transmit(decoy, ch, EveModel(), rng) is not None for _ in range(n))
    assert abs(detections / n - 0.4) < 0.01


def test_full_intercept_resend_gives_quarter_error_rate():
    # independent oracle first: exact enumeration gives 1/4
    assert intercept_resend_error_probability() == Fraction(1, 4)

    rng = random.Random(6)
    ch = ChannelParams(transmittance=1.0)
    eve = EveModel(kind=EveKind.INTERCEPT_RESEND, fraction=1.0)
    n = 100_000
    errors = 0
    for i in range(n):
        bit, basis = ALL_STATES[i % 4]
        event = transmit(prepare_pulse(bit, basis, IntensityClass.SIGNAL), ch, eve, rng)
        assert event is not None
        errors += measure(event.qubit, basis, rng) != bit
    assert abs(errors / n - 0.25) < 0.01


def test_partial_interception_scales_linearly():
    rng = random.Random(7)
    ch = ChannelParams(transmittance=1.0)
    n = 60_000
    for fraction in (0.0, 0.5, 1.0):
        kind = EveKind.INTERCEPT_RESEND if fraction else EveKind.NONE
        eve = EveModel(kind=kind, fraction=fraction)
        errors = 0
        for i in range(n):
            bit, basis = ALL_STATES[i % 4]
            event = transmit(prepare_pulse(bit, basis, IntensityClass.SIGNAL), ch, eve, rng)
            errors += measure(event.qubit, basis, rng) != bit
        expected = fraction / 4
        se = (max(expected * (1 - expected), 1e-9) / n) ** 0.5
        assert abs(errors / n - expected) <= max(3 * se, 1e-9)


def test_misalignment_flips_matched_outcomes():
    rng = random.Random(8)
    ch = ChannelParams(transmittance=1.0, misalignment_error=1.0)
    pulse = prepare_pulse(0, Basis.Z, IntensityClass.SIGNAL)
    event = transmit(pulse, ch, EveModel(), rng)
    assert event is not None and event.flip


def test_identical_seeds_reproduce_transmission():
    ch = ChannelParams(transmittance=0.6, misalignment_error=0.05)
    eve = EveModel(kind=EveKind.INTERCEPT_RESEND, fraction=0.3)

    def run(seed):
        rng = random.Random(seed)
        out = []
        for i in range(2000):
            bit, basis = ALL_STATES[i % 4]
            event = transmit(prepare_pulse(bit, basis, IntensityClass.SIGNAL), ch, eve, rng)
            if event is None:
                out.append(None)
            else:
                out.append((event.qubit.prepared_bit, event.qubit.prepared_basis, event.flip))
        return out

    assert run(99) == run(99)
    assert run(99) != run(100)


def test_parameter_validation():
    with pytest.raises(ValueError):
        ChannelParams(transmittance=1.5)
    with pytest.raises(ValueError):
        ChannelParams(misalignment_error=-0.1)
    with pytest.raises(ValueError):
        EveModel(kind=EveKind.NONE, fraction=0.2)
    with pytest.raises(ValueError):
        EveModel(kind=EveKind.INTERCEPT_RESEND, fraction=1.2)
    # intercept-resend with fraction 0 is legal and behaves as no attack
    assert EveModel(kind=EveKind.INTERCEPT_RESEND, fraction=0.0).fraction == 0.0
    assert DetectionEvent(Qubit(0, Basis.Z)).flip is False
