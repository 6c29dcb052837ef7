import numpy as np
import pytest

from qkdkit.bits import (
    as_bits,
    bits_from_bytes,
    bits_from_string,
    bits_to_int,
    bits_to_string,
    bytes_from_bits,
    derive_seed,
    int_to_bits,
    parity,
    random_bits,
    xor_bits,
)


def test_as_bits_validation():
    with pytest.raises(ValueError):
        as_bits([0, 1, 2])
    with pytest.raises(ValueError):
        as_bits([[0, 1]])
    assert as_bits([]).size == 0


def test_int_bits_roundtrip():
    rng = np.random.default_rng(80)
    for width in (1, 7, 8, 17, 64):
        for _ in range(20):
            value = int(rng.integers(0, 1 << min(width, 62)))
            assert bits_to_int(int_to_bits(value, width)) == value
    assert int_to_bits(5, 4).tolist() == [0, 1, 0, 1]
    with pytest.raises(ValueError):
        int_to_bits(16, 4)


def test_bytes_roundtrip_and_strings():
    bits = bits_from_string("10110001111")
    assert bits_to_string(bits) == "10110001111"
    packed = bytes_from_bits(bits)
    assert bits_from_bytes(packed, 11).tolist() == bits.tolist()
    with pytest.raises(ValueError):
        bits_from_string("10x")
    with pytest.raises(ValueError):
        bits_from_bytes(b"\x00", 9)


def test_xor_and_parity():
    assert xor_bits([1, 0, 1], [1, 1, 0]).tolist() == [0, 1, 1]
    with pytest.raises(ValueError):
        xor_bits([1], [1, 0])
    assert parity([1, 0, 1]) == 0
    assert parity([1, 0, 1, 1]) == 1
    assert parity([]) == 0


def test_random_bits_are_seed_stable():
    a = random_bits(64, np.random.default_rng(81))
    b = random_bits(64, np.random.default_rng(81))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        random_bits(-1, np.random.default_rng(81))


def test_derive_seed_is_stable_across_runs():
    # frozen values: every stored expectation in the suite depends on these
    assert derive_seed(0, "alice") == 3310251632174833519
    assert derive_seed(2024, "round", 1) == 6555541983805520806
    assert derive_seed(0, "alice") != derive_seed(0, "bob")
    assert derive_seed(1, "alice") != derive_seed(0, "alice")
