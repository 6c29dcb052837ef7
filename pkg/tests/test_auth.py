import numpy as np
import pytest

from qkdkit.auth import (
    AuthKeyPool,
    AuthMode,
    CannotAuthenticateError,
    InsufficientKeyError,
    KeyReuseError,
    OtsContext,
    PoolExhaustedError,
    REJECT_POOL_DESYNC,
    REJECT_TAG_MISMATCH,
    _GF_MODULI,
    bootstrap_round_auth,
    export_ots_public,
    gf_mul,
    grow_keys,
    import_ots_public,
    ots_keygen,
    ots_sign,
    ots_verify,
    poly_compress,
    pool_cost_per_tag,
    wc_tag,
    wc_verify,
)
from qkdkit.bits import int_to_bits, random_bits
from qkdkit.keys import KeyMaterial, KeyStage


def mirrored_pools(n_bits: int, seed: int = 40) -> tuple[AuthKeyPool, AuthKeyPool]:
    bits = random_bits(n_bits, np.random.default_rng(seed))
    return AuthKeyPool(bits.copy()), AuthKeyPool(bits.copy())


def gf_pow(a: int, e: int, w: int) -> int:
    result = 1
    while e:
        if e & 1:
            result = gf_mul(result, a, w)
        a = gf_mul(a, a, w)
        e >>= 1
    return result


def test_gf_moduli_define_fields():
    # Fermat: a^(2^w - 1) = 1 for every nonzero a in a field
    rng = np.random.default_rng(41)
    for w in _GF_MODULI:
        samples = {1, 2, 3, (1 << w) - 1}
        samples |= {int.from_bytes(rng.bytes(8), "big") % ((1 << w) - 1) + 1 for _ in range(20)}
        for a in samples:
            assert gf_pow(a, (1 << w) - 1, w) == 1, (w, a)


def test_poly_compress_separates_equal_length_single_blocks():
    # single-block messages of equal length differ deterministically
    for alpha in range(16):
        assert poly_compress(b"\xa0", alpha, 8) != poly_compress(b"\xa1", alpha, 8)


def test_mac_roundtrip_and_lockstep():
    alice, bob = mirrored_pools(4096)
    for i in range(5):
        message = f"message number {i}".encode()
        tag = wc_tag(message, alice, tag_bits=32)
        result = wc_verify(message, tag, bob)
        assert result.accepted and result.reason is None


def test_mac_rejects_tampered_message():
    alice, bob = mirrored_pools(2048)
    tag = wc_tag(b"original payload", alice)
    result = wc_verify(b"original paylosd", tag, bob)
    assert not result.accepted and result.reason == REJECT_TAG_MISMATCH


def test_mac_rejects_desynchronized_pool():
    alice, bob = mirrored_pools(4096)
    tag1 = wc_tag(b"first", alice)
    tag2 = wc_tag(b"second", alice)
    result = wc_verify(b"second", tag2, bob)  # bob never verified tag1
    assert not result.accepted and result.reason == REJECT_POOL_DESYNC
    # bob's pool was not consumed by the rejected attempt
    assert wc_verify(b"first", tag1, bob).accepted


def test_pool_sized_for_one_tag_exhausts_on_second():
    cost = pool_cost_per_tag(16, 16)
    pool = AuthKeyPool(random_bits(cost, np.random.default_rng(42)))
    wc_tag(b"only one", pool, tag_bits=16, word_bits=16)
    with pytest.raises(PoolExhaustedError):
        wc_tag(b"one too many", pool, tag_bits=16, word_bits=16)


def test_pool_one_time_discipline_is_auditable():
    alice, bob = mirrored_pools(8192)
    for i in range(6):
        tag = wc_tag(f"m{i}".encode(), alice, tag_bits=48)
        assert wc_verify(f"m{i}".encode(), tag, bob).accepted
    for pool in (alice, bob):
        spans = sorted((start, start + length) for start, length, _ in pool.consumption_log)
        for (a_start, a_end), (b_start, b_end) in zip(spans, spans[1:]):
            assert a_end <= b_start, "pool segments overlap"


def test_forgery_acceptance_bound_exhaustive():
    """Enumerate the full seed space at t = w = 4.

    For each seed segment, exactly one forged-tag offset is accepted, so
    the per-offset acceptance fraction must be 2^-t (plus nothing: the
    flipped single-block message always changes the hash input word).
    """
    t = w = 4
    cost = pool_cost_per_tag(t, w)
    assert cost == 2 * w + 2 * t - 1 == 15
    message, forged = b"\x50", b"\x51"
    counts = {}
    total = 1 << cost
    for value in range(total):
        segment = int_to_bits(value, cost)
        pool = AuthKeyPool(segment)
        tag = wc_tag(message, pool, tag_bits=t, word_bits=w)
        pool_again = AuthKeyPool(segment)
        forged_tag = wc_tag(forged, pool_again, tag_bits=t, word_bits=w)
        # the unique delta the adversary could append and win with
        delta = tuple(np.bitwise_xor(tag.tag, forged_tag.tag).tolist())
        counts[delta] = counts.get(delta, 0) + 1
    worst = max(counts.values()) / total
    assert worst <= 2**-t + 1e-9


def test_ots_keypair_shape():
    kp = ots_keygen(np.random.default_rng(43), security_bits=64, digest_bits=48)
    assert len(kp.public) == 48 and len(kp.secret) == 48
    assert all(len(img0) == 8 and len(img1) == 8 for img0, img1 in kp.public)


def test_ots_sign_verify_roundtrip():
    kp = ots_keygen(np.random.default_rng(44), security_bits=64, digest_bits=64)
    sig = ots_sign(b"authenticated announcement", kp)
    assert ots_verify(b"authenticated announcement", sig, kp.public)


def test_ots_rejects_perturbed_messages():
    rng = np.random.default_rng(45)
    kp = ots_keygen(rng, security_bits=64, digest_bits=64)
    message = bytearray(b"base message for perturbation tests!")
    sig = ots_sign(bytes(message), kp)
    rejected = 0
    for _ in range(1000):
        corrupted = bytearray(message)
        pos = int(rng.integers(0, len(corrupted)))
        corrupted[pos] ^= 1 << int(rng.integers(0, 8))
        rejected += not ots_verify(bytes(corrupted), sig, kp.public)
    assert rejected == 1000


def test_ots_key_reuse_is_a_hard_error():
    kp = ots_keygen(np.random.default_rng(46), security_bits=32, digest_bits=32)
    ots_sign(b"first", kp)
    with pytest.raises(KeyReuseError):
        ots_sign(b"second", kp)


def test_ots_truncated_signature_rejected():
    kp = ots_keygen(np.random.default_rng(47), security_bits=32, digest_bits=32)
    sig = ots_sign(b"msg", kp)
    from qkdkit.auth import OtsSignature

    truncated = OtsSignature(revealed=sig.revealed[:-1], digest_bits=sig.digest_bits)
    assert not ots_verify(b"msg", truncated, kp.public)
    shortened = OtsSignature(
        revealed=[r[:-1] for r in sig.revealed], digest_bits=sig.digest_bits
    )
    assert not ots_verify(b"msg", shortened, kp.public)


def test_ots_public_key_wire_format_roundtrip():
    kp = ots_keygen(np.random.default_rng(48), security_bits=128, digest_bits=96)
    blob = export_ots_public(kp)
    assert blob[:4] == b"OTP1"
    assert len(blob) == 12 + 2 * 96 * 16
    images, security_bits, digest_bits = import_ots_public(blob)
    assert images == kp.public and security_bits == 128 and digest_bits == 96
    assert export_ots_public(kp) == blob  # bit-exact
    with pytest.raises(ValueError):
        import_ots_public(blob[:-1])
    with pytest.raises(ValueError):
        import_ots_public(b"XXXX" + blob[4:])


def test_winternitz_roundtrip_and_reuse():
    rng = np.random.default_rng(52)
    kp = ots_keygen(rng, security_bits=64, digest_bits=64, scheme="winternitz", window=4)
    # 16 digest chunks + 2 checksum chunks at window 4 (max checksum 240 < 2^8)
    assert len(kp.public) == 18
    sig = ots_sign(b"chained announcement", kp)
    assert ots_verify(b"chained announcement", sig, kp.public)
    assert not ots_verify(b"chained announcemenu", sig, kp.public)
    with pytest.raises(KeyReuseError):
        ots_sign(b"again", kp)


def test_winternitz_rejects_perturbed_messages():
    rng = np.random.default_rng(53)
    kp = ots_keygen(rng, security_bits=64, digest_bits=64, scheme="winternitz", window=4)
    message = bytearray(b"checksum chains stop chunk inflation")
    sig = ots_sign(bytes(message), kp)
    rejected = 0
    for _ in range(300):
        tampered = bytearray(message)
        pos = int(rng.integers(0, len(tampered)))
        tampered[pos] ^= 1 << int(rng.integers(0, 8))
        rejected += not ots_verify(bytes(tampered), sig, kp.public)
    assert rejected == 300


def test_winternitz_wire_format_roundtrip():
    rng = np.random.default_rng(54)
    kp = ots_keygen(rng, security_bits=64, digest_bits=48, scheme="winternitz", window=4)
    blob = export_ots_public(kp)
    assert blob[:4] == b"OTW1"
    images, security_bits, digest_bits = import_ots_public(blob)
    assert images == kp.public and security_bits == 64 and digest_bits == 48
    with pytest.raises(ValueError):
        import_ots_public(blob[:-1])


def test_winternitz_sessions_bootstrap_like_lamport():
    from qkdkit.scenario import run_session, scenario_from_dict

    cfg = {
        "name": "wots",
        "master_seed": 55,
        "rounds": 2,
        "protocol": {"n_pulses": 16384, "decoy_probability": 0.1, "strategy": {"mode": "symmetric"}},
        "channel": {"transmittance": 0.9},
        "auth": {"mode": "ots_bootstrap", "reserve_bits": 2048, "ots_scheme": "winternitz"},
    }
    result = run_session(scenario_from_dict(cfg))
    assert result.status == "ok"
    assert result.rounds[0].auth_mode == "ots"
    assert result.rounds[1].auth_mode == "wegman-carter"


def test_grow_keys_split_arithmetic():
    rng = np.random.default_rng(49)
    final = KeyMaterial(random_bits(1000, rng), KeyStage.FINAL)
    reserve, application = grow_keys(final, 200)
    assert reserve.size == 200 and application.size == 800
    assert np.array_equal(np.concatenate([reserve, application]), final.bits)
    assert final.consumed


def test_grow_keys_boundary_and_insufficiency():
    rng = np.random.default_rng(50)
    exact = KeyMaterial(random_bits(64, rng), KeyStage.FINAL)
    reserve, application = grow_keys(exact, 64)
    assert reserve.size == 64 and application.size == 0
    short = KeyMaterial(random_bits(10, rng), KeyStage.FINAL)
    with pytest.raises(InsufficientKeyError):
        grow_keys(short, 64)
    assert not short.consumed  # a failed split does not spend the key


def test_bootstrap_mode_selection():
    rng = np.random.default_rng(51)
    empty_pool = AuthKeyPool()
    ctx = OtsContext.generate(2, rng, security_bits=32, digest_bits=32)
    assert bootstrap_round_auth(1, empty_pool, ctx) is AuthMode.OTS
    funded = AuthKeyPool(random_bits(512, rng))
    assert bootstrap_round_auth(2, funded, ctx) is AuthMode.WEGMAN_CARTER
    assert bootstrap_round_auth(1, funded, ctx) is AuthMode.WEGMAN_CARTER
    with pytest.raises(CannotAuthenticateError):
        bootstrap_round_auth(1, empty_pool, None)
    with pytest.raises(CannotAuthenticateError):
        bootstrap_round_auth(2, empty_pool, ctx)
