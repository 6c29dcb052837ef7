"""Scenario runner: chained authenticated sessions, reports, sweeps.

A scenario fully determines a run: protocol and channel parameters, the
eavesdropper, post-processing knobs, the authentication bootstrap and an
optional network section. Identical scenarios with identical master seeds
produce byte-identical reports.

Each round executes the complete pipeline: quantum phase, announcements
and sifting, eavesdropping estimation (with abort), error correction,
verification, privacy amplification, and the final-key split that funds
the next round's authentication pool. Every classical message is
authenticated (one-time signatures in a bootstrap first round, the
one-time MAC afterwards) and logged with the number of key-relevant bits
it disclosed, so leakage accounting can be audited off the message log.
The reconciliation exchange is batched into a single authenticated
message whose payload carries all disclosed syndrome and parity bits.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .auth import (
    AuthKeyPool,
    AuthMode,
    CannotAuthenticateError,
    InsufficientKeyError,
    OtsContext,
    PoolExhaustedError,
    bootstrap_round_auth,
    export_ots_public,
    grow_keys,
    import_ots_public,
    ots_sign,
    ots_verify,
    wc_tag,
    wc_verify,
)
from .bits import bytes_from_bits, derive_seed, random_bits
from .channel import Basis, ChannelParams, EveKind, EveModel, IntensityClass
from .keys import KeyStage
from .network import (
    BudgetExceededError,
    HybridPolicy,
    NetworkState,
    NoPathError,
    PolicyUnsatisfiableError,
    UnknownNodeError,
    UntrustedInteriorError,
    compromise_node,
    hybrid_establish,
    parse_topology,
)

from .postproc import (
    Decision,
    DecodeFailureError,
    ReconcileParams,
    ToeplitzSeed,
    amplify_privacy,
    announce_and_sift,
    compute_final_length,
    correct_errors,
    estimate_eavesdropping,
    verify_keys,
)
from .protocol import (
    AsymmetricRandom,
    BasisStrategy,
    PresharedSequence,
    ProtocolConfig,
    PulseRecord,
    SessionSeeds,
    SymmetricRandom,
    dump_transcript,
    run_quantum_phase,
)


class ConfigError(Exception):
    """Scenario configuration failed to parse or validate."""


# scenario-level network requests fail the run as configuration errors
NetworkRequestError = (
    NoPathError,
    BudgetExceededError,
    UntrustedInteriorError,
    PolicyUnsatisfiableError,
    UnknownNodeError,
)


# Exit-code taxonomy (total over every defined failure mode).
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_ABORTED = 2
EXIT_DECODE_FAILURE = 3
EXIT_POOL_EXHAUSTED = 4

STATUS_OK = "ok"
STATUS_ABORTED = "aborted"
STATUS_DECODE_FAILURE = "decode-failure"
STATUS_POOL_EXHAUSTED = "pool-exhausted"

STATUS_EXIT_CODES = {
    STATUS_OK: EXIT_OK,
    STATUS_ABORTED: EXIT_ABORTED,
    STATUS_DECODE_FAILURE: EXIT_DECODE_FAILURE,
    STATUS_POOL_EXHAUSTED: EXIT_POOL_EXHAUSTED,
}

SWEEPABLE_PARAMETERS = ("p_z", "transmittance", "eve_fraction", "threshold")


@dataclass(frozen=True)
class PostprocParams:
    threshold: float = 0.11
    verify_tag_bits: int = 64
    security_margin: int = 32
    ldpc_block_len: int = 0
    code_rate: str = "auto"


@dataclass(frozen=True)
class AuthParams:
    mode: str = "ots_bootstrap"  # or "preshared_pool"
    reserve_bits: int = 2048
    preshared_pool_bits: int = 0
    ots_keypairs: int = 12
    ots_security_bits: int = 128
    ots_digest_bits: int = 128
    ots_scheme: str = "lamport"
    mac_tag_bits: int = 64
    mac_word_bits: int = 64


@dataclass(frozen=True)
class NetworkRequest:
    src: str
    dst: str
    policy: HybridPolicy
    key_len: int


@dataclass(frozen=True)
class NetworkSection:
    topology_file: str
    requests: tuple[NetworkRequest, ...]


@dataclass(frozen=True)
class Scenario:
    """A fully determined run; see data/scenario.schema.json for the format."""

    name: str
    master_seed: int
    rounds: int
    protocol: ProtocolConfig
    channel: ChannelParams
    eve: EveModel
    postproc: PostprocParams
    auth: AuthParams
    network: Optional[NetworkSection] = None


def _load_schema() -> dict:
    text = resources.files("qkdkit").joinpath("data", "scenario.schema.json").read_text()
    return json.loads(text)


def _strategy_from_dict(raw: dict) -> BasisStrategy:
    mode = raw.get("mode", "symmetric")
    if mode == "symmetric":
        return SymmetricRandom()
    if mode == "asymmetric":
        if "p_z" not in raw:
            raise ConfigError("asymmetric strategy requires p_z")
        return AsymmetricRandom(p_z=raw["p_z"])
    if "shared_seed_hex" not in raw:
        raise ConfigError("preshared strategy requires shared_seed_hex")
    return PresharedSequence(shared_seed=bytes.fromhex(raw["shared_seed_hex"]))


def _strategy_to_dict(strategy: BasisStrategy) -> dict:
    if isinstance(strategy, SymmetricRandom):
        return {"mode": "symmetric"}
    if isinstance(strategy, AsymmetricRandom):
        return {"mode": "asymmetric", "p_z": strategy.p_z}
    return {"mode": "preshared", "shared_seed_hex": strategy.shared_seed.hex()}


def scenario_from_dict(raw: dict) -> Scenario:
    """Validate a parsed config against the published schema and build it."""
    try:
        jsonschema.validate(raw, _load_schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field {path}: {exc.message}") from exc

    proto_raw = raw["protocol"]
    try:
        protocol = ProtocolConfig(
            n_pulses=proto_raw["n_pulses"],
            strategy=_strategy_from_dict(proto_raw.get("strategy", {"mode": "symmetric"})),
            decoy_probability=proto_raw.get("decoy_probability", 0.1),
        )
        channel = ChannelParams(**raw.get("channel", {}))
        eve_raw = raw.get("eve", {})
        eve = EveModel(
            kind=EveKind(eve_raw.get("kind", "none")),
            fraction=eve_raw.get("fraction", 0.0),
        )
        postproc = PostprocParams(**raw.get("postproc", {}))
        auth = AuthParams(**raw.get("auth", {}))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    network = None
    if "network" in raw:
        requests = tuple(
            NetworkRequest(
                src=r["src"], dst=r["dst"], policy=HybridPolicy(r["policy"]), key_len=r["key_len"]
            )
            for r in raw["network"]["requests"]
        )
        network = NetworkSection(topology_file=raw["network"]["topology_file"], requests=requests)

    return Scenario(
        name=raw.get("name", "scenario"),
        master_seed=raw["master_seed"],
        rounds=raw["rounds"],
        protocol=protocol,
        channel=channel,
        eve=eve,
        postproc=postproc,
        auth=auth,
        network=network,
    )


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario config file; parse errors carry line/column info."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(raw)


def scenario_to_dict(s: Scenario) -> dict:
    """Canonical dict form of a scenario, used for reports."""
    out = {
        "name": s.name,
        "master_seed": s.master_seed,
        "rounds": s.rounds,
        "protocol": {
            "n_pulses": s.protocol.n_pulses,
            "decoy_probability": s.protocol.decoy_probability,
            "strategy": _strategy_to_dict(s.protocol.strategy),
        },
        "channel": {
            "transmittance": s.channel.transmittance,
            "misalignment_error": s.channel.misalignment_error,
            "decoy_detect_scale": s.channel.decoy_detect_scale,
        },
        "eve": {"kind": s.eve.kind.value, "fraction": s.eve.fraction},
        "postproc": {
            "threshold": s.postproc.threshold,
            "verify_tag_bits": s.postproc.verify_tag_bits,
            "security_margin": s.postproc.security_margin,
            "ldpc_block_len": s.postproc.ldpc_block_len,
            "code_rate": s.postproc.code_rate,
        },
        "auth": {
            "mode": s.auth.mode,
            "reserve_bits": s.auth.reserve_bits,
            "preshared_pool_bits": s.auth.preshared_pool_bits,
            "ots_keypairs": s.auth.ots_keypairs,
            "ots_security_bits": s.auth.ots_security_bits,
            "ots_digest_bits": s.auth.ots_digest_bits,
            "ots_scheme": s.auth.ots_scheme,
            "mac_tag_bits": s.auth.mac_tag_bits,
            "mac_word_bits": s.auth.mac_word_bits,
        },
    }
    if s.network is not None:
        out["network"] = {
            "topology_file": s.network.topology_file,
            "requests": [
                {"src": r.src, "dst": r.dst, "policy": r.policy.value, "key_len": r.key_len}
                for r in s.network.requests
            ],
        }
    return out


@dataclass
class PublicMessage:
    """One authenticated classical message, kept for audit.

    `disclosed` counts key-relevant bits by ledger category; metadata like
    indices, bases and hash seeds is public but discloses no key bits.
    """

    round_no: int
    sender: str
    label: str
    payload: bytes
    disclosed: dict[str, int] = field(default_factory=dict)
    auth_mode: Optional[str] = None
    auth_ok: bool = True


@dataclass
class RoundReport:
    round_no: int
    auth_mode: str
    n_pulses: int
    n_detected: int
    n_sifted: int
    x_sample_size: int
    e_x: Optional[float]
    decision: str
    reason: Optional[str]
    sifting_disclosed: int
    syndrome_bits: int
    verification_bits: int
    final_length: int
    reserve_bits: int
    application_bits: int
    sustainable: bool
    keys_equal: Optional[bool]
    verified: Optional[bool]


@dataclass
class SessionResult:
    scenario: Scenario
    status: str
    reason: Optional[str]
    rounds: list[RoundReport]
    messages: list[PublicMessage]
    application_keys: list[np.ndarray]
    final_keys: list[tuple[np.ndarray, np.ndarray]]
    transcripts: list[tuple[list[PulseRecord], list[PulseRecord]]]
    network_rows: list[dict] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return STATUS_EXIT_CODES[self.status]


def _encode_payload(fields: dict) -> bytes:
    """Canonical byte encoding for authenticated message payloads."""
    return json.dumps(fields, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _hex(bits: np.ndarray) -> str:
    return bytes_from_bits(bits).hex() if bits.size else ""


class _Messenger:
    """Applies the round's authentication mode to every message and logs it."""

    def __init__(self, scenario: Scenario, pools: dict[str, AuthKeyPool], ots: dict[str, OtsContext | None]):
        self.scenario = scenario
        self.pools = pools
        self.ots = ots
        self.mode: AuthMode | None = None
        self.log: list[PublicMessage] = []

    def set_mode(self, mode: AuthMode) -> None:
        self.mode = mode

    def send(self, round_no: int, sender: str, label: str, fields: dict, disclosed: dict[str, int] | None = None) -> None:
        payload = _encode_payload(fields)
        receiver = "bob" if sender == "alice" else "alice"
        if self.mode is AuthMode.WEGMAN_CARTER:
            tag = wc_tag(
                payload,
                self.pools[sender],
                tag_bits=self.scenario.auth.mac_tag_bits,
                word_bits=self.scenario.auth.mac_word_bits,
            )
            result = wc_verify(payload, tag, self.pools[receiver])
            if not result.accepted:
                raise CannotAuthenticateError(f"message {label!r} rejected: {result.reason}")
            auth_mode = AuthMode.WEGMAN_CARTER.value
        else:
            ctx = self.ots[sender]
            assert ctx is not None
            index, keypair = ctx.take()
            sig = ots_sign(payload, keypair)
            peer_ctx = self.ots[receiver]
            assert peer_ctx is not None
            if not ots_verify(payload, sig, peer_ctx.peer_publics[index]):
                raise CannotAuthenticateError(f"message {label!r} failed signature verification")
            auth_mode = AuthMode.OTS.value
        self.log.append(
            PublicMessage(
                round_no=round_no,
                sender=sender,
                label=label,
                payload=payload,
                disclosed=disclosed or {},
                auth_mode=auth_mode,
            )
        )


def _setup_auth(scenario: Scenario) -> tuple[dict[str, AuthKeyPool], dict[str, OtsContext | None]]:
    pools = {"alice": AuthKeyPool(), "bob": AuthKeyPool()}
    if scenario.auth.mode == "preshared_pool":
        if scenario.auth.preshared_pool_bits < 1:
            raise ConfigError("preshared_pool mode requires preshared_pool_bits >= 1")
        rng = np.random.default_rng(derive_seed(scenario.master_seed, "preshared-pool"))
        shared = random_bits(scenario.auth.preshared_pool_bits, rng)
        pools["alice"].refill(shared)
        pools["bob"].refill(shared.copy())
        return pools, {"alice": None, "bob": None}

    contexts: dict[str, OtsContext | None] = {}
    for party in ("alice", "bob"):
        rng = np.random.default_rng(derive_seed(scenario.master_seed, "ots", party))
        contexts[party] = OtsContext.generate(
            scenario.auth.ots_keypairs,
            rng,
            scenario.auth.ots_security_bits,
            scenario.auth.ots_digest_bits,
            scheme=scenario.auth.ots_scheme,
        )
    # Public halves cross over through the export/import wire format.
    assert contexts["alice"] is not None and contexts["bob"] is not None
    contexts["alice"].peer_publics = [
        import_ots_public(export_ots_public(kp))[0] for kp in contexts["bob"].keypairs
    ]
    contexts["bob"].peer_publics = [
        import_ots_public(export_ots_public(kp))[0] for kp in contexts["alice"].keypairs
    ]
    return pools, contexts


def run_session(scenario: Scenario, keep_transcripts: bool = False) -> SessionResult:
    """Run all configured rounds of the authenticated protocol."""
    pools, ots_contexts = _setup_auth(scenario)
    messenger = _Messenger(scenario, pools, ots_contexts)
    rounds: list[RoundReport] = []
    application_keys: list[np.ndarray] = []
    final_keys: list[tuple[np.ndarray, np.ndarray]] = []
    transcripts: list[tuple[list[PulseRecord], list[PulseRecord]]] = []
    status, reason = STATUS_OK, None

    for round_no in range(1, scenario.rounds + 1):
        try:
            report, finals, app_bits = _run_round(
                scenario, round_no, pools, ots_contexts, messenger,
                transcripts if keep_transcripts else None,
            )
        except (PoolExhaustedError, CannotAuthenticateError) as exc:
            status, reason = STATUS_POOL_EXHAUSTED, str(exc)
            break
        except DecodeFailureError as exc:
            status, reason = STATUS_DECODE_FAILURE, str(exc)
            break
        rounds.append(report)
        if finals is not None:
            final_keys.append(finals)
        if report.decision == Decision.ABORT.value:
            status, reason = STATUS_ABORTED, report.reason
            break
        if report.verified is False:
            status, reason = STATUS_DECODE_FAILURE, "verification-failed"
            break
        if app_bits is not None and app_bits.size:
            application_keys.append(app_bits)
        for pool in pools.values():
            pool.advance_round()

    return SessionResult(
        scenario=scenario,
        status=status,
        reason=reason,
        rounds=rounds,
        messages=messenger.log,
        application_keys=application_keys,
        final_keys=final_keys,
        transcripts=transcripts,
    )


def _run_round(
    scenario: Scenario,
    round_no: int,
    pools: dict[str, AuthKeyPool],
    ots_contexts: dict[str, OtsContext | None],
    messenger: _Messenger,
    transcripts: list | None,
) -> tuple[RoundReport, Optional[tuple[np.ndarray, np.ndarray]], Optional[np.ndarray]]:
    pp = scenario.postproc

    mode = bootstrap_round_auth(round_no, pools["alice"], ots_contexts["alice"])
    messenger.set_mode(mode)

    seeds = SessionSeeds.from_master(derive_seed(scenario.master_seed, "round", round_no))
    alice_t, bob_t = run_quantum_phase(scenario.protocol, scenario.channel, scenario.eve, seeds)
    if transcripts is not None:
        transcripts.append((alice_t, bob_t))

    sifted_a, sifted_b, x_sample, bundle, ledger = announce_and_sift(alice_t, bob_t)
    n_detected = int(bundle.detected_indices.size)

    detected_mask = np.zeros(scenario.protocol.n_pulses, dtype=np.uint8)
    detected_mask[bundle.detected_indices] = 1
    bob_basis_bits = np.array([1 if b is Basis.X else 0 for b in bundle.bob_bases], dtype=np.uint8)
    messenger.send(
        round_no,
        "bob",
        "detections",
        {"detected": _hex(detected_mask), "bases": _hex(bob_basis_bits), "count": n_detected},
    )
    alice_basis_bits = np.array(
        [1 if r.basis is Basis.X else 0 for r in alice_t], dtype=np.uint8
    )
    intensity_bits = np.array(
        [1 if r.intensity is IntensityClass.DECOY else 0 for r in alice_t], dtype=np.uint8
    )
    messenger.send(
        round_no,
        "alice",
        "bases-intensities",
        {
            "bases": _hex(alice_basis_bits),
            "intensities": _hex(intensity_bits),
            "x_bits": _hex(x_sample.alice),
            "x_count": x_sample.size,
        },
        disclosed={"sifting": x_sample.size},
    )
    messenger.send(
        round_no,
        "bob",
        "x-bits",
        {"x_bits": _hex(x_sample.bob), "x_count": x_sample.size},
        disclosed={"sifting": x_sample.size},
    )

    est = estimate_eavesdropping(x_sample, pp.threshold)
    base_report = dict(
        round_no=round_no,
        auth_mode=mode.value,
        n_pulses=scenario.protocol.n_pulses,
        n_detected=n_detected,
        n_sifted=sifted_a.length,
        x_sample_size=x_sample.size,
        e_x=None if est.e_x is None else round(est.e_x, 8),
        decision=est.decision.value,
        reason=est.reason,
    )

    if est.decision is Decision.ABORT:
        messenger.send(
            round_no,
            "alice",
            "estimation",
            {"decision": est.decision.value, "reason": est.reason or ""},
        )
        report = RoundReport(
            **base_report,
            sifting_disclosed=ledger.sifting_disclosed,
            syndrome_bits=0,
            verification_bits=0,
            final_length=0,
            reserve_bits=0,
            application_bits=0,
            sustainable=False,
            keys_equal=None,
            verified=None,
        )
        return report, None, None

    reconcile = ReconcileParams(
        est_qber=est.e_x if est.e_x is not None else 0.0,
        block_len=pp.ldpc_block_len,
        rate_label=pp.code_rate,
    )
    corrected_b, syndrome_leak = correct_errors(sifted_a, sifted_b, reconcile, ledger)
    messenger.send(
        round_no,
        "alice",
        "reconcile",
        {
            "decision": est.decision.value,
            "disclosed_bits": syndrome_leak,
            "block_len": reconcile.block_len,
            "rate": reconcile.rate_label,
        },
        disclosed={"syndrome": syndrome_leak},
    )

    public_rng = np.random.default_rng(derive_seed(scenario.master_seed, "public-coins", round_no))
    verify_seed = ToeplitzSeed.random(sifted_a.length, pp.verify_tag_bits, public_rng)
    verified = verify_keys(sifted_a, corrected_b, verify_seed, pp.verify_tag_bits, ledger)
    messenger.send(
        round_no,
        "alice",
        "verify",
        {"seed": _hex(verify_seed.bits), "tag_bits": pp.verify_tag_bits},
        disclosed={"verification": pp.verify_tag_bits},
    )
    messenger.send(round_no, "bob", "verify-ack", {"ok": verified})

    if not verified:
        report = RoundReport(
            **base_report,
            sifting_disclosed=ledger.sifting_disclosed,
            syndrome_bits=ledger.syndrome_bits,
            verification_bits=ledger.verification_bits,
            final_length=0,
            reserve_bits=0,
            application_bits=0,
            sustainable=False,
            keys_equal=bool(np.array_equal(sifted_a.bits, corrected_b.bits)),
            verified=False,
        )
        return report, None, None

    verified_a = sifted_a.advanced(KeyStage.VERIFIED)
    verified_b = corrected_b.advanced(KeyStage.VERIFIED)
    out_len = compute_final_length(
        verified_a.length, est.e_x or 0.0, ledger, pp.security_margin
    )
    pa_seed = ToeplitzSeed.random(verified_a.length, out_len, public_rng)
    final_a = amplify_privacy(verified_a, pa_seed, out_len)
    final_b = amplify_privacy(verified_b, pa_seed, out_len)
    messenger.send(
        round_no,
        "alice",
        "amplify",
        {"out_len": out_len, "seed": _hex(pa_seed.bits)},
    )

    keys_equal = bool(np.array_equal(final_a.bits, final_b.bits))
    reserve_len = scenario.auth.reserve_bits
    sustainable = True
    app_bits = np.zeros(0, dtype=np.uint8)
    try:
        reserve_a, app_a = grow_keys(final_a, reserve_len)
        reserve_b, _app_b = grow_keys(final_b, reserve_len)
        pools["alice"].refill(reserve_a)
        pools["bob"].refill(reserve_b)
        app_bits = app_a
    except InsufficientKeyError:
        # keep authenticating as long as possible: everything to the pool
        sustainable = False
        reserve_len = final_a.length
        pools["alice"].refill(final_a.consume() if not final_a.consumed else final_a.bits)
        pools["bob"].refill(final_b.consume() if not final_b.consumed else final_b.bits)

    report = RoundReport(
        **base_report,
        sifting_disclosed=ledger.sifting_disclosed,
        syndrome_bits=ledger.syndrome_bits,
        verification_bits=ledger.verification_bits,
        final_length=out_len,
        reserve_bits=reserve_len,
        application_bits=int(app_bits.size),
        sustainable=sustainable,
        keys_equal=keys_equal,
        verified=True,
    )
    return report, (final_a.bits, final_b.bits), app_bits


def run_network(scenario: Scenario, config_dir: Path) -> list[dict]:
    """Execute the scenario's network requests and row-ify the results."""
    assert scenario.network is not None
    topo_path = Path(scenario.network.topology_file)
    if not topo_path.is_absolute():
        topo_path = config_dir / topo_path
    try:
        topo = parse_topology(topo_path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read topology {topo_path}: {exc}") from exc
    state = NetworkState(topo, master_seed=scenario.master_seed)
    records = []
    for request in scenario.network.requests:
        try:
            record = hybrid_establish(
                state, request.src, request.dst, request.policy, request.key_len
            )
        except NetworkRequestError as exc:
            raise ConfigError(
                f"network request {request.src}->{request.dst} "
                f"({request.policy.value}, {request.key_len} bits): {exc}"
            ) from exc
        records.append((request, record))
    rows = []
    for request, record in records:
        exposed_by = sorted(
            node for node in topo.nodes if record.key_id in compromise_node(state, node)
        )
        rows.append(
            {
                "src": request.src,
                "dst": request.dst,
                "policy": request.policy.value,
                "path": "->".join(record.path),
                "key_len": request.key_len,
                "exposed_by": ";".join(exposed_by),
            }
        )
    return rows


def run_scenario(
    scenario: Scenario,
    out_dir: Path | None = None,
    config_dir: Path | None = None,
    write_transcripts: bool = False,
) -> SessionResult:
    """Run a full scenario and optionally write its report files."""
    result = run_session(scenario, keep_transcripts=write_transcripts)
    if scenario.network is not None:
        result.network_rows = run_network(scenario, config_dir or Path.cwd())
    if out_dir is not None:
        write_reports(result, Path(out_dir), write_transcripts)
    return result


def _round_row(r: RoundReport) -> dict:
    return {
        "round": r.round_no,
        "auth_mode": r.auth_mode,
        "n_pulses": r.n_pulses,
        "n_detected": r.n_detected,
        "n_sifted": r.n_sifted,
        "x_sample_size": r.x_sample_size,
        "e_x": "" if r.e_x is None else f"{r.e_x:.6f}",
        "decision": r.decision,
        "reason": r.reason or "",
        "sifting_disclosed": r.sifting_disclosed,
        "syndrome_bits": r.syndrome_bits,
        "verification_bits": r.verification_bits,
        "final_length": r.final_length,
        "reserve_bits": r.reserve_bits,
        "application_bits": r.application_bits,
        "sustainable": int(r.sustainable),
    }


def write_reports(result: SessionResult, out_dir: Path, write_transcripts: bool = False) -> list[Path]:
    """Write report.json, rounds.csv, summary.txt and optional extras."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    report = {
        "scenario": scenario_to_dict(result.scenario),
        "status": result.status,
        "reason": result.reason,
        "exit_code": result.exit_code,
        "rounds": [_round_row(r) for r in result.rounds],
    }
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    written.append(report_path)

    csv_path = out_dir / "rounds.csv"
    header = [
        "round", "auth_mode", "n_pulses", "n_detected", "n_sifted", "x_sample_size",
        "e_x", "decision", "reason", "sifting_disclosed", "syndrome_bits",
        "verification_bits", "final_length", "reserve_bits", "application_bits", "sustainable",
    ]
    lines = [",".join(header)]
    for r in result.rounds:
        row = _round_row(r)
        lines.append(",".join(str(row[h]) for h in header))
    csv_path.write_text("\n".join(lines) + "\n")
    written.append(csv_path)

    summary_lines = [
        f"scenario: {result.scenario.name}",
        f"status: {result.status}" + (f" ({result.reason})" if result.reason else ""),
        f"rounds completed: {len(result.rounds)} of {result.scenario.rounds}",
    ]
    for r in result.rounds:
        e_x = "n/a" if r.e_x is None else f"{r.e_x:.4f}"
        summary_lines.append(
            f"  round {r.round_no}: auth={r.auth_mode} sifted={r.n_sifted} e_x={e_x} "
            f"decision={r.decision} leakage(sift/synd/verif)="
            f"{r.sifting_disclosed}/{r.syndrome_bits}/{r.verification_bits} "
            f"final={r.final_length} app={r.application_bits}"
        )
    summary_path = out_dir / "summary.txt"
    summary_path.write_text("\n".join(summary_lines) + "\n")
    written.append(summary_path)

    if result.network_rows:
        net_path = out_dir / "network.csv"
        net_lines = ["src,dst,policy,path,key_len,exposed_by"]
        for row in result.network_rows:
            net_lines.append(
                f"{row['src']},{row['dst']},{row['policy']},{row['path']},"
                f"{row['key_len']},{row['exposed_by']}"
            )
        net_path.write_text("\n".join(net_lines) + "\n")
        written.append(net_path)

    if write_transcripts:
        for idx, (alice_t, bob_t) in enumerate(result.transcripts, start=1):
            for party, records in (("alice", alice_t), ("bob", bob_t)):
                path = out_dir / f"round_{idx:02d}_{party}.transcript"
                path.write_text(dump_transcript(records))
                written.append(path)
    return written


def _with_parameter(scenario: Scenario, parameter: str, value: float) -> Scenario:
    from dataclasses import replace

    if parameter == "p_z":
        protocol = ProtocolConfig(
            n_pulses=scenario.protocol.n_pulses,
            strategy=AsymmetricRandom(p_z=value),
            decoy_probability=scenario.protocol.decoy_probability,
        )
        return replace(scenario, protocol=protocol)
    if parameter == "transmittance":
        return replace(scenario, channel=replace(scenario.channel, transmittance=value))
    if parameter == "eve_fraction":
        kind = EveKind.INTERCEPT_RESEND if value > 0 else EveKind.NONE
        return replace(scenario, eve=EveModel(kind=kind, fraction=value))
    if parameter == "threshold":
        return replace(scenario, postproc=replace(scenario.postproc, threshold=value))
    raise ConfigError(
        f"unknown sweep parameter {parameter!r}; choose from {SWEEPABLE_PARAMETERS}"
    )


def sweep(scenario: Scenario, parameter: str, values: list[float]) -> list[dict]:
    """Run one single-round session per grid point, in ascending order."""
    from dataclasses import replace

    rows = []
    for value in sorted(values):
        point = _with_parameter(replace(scenario, rounds=1), parameter, value)
        result = run_session(point)
        if result.rounds:
            r = result.rounds[0]
            e_x = "" if r.e_x is None else f"{r.e_x:.6f}"
            row = {
                "parameter": parameter,
                "value": value,
                "n_sifted": r.n_sifted,
                "e_x": e_x,
                "decision": r.decision,
                "final_length": r.final_length,
                "key_rate": f"{r.final_length / r.n_pulses:.6f}",
            }
        else:
            row = {
                "parameter": parameter,
                "value": value,
                "n_sifted": 0,
                "e_x": "",
                "decision": result.status,
                "final_length": 0,
                "key_rate": f"{0:.6f}",
            }
        rows.append(row)
    return rows


def write_sweep_csv(rows: list[dict], path: Path, parameter: str) -> None:
    header = ["parameter", "value", "n_sifted", "e_x", "decision", "final_length", "key_rate"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(row[h]) for h in header))
    path.write_text("\n".join(lines) + "\n")
