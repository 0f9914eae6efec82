"""(n, n) secret sharing of classical bits over single photons.

Bob (receiver 0) prepares a batch of photons in random BB84 states and the
other receivers each apply a random unitary from {I, U, U_H} in turn. The
last receiver hands the batch to Alice, who checks a random subset against
the receivers' disclosures, encodes her bits with I or U on the rest, and
sends them back. Only the full coalition knows enough to measure every
photon in the right basis.

The batch is held as arrays (photon ``i`` is row ``i``) and mutated in
place; :meth:`PhotonBatch.record` gives the per-photon view.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from mqss import adversary, qstate
from mqss.adversary import NO_ATTACK, AttackModel, EveRecord
from mqss.parties import (
    ALICE,
    Knowledge,
    PartyId,
    distribution_segments,
    receiver,
    return_segment,
)
from mqss.qstate import StateLabel, UnitaryKind
from mqss.rng import Streams
from mqss.transcript import Transcript


class ConfigError(ValueError):
    pass


class MissingDisclosure(ValueError):
    pass


class Role(enum.IntEnum):
    UNASSIGNED = 0
    CHECK = 1
    MESSAGE = 2


class GuessRule(str, enum.Enum):
    """How a partial coalition fills in what it does not know."""

    IDENTITY = "identity"  # unknown ops taken as I, unknown labels guessed uniformly
    RANDOM_OPS = "random_ops"  # unknown ops and labels both guessed uniformly


@dataclass(frozen=True)
class ProtocolConfig:
    num_receivers: int
    batch_size: int
    check_fraction: float = 0.2
    error_threshold: float = 0.05
    auth_fraction: float = 0.1
    master_seed: int = 0
    # receiver index Alice returns the encoded batch to; None means the last one
    final_holder: int | None = None
    # threshold for the authentication step; None reuses error_threshold
    auth_threshold: float | None = None

    def __post_init__(self):
        if self.num_receivers < 2:
            raise ConfigError("num_receivers must be >= 2")
        if self.batch_size <= 0:
            raise ConfigError("batch_size must be > 0")
        if not 0.0 < self.check_fraction < 1.0:
            raise ConfigError("check_fraction must lie in (0, 1)")
        if not 0.0 <= self.error_threshold <= 1.0:
            raise ConfigError("error_threshold must lie in [0, 1]")
        if not 0.0 < self.auth_fraction < 1.0:
            raise ConfigError("auth_fraction must lie in (0, 1)")
        if self.auth_threshold is not None and not 0.0 <= self.auth_threshold <= 1.0:
            raise ConfigError("auth_threshold must lie in [0, 1]")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a non-negative 64-bit integer")
        if self.final_holder is not None and not 0 <= self.final_holder < self.num_receivers:
            raise ConfigError(f"final_holder must be a receiver index in 0..{self.num_receivers - 1}")
        if self.check_count < 1:
            raise ConfigError("check_fraction * batch_size must give at least one check photon")
        if self.stored_count < 1:
            raise ConfigError("no photons left for the message after the check")

    @property
    def check_count(self) -> int:
        return int(np.floor(self.check_fraction * self.batch_size))

    @property
    def stored_count(self) -> int:
        return self.batch_size - self.check_count

    @property
    def auth_count(self) -> int:
        return max(1, int(np.floor(self.auth_fraction * self.stored_count)))

    @property
    def message_capacity(self) -> int:
        return self.stored_count - self.auth_count

    @property
    def holder(self) -> PartyId:
        return receiver(self.num_receivers - 1 if self.final_holder is None else self.final_holder)

    @property
    def effective_auth_threshold(self) -> float:
        return self.error_threshold if self.auth_threshold is None else self.auth_threshold

    def check_message(self, length: int) -> None:
        if length > self.message_capacity:
            raise ConfigError(
                f"message of {length} bits does not fit: {self.stored_count} stored photons "
                f"minus {self.auth_count} authentication photons"
            )


@dataclass(frozen=True)
class PhotonRecord:
    position: int
    initial_label: StateLabel
    ops_applied: tuple[tuple[PartyId, UnitaryKind], ...]
    current: qstate.PureState
    role: Role
    encoded_bit: int | None


@dataclass
class PhotonBatch:
    labels: np.ndarray
    states: np.ndarray
    ops: list[tuple[PartyId, np.ndarray]] = field(default_factory=list)
    roles: np.ndarray | None = None
    encoded_bits: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.labels)
        if self.roles is None:
            self.roles = np.zeros(n, dtype=np.int8)
        if self.encoded_bits is None:
            self.encoded_bits = np.full(n, -1, dtype=np.int8)

    def __len__(self) -> int:
        return len(self.labels)

    def copy(self) -> PhotonBatch:
        return PhotonBatch(
            self.labels.copy(),
            self.states.copy(),
            [(p, k.copy()) for p, k in self.ops],
            self.roles.copy(),
            self.encoded_bits.copy(),
        )

    def record(self, i: int) -> PhotonRecord:
        bit = int(self.encoded_bits[i])
        return PhotonRecord(
            position=i,
            initial_label=StateLabel(int(self.labels[i])),
            ops_applied=tuple((p, UnitaryKind(int(k[i]))) for p, k in self.ops if k[i] >= 0),
            current=qstate.PureState(1, self.states[i]),
            role=Role(int(self.roles[i])),
            encoded_bit=None if bit < 0 else bit,
        )

    def records(self) -> list[PhotonRecord]:
        return [self.record(i) for i in range(len(self))]

    def encryptors(self) -> tuple[int, ...]:
        return tuple(p.index for p, _ in self.ops if not p.is_alice)

    def knowledge(self, coalition, encryptors: tuple[int, ...] | None = None) -> Knowledge:
        """Pool of what ``coalition`` (receiver indices) knows right now."""
        coalition = {p.index if isinstance(p, PartyId) else int(p) for p in coalition}
        ops = {p.index: k for p, k in self.ops if not p.is_alice and p.index in coalition}
        return Knowledge(
            self.labels if 0 in coalition else None,
            ops,
            self.encryptors() if encryptors is None else encryptors,
        )


def prepare_batch(n: int, rng: np.random.Generator) -> PhotonBatch:
    if n <= 0:
        raise ValueError("batch size must be > 0")
    labels = rng.integers(0, 4, size=n).astype(np.int8)
    return PhotonBatch(labels, qstate.label_states(labels))


def encrypt_pass(batch: PhotonBatch, party: PartyId, rng: np.random.Generator) -> PhotonBatch:
    if party.is_alice or party.index == 0:
        raise ValueError("only receivers other than the preparer encrypt")
    kinds = rng.integers(0, 3, size=len(batch)).astype(np.int8)
    batch.states = qstate.apply_batch(kinds, batch.states)
    batch.ops.append((party, kinds))
    return batch


def select_check_positions(n: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    k = int(np.floor(fraction * n))
    if k < 1:
        raise ValueError(f"fraction {fraction} of {n} photons selects nothing")
    return np.sort(rng.choice(n, size=k, replace=False))


def disclosure_order(receivers: list, rng: np.random.Generator) -> list:
    """Uniformly random order in which Alice asks the receivers to disclose."""
    if len(receivers) < 2:
        raise ValueError("need at least two receivers")
    return [receivers[i] for i in np.argsort(rng.random(len(receivers)), kind="stable")]


def disclosure_orders(count: int, num_receivers: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` successive :func:`disclosure_order` draws as index rows."""
    return np.argsort(rng.random((count, num_receivers)), axis=1, kind="stable")


def _undo_and_measure(
    states: np.ndarray,
    labels: np.ndarray,
    ops_in_order: list[np.ndarray],
    rng: np.random.Generator,
) -> np.ndarray:
    for kinds in reversed(ops_in_order):
        states = qstate.apply_batch(kinds, states, adjoint=True)
    return qstate.measure_batch(states, np.asarray(labels, dtype=np.intp) >> 1, rng)


def _require_complete(knowledge: Knowledge) -> None:
    if not knowledge.complete:
        raise MissingDisclosure(f"knowledge pool incomplete: missing {', '.join(knowledge.missing())}")


def check_outcomes(
    batch: PhotonBatch, positions: np.ndarray, disclosures: Knowledge, rng: np.random.Generator
) -> np.ndarray:
    """Alice's measurement results on the check photons (labels as ints)."""
    _require_complete(disclosures)
    d = disclosures.take(positions)
    ops = [d.ops[k] for k in d.encryptors]
    return _undo_and_measure(batch.states[positions], d.labels, ops, rng)


def run_check(
    batch: PhotonBatch, positions: np.ndarray, disclosures: Knowledge, rng: np.random.Generator
) -> float:
    outcomes = check_outcomes(batch, positions, disclosures, rng)
    return float(np.mean(outcomes != disclosures.labels[positions]))


def encode_message(batch: PhotonBatch, positions: np.ndarray, bits) -> PhotonBatch:
    bits = np.asarray(bits, dtype=np.int8)
    positions = np.asarray(positions, dtype=np.intp)
    if bits.shape != positions.shape:
        raise ValueError(f"{len(bits)} bits for {len(positions)} photons")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    kinds = np.full(len(batch), -1, dtype=np.int8)
    kinds[positions] = np.where(bits == 1, UnitaryKind.FLIP, UnitaryKind.ID)
    batch.states[positions] = qstate.apply_batch(kinds[positions], batch.states[positions])
    batch.ops.append((ALICE, kinds))
    batch.encoded_bits[positions] = bits
    return batch


def decode_collaborative(
    batch: PhotonBatch, positions: np.ndarray, knowledge: Knowledge, rng: np.random.Generator
) -> np.ndarray:
    """Bits read by the full coalition: undo every op, measure in the initial basis."""
    _require_complete(knowledge)
    if len(positions) == 0:
        return np.zeros(0, dtype=np.int8)
    k = knowledge.take(positions)
    outcomes = _undo_and_measure(batch.states[positions], k.labels, [k.ops[i] for i in k.encryptors], rng)
    return (outcomes != k.labels).astype(np.int8)


def decode_partial(
    batch: PhotonBatch,
    positions: np.ndarray,
    knowledge: Knowledge,
    rng: np.random.Generator,
    rule: GuessRule = GuessRule.IDENTITY,
) -> np.ndarray:
    """Best-effort bits from an incomplete knowledge pool (statistics only)."""
    m = len(positions)
    k = knowledge.take(positions)
    labels = k.labels if k.labels is not None else rng.integers(0, 4, size=m)
    ops = []
    for idx in k.encryptors:
        if idx in k.ops:
            ops.append(k.ops[idx])
        elif GuessRule(rule) is GuessRule.RANDOM_OPS:
            ops.append(rng.integers(0, 3, size=m))
        else:
            ops.append(np.zeros(m, dtype=np.int8))
    outcomes = _undo_and_measure(batch.states[positions], labels, ops, rng)
    return (outcomes != labels).astype(np.int8)


def authenticate(decoded, positions, bits, threshold: float) -> tuple[bool, float]:
    decoded = np.asarray(decoded)
    positions = np.asarray(positions, dtype=np.intp)
    if len(positions) == 0:
        raise ValueError("nothing announced for authentication")
    if positions.min() < 0 or positions.max() >= len(decoded):
        raise IndexError("announced position outside the decoded range")
    rate = float(np.mean(decoded[positions] != np.asarray(bits)))
    return rate <= threshold, rate


@dataclass
class ProtocolOutcome:
    aborted: bool
    check_error_rate: float
    transcript: Transcript
    batch: PhotonBatch
    eve_records: list[EveRecord]
    decoded_bits: np.ndarray | None = None
    auth_mismatch_rate: float | None = None
    auth_pass: bool | None = None
    payload: np.ndarray | None = None
    stored_positions: np.ndarray | None = None
    message_slots: np.ndarray | None = None
    auth_slots: np.ndarray | None = None

    @property
    def completed(self) -> bool:
        return not self.aborted


_LABEL_NAMES = [x.name for x in StateLabel]
_OP_NAMES = [x.name for x in UnitaryKind]


def _attack_hop(attack, batch, segment, streams, transcript) -> list[EveRecord]:
    if attack.segment != segment:
        return []
    side = None
    if isinstance(attack, adversary.DishonestReceiver):
        side = batch.knowledge({attack.party.index})
    elif attack.basis_strategy is adversary.BasisStrategy.LABEL_BASIS:
        side = batch.knowledge({0})
    positions = np.arange(len(batch))
    batch.states, records = adversary.apply_attack(attack, batch.states, positions, segment, side, streams["eve"])
    who = attack.party if isinstance(attack, adversary.DishonestReceiver) else "eve"
    transcript.add_many(
        "intercept",
        who,
        [r.position for r in records],
        [{"basis": r.measured_basis.name, "observed": r.observed_label.name} for r in records],
    )
    return records


def run_protocol(
    cfg: ProtocolConfig,
    message,
    attack: AttackModel = NO_ATTACK,
    trial: int = 0,
    streams: Streams | None = None,
) -> ProtocolOutcome:
    """One full run: distribution, check, encoding, return, decoding, authentication."""
    message = np.asarray(message, dtype=np.int8).reshape(-1)
    cfg.check_message(len(message))
    n = cfg.num_receivers
    if attack.segment is not None:
        valid = distribution_segments(n) + [return_segment(cfg.holder)]
        if attack.segment not in valid:
            raise ConfigError(f"segment {attack.segment} is not traversed in this run")
    streams = streams or Streams(cfg.master_seed, trial)
    tr = Transcript()
    records: list[EveRecord] = []

    batch = prepare_batch(cfg.batch_size, streams["r0"])
    tr.add_many("prepare", receiver(0), range(len(batch)), [{"label": _LABEL_NAMES[x]} for x in batch.labels.tolist()])

    for seg in distribution_segments(n):
        tr.add("transfer", seg.src, None, {"to": str(seg.dst), "phase": seg.phase.value, "count": len(batch)})
        records += _attack_hop(attack, batch, seg, streams, tr)
        if not seg.dst.is_alice:
            encrypt_pass(batch, seg.dst, streams[str(seg.dst)])
            kinds = batch.ops[-1][1]
            tr.add_many("encrypt", seg.dst, range(len(batch)), [{"op": _OP_NAMES[k]} for k in kinds.tolist()])

    alice = streams["alice"]
    check_pos = select_check_positions(cfg.batch_size, cfg.check_fraction, alice)
    batch.roles[check_pos] = Role.CHECK
    orders = disclosure_orders(len(check_pos), n, alice)
    disclosures = batch.knowledge(range(n))
    for p, order in zip(check_pos.tolist(), orders.tolist()):
        said = {}
        for r in order:
            said[f"r{r}"] = _LABEL_NAMES[batch.labels[p]] if r == 0 else _OP_NAMES[disclosures.ops[r][p]]
        tr.add("disclose", ALICE, p, {"order": [f"r{r}" for r in order], "values": said})
    outcomes = check_outcomes(batch, check_pos, disclosures, streams["alice.measure"])
    errors = outcomes != batch.labels[check_pos]
    batch.states[check_pos] = qstate.label_states(outcomes)
    tr.add_many(
        "check",
        ALICE,
        check_pos.tolist(),
        [{"outcome": _LABEL_NAMES[o], "error": bool(e)} for o, e in zip(outcomes.tolist(), errors.tolist())],
    )
    rate = float(np.mean(errors))
    aborted = rate > cfg.error_threshold
    tr.add("check", ALICE, None, {"error_rate": rate, "threshold": cfg.error_threshold, "aborted": aborted})
    if aborted:
        return ProtocolOutcome(True, rate, tr, batch, records)

    stored = np.flatnonzero(batch.roles == Role.UNASSIGNED)
    batch.roles[stored] = Role.MESSAGE
    m = len(stored)
    auth_slots = np.sort(alice.choice(m, size=cfg.auth_count, replace=False))
    payload = alice.integers(0, 2, size=m).astype(np.int8)
    free = np.setdiff1d(np.arange(m), auth_slots)
    message_slots = free[: len(message)]
    payload[message_slots] = message
    encode_message(batch, stored, payload)
    tr.add_many("encode", ALICE, stored.tolist(), [{"bit": b} for b in payload.tolist()])

    back = return_segment(cfg.holder)
    tr.add("transfer", ALICE, None, {"to": str(back.dst), "phase": back.phase.value, "count": m})
    records += _attack_hop(attack, batch, back, streams, tr)

    decoded = decode_collaborative(batch, stored, disclosures, streams["decode"])
    tr.add_many("decode", back.dst, stored.tolist(), [{"bit": b} for b in decoded.tolist()])
    ok, mismatch = authenticate(decoded, auth_slots, payload[auth_slots], cfg.effective_auth_threshold)
    tr.add(
        "auth",
        ALICE,
        None,
        {"positions": stored[auth_slots].tolist(), "mismatch_rate": mismatch, "pass": ok},
    )
    return ProtocolOutcome(
        aborted=False,
        check_error_rate=rate,
        transcript=tr,
        batch=batch,
        eve_records=records,
        decoded_bits=decoded[message_slots],
        auth_mismatch_rate=mismatch,
        auth_pass=ok,
        payload=payload,
        stored_positions=stored,
        message_slots=message_slots,
        auth_slots=auth_slots,
    )

