"""Sharing an unknown qubit among n receivers.

Alice teleports the qubit to Bob over a Phi+ pair that Bob prepared, but
instead of announcing her Bell outcome she sends its two bits to the other
n - 1 receivers through :func:`mqss.qsscm.run_protocol`. Bob can only apply
the right correction once every other receiver has helped decode those
bits.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from mqss import adversary, oracle, qsscm, qstate
from mqss.adversary import NO_ATTACK, AttackModel, BasisStrategy
from mqss.parties import ALICE, PartyId, Phase, Segment, receiver
from mqss.qstate import BellOutcome, PureState, UnitaryKind
from mqss.rng import Streams
from mqss.transcript import Transcript

# qubit order of the joint state: unknown qubit, Bob's half, travelling half
QUBIT_U, QUBIT_H, QUBIT_T = 0, 1, 2

PAIR_SEGMENT = Segment(receiver(0), ALICE, Phase.PAIR)

_CORRECTIONS = {
    BellOutcome.PHI_PLUS: UnitaryKind.ID,
    BellOutcome.PSI_PLUS: UnitaryKind.CORR1,
    BellOutcome.PHI_MINUS: UnitaryKind.CORR2,
    BellOutcome.PSI_MINUS: UnitaryKind.CORR3,
}


@dataclass(frozen=True)
class UnknownQubit:
    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > qstate.NORM_TOL:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {norm}, expected 1")

    @property
    def state(self) -> PureState:
        return PureState(1, [self.alpha, self.beta])

    @classmethod
    def random(cls, rng: np.random.Generator) -> UnknownQubit:
        a, b = qstate.random_qubit(rng).amps
        return cls(complex(a), complex(b))


def teleport(
    inp: UnknownQubit,
    rng: np.random.Generator | None = None,
    pair: PureState | None = None,
    forced: BellOutcome | None = None,
) -> tuple[BellOutcome, PureState]:
    """Alice's Bell measurement on (u, t); returns the outcome and Bob's qubit h.

    ``pair`` is the (h, t) state actually shared, Phi+ unless an attacker
    disturbed it.
    """
    pair = qstate.bell_state(BellOutcome.PHI_PLUS) if pair is None else pair
    joint = qstate.tensor(inp.state, pair)
    return qstate.bell_measure(joint, (QUBIT_U, QUBIT_T), rng, forced=forced)


def correction_for(outcome: BellOutcome) -> qstate.Unitary2:
    return qstate.make_unitary(_CORRECTIONS[BellOutcome(outcome)])


def outcome_bits(outcome: BellOutcome) -> tuple[int, int]:
    v = int(BellOutcome(outcome))
    return v >> 1, v & 1


def bits_outcome(bits) -> BellOutcome:
    hi, lo = (int(b) for b in bits)
    return BellOutcome(2 * hi + lo)


@dataclass
class PairCheck:
    error_rate: float
    abort: bool
    pairs: np.ndarray  # (num_pairs, 4) amplitudes of every (h, t) pair after transit
    sampled: np.ndarray


def _measure_travelling_half(pairs: np.ndarray, bases: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    psi = pairs.reshape(-1, 2, 2)
    first = qstate.LABEL_VECTORS[2 * bases]
    second = qstate.LABEL_VECTORS[2 * bases + 1]
    rest0 = np.einsum("nht,nt->nh", psi, first.conj())
    rest1 = np.einsum("nht,nt->nh", psi, second.conj())
    p0 = np.sum(np.abs(rest0) ** 2, axis=1)
    take0 = rng.random(len(pairs)) < p0
    rest = np.where(take0[:, None], rest0, rest1)
    t = np.where(take0[:, None], first, second)
    rest = rest / np.linalg.norm(rest, axis=1, keepdims=True)
    observed = 2 * bases + (~take0).astype(np.intp)
    return np.einsum("nh,nt->nht", rest, t).reshape(-1, 4), observed


def pair_distribution_check(
    num_pairs: int,
    sample_fraction: float,
    attack: AttackModel,
    rng: np.random.Generator,
    threshold: float = 0.05,
    eve_rng: np.random.Generator | None = None,
) -> PairCheck:
    """Distribute Phi+ pairs and test a random sample in a shared random basis."""
    if not 0.0 < sample_fraction < 1.0:
        raise ValueError("sample_fraction must lie in (0, 1)")
    k = int(np.floor(sample_fraction * num_pairs))
    if k < 1:
        raise ValueError(f"sample_fraction {sample_fraction} of {num_pairs} pairs samples nothing")
    phi = qstate.bell_state(BellOutcome.PHI_PLUS).amps
    pairs = np.tile(phi, (num_pairs, 1))
    if not isinstance(attack, adversary.NoAttack) and attack.segment == PAIR_SEGMENT:
        if attack.basis_strategy in (BasisStrategy.INFORMED, BasisStrategy.LABEL_BASIS):
            raise ValueError(f"{attack.basis_strategy.value} has no meaning for an entangled half")
        eve_rng = eve_rng if eve_rng is not None else rng
        bases = adversary.choose_bases(attack.basis_strategy, pairs[:, :2], eve_rng)
        pairs, _ = _measure_travelling_half(pairs, bases, eve_rng)

    sampled = np.sort(rng.choice(num_pairs, size=k, replace=False))
    bases = rng.integers(0, 2, size=k)
    first = qstate.LABEL_VECTORS[2 * bases]
    second = qstate.LABEL_VECTORS[2 * bases + 1]
    psi = pairs[sampled].reshape(-1, 2, 2)
    # probabilities of (h, t) outcomes in the shared basis
    probs = np.stack(
        [
            np.abs(np.einsum("nh,nt,nht->n", a.conj(), b.conj(), psi)) ** 2
            for a in (first, second)
            for b in (first, second)
        ],
        axis=1,
    )
    cum = np.cumsum(probs / probs.sum(axis=1, keepdims=True), axis=1)
    idx = np.minimum((rng.random(k)[:, None] >= cum).sum(axis=1), 3)
    mismatch = (idx == 1) | (idx == 2)
    rate = float(np.mean(mismatch))
    return PairCheck(rate, rate > threshold, pairs, sampled)


@dataclass
class SsqiOutcome:
    aborted: bool
    stage: str  # "pair_check", "qsscm" or "complete"
    pair_check_rate: float
    transcript: Transcript
    bell_outcome: BellOutcome | None = None
    outcome_bits: tuple[int, int] | None = None
    decoded_bits: tuple[int, int] | None = None
    reconstructed: PureState | None = None
    fidelity: float | None = None
    qsscm: qsscm.ProtocolOutcome | None = None


def _to_qsscm_party(p: PartyId) -> PartyId:
    if p.is_alice:
        return p
    if p.index == 0:
        raise ValueError("Bob takes no part in sharing the Bell outcome")
    return receiver(p.index - 1)


def to_qsscm_attack(attack: AttackModel) -> AttackModel:
    if isinstance(attack, adversary.NoAttack) or attack.segment == PAIR_SEGMENT:
        return NO_ATTACK
    seg = Segment(_to_qsscm_party(attack.segment.src), _to_qsscm_party(attack.segment.dst), attack.segment.phase)
    if isinstance(attack, adversary.DishonestReceiver):
        return dataclasses.replace(attack, party=_to_qsscm_party(attack.party), segment=seg)
    return dataclasses.replace(attack, segment=seg)


def qsscm_config(cfg: qsscm.ProtocolConfig) -> qsscm.ProtocolConfig:
    """The classical-sharing run among receivers 1..n-1, renumbered from 0."""
    holder = None if cfg.final_holder is None else cfg.final_holder - 1
    if holder is not None and holder < 0:
        raise qsscm.ConfigError("Bob cannot be the final holder of the Bell outcome")
    return dataclasses.replace(cfg, num_receivers=cfg.num_receivers - 1, final_holder=holder)


def run_ssqi(
    cfg: qsscm.ProtocolConfig,
    inp: UnknownQubit,
    coalition=None,
    attack: AttackModel = NO_ATTACK,
    trial: int = 0,
    num_pairs: int = 16,
    streams: Streams | None = None,
) -> SsqiOutcome:
    """Share ``inp`` among ``cfg.num_receivers`` receivers and try to rebuild it.

    ``coalition`` holds the receiver indices that cooperate (all by default).
    Without Bob nobody holds the qubit; a proper coalition with Bob guesses
    the correction uniformly.
    """
    n = cfg.num_receivers
    if n < 3:
        raise qsscm.ConfigError("quantum sharing needs at least 3 receivers")
    everyone = set(range(n))
    coalition = everyone if coalition is None else {p.index if isinstance(p, PartyId) else int(p) for p in coalition}
    if not coalition <= everyone:
        raise ValueError(f"coalition {sorted(coalition)} names unknown receivers")
    inner_cfg = qsscm_config(cfg)
    inner_attack = to_qsscm_attack(attack)
    streams = streams or Streams(cfg.master_seed, trial)
    tr = Transcript()

    check = pair_distribution_check(
        num_pairs, cfg.check_fraction, attack, streams["ssqi.pairs"], cfg.error_threshold, streams["ssqi.eve"]
    )
    tr.add("pair_check", ALICE, None, {"error_rate": check.error_rate, "sampled": len(check.sampled), "aborted": check.abort})
    if check.abort:
        return SsqiOutcome(True, "pair_check", check.error_rate, tr)

    spare = np.setdiff1d(np.arange(num_pairs), check.sampled)
    if len(spare) == 0:
        raise qsscm.ConfigError("no unsampled pair left for teleportation")
    pair = PureState(2, check.pairs[spare[0]])
    outcome, bob_qubit = teleport(inp, streams["ssqi.bell"], pair=pair)
    bits = outcome_bits(outcome)
    tr.add("teleport", ALICE, None, {"pair": int(spare[0]), "outcome": outcome.name})

    tr.add("ssqi", ALICE, None, {"qsscm_receiver_offset": 1, "message": list(bits)})
    shared = qsscm.run_protocol(inner_cfg, list(bits), inner_attack, streams=streams.child("ssqi.qsscm/"))
    tr.extend(shared.transcript)
    if shared.aborted:
        return SsqiOutcome(True, "qsscm", check.error_rate, tr, outcome, bits, qsscm=shared)
    decoded = tuple(int(b) for b in shared.decoded_bits)

    result = SsqiOutcome(False, "complete", check.error_rate, tr, outcome, bits, decoded, qsscm=shared)
    if 0 not in coalition:
        return result
    if coalition == everyone:
        used = bits_outcome(decoded)
    else:
        used = BellOutcome(int(streams["ssqi.r0.guess"].integers(0, 4)))
    result.reconstructed = qstate.apply1(correction_for(used), bob_qubit)
    result.fidelity = qstate.fidelity(inp.state, result.reconstructed)
    tr.add("ssqi", receiver(0), None, {"correction": _CORRECTIONS[used].name, "fidelity": result.fidelity})
    return result


def predicted_fidelity(num_receivers: int, coalition) -> float | None:
    """Mean reconstruction fidelity over Haar-random inputs for an honest run."""
    coalition = {p.index if isinstance(p, PartyId) else int(p) for p in coalition}
    if 0 not in coalition:
        return None
    if coalition >= set(range(num_receivers)):
        return 1.0
    return oracle.guessed_correction_fidelity()
