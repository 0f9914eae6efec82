"""Channel adversaries that measure and resend photons on one segment."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np

from mqss import qstate
from mqss.parties import Knowledge, PartyId, Segment

if TYPE_CHECKING:
    from mqss.qsscm import PhotonBatch


class BasisStrategy(str, enum.Enum):
    UNIFORM_RANDOM = "uniform_random"
    ALWAYS_RECTILINEAR = "always_rectilinear"
    ALWAYS_DIAGONAL = "always_diagonal"
    # measure in the basis of the initial label; needs the preparer's knowledge
    LABEL_BASIS = "label_basis"
    # hypothetical attacker who always picks the photon's actual basis
    INFORMED = "informed"


class SegmentMismatch(ValueError):
    pass


@dataclass(frozen=True)
class NoAttack:
    segment: None = None


@dataclass(frozen=True)
class InterceptResend:
    segment: Segment
    basis_strategy: BasisStrategy = BasisStrategy.UNIFORM_RANDOM


@dataclass(frozen=True)
class DishonestReceiver:
    """A receiver who taps a segment using what he knows of his own history.

    He undoes his own already-applied unitary, measures, redoes it and resends.
    The preparer (receiver 0) knows the initial labels instead.
    """

    party: PartyId
    segment: Segment
    basis_strategy: BasisStrategy = BasisStrategy.UNIFORM_RANDOM

    def __post_init__(self):
        if self.party.is_alice:
            raise ValueError("a dishonest receiver cannot be Alice")
        if self.party in (self.segment.src, self.segment.dst):
            raise ValueError(f"{self.party} is an endpoint of segment {self.segment}")


AttackModel = Union[NoAttack, InterceptResend, DishonestReceiver]
NO_ATTACK = NoAttack()


@dataclass(frozen=True)
class EveRecord:
    position: int
    measured_basis: qstate.Basis
    observed_label: qstate.StateLabel


def choose_bases(
    strategy: BasisStrategy,
    states: np.ndarray,
    rng: np.random.Generator,
    known_labels: np.ndarray | None = None,
) -> np.ndarray:
    m = len(states)
    strategy = BasisStrategy(strategy)
    if strategy is BasisStrategy.ALWAYS_RECTILINEAR:
        return np.zeros(m, dtype=np.intp)
    if strategy is BasisStrategy.ALWAYS_DIAGONAL:
        return np.ones(m, dtype=np.intp)
    if strategy is BasisStrategy.LABEL_BASIS and known_labels is not None:
        return np.asarray(known_labels, dtype=np.intp) >> 1
    if strategy is BasisStrategy.INFORMED:
        overlaps = np.abs(states @ qstate.LABEL_VECTORS.conj().T)
        return np.argmax(overlaps, axis=1) >> 1
    return rng.integers(0, 2, size=m)


def apply_attack(
    model: AttackModel,
    states: np.ndarray,
    positions: np.ndarray,
    segment: Segment,
    side_knowledge: Knowledge | None,
    rng: np.random.Generator,
) -> tuple[np.ndarray, list[EveRecord]]:
    """Run ``model`` on the photons crossing ``segment``.

    ``states[i]`` is the photon at ``positions[i]``. Returns the resent
    states and one record per intercepted photon. A dishonest receiver's
    ``side_knowledge`` must only hold what he has seen so far.
    """
    if isinstance(model, NoAttack):
        return states, []
    if model.segment != segment:
        raise SegmentMismatch(f"attack targets {model.segment}, photons are on {segment}")

    own_ops = None
    known_labels = None
    if isinstance(model, DishonestReceiver) and side_knowledge is not None:
        own_ops = side_knowledge.ops.get(model.party.index)
        known_labels = side_knowledge.labels

    work = states if own_ops is None else qstate.apply_batch(own_ops, states, adjoint=True)
    bases = choose_bases(model.basis_strategy, work, rng, known_labels)
    observed = qstate.measure_batch(work, bases, rng)
    resent = qstate.label_states(observed)
    if own_ops is not None:
        resent = qstate.apply_batch(own_ops, resent)

    records = [
        EveRecord(int(p), qstate.Basis(b), qstate.StateLabel(o))
        for p, b, o in zip(np.asarray(positions).tolist(), bases.tolist(), observed.tolist())
    ]
    return resent, records


def eve_guess(observed, expected=None):
    """Eve's bit guess from her observed label.

    Without knowledge she reads the in-basis bit of what she saw. Given the
    unencoded label ``expected`` she answers 1 iff she saw its flip.
    """
    observed = np.asarray(observed)
    if expected is None:
        return observed & 1
    return (observed == (np.asarray(expected) ^ 1)).astype(np.intp)


def eve_accuracy(
    records: list[EveRecord], batch: PhotonBatch, knowledge: Knowledge | None = None
) -> float:
    """Fraction of Alice's encoded bits Eve guesses right from ``records``.

    Only photons that carried an encoded bit count. With ``knowledge``
    (a complete pool) Eve compares against the unencoded label.
    """
    usable = [r for r in records if batch.encoded_bits[r.position] >= 0]
    if not usable:
        raise ValueError("no intercepted photon carries an encoded bit")
    pos = np.array([r.position for r in usable])
    observed = np.array([int(r.observed_label) for r in usable])
    expected = None
    if knowledge is not None:
        if not knowledge.complete:
            raise ValueError(f"knowledge pool incomplete: missing {knowledge.missing()}")
        k = knowledge.take(pos)
        s = qstate.label_states(k.labels)
        for idx in k.encryptors:
            s = qstate.apply_batch(k.ops[idx], s)
        expected = np.argmax(np.abs(s @ qstate.LABEL_VECTORS.conj().T), axis=1)
    guesses = eve_guess(observed, expected)
    return float(np.mean(guesses == batch.encoded_bits[pos]))


def predicted_detection_rate(model: AttackModel, num_receivers: int, final_holder: PartyId | None = None) -> float:
    from mqss import oracle

    return oracle.detection_rate(model, num_receivers, final_holder)
