"""Exact probabilities by exhausting every discrete branch of a run.

Each function walks all initial labels, all tuples of encryption unitaries,
all attacker basis choices and all measurement outcomes with their exact
weights, using the scalar single-photon routines in :mod:`mqss.qstate`.
Nothing here samples; these values are what the Monte-Carlo runs are
tested against.
"""

from __future__ import annotations

import itertools

import numpy as np

from mqss import qstate
from mqss.adversary import AttackModel, BasisStrategy, DishonestReceiver, InterceptResend, NoAttack
from mqss.parties import PartyId, Phase, distribution_segments, return_segment
from mqss.qstate import Basis, StateLabel, UnitaryKind, apply1, make_unitary, state_of_label

_U = {k: make_unitary(k) for k in UnitaryKind}
_FLIP = _U[UnitaryKind.FLIP]


def _histories(num_receivers: int):
    """(probability, initial label, encryptor ops in order) for every history."""
    n_enc = num_receivers - 1
    w = 1.0 / (4 * 3**n_enc)
    for label in StateLabel:
        for ops in itertools.product(qstate.ENCRYPTION_KINDS, repeat=n_enc):
            yield w, label, ops


def _apply(ops, s, adjoint=False):
    for k in (reversed(ops) if adjoint else ops):
        s = apply1(_U[k].adjoint if adjoint else _U[k], s)
    return s


def _basis_weights(model, s, label: StateLabel) -> dict[Basis, float]:
    strategy = model.basis_strategy
    if strategy is BasisStrategy.ALWAYS_RECTILINEAR:
        return {Basis.RECTILINEAR: 1.0}
    if strategy is BasisStrategy.ALWAYS_DIAGONAL:
        return {Basis.DIAGONAL: 1.0}
    if strategy is BasisStrategy.INFORMED:
        return {qstate.label_of(s).basis: 1.0}
    knows_label = isinstance(model, DishonestReceiver) and model.party.index == 0
    if strategy is BasisStrategy.LABEL_BASIS and (knows_label or isinstance(model, InterceptResend)):
        return {label.basis: 1.0}
    return {Basis.RECTILINEAR: 0.5, Basis.DIAGONAL: 0.5}


def attacker_branches(model: AttackModel, s: qstate.PureState, label: StateLabel, applied: dict[int, UnitaryKind]):
    """Every (probability, resent state, observed label) of one interception.

    ``applied`` maps encryptor index to the op it has already applied.
    """
    if isinstance(model, NoAttack):
        return [(1.0, s, None)]
    own = None
    if isinstance(model, DishonestReceiver):
        own = applied.get(model.party.index)
    work = s if own is None else apply1(_U[own].adjoint, s)
    out = []
    for basis, pb in _basis_weights(model, work, label).items():
        probs = qstate.basis_probabilities(work, basis)
        for lab, p in zip(basis.labels, probs):
            if pb * p == 0.0:
                continue
            resent = state_of_label(lab)
            if own is not None:
                resent = apply1(_U[own], resent)
            out.append((pb * p, resent, lab))
    return out


def _p_label(s: qstate.PureState, label: StateLabel) -> float:
    """Probability that measuring ``s`` in ``label``'s basis yields ``label``."""
    p0, p1 = qstate.basis_probabilities(s, label.basis)
    return p0 if label == label.basis.labels[0] else p1


def _segment_index(model, num_receivers: int, holder: PartyId) -> tuple[Phase, int]:
    seg = model.segment
    if seg in distribution_segments(num_receivers):
        return Phase.DISTRIBUTION, distribution_segments(num_receivers).index(seg)
    if seg == return_segment(holder):
        return Phase.RETURN, num_receivers - 1
    raise ValueError(f"segment {seg} is not traversed with {num_receivers} receivers")


def detection_rate(model: AttackModel, num_receivers: int, final_holder: PartyId | None = None) -> float:
    """Per-photon error probability the attack causes.

    Distribution segments are caught by Alice's check, so this is the check
    error rate; a return segment is caught by authentication, so this is the
    per-bit mismatch rate there.
    """
    if isinstance(model, NoAttack):
        return 0.0
    holder = final_holder or PartyId(num_receivers - 1)
    phase, k = _segment_index(model, num_receivers, holder)
    total = 0.0
    if phase is Phase.DISTRIBUTION:
        for w, label, ops in _histories(num_receivers):
            before, after = ops[:k], ops[k:]
            applied = {i + 1: op for i, op in enumerate(before)}
            s = _apply(before, state_of_label(label))
            for p, resent, _ in attacker_branches(model, s, label, applied):
                final = _apply(ops, _apply(after, resent), adjoint=True)
                total += w * p * (1.0 - _p_label(final, label))
        return total
    for w, label, ops in _histories(num_receivers):
        applied = {i + 1: op for i, op in enumerate(ops)}
        plain = _apply(ops, state_of_label(label))
        for bit in (0, 1):
            s = apply1(_FLIP, plain) if bit else plain
            for p, resent, _ in attacker_branches(model, s, label, applied):
                p_zero = _p_label(_apply(ops, resent, adjoint=True), label)
                total += 0.5 * w * p * (p_zero if bit else 1.0 - p_zero)
    return total


def eve_accuracy(
    model: AttackModel, num_receivers: int, final_holder: PartyId | None = None, pooled_knowledge: bool = False
) -> float:
    """Probability Eve guesses an encoded bit right after a return-segment attack."""
    from mqss.adversary import eve_guess

    holder = final_holder or PartyId(num_receivers - 1)
    phase, _ = _segment_index(model, num_receivers, holder)
    if phase is not Phase.RETURN:
        raise ValueError("Eve only sees encoded bits on the return segment")
    total = 0.0
    for w, label, ops in _histories(num_receivers):
        applied = {i + 1: op for i, op in enumerate(ops)}
        plain = _apply(ops, state_of_label(label))
        expected = int(qstate.label_of(plain)) if pooled_knowledge else None
        for bit in (0, 1):
            s = apply1(_FLIP, plain) if bit else plain
            for p, _, observed in attacker_branches(model, s, label, applied):
                total += 0.5 * w * p * float(eve_guess(int(observed), expected) == bit)
    return total


def partial_decode_success(num_receivers: int, coalition, rule: str = "identity") -> float:
    """Per-bit success probability of a coalition decoding without the rest.

    Unknown labels are guessed uniformly; unknown ops are taken as I
    (``"identity"``) or guessed uniformly (``"random_ops"``).
    """
    coalition = {p.index if isinstance(p, PartyId) else int(p) for p in coalition}
    n_enc = num_receivers - 1
    total = 0.0
    for w, label, ops in _histories(num_receivers):
        plain = _apply(ops, state_of_label(label))
        guessed_labels = [(1.0, label)] if 0 in coalition else [(0.25, g) for g in StateLabel]
        choices = []
        for i, op in enumerate(ops):
            if i + 1 in coalition:
                choices.append([(1.0, op)])
            elif rule == "random_ops":
                choices.append([(1 / 3, k) for k in qstate.ENCRYPTION_KINDS])
            else:
                choices.append([(1.0, UnitaryKind.ID)])
        for bit in (0, 1):
            s = apply1(_FLIP, plain) if bit else plain
            for pl, guess in guessed_labels:
                for combo in itertools.product(*choices) if n_enc else [()]:
                    pg = float(np.prod([c[0] for c in combo])) if combo else 1.0
                    undone = _apply([c[1] for c in combo], s, adjoint=True)
                    p_zero = _p_label(undone, guess)
                    total += 0.5 * w * pl * pg * (p_zero if bit == 0 else 1.0 - p_zero)
    return total


def pair_check_rate(model: AttackModel) -> float:
    """Mismatch probability of the two-basis check on a shared Phi+ pair.

    The attacker measures the travelling half; Alice and Bob then measure
    both halves in one common uniformly random basis.
    """
    phi = qstate.bell_state(qstate.BellOutcome.PHI_PLUS)
    branches = [(1.0, phi)]
    if not isinstance(model, NoAttack):
        branches = []
        for basis, pb in _basis_weights(model, phi, StateLabel.H).items():
            for lab in basis.labels:
                t = qstate.LABEL_VECTORS[lab]
                rest = phi.amps.reshape(2, 2) @ t.conj()
                p = float(np.vdot(rest, rest).real)
                if p > 0:
                    branches.append((pb * p, qstate.PureState(2, np.kron(rest / np.sqrt(p), t))))
    total = 0.0
    for p, s in branches:
        for basis in Basis:
            for i, j in itertools.product(basis.labels, repeat=2):
                if i != j:
                    amp = np.vdot(np.kron(qstate.LABEL_VECTORS[i], qstate.LABEL_VECTORS[j]), s.amps)
                    total += 0.5 * p * abs(amp) ** 2
    return total


def mean_fidelity(op: np.ndarray) -> float:
    """Average of |<psi|M|psi>|^2 over Haar-random qubits psi.

    Uses the unitary 2-design identity (tr(M^dag M) + |tr M|^2) / (d (d + 1)).
    """
    op = np.asarray(op, dtype=complex)
    d = op.shape[0]
    return float((np.trace(op.conj().T @ op).real + abs(np.trace(op)) ** 2) / (d * (d + 1)))


# Bob's qubit after each Bell outcome, read straight off the teleportation
# decomposition: branch(psi) = BRANCH_OPERATORS[outcome] @ psi.
BRANCH_OPERATORS = {
    qstate.BellOutcome.PHI_PLUS: np.array([[1, 0], [0, 1]], dtype=complex),
    qstate.BellOutcome.PSI_PLUS: np.array([[0, 1], [1, 0]], dtype=complex),
    qstate.BellOutcome.PHI_MINUS: np.array([[1, 0], [0, -1]], dtype=complex),
    qstate.BellOutcome.PSI_MINUS: np.array([[0, -1], [1, 0]], dtype=complex),
}

CORRECTION_KINDS = (UnitaryKind.ID, UnitaryKind.CORR1, UnitaryKind.CORR2, UnitaryKind.CORR3)


def guessed_correction_fidelity() -> float:
    """Mean fidelity when Bob applies a uniformly random correction."""
    total = 0.0
    for branch in BRANCH_OPERATORS.values():
        for kind in CORRECTION_KINDS:
            total += mean_fidelity(_U[kind].m @ branch) / 16
    return total
