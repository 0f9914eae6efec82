"""Dense statevector core for one to three qubits.

Qubit 0 is the most significant tensor factor, so ``tensor(a, b)`` keeps
``a``'s qubits first. Every random choice takes an explicit
``numpy.random.Generator``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 3
NORM_TOL = 1e-9
# Born probabilities this close to 0 or 1 are snapped so eigenstate
# measurements stay deterministic under float round-off.
_SNAP = 1e-12

SQRT_HALF = 1.0 / np.sqrt(2.0)


class StateLabel(enum.IntEnum):
    """The four preparation states. ``value == 2 * basis + bit``."""

    H = 0
    V = 1
    U_DIAG = 2
    D_DIAG = 3

    @property
    def basis(self) -> Basis:
        return Basis(self.value >> 1)

    @property
    def flipped(self) -> StateLabel:
        """The other state of the same basis."""
        return StateLabel(self.value ^ 1)


class Basis(enum.IntEnum):
    RECTILINEAR = 0
    DIAGONAL = 1

    @property
    def labels(self) -> tuple[StateLabel, StateLabel]:
        return StateLabel(2 * self.value), StateLabel(2 * self.value + 1)


class UnitaryKind(enum.IntEnum):
    ID = 0
    FLIP = 1
    HADA = 2
    CORR1 = 3
    CORR2 = 4
    CORR3 = 5


class BellOutcome(enum.IntEnum):
    PHI_PLUS = 0
    PSI_PLUS = 1
    PHI_MINUS = 2
    PSI_MINUS = 3


LABEL_VECTORS = np.array(
    [
        [1.0, 0.0],
        [0.0, 1.0],
        [SQRT_HALF, SQRT_HALF],
        [SQRT_HALF, -SQRT_HALF],
    ],
    dtype=complex,
)

UNITARY_MATRICES = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [-1, 0]],  # U = |0><1| - |1><0|
        [[SQRT_HALF, SQRT_HALF], [SQRT_HALF, -SQRT_HALF]],
        [[0, 1], [1, 0]],  # u1 = |H><V| + |V><H|
        [[1, 0], [0, -1]],  # u2 = |H><H| - |V><V|
        [[0, 1], [-1, 0]],  # u3 = |H><V| - |V><H|
    ],
    dtype=complex,
)
UNITARY_MATRICES.setflags(write=False)
LABEL_VECTORS.setflags(write=False)

ENCRYPTION_KINDS = (UnitaryKind.ID, UnitaryKind.FLIP, UnitaryKind.HADA)


class DimensionError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PureState:
    num_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        if self.num_qubits not in (1, 2, 3):
            raise DimensionError(f"num_qubits must be 1..{MAX_QUBITS}, got {self.num_qubits}")
        amps = _frozen(self.amps).reshape(-1)
        if amps.shape != (2**self.num_qubits,):
            raise DimensionError(
                f"{self.num_qubits} qubits need {2**self.num_qubits} amplitudes, got {amps.shape[0]}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_amps(cls, amps) -> PureState:
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        n = int(np.log2(amps.shape[0]))
        return cls(n, amps)

    @classmethod
    def normalized(cls, amps) -> PureState:
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        return cls.from_amps(amps / np.linalg.norm(amps))

    def __repr__(self) -> str:
        return f"PureState({self.num_qubits}, {np.round(self.amps, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class Unitary2:
    m: np.ndarray

    def __post_init__(self):
        m = _frozen(self.m)
        if m.shape != (2, 2):
            raise DimensionError(f"expected a 2x2 matrix, got shape {m.shape}")
        if not np.allclose(m.conj().T @ m, np.eye(2), rtol=0, atol=1e-12):
            raise ValueError("matrix is not unitary")
        object.__setattr__(self, "m", m)

    @property
    def adjoint(self) -> Unitary2:
        return Unitary2(self.m.conj().T)

    def __matmul__(self, other: Unitary2) -> Unitary2:
        return Unitary2(self.m @ other.m)


def state_of_label(label: StateLabel) -> PureState:
    return PureState(1, LABEL_VECTORS[StateLabel(label)])


def make_unitary(kind: UnitaryKind) -> Unitary2:
    return Unitary2(UNITARY_MATRICES[UnitaryKind(kind)])


def apply1(u: Unitary2, s: PureState) -> PureState:
    if s.num_qubits != 1:
        raise DimensionError(f"apply1 needs a 1-qubit state, got {s.num_qubits} qubits")
    return PureState(1, u.m @ s.amps)


def apply_on_qubit(u: Unitary2, s: PureState, qubit_index: int) -> PureState:
    """Apply ``u`` to one tensor factor of ``s``, identity on the rest."""
    n = s.num_qubits
    if not 0 <= qubit_index < n:
        raise IndexError(f"qubit {qubit_index} out of range for {n} qubits")
    psi = s.amps.reshape((2,) * n)
    psi = np.moveaxis(np.tensordot(u.m, psi, axes=([1], [qubit_index])), 0, qubit_index)
    return PureState(n, psi.reshape(-1))


def tensor(a: PureState, b: PureState) -> PureState:
    n = a.num_qubits + b.num_qubits
    if n > MAX_QUBITS:
        raise DimensionError(f"tensor product would have {n} qubits (max {MAX_QUBITS})")
    return PureState(n, np.kron(a.amps, b.amps))


def inner(a: PureState, b: PureState) -> complex:
    if a.num_qubits != b.num_qubits:
        raise DimensionError("states have different qubit counts")
    return complex(np.vdot(a.amps, b.amps))


def fidelity(a: PureState, b: PureState) -> float:
    return abs(inner(a, b)) ** 2


def equal_up_to_phase(a: PureState, b: PureState, tol: float = 1e-9) -> bool:
    return abs(inner(a, b)) >= 1.0 - tol


def label_of(s: PureState, tol: float = 1e-9) -> StateLabel | None:
    """The preparation label ``s`` equals up to phase, or None."""
    for label in StateLabel:
        if equal_up_to_phase(s, state_of_label(label), tol):
            return label
    return None


def _snap(p):
    p = np.clip(p, 0.0, 1.0)
    return np.where(p < _SNAP, 0.0, np.where(p > 1.0 - _SNAP, 1.0, p))


def basis_probabilities(s: PureState, b: Basis) -> tuple[float, float]:
    """Born probabilities of the two labels of ``b`` for a 1-qubit state."""
    if s.num_qubits != 1:
        raise DimensionError("basis_probabilities needs a 1-qubit state")
    p0 = float(_snap(abs(np.vdot(LABEL_VECTORS[2 * b], s.amps)) ** 2))
    return p0, 1.0 - p0


def measure_in_basis(
    s: PureState, b: Basis, rng: np.random.Generator
) -> tuple[StateLabel, PureState]:
    p0, _ = basis_probabilities(s, Basis(b))
    first, second = Basis(b).labels
    outcome = first if rng.random() < p0 else second
    return outcome, state_of_label(outcome)


def measure_qubit(
    s: PureState, qubit: int, b: Basis, rng: np.random.Generator
) -> tuple[StateLabel, PureState]:
    """Projective measurement of one qubit of a multi-qubit state."""
    n = s.num_qubits
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range for {n} qubits")
    psi = np.moveaxis(s.amps.reshape((2,) * n), qubit, 0)
    first, second = Basis(b).labels
    branches = []
    for label in (first, second):
        rest = np.tensordot(LABEL_VECTORS[label].conj(), psi, axes=([0], [0]))
        branches.append((label, rest, float(np.vdot(rest, rest).real)))
    p0 = float(_snap(branches[0][2]))
    label, rest, p = branches[0] if rng.random() < p0 else branches[1]
    rest = rest / np.sqrt(p)
    collapsed = np.multiply.outer(LABEL_VECTORS[label], rest)
    collapsed = np.moveaxis(collapsed, 0, qubit).reshape(-1)
    return label, PureState(n, collapsed)


def bell_state(k: BellOutcome) -> PureState:
    k = BellOutcome(k)
    sign = -1.0 if k in (BellOutcome.PHI_MINUS, BellOutcome.PSI_MINUS) else 1.0
    amps = np.zeros(4, dtype=complex)
    if k in (BellOutcome.PHI_PLUS, BellOutcome.PHI_MINUS):
        amps[0b00], amps[0b11] = SQRT_HALF, sign * SQRT_HALF
    else:
        amps[0b01], amps[0b10] = SQRT_HALF, sign * SQRT_HALF
    return PureState(2, amps)


def bell_branches(s: PureState, pair: tuple[int, int]) -> list[tuple[BellOutcome, float, np.ndarray]]:
    """Unnormalized remaining-qubit vectors for every Bell projection of ``pair``.

    Returns ``(outcome, probability, vector)`` in ``BellOutcome`` order.
    """
    if s.num_qubits != 3:
        raise DimensionError("Bell measurement is defined on 3-qubit states")
    a, b = pair
    if a == b or not (0 <= a < 3 and 0 <= b < 3):
        raise IndexError(f"invalid qubit pair {pair}")
    (other,) = {0, 1, 2} - {a, b}
    psi = np.transpose(s.amps.reshape(2, 2, 2), (a, b, other))
    out = []
    for k in BellOutcome:
        bell = bell_state(k).amps.reshape(2, 2)
        rest = np.tensordot(bell.conj(), psi, axes=([0, 1], [0, 1]))
        out.append((k, float(np.vdot(rest, rest).real), rest))
    return out


def bell_measure(
    s: PureState,
    pair: tuple[int, int],
    rng: np.random.Generator | None = None,
    forced: BellOutcome | None = None,
) -> tuple[BellOutcome, PureState]:
    """Bell-basis measurement of ``pair``; returns outcome and the third qubit.

    Pass ``forced`` to select a branch instead of sampling (it must have
    non-zero probability).
    """
    branches = bell_branches(s, pair)
    if forced is not None:
        k, p, rest = branches[BellOutcome(forced)]
        if p < _SNAP:
            raise ValueError(f"branch {k.name} has zero probability")
    else:
        if rng is None:
            raise ValueError("bell_measure needs rng when no outcome is forced")
        probs = np.array([p for _, p, _ in branches])
        idx = int(np.searchsorted(np.cumsum(probs / probs.sum()), rng.random(), side="right"))
        k, p, rest = branches[min(idx, 3)]
    return k, PureState(1, rest / np.sqrt(p))


def random_qubit(rng: np.random.Generator) -> PureState:
    """Haar-random single-qubit state."""
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return PureState(1, v / np.linalg.norm(v))


# Batch helpers for the protocol engine: photon ``i`` is row ``i``.


def label_states(labels: np.ndarray) -> np.ndarray:
    return LABEL_VECTORS[np.asarray(labels, dtype=np.intp)].copy()


def apply_batch(kinds: np.ndarray, states: np.ndarray, adjoint: bool = False) -> np.ndarray:
    mats = UNITARY_MATRICES[np.asarray(kinds, dtype=np.intp)]
    if adjoint:
        mats = mats.conj().transpose(0, 2, 1)
    return np.einsum("nij,nj->ni", mats, states)


def measure_batch(
    states: np.ndarray, bases: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Measure row ``i`` in ``bases[i]``; returns outcome labels as ints.

    Exactly ``len(states)`` uniforms are drawn, whatever the states are.
    """
    bases = np.asarray(bases, dtype=np.intp)
    first = LABEL_VECTORS[2 * bases]
    p0 = _snap(np.abs(np.einsum("ni,ni->n", first.conj(), states)) ** 2)
    draws = rng.random(len(states))
    return 2 * bases + (draws >= p0).astype(np.intp)
