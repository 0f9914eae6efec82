import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqss import qstate
from mqss.qstate import (
    Basis,
    BellOutcome,
    PureState,
    StateLabel,
    UnitaryKind,
    apply1,
    apply_on_qubit,
    bell_measure,
    bell_state,
    equal_up_to_phase,
    make_unitary,
    measure_in_basis,
    state_of_label,
    tensor,
)

from conftest import within_sigmas

R = 1 / np.sqrt(2)
H, V, U_, D_ = StateLabel.H, StateLabel.V, StateLabel.U_DIAG, StateLabel.D_DIAG
FLIP, HADA, ID = (make_unitary(k) for k in (UnitaryKind.FLIP, UnitaryKind.HADA, UnitaryKind.ID))


def ket(*amps):
    return PureState.from_amps(amps)


@st.composite
def qubits(draw):
    re = draw(st.lists(st.floats(-1, 1, allow_nan=False), min_size=2, max_size=2))
    im = draw(st.lists(st.floats(-1, 1, allow_nan=False), min_size=2, max_size=2))
    v = np.array(re) + 1j * np.array(im)
    if np.linalg.norm(v) < 1e-3:
        v = np.array([1.0, 0.0])
    return PureState.normalized(v)


@pytest.mark.parametrize(
    "label, amps",
    [(H, (1, 0)), (V, (0, 1)), (U_, (R, R)), (D_, (R, -R))],
)
def test_state_of_label(label, amps):
    np.testing.assert_allclose(state_of_label(label).amps, amps, atol=0)


def test_named_matrices():
    np.testing.assert_array_equal(make_unitary(UnitaryKind.FLIP).m, [[0, 1], [-1, 0]])
    np.testing.assert_allclose(make_unitary(UnitaryKind.HADA).m, R * np.array([[1, 1], [1, -1]]), atol=1e-15)
    np.testing.assert_array_equal(make_unitary(UnitaryKind.ID).m, np.eye(2))
    np.testing.assert_array_equal(make_unitary(UnitaryKind.CORR1).m, [[0, 1], [1, 0]])
    np.testing.assert_array_equal(make_unitary(UnitaryKind.CORR2).m, [[1, 0], [0, -1]])
    np.testing.assert_array_equal(make_unitary(UnitaryKind.CORR3).m, [[0, 1], [-1, 0]])


@pytest.mark.parametrize("kind", list(UnitaryKind))
def test_unitarity(kind):
    m = make_unitary(kind).m
    np.testing.assert_allclose(m.conj().T @ m, np.eye(2), atol=1e-12, rtol=0)


def test_non_unitary_rejected():
    with pytest.raises(ValueError):
        qstate.Unitary2(np.array([[1, 1], [0, 1]]))


def test_apply1_examples():
    np.testing.assert_allclose(apply1(FLIP, ket(1, 0)).amps, [0, -1], atol=1e-15)
    np.testing.assert_allclose(apply1(HADA, state_of_label(H)).amps, state_of_label(U_).amps, atol=1e-15)
    np.testing.assert_allclose(apply1(FLIP, state_of_label(D_)).amps, -state_of_label(U_).amps, atol=1e-15)


def test_apply1_rejects_two_qubits():
    with pytest.raises(qstate.DimensionError):
        apply1(FLIP, tensor(ket(1, 0), ket(1, 0)))


@given(qubits())
def test_apply1_preserves_norm(s):
    for kind in UnitaryKind:
        out = apply1(make_unitary(kind), s)
        assert abs(np.linalg.norm(out.amps) - 1) < 1e-12


def test_apply_on_qubit_examples():
    zz = tensor(ket(1, 0), ket(1, 0))
    np.testing.assert_allclose(apply_on_qubit(FLIP, zz, 0).amps, [0, 0, -1, 0], atol=1e-15)
    np.testing.assert_allclose(apply_on_qubit(HADA, zz, 1).amps, tensor(ket(1, 0), state_of_label(U_)).amps, atol=1e-15)
    with pytest.raises(IndexError):
        apply_on_qubit(FLIP, zz, 2)


@given(qubits(), qubits(), st.integers(0, 1))
def test_apply_on_qubit_identity(a, b, k):
    s = tensor(a, b)
    np.testing.assert_allclose(apply_on_qubit(ID, s, k).amps, s.amps, atol=1e-15)


@given(qubits(), qubits(), qubits())
def test_apply_on_qubit_matches_kron(a, b, c):
    s = tensor(tensor(a, b), c)
    for k, full in enumerate(
        [np.kron(np.kron(HADA.m, np.eye(2)), np.eye(2)), np.kron(np.kron(np.eye(2), HADA.m), np.eye(2)), np.kron(np.eye(4), HADA.m)]
    ):
        np.testing.assert_allclose(apply_on_qubit(HADA, s, k).amps, full @ s.amps, atol=1e-12)


def test_tensor_examples():
    np.testing.assert_array_equal(tensor(ket(1, 0), ket(0, 1)).amps, [0, 1, 0, 0])
    np.testing.assert_allclose(tensor(state_of_label(U_), ket(1, 0)).amps, [R, 0, R, 0])
    with pytest.raises(qstate.DimensionError):
        tensor(tensor(ket(1, 0), ket(1, 0)), tensor(ket(1, 0), ket(1, 0)))


def test_tensor_with_phi_plus_matches_hand_expansion():
    alpha, beta = 0.6, 0.8j
    s = tensor(ket(alpha, beta), bell_state(BellOutcome.PHI_PLUS))
    expected = np.zeros(8, dtype=complex)
    # (a|0> + b|1>)_u (|00> + |11>)_ht / sqrt2, index = 4u + 2h + t
    expected[0b000] = expected[0b011] = alpha * R
    expected[0b100] = expected[0b111] = beta * R
    np.testing.assert_allclose(s.amps, expected, atol=1e-15)


def test_equal_up_to_phase_examples():
    assert equal_up_to_phase(ket(0, 1), ket(0, -1))
    assert not equal_up_to_phase(ket(1, 0), ket(0, 1))
    assert equal_up_to_phase(apply1(FLIP, apply1(FLIP, ket(1, 0))), ket(1, 0))
    with pytest.raises(qstate.DimensionError):
        equal_up_to_phase(ket(1, 0), tensor(ket(1, 0), ket(1, 0)))


def test_flip_squared_is_minus_identity():
    np.testing.assert_array_equal(FLIP.m @ FLIP.m, -np.eye(2))


def test_flip_hadamard_anticommute():
    np.testing.assert_allclose(FLIP.m @ HADA.m, -(HADA.m @ FLIP.m), atol=1e-12, rtol=0)


@pytest.mark.parametrize("src, dst", [(H, V), (V, H), (U_, D_), (D_, U_)])
def test_flip_table(src, dst):
    assert equal_up_to_phase(apply1(FLIP, state_of_label(src)), state_of_label(dst))


@pytest.mark.parametrize("src, dst", [(H, U_), (V, D_), (U_, H), (D_, V)])
def test_hadamard_table(src, dst):
    assert equal_up_to_phase(apply1(HADA, state_of_label(src)), state_of_label(dst))


def test_measure_eigenstates_deterministic(rng):
    for _ in range(200):
        assert measure_in_basis(state_of_label(V), Basis.RECTILINEAR, rng)[0] is V
        assert measure_in_basis(state_of_label(D_), Basis.DIAGONAL, rng)[0] is D_


def test_measure_u_in_rectilinear_is_fair(rng):
    # |<0|u>|^2 = 1/2
    n = 20000
    hits = sum(measure_in_basis(state_of_label(U_), Basis.RECTILINEAR, rng)[0] is H for _ in range(n))
    assert within_sigmas(hits / n, 0.5, n)


def test_measure_returns_collapsed_state(rng):
    label, collapsed = measure_in_basis(state_of_label(U_), Basis.RECTILINEAR, rng)
    assert equal_up_to_phase(collapsed, state_of_label(label))


@given(qubits())
def test_born_probabilities_sum_to_one(s):
    for b in Basis:
        p0, p1 = qstate.basis_probabilities(s, b)
        assert abs(p0 + p1 - 1) < 1e-12


def test_measure_batch_matches_scalar_law(rng):
    states = np.tile(state_of_label(U_).amps, (40000, 1))
    out = qstate.measure_batch(states, np.zeros(40000, dtype=int), rng)
    assert set(np.unique(out)) == {0, 1}
    assert within_sigmas(np.mean(out == 0), 0.5, 40000)


def test_measure_qubit_on_pair(rng):
    phi = bell_state(BellOutcome.PHI_PLUS)
    for b in Basis:
        for _ in range(50):
            label, s = qstate.measure_qubit(phi, 1, b, rng)
            other, _ = qstate.measure_qubit(s, 0, b, rng)
            assert other == label


@pytest.mark.parametrize(
    "k, amps",
    [
        (BellOutcome.PHI_PLUS, [R, 0, 0, R]),
        (BellOutcome.PSI_PLUS, [0, R, R, 0]),
        (BellOutcome.PHI_MINUS, [R, 0, 0, -R]),
        (BellOutcome.PSI_MINUS, [0, R, -R, 0]),
    ],
)
def test_bell_states(k, amps):
    np.testing.assert_allclose(bell_state(k).amps, amps, atol=1e-15)


def test_phi_plus_diagonal_expansion():
    uu = tensor(state_of_label(U_), state_of_label(U_)).amps
    dd = tensor(state_of_label(D_), state_of_label(D_)).amps
    np.testing.assert_allclose(bell_state(BellOutcome.PHI_PLUS).amps, R * (uu + dd), atol=1e-15)


ALPHA, BETA = 0.6, 0.8j
# Bob's qubit for each outcome, written out from the teleportation expansion
BRANCH_TABLE = {
    BellOutcome.PHI_PLUS: (ALPHA, BETA),
    BellOutcome.PSI_PLUS: (BETA, ALPHA),
    BellOutcome.PHI_MINUS: (ALPHA, -BETA),
    BellOutcome.PSI_MINUS: (-BETA, ALPHA),
}


@pytest.mark.parametrize("outcome", list(BellOutcome))
def test_bell_measure_branches(outcome):
    s = tensor(ket(ALPHA, BETA), bell_state(BellOutcome.PHI_PLUS))
    k, rest = bell_measure(s, (0, 2), forced=outcome)
    assert k is outcome
    assert equal_up_to_phase(rest, ket(*BRANCH_TABLE[outcome]))


def test_bell_branch_probabilities_quarter():
    s = tensor(ket(ALPHA, BETA), bell_state(BellOutcome.PHI_PLUS))
    for _, p, _ in qstate.bell_branches(s, (0, 2)):
        assert abs(p - 0.25) < 1e-12


def test_bell_measure_sampling_uniform(rng):
    s = tensor(ket(ALPHA, BETA), bell_state(BellOutcome.PHI_PLUS))
    n = 10000
    counts = np.bincount([bell_measure(s, (0, 2), rng)[0] for _ in range(n)], minlength=4)
    for c in counts:
        assert within_sigmas(c / n, 0.25, n)


def test_bell_measure_errors(rng):
    s = tensor(ket(1, 0), bell_state(BellOutcome.PHI_PLUS))
    with pytest.raises(IndexError):
        bell_measure(s, (0, 0), rng)
    # u = |0>, h,t in Phi+: projecting (u,t) onto Psi- leaves only the |1>_t term
    zero_branch = tensor(tensor(ket(1, 0), ket(1, 0)), ket(1, 0))
    with pytest.raises(ValueError):
        bell_measure(zero_branch, (0, 2), forced=BellOutcome.PSI_PLUS)


def test_pure_state_invariants():
    with pytest.raises(ValueError):
        PureState(1, [1, 1])
    with pytest.raises(ValueError):
        PureState(1, [np.nan, 0])
    with pytest.raises(qstate.DimensionError):
        PureState(4, np.eye(16)[0])


@settings(max_examples=50)
@given(st.lists(st.sampled_from(qstate.ENCRYPTION_KINDS), max_size=8), st.sampled_from(list(StateLabel)))
def test_closure_under_encryption_ops(ops, label):
    s = state_of_label(label)
    for k in ops:
        s = apply1(make_unitary(k), s)
    assert qstate.label_of(s) is not None


def test_apply_batch_matches_apply1(rng):
    labels = rng.integers(0, 4, 300)
    kinds = rng.integers(0, 6, 300)
    states = qstate.label_states(labels)
    out = qstate.apply_batch(kinds, states)
    back = qstate.apply_batch(kinds, out, adjoint=True)
    for i in range(300):
        expected = apply1(make_unitary(kinds[i]), state_of_label(labels[i])).amps
        np.testing.assert_allclose(out[i], expected, atol=1e-15)
    np.testing.assert_allclose(back, states, atol=1e-12)
