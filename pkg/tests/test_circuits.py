import numpy as np
import pytest

from qpelab.circuits import (
    circuit_to_unitary,
    controlled_rx,
    controlled_rz,
    count_gates,
    inverse_qft_permuted,
    pauli_string_exp,
    phase_aligned_distance,
)
from qpelab.models import controlled_power_circuit, ising
from qpelab.statevec import CU1, H, U1, Circuit, Statevector, apply_circuit, substream

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)
PAULI = {"X": X, "Y": Y, "Z": Z, "I": np.eye(2, dtype=complex)}


def controlled_matrix(v, control, target, n):
    """Dense controlled-1q-gate on our wire ordering (oracle construction)."""
    dim = 2**n
    u = np.eye(dim, dtype=complex)
    for i in range(dim):
        if (i >> control) & 1 and not (i >> target) & 1:
            j = i | (1 << target)
            u[i, i], u[i, j] = v[0, 0], v[0, 1]
            u[j, i], u[j, j] = v[1, 0], v[1, 1]
    return u


def rz_matrix(theta):
    return np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)])


def rx_matrix(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def string_exponential(letters_by_wire, theta, n):
    """exp(-i theta P / 2) by exact eigendecomposition (independent oracle)."""
    p = np.array([[1.0 + 0j]])
    for w in range(n - 1, -1, -1):
        p = np.kron(p, PAULI[letters_by_wire.get(w, "I")])
    vals, vecs = np.linalg.eigh(p)
    return (vecs * np.exp(-1j * theta * vals / 2)) @ vecs.conj().T


class TestControlledRz:
    def test_zero_angle_is_identity(self):
        u = circuit_to_unitary(controlled_rz(0.0, 0, 1))
        np.testing.assert_allclose(u, np.eye(4), atol=1e-12)

    @pytest.mark.parametrize("theta", [0.3, -1.7, np.pi, 2 * np.pi, 5.0])
    def test_matches_controlled_rz_matrix(self, theta):
        u = circuit_to_unitary(controlled_rz(theta, 0, 1))
        target = controlled_matrix(rz_matrix(theta), 0, 1, 2)
        assert phase_aligned_distance(u, target) < 1e-12

    def test_pi_phases_on_control_one_subspace(self):
        # product of the four gates, evaluated on |11> and |10> by hand
        u = circuit_to_unitary(controlled_rz(np.pi, 0, 1))
        i11, i10 = 0b11, 0b01  # (wire1, wire0): target bit is wire 1
        np.testing.assert_allclose(u[i11, i11], np.exp(1j * np.pi / 2), atol=1e-12)
        np.testing.assert_allclose(u[i10, i10], np.exp(-1j * np.pi / 2), atol=1e-12)

    def test_equal_wires_rejected(self):
        with pytest.raises(ValueError):
            controlled_rz(1.0, 1, 1)


class TestControlledRx:
    def test_zero_angle_is_identity_up_to_phase(self):
        u = circuit_to_unitary(controlled_rx(0.0, 0, 1))
        assert phase_aligned_distance(u, np.eye(4)) < 1e-12

    @pytest.mark.parametrize("theta", [0.4, -2.2, np.pi, 7.7])
    def test_matches_controlled_rx_matrix(self, theta):
        u = circuit_to_unitary(controlled_rx(theta, 0, 1))
        target = controlled_matrix(rx_matrix(theta), 0, 1, 2)
        assert phase_aligned_distance(u, target) < 1e-12

    def test_pi_flips_target_with_minus_i(self):
        # explicit 4x4 product: |control=1, target=0> -> -i |1,1>
        u = circuit_to_unitary(controlled_rx(np.pi, 0, 1))
        target = controlled_matrix(rx_matrix(np.pi), 0, 1, 2)
        aligned = u * (target[0, 0] / u[0, 0])
        i_in, i_out = 0b01, 0b11
        np.testing.assert_allclose(aligned[i_out, i_in], -1j, atol=1e-12)


class TestPauliStringExp:
    def test_zz_parity_phase_on_odd_state(self):
        theta = 0.77
        circ = pauli_string_exp({0: "Z", 1: "Z"}, theta)
        st = apply_circuit(Statevector.basis(2, "01"), circ)
        np.testing.assert_allclose(st.amps[1], np.exp(1j * theta / 2), atol=1e-12)

    def test_three_letter_string_matches_exponential(self):
        theta = 1.3
        letters = {2: "Z", 1: "X", 0: "Y"}
        u = circuit_to_unitary(pauli_string_exp(letters, theta))
        target = string_exponential(letters, theta, 3)
        assert phase_aligned_distance(u, target) < 1e-10

    def test_cascade_styles_agree(self):
        letters = {2: "Z", 1: "X", 0: "Y"}
        ua = circuit_to_unitary(pauli_string_exp(letters, 0.9, cascade="linear"))
        ub = circuit_to_unitary(pauli_string_exp(letters, 0.9, cascade="fanin"))
        np.testing.assert_allclose(ua, ub, atol=1e-10)

    def test_controlled_version_controls_only_the_rotation(self):
        letters = {1: "X", 0: "Z"}
        theta = 0.6
        circ = pauli_string_exp(letters, theta, controlled_by=2)
        u = circuit_to_unitary(circ)
        dim = 4
        target = np.eye(8, dtype=complex)
        target[dim:, dim:] = string_exponential(letters, theta, 2)
        assert phase_aligned_distance(u, target) < 1e-10

    def test_four_pi_periodicity(self):
        letters = {1: "Y", 0: "Z"}
        ua = circuit_to_unitary(pauli_string_exp(letters, 0.37))
        ub = circuit_to_unitary(pauli_string_exp(letters, 0.37 + 4 * np.pi))
        assert phase_aligned_distance(ua, ub) < 1e-10

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            pauli_string_exp({}, 1.0)
        with pytest.raises(ValueError):
            pauli_string_exp({0: "Z"}, 1.0, parity_wire=1)
        with pytest.raises(ValueError):
            pauli_string_exp({0: "Q"}, 1.0)


def kickback_state(phi, R):
    """Product state with relative phase exp(i 2 pi 2^{k-1} phi) on bit k's wire."""
    amps = np.ones(1, dtype=complex)
    for k in range(1, R + 1):  # wire R-k from the top down
        q = np.array([1.0, np.exp(2j * np.pi * 2 ** (k - 1) * phi)]) / np.sqrt(2)
        amps = np.kron(amps, q)
    return Statevector(R, amps)


class TestInverseQftPermuted:
    def test_r1_is_single_hadamard(self):
        circ = inverse_qft_permuted(1)
        assert len(circ.ops) == 1 and circ.ops[0].kind == "h"

    def test_exact_fraction_reads_out_deterministically(self):
        st = apply_circuit(kickback_state(0.625, 3), inverse_qft_permuted(3))
        probs = st.probabilities()
        assert np.argmax(probs) == int("101", 2)
        np.testing.assert_allclose(probs.max(), 1.0, atol=1e-12)

    def test_generic_phase_matches_parent_distribution(self):
        from qpelab.qpe import analytic_pmf
        from qpelab.statevec import measure_subset

        st = apply_circuit(kickback_state(0.1, 3), inverse_qft_permuted(3))
        counts = measure_subset(st, [2, 1, 0], 10**6, substream(21))
        emp = np.zeros(8)
        for key, c in counts.items():
            emp[int(key, 2)] = c / 10**6
        assert 0.5 * np.abs(emp - analytic_pmf(0.1, 3).p).sum() < 0.005

    def test_composed_with_adjoint_is_identity(self):
        u = circuit_to_unitary(inverse_qft_permuted(4))
        np.testing.assert_allclose(u @ u.conj().T, np.eye(16), atol=1e-10)

    def test_matches_bit_reversed_fourier_matrix(self):
        R = 4
        n = 2**R
        u = circuit_to_unitary(inverse_qft_permuted(R))
        x = np.arange(n)
        y = np.zeros(n, dtype=int)
        for k in range(1, R + 1):
            y |= ((x >> (R - k)) & 1) << (k - 1)
        target = np.exp(-2j * np.pi * np.outer(np.arange(n), y) / n) / np.sqrt(n)
        assert phase_aligned_distance(u, target) < 1e-10

    def test_zero_register_rejected(self):
        with pytest.raises(ValueError):
            inverse_qft_permuted(0)


class TestCircuitToUnitary:
    def test_empty_circuit(self):
        np.testing.assert_allclose(circuit_to_unitary(Circuit(2)), np.eye(4))

    def test_cx_permutation(self):
        from qpelab.statevec import CX

        u = circuit_to_unitary(Circuit(2, [CX(0, 1)]))
        perm = np.zeros((4, 4))
        for i in range(4):
            j = i ^ (1 << 1) if i & 1 else i
            perm[j, i] = 1
        np.testing.assert_allclose(u, perm, atol=1e-15)

    def test_rejects_wide_circuits(self):
        with pytest.raises(ValueError):
            circuit_to_unitary(Circuit(11))


class TestCountGates:
    def test_controlled_rz_tally(self):
        counts = count_gates(controlled_rz(0.4, 0, 1))
        assert counts["total"] == 4 and counts["cx"] == 2

    def test_controlled_rx_tally(self):
        counts = count_gates(controlled_rx(0.4, 0, 1))
        assert counts["total"] == 5 and counts["cx"] == 2

    def test_ising_controlled_propagator_cx_count(self):
        circ = controlled_power_circuit(ising(0.33, 3.24, 1.17), 0.5, 1, "exact", 2)
        assert count_gates(circ)["cx"] == 8


def test_unitarity_of_all_constructors():
    for circ in (
        controlled_rz(0.9, 1, 0),
        controlled_rx(-1.2, 0, 2, n_qubits=3),
        pauli_string_exp({2: "X", 0: "Y"}, 0.5),
        inverse_qft_permuted(3),
    ):
        u = circuit_to_unitary(circ)
        assert np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) < 1e-12
