"""Model Hamiltonians, exact spectra, and (Trotterized) propagator circuits.

Hamiltonians are weighted sums of Pauli strings in dimensionless units
(hbar = 1).  Letters in a term string read left-to-right from the highest
wire down, matching ket labels: in a 2-qubit system "ZI" acts with Z on
wire 1.  Constant (identity) terms are never simulated as gates; they are
carried as an energy shift in circuit metadata, so eigenvalues extracted
from a circuit's phases refer to the shifted Hamiltonian.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import circuits
from .statevec import RX, RY, RZ, CX, Circuit, Statevector, apply_circuit

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliTermSum:
    """Hermitian operator as real-weighted Pauli strings."""

    n_qubits: int
    terms: tuple

    def __post_init__(self):
        if not self.terms:
            raise ValueError("need at least one term")
        for coeff, letters in self.terms:
            if not np.isfinite(coeff):
                raise ValueError("coefficients must be finite")
            if len(letters) != self.n_qubits or any(ch not in _PAULI for ch in letters):
                raise ValueError(f"bad Pauli string {letters!r}")

    def term_wires(self, letters: str) -> dict:
        """Map wire -> letter for the non-identity positions of one string."""
        n = self.n_qubits
        return {n - 1 - j: ch for j, ch in enumerate(letters) if ch != "I"}

    def term_matrix(self, letters: str) -> np.ndarray:
        m = np.array([[1.0 + 0j]])
        for ch in letters:
            m = np.kron(m, _PAULI[ch])
        return m

    def to_matrix(self) -> np.ndarray:
        dim = 2**self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for coeff, letters in self.terms:
            out += coeff * self.term_matrix(letters)
        return out

    def constant_shift(self) -> float:
        """Sum of identity-term coefficients (dropped from circuits)."""
        return float(sum(c for c, s in self.terms if set(s) == {"I"}))

    def nontrivial_terms(self) -> list:
        return [i for i, (_, s) in enumerate(self.terms) if set(s) != {"I"}]

    def spectral_bound(self) -> float:
        """Upper bound on |eigenvalue| of the shifted (constant-free) operator."""
        return float(sum(abs(c) for c, s in self.terms if set(s) != {"I"}))


def zeeman(omega: float) -> PauliTermSum:
    """Two-level system omega * Z; energy levels are -omega and +omega."""
    return PauliTermSum(1, ((float(omega), "Z"),))


def ising(w1: float, w2: float, wj: float) -> PauliTermSum:
    """Two-spin Ising dimer w1*Z1 + w2*Z2 + wj*Z1*Z2 (qubit 1 on wire 1).

    Eigenstates are the computational basis states; the level of |q1 q2>
    is s1*w1 + s2*w2 + s1*s2*wj with s = +1 for bit 0 and -1 for bit 1.
    """
    return PauliTermSum(2, ((float(w1), "ZI"), (float(w2), "IZ"), (float(wj), "ZZ")))


def hubbard_compact(t: float, u: float) -> PauliTermSum:
    """Half-filled 2-site Hubbard dimer in its compact 2-qubit encoding.

    -t*(X1 + X2) + (u/2)*Z1*Z2 + (u/2)*1.  The identity term keeps the
    spectrum equal to the fermionic model's s_z = 0 sector; circuits drop
    it and record the shift u/2 in metadata.
    """
    t, u = float(t), float(u)
    return PauliTermSum(2, ((-t, "XI"), (-t, "IX"), (u / 2, "ZZ"), (u / 2, "II")))


def hubbard_jw(t: float, u: float) -> PauliTermSum:
    """Jordan-Wigner form of the 2-site Hubbard dimer on 4 qubits.

    Qubits 1..4 (wires 3..0) carry the a-up, b-up, a-down, b-down orbital
    occupations.  The interaction part is (u/4)*(2 + Z3Z1 + Z4Z2 - sum Z_i)
    and the hopping part -(t/2)*(X2X1 + Y2Y1 + X4X3 + Y4Y3).
    """
    t, u = float(t), float(u)
    q = u / 4
    return PauliTermSum(
        4,
        (
            (2 * q, "IIII"),
            (q, "ZIZI"),
            (q, "IZIZ"),
            (-q, "ZIII"),
            (-q, "IZII"),
            (-q, "IIZI"),
            (-q, "IIIZ"),
            (-t / 2, "XXII"),
            (-t / 2, "YYII"),
            (-t / 2, "IIXX"),
            (-t / 2, "IIYY"),
        ),
    )


def hubbard_sz0_indices() -> list:
    """Basis indices of the s_z = 0 half-filling sector of the 4-qubit form.

    Ordered to match the compact encoding's |00>, |01>, |10>, |11>.
    """
    return [int(s, 2) for s in ("1010", "0110", "1001", "0101")]


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]


def exact_eigensystem(h: PauliTermSum) -> EigenSystem:
    """Full dense diagonalization (brute-force oracle, n <= 10)."""
    if h.n_qubits > 10:
        raise ValueError("exact_eigensystem supports at most 10 qubits")
    vals, vecs = np.linalg.eigh(h.to_matrix())
    return EigenSystem(vals, vecs)


def exact_propagator(h: PauliTermSum, tau: float) -> np.ndarray:
    """exp(-i H tau) via eigendecomposition; includes any constant term."""
    if h.n_qubits > 10:
        raise ValueError("exact_propagator supports at most 10 qubits")
    vals, vecs = np.linalg.eigh(h.to_matrix())
    return (vecs * np.exp(-1j * vals * tau)) @ vecs.conj().T


def _herm_expm(mat: np.ndarray, tau: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    return (vecs * np.exp(-1j * vals * tau)) @ vecs.conj().T


def _strings_commute(a: str, b: str) -> bool:
    clashes = sum(1 for x, y in zip(a, b) if x != "I" and y != "I" and x != y)
    return clashes % 2 == 0


def all_terms_commute(h: PauliTermSum) -> bool:
    strings = [s for _, s in h.terms]
    return all(
        _strings_commute(strings[i], strings[j])
        for i in range(len(strings))
        for j in range(i + 1, len(strings))
    )


@dataclass(frozen=True)
class TrotterPlan:
    """Product-formula plan: order (1 or 2), step count n, and a term split.

    ``group_a`` / ``group_b`` index into the Hamiltonian's terms; each
    group must be internally commuting (identity terms belong to neither).
    The first-order step is exp(A d) exp(B d); the second-order step is the
    symmetric split with group A on the outside.
    """

    order: int
    n: int
    group_a: tuple
    group_b: tuple

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if self.n < 1:
            raise ValueError("Trotter number n must be >= 1")
        if set(self.group_a) & set(self.group_b):
            raise ValueError("groups must be disjoint")

    @classmethod
    def split_commuting(cls, h: PauliTermSum, order: int = 1, n: int = 1) -> "TrotterPlan":
        """Default grouping: X/Y-bearing terms vs pure-Z terms."""
        ga, gb = [], []
        for i in h.nontrivial_terms():
            letters = h.terms[i][1]
            (ga if ("X" in letters or "Y" in letters) else gb).append(i)
        return cls(order, n, tuple(ga), tuple(gb))

    def validate(self, h: PauliTermSum, tol: float = 1e-12) -> None:
        """Check the split covers all non-identity terms and groups commute."""
        covered = set(self.group_a) | set(self.group_b)
        if covered != set(h.nontrivial_terms()):
            raise ValueError("plan must cover every non-identity term exactly once")
        for group in (self.group_a, self.group_b):
            mats = [h.terms[i][0] * h.term_matrix(h.terms[i][1]) for i in group]
            for i in range(len(mats)):
                for j in range(i + 1, len(mats)):
                    comm = mats[i] @ mats[j] - mats[j] @ mats[i]
                    if np.max(np.abs(comm)) > tol:
                        raise ValueError("terms within a group must commute")

    def group_matrix(self, h: PauliTermSum, group: tuple) -> np.ndarray:
        dim = 2**h.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for i in group:
            coeff, letters = h.terms[i]
            out += coeff * h.term_matrix(letters)
        return out


def _term_circuit(h, idx, theta, control, n_qubits) -> Circuit:
    """Gate block for exp(-i theta P/2) of one term, controlled if requested.

    Single-wire Z and X terms use the dedicated two-CX decompositions of
    the controlled rotations; everything else goes through the generic
    parity-cascade construction.
    """
    wires = h.term_wires(h.terms[idx][1])
    if len(wires) == 1:
        (w, letter), = wires.items()
        if letter == "Z":
            if control is None:
                return Circuit(n_qubits, [RZ(theta, w)])
            return circuits.controlled_rz(theta, control, w, n_qubits)
        if letter == "X":
            if control is None:
                return Circuit(n_qubits, [RX(theta, w)])
            return circuits.controlled_rx(theta, control, w, n_qubits)
    return circuits.pauli_string_exp(
        wires, theta, controlled_by=control, n_qubits=n_qubits
    )


def controlled_power_circuit(
    h: PauliTermSum,
    tau: float,
    k: int,
    plan,
    control,
    n_qubits=None,
) -> Circuit:
    """Circuit for the controlled 2**(k-1) power of the propagator.

    ``plan="exact"`` is only legal for mutually commuting Hamiltonians and
    absorbs the power into the rotation angles (theta scaled by 2**(k-1)).
    With a TrotterPlan, the power is absorbed as tau' = tau * 2**(k-1)
    together with n' = n * 2**(k-1), which keeps the per-step angles fixed
    and the approximation error growing only linearly with the exponent.
    Pass ``control=None`` for the uncontrolled propagator.

    The returned circuit's ``meta`` records the dropped constant term
    ("energy_shift"): phases extracted from it estimate eigenvalues of the
    shifted Hamiltonian.
    """
    if k < 1:
        raise ValueError("power exponent k must be >= 1")
    top = h.n_qubits - 1 if control is None else max(h.n_qubits - 1, control)
    if n_qubits is None:
        n_qubits = top + 1
    elif n_qubits < top + 1:
        raise ValueError("n_qubits too small")
    if control is not None and control < h.n_qubits:
        raise ValueError("control wire must lie outside the simulation register")

    circ = Circuit(n_qubits)
    circ.meta["energy_shift"] = h.constant_shift()
    circ.meta["exponent"] = k

    if isinstance(plan, str):
        if plan != "exact":
            raise ValueError(f"unknown plan {plan!r}")
        if not all_terms_commute(h):
            raise ValueError("exact plan requires mutually commuting terms")
        tau_eff = tau * 2 ** (k - 1)
        for i in h.nontrivial_terms():
            coeff = h.terms[i][0]
            circ.extend(_term_circuit(h, i, 2.0 * coeff * tau_eff, control, n_qubits))
        return circ

    plan.validate(h)
    delta = tau / plan.n
    n_steps = plan.n * 2 ** (k - 1)

    def emit(group, dt):
        for i in group:
            coeff = h.terms[i][0]
            circ.extend(_term_circuit(h, i, 2.0 * coeff * dt, control, n_qubits))

    if plan.order == 1:
        # step exp(A d) exp(B d): B acts first in circuit order
        for _ in range(n_steps):
            emit(plan.group_b, delta)
            emit(plan.group_a, delta)
    else:
        # symmetric split with half-steps of A first and last
        emit(plan.group_a, delta / 2)
        for _ in range(n_steps - 1):
            emit(plan.group_b, delta)
            emit(plan.group_a, delta)
        emit(plan.group_b, delta)
        emit(plan.group_a, delta / 2)
    return circ


def trotterized_propagator(h: PauliTermSum, tau: float, plan: TrotterPlan) -> np.ndarray:
    """Dense matrix of the plan's product formula at time tau (constant dropped)."""
    plan.validate(h)
    ha = plan.group_matrix(h, plan.group_a)
    hb = plan.group_matrix(h, plan.group_b)
    delta = tau / plan.n
    if plan.order == 1:
        step = _herm_expm(ha, delta) @ _herm_expm(hb, delta)
        return np.linalg.matrix_power(step, plan.n)
    ea2 = _herm_expm(ha, delta / 2)
    eb = _herm_expm(hb, delta)
    inner = np.linalg.matrix_power(eb @ _herm_expm(ha, delta), plan.n - 1)
    return ea2 @ inner @ eb @ ea2


def trotter_error_norm(h: PauliTermSum, tau: float, plan: TrotterPlan) -> float:
    """Spectral norm of (product-formula propagator - exact propagator)."""
    ha = plan.group_matrix(h, plan.group_a)
    hb = plan.group_matrix(h, plan.group_b)
    exact = _herm_expm(ha + hb, tau)
    return float(np.linalg.norm(trotterized_propagator(h, tau, plan) - exact, 2))


def hubbard_groundstate_amplitudes(t: float, u: float) -> np.ndarray:
    """Exact ground-state amplitudes (a, ab, ab, a) of the compact dimer.

    a = ((u + r)^2 / (8 t^2) + 2)^(-1/2) and b = (u + r) / (4 t) with
    r = sqrt(16 t^2 + u^2); requires t > 0.
    """
    if t <= 0:
        raise ValueError("t must be positive (t = 0 has a degenerate ground space)")
    r = np.sqrt(16 * t**2 + u**2)
    beta = (u + r) / (4 * t)
    alpha = ((u + r) ** 2 / (8 * t**2) + 2) ** -0.5
    return np.array([alpha, alpha * beta, alpha * beta, alpha])


def _hubbard_excited_partner(t: float, u: float) -> np.ndarray:
    """The symmetric-sector state orthogonal to the ground state."""
    r = np.sqrt(16 * t**2 + u**2)
    beta = (u - r) / (4 * t)
    alpha = ((u - r) ** 2 / (8 * t**2) + 2) ** -0.5
    return np.array([alpha, alpha * beta, alpha * beta, alpha])


def _hubbard_init_ops(theta: float) -> list:
    # wires: qubit 1 -> wire 1, qubit 2 -> wire 0
    return [
        RY(np.pi / 2, 0),
        CX(0, 1),
        RY(theta, 1),
        CX(0, 1),
        RY(np.pi / 2, 1),
    ]


def _hubbard_init_state(theta: float) -> np.ndarray:
    circ = Circuit(2, _hubbard_init_ops(theta))
    return apply_circuit(Statevector.zero(2), circ).amps


def hubbard_groundstate_angle(t: float, u: float) -> float:
    """Rotation angle that makes the initialization circuit emit the ground state.

    Found by bracketed root finding on the overlap with the orthogonal
    excited partner state; the result reproduces the exact amplitudes to
    better than 1e-10 in fidelity.
    """
    if t <= 0:
        raise ValueError("t must be positive (t = 0 has a degenerate ground space)")
    partner = _hubbard_excited_partner(t, u)

    def overlap(theta):
        return float(np.real(partner @ _hubbard_init_state(theta)))

    grid = np.linspace(-np.pi, np.pi, 181)
    vals = [overlap(x) for x in grid]
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            return float(grid[i])
        if vals[i] * vals[i + 1] < 0:
            theta = brentq(overlap, grid[i], grid[i + 1], xtol=1e-13)
            target = hubbard_groundstate_amplitudes(t, u)
            fid = abs(target @ _hubbard_init_state(theta)) ** 2
            if fid > 1 - 1e-10:
                return float(theta)
    raise RuntimeError("no initialization angle found")


def groundstate_circuit_hubbard(t: float, u: float) -> Circuit:
    """Two-qubit initialization circuit |00> -> ground state of the dimer.

    Layout: Ry(pi/2) on qubit 2, CX(2 -> 1), Ry(theta*) on qubit 1,
    CX(2 -> 1), Ry(pi/2) on qubit 1, with theta* solved numerically.
    """
    theta = hubbard_groundstate_angle(t, u)
    circ = Circuit(2, _hubbard_init_ops(theta))
    circ.meta["theta_star"] = theta
    return circ
