"""Circuit fragment constructors and brute-force verification oracles.

Every constructor here targets a specific matrix identity: its unitary
equals the intended operator up to one global phase (most are exact, with
no phase slack at all).  ``circuit_to_unitary`` plus
``phase_aligned_distance`` are the oracles used to verify that claim.
"""
from __future__ import annotations

import numpy as np

from .statevec import CX, H, RX, RZ, U1, U3, CU1, Circuit, GateOp, _masked_pair_indices, gate_matrix


def _width(n_qubits, *wires) -> int:
    need = max(wires) + 1
    if n_qubits is None:
        return need
    if n_qubits < need:
        raise ValueError("n_qubits too small for the requested wires")
    return n_qubits


def controlled_rz(theta: float, control: int, target: int, n_qubits=None) -> Circuit:
    """Controlled z-rotation as Rz(theta/2) . CX . Rz(-theta/2) . CX.

    The four-gate form equals the controlled-Rz matrix exactly (the two
    half-angle rotations cancel on the control-0 subspace).
    """
    if control == target:
        raise ValueError("control and target must differ")
    c = Circuit(_width(n_qubits, control, target))
    c.add(RZ(theta / 2, target))
    c.add(CX(control, target))
    c.add(RZ(-theta / 2, target))
    c.add(CX(control, target))
    return c


def controlled_rx(theta: float, control: int, target: int, n_qubits=None) -> Circuit:
    """Controlled x-rotation in the u1/u2/u3 + CX gate set.

    Five gates: U1(pi/2), CX, U3(-theta/2,0,0), CX, U3(theta/2,-pi/2,0) on
    the target.  The single-qubit chain collapses to the identity when the
    control is 0 and to Rx(theta) when it is 1, with no residual phase.
    """
    if control == target:
        raise ValueError("control and target must differ")
    c = Circuit(_width(n_qubits, control, target))
    c.add(U1(np.pi / 2, target))
    c.add(CX(control, target))
    c.add(U3(-theta / 2, 0.0, 0.0, target))
    c.add(CX(control, target))
    c.add(U3(theta / 2, -np.pi / 2, 0.0, target))
    return c


_BASIS_IN = {"X": lambda w: H(w), "Y": lambda w: RX(np.pi / 2, w)}
_BASIS_OUT = {"X": lambda w: H(w), "Y": lambda w: RX(-np.pi / 2, w)}


def pauli_string_exp(
    pauli,
    theta: float,
    parity_wire=None,
    controlled_by=None,
    cascade: str = "linear",
    n_qubits=None,
) -> Circuit:
    """Circuit for exp(-i * theta * P / 2) for a Pauli string P.

    ``pauli`` maps wire -> letter in {X, Y, Z}.  X/Y wires are rotated into
    the z-basis, a CX cascade folds the string parity onto ``parity_wire``
    (default: the lowest wire of the string), a single Rz(theta) applies
    the phase, and the cascade and basis changes are undone.  When
    ``controlled_by`` is given only the z-rotation is controlled; the
    paired cascades reduce to the identity on the control-0 subspace.

    ``cascade`` selects how parity is accumulated: "linear" chains CX
    gates from wire to wire, "fanin" targets the parity wire directly.
    Both orderings produce identical unitaries.
    """
    pauli = dict(pauli)
    if not pauli:
        raise ValueError("pauli string must act on at least one wire")
    for w, letter in pauli.items():
        if letter not in ("X", "Y", "Z"):
            raise ValueError(f"bad Pauli letter {letter!r} on wire {w}")
    wires = sorted(pauli)
    if parity_wire is None:
        parity_wire = wires[0]
    if parity_wire not in pauli:
        raise ValueError("parity wire must carry one of the string's letters")
    if cascade not in ("linear", "fanin"):
        raise ValueError(f"unknown cascade style {cascade!r}")

    top = max(wires) if controlled_by is None else max(max(wires), controlled_by)
    circ = Circuit(_width(n_qubits, top))

    for w in sorted(pauli, reverse=True):
        if pauli[w] in _BASIS_IN:
            circ.add(_BASIS_IN[pauli[w]](w))

    others = sorted((w for w in wires if w != parity_wire), reverse=True)
    if cascade == "linear":
        chain = others + [parity_wire]
        down = [CX(chain[i], chain[i + 1]) for i in range(len(chain) - 1)]
    else:
        down = [CX(w, parity_wire) for w in others]
    for op in down:
        circ.add(op)

    if controlled_by is None:
        circ.add(RZ(theta, parity_wire))
    else:
        circ.extend(controlled_rz(theta, controlled_by, parity_wire, circ.n_qubits))

    for op in reversed(down):
        circ.add(op)

    for w in sorted(pauli):
        if pauli[w] in _BASIS_OUT:
            circ.add(_BASIS_OUT[pauli[w]](w))
    return circ


def inverse_qft_permuted(R: int, wires=None, n_qubits=None) -> Circuit:
    """Permuted inverse quantum Fourier transform on R qubits.

    ``wires[k-1]`` is the wire holding readout bit ``b_k`` (b_1 is the most
    significant); the default assignment is wires R-1 .. 0.  Applied to the
    kickback product state with each wire ``wires[k-1]`` carrying relative
    phase exp(i*2*pi*2**(k-1)*phi), an exact R-bit fraction phi is read out
    deterministically as b_1..b_R.  The permuted form interleaves the
    Hadamards with negative controlled phase rotations (-pi/2, -pi/4, ...)
    so no terminal swaps are needed.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if wires is None:
        wires = list(range(R - 1, -1, -1))
    wires = list(wires)
    if len(wires) != R or len(set(wires)) != R:
        raise ValueError("wires must list R distinct wires")
    circ = Circuit(_width(n_qubits, *wires))
    for k in range(R, 0, -1):
        for l in range(R, k, -1):
            circ.add(CU1(-np.pi / 2 ** (l - k), wires[l - 1], wires[k - 1]))
        circ.add(H(wires[k - 1]))
    return circ


def _apply_to_columns(mat: np.ndarray, op: GateOp, n_qubits: int) -> np.ndarray:
    m = gate_matrix(op)
    i0, i1 = _masked_pair_indices(n_qubits, op.targets[0], op.controls)
    out = mat.copy()
    a0, a1 = mat[i0, :], mat[i1, :]
    out[i0, :] = m[0, 0] * a0 + m[0, 1] * a1
    out[i1, :] = m[1, 0] * a0 + m[1, 1] * a1
    return out


def circuit_to_unitary(circuit: Circuit) -> np.ndarray:
    """Dense 2^n x 2^n matrix of the circuit (brute-force oracle, n <= 10)."""
    if circuit.n_qubits > 10:
        raise ValueError("circuit_to_unitary supports at most 10 qubits")
    u = np.eye(2**circuit.n_qubits, dtype=complex)
    for op in circuit.ops:
        u = _apply_to_columns(u, op, circuit.n_qubits)
    return u


def count_gates(circuit: Circuit) -> dict:
    """Exact gate tally: {"total", "cx", "by_kind"} for our own decompositions."""
    by_kind: dict = {}
    for op in circuit.ops:
        name = op.name()
        by_kind[name] = by_kind.get(name, 0) + 1
    return {"total": len(circuit.ops), "cx": by_kind.get("cx", 0), "by_kind": by_kind}


def phase_aligned_distance(u: np.ndarray, v: np.ndarray) -> float:
    """max |e^{i a} u - v| over entries, with the phase fixed on v's largest entry."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError("shape mismatch")
    i = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(u[i]) < 1e-300:
        return float(np.max(np.abs(u - v)))
    lam = v[i] / u[i]
    lam = lam / abs(lam)
    return float(np.max(np.abs(lam * u - v)))
