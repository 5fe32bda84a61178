import numpy as np
import pytest

from qpelab.qpe import IterationRecord, LpmfTree
from qpelab.statevec import CU1, H, U1, Circuit, GateOp, substream

GATE_POOL = [
    ("h", 0),
    ("x", 0),
    ("rx", 1),
    ("ry", 1),
    ("rz", 1),
    ("u1", 1),
    ("u2", 2),
    ("u3", 3),
]


def random_circuit(rng, n_qubits, n_ops, p_control=0.3):
    """Random mix of plain and singly-controlled gates for oracle tests."""
    circ = Circuit(n_qubits)
    for _ in range(n_ops):
        kind, arity = GATE_POOL[rng.integers(len(GATE_POOL))]
        params = tuple(rng.uniform(-2 * np.pi, 2 * np.pi, size=arity))
        target = int(rng.integers(n_qubits))
        controls = ()
        if n_qubits > 1 and rng.random() < p_control:
            c = int(rng.integers(n_qubits - 1))
            controls = (c if c < target else c + 1,)
        circ.add(GateOp(kind, params, (target,), controls))
    return circ


def diag_kickback_circuit(phases, R):
    """Phase-estimation circuit for a 1-qubit diagonal unitary.

    The simulated unitary multiplies |0> by exp(i*2*pi*phases[0]) and |1>
    by exp(i*2*pi*phases[1]); built from u1 gates so the kickback is exact.
    Wire 0 is the simulation qubit, wires 1..R the phase register.
    """
    from qpelab.circuits import inverse_qft_permuted

    phi0, phi1 = phases
    circ = Circuit(R + 1)
    for w in range(1, R + 1):
        circ.add(H(w))
    for k in range(1, R + 1):
        control = 1 + R - k
        a = 2 * np.pi * 2 ** (k - 1) * phi0
        b = 2 * np.pi * 2 ** (k - 1) * phi1
        circ.add(U1(a, control))
        circ.add(CU1(b - a, control, 0))
    circ.extend(inverse_qft_permuted(R, wires=list(range(R, 0, -1))))
    return circ


def random_lpmf_tree(rng, R):
    """Valid random iteration tree: majority frequencies in [0.5, 1]."""
    levels = []
    for k in range(R, 0, -1):
        f_major = rng.uniform(0.5, 1.0)
        bit = int(rng.integers(2))
        f0 = f_major if bit == 0 else 1.0 - f_major
        levels.append(IterationRecord(k, f0, 1.0 - f0, bit))
    return LpmfTree(R, tuple(levels))


@pytest.fixture
def rng():
    return substream(987654321)
