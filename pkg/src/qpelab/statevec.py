"""Dense statevector simulation of few-qubit circuits.

Wire convention used everywhere in this package: wire 0 is the least
significant bit of the amplitude index, so basis index ``i`` assigns bit
``(i >> w) & 1`` to wire ``w``.  A ket label written left-to-right, such as
``"01"``, therefore denotes index ``int("01", 2)`` with its leftmost
character on the *highest* wire.  Functions that render bitstrings state
their wire order explicitly.

Randomness is counter-based (Philox) and fully replayable: streams are
derived from ``(master seed, *path)`` so independent tasks can draw i.i.d.
samples without sharing generator state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Hard cap on register width; 2**14 amplitudes keeps everything sub-second.
MAX_QUBITS = 14

SQRT1_2 = 1.0 / np.sqrt(2.0)

_PARAM_ARITY = {"h": 0, "x": 0, "rx": 1, "ry": 1, "rz": 1, "u1": 1, "u2": 2, "u3": 3}


class ResourceLimitError(RuntimeError):
    """A request exceeded the simulator's qubit budget."""


def substream(seed: int, *path: int) -> np.random.Generator:
    """Deterministic Philox generator for the sub-stream ``(seed, *path)``.

    Identical arguments always produce identical streams, and distinct
    paths are statistically independent, which makes per-(tau, iteration)
    draws replayable under any execution order.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def as_rng(seed_or_rng) -> np.random.Generator:
    """Coerce an int seed (or None) to a Generator; pass Generators through."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    if seed_or_rng is None:
        return np.random.Generator(np.random.Philox())
    return substream(int(seed_or_rng))


@dataclass(frozen=True)
class GateOp:
    """One parameterized gate with target and (optional) control wires.

    ``kind`` is one of h, x, rx, ry, rz, u1, u2, u3; any kind becomes its
    controlled version by listing control wires (a CX is ``x`` with one
    control).  Controls gate the action on the all-ones subspace of the
    control wires.
    """

    kind: str
    params: tuple = ()
    targets: tuple = ()
    controls: tuple = ()

    def __post_init__(self):
        if self.kind not in _PARAM_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.params) != _PARAM_ARITY[self.kind]:
            raise ValueError(
                f"{self.kind} takes {_PARAM_ARITY[self.kind]} parameter(s), "
                f"got {len(self.params)}"
            )
        if len(self.targets) != 1:
            raise ValueError(f"{self.kind} acts on exactly one target wire")
        if set(self.targets) & set(self.controls):
            raise ValueError("control and target wires must be disjoint")

    @property
    def wires(self) -> tuple:
        return self.targets + self.controls

    def name(self) -> str:
        """Display name: controls are rendered as a 'c' prefix (x+control -> cx)."""
        return "c" * len(self.controls) + self.kind


# Readable constructors for the gate set.
def H(t: int) -> GateOp:
    return GateOp("h", (), (t,))


def X(t: int) -> GateOp:
    return GateOp("x", (), (t,))


def RX(theta: float, t: int) -> GateOp:
    return GateOp("rx", (theta,), (t,))


def RY(theta: float, t: int) -> GateOp:
    return GateOp("ry", (theta,), (t,))


def RZ(theta: float, t: int) -> GateOp:
    return GateOp("rz", (theta,), (t,))


def U1(lam: float, t: int) -> GateOp:
    return GateOp("u1", (lam,), (t,))


def U2(phi: float, lam: float, t: int) -> GateOp:
    return GateOp("u2", (phi, lam), (t,))


def U3(theta: float, phi: float, lam: float, t: int) -> GateOp:
    return GateOp("u3", (theta, phi, lam), (t,))


def CX(c: int, t: int) -> GateOp:
    return GateOp("x", (), (t,), (c,))


def CU1(lam: float, c: int, t: int) -> GateOp:
    return GateOp("u1", (lam,), (t,), (c,))


def gate_matrix(op: GateOp) -> np.ndarray:
    """2x2 matrix of the op's target action (controls handled by apply)."""
    k, p = op.kind, op.params
    if k == "h":
        return np.array([[1, 1], [1, -1]], dtype=complex) * SQRT1_2
    if k == "x":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if k == "rx":
        c, s = np.cos(p[0] / 2), np.sin(p[0] / 2)
        return np.array([[c, -1j * s], [-1j * s, c]])
    if k == "ry":
        c, s = np.cos(p[0] / 2), np.sin(p[0] / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if k == "rz":
        return np.array([[np.exp(-1j * p[0] / 2), 0], [0, np.exp(1j * p[0] / 2)]])
    if k == "u1":
        return np.array([[1, 0], [0, np.exp(1j * p[0])]])
    if k == "u2":
        phi, lam = p
        return SQRT1_2 * np.array(
            [[1, -np.exp(1j * lam)], [np.exp(1j * phi), np.exp(1j * (lam + phi))]]
        )
    if k == "u3":
        theta, phi, lam = p
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        return np.array(
            [[c, -np.exp(1j * lam) * s], [np.exp(1j * phi) * s, np.exp(1j * (lam + phi)) * c]]
        )
    raise ValueError(f"unknown gate kind {k!r}")


@dataclass
class Statevector:
    """Complex amplitudes over ``2**n_qubits`` basis states (wire 0 = LSB)."""

    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1 or self.n_qubits > MAX_QUBITS:
            raise ResourceLimitError(
                f"n_qubits={self.n_qubits} outside supported range 1..{MAX_QUBITS}"
            )
        self.amps = np.asarray(self.amps, dtype=complex)
        if self.amps.shape != (2**self.n_qubits,):
            raise ValueError("amplitude array length must be 2**n_qubits")

    @classmethod
    def zero(cls, n_qubits: int) -> "Statevector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis(cls, n_qubits: int, label) -> "Statevector":
        """Computational basis state from an int index or a ket label string.

        A label string reads left-to-right from the highest wire down, so
        ``basis(2, "01")`` puts amplitude 1 on index 1.
        """
        idx = int(label, 2) if isinstance(label, str) else int(label)
        if not 0 <= idx < 2**n_qubits:
            raise ValueError("basis index out of range")
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[idx] = 1.0
        return cls(n_qubits, amps)

    def copy(self) -> "Statevector":
        return Statevector(self.n_qubits, self.amps.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def fidelity(self, other: "Statevector") -> float:
        """|<self|other>|^2 (insensitive to global phase)."""
        return float(abs(np.vdot(self.amps, other.amps)) ** 2)


def inject_amplitudes(amps) -> Statevector:
    """Build a normalized Statevector from raw amplitudes.

    The vector length must be a power of two.  Norms within 1e-6 of unity
    are silently renormalized (they are treated as rounding residue);
    anything farther off is rejected rather than rescaled.
    """
    amps = np.asarray(amps, dtype=complex).reshape(-1)
    n = amps.shape[0]
    n_qubits = int(n).bit_length() - 1
    if n < 2 or 2**n_qubits != n:
        raise ValueError(f"amplitude count {n} is not a power of two >= 2")
    nrm = np.linalg.norm(amps)
    if nrm < 1e-12:
        raise ValueError("cannot normalize a (near-)zero amplitude vector")
    if abs(nrm - 1.0) >= 1e-6:
        raise ValueError(f"amplitude norm {nrm:.6g} deviates from 1 by more than 1e-6")
    return Statevector(n_qubits, amps / nrm)


def _check_wires(op: GateOp, n_qubits: int) -> None:
    for w in op.wires:
        if not 0 <= w < n_qubits:
            raise ValueError(f"wire {w} out of range for {n_qubits} qubits")


def _masked_pair_indices(n_qubits: int, target: int, controls: tuple) -> tuple:
    """Index arrays (i0, i1) of the target-0/target-1 pairs with all controls set."""
    half = np.arange(2 ** (n_qubits - 1))
    i0 = ((half >> target) << (target + 1)) | (half & ((1 << target) - 1))
    for c in controls:
        i0 = i0[(i0 >> c) & 1 == 1]
    return i0, i0 | (1 << target)


def apply(state: Statevector, op: GateOp) -> Statevector:
    """Apply one gate and return the transformed state (input untouched)."""
    _check_wires(op, state.n_qubits)
    m = gate_matrix(op)
    i0, i1 = _masked_pair_indices(state.n_qubits, op.targets[0], op.controls)
    out = state.amps.copy()
    a0, a1 = state.amps[i0], state.amps[i1]
    out[i0] = m[0, 0] * a0 + m[0, 1] * a1
    out[i1] = m[1, 0] * a0 + m[1, 1] * a1
    return Statevector(state.n_qubits, out)


@dataclass
class Circuit:
    """Ordered list of GateOps on a fixed-width register."""

    n_qubits: int
    ops: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for op in self.ops:
            _check_wires(op, self.n_qubits)

    def add(self, op: GateOp) -> "Circuit":
        _check_wires(op, self.n_qubits)
        self.ops.append(op)
        return self

    def extend(self, other: "Circuit") -> "Circuit":
        if other.n_qubits > self.n_qubits:
            raise ValueError("cannot extend with a wider circuit")
        for op in other.ops:
            self.add(op)
        return self

    def __len__(self) -> int:
        return len(self.ops)


def apply_circuit(state: Statevector, circuit: Circuit) -> Statevector:
    if circuit.n_qubits > state.n_qubits:
        raise ValueError("circuit wider than state")
    for op in circuit.ops:
        state = apply(state, op)
    return state


def marginal_probabilities(state: Statevector, wires) -> np.ndarray:
    """Born probabilities over the listed wires, leftmost wire = MSB.

    Entry ``v`` is the probability of reading the bitstring whose first
    character (wire ``wires[0]``) is the most significant bit of ``v``.
    """
    wires = list(wires)
    if not wires:
        raise ValueError("empty wire list")
    _check = [w for w in wires if not 0 <= w < state.n_qubits]
    if _check or len(set(wires)) != len(wires):
        raise ValueError(f"invalid wire list {wires}")
    probs = state.probabilities()
    idx = np.arange(probs.shape[0])
    key = np.zeros_like(idx)
    m = len(wires)
    for j, w in enumerate(wires):
        key |= ((idx >> w) & 1) << (m - 1 - j)
    out = np.zeros(2**m)
    np.add.at(out, key, probs)
    return out


def measure_subset(state: Statevector, wires, shots: int, rng) -> dict:
    """Histogram of ``shots`` draws from the marginal distribution of ``wires``.

    Sampling is done from the final amplitude vector (the state is not
    mutated); identical (state, wires, shots, rng stream) always produce
    the identical histogram.  Keys render wires in the given order,
    leftmost first.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = as_rng(rng)
    probs = marginal_probabilities(state, wires)
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum()
    counts = rng.multinomial(shots, probs)
    m = len(list(wires))
    return {format(v, f"0{m}b"): int(c) for v, c in enumerate(counts) if c > 0}


def measure_and_collapse(state: Statevector, wire: int, rng) -> tuple:
    """Sample one bit on ``wire`` and return (bit, renormalized post state)."""
    if not 0 <= wire < state.n_qubits:
        raise ValueError(f"wire {wire} out of range")
    rng = as_rng(rng)
    idx = np.arange(state.amps.shape[0])
    sel1 = (idx >> wire) & 1 == 1
    p1 = float(np.sum(np.abs(state.amps[sel1]) ** 2))
    bit = 1 if rng.random() < p1 else 0
    keep = sel1 if bit == 1 else ~sel1
    out = np.zeros_like(state.amps)
    out[keep] = state.amps[keep]
    nrm = np.linalg.norm(out)
    if nrm < 1e-150:
        raise ValueError("measurement collapsed onto a zero-probability branch")
    return bit, Statevector(state.n_qubits, out / nrm)
