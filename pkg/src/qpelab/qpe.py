"""Phase estimation experiments on the statevector simulator.

Phase convention: a propagator eigenvalue eps maps to the readout phase
phi(tau) = (-eps * tau / (2*pi)) mod 1.  Readout strings b_1..b_R encode
the binary fraction 0.b_1b_2...b_R with b_1 the most significant bit, so
string s stands for the phase int(s, 2) / 2**R.

Three execution modes are provided: the full QFT-based estimator over an
R-qubit phase register, and the single-ancilla iterative estimator in its
exhaustive (all bit-tree branches probed) and non-exhaustive (majority
branch only) forms.  All sampling is reproducible through counter-based
RNG sub-streams.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import inverse_qft_permuted
from .models import PauliTermSum, controlled_power_circuit, exact_eigensystem
from .statevec import (
    MAX_QUBITS,
    H,
    RZ,
    Circuit,
    ResourceLimitError,
    Statevector,
    apply,
    apply_circuit,
    as_rng,
    inject_amplitudes,
    marginal_probabilities,
    measure_subset,
)


@dataclass
class ParentDistribution:
    """Exact PMF over the 2**R readout strings."""

    R: int
    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.R < 1 or self.p.shape != (2**self.R,):
            raise ValueError("probability vector must have length 2**R")
        if np.any(self.p < -1e-12) or abs(self.p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")

    @property
    def probs(self) -> dict:
        return {format(v, f"0{self.R}b"): float(q) for v, q in enumerate(self.p)}

    def grid(self) -> np.ndarray:
        """Phase value of every readout string."""
        return np.arange(2**self.R) / 2**self.R


@dataclass
class PhaseSample:
    """Empirical histogram over R-bit readout strings."""

    R: int
    counts: dict

    def __post_init__(self):
        for key, c in self.counts.items():
            if len(key) != self.R or set(key) - {"0", "1"}:
                raise ValueError(f"bad readout key {key!r}")
            if c < 0:
                raise ValueError("negative count")

    @property
    def O(self) -> int:
        return int(sum(self.counts.values()))

    def to_array(self) -> np.ndarray:
        out = np.zeros(2**self.R)
        for key, c in self.counts.items():
            out[int(key, 2)] = c
        return out

    def to_distribution(self) -> ParentDistribution:
        total = self.O
        if total == 0:
            raise ValueError("empty sample")
        return ParentDistribution(self.R, self.to_array() / total)


def analytic_pmf(phi: float, R: int) -> ParentDistribution:
    """Exact readout PMF of an eigenstate input with phase phi.

    A phase on the R-bit grid gives a point mass; otherwise the squared
    Dirichlet kernel sin^2(2^R pi d) / (2^{2R} sin^2(pi d)) evaluated at
    the offsets d = phi - 0.b_1..b_R.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    n = 2**R
    phi = float(phi) % 1.0
    scaled = phi * n
    if scaled == np.floor(scaled):
        p = np.zeros(n)
        p[int(scaled) % n] = 1.0
        return ParentDistribution(R, p)
    d = phi - np.arange(n) / n
    p = (np.sin(n * np.pi * d) / (n * np.sin(np.pi * d))) ** 2
    return ParentDistribution(R, p)


def superposition_pmf(coeffs, phases, R: int) -> ParentDistribution:
    """Readout PMF of a superposed input: the |c_n|^2 mixture of parent PMFs."""
    coeffs = np.asarray(coeffs, dtype=complex)
    weights = np.abs(coeffs) ** 2
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("coefficients must be normalized (sum |c|^2 = 1)")
    if len(weights) != len(list(phases)):
        raise ValueError("need one phase per coefficient")
    p = np.zeros(2**R)
    for w, phi in zip(weights, phases):
        p += w * analytic_pmf(phi, R).p
    return ParentDistribution(R, p)


def phase_from_energy(eps: float, tau: float) -> float:
    """Readout phase of an eigenvalue: (-eps * tau / (2*pi)) mod 1."""
    phi = float((-eps * tau / (2 * np.pi)) % 1.0)
    return 0.0 if phi >= 1.0 else phi


def resource_count(R: int) -> int:
    """Total controlled propagator applications per observation: 2**R - 1."""
    if R < 1:
        raise ValueError("R must be >= 1")
    return 2**R - 1


def resolve_initial_state(h: PauliTermSum, spec) -> Statevector:
    """Turn a config-style initial state into a Statevector.

    Accepts a Statevector, a ket label string, the string "ground" (exact
    lowest eigenvector), or a raw amplitude sequence.
    """
    if isinstance(spec, Statevector):
        if spec.n_qubits != h.n_qubits:
            raise ValueError("initial state width does not match the model")
        return spec
    if isinstance(spec, str):
        if spec == "ground":
            return inject_amplitudes(exact_eigensystem(h).ground_state())
        return Statevector.basis(h.n_qubits, spec)
    return inject_amplitudes(np.asarray(spec, dtype=complex))


def _embed(state: Statevector, n_total: int) -> Statevector:
    """Place a simulation-register state under |0...0> ancilla/phase wires."""
    amps = np.zeros(2**n_total, dtype=complex)
    amps[: state.amps.shape[0]] = state.amps
    return Statevector(n_total, amps)


def pea_circuit(h: PauliTermSum, tau: float, R: int, plan) -> Circuit:
    """Full phase-estimation circuit (state preparation excluded).

    Simulation register on wires 0..n-1; phase register above it with
    readout bit b_k on wire n + R - k.  Layers: Hadamards, the controlled
    2**(k-1) propagator powers, then the permuted inverse QFT.
    """
    n_sim = h.n_qubits
    n_total = n_sim + R
    if n_total > MAX_QUBITS:
        raise ResourceLimitError(
            f"{n_total} qubits requested, cap is {MAX_QUBITS}"
        )
    circ = Circuit(n_total)
    for w in range(n_sim, n_total):
        circ.add(H(w))
    for k in range(1, R + 1):
        control = n_sim + R - k
        circ.extend(controlled_power_circuit(h, tau, k, plan, control, n_total))
    circ.extend(inverse_qft_permuted(R, wires=list(range(n_total - 1, n_sim - 1, -1))))
    circ.meta["energy_shift"] = h.constant_shift()
    return circ


def phase_register_wires(h: PauliTermSum, R: int) -> list:
    """Wires of readout bits b_1..b_R (most significant first)."""
    return list(range(h.n_qubits + R - 1, h.n_qubits - 1, -1))


def run_pea(
    h: PauliTermSum,
    initial_state,
    tau: float,
    R: int,
    plan,
    shots: int,
    rng=None,
) -> PhaseSample:
    """Execute the QFT-based estimator and sample the phase register.

    Returns the histogram of ``shots`` independent readouts of b_1..b_R.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = as_rng(rng)
    psi = resolve_initial_state(h, initial_state)
    state = _embed(psi, h.n_qubits + R)
    state = apply_circuit(state, pea_circuit(h, tau, R, plan))
    counts = measure_subset(state, phase_register_wires(h, R), shots, rng)
    return PhaseSample(R, counts)


def feedback_angle(k: int, R: int, bits: dict) -> float:
    """Conditioning z-rotation angle for iteration k of the iterative estimator.

    ``bits`` maps already-fixed positions k+1..R to their values; the angle
    is -2*pi * sum_{l=2}^{R-k+1} bits[k+l-1] / 2**l (zero on the first
    iteration, where nothing is fixed yet).
    """
    omega = 0.0
    for l in range(2, R - k + 2):
        omega -= 2 * np.pi * bits[k + l - 1] / 2**l
    return omega


def _iteration_base_state(h, psi, tau, k, plan, n_total) -> Statevector:
    """State after Hadamard + controlled power, before the feedback rotation."""
    anc = h.n_qubits
    state = _embed(psi, n_total)
    state = apply(state, H(anc))
    circ = controlled_power_circuit(h, tau, k, plan, anc, n_total)
    return apply_circuit(state, circ)


def _ancilla_p0(state: Statevector, anc: int, omega: float) -> float:
    if omega != 0.0:
        state = apply(state, RZ(omega, anc))
    state = apply(state, H(anc))
    p = marginal_probabilities(state, [anc])
    return float(min(max(p[0], 0.0), 1.0))


def run_ipea_exhaustive(
    h: PauliTermSum,
    initial_state,
    tau: float,
    R: int,
    plan,
    shots: int,
    rng=None,
) -> PhaseSample:
    """Iterative estimation probing every branch of the bit tree.

    Each iteration level consumes ``shots`` circuit executions, split over
    the suffix branches in proportion to their observed frequencies: a
    branch holding c observations draws its bit counts from the exact
    ancilla Born probability for that branch's feedback angle.  The chain
    of binomial splits reproduces, in law, the readout histogram of the
    QFT-based estimator.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if h.n_qubits + 1 > MAX_QUBITS:
        raise ResourceLimitError("ancilla exceeds the qubit cap")
    rng = as_rng(rng)
    psi = resolve_initial_state(h, initial_state)
    n_total = h.n_qubits + 1
    anc = h.n_qubits

    # suffix tuple (b_k+1, ..., b_R) -> observation count
    nodes = {(): shots}
    for k in range(R, 0, -1):
        base = _iteration_base_state(h, psi, tau, k, plan, n_total)
        nxt = {}
        for suffix in sorted(nodes):
            c = nodes[suffix]
            if c == 0:
                continue
            bits = {k + 1 + j: suffix[j] for j in range(len(suffix))}
            p0 = _ancilla_p0(base.copy(), anc, feedback_angle(k, R, bits))
            c0 = int(rng.binomial(c, p0))
            if c0:
                nxt[(0,) + suffix] = c0
            if c - c0:
                nxt[(1,) + suffix] = c - c0
        nodes = nxt
    counts = {"".join(map(str, bits_tuple)): c for bits_tuple, c in nodes.items()}
    return PhaseSample(R, counts)


@dataclass(frozen=True)
class IterationRecord:
    """One iteration of the non-exhaustive run: frequencies and chosen bit."""

    k: int
    f0: float
    f1: float
    bit: int

    def __post_init__(self):
        if abs(self.f0 + self.f1 - 1.0) > 1e-12:
            raise ValueError("relative frequencies must sum to 1")
        if (self.f0 if self.bit == 0 else self.f1) < 0.5 - 1e-12:
            raise ValueError("chosen bit must be the majority outcome")

    def freq(self, bit: int) -> float:
        return self.f0 if bit == 0 else self.f1


@dataclass
class LpmfTree:
    """Per-iteration majority histograms of one non-exhaustive run.

    ``levels`` are ordered as executed, k = R down to 1.
    """

    R: int
    levels: tuple

    def __post_init__(self):
        if [rec.k for rec in self.levels] != list(range(self.R, 0, -1)):
            raise ValueError("levels must cover k = R..1 in execution order")

    def chosen_bits(self) -> dict:
        return {rec.k: rec.bit for rec in self.levels}

    def estimate_string(self) -> str:
        bits = self.chosen_bits()
        return "".join(str(bits[k]) for k in range(1, self.R + 1))


def run_ipea_nonexhaustive(
    h: PauliTermSum,
    initial_state,
    tau: float,
    R: int,
    plan,
    shots: int,
    rng=None,
) -> tuple:
    """Iterative estimation following only the majority branch.

    Each iteration fixes its bit by majority vote over ``shots`` draws
    (ties resolve to 0, deterministically) and feeds the fixed bits into
    the next iteration's z-rotation.  Returns the R-bit estimate (most
    significant bit first) and the per-iteration frequency tree.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if h.n_qubits + 1 > MAX_QUBITS:
        raise ResourceLimitError("ancilla exceeds the qubit cap")
    rng = as_rng(rng)
    psi = resolve_initial_state(h, initial_state)
    n_total = h.n_qubits + 1
    anc = h.n_qubits

    bits: dict = {}
    levels = []
    for k in range(R, 0, -1):
        base = _iteration_base_state(h, psi, tau, k, plan, n_total)
        p0 = _ancilla_p0(base, anc, feedback_angle(k, R, bits))
        c0 = int(rng.binomial(shots, p0))
        f0 = c0 / shots
        bit = 0 if f0 >= 0.5 else 1
        levels.append(IterationRecord(k, f0, 1.0 - f0, bit))
        bits[k] = bit
    tree = LpmfTree(R, tuple(levels))
    return tree.estimate_string(), tree


def lpmf_reconstruct(tree: LpmfTree) -> ParentDistribution:
    """Lossy PMF over all R-bit strings from a non-exhaustive run.

    The explored leaf receives the product of its per-iteration majority
    frequencies.  The rejected node of iteration k carries the rejected
    frequency times the product of the deeper (already explored)
    frequencies, spread uniformly over its 2**(k-1) descendant leaves.
    Masses add up to exactly 1.
    """
    R = tree.R
    p = np.zeros(2**R)
    chosen = tree.chosen_bits()
    upstream = 1.0  # product of chosen frequencies for iterations deeper than k
    for rec in tree.levels:
        k = rec.k
        base = (1 - rec.bit) << (R - k)
        for kk in range(k + 1, R + 1):
            base |= chosen[kk] << (R - kk)
        n_free = k - 1
        mass = rec.freq(1 - rec.bit) * upstream / 2**n_free
        for x in range(2**n_free):
            p[base | (x << (R - k + 1))] += mass
        upstream *= rec.freq(rec.bit)
    p[int(tree.estimate_string(), 2)] += upstream
    return ParentDistribution(R, p)
