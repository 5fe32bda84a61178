"""Quantum phase estimation laboratory.

Exact statevector simulation of QFT-based and iterative phase estimation,
model Hamiltonians with (Trotterized) controlled propagators, circular
statistics post-processing, and eigenvalue extraction by circular
regression over tau sweeps.
"""

from .statevec import (
    Circuit,
    GateOp,
    ResourceLimitError,
    Statevector,
    apply,
    apply_circuit,
    inject_amplitudes,
    measure_and_collapse,
    measure_subset,
    substream,
)
from .circuits import (
    circuit_to_unitary,
    controlled_rx,
    controlled_rz,
    count_gates,
    inverse_qft_permuted,
    pauli_string_exp,
    phase_aligned_distance,
)
from .models import (
    EigenSystem,
    PauliTermSum,
    TrotterPlan,
    controlled_power_circuit,
    exact_eigensystem,
    exact_propagator,
    groundstate_circuit_hubbard,
    hubbard_compact,
    hubbard_groundstate_amplitudes,
    hubbard_groundstate_angle,
    hubbard_jw,
    ising,
    trotter_error_norm,
    zeeman,
)
from .qpe import (
    LpmfTree,
    ParentDistribution,
    PhaseSample,
    analytic_pmf,
    feedback_angle,
    lpmf_reconstruct,
    phase_from_energy,
    resource_count,
    run_ipea_exhaustive,
    run_ipea_nonexhaustive,
    run_pea,
    superposition_pmf,
)
from .circstats import (
    CircularMoment,
    PhaseEstimate,
    analytic_mu,
    analytic_rho,
    bootstrap_sigma,
    circular_distance,
    circular_std,
    error_curves,
    invert_mu,
    majority_estimate,
    mean_direction_estimate,
    sample_moment,
)
from .fitting import FitModel, FitResult, chi2_circ, eigenvalue_from_slope, fit, model_phase

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
