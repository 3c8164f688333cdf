"""Dissipative Gibbs-state preparation: Lindblad engineering at desk scale."""

__version__ = "0.1.0"

from .numkernel import (
    Spectrum,
    eig_hermitian,
    expm_phase,
    kron,
    partial_trace_ancilla,
    trace_distance,
)
from .model import (
    BohrSpectrum,
    IsingParams,
    NAMED_POINTS,
    bohr_frequencies,
    build_hamiltonian,
    energy_distribution,
    gibbs_state,
    maximally_mixed,
    named_point,
    parity_projector,
)
from .jumps import (
    FilterSpec,
    LindbladOperator,
    PauliString,
    filter_freq,
    filter_time,
    lindblad_op_discretized,
    lindblad_op_exact,
    sample_jump_set,
)
from .liouville import (
    GapResult,
    MarkovRestriction,
    Superoperator,
    build_superop,
    ckg_coherent_term,
    conductance_cheeger,
    db_residuals,
    markov_restriction,
    steady_state_and_gap,
    trace_norm,
)
from .dynamics import (
    EvolutionRecord,
    NOT_CONVERGED,
    SolverConfig,
    evolve_exact,
    evolve_randomized,
    mcwf_evolve,
    mixing_time_estimate,
    rk4_step,
)
from .circuit import (
    CircuitConfig,
    NoiseSpec,
    apply_noise,
    b_gate,
    dilation_discrete,
    gate_count,
    plateau_level,
    simulate_protocol,
    step_V,
)
from .noisefit import (
    ConvergenceFit,
    ErrorFitParams,
    bound_asymptotic,
    bound_generic,
    bound_series,
    bound_unitary_comparison,
    fit_convergence,
    fit_effective_gates,
    fit_error_model,
    noisy_rate,
    power_law_fit,
)
from .chaos import (
    FractalStats,
    SpacingStats,
    eth_statistics,
    fractal_dimension,
    fractal_scan,
    spacing_ratios,
)
