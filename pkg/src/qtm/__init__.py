"""Quantum Turing machine step operators: sparse application, path checks, spectra, dynamics and graphs."""

from .core import (
    BasisVector,
    IncompatibleDimensionsError,
    QuditLattice,
    WaveState,
    basis,
    inner_product,
    norm,
    state_from_dict,
    state_to_dict,
    superpose,
)
from .dynamics import (
    PathHamiltonian,
    Propagator,
    WindowLeakWarning,
    eigensystem,
    energy,
    evolve,
    hamiltonian_power_elements,
    path_hamiltonian,
    pathsum_amplitude,
    pathsum_state,
    tridiagonal_hamiltonian,
)
from .graphs import ComputationGraph, StructureReport, build_graph, classify_structure, export_graph
from .operators import (
    StepOperator,
    StepTerm,
    active_terms,
    apply,
    apply_adjoint,
    check_dpg_computation_basis,
    check_homogeneity_locality,
    hamiltonian_apply,
    reduced_matrix,
    term_activity,
)
from .paths import (
    DpgReport,
    PathRecord,
    WindowOverflowError,
    check_power_partial_isometry,
    classify_shift_type,
    generate_path,
    verify_cross_path,
    verify_distinct_path,
)

__version__ = "0.1.0"
