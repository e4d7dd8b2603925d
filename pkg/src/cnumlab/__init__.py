"""Finite-volume laboratory for the c-number substitution of the Bose gas zero mode."""

from .coherent import (
    DEFAULT_TOL_QUAD,
    RadialGrid,
    SymbolTable,
    coherent_vector,
    grid_for_cutoff,
    lower_symbol,
    reconstruct_from_upper,
    reconstruction_residual,
    upper_symbol,
)
from .ensemble import (
    AuditFailure,
    EnsembleReport,
    GibbsState,
    Truncation,
    audit_chain,
    audit_point,
    gibbs_state,
    p_max_search,
    partition_full,
    partition_substituted,
    pressure_gap_trend,
)
from .fock import (
    FockBasis,
    MatrixOperator,
    ModeSet,
    TruncationError,
    annihilation,
    build_basis,
    creation,
    number_operator,
    prime_basis,
)
from .griffiths import (
    MeasureEntry,
    MeasureSequence,
    RateFunctionEstimate,
    concentration_check,
    one_sided_derivatives,
    rate_function,
)
from .hamiltonian import (
    GasParams,
    build_H,
    build_H_mu_lambda,
    build_substituted,
    delta_bound,
    delta_correction,
    gas_bases,
)
from .magnet import (
    MagnetReport,
    SpinLattice,
    build_spin_hamiltonian,
    magnetization_distribution,
    thermodynamics,
)
from .order import (
    CondensateRecord,
    WeightDensity,
    condensate_observables,
    pathological_weight,
    quasi_average_scan,
    weight_full,
    weight_substituted,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
