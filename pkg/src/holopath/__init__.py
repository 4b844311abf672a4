"""Imaginary-time path integrals on finite grids, classicalized tensor
networks and Planck-cell superselection."""

__version__ = "0.1.0"

from .exceptions import *  # noqa: F401,F403
from .spectral import (
    Amplitude,
    Hamiltonian,
    Kernel,
    Potential,
    SpatialGrid,
    SpectralDecomposition,
    build_hamiltonian,
    diagonalize,
    imaginary_kernel,
    kinetic_propagator,
    real_kernel,
    spectral_propagator,
)
from .paths import (
    EnsembleTally,
    KernelEstimate,
    PathEnsemble,
    SpinBudget,
    enlarged_ensemble_ratio,
    mc_kernel_estimate,
    path_action,
    sample_paths,
    spin_budget,
    total_mass,
    trotter_kernel,
)
from .mera import (
    BulkAction,
    ClassicalMixedState,
    MeraNetwork,
    apply_network,
    bulk_action,
    classicalize,
    combined_action,
    combined_action_in_bits,
    exhaustive_cut_entropy,
    interval_entropy_bits,
    isometry_residuals,
    measurement_entropy_bits,
    minimal_cut_entropy,
    random_disentangler,
    random_isometry,
    unitary_residual,
)
from .superselection import (
    PlanckCellBasis,
    RedefinedObservable,
    build_planck_basis,
    cell_propagator,
    commutator_norm,
    phase_space_mixture,
    project_observable,
    verify_ssr,
)
from .estimators import (
    Classicalizer,
    ImaginaryTimePropagator,
    KilledWalkEstimator,
    PlanckCellPinching,
    RealTimePropagator,
)
