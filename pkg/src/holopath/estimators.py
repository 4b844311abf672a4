"""scikit-learn compatible wrappers around the functional API.

The estimators hold physical parameters as constructor arguments (so
``get_params``/``set_params``/``clone`` work) and build grids, Hamiltonians
and bases in ``fit``. ``transform`` acts on rows of ``X``: densities for the
propagators, state vectors for the classicalizer and the Planck-cell pinching.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_count, check_states_2d
from .exceptions import DimensionMismatchError
from .mera import classicalize
from .paths import mc_kernel_estimate, sample_paths, total_mass, trotter_kernel
from .spectral import (
    Potential,
    SpatialGrid,
    build_hamiltonian,
    diagonalize,
    imaginary_kernel,
    real_kernel,
)
from .superselection import build_planck_basis, phase_space_mixture, project_observable


def make_potential(kind, omega=1.0, depth=1.0, width=1.0, value=0.0, samples=None):
    """Potential from flat parameters, as used by the estimators and the CLI."""
    if kind == "tabulated":
        return Potential.tabulated(samples)
    return Potential(kind, omega=omega, depth=depth, width=width, value=value)


class _GridModel(BaseEstimator):
    """Shared grid/Hamiltonian parameters. Not meant to be used directly."""

    def _build(self, X):
        self.grid_ = SpatialGrid(self.n_points, self.extent, self.dims, self.boundary)
        samples = None
        if X is not None:
            samples = np.asarray(X, dtype=float).ravel()
            if samples.shape[0] != self.grid_.n_points:
                raise DimensionMismatchError(
                    f"tabulated potential needs {self.grid_.n_points} samples, got {samples.shape[0]}"
                )
        kind = "tabulated" if samples is not None else self.potential
        pot = make_potential(kind, self.omega, self.depth, self.width, self.value, samples)
        self.hamiltonian_ = build_hamiltonian(self.grid_, pot, self.mass, self.hbar)
        self.n_features_in_ = self.grid_.n_points

    def _check_rows(self, X):
        check_is_fitted(self, "hamiltonian_")
        X = np.atleast_2d(np.asarray(X))
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatchError(
                f"X has {X.shape[1]} columns, expected {self.n_features_in_} grid points"
            )
        return X


class ImaginaryTimePropagator(TransformerMixin, _GridModel):
    """Conditional density ``P(q1, delta_tau | q0, 0)`` on a grid.

    Parameters
    ----------
    n_points, extent, dims, boundary : grid definition.
    potential : {"free", "harmonic", "square_well", "constant"}
        Preset; passing samples as ``X`` to ``fit`` overrides it.
    omega, depth, width, value : preset parameters.
    mass, hbar : physical constants.
    delta_tau : imaginary time step.
    method : {"spectral", "trotter"}
    n_slices : Trotter slice count (ignored by the spectral method).

    Attributes
    ----------
    grid_, hamiltonian_, kernel_ and, for the spectral method, spectrum_.
    """

    def __init__(
        self,
        n_points=128,
        extent=20.0,
        dims=1,
        boundary="periodic",
        potential="harmonic",
        omega=1.0,
        depth=1.0,
        width=1.0,
        value=0.0,
        mass=1.0,
        hbar=1.0,
        delta_tau=1.0,
        method="spectral",
        n_slices=256,
    ):
        self.n_points = n_points
        self.extent = extent
        self.dims = dims
        self.boundary = boundary
        self.potential = potential
        self.omega = omega
        self.depth = depth
        self.width = width
        self.value = value
        self.mass = mass
        self.hbar = hbar
        self.delta_tau = delta_tau
        self.method = method
        self.n_slices = n_slices

    def fit(self, X=None, y=None):
        self._build(X)
        if self.method == "spectral":
            self.spectrum_ = diagonalize(self.hamiltonian_)
            self.kernel_ = imaginary_kernel(self.spectrum_, self.delta_tau)
        elif self.method == "trotter":
            self.kernel_ = trotter_kernel(self.hamiltonian_, self.delta_tau, self.n_slices)
        else:
            raise ValueError(f"method must be 'spectral' or 'trotter', got {self.method!r}")
        return self

    def predict(self, q0):
        """Kernel columns for source indices ``q0``, one row per source."""
        check_is_fitted(self, "kernel_")
        return self.kernel_.matrix[:, np.atleast_1d(q0)].T

    def transform(self, X):
        """Propagate each row density ``f(q0)`` to ``int P(q1|q0) f(q0) dq0``."""
        X = self._check_rows(X).astype(float)
        return X @ self.kernel_.matrix.T * self.grid_.cell_volume

    def total_mass(self, q0):
        check_is_fitted(self, "kernel_")
        return total_mass(self.kernel_, q0)


class RealTimePropagator(TransformerMixin, _GridModel):
    """Unitary amplitude ``K(q1, delta_t | q0, 0)`` from the same spectral sum."""

    def __init__(
        self,
        n_points=128,
        extent=20.0,
        dims=1,
        boundary="periodic",
        potential="harmonic",
        omega=1.0,
        depth=1.0,
        width=1.0,
        value=0.0,
        mass=1.0,
        hbar=1.0,
        delta_t=1.0,
    ):
        self.n_points = n_points
        self.extent = extent
        self.dims = dims
        self.boundary = boundary
        self.potential = potential
        self.omega = omega
        self.depth = depth
        self.width = width
        self.value = value
        self.mass = mass
        self.hbar = hbar
        self.delta_t = delta_t

    def fit(self, X=None, y=None):
        self._build(X)
        self.spectrum_ = diagonalize(self.hamiltonian_)
        self.amplitude_ = real_kernel(self.spectrum_, self.delta_t)
        return self

    def transform(self, X):
        """Evolve row wavefunctions ``psi(q0)`` by ``delta_t``."""
        X = self._check_rows(X).astype(complex)
        return X @ self.amplitude_.matrix.T * self.grid_.cell_volume


class KilledWalkEstimator(_GridModel):
    """Monte Carlo kernel columns from killed Gaussian walks.

    ``predict(q0)`` returns the histogram density for one source;
    the last ensemble and estimate are kept as ``ensemble_`` and
    ``estimate_``.
    """

    def __init__(
        self,
        n_points=128,
        extent=20.0,
        dims=1,
        boundary="periodic",
        potential="harmonic",
        omega=1.0,
        depth=1.0,
        width=1.0,
        value=0.0,
        mass=1.0,
        hbar=1.0,
        delta_tau=1.0,
        n_slices=256,
        n_paths=10000,
        seed=0,
        n_jobs=1,
    ):
        self.n_points = n_points
        self.extent = extent
        self.dims = dims
        self.boundary = boundary
        self.potential = potential
        self.omega = omega
        self.depth = depth
        self.width = width
        self.value = value
        self.mass = mass
        self.hbar = hbar
        self.delta_tau = delta_tau
        self.n_slices = n_slices
        self.n_paths = n_paths
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        self._build(X)
        return self

    def predict(self, q0):
        check_is_fitted(self, "hamiltonian_")
        self.ensemble_ = sample_paths(
            self.hamiltonian_,
            q0,
            self.delta_tau,
            self.n_slices,
            self.n_paths,
            self.seed,
            n_jobs=self.n_jobs,
        )
        self.estimate_ = mc_kernel_estimate(self.ensemble_)
        return self.estimate_.density


class Classicalizer(TransformerMixin, BaseEstimator):
    """Dephase row state vectors into computational-basis probabilities."""

    def fit(self, X=None, y=None):
        if X is not None:
            self.n_features_in_ = check_states_2d(X).shape[1]
        return self

    def transform(self, X):
        X = check_states_2d(X)
        return np.vstack([classicalize(row).probabilities for row in X])


class PlanckCellPinching(TransformerMixin, BaseEstimator):
    """Map row states to Planck-cell occupation probabilities.

    ``fit`` reads the Hilbert dimension from ``X`` (or ``n`` if given) and
    builds ``basis_``; :meth:`pinch` redefines observables on that basis.
    """

    def __init__(self, s_q=2, n=None, hbar=1.0, delta_q=1.0):
        self.s_q = s_q
        self.n = n
        self.hbar = hbar
        self.delta_q = delta_q

    def fit(self, X=None, y=None):
        n = self.n
        if X is not None:
            n = check_states_2d(X).shape[1]
        if n is None:
            raise ValueError("PlanckCellPinching needs X or n to fix the dimension")
        n = check_count(int(n), "n")
        self.basis_ = build_planck_basis(n, self.s_q, self.hbar, self.delta_q)
        self.n_features_in_ = n
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_states_2d(X)
        return np.vstack([phase_space_mixture(row, self.basis_) for row in X])

    def pinch(self, O):
        check_is_fitted(self, "basis_")
        return project_observable(O, self.basis_)
