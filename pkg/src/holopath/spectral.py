"""Grid Hamiltonians and their spectral propagators.

The spectral sum ``sum_n phi_n(q1) conj(phi_n(q0)) exp(-z E_n / hbar)`` is the
reference every other route in the package is checked against.  Real ``z``
gives the imaginary-time density kernel, ``z = i dt`` the real-time amplitude.

Kernels carry density semantics: eigenfunctions are normalised under the
discrete measure ``dq**dims``, so discrete sums over grid points must include
that factor (``kernel.matrix @ f * grid.cell_volume`` integrates against f).
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive, check_time
from .exceptions import (
    AsymmetricOperatorError,
    DegenerateGridError,
    InvalidPotentialError,
)

BOUNDARIES = ("periodic", "reflecting")
POTENTIAL_KINDS = ("free", "harmonic", "square_well", "constant", "tabulated")

SYMMETRY_TOL = 1e-10
# relative gap under which eigenvalues count as degenerate for ordering
DEGENERACY_RTOL = 1e-10


def _frozen(array):
    array = np.array(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform tensor-product grid with points ``q_j = -L/2 + j*dq``.

    Each point is the centre of a cell of width ``dq``; the simulation domain
    is the union of cells, ``[-L/2 - dq/2, L/2 - dq/2)`` per axis.
    """

    points_per_axis: int
    extent: float
    dims: int = 1
    boundary: str = "periodic"

    def __post_init__(self):
        if isinstance(self.points_per_axis, bool) or not isinstance(
            self.points_per_axis, (int, np.integer)
        ):
            raise DegenerateGridError(
                f"points_per_axis must be an integer, got {self.points_per_axis!r}"
            )
        if self.points_per_axis < 2:
            raise DegenerateGridError(
                f"grid needs at least 2 points per axis, got {self.points_per_axis}"
            )
        if self.dims not in (1, 2):
            raise DegenerateGridError(f"dims must be 1 or 2, got {self.dims!r}")
        if not np.isfinite(self.extent) or self.extent <= 0:
            raise DegenerateGridError(f"extent must be positive, got {self.extent!r}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")

    @property
    def spacing(self):
        return self.extent / self.points_per_axis

    @property
    def n_points(self):
        return self.points_per_axis**self.dims

    @property
    def cell_volume(self):
        return self.spacing**self.dims

    @property
    def lower_edge(self):
        return -0.5 * self.extent - 0.5 * self.spacing

    @property
    def axis(self):
        return -0.5 * self.extent + np.arange(self.points_per_axis) * self.spacing

    @property
    def coordinates(self):
        """Grid points as an ``(n_points, dims)`` array, row-major flattening."""
        axes = np.meshgrid(*([self.axis] * self.dims), indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=-1)

    def center_index(self):
        """Flat index of the grid point closest to the origin."""
        return int(self.nearest_index(np.zeros(self.dims)))

    def wrap(self, positions):
        """Map arbitrary positions back into the domain.

        Periodic grids wrap around; reflecting grids mirror at the outer cell
        faces, matching the ghost-point convention of the reflecting stencil.
        """
        positions = np.asarray(positions, dtype=float)
        lo = self.lower_edge
        L = self.extent
        if self.boundary == "periodic":
            return lo + np.mod(positions - lo, L)
        folded = np.mod(positions - lo, 2 * L)
        return lo + np.where(folded > L, 2 * L - folded, folded)

    def contains(self, positions):
        positions = np.asarray(positions, dtype=float)
        lo = self.lower_edge
        return np.all((positions >= lo) & (positions <= lo + self.extent))

    def nearest_index(self, positions):
        """Flat index of the cell containing each position (last axis = dims)."""
        positions = np.asarray(positions, dtype=float)
        if positions.shape[-1:] != (self.dims,):
            positions = positions[..., np.newaxis]
        N = self.points_per_axis
        idx = np.floor((positions - self.lower_edge) / self.spacing).astype(np.int64)
        if self.boundary == "periodic":
            idx = np.mod(idx, N)
        else:
            idx = np.clip(idx, 0, N - 1)
        flat = idx[..., 0]
        for axis in range(1, self.dims):
            flat = flat * N + idx[..., axis]
        return flat


@dataclass(frozen=True, eq=False)
class Potential:
    """Potential energy preset, evaluated on demand.

    ``square_well`` is zero inside ``|q| < width/2`` (per axis) and ``depth``
    outside, so every preset is non-negative. ``tabulated`` holds one value per
    grid point and is piecewise constant over cells.
    """

    kind: str = "free"
    omega: float = 1.0
    depth: float = 1.0
    width: float = 1.0
    value: float = 0.0
    samples: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise InvalidPotentialError(
                f"unknown potential kind {self.kind!r}; expected one of {POTENTIAL_KINDS}"
            )
        for name in ("omega", "depth", "width", "value"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidPotentialError(f"{name} must be finite")
        if self.kind == "tabulated":
            if self.samples is None:
                raise InvalidPotentialError("tabulated potential needs samples")
            samples = np.asarray(self.samples, dtype=float).ravel()
            if not np.all(np.isfinite(samples)):
                raise InvalidPotentialError("tabulated potential has non-finite samples")
            object.__setattr__(self, "samples", _frozen(samples))

    @classmethod
    def free(cls):
        return cls("free")

    @classmethod
    def harmonic(cls, omega=1.0):
        return cls("harmonic", omega=omega)

    @classmethod
    def square_well(cls, depth=1.0, width=1.0):
        return cls("square_well", depth=depth, width=width)

    @classmethod
    def constant(cls, value):
        return cls("constant", value=value)

    @classmethod
    def tabulated(cls, samples):
        return cls("tabulated", samples=samples)

    @property
    def is_free(self):
        return self.kind == "free"

    def evaluate(self, positions, grid, mass=1.0):
        """Potential at arbitrary positions of shape ``(..., dims)``."""
        positions = np.asarray(positions, dtype=float)
        if grid.dims == 1 and positions.shape[-1:] != (1,):
            positions = positions[..., np.newaxis]
        shape = positions.shape[:-1]
        if self.kind == "free":
            out = np.zeros(shape)
        elif self.kind == "constant":
            out = np.full(shape, float(self.value))
        elif self.kind == "harmonic":
            out = 0.5 * mass * self.omega**2 * np.sum(positions**2, axis=-1)
        elif self.kind == "square_well":
            inside = np.all(np.abs(positions) < 0.5 * self.width, axis=-1)
            out = np.where(inside, 0.0, float(self.depth))
        else:
            if self.samples.shape[0] != grid.n_points:
                raise InvalidPotentialError(
                    f"tabulated potential has {self.samples.shape[0]} samples, "
                    f"grid has {grid.n_points} points"
                )
            out = self.samples[grid.nearest_index(positions)]
        if not np.all(np.isfinite(out)):
            raise InvalidPotentialError("potential evaluates to non-finite values")
        return out

    def sample(self, grid, mass=1.0):
        """Potential values at every grid point, flattened row-major."""
        return self.evaluate(grid.coordinates, grid, mass)


def kinetic_matrix_1d(n, spacing, boundary, coefficient):
    """Three-point stencil ``coefficient * {2, -1, -1}`` on one axis.

    Reflecting boundaries mirror the ghost point onto the edge cell, which
    leaves ``coefficient`` on the edge diagonals and keeps row sums zero.
    """
    T = np.zeros((n, n))
    idx = np.arange(n)
    T[idx, idx] = 2.0 * coefficient
    T[idx[:-1], idx[:-1] + 1] -= coefficient
    T[idx[1:], idx[1:] - 1] -= coefficient
    if boundary == "periodic":
        T[0, n - 1] -= coefficient
        T[n - 1, 0] -= coefficient
    else:
        T[0, 0] -= coefficient
        T[n - 1, n - 1] -= coefficient
    return T


def kinetic_matrix(grid, mass=1.0, hbar=1.0):
    coefficient = hbar**2 / (2.0 * mass * grid.spacing**2)
    T1 = kinetic_matrix_1d(grid.points_per_axis, grid.spacing, grid.boundary, coefficient)
    if grid.dims == 1:
        return T1
    eye = np.eye(grid.points_per_axis)
    return np.kron(T1, eye) + np.kron(eye, T1)


def _stencil_modes(n, boundary):
    """Analytic eigenvectors (columns) and ``1 - cos`` factors of the stencil."""
    j = np.arange(n)
    if boundary == "periodic":
        theta = 2.0 * np.pi * j / n
        modes = np.exp(1j * np.outer(j, theta)) / np.sqrt(n)
    else:
        theta = np.pi * j / n
        modes = np.cos(np.outer(j + 0.5, theta))
        modes /= np.linalg.norm(modes, axis=0)
    return modes, 1.0 - np.cos(theta)


def kinetic_propagator(grid, tau, mass=1.0, hbar=1.0):
    """Exact ``exp(-tau*T/hbar)`` for the stencil, from its analytic modes.

    The result is a plain matrix (no measure factor); for the free periodic
    grid its columns are normalised transition probabilities.
    """
    coefficient = hbar**2 / (2.0 * mass * grid.spacing**2)
    modes, factor = _stencil_modes(grid.points_per_axis, grid.boundary)
    decay = np.exp(-tau * 2.0 * coefficient * factor / hbar)
    E1 = ((modes * decay) @ modes.conj().T).real
    if grid.dims == 1:
        return E1
    return np.kron(E1, E1)


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    grid: SpatialGrid
    potential: Potential
    mass: float
    hbar: float
    kinetic: np.ndarray = field(repr=False)
    potential_samples: np.ndarray = field(repr=False)

    @property
    def matrix(self):
        return self.kinetic + np.diag(self.potential_samples)

    @property
    def size(self):
        return self.grid.n_points


def build_hamiltonian(grid, potential=None, m=1.0, hbar=1.0):
    """Discretise ``-hbar^2/(2m) Laplacian + V`` on ``grid``.

    Args:
        grid: the :class:`SpatialGrid`.
        potential: a :class:`Potential`; ``None`` means free.
        m: particle mass.
        hbar: reduced Planck constant.

    Returns:
        Hamiltonian with the stencil kinetic part and V on the diagonal.
    """
    if not isinstance(grid, SpatialGrid):
        raise DegenerateGridError(f"expected a SpatialGrid, got {type(grid).__name__}")
    m = check_positive(m, "mass")
    hbar = check_positive(hbar, "hbar")
    potential = Potential.free() if potential is None else potential
    V = potential.sample(grid, m)
    return Hamiltonian(
        grid=grid,
        potential=potential,
        mass=m,
        hbar=hbar,
        kinetic=_frozen(kinetic_matrix(grid, m, hbar)),
        potential_samples=_frozen(V),
    )


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenpairs with eigenfunctions normalised under ``dq**dims``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    grid: SpatialGrid
    hbar: float = 1.0

    def gram(self):
        phi = self.eigenvectors
        return (phi.conj().T @ phi) * self.grid.cell_volume

    def reconstruct(self):
        phi = self.eigenvectors
        return ((phi * self.eigenvalues) @ phi.conj().T) * self.grid.cell_volume

    def with_eigenvalues(self, eigenvalues):
        """Copy with replaced eigenvalues (same eigenfunctions)."""
        eigenvalues = np.asarray(eigenvalues, dtype=float)
        if eigenvalues.shape != self.eigenvalues.shape:
            raise ValueError("eigenvalue count must match the number of eigenvectors")
        return SpectralDecomposition(_frozen(eigenvalues), self.eigenvectors, self.grid, self.hbar)


def _order_degenerate(eigenvalues, vectors):
    n = len(eigenvalues)
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    lead = np.argmax(np.abs(vectors), axis=0)
    order = []
    start = 0
    for i in range(1, n + 1):
        if i == n or eigenvalues[i] - eigenvalues[i - 1] > DEGENERACY_RTOL * scale:
            block = list(range(start, i))
            block.sort(key=lambda k: lead[k])
            order.extend(block)
            start = i
    order = np.array(order)
    vectors = vectors[:, order]
    # sign convention: largest-magnitude component positive
    pivots = vectors[lead[order], np.arange(n)]
    return eigenvalues[order], vectors * np.sign(pivots)


def diagonalize(h):
    """Full spectral decomposition of a grid Hamiltonian.

    Eigenvalues ascend; within a degenerate cluster eigenvectors are ordered by
    the index of their largest-magnitude component, which is made positive.
    """
    H = h.matrix
    scale = max(1.0, float(np.max(np.abs(H))))
    asym = float(np.max(np.abs(H - H.T)))
    if asym > SYMMETRY_TOL * scale:
        raise AsymmetricOperatorError(f"Hamiltonian asymmetric by {asym:.3e}")
    H = 0.5 * (H + H.T)
    E, U = np.linalg.eigh(H)
    E, U = _order_degenerate(E, U)
    phi = U / np.sqrt(h.grid.cell_volume)
    return SpectralDecomposition(_frozen(E), _frozen(phi), h.grid, h.hbar)


@dataclass(frozen=True, eq=False)
class Kernel:
    """Imaginary-time conditional density; ``matrix[i, j] = P(q_i, dtau | q_j, 0)``."""

    delta_tau: float
    matrix: np.ndarray = field(repr=False)
    grid: SpatialGrid

    def column(self, source):
        return self.matrix[:, source]

    def compose(self, other):
        """Chapman-Kolmogorov composition ``self o other`` under the grid measure."""
        return Kernel(
            self.delta_tau + other.delta_tau,
            _frozen(self.matrix @ other.matrix * self.grid.cell_volume),
            self.grid,
        )


@dataclass(frozen=True, eq=False)
class Amplitude:
    """Real-time amplitude; ``matrix[i, j] = K(q_i, dt | q_j, 0)``."""

    delta_t: float
    matrix: np.ndarray = field(repr=False)
    grid: SpatialGrid

    def column(self, source):
        return self.matrix[:, source]

    def unitarity_error(self):
        """Max deviation of ``(K dv)^dagger (K dv)`` from the identity."""
        U = self.matrix * self.grid.cell_volume
        return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def spectral_propagator(spec, z):
    """Spectral sum at complex time ``z``: ``sum_n phi_n phi_n^* exp(-z E_n/hbar)``.

    Returns a complex matrix; ``z = dtau`` is the density kernel and
    ``z = 1j*dt`` the real-time amplitude.
    """
    phi = spec.eigenvectors
    weights = np.exp(-complex(z) * spec.eigenvalues / spec.hbar)
    return (phi * weights) @ phi.conj().T


def imaginary_kernel(spec, delta_tau=1.0):
    delta_tau = check_time(delta_tau, "delta_tau")
    phi = spec.eigenvectors
    weights = np.exp(-delta_tau * spec.eigenvalues / spec.hbar)
    P = ((phi * weights) @ phi.conj().T).real
    return Kernel(delta_tau, _frozen(P), spec.grid)


def real_kernel(spec, delta_t=1.0):
    delta_t = check_time(delta_t, "delta_t")
    phi = spec.eigenvectors
    weights = np.exp(-1j * delta_t * spec.eigenvalues / spec.hbar)
    return Amplitude(delta_t, _frozen((phi * weights) @ phi.conj().T), spec.grid)
