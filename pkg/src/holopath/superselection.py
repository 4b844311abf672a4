"""Planck-cell coarse graining of a finite position grid.

The ``n`` grid points are split into ``n / s_q`` blocks of ``s_q`` positions.
Inside block ``Q`` a discrete Fourier index ``P`` labels ``s_q`` orthonormal
plane waves, giving one basis vector per phase-space cell ``(Q, P)`` of area
``dQ * dP = 2 pi hbar``. Observables pinched onto the rank-1 cell projectors
all commute with one another, and so do their exponentials.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg

from ._validation import check_positive, check_square, check_state, check_time
from .exceptions import NotSuperselectedError, PartitionError

SSR_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PlanckCellBasis:
    """Orthonormal cell basis; column ``Q * s_q + P`` of ``vectors`` is psi_{Q,P}."""

    n: int
    s_q: int
    hbar: float
    delta_q: float
    vectors: np.ndarray = field(repr=False)
    labels: tuple = field(repr=False)

    @property
    def n_blocks(self):
        return self.n // self.s_q

    @property
    def cell_width_q(self):
        return self.s_q * self.delta_q

    @property
    def cell_width_p(self):
        return 2.0 * math.pi * self.hbar / (self.s_q * self.delta_q)

    @property
    def cell_area(self):
        return self.cell_width_q * self.cell_width_p

    def gram(self):
        return self.vectors.conj().T @ self.vectors

    def projector(self, index):
        v = self.vectors[:, index]
        return np.outer(v, v.conj())

    def to_cells(self, O):
        """Matrix elements ``<Q1,P1| O |Q0,P0>``."""
        B = self.vectors
        return B.conj().T @ O @ B

    def from_cells(self, O_cells):
        B = self.vectors
        return B @ O_cells @ B.conj().T


def build_planck_basis(n, s_q, hbar=1.0, delta_q=1.0):
    """Block-Fourier basis ``psi_{Q,P}(j) = exp(2 pi i P (j - Q s_q)/s_q)/sqrt(s_q)``.

    ``s_q = 1`` is the position basis, ``s_q = n`` the discrete Fourier basis.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise PartitionError(f"n must be a positive integer, got {n!r}")
    if isinstance(s_q, bool) or not isinstance(s_q, (int, np.integer)) or s_q < 1 or n % s_q:
        raise PartitionError(f"s_q={s_q!r} does not divide n={n}")
    hbar = check_positive(hbar, "hbar")
    delta_q = check_positive(delta_q, "delta_q")
    n, s_q = int(n), int(s_q)
    k = np.arange(s_q)
    block = np.exp(2j * np.pi * np.outer(k, k) / s_q) / math.sqrt(s_q)
    vectors = np.kron(np.eye(n // s_q), block)
    vectors.setflags(write=False)
    labels = tuple((Q, P) for Q in range(n // s_q) for P in range(s_q))
    return PlanckCellBasis(n, s_q, hbar, delta_q, vectors, labels)


def tensor_basis(first, second):
    """Cell basis for two orbital axes; labels become ``((Q1, P1), (Q2, P2))``."""
    vectors = np.kron(first.vectors, second.vectors)
    vectors.setflags(write=False)
    labels = tuple((a, b) for a in first.labels for b in second.labels)
    return PlanckCellBasis(
        first.n * second.n, first.s_q * second.s_q, first.hbar, first.delta_q, vectors, labels
    )


@dataclass(frozen=True, eq=False)
class RedefinedObservable:
    """Cell-diagonal operator: ``matrix`` in the grid basis, ``cell_values`` per cell."""

    matrix: np.ndarray = field(repr=False)
    cell_values: np.ndarray
    basis: PlanckCellBasis = field(repr=False)


def project_observable(O, basis):
    """Pinch ``O`` onto the cell projectors: ``sum_c Pi_c O Pi_c``."""
    O = check_square(O, "observable", size=basis.n)
    values = np.diagonal(basis.to_cells(O)).copy()
    matrix = (basis.vectors * values) @ basis.vectors.conj().T
    return RedefinedObservable(matrix, values, basis)


def _as_matrix(O):
    return O.matrix if isinstance(O, RedefinedObservable) else np.asarray(O)


def verify_ssr(O, basis):
    """Largest off-diagonal cell element ``|<Q1,P1|O|Q0,P0>|``."""
    C = basis.to_cells(check_square(_as_matrix(O), "observable", size=basis.n))
    off = C - np.diag(np.diagonal(C))
    return float(np.max(np.abs(off))) if off.size else 0.0


def commutator_norm(O, basis):
    """Largest ``max|[O, Pi_c]|`` over every cell projector."""
    O = _as_matrix(O)
    return max(
        float(np.max(np.abs(O @ Pi - Pi @ O)))
        for Pi in (basis.projector(i) for i in range(basis.n))
    )


def cell_propagator(H, time, mode="real", basis=None):
    """``exp(-i t H/hbar)`` or ``exp(-tau H/hbar)`` expressed in the cell basis.

    The exponential is taken densely in the grid basis and then transformed,
    so its diagonality in the cell basis is a genuine check, not a
    construction.

    Raises:
        NotSuperselectedError: if ``H`` has cell off-diagonal elements above
            ``1e-10``.
    """
    basis = H.basis if basis is None and isinstance(H, RedefinedObservable) else basis
    if basis is None:
        raise ValueError("a PlanckCellBasis is required for plain matrices")
    matrix = _as_matrix(H)
    leak = verify_ssr(matrix, basis)
    if leak > SSR_TOL:
        raise NotSuperselectedError(f"operator mixes Planck cells (off-diagonal {leak:.3e})")
    time = check_time(time, "time")
    if mode == "real":
        generator = -1j * time * matrix / basis.hbar
    elif mode == "imaginary":
        generator = -time * matrix / basis.hbar
    else:
        raise ValueError(f"mode must be 'real' or 'imaginary', got {mode!r}")
    return basis.to_cells(scipy.linalg.expm(generator))


def phase_space_mixture(state, basis):
    """Cell occupation probabilities ``|<psi_{Q,P}|state>|^2``."""
    state = check_state(state, size=basis.n)
    return np.abs(basis.vectors.conj().T @ state) ** 2
