"""Imaginary-time path integral: transfer matrices and killed random walks.

Two independent routes to the same conditional density ``P(q1, dtau | q0, 0)``:

* :func:`trotter_kernel` composes Strang-split transfer matrices on the grid.
* :func:`sample_paths` runs Gaussian random walks in continuous space that
  are killed at a rate set by the potential; :func:`mc_kernel_estimate`
  histograms the surviving endpoints.

Killed walks are the null-ensemble members: a walk that survives all slices
has probability ``exp(-S_V/hbar)`` of doing so, where ``S_V`` is the
potential part of its Euclidean action.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from ._validation import check_count, check_positive, check_probability, check_time
from .exceptions import (
    EmptyEnsembleError,
    EmptyPathError,
    InvalidPotentialError,
    NegativeActionError,
)
from .spectral import Kernel, _frozen, kinetic_propagator

BIT_FACTOR = math.log(2.0)


@dataclass(frozen=True)
class SpinBudget:
    """Bit accounting of a Euclidean action ``S``.

    ``spin_count = S / (hbar ln 2)`` is the number of binary spin selections
    the action corresponds to; ``probability = 2**-spin_count = exp(-S/hbar)``
    and ``event_count = 2**spin_count`` is its reciprocal.
    """

    action: float
    hbar: float
    spin_count: float
    probability: float
    event_count: float
    bit_factor: float = BIT_FACTOR


def spin_budget(S, hbar=1.0):
    hbar = check_positive(hbar, "hbar")
    if not np.isfinite(S):
        raise NegativeActionError(f"action must be finite, got {S!r}")
    if S < 0:
        raise NegativeActionError(
            f"action must be >= 0, got {S!r}; shift the potential so that V >= 0"
        )
    n = float(S) / (hbar * BIT_FACTOR)
    # base-2 powers keep single-spin selections (n = 1) at exactly 1/2
    return SpinBudget(
        action=float(S),
        hbar=hbar,
        spin_count=n,
        probability=float(np.exp2(-n)),
        event_count=float(np.exp2(n)),
    )


def enlarged_ensemble_ratio(free_ratio, potential_ratio):
    """Weight of a path event inside the ensemble enlarged by the null set.

    ``free_ratio`` is the share of the path within the free ensemble and
    ``potential_ratio`` the share of the free ensemble within the enlarged one.
    """
    check_probability(free_ratio, "free_ratio")
    check_probability(potential_ratio, "potential_ratio")
    return free_ratio * potential_ratio


def _as_path_array(positions, dims):
    positions = np.asarray(positions, dtype=float)
    if dims == 1 and (positions.ndim == 1 or positions.shape[-1] != 1):
        positions = positions[..., np.newaxis]
    return positions


def path_action(positions, h, delta_tau=1.0):
    """Discretised Euclidean action of a path.

    ``S = sum_k eps * [m/2 ((x_{k+1}-x_k)/eps)^2 + (V(x_k) + V(x_{k+1}))/2]``
    with ``eps = delta_tau / M``. Periodic grids use minimum-image steps.

    Args:
        positions: ``(M+1,)`` for 1-D grids, ``(M+1, dims)``, or a batch
            ``(B, M+1, dims)``.
        h: the :class:`~holopath.spectral.Hamiltonian` supplying mass, grid
            and potential.
        delta_tau: total imaginary time spanned by the path.

    Returns:
        The action as a float, or an array of shape ``(B,)`` for batches.
    """
    delta_tau = check_time(delta_tau, "delta_tau")
    grid = h.grid
    x = _as_path_array(positions, grid.dims)
    if x.ndim < 2 or x.shape[-2] < 2:
        raise EmptyPathError("a path needs at least two slices (M >= 1)")
    if not grid.contains(x):
        raise ValueError("path leaves the grid domain")
    M = x.shape[-2] - 1
    eps = delta_tau / M
    steps = np.diff(x, axis=-2)
    if grid.boundary == "periodic":
        steps = steps - grid.extent * np.round(steps / grid.extent)
    kinetic = 0.5 * h.mass * np.sum(steps**2, axis=(-2, -1)) / eps
    V = h.potential.evaluate(x, grid, h.mass)
    potential = eps * (0.5 * V[..., 0] + np.sum(V[..., 1:-1], axis=-1) + 0.5 * V[..., -1])
    S = kinetic + potential
    return float(S) if np.ndim(S) == 0 else S


def trotter_kernel(h, delta_tau=1.0, slices=64):
    """Transfer-matrix kernel from ``slices`` Strang-split steps.

    Each step is ``exp(-eps V/2hbar) exp(-eps T/hbar) exp(-eps V/2hbar)`` with
    the kinetic factor taken exactly from the stencil's analytic modes.
    """
    delta_tau = check_time(delta_tau, "delta_tau")
    M = check_count(slices, "slices")
    eps = delta_tau / M
    half = np.exp(-0.5 * eps * h.potential_samples / h.hbar)
    step = half[:, None] * kinetic_propagator(h.grid, eps, h.mass, h.hbar) * half[None, :]
    P = np.linalg.matrix_power(step, M) / h.grid.cell_volume
    return Kernel(delta_tau, _frozen(P), h.grid)


def total_mass(kernel, q0):
    """Probability that a particle started at grid index ``q0`` still exists."""
    return float(np.sum(kernel.matrix[:, q0]) * kernel.grid.cell_volume)


@dataclass(frozen=True, eq=False)
class PathSample:
    slices: np.ndarray = field(repr=False)
    euclidean_action: float
    survived: bool
    seed_id: int


@dataclass(frozen=True)
class EnsembleTally:
    n_total: int
    n_survived: int

    @property
    def survival_ratio(self):
        return self.n_survived / self.n_total

    @property
    def binomial_stderr(self):
        p = self.survival_ratio
        return math.sqrt(p * (1.0 - p) / self.n_total)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Result of :func:`sample_paths`.

    Arrays are indexed by path. ``paths`` is only populated when sampling was
    asked to keep full trajectories; endpoints, survival flags and actions are
    always kept. ``energy_shift`` is the constant subtracted from V for the
    killing rule (non-zero only when V dips below 0).
    """

    grid: object = field(repr=False)
    source: int
    delta_tau: float
    n_slices: int
    seed: int
    hbar: float
    endpoints: np.ndarray = field(repr=False)
    survived: np.ndarray = field(repr=False)
    actions: np.ndarray = field(repr=False)
    killed_at: np.ndarray = field(repr=False)
    energy_shift: float = 0.0
    paths: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.survived)

    def __getitem__(self, i):
        if self.paths is None:
            raise ValueError("trajectories were not stored; sample with store_paths=True")
        return PathSample(self.paths[i], float(self.actions[i]), bool(self.survived[i]), int(i))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def tally(self):
        return EnsembleTally(len(self.survived), int(np.count_nonzero(self.survived)))


def path_generator(seed, index):
    """Counter-based stream for path ``index``: Philox keyed by ``seed``.

    The path index occupies the top counter word, so each path's stream is
    fixed by ``(seed, index)`` alone and independent of how paths are batched.
    """
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, index]))


def _simulate_block(h, start_point, delta_tau, M, seed, first, last, v_shift, store):
    dims = h.grid.dims
    eps = delta_tau / M
    b = last - first
    Z = np.empty((b, M, dims))
    U = np.empty((b, M))
    for row, index in enumerate(range(first, last)):
        rng = path_generator(seed, index)
        Z[row] = rng.standard_normal((M, dims))
        U[row] = rng.random(M)

    sigma = math.sqrt(h.hbar * eps / h.mass)
    x = np.empty((b, M + 1, dims))
    x[:, 0] = start_point
    x[:, 1:] = start_point + np.cumsum(sigma * Z, axis=1)
    x = h.grid.wrap(x)

    V = h.potential.evaluate(x, h.grid, h.mass)
    survive = U < np.exp(-0.5 * eps * (V[:, :-1] + V[:, 1:] - 2.0 * v_shift) / h.hbar)
    survived = np.all(survive, axis=1)
    killed_at = np.where(survived, -1, np.argmin(survive, axis=1))
    actions = path_action(x, h, delta_tau)
    return x[:, -1].copy(), survived, actions, killed_at, (x if store else None)


def sample_paths(
    h,
    q0,
    delta_tau=1.0,
    slices=64,
    n=1000,
    seed=0,
    store_paths=False,
    block_size=4096,
    n_jobs=1,
):
    """Sample ``n`` killed Gaussian walks started at grid point ``q0``.

    Free increments have variance ``hbar*eps/m`` per axis and slice. After the
    step from slice k to k+1 the walk survives with probability
    ``exp(-eps (V_k + V_{k+1}) / (2 hbar))`` (trapezoid rule, matching the
    action), with V shifted up by ``-min(V)`` if it is anywhere negative.

    Path ``i`` draws from ``path_generator(seed, i)``, so results are
    bitwise reproducible and independent of ``block_size`` and ``n_jobs``.

    Returns:
        A :class:`PathEnsemble`; ``ensemble.tally`` gives the survival counts.
    """
    delta_tau = check_time(delta_tau, "delta_tau")
    M = check_count(slices, "slices")
    n = check_count(n, "n")
    seed = check_count(seed, "seed", minimum=0)
    block_size = check_count(block_size, "block_size")
    grid = h.grid
    q0 = int(q0)
    if not 0 <= q0 < grid.n_points:
        raise IndexError(f"q0 must index a grid point, got {q0}")
    start_point = grid.coordinates[q0]

    V_grid = h.potential_samples
    if not np.all(np.isfinite(V_grid)):
        raise InvalidPotentialError("potential has non-finite samples")
    v_shift = min(0.0, float(np.min(V_grid)))

    bounds = [(lo, min(lo + block_size, n)) for lo in range(0, n, block_size)]

    def run(bound):
        return _simulate_block(h, start_point, delta_tau, M, seed, *bound, v_shift, store_paths)

    if n_jobs == 1 or len(bounds) == 1:
        blocks = [run(bd) for bd in bounds]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            blocks = list(pool.map(run, bounds))

    endpoints, survived, actions, killed_at, paths = zip(*blocks)
    return PathEnsemble(
        grid=grid,
        source=q0,
        delta_tau=delta_tau,
        n_slices=M,
        seed=seed,
        hbar=h.hbar,
        endpoints=_frozen(np.concatenate(endpoints)),
        survived=_frozen(np.concatenate(survived)),
        actions=_frozen(np.concatenate(actions)),
        killed_at=_frozen(np.concatenate(killed_at)),
        energy_shift=v_shift,
        paths=_frozen(np.concatenate(paths)) if store_paths else None,
    )


@dataclass(frozen=True, eq=False)
class KernelEstimate:
    """Monte Carlo estimate of one kernel column with binomial standard errors."""

    source: int
    delta_tau: float
    density: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    n_total: int
    cell_volume: float
    weight: float = 1.0

    @property
    def mass(self):
        return float(np.sum(self.density) * self.cell_volume)

    @property
    def mass_stderr(self):
        p = np.sum(self.counts) / self.n_total
        return self.weight * math.sqrt(p * (1.0 - p) / self.n_total)

    @property
    def occupied(self):
        return self.counts > 0


def mc_kernel_estimate(samples, grid=None):
    """Histogram surviving endpoints into grid cells.

    The density in cell j is ``count_j / (n * dv)``, rescaled by
    ``exp(-energy_shift * dtau / hbar)`` when the sampler shifted V, so the
    estimate targets the kernel of the unshifted Hamiltonian.
    """
    if samples is None or len(samples) == 0:
        raise EmptyEnsembleError("cannot estimate a kernel from zero samples")
    grid = samples.grid if grid is None else grid
    n = len(samples)
    idx = grid.nearest_index(samples.endpoints[samples.survived])
    counts = np.bincount(np.atleast_1d(idx), minlength=grid.n_points)
    p = counts / n
    weight = math.exp(-samples.energy_shift * samples.delta_tau / samples.hbar)
    dv = grid.cell_volume
    return KernelEstimate(
        source=samples.source,
        delta_tau=samples.delta_tau,
        density=_frozen(weight * p / dv),
        stderr=_frozen(weight * np.sqrt(p * (1.0 - p) / n) / dv),
        counts=_frozen(counts),
        n_total=n,
        cell_volume=dv,
        weight=weight,
    )
