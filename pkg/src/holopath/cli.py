"""Command-line experiments.

Each subcommand builds the objects it needs, runs its numerical checks and
writes three files to ``--out``:

* ``<experiment>_report.{csv,json}``: one row per check with the measured
  value, tolerance, oracle and pass flag;
* ``<experiment>_data.{csv,json}``: the experiment's table;
* ``<experiment>_meta.json``: the sidecar (config, seed, build, timestamp).

CSV bodies depend only on the config, so reruns are byte-identical.
Exit status: 0 all checks pass, 1 a check failed, 2 usage/config error.
"""

import argparse
from dataclasses import asdict, dataclass, fields
import datetime
import json
import math
import os
import subprocess
import sys
import time

import numpy as np

from . import __version__
from .estimators import make_potential
from .exceptions import ConfigError
from .mera import (
    MeraNetwork,
    apply_network,
    bulk_action,
    classicalize,
    interval_entropy_bits,
    isometry_residuals,
    measurement_entropy_bits,
    minimal_cut_entropy,
    unitary_residual,
)
from .paths import mc_kernel_estimate, sample_paths, total_mass, trotter_kernel
from .serialization import write_table_csv
from .spectral import (
    BOUNDARIES,
    POTENTIAL_KINDS,
    SpatialGrid,
    build_hamiltonian,
    diagonalize,
    imaginary_kernel,
    real_kernel,
    spectral_propagator,
)
from .superselection import (
    build_planck_basis,
    cell_propagator,
    commutator_norm,
    project_observable,
    verify_ssr,
)

EXPERIMENTS = ("spectral", "trotter", "mc", "mass", "mera", "ssr", "wick")
PRESETS = tuple(k for k in POTENTIAL_KINDS if k != "tabulated")
CHECK_FIELDS = ["check", "measured", "comparison", "tolerance", "oracle", "passed"]

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


@dataclass
class ExperimentConfig:
    experiment: str
    points: int = 128
    extent: float = 20.0
    dims: int = 1
    boundary: str = "periodic"
    potential: str = "harmonic"
    omega: float = 1.0
    depth: float = 1.0
    width: float = 4.0
    value: float = 0.5
    mass: float = 1.0
    hbar: float = 1.0
    delta_tau: float = 1.0
    delta_t: float = 1.0
    slices: int = 256
    paths: int = 100000
    source: int = -1
    seed: int = 0
    qubits: int = 12
    n: int = 64
    sq: int = 8
    ssr_extent: float = 16.0
    out: str = "holopath-out"
    format: str = "csv"

    @classmethod
    def from_mapping(cls, mapping):
        """Validate and coerce a flat mapping; string values are parsed."""
        known = {f.name: f for f in fields(cls)}
        values = {}
        for raw_key, raw in mapping.items():
            key = raw_key.replace("-", "_")
            if key not in known:
                raise ConfigError(raw_key, "unknown key")
            caster = known[key].type
            try:
                values[key] = caster(raw)
            except (TypeError, ValueError):
                raise ConfigError(raw_key, f"cannot parse {raw!r} as {caster.__name__}") from None
        if "experiment" not in values:
            raise ConfigError("experiment", "missing")
        config = cls(**values)
        config.validate()
        return config

    def validate(self):
        def need(cond, key, message):
            if not cond:
                raise ConfigError(key, message)

        need(self.experiment in EXPERIMENTS, "experiment", f"must be one of {EXPERIMENTS}")
        need(self.points >= 2, "points", "must be >= 2")
        need(self.dims in (1, 2), "dims", "must be 1 or 2")
        need(self.extent > 0 and math.isfinite(self.extent), "extent", "must be positive")
        need(self.boundary in BOUNDARIES, "boundary", f"must be one of {BOUNDARIES}")
        need(self.potential in PRESETS, "potential", f"must be one of {PRESETS}")
        for key in ("omega", "depth", "width", "value", "delta_tau", "delta_t"):
            need(math.isfinite(getattr(self, key)), key, "must be finite")
        need(self.mass > 0, "mass", "must be positive")
        need(self.hbar > 0, "hbar", "must be positive")
        need(self.delta_tau >= 0, "delta_tau", "must be >= 0")
        need(self.delta_t >= 0, "delta_t", "must be >= 0")
        need(self.slices >= 1, "slices", "must be >= 1")
        need(self.paths >= 1, "paths", "must be >= 1")
        need(self.seed >= 0, "seed", "must be >= 0")
        need(-1 <= self.source < self.points**self.dims, "source", "must index a grid point (-1 = centre)")
        need(2 <= self.qubits <= 16 and self.qubits % 2 == 0, "qubits", "must be even, 2..16")
        need(self.n >= 1, "n", "must be >= 1")
        need(self.sq >= 1 and self.n % self.sq == 0, "sq", f"must divide n={self.n}")
        need(self.ssr_extent > 0, "ssr_extent", "must be positive")
        need(self.format in ("csv", "json"), "format", "must be csv or json")
        if self.experiment == "trotter":
            need(self.slices >= 16, "slices", "trotter convergence study needs slices >= 16")


@dataclass
class Check:
    check: str
    measured: float
    comparison: str
    tolerance: float
    oracle: str

    @property
    def passed(self):
        m, t = self.measured, self.tolerance
        if not math.isfinite(m):
            return False
        return {"<=": m <= t, ">=": m >= t, "<": m < t, "==": m == t}[self.comparison]

    def row(self):
        return {**asdict(self), "passed": self.passed}


def _grid(config):
    return SpatialGrid(config.points, config.extent, config.dims, config.boundary)


def _hamiltonian(config, kind=None):
    pot = make_potential(
        kind or config.potential, config.omega, config.depth, config.width, config.value
    )
    return build_hamiltonian(_grid(config), pot, config.mass, config.hbar)


def _source(config, grid):
    return grid.center_index() if config.source < 0 else config.source


def _relative_error(approx, oracle, floor=1e-8):
    """Max entrywise relative error over entries above ``floor * max|oracle|``."""
    mag = np.abs(oracle)
    keep = mag >= floor * mag.max()
    return float(np.max(np.abs(approx - oracle)[keep] / mag[keep]))


def run_spectral(config):
    h = _hamiltonian(config)
    spec = diagonalize(h)
    H = h.matrix
    E = spec.eigenvalues
    checks = [
        Check("orthonormality", float(np.max(np.abs(spec.gram() - np.eye(len(E))))), "<=", 1e-10, "Gram matrix under dq^dims = identity"),
        Check(
            "reconstruction",
            float(np.linalg.norm(spec.reconstruct() - H) / np.linalg.norm(H)),
            "<=",
            1e-8,
            "sum_n E_n phi_n phi_n^T dq^dims = H (relative Frobenius)",
        ),
    ]
    grid = h.grid
    if config.potential in ("free", "constant") and config.boundary == "periodic":
        c = config.hbar**2 / (2 * config.mass * grid.spacing**2)
        k = np.arange(config.points)
        e1 = 2 * c * (1 - np.cos(2 * np.pi * k / config.points))
        exact = np.sort((e1[:, None] + e1[None, :]).ravel() if config.dims == 2 else e1)
        if config.potential == "constant":
            exact = exact + config.value
        checks.append(Check("circulant_spectrum", float(np.max(np.abs(E - exact))), "<=", 1e-10 * max(1.0, exact.max()), "analytic DFT eigenvalues of the periodic stencil"))
    if config.potential == "harmonic" and config.dims == 1:
        levels = np.arange(3)
        hw = config.hbar * config.omega
        correction = -(grid.spacing**2) * config.mass * config.omega**2 * (2 * levels**2 + 2 * levels + 1) / 32
        target = hw * (levels + 0.5) + correction
        checks.append(Check("harmonic_levels", float(np.max(np.abs(E[:3] - target))), "<=", 1e-4, "hbar*omega*(n+1/2) with leading 3-point stencil correction"))
    rows = [{"n": i, "energy": float(e)} for i, e in enumerate(E)]
    return checks, (rows, ["n", "energy"]), {"N": config.points, "potential": config.potential}


def run_trotter(config):
    h = _hamiltonian(config)
    oracle = imaginary_kernel(diagonalize(h), config.delta_tau).matrix
    Ms = [16 * 2**k for k in range(int(math.log2(config.slices // 16)) + 1)]
    kernels = [trotter_kernel(h, config.delta_tau, M).matrix for M in Ms]
    errors = [_relative_error(P, oracle) for P in kernels]
    rows = [{"slices": M, "max_relative_error": e} for M, e in zip(Ms, errors)]
    if h.potential.is_free or h.potential.kind == "constant":
        # the split is exact, so only product roundoff remains; scale by the peak
        scaled = float(np.max(np.abs(kernels[-1] - oracle)) / np.max(np.abs(oracle)))
        checks = [Check("trotter_vs_spectral_scaled", scaled, "<=", 1e-10, "commuting split is exact; spectral kernel")]
    else:
        checks = [Check(f"trotter_vs_spectral_M{Ms[-1]}", errors[-1], "<=", 1e-3, "spectral imaginary kernel, entries >= 1e-8 max")]
        if len(Ms) >= 3:
            order = -np.polyfit(np.log(Ms), np.log(errors), 1)[0]
            checks.append(Check("convergence_order_deviation", float(abs(order - 2.0)), "<=", 0.2, f"least-squares slope {order:.4f} vs 2 (Strang)"))
            monotone = float(max(np.diff(errors)))
            checks.append(Check("error_decreases_in_M", monotone, "<", 0.0, "successive error differences"))
    return checks, (rows, ["slices", "max_relative_error"]), {"N": config.points, "M": config.slices, "potential": config.potential}


def run_mc(config):
    h = _hamiltonian(config)
    grid = h.grid
    q0 = _source(config, grid)
    ensemble = sample_paths(h, q0, config.delta_tau, config.slices, config.paths, config.seed)
    est = mc_kernel_estimate(ensemble)
    column = trotter_kernel(h, config.delta_tau, config.slices).column(q0)
    occ = est.occupied
    z = np.abs(est.density - column)[occ] / est.stderr[occ]
    within = float(np.mean(z <= 4.0))
    t_mass = float(np.sum(column) * grid.cell_volume)
    tally = ensemble.tally
    checks = [
        Check("bins_within_4sigma", within, ">=", 0.95, "Trotter kernel column at the same M (occupied bins)"),
    ]
    if est.mass_stderr > 0:
        checks.append(Check("mass_deviation_sigma", abs(est.mass - t_mass) / est.mass_stderr, "<=", 4.0, "Trotter column mass"))
    else:
        checks.append(Check("mass_deviation", abs(est.mass - t_mass), "<=", 1e-10, "Trotter column mass (no killing, zero variance)"))
    if h.potential.kind == "constant":
        expected = math.exp(-config.value * config.delta_tau / config.hbar)
        sigma = math.sqrt(expected * (1 - expected) / tally.n_total)
        checks.append(Check("constant_survival_sigma", abs(tally.survival_ratio - expected) / sigma, "<=", 4.0, "exp(-c dtau/hbar) binomial"))
    if h.potential.is_free:
        checks.append(Check("free_survival", tally.survival_ratio, "==", 1.0, "no killing without potential"))
    rows = [
        {"index": j, "q": float(grid.coordinates[j, 0]) if grid.dims == 1 else j, "count": int(est.counts[j]), "density": float(est.density[j]), "stderr": float(est.stderr[j]), "trotter": float(column[j])}
        for j in range(grid.n_points)
    ]
    meta = {"N": config.points, "M": config.slices, "paths": config.paths, "survival_ratio": tally.survival_ratio, "potential": config.potential}
    return checks, (rows, ["index", "q", "count", "density", "stderr", "trotter"]), meta


def run_mass(config):
    h = _hamiltonian(config)
    kernel = imaginary_kernel(diagonalize(h), config.delta_tau)
    masses = np.sum(kernel.matrix, axis=0) * kernel.grid.cell_volume
    q0 = _source(config, kernel.grid)
    checks = []
    V = h.potential_samples
    if h.potential.is_free:
        checks.append(Check("total_mass_deviation", float(np.max(np.abs(masses - 1.0))), "<=", 1e-10, "normalization of the free kernel"))
    elif h.potential.kind == "constant":
        expected = math.exp(-config.value * config.delta_tau / config.hbar)
        checks.append(Check("total_mass_deviation", float(np.max(np.abs(masses - expected))), "<=", 1e-10, "exp(-c dtau/hbar)"))
    if np.all(V >= 0) and np.any(V > 0):
        checks.append(Check("max_total_mass", float(np.max(masses)), "<", 1.0, "annihilation by V >= 0"))
    checks.append(Check("total_mass_at_source", float(masses[q0]), ">=", 0.0, "probability is non-negative"))
    rows = [{"source": j, "total_mass": float(m)} for j, m in enumerate(masses)]
    return checks, (rows, ["source", "total_mass"]), {"N": config.points, "potential": config.potential, "total_mass": float(masses[q0])}


def run_wick(config):
    h = _hamiltonian(config)
    spec = diagonalize(h)
    K = real_kernel(spec, config.delta_t)
    continued = spectral_propagator(spec, 1j * config.delta_t)
    scale = float(np.max(np.abs(K.matrix)))
    checks = [
        Check("wick_consistency", float(np.max(np.abs(continued - K.matrix))), "<=", 1e-12, "spectral sum at complex time i*dt"),
        Check("unitarity", K.unitarity_error(), "<=", 1e-10, "(K dv)^dagger (K dv) = identity"),
        Check("symmetry", float(np.max(np.abs(K.matrix - K.matrix.T))) / scale, "<=", 1e-12, "real eigenvectors give K = K^T"),
    ]
    q0 = _source(config, h.grid)
    col = K.column(q0)
    rows = [{"index": j, "re": float(z.real), "im": float(z.imag)} for j, z in enumerate(col)]
    return checks, (rows, ["index", "re", "im"]), {"N": config.points, "potential": config.potential}


def run_mera(config):
    n = config.qubits
    net = MeraNetwork.random(n, config.seed)
    residuals = [0.0]
    for layer in net.layers:
        residuals.extend(max(isometry_residuals(W)) for W in layer.isometries)
        residuals.extend(unitary_residual(U) for U in layer.disentanglers)
    psi = apply_network(net)
    rows = []
    slack = math.inf
    for a in range(n + 1):
        for b in range(a + 1, n + 1):
            cut = minimal_cut_entropy(net, a, b)
            s = interval_entropy_bits(psi, a, b)
            slack = min(slack, cut - s)
            rows.append({"start": a, "stop": b, "min_cut_bits": cut, "entropy_bits": s})
    h_random = measurement_entropy_bits(classicalize(psi))
    bell2 = measurement_entropy_bits(classicalize(apply_network(MeraNetwork.bell(2))))
    pairs = MeraNetwork.bell_pairs(n)
    h_pairs = measurement_entropy_bits(classicalize(apply_network(pairs)))
    checks = [
        Check("tensor_constraint_residual", float(max(residuals)), "<=", 1e-12, "W W^dagger = 1, (W^dagger W)^2 = W^dagger W, U^dagger U = 1"),
        Check("state_norm_deviation", abs(float(np.linalg.norm(psi)) - 1.0), "<=", 1e-12, "isometric composition"),
        Check("min_cut_minus_entropy", float(slack), ">=", -1e-12, "dense reduced density matrix entropy"),
        Check("bell_pair_entropy_deviation", abs(bell2 - 1.0), "<=", 1e-12, "one bit per classicalized Bell pair"),
        Check("bell_pairs_entropy_deviation", abs(h_pairs - n // 2), "<=", 1e-12, f"{n // 2} pairs -> {n // 2} bits"),
    ]
    meta = {
        "qubits": n,
        "site_count": net.site_count,
        "random_measurement_entropy_bits": h_random,
        "random_bulk_action": bulk_action(h_random, config.hbar).action,
    }
    return checks, (rows, ["start", "stop", "min_cut_bits", "entropy_bits"]), meta


def run_ssr(config):
    basis = build_planck_basis(config.n, config.sq, config.hbar, config.ssr_extent / config.n)
    rng = np.random.default_rng(config.seed)
    A = rng.standard_normal((config.n, config.n)) + 1j * rng.standard_normal((config.n, config.n))
    O = (A + A.conj().T) / 2
    H = build_hamiltonian(
        SpatialGrid(config.n, config.ssr_extent), make_potential("harmonic", config.omega), config.mass, config.hbar
    ).matrix
    observables = {"random": project_observable(O, basis), "hamiltonian": project_observable(H, basis)}
    rows = []
    worst_static = 0.0
    for name, Op in observables.items():
        off = verify_ssr(Op, basis)
        comm = commutator_norm(Op, basis)
        worst_static = max(worst_static, off, comm)
        rows.append({"observable": name, "mode": "static", "time": 0.0, "max_offdiag": off})
    worst_dyn = 0.0
    for name, Op in observables.items():
        for mode in ("real", "imaginary"):
            for t in (0.25, 0.5, 1.0, 2.0):
                C = cell_propagator(Op, t, mode)
                off = float(np.max(np.abs(C - np.diag(np.diagonal(C)))))
                worst_dyn = max(worst_dyn, off)
                rows.append({"observable": name, "mode": mode, "time": t, "max_offdiag": off})
    h = 2 * math.pi * config.hbar
    checks = [
        Check("projected_offdiag_and_commutator", worst_static, "<=", 1e-12, "cell-basis Kronecker-delta structure"),
        Check("propagator_offdiag", worst_dyn, "<=", 1e-12, "dense expm transformed to the cell basis"),
        Check("cell_area_deviation", abs(basis.cell_area - h), "<=", float(np.spacing(h)), "dQ * dP = 2 pi hbar"),
        Check("unprojected_offdiag", verify_ssr(O, basis), ">=", 1e-6, "negative control: raw random observable"),
    ]
    meta = {"n": config.n, "s_q": config.sq, "cell_width_q": basis.cell_width_q, "cell_width_p": basis.cell_width_p}
    return checks, (rows, ["observable", "mode", "time", "max_offdiag"]), meta


RUNNERS = {
    "spectral": run_spectral,
    "trotter": run_trotter,
    "mc": run_mc,
    "mass": run_mass,
    "mera": run_mera,
    "ssr": run_ssr,
    "wick": run_wick,
}


def _git_describe():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"holopath-{__version__}"


def _write(path_stem, rows, fieldnames, fmt):
    if fmt == "csv":
        write_table_csv(path_stem + ".csv", rows, fieldnames)
    else:
        with open(path_stem + ".json", "w") as fh:
            json.dump(rows, fh, indent=1, default=float)
            fh.write("\n")


def run(config, stream=None):
    """Run one experiment and write its files; returns the exit status."""
    stream = sys.stdout if stream is None else stream
    started = time.perf_counter()
    checks, (rows, fieldnames), extra = RUNNERS[config.experiment](config)
    elapsed = time.perf_counter() - started

    os.makedirs(config.out, exist_ok=True)
    stem = os.path.join(config.out, config.experiment)
    _write(stem + "_report", [c.row() for c in checks], CHECK_FIELDS, config.format)
    _write(stem + "_data", rows, fieldnames, config.format)
    sidecar = {
        "experiment": config.experiment,
        "config": asdict(config),
        "seed": config.seed,
        "M": config.slices,
        "N": config.points,
        "delta_tau": config.delta_tau,
        "potential": config.potential,
        "build": _git_describe(),
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "runtime_seconds": elapsed,
        "results": extra,
        "all_passed": all(c.passed for c in checks),
    }
    with open(stem + "_meta.json", "w") as fh:
        json.dump(sidecar, fh, indent=1, default=float)
        fh.write("\n")

    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {config.experiment}.{c.check}: {c.measured:.6g} {c.comparison} {c.tolerance:.3g} [{c.oracle}]", file=stream)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK_FAILED


def read_config_file(path):
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"line {lineno}", f"expected key = value, got {line!r}")
            values[key.strip()] = value.strip()
    return values


def build_parser():
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--out", help="output directory (default holopath-out)")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--format", choices=("csv", "json"), help="table format (default csv)")

    grid = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    grid.add_argument("--points", "-N", type=int, help="grid points per axis (default 128)")
    grid.add_argument("--extent", type=float, help="domain length per axis (default 20)")
    grid.add_argument("--dims", type=int, choices=(1, 2))
    grid.add_argument("--boundary", choices=BOUNDARIES)
    grid.add_argument("--potential", choices=PRESETS, help="potential preset (default harmonic)")
    grid.add_argument("--omega", type=float)
    grid.add_argument("--depth", type=float, help="square well height outside the well")
    grid.add_argument("--width", type=float, help="square well width")
    grid.add_argument("--value", type=float, help="constant potential value")
    grid.add_argument("--mass", type=float)
    grid.add_argument("--hbar", type=float)
    grid.add_argument("--source", type=int, help="source grid index (default centre)")

    parser = argparse.ArgumentParser(prog="holopath", description="Imaginary-time path integral laboratory.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="experiment", metavar="{" + ",".join(EXPERIMENTS) + "}")
    sub.required = True

    def add(name, help_, parents, extra=()):
        p = sub.add_parser(name, help=help_, parents=parents, argument_default=argparse.SUPPRESS)
        for flag, kwargs in extra:
            p.add_argument(flag, **kwargs)
        return p

    dtau = ("--delta-tau", {"type": float, "dest": "delta_tau"})
    slices = ("--slices", {"type": int, "help": "imaginary-time slices M"})
    add("spectral", "diagonalize a grid Hamiltonian", [common, grid])
    add("trotter", "Trotter transfer matrix vs spectral kernel", [common, grid], [dtau, slices])
    add("mc", "killed-walk Monte Carlo vs Trotter column", [common, grid], [dtau, slices, ("--paths", {"type": int})])
    add("mass", "total probability of the imaginary-time kernel", [common, grid], [dtau])
    add("wick", "real-time amplitude from the spectral sum", [common, grid], [("--delta-t", {"type": float, "dest": "delta_t"})])
    add("mera", "MERA constraints, entropies and min cuts", [common], [("--qubits", {"type": int}), ("--hbar", {"type": float})])
    add(
        "ssr",
        "Planck-cell superselection checks",
        [common],
        [
            ("--n", {"type": int, "help": "Hilbert dimension"}),
            ("--sq", {"type": int, "help": "positions per cell"}),
            ("--extent", {"type": float, "dest": "ssr_extent"}),
            ("--hbar", {"type": float}),
            ("--omega", {"type": float}),
            ("--mass", {"type": float}),
        ],
    )
    return parser


def main(argv=None):
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    try:
        values = read_config_file(args.pop("config")) if "config" in args else {}
        values.update(args)
        config = ExperimentConfig.from_mapping(values)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"holopath: error: invalid config key {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"holopath: error: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
