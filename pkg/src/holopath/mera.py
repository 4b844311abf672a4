"""Binary MERA over qubits, classicalization, and bit accounting.

Networks are stored top-down. Each layer embeds every qubit into two with an
isometry adjoint ``W^dagger`` (qubit ``i`` -> qubits ``2i, 2i+1``) and then
applies entanglers ``U^dagger`` on the pairs ``(2i+1, 2i+2 mod n)`` that
straddle neighbouring isometries. A network with ``n = k * 2**L`` bottom
qubits (``k`` odd) has ``L`` layers under a ``k``-qubit top state; for a power
of two that is ``log2(n)`` layers and ``n - 1`` disentanglers.

Qubit 0 is the most significant bit of a computational-basis index.
"""

from dataclasses import dataclass, field
import itertools
import math

import networkx as nx
import numpy as np

from ._validation import check_positive, check_state, check_square
from .exceptions import NegativeActionError, NetworkSizeError, UnnormalizedStateError
from .paths import BIT_FACTOR

MAX_QUBITS = 16
CONSTRAINT_TOL = 1e-12

# W^dagger|a> = |a>|0>  (IDENTITY) and |a>|a>  (COPY)
IDENTITY_ISOMETRY = np.array([[1, 0, 0, 0], [0, 0, 1, 0]], dtype=complex)
COPY_ISOMETRY = np.array([[1, 0, 0, 0], [0, 0, 0, 1]], dtype=complex)
IDENTITY_DISENTANGLER = np.eye(4, dtype=complex)
# gate H (x) 1 followed by CNOT: |00> -> (|00> + |11>)/sqrt(2)
BELL_GATE = np.array(
    [[1, 0, 1, 0], [0, 1, 0, 1], [0, 1, 0, -1], [1, 0, -1, 0]], dtype=complex
) / math.sqrt(2)
# networks apply U^dagger going down, so the stored tensor is the gate's adjoint
BELL_ENTANGLER = BELL_GATE.conj().T.copy()


def _rng(seed):
    return np.random.default_rng(seed)


def _haar_unitary(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(A)
    phases = np.diagonal(R) / np.abs(np.diagonal(R))
    return Q * phases


def random_isometry(seed=None):
    """Random 2x4 isometry ``W`` with ``W W^dagger = 1``."""
    # rows of W are the first two columns of a Haar unitary, conjugated
    return _haar_unitary(_rng(seed), 4)[:, :2].conj().T.copy()


def random_disentangler(seed=None):
    """Haar-random 4x4 unitary."""
    return _haar_unitary(_rng(seed), 4)


def isometry_residuals(W):
    """``(||W W^dagger - 1||, ||P^2 - P||)`` with ``P = W^dagger W`` (max norm)."""
    W = np.asarray(W)
    if W.shape != (2, 4):
        raise ValueError(f"isometry must be 2x4, got {W.shape}")
    P = W.conj().T @ W
    return (
        float(np.max(np.abs(W @ W.conj().T - np.eye(2)))),
        float(np.max(np.abs(P @ P - P))),
    )


def unitary_residual(U):
    U = check_square(U, "disentangler", size=4)
    eye = np.eye(4)
    return float(
        max(np.max(np.abs(U.conj().T @ U - eye)), np.max(np.abs(U @ U.conj().T - eye)))
    )


@dataclass(frozen=True, eq=False)
class Layer:
    """One renormalization step: ``n`` isometries then ``n`` disentanglers.

    ``n`` is the qubit count entering the layer from above; the layer outputs
    ``2n`` qubits. Seeds are kept (``None`` for presets) for serialization.
    """

    isometries: tuple
    disentanglers: tuple
    isometry_seeds: tuple = None
    disentangler_seeds: tuple = None

    @property
    def n_in(self):
        return len(self.isometries)

    @property
    def n_out(self):
        return 2 * len(self.isometries)

    def disentangler_pairs(self):
        n = self.n_out
        return [(2 * i + 1, (2 * i + 2) % n) for i in range(len(self.disentanglers))]


@dataclass(frozen=True, eq=False)
class MeraNetwork:
    """Truncated binary MERA with an explicit top state on ``n_top`` qubits."""

    layers: tuple
    top_state: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0], dtype=complex))

    def __post_init__(self):
        dim = len(self.top_state)
        if dim < 2 or dim & (dim - 1):
            raise NetworkSizeError(f"top state length must be a power of 2, got {dim}")
        top = check_state(self.top_state)
        object.__setattr__(self, "top_state", top)
        n_in = self.n_top
        for layer in self.layers:
            if layer.n_in != n_in or len(layer.disentanglers) != n_in:
                raise NetworkSizeError("layer arities must double the qubit count each layer")
            n_in = layer.n_out
        if n_in > MAX_QUBITS:
            raise NetworkSizeError(f"{n_in} bottom qubits exceeds the cap of {MAX_QUBITS}")

    @property
    def n_top(self):
        return int(len(self.top_state)).bit_length() - 1

    @property
    def n_bottom_qubits(self):
        return self.layers[-1].n_out if self.layers else self.n_top

    @property
    def site_count(self):
        """A_TN: total number of disentanglers (sites)."""
        return sum(len(layer.disentanglers) for layer in self.layers)

    @classmethod
    def _build(cls, n_bottom, make_w, make_u, top_state=None, seeds=None):
        n, n_layers = _layer_count(n_bottom)
        if top_state is None:
            top_state = np.zeros(2**n, dtype=complex)
            top_state[0] = 1.0
        layers = []
        for depth in range(n_layers):
            w_seeds = u_seeds = None
            if seeds is not None:
                w_seeds = tuple(next(seeds) for _ in range(n))
                u_seeds = tuple(next(seeds) for _ in range(n))
                ws = tuple(make_w(s) for s in w_seeds)
                us = tuple(make_u(s) for s in u_seeds)
            else:
                ws = tuple(make_w(depth, i) for i in range(n))
                us = tuple(make_u(depth, i) for i in range(n))
            layers.append(Layer(ws, us, w_seeds, u_seeds))
            n *= 2
        return cls(tuple(layers), np.asarray(top_state, dtype=complex))

    @classmethod
    def random(cls, n_bottom, seed=0, top_state=None):
        """Network of Haar-random tensors; tensor k uses seed ``seed * 10**6 + k``."""
        seeds = itertools.count(seed * 10**6)
        return cls._build(n_bottom, random_isometry, random_disentangler, top_state, seeds)

    @classmethod
    def identity(cls, n_bottom, top_state=None):
        """Trivial network: top qubit j lands on qubit ``j * 2**L``, others in |0>."""
        return cls._build(
            n_bottom,
            lambda d, i: IDENTITY_ISOMETRY,
            lambda d, i: IDENTITY_DISENTANGLER,
            top_state,
        )

    @classmethod
    def bell(cls, n_bottom):
        """Every entangler is the Bell gate, isometries are trivial embeddings.

        Each site branches the computational-basis support in two without
        interference, so the classicalized output carries exactly one bit per
        site (``site_count`` bits). For ``n_bottom = 2`` the output is a
        single Bell pair; for larger networks use :meth:`bell_pairs` to get a
        product of pairs.
        """
        return cls._build(
            n_bottom,
            lambda d, i: IDENTITY_ISOMETRY,
            lambda d, i: BELL_ENTANGLER,
        )

    @classmethod
    def bell_pairs(cls, n_bottom):
        """Product of ``n_bottom / 2`` Bell pairs on qubits ``(2i+1, 2i+2 mod n)``.

        Only bottom-layer entanglers are Bell gates; higher layers are
        identities so every bottom pair starts from |00>.
        """
        last = _layer_count(n_bottom)[1] - 1
        return cls._build(
            n_bottom,
            lambda d, i: IDENTITY_ISOMETRY,
            lambda d, i: BELL_ENTANGLER if d == last else IDENTITY_DISENTANGLER,
        )


def _layer_count(n_bottom):
    """Split ``n_bottom = n_top * 2**layers`` with ``n_top`` odd."""
    if isinstance(n_bottom, bool) or not isinstance(n_bottom, (int, np.integer)):
        raise NetworkSizeError(f"n_bottom must be an integer, got {n_bottom!r}")
    if n_bottom < 2 or n_bottom % 2:
        raise NetworkSizeError(f"n_bottom must be even and >= 2, got {n_bottom}")
    if n_bottom > MAX_QUBITS:
        raise NetworkSizeError(f"{n_bottom} bottom qubits exceeds the cap of {MAX_QUBITS}")
    n_top, layers = int(n_bottom), 0
    while n_top % 2 == 0:
        n_top //= 2
        layers += 1
    return n_top, layers


def _apply_two_qubit(psi, gate, a, b):
    """Apply a 4x4 ``gate`` to qubits ``(a, b)`` of tensor ``psi``."""
    g = gate.reshape(2, 2, 2, 2)
    out = np.tensordot(g, psi, axes=([2, 3], [a, b]))
    return np.moveaxis(out, [0, 1], [a, b])


def apply_network(net, top_state=None):
    """Generate the bottom-qubit state vector by running the network top-down."""
    if net.n_bottom_qubits > MAX_QUBITS:
        raise NetworkSizeError(f"network exceeds {MAX_QUBITS} qubits")
    top = net.top_state if top_state is None else check_state(top_state, size=2**net.n_top)
    psi = top.reshape((2,) * net.n_top)
    for layer in net.layers:
        n = layer.n_in
        for i in reversed(range(n)):
            embed = layer.isometries[i].conj().T.reshape(2, 2, 2)
            out = np.tensordot(embed, psi, axes=([2], [i]))
            psi = np.moveaxis(out, [0, 1], [i, i + 1])
        for (a, b), U in zip(layer.disentangler_pairs(), layer.disentanglers):
            psi = _apply_two_qubit(psi, U.conj().T, a, b)
    return psi.reshape(-1)


@dataclass(frozen=True, eq=False)
class ClassicalMixedState:
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be non-negative and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    @property
    def n_qubits(self):
        return int(len(self.probabilities)).bit_length() - 1


def classicalize(state):
    """Dephase completely in the computational basis.

    Accepts a normalized state vector or a density matrix; returns the
    diagonal as a :class:`ClassicalMixedState`.
    """
    state = np.asarray(state)
    if state.ndim == 2:
        rho = check_square(state, "density matrix")
        p = np.real(np.diagonal(rho)).copy()
        if abs(p.sum() - 1.0) > 1e-8:
            raise UnnormalizedStateError(f"density matrix trace is {p.sum()!r}")
    else:
        psi = check_state(state)
        p = np.abs(psi) ** 2
    p = np.clip(p, 0.0, None)
    return ClassicalMixedState(p / p.sum())


def measurement_entropy_bits(cms):
    """Shannon entropy of the classical mixture, in bits (0 log 0 = 0)."""
    p = cms.probabilities
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) + 0.0


@dataclass(frozen=True)
class BulkAction:
    h_bits: float
    hbar: float
    action: float
    bit_factor: float = BIT_FACTOR


def bulk_action(h_bits, hbar=1.0):
    """Action ``-hbar ln2 * h_bits`` of a classicalized network."""
    hbar = check_positive(hbar, "hbar")
    if not np.isfinite(h_bits) or h_bits < 0:
        raise NegativeActionError(f"h_bits must be >= 0, got {h_bits!r}")
    return BulkAction(float(h_bits), hbar, -hbar * BIT_FACTOR * float(h_bits) + 0.0)


def combined_action(sites, S, hbar=1.0):
    """Network action plus a path action: ``-hbar ln2 * sites + S``.

    ``sites`` is the measurement entropy in bits or, at maximal entropy, the
    site count A_TN.
    """
    hbar = check_positive(hbar, "hbar")
    if not np.isfinite(sites) or sites < 0:
        raise NegativeActionError(f"site count / entropy must be >= 0, got {sites!r}")
    if not np.isfinite(S) or S < 0:
        raise NegativeActionError(f"path action must be >= 0, got {S!r}")
    return -hbar * BIT_FACTOR * sites + S


def combined_action_in_bits(sites, S, hbar=1.0):
    """Same action written as ``-hbar ln2 (sites - S/(hbar ln2))``."""
    hbar = check_positive(hbar, "hbar")
    if not np.isfinite(sites) or sites < 0 or not np.isfinite(S) or S < 0:
        raise NegativeActionError("site count and path action must be >= 0")
    return -hbar * BIT_FACTOR * (sites - S / (BIT_FACTOR * hbar))


def interval_entropy_bits(state, start, stop):
    """Exact von Neumann entropy (bits) of qubits ``[start, stop)``.

    Builds the reduced density matrix densely and diagonalizes it.
    """
    psi = np.asarray(state, dtype=complex)
    n = int(len(psi)).bit_length() - 1
    if not 0 <= start <= stop <= n:
        raise ValueError(f"interval [{start}, {stop}) outside {n} qubits")
    ell = stop - start
    if ell in (0, n):
        return 0.0
    t = psi.reshape(2**start, 2**ell, 2 ** (n - stop))
    t = np.moveaxis(t, 1, 0).reshape(2**ell, -1)
    # a pure state has equal entropy on both sides; diagonalize the smaller one
    rho = t @ t.conj().T if t.shape[0] <= t.shape[1] else t.T @ t.conj()
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log2(w))) + 0.0


def network_graph(net):
    """Undirected graph of tensors; every edge is one qubit leg (1 bit).

    Nodes: ``"top"``, ``("w", layer, i)``, ``("u", layer, i)`` and the open
    bottom legs ``("leg", q)``. Parallel legs between the same tensors add up
    in the ``capacity`` attribute.
    """
    G = nx.Graph()

    def link(a, b):
        if G.has_edge(a, b):
            G[a][b]["capacity"] += 1
        else:
            G.add_edge(a, b, capacity=1)

    owner = {j: "top" for j in range(net.n_top)}
    for depth, layer in enumerate(net.layers):
        new_owner = {}
        for i in range(layer.n_in):
            node = ("w", depth, i)
            link(owner[i], node)
            new_owner[2 * i] = node
            new_owner[2 * i + 1] = node
        for k, (a, b) in enumerate(layer.disentangler_pairs()):
            node = ("u", depth, k)
            link(new_owner[a], node)
            link(new_owner[b], node)
            new_owner[a] = node
            new_owner[b] = node
        owner = new_owner
    for q in range(net.n_bottom_qubits):
        link(owner[q], ("leg", q))
    return G


def minimal_cut_entropy(net, start, stop):
    """Fewest qubit legs separating bottom qubits ``[start, stop)`` from the rest.

    Each leg carries at most one bit, so the result upper-bounds the
    interval's entanglement entropy. Empty and full intervals return 0.
    """
    n = net.n_bottom_qubits
    if not 0 <= start <= stop <= n:
        raise ValueError(f"interval [{start}, {stop}) outside {n} qubits")
    if stop - start in (0, n):
        return 0
    G = network_graph(net)
    G.add_node("source")
    G.add_node("sink")
    for q in range(n):
        G.add_edge(("leg", q), "source" if start <= q < stop else "sink", capacity=n + 1)
    value, _ = nx.minimum_cut(G, "source", "sink")
    return int(round(value))


def exhaustive_cut_entropy(net, start, stop):
    """Brute-force minimum over every tensor bipartition (tiny networks only)."""
    n = net.n_bottom_qubits
    if stop - start in (0, n):
        return 0
    G = network_graph(net)
    inner = [v for v in G.nodes if not (isinstance(v, tuple) and v[0] == "leg")]
    if len(inner) > 20:
        raise NetworkSizeError("exhaustive search is limited to 20 tensors")
    best = None
    for mask in range(2 ** len(inner)):
        side = {v for k, v in enumerate(inner) if mask >> k & 1}
        side.update(("leg", q) for q in range(start, stop))
        cut = sum(d["capacity"] for a, b, d in G.edges(data=True) if (a in side) != (b in side))
        best = cut if best is None else min(best, cut)
    return best


def network_to_dict(net):
    """JSON-ready description: explicit entries as row-major ``[re, im]`` pairs."""

    def encode(matrix, seed):
        entry = {"matrix": [[float(z.real), float(z.imag)] for z in np.ravel(matrix)]}
        if seed is not None:
            entry["seed"] = int(seed)
        return entry

    layers = []
    for layer in net.layers:
        w_seeds = layer.isometry_seeds or (None,) * layer.n_in
        u_seeds = layer.disentangler_seeds or (None,) * len(layer.disentanglers)
        layers.append(
            {
                "isometries": [encode(W, s) for W, s in zip(layer.isometries, w_seeds)],
                "disentanglers": [encode(U, s) for U, s in zip(layer.disentanglers, u_seeds)],
            }
        )
    return {
        "n_bottom_qubits": net.n_bottom_qubits,
        "site_count": net.site_count,
        "top_state": [[float(z.real), float(z.imag)] for z in net.top_state],
        "layers": layers,
    }


def network_from_dict(data):
    """Inverse of :func:`network_to_dict`; an entry may give a seed instead of a matrix."""

    def decode(entry, shape, factory):
        if "matrix" in entry:
            pairs = np.asarray(entry["matrix"], dtype=float)
            return (pairs[:, 0] + 1j * pairs[:, 1]).reshape(shape), entry.get("seed")
        return factory(entry["seed"]), entry["seed"]

    layers = []
    for layer_data in data["layers"]:
        ws, w_seeds = zip(*[decode(e, (2, 4), random_isometry) for e in layer_data["isometries"]])
        us, u_seeds = zip(*[decode(e, (4, 4), random_disentangler) for e in layer_data["disentanglers"]])
        layers.append(
            Layer(
                ws,
                us,
                None if all(s is None for s in w_seeds) else w_seeds,
                None if all(s is None for s in u_seeds) else u_seeds,
            )
        )
    top = np.asarray(data.get("top_state", [[1, 0], [0, 0]]), dtype=float)
    return MeraNetwork(tuple(layers), top[:, 0] + 1j * top[:, 1])
