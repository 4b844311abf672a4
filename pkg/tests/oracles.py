"""Reference computations that share no code with the package."""

import itertools
import math

import numpy as np


def expm_taylor(A, terms=30):
    """Scaling and squaring with a truncated Taylor series."""
    A = np.asarray(A, dtype=complex)
    norm = np.linalg.norm(A, 1)
    s = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    B = A / 2**s
    result = np.eye(A.shape[0], dtype=complex)
    term = np.eye(A.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ B / k
        result = result + term
    for _ in range(s):
        result = result @ result
    return result


def heat_kernel(q1, q0, tau, mass=1.0, hbar=1.0):
    return math.sqrt(mass / (2 * math.pi * hbar * tau)) * np.exp(
        -mass * (q1 - q0) ** 2 / (2 * hbar * tau)
    )


def circulant_levels(n, spacing, mass=1.0, hbar=1.0):
    c = hbar**2 / (2 * mass * spacing**2)
    k = np.arange(n)
    return np.sort(2 * c * (1 - np.cos(2 * np.pi * k / n)))


def stencil_harmonic_levels(levels, spacing, omega=1.0, mass=1.0, hbar=1.0):
    """Oscillator levels shifted by the leading 3-point stencil error."""
    n = np.asarray(levels, dtype=float)
    exact = hbar * omega * (n + 0.5)
    return exact - spacing**2 * mass * omega**2 * (2 * n**2 + 2 * n + 1) / 32


def entropy_by_svd(psi, start, stop):
    """Interval entropy (bits) from the Schmidt values of a qubit-permuted state."""
    n = int(round(math.log2(len(psi))))
    inside = list(range(start, stop))
    outside = [q for q in range(n) if q not in inside]
    t = np.asarray(psi).reshape((2,) * n).transpose(inside + outside)
    s = np.linalg.svd(t.reshape(2 ** len(inside), -1), compute_uv=False)
    p = s**2
    p = p[p > 1e-15]
    return float(-np.sum(p * np.log2(p)))


def dense_pinching(O, vectors):
    """sum_c |c><c| O |c><c| term by term."""
    out = np.zeros_like(O, dtype=complex)
    for c in range(vectors.shape[1]):
        v = vectors[:, c]
        Pi = np.outer(v, v.conj())
        out += Pi @ O @ Pi
    return out


def brute_force_entropy(p):
    return -sum(x * math.log2(x) for x in p if x > 0)


def all_intervals(n):
    return [(a, b) for a, b in itertools.combinations(range(n + 1), 2)]
