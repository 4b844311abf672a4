"""Input validation helpers shared by the functional API and the estimators."""

import numbers

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    NegativeTimeError,
    ProbabilityRangeError,
    UnnormalizedStateError,
)

NORM_TOL = 1e-8


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a finite positive number, got {value!r}")
    return float(value)


def check_time(value, name="delta_tau"):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise NegativeTimeError(f"{name} must be a finite real number, got {value!r}")
    if value < 0:
        raise NegativeTimeError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def check_probability(value, name):
    if not isinstance(value, numbers.Real) or not (0.0 <= value <= 1.0):
        raise ProbabilityRangeError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_square(matrix, name="matrix", size=None):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {matrix.shape}")
    if size is not None and matrix.shape[0] != size:
        raise DimensionMismatchError(
            f"{name} must have dimension {size}, got {matrix.shape[0]}"
        )
    return matrix


def check_state(state, size=None, tol=NORM_TOL):
    """Return ``state`` as a complex 1-D array after checking its norm."""
    state = np.asarray(state, dtype=complex)
    if state.ndim != 1:
        raise DimensionMismatchError(f"state must be a vector, got shape {state.shape}")
    if size is not None and state.shape[0] != size:
        raise DimensionMismatchError(
            f"state must have length {size}, got {state.shape[0]}"
        )
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > tol:
        raise UnnormalizedStateError(f"state norm is {norm!r}, expected 1 within {tol}")
    return state


def check_states_2d(X):
    """Coerce ``X`` to a 2-D complex array of row states (sklearn-style input)."""
    X = np.asarray(X, dtype=complex)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D array of states, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite values")
    return X
