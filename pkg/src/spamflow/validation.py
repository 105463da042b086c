"""Input validation helpers and deterministic seed derivation.

Every public entry point funnels argument checking through these helpers so
error messages stay uniform and the checks stay in one place.
"""

from __future__ import annotations

import hashlib
import numbers

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "check_seed",
    "check_positive_int",
    "check_non_negative_int",
    "check_fraction",
    "check_probability",
    "check_feature_matrix",
    "check_binary_labels",
    "derive_seed",
]


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    return int(seed)


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value <= 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    return int(value)


def check_non_negative_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < 0:
        raise ConfigError(f"{name} must be non-negative, got {value}")
    return int(value)


def check_fraction(value, name: str = "fraction") -> float:
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise ConfigError(f"{name} must be a number in [0, 1], got {value!r}")
    value = float(value)
    if not 0.0 <= value <= 1.0 or value != value:
        raise ConfigError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_probability(value, name: str) -> float:
    return check_fraction(value, name)


def check_feature_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a finite 2-D float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DataError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if X.shape[0] == 0:
        raise DataError(f"{name} must contain at least one row")
    if not np.all(np.isfinite(X)):
        raise DataError(f"{name} contains non-finite values")
    return X


def check_binary_labels(y, n_rows: int, name: str = "y") -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_rows:
        raise DataError(
            f"{name} must be 1-dimensional with {n_rows} entries, got shape {y.shape}"
        )
    y = y.astype(int, copy=False)
    values = set(np.unique(y).tolist())
    if not values <= {0, 1}:
        raise DataError(f"{name} must contain only 0/1, got values {sorted(values)}")
    return y


def derive_seed(*parts) -> int:
    """Stable 32-bit sub-seed from mixed string/int parts.

    Uses SHA-256 rather than hash() so the value is identical across
    processes (str hashing is salted per interpreter).
    """
    key = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")
