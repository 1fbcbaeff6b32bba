"""Input-validation helpers shared by the estimator and the strategy loops."""

from __future__ import annotations

import numpy as np

from .core import Domain


def check_array(a, *, name: str = "X", ndim: int = 2, n_cols: int | None = None) -> np.ndarray:
    """Coerce to a finite float64 array of the expected rank."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1 and ndim == 2:
        a = a.reshape(1, -1)
    if a.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    if a.size and not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    if n_cols is not None and a.shape[-1] != n_cols:
        raise ValueError(f"{name} must have {n_cols} columns, got {a.shape[-1]}")
    return a


def check_X_y(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = check_array(X, name="X")
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    if y.size and not np.all(np.isfinite(y)):
        raise ValueError("y contains NaN or infinite entries")
    return X, y


def check_domain(domain, dim: int | None = None) -> Domain:
    """Accept a Domain or a (lower, upper) pair; check the dimension."""
    if not isinstance(domain, Domain):
        lower, upper = domain
        domain = Domain(lower, upper)
    if dim is not None and domain.dim != dim:
        raise ValueError(f"domain has dimension {domain.dim}, expected {dim}")
    return domain


def domain_from_data(X: np.ndarray) -> Domain:
    """Fallback box from the data's coordinate ranges (degenerate axes padded)."""
    lower = X.min(axis=0)
    upper = X.max(axis=0)
    flat = upper - lower <= 0
    pad = np.where(flat, np.maximum(1.0, np.abs(lower)) * 1e-6, 0.0)
    return Domain(lower - pad, upper + pad)


def check_seed(seed) -> int:
    if seed is None:
        return 0
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    return seed
