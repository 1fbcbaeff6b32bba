"""Low-discrepancy candidate pools, Latin-hypercube initial designs, random shift.

The Sobol generator emits points in natural index order (index 1, 2, ...),
skipping the all-zeros point at index 0, so ``sobol_pool(m)`` is always a
prefix of ``sobol_pool(m')`` for m < m'. Direction numbers come from a bundled
Joe-Kuo style table.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .core import Domain, make_rng
from .validation import check_array, check_domain

_NBITS = 31  # direction numbers scaled to 2^31; indices stay within int64


class DimensionUnsupportedError(ValueError):
    """Requested dimension exceeds the bundled direction-number table."""


@lru_cache(maxsize=1)
def _direction_table() -> list[tuple[int, int, list[int]]]:
    """Parse the bundled table into (degree, a-code, m-values) per dimension >= 2."""
    text = resources.files("egobatch.data").joinpath("sobol_directions.txt").read_text()
    rows = []
    for line in text.strip().splitlines()[1:]:
        parts = [int(tok) for tok in line.split()]
        _, s, a, m = parts[0], parts[1], parts[2], parts[3:]
        rows.append((s, a, m))
    return rows


@lru_cache(maxsize=64)
def _direction_numbers(dim_index: int) -> tuple[int, ...]:
    """Direction numbers v_1..v_NBITS (scaled by 2^NBITS) for one coordinate.

    ``dim_index`` is 0-based; coordinate 0 uses the identity recurrence
    v_j = 2^(NBITS - j), the rest follow the primitive-polynomial recurrence.
    """
    if dim_index == 0:
        return tuple(1 << (_NBITS - j) for j in range(1, _NBITS + 1))
    table = _direction_table()
    if dim_index - 1 >= len(table):
        raise DimensionUnsupportedError(
            f"dimension {dim_index + 1} exceeds table size {len(table) + 1}"
        )
    g, acode, m = table[dim_index - 1]
    v = [m[j] << (_NBITS - (j + 1)) for j in range(g)]
    for j in range(g, _NBITS):
        new = v[j - g] ^ (v[j - g] >> g)
        for k in range(1, g):
            if (acode >> (g - 1 - k)) & 1:
                new ^= v[j - k]
        v.append(new)
    return tuple(v)


def max_supported_dim() -> int:
    return len(_direction_table()) + 1


def sobol_unit(m: int, dim: int) -> np.ndarray:
    """First ``m`` Sobol points in ``[0, 1)^dim`` after skipping index 0."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if dim > max_supported_dim():
        raise DimensionUnsupportedError(
            f"dimension {dim} exceeds table size {max_supported_dim()}"
        )
    idx = np.arange(1, m + 1, dtype=np.int64)
    out = np.empty((m, dim))
    n_bits = int(idx[-1]).bit_length()
    for k in range(dim):
        v = np.array(_direction_numbers(k)[:n_bits], dtype=np.int64)
        acc = np.zeros(m, dtype=np.int64)
        for j in range(n_bits):
            bit = (idx >> j) & 1
            acc ^= bit * v[j]
        out[:, k] = acc / float(1 << _NBITS)
    return out


@dataclass(frozen=True)
class CandidatePool:
    """A fixed set of candidate points inside a domain."""

    points: np.ndarray  # (m, s), domain coordinates
    domain: Domain
    generator: str  # "sobol" | "lhs" | "external"

    def __post_init__(self):
        pts = check_array(self.points, name="pool points")
        self.domain.validate(pts)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class ShiftedPool:
    """Randomized image of a pool; the shift vector is kept for audit."""

    points: np.ndarray
    domain: Domain
    shift: np.ndarray

    @property
    def size(self) -> int:
        return self.points.shape[0]


def sobol_pool(m: int, domain: Domain) -> CandidatePool:
    """Deterministic Sobol pool of ``m`` points mapped into ``domain``."""
    domain = check_domain(domain)
    unit = sobol_unit(m, domain.dim)
    return CandidatePool(domain.from_unit(unit), domain, "sobol")


def default_pool_size(dim: int, per_dim: int = 75) -> int:
    """Recommended pool size, clamped to the 50s-100s band."""
    return int(min(max(per_dim * dim, 50 * dim), 100 * dim))


def lhs_initial_design(
    n: int, domain: Domain, rng, maximin_iters: int | None = None
) -> CandidatePool:
    """Seeded Latin hypercube with a maximin improvement phase.

    Each coordinate gets exactly one point per axis stratum; random
    coordinate swaps are then accepted only when they increase the minimum
    pairwise distance.
    """
    if n < 2:
        raise ValueError("initial design needs n >= 2")
    domain = check_domain(domain)
    rng = make_rng(rng)
    s = domain.dim
    unit = np.empty((n, s))
    for k in range(s):
        unit[:, k] = (rng.permutation(n) + rng.random(n)) / n
    if maximin_iters is None:
        maximin_iters = 20 * n
    unit = _maximin_swap(unit, rng, maximin_iters)
    return CandidatePool(domain.from_unit(unit), domain, "lhs")


def _min_dist(unit: np.ndarray) -> float:
    diff = unit[:, None, :] - unit[None, :, :]
    d2 = np.sum(diff * diff, axis=-1)
    np.fill_diagonal(d2, np.inf)
    return float(np.sqrt(d2.min()))


def _maximin_swap(unit: np.ndarray, rng, iters: int) -> np.ndarray:
    """Swap stratum assignments between rows, keeping only improving moves."""
    unit = unit.copy()
    n = unit.shape[0]
    s = unit.shape[1]
    diff = unit[:, None, :] - unit[None, :, :]
    d2 = np.sum(diff * diff, axis=-1)
    np.fill_diagonal(d2, np.inf)
    current = d2.min()
    for _ in range(iters):
        i, j = rng.choice(n, size=2, replace=False)
        k = int(rng.integers(s))
        cand = unit.copy()
        cand[i, k], cand[j, k] = unit[j, k], unit[i, k]
        d2c = d2.copy()
        for r in (i, j):
            row = np.sum((cand[r] - cand) ** 2, axis=1)
            row[r] = np.inf
            d2c[r, :] = row
            d2c[:, r] = row
        if d2c.min() > current:
            unit = cand
            d2 = d2c
            current = d2c.min()
    return unit


def wrap_into_domain(z: np.ndarray, domain: Domain) -> np.ndarray:
    """Three-case boundary wrap applied coordinatewise.

    Values above ``b_k`` re-enter from ``a_k`` by the overshoot, values below
    ``a_k`` re-enter from ``b_k``; values in the closed interval (boundary
    included) pass through unchanged. For boxes that do not straddle zero a
    single pass may not suffice, so residual overshoots fall back to
    full-period reduction.
    """
    z = np.asarray(z, dtype=float)
    a, b = domain.lower, domain.upper
    out = np.where(z > b, a + (z - b), np.where(z < a, b - (a - z), z))
    still = (out > b) | (out < a)
    if still.any():
        span = b - a
        out = np.where(still, a + np.mod(out - a, span), out)
    return out


def random_shift(pool: CandidatePool, rng, domain: Domain | None = None) -> ShiftedPool:
    """Shift the whole pool by a uniform vector and wrap back into the box.

    The shift ``delta`` is drawn uniformly on the domain and applied as the
    displacement ``delta - lower`` (uniform over one box period), so
    ``delta = lower`` is the identity and a single wrap pass always closes.
    Pairwise coordinate differences are preserved modulo the box period, so
    the pool's low-discrepancy structure survives the randomization.
    """
    domain = pool.domain if domain is None else check_domain(domain, pool.domain.dim)
    rng = make_rng(rng)
    delta = domain.uniform(rng, 1)[0]
    shifted = wrap_into_domain(pool.points + (delta - domain.lower), domain)
    return ShiftedPool(shifted, domain, delta)


def pool_to_csv(pool: CandidatePool, path) -> None:
    """One point per row, full float precision, no header."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        for row in pool.points:
            writer.writerow([repr(float(v)) for v in row])


def pool_from_csv(path, domain: Domain) -> CandidatePool:
    """Load an externally built pool (e.g., a uniform design) from CSV."""
    domain = check_domain(domain)
    with open(path, newline="") as f:
        rows = [[float(v) for v in row] for row in csv.reader(f) if row]
    if not rows:
        raise ValueError(f"no points found in {path}")
    return CandidatePool(np.array(rows), domain, "external")
