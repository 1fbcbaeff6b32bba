"""EI-proportional weighting of a randomized pool and without-replacement draws."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DUP_TOL, Domain, PoolExhaustedError, make_rng
from .qmc import ShiftedPool
from .validation import check_array

#: Below (per point) this total weight, EI carries no usable signal and the
#: weights fall back to uniform.
W_FLOOR_PER_POINT = 1e-300


@dataclass(frozen=True)
class WeightedPool:
    """Pool points with normalized resampling weights.

    ``raw_ei`` keeps the unnormalized EI values for audit; ``degenerate`` is
    set when they summed below the underflow floor and uniform weights were
    substituted.
    """

    points: np.ndarray
    domain: Domain
    weights: np.ndarray
    raw_ei: np.ndarray
    degenerate: bool = False

    @property
    def size(self) -> int:
        return self.points.shape[0]


def weigh(pool: ShiftedPool, ei) -> WeightedPool:
    """Weights proportional to EI over the randomized pool."""
    raw = ei.batch(pool.points)
    total = float(raw.sum())
    m = raw.shape[0]
    if total < W_FLOOR_PER_POINT * m:
        return WeightedPool(pool.points, pool.domain, np.full(m, 1.0 / m), raw, True)
    return WeightedPool(pool.points, pool.domain, raw / total, raw, False)


def resample(wp: WeightedPool, J: int, rng, exclusions=None) -> np.ndarray:
    """Draw ``J`` distinct pool points, probability proportional to weight.

    Sequential inverse-CDF draws without replacement: after each draw the
    drawn point and anything within the duplicate radius of it is removed and
    the remaining weights renormalize implicitly. Points within the duplicate
    radius of an exclusion are never drawn.
    """
    if J < 0:
        raise ValueError("J must be >= 0")
    rng = make_rng(rng)
    points = wp.points
    unit = wp.domain.to_unit(points)
    weights = wp.weights.astype(float).copy()

    alive = np.ones(wp.size, dtype=bool)
    if exclusions is not None and len(exclusions):
        excl = wp.domain.to_unit(check_array(exclusions, name="exclusions", n_cols=points.shape[1]))
        for e in excl:
            alive &= np.max(np.abs(unit - e), axis=1) >= DUP_TOL

    chosen: list[int] = []
    for _ in range(J):
        usable = alive & (weights > 0.0)
        if not usable.any():
            # all weight on dead points: fall back to uniform over the living
            usable = alive
        if not usable.any():
            raise PoolExhaustedError(
                f"requested {J} points but only {len(chosen)} admissible candidates remain"
            )
        w = np.where(usable, weights, 0.0)
        total = w.sum()
        if total <= 0.0:
            w = usable.astype(float)
            total = w.sum()
        cum = np.cumsum(w)
        u = rng.random() * total
        idx = int(np.searchsorted(cum, u, side="right"))
        if idx >= wp.size or not usable[idx]:  # fp edge: u landed at the top
            idx = int(np.flatnonzero(usable)[-1])
        chosen.append(idx)
        alive &= np.max(np.abs(unit - unit[idx]), axis=1) >= DUP_TOL
        alive[idx] = False
    return points[chosen].copy()
