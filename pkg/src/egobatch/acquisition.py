"""Expected improvement and its global maximization over the search box."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr

from .core import DUP_TOL, Domain, make_rng
from .qmc import random_shift, sobol_pool
from .validation import check_array

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

#: EI values this close to the incumbent maximum are ties, broken by index.
EI_TIE_TOL = 1e-15


def norm_pdf(u):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(u))


def norm_cdf(u):
    # erfc-based, accurate to ~1e-16; EI differences drive argmax decisions
    return ndtr(u)


class ExpectedImprovement:
    """Expected improvement under a fitted surrogate's predictive Gaussian.

    ``best_y`` is the minimum response in the model's training snapshot; at a
    candidate with predictive mean m and standard deviation s,

        EI = (best_y - m) * Phi(u) + s * phi(u),   u = (best_y - m) / s,

    falling back to ``max(best_y - m, 0)`` in the deterministic limit
    ``s < s_eps``.
    """

    def __init__(self, model, best_y: float | None = None):
        if not hasattr(model, "theta_"):
            raise ValueError("model must be fitted")
        data_best = float(np.min(model.y_))
        if best_y is None:
            best_y = data_best
        elif abs(best_y - data_best) > 1e-9 * max(1.0, abs(data_best)):
            raise ValueError(
                f"best_y={best_y} does not match the model's minimum response {data_best}"
            )
        self.model = model
        self.best_y = float(best_y)
        self.s_eps = 1e-10 * math.sqrt(model.sigma2_)

    @property
    def domain(self) -> Domain:
        return self.model.domain_

    def batch(self, X) -> np.ndarray:
        """EI at each row of ``X``; elementwise identical to the scalar form."""
        X = check_array(X, name="X")
        mean, sd = self.model.predict(X, return_std=True)
        imp = self.best_y - mean
        wide = sd >= self.s_eps
        safe_sd = np.where(wide, sd, 1.0)
        u = imp / safe_sd
        ei = np.where(wide, imp * norm_cdf(u) + sd * norm_pdf(u), np.maximum(imp, 0.0))
        return np.maximum(ei, 0.0)

    def __call__(self, x) -> float:
        return float(self.batch(np.atleast_2d(np.asarray(x, dtype=float)))[0])


def _exclusion_mask(points_unit: np.ndarray, exclusions_unit: np.ndarray | None) -> np.ndarray:
    """True for rows farther than DUP_TOL (max-norm) from every exclusion."""
    if exclusions_unit is None or exclusions_unit.size == 0:
        return np.ones(points_unit.shape[0], dtype=bool)
    ok = np.ones(points_unit.shape[0], dtype=bool)
    for e in exclusions_unit:
        ok &= np.max(np.abs(points_unit - e), axis=1) >= DUP_TOL
    return ok


def _pick_best(ei_values: np.ndarray) -> int:
    """First index whose EI ties the maximum within EI_TIE_TOL."""
    top = float(np.max(ei_values))
    return int(np.argmax(ei_values >= top - EI_TIE_TOL))


def _tight_simplex(base: np.ndarray, step: float) -> np.ndarray:
    """Initial simplex of edge ``step`` around a unit-cube point."""
    s = base.size
    simplex = np.tile(base, (s + 1, 1))
    for k in range(s):
        simplex[k + 1, k] += step if base[k] + step <= 1.0 else -step
    return simplex


#: Jitter scales (unit coordinates) of the incumbent-neighborhood scan points.
_LOCAL_SCALES = (0.1, 0.01, 1e-3, 1e-4)


def build_scan_set(
    ei: ExpectedImprovement,
    rng,
    scan_per_dim: int = 512,
    extra_scan=None,
    local_points: int = 32,
) -> np.ndarray:
    """The maximizer's internal scan set, in a fixed deterministic order.

    A randomized Sobol set of ``scan_per_dim * s`` points covers the box; any
    ``extra_scan`` rows (e.g. the current candidate pool) follow; finally a
    jittered cloud around the incumbent best design point, at several scales,
    catches the sharp EI spike that forms next to the incumbent late in a run
    and that a box-wide scan would miss.
    """
    rng = make_rng(rng)
    domain = ei.domain
    s = domain.dim
    parts = [random_shift(sobol_pool(scan_per_dim * s, domain), rng).points]
    if extra_scan is not None and len(extra_scan):
        parts.append(check_array(extra_scan, name="extra_scan", n_cols=s))
    if local_points > 0:
        incumbent = ei.model.Xu_[int(np.argmin(ei.model.y_))]
        per_scale = max(1, local_points // len(_LOCAL_SCALES))
        cloud = [
            np.clip(incumbent + scale * rng.standard_normal((per_scale, s)), 0.0, 1.0)
            for scale in _LOCAL_SCALES
        ]
        parts.append(domain.from_unit(np.vstack(cloud)))
    return np.vstack(parts)


def ranked_maximizers(
    ei: ExpectedImprovement,
    rng,
    n_starts: int = 5,
    scan_per_dim: int = 512,
    extra_scan=None,
    exclusions=None,
    polish_maxfev: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Candidate maximizers of EI, best first.

    Scans the set from :func:`build_scan_set`, then polishes the ``n_starts``
    best scan points by bounded Nelder-Mead in unit coordinates. Points
    within the duplicate radius of an exclusion are never returned.
    Deterministic for a fixed ``rng`` state.
    """
    rng = make_rng(rng)
    domain = ei.domain
    s = domain.dim
    scan = build_scan_set(ei, rng, scan_per_dim=scan_per_dim, extra_scan=extra_scan)
    scan_unit = domain.to_unit(scan)
    excl_unit = None
    if exclusions is not None and len(exclusions):
        excl_unit = domain.to_unit(check_array(exclusions, name="exclusions", n_cols=s))
    ei_scan = ei.batch(scan)
    admissible = _exclusion_mask(scan_unit, excl_unit)
    ranked = np.argsort(-ei_scan, kind="stable")

    cand_pts = [scan[i] for i in ranked if admissible[i]]
    cand_ei = [float(ei_scan[i]) for i in ranked if admissible[i]]
    if not cand_pts:
        raise ValueError("every scan point is excluded; cannot propose a maximizer")

    if n_starts > 0:
        span = domain.span
        lower = domain.lower

        def neg_ei(u):
            return -ei.batch((lower + np.clip(u, 0.0, 1.0) * span).reshape(1, -1))[0]

        maxfev = polish_maxfev or (60 * s + 60)
        polished_pts, polished_ei = [], []

        def polish(start_unit, initial_simplex=None):
            res = minimize(
                neg_ei,
                start_unit,
                method="Nelder-Mead",
                bounds=[(0.0, 1.0)] * s,
                options={
                    "maxfev": maxfev,
                    "xatol": 1e-8,
                    "fatol": 1e-12,
                    "initial_simplex": initial_simplex,
                },
            )
            pt = domain.from_unit(np.clip(res.x, 0.0, 1.0))
            if excl_unit is None or _exclusion_mask(domain.to_unit(pt).reshape(1, -1), excl_unit)[0]:
                polished_pts.append(pt)
                polished_ei.append(float(-res.fun))

        for idx in ranked[:n_starts]:
            polish(scan_unit[idx])
        if polished_ei:
            # tight-simplex refinement around the best terminus: the EI spike
            # next to the incumbent can be narrower than the default simplex
            base = domain.to_unit(polished_pts[int(np.argmax(polished_ei))])
            polish(base, initial_simplex=_tight_simplex(base, 1e-3))
        # polished candidates take precedence at equal EI
        cand_pts = polished_pts + cand_pts
        cand_ei = polished_ei + cand_ei

    order = np.argsort(-np.asarray(cand_ei), kind="stable")
    pts = np.array([cand_pts[i] for i in order])
    vals = np.asarray([cand_ei[i] for i in order])
    best = _pick_best(vals)
    if best != 0:
        keep = np.r_[best, np.delete(np.arange(len(vals)), best)]
        pts, vals = pts[keep], vals[keep]
    return pts, vals


def maximize_ei(
    ei: ExpectedImprovement,
    rng,
    n_starts: int = 5,
    scan_per_dim: int = 512,
    extra_scan=None,
    exclusions=None,
) -> np.ndarray:
    """Point maximizing EI over the box (scan + multi-start local polish).

    With ``n_starts=0`` this returns the best admissible scan point exactly.
    The result never leaves the domain and never falls within the duplicate
    radius of an exclusion.
    """
    pts, _ = ranked_maximizers(
        ei,
        rng,
        n_starts=n_starts,
        scan_per_dim=scan_per_dim,
        extra_scan=extra_scan,
        exclusions=exclusions,
    )
    return pts[0]
