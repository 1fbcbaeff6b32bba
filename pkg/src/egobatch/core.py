"""Shared primitives: box domains, growing designs, counted objectives, errors."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

#: Duplicate radius in unit-scaled coordinates (max-norm). Two points closer
#: than this would produce numerically identical correlation-matrix rows.
DUP_TOL = 1e-8


class OutOfDomainError(ValueError):
    """A point lies outside the closed experimental box.

    Attributes
    ----------
    axis : int
        Index of the first offending coordinate.
    """

    def __init__(self, axis: int, value: float, lower: float, upper: float):
        self.axis = axis
        super().__init__(
            f"coordinate {axis} = {value!r} outside [{lower!r}, {upper!r}]"
        )


class DuplicatePointError(ValueError):
    """A point falls within ``DUP_TOL`` of one already in the design."""


class TooFewPointsError(ValueError):
    """Not enough design points to fit the surrogate."""


class SingularCorrelationError(RuntimeError):
    """Correlation matrix could not be factorized even after jitter escalation.

    When raised from a strategy loop, the partial trace is attached as
    ``record``.
    """

    def __init__(self, msg: str, record=None):
        super().__init__(msg)
        self.record = record


class PoolExhaustedError(RuntimeError):
    """Fewer admissible candidate points remain than were requested."""

    def __init__(self, msg: str, record=None):
        super().__init__(msg)
        self.record = record


class UnknownFunctionError(KeyError):
    """Requested benchmark function is not in the catalog."""


class Domain:
    """Rectangular search box ``[lower[k], upper[k]]`` for each axis ``k``.

    Parameters
    ----------
    lower, upper : array-like of shape (s,)
        Box bounds; ``lower[k] < upper[k]`` strictly for every axis.
    """

    __slots__ = ("lower", "upper")

    def __init__(self, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.ndim != 1 or upper.ndim != 1 or lower.shape != upper.shape:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if lower.size < 1:
            raise ValueError("domain dimension must be >= 1")
        if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
            raise ValueError("domain bounds must be finite")
        if not np.all(lower < upper):
            k = int(np.argmin(upper - lower))
            raise ValueError(f"lower[{k}]={lower[k]} must be < upper[{k}]={upper[k]}")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def __setattr__(self, name, value):
        raise AttributeError("Domain is immutable")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    @classmethod
    def unit(cls, dim: int) -> "Domain":
        return cls(np.zeros(dim), np.ones(dim))

    def __repr__(self):
        pairs = ", ".join(
            f"[{lo:g}, {hi:g}]" for lo, hi in zip(self.lower, self.upper)
        )
        return f"Domain({pairs})"

    def __eq__(self, other):
        return (
            isinstance(other, Domain)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def contains(self, x) -> bool:
        """True if ``x`` lies in the closed box (boundary included)."""
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def validate(self, x) -> np.ndarray:
        """Return ``x`` unchanged if inside the box, else raise.

        No silent clamping: callers must decide what an out-of-box point
        means.
        """
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"point has dimension {x.shape[-1]}, domain has {self.dim}")
        pts = np.atleast_2d(x)
        low = pts < self.lower
        high = pts > self.upper
        if low.any() or high.any():
            bad = np.argwhere(low | high)[0]
            k = int(bad[-1])
            raise OutOfDomainError(k, float(pts[bad[0], k]), float(self.lower[k]), float(self.upper[k]))
        return x

    def to_unit(self, x) -> np.ndarray:
        """Affine map of in-box points onto ``[0, 1]^s``."""
        x = self.validate(x)
        return (x - self.lower) / self.span

    def from_unit(self, u) -> np.ndarray:
        """Inverse of :meth:`to_unit`."""
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.dim:
            raise ValueError(f"point has dimension {u.shape[-1]}, domain has {self.dim}")
        return self.lower + u * self.span

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` independent uniform points from the box."""
        return self.from_unit(rng.random((n, self.dim)))

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Domain":
        return cls(d["lower"], d["upper"])


#: Provenance tags for design points.
ORIGINS = ("initial", "argmax", "resampled", "liar-replaced")


class Design:
    """Ordered, append-only record of evaluated points and responses.

    Insertion rejects points within ``DUP_TOL`` (unit-scaled max-norm) of an
    existing point; this is what keeps correlation matrices nonsingular
    downstream.
    """

    def __init__(self, domain: Domain):
        self.domain = domain
        self._points: list[np.ndarray] = []
        self._responses: list[float] = []
        self._origins: list[str] = []
        self._unit: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._points)

    @property
    def X(self) -> np.ndarray:
        """(n, s) matrix of points in original coordinates."""
        if not self._points:
            return np.empty((0, self.domain.dim))
        return np.array(self._points)

    @property
    def X_unit(self) -> np.ndarray:
        if not self._unit:
            return np.empty((0, self.domain.dim))
        return np.array(self._unit)

    @property
    def y(self) -> np.ndarray:
        return np.array(self._responses, dtype=float)

    @property
    def origins(self) -> tuple[str, ...]:
        return tuple(self._origins)

    @property
    def best_index(self) -> int:
        if not self._responses:
            raise ValueError("empty design has no best point")
        return int(np.argmin(self._responses))

    @property
    def best_y(self) -> float:
        return float(self._responses[self.best_index])

    @property
    def best_point(self) -> np.ndarray:
        return self._points[self.best_index].copy()

    def near_duplicate(self, point) -> bool:
        """True if ``point`` is within ``DUP_TOL`` of an existing point."""
        if not self._unit:
            return False
        u = self.domain.to_unit(np.asarray(point, dtype=float))
        dist = np.max(np.abs(np.array(self._unit) - u), axis=1)
        return bool(np.min(dist) < DUP_TOL)

    def append(self, point, response: float, origin: str = "initial") -> None:
        point = np.asarray(point, dtype=float).reshape(-1)
        self.domain.validate(point)
        if origin not in ORIGINS:
            raise ValueError(f"unknown origin tag {origin!r}")
        if self.near_duplicate(point):
            raise DuplicatePointError(f"point {point} duplicates an existing design point")
        response = float(response)
        if not np.isfinite(response):
            raise ValueError(f"non-finite response {response} at {point}")
        self._points.append(point.copy())
        self._responses.append(response)
        self._origins.append(origin)
        self._unit.append(self.domain.to_unit(point))

    def extend(self, points, responses, origin: str = "initial") -> None:
        for p, r in zip(points, responses):
            self.append(p, r, origin)

    def copy(self) -> "Design":
        d = Design(self.domain)
        d._points = [p.copy() for p in self._points]
        d._responses = list(self._responses)
        d._origins = list(self._origins)
        d._unit = [u.copy() for u in self._unit]
        return d


class Objective:
    """Callable wrapper that charges every evaluation attempt to a ledger.

    The count increments even when the wrapped callable raises, so failed
    evaluations still consume budget.
    """

    def __init__(self, fn: Callable, name: str | None = None):
        self._fn = fn
        self.name = name or getattr(fn, "name", None) or getattr(fn, "__name__", "objective")
        self._n_evaluations = 0

    @property
    def n_evaluations(self) -> int:
        return self._n_evaluations

    def __call__(self, x) -> float:
        self._n_evaluations += 1
        return float(self._fn(np.asarray(x, dtype=float)))

    def evaluate_batch(self, points: Sequence) -> list[float]:
        """Evaluate a batch of points; order of results matches inputs.

        The base implementation is serial. Subclasses may evaluate
        concurrently as long as results come back in input order.
        """
        return [self(p) for p in points]

    def close(self) -> None:  # pragma: no cover - nothing to release here
        pass


def as_objective(fn) -> Objective:
    return fn if isinstance(fn, Objective) else Objective(fn)


def make_rng(seed) -> np.random.Generator:
    """Build a generator from a seed, passing generators through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def keyed_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic independent stream for (seed, key...).

    Strategies use fixed keys per stage and role so that traces are
    reproducible and insensitive to internal evaluation order.
    """
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, *key])
