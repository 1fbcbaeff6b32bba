"""Benchmark function catalog with exact domains and published optima."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .core import Domain, Objective, UnknownFunctionError


@dataclass(frozen=True)
class TestFunction:
    """A benchmark objective with its known minimum."""

    name: str
    dim: int
    domain: Domain
    fn: callable
    minimum: float
    minimizers: tuple = field(default=())

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise ValueError(f"{self.name} expects dimension {self.dim}, got {x.shape[0]}")
        return float(self.fn(x))

    def objective(self) -> Objective:
        return Objective(self, name=self.name)


def _branin(x):
    # quadratic coefficient 5.1/(4 pi^2): the value that reproduces the
    # published minimum 0.397887 at all three published minimizers
    a, b = x[0], x[1]
    return (
        (b - 5.1 / (4.0 * math.pi**2) * a**2 + 5.0 / math.pi * a - 6.0) ** 2
        + 10.0 * (1.0 - 1.0 / (8.0 * math.pi)) * math.cos(a)
        + 10.0
    )


def _sixcamel(x):
    a, b = x[0], x[1]
    return 4 * a**2 - 2.1 * a**4 + a**6 / 3.0 + a * b - 4 * b**2 + 4 * b**4


def _goldprice(x):
    a, b = x[0], x[1]
    p1 = 1 + (a + b + 1) ** 2 * (19 - 14 * a + 3 * a**2 - 14 * b + 6 * a * b + 3 * b**2)
    p2 = 30 + (2 * a - 3 * b) ** 2 * (18 - 32 * a + 12 * a**2 + 48 * b - 36 * a * b + 27 * b**2)
    return (math.log(p1 * p2) - 8.693) / 2.427


def _sin2(x):
    a, b = x[0], x[1]
    return 1.0 + math.sin(a) ** 2 + math.sin(b) ** 2 - 0.1 * math.exp(-(a**2) - b**2)


_HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN3_A = np.array(
    [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]]
)
_HARTMANN3_P = 1e-4 * np.array(
    [[3689, 1170, 2673], [4699, 4387, 7470], [1091, 8732, 5547], [381, 5743, 8828]]
)
_HARTMANN6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_HARTMANN6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)


def _hartmann(x, A, P):
    inner = np.sum(A * (x[None, :] - P) ** 2, axis=1)
    return -float(np.sum(_HARTMANN_ALPHA * np.exp(-inner)))


def _ackley(x):
    s = x.shape[0]
    a, b, c = 20.0, 0.2, 2.0 * math.pi
    return (
        -a * math.exp(-b * math.sqrt(np.mean(x**2)))
        - math.exp(np.mean(np.cos(c * x)))
        + a
        + math.e
    )


def _levy(x):
    w = 1.0 + (x - 1.0) / 4.0
    head = math.sin(math.pi * w[0]) ** 2
    body = np.sum((w[:-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(math.pi * w[:-1] + 1.0) ** 2))
    tail = (w[-1] - 1.0) ** 2 * (1.0 + math.sin(2.0 * math.pi * w[-1]) ** 2)
    return head + float(body) + tail


def _trid(x):
    return float(np.sum((x - 1.0) ** 2) - np.sum(x[1:] * x[:-1]))


def _trid_minimum(s: int) -> float:
    return -s * (s + 4) * (s - 1) / 6.0


def _fixed_catalog() -> dict[str, TestFunction]:
    return {
        "branin": TestFunction(
            "branin",
            2,
            Domain([-5.0, 0.0], [10.0, 15.0]),
            _branin,
            0.397887,
            ((-math.pi, 12.275), (math.pi, 2.275), (9.42478, 2.475)),
        ),
        "sixcamel": TestFunction(
            "sixcamel",
            2,
            Domain([-2.0, -1.0], [2.0, 1.0]),
            _sixcamel,
            -1.0316,
            ((0.0898, -0.7126), (-0.0898, 0.7126)),
        ),
        "goldprice": TestFunction(
            "goldprice",
            2,
            Domain([-2.0, -2.0], [2.0, 2.0]),
            _goldprice,
            -3.129126,
            ((0.0, -1.0),),
        ),
        "sin2": TestFunction(
            "sin2",
            2,
            Domain([-5.0, -5.0], [5.0, 5.0]),
            _sin2,
            0.9,
            ((0.0, 0.0),),
        ),
        "hartmann3": TestFunction(
            "hartmann3",
            3,
            Domain([0.0] * 3, [1.0] * 3),
            lambda x: _hartmann(x, _HARTMANN3_A, _HARTMANN3_P),
            -3.86278,
            ((0.1146, 0.5556, 0.8525),),
        ),
        "hartmann6": TestFunction(
            "hartmann6",
            6,
            Domain([0.0] * 6, [1.0] * 6),
            lambda x: _hartmann(x, _HARTMANN6_A, _HARTMANN6_P),
            -3.32237,
            ((0.2017, 0.1500, 0.4769, 0.2753, 0.3117, 0.6573),),
        ),
    }


def _parametric(family: str, dim: int) -> TestFunction:
    if dim < 2:
        raise UnknownFunctionError(f"{family} needs dimension >= 2")
    if family == "ackley":
        # the 2-d variant is the toy problem on [-2, 2]^2; other dimensions
        # use the [-5.12, 5.12] box
        half = 2.0 if dim == 2 else 5.12
        return TestFunction(
            f"ackley{dim}",
            dim,
            Domain([-half] * dim, [half] * dim),
            _ackley,
            0.0,
            (tuple(0.0 for _ in range(dim)),),
        )
    if family == "levy":
        # published optimum value 0 is attained at the all-ones point
        return TestFunction(
            f"levy{dim}",
            dim,
            Domain([-10.0] * dim, [10.0] * dim),
            _levy,
            0.0,
            (tuple(1.0 for _ in range(dim)),),
        )
    if family == "trid":
        minimizer = tuple(i * (dim + 1 - i) for i in range(1, dim + 1))
        return TestFunction(
            f"trid{dim}",
            dim,
            Domain([-float(dim**2)] * dim, [float(dim**2)] * dim),
            _trid,
            _trid_minimum(dim),
            (minimizer,),
        )
    raise UnknownFunctionError(family)


_NAME_RE = re.compile(r"^([a-z]+?)(\d+)?$")


def lookup(name: str, dim: int | None = None) -> TestFunction:
    """Catalog lookup by name, e.g. ``branin``, ``ackley10``, ``trid12``.

    Parametric families (ackley, levy, trid) take their dimension either as a
    suffix or via ``dim``.
    """
    key = name.strip().lower()
    fixed = _fixed_catalog()
    m = _NAME_RE.match(key)
    if not m:
        raise UnknownFunctionError(name)
    base, suffix = m.group(1), m.group(2)
    if key in fixed:
        if dim is not None and fixed[key].dim != dim:
            raise UnknownFunctionError(f"{name} has fixed dimension {fixed[key].dim}")
        return fixed[key]
    if base in fixed and suffix is not None:
        raise UnknownFunctionError(name)
    if base in ("ackley", "levy", "trid"):
        d = int(suffix) if suffix is not None else dim
        if d is None:
            raise UnknownFunctionError(f"{name} requires a dimension, e.g. {name}10")
        if dim is not None and suffix is not None and int(suffix) != dim:
            raise UnknownFunctionError(f"conflicting dimensions for {name}")
        return _parametric(base, d)
    raise UnknownFunctionError(name)


def catalog_names() -> list[str]:
    """Canonical catalog entries (parametric families at their standard sizes)."""
    return [
        "branin",
        "sixcamel",
        "goldprice",
        "sin2",
        "hartmann3",
        "hartmann6",
        "ackley2",
        "ackley10",
        "levy10",
        "trid12",
    ]
