"""Sequential optimization loops: serial EGO, batch accelerated EGO, constant liar.

All three share the same skeleton per stage: fit the Kriging surrogate, select
new point(s), evaluate them, append to the design, repeat. They differ only in
how the batch beyond the EI argmax is formed. Randomness is drawn from keyed
streams per (seed, role, stage), so traces are reproducible bit for bit and a
batch strategy with q=1 degenerates to serial EGO exactly.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .acquisition import ExpectedImprovement, ranked_maximizers
from .core import (
    DUP_TOL,
    Design,
    Domain,
    PoolExhaustedError,
    SingularCorrelationError,
    as_objective,
    keyed_rng,
)
from .kriging import KrigingSurrogate
from .qmc import CandidatePool, default_pool_size, lhs_initial_design, random_shift, sobol_pool
from .sir import resample, weigh
from .validation import check_array, check_domain, check_seed

# rng stream roles
_INIT, _FIT, _SELECT, _SHIFT, _RESAMPLE = range(5)


@dataclass(frozen=True)
class StopRule:
    """Any-of stopping condition for a sequential run.

    ``target``/``epsilon`` stop once ``|best - target| < epsilon`` (requires a
    known optimum); ``max_evaluations`` bounds the total number of objective
    evaluations including the initial design; ``max_stages`` bounds the number
    of update stages. At least one rule must be present.
    """

    target: float | None = None
    epsilon: float | None = None
    max_evaluations: int | None = None
    max_stages: int | None = None

    def __post_init__(self):
        has_gap = self.target is not None or self.epsilon is not None
        if has_gap and (self.target is None or self.epsilon is None):
            raise ValueError("target-gap stopping needs both target and epsilon")
        if not has_gap and self.max_evaluations is None and self.max_stages is None:
            raise ValueError("at least one stopping rule must be given")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def reached(self, best_y: float, n_evaluations: int, n_stages: int) -> str | None:
        if self.target is not None and abs(best_y - self.target) < self.epsilon:
            return "target"
        if self.max_evaluations is not None and n_evaluations >= self.max_evaluations:
            return "budget"
        if self.max_stages is not None and n_stages >= self.max_stages:
            return "max-stages"
        return None

    def remaining_evaluations(self, n_evaluations: int) -> float:
        if self.max_evaluations is None:
            return math.inf
        return self.max_evaluations - n_evaluations

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "epsilon": self.epsilon,
            "max_evaluations": self.max_evaluations,
            "max_stages": self.max_stages,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StopRule":
        return cls(**{k: d.get(k) for k in ("target", "epsilon", "max_evaluations", "max_stages")})


@dataclass
class StageResult:
    """Trace of one update stage: what was selected, what came back."""

    index: int
    argmax_point: list
    argmax_ei: float
    extra_points: list
    responses: list
    best_so_far: float
    weights: list | None = None
    pool_max_ei: float | None = None
    select_time: float = 0.0
    eval_time: float = 0.0

    @property
    def batch_size(self) -> int:
        return 1 + len(self.extra_points)

    def to_dict(self, include_times: bool = True) -> dict:
        d = {
            "index": self.index,
            "argmax_point": self.argmax_point,
            "argmax_ei": self.argmax_ei,
            "extra_points": self.extra_points,
            "responses": self.responses,
            "best_so_far": self.best_so_far,
            "weights": self.weights,
            "pool_max_ei": self.pool_max_ei,
        }
        if include_times:
            d["select_time"] = self.select_time
            d["eval_time"] = self.eval_time
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StageResult":
        return cls(
            index=d["index"],
            argmax_point=d["argmax_point"],
            argmax_ei=d["argmax_ei"],
            extra_points=d["extra_points"],
            responses=d["responses"],
            best_so_far=d["best_so_far"],
            weights=d.get("weights"),
            pool_max_ei=d.get("pool_max_ei"),
            select_time=d.get("select_time", 0.0),
            eval_time=d.get("eval_time", 0.0),
        )


@dataclass
class RunRecord:
    """Full trace of one strategy run."""

    config: dict
    domain: Domain
    initial_points: list
    initial_responses: list
    stages: list = field(default_factory=list)
    stop_reason: str = ""
    initial_eval_time: float = 0.0

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @property
    def n_evaluations(self) -> int:
        return len(self.initial_points) + sum(s.batch_size for s in self.stages)

    @property
    def best_y(self) -> float:
        best = min(self.initial_responses)
        for s in self.stages:
            best = min(best, min(s.responses))
        return float(best)

    @property
    def best_point(self) -> list:
        best, pt = math.inf, None
        for p, r in self.iter_evaluations():
            if r < best:
                best, pt = r, p
        return pt

    def iter_evaluations(self):
        for p, r in zip(self.initial_points, self.initial_responses):
            yield p, r
        for s in self.stages:
            batch = [s.argmax_point] + list(s.extra_points)
            for p, r in zip(batch, s.responses):
                yield p, r

    @property
    def select_time(self) -> float:
        return sum(s.select_time for s in self.stages)

    @property
    def eval_time(self) -> float:
        return self.initial_eval_time + sum(s.eval_time for s in self.stages)

    def to_dict(self, include_times: bool = True) -> dict:
        d = {
            "config": self.config,
            "domain": self.domain.to_dict(),
            "initial_points": self.initial_points,
            "initial_responses": self.initial_responses,
            "stages": [s.to_dict(include_times) for s in self.stages],
            "stop_reason": self.stop_reason,
            "totals": {
                "n_stages": self.n_stages,
                "n_evaluations": self.n_evaluations,
                "best_y": self.best_y,
            },
        }
        if include_times:
            d["initial_eval_time"] = self.initial_eval_time
            d["totals"]["select_time"] = self.select_time
            d["totals"]["eval_time"] = self.eval_time
        return d

    def to_json(self, include_times: bool = True) -> str:
        return json.dumps(self.to_dict(include_times), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(
            config=d["config"],
            domain=Domain.from_dict(d["domain"]),
            initial_points=d["initial_points"],
            initial_responses=d["initial_responses"],
            stages=[StageResult.from_dict(s) for s in d["stages"]],
            stop_reason=d["stop_reason"],
            initial_eval_time=d.get("initial_eval_time", 0.0),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))

    def stage_rows(self) -> list[dict]:
        """Flat per-stage rows for CSV export."""
        rows = []
        for s in self.stages:
            rows.append(
                {
                    "stage": s.index,
                    "batch_size": s.batch_size,
                    "argmax_ei": s.argmax_ei,
                    "best_so_far": s.best_so_far,
                    "select_time": s.select_time,
                    "eval_time": s.eval_time,
                }
            )
        return rows

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(
                f,
                fieldnames=["stage", "batch_size", "argmax_ei", "best_so_far", "select_time", "eval_time"],
            )
            writer.writeheader()
            for row in self.stage_rows():
                writer.writerow(row)


class _SurrogateStrategy(BaseEstimator):
    """Shared plumbing: initial design handling, surrogate fits, bookkeeping."""

    def _stop_rule(self) -> StopRule:
        stop = self.stop
        if isinstance(stop, dict):
            stop = StopRule.from_dict(stop)
        if not isinstance(stop, StopRule):
            raise ValueError("stop must be a StopRule or a dict of its fields")
        return stop

    def _seed(self) -> int:
        return check_seed(self.random_state)

    def _fit(self, design: Design, stage: int, seed: int) -> KrigingSurrogate:
        model = KrigingSurrogate(
            kernel=self.kernel,
            restarts=self.restarts,
            domain=design.domain,
            random_state=keyed_rng(seed, _FIT, stage),
        )
        return model.fit(design.X, design.y)

    def _build_initial(self, objective, domain: Domain, initial, seed: int):
        t0 = time.perf_counter()
        if isinstance(initial, Design):
            if len(initial) < 2:
                raise ValueError("initial design needs at least 2 evaluated points")
            return initial.copy(), 0.0
        design = Design(domain)
        if initial is None or isinstance(initial, int):
            n = 21 if initial is None else int(initial)
            pts = lhs_initial_design(n, domain, keyed_rng(seed, _INIT)).points
        elif isinstance(initial, CandidatePool):
            pts = initial.points
        else:
            pts = check_array(initial, name="initial", n_cols=domain.dim)
        for p in pts:
            design.append(p, objective(p), "initial")
        return design, time.perf_counter() - t0

    def _config(self, objective, domain: Domain, n_initial: int, seed: int, stop: StopRule) -> dict:
        cfg = {"strategy": self._strategy_name, "seed": seed, "stop": stop.to_dict()}
        cfg.update(self.get_params())
        cfg["stop"] = stop.to_dict()
        cfg["random_state"] = seed
        cfg["objective"] = getattr(objective, "name", "objective")
        cfg["n_initial"] = n_initial
        cfg.pop("pool", None)
        return cfg


class EGO(_SurrogateStrategy):
    """Serial strategy: one EI-maximizing point per stage.

    Parameters
    ----------
    stop : StopRule
        Stopping condition.
    kernel, restarts : surrogate settings (see :class:`KrigingSurrogate`).
    scan_per_dim, polish_starts : EI maximizer settings.
    random_state : int
        Seed; identical seeds give bit-identical runs.
    """

    _strategy_name = "ego"

    def __init__(
        self,
        stop: StopRule,
        kernel: str = "matern52",
        restarts: int = 10,
        scan_per_dim: int = 512,
        polish_starts: int = 5,
        random_state=None,
    ):
        self.stop = stop
        self.kernel = kernel
        self.restarts = restarts
        self.scan_per_dim = scan_per_dim
        self.polish_starts = polish_starts
        self.random_state = random_state

    def minimize(self, objective, domain, initial=None) -> RunRecord:
        objective = as_objective(objective)
        domain = check_domain(domain)
        stop = self._stop_rule()
        seed = self._seed()
        design, init_t = self._build_initial(objective, domain, initial, seed)
        record = RunRecord(
            self._config(objective, domain, len(design), seed, stop),
            domain,
            design.X.tolist(),
            design.y.tolist(),
            initial_eval_time=init_t,
        )
        return _serial_loop(self, objective, design, stop, seed, record)


def _serial_loop(strategy, objective, design: Design, stop: StopRule, seed: int, record: RunRecord):
    """One argmax point per stage; shared by EGO and q=1 batch runs."""
    while True:
        reason = stop.reached(design.best_y, len(design), record.n_stages)
        if reason:
            record.stop_reason = reason
            return record
        t = record.n_stages
        tic = time.perf_counter()
        try:
            model = strategy._fit(design, t, seed)
            ei = ExpectedImprovement(model)
            pts, vals = ranked_maximizers(
                ei,
                keyed_rng(seed, _SELECT, t),
                n_starts=strategy.polish_starts,
                scan_per_dim=strategy.scan_per_dim,
                exclusions=design.X,
            )
        except SingularCorrelationError as err:
            record.stop_reason = "error:singular-correlation"
            raise SingularCorrelationError(str(err), record=record) from err
        select_t = time.perf_counter() - tic
        x_new = pts[0]
        tic = time.perf_counter()
        y_new = objective(x_new)
        eval_t = time.perf_counter() - tic
        design.append(x_new, y_new, "argmax")
        record.stages.append(
            StageResult(
                index=t,
                argmax_point=x_new.tolist(),
                argmax_ei=float(vals[0]),
                extra_points=[],
                responses=[y_new],
                best_so_far=design.best_y,
                select_time=select_t,
                eval_time=eval_t,
            )
        )


class AcceleratedEGO(_SurrogateStrategy):
    """Batch strategy: EI argmax plus q-1 points importance-resampled from a
    randomized low-discrepancy pool.

    Each stage re-randomizes the same base pool with a fresh uniform shift,
    weighs the shifted points by their EI under the current surrogate, and
    draws q-1 distinct points without replacement. The maximizer's scan set
    includes the shifted pool, so the argmax EI is never below the pool's
    best EI.

    Parameters
    ----------
    stop : StopRule
    q : int
        Updating points per stage (argmax + q-1 resampled); q=1 is exactly
        serial EGO.
    pool : CandidatePool or int, optional
        Base candidate pool or its size; defaults to a Sobol pool of
        ``75 * dim`` points.
    """

    _strategy_name = "accelerated"

    def __init__(
        self,
        stop: StopRule,
        q: int = 5,
        pool=None,
        kernel: str = "matern52",
        restarts: int = 10,
        scan_per_dim: int = 512,
        polish_starts: int = 5,
        random_state=None,
    ):
        self.stop = stop
        self.q = q
        self.pool = pool
        self.kernel = kernel
        self.restarts = restarts
        self.scan_per_dim = scan_per_dim
        self.polish_starts = polish_starts
        self.random_state = random_state

    def _resolve_pool(self, domain: Domain) -> CandidatePool:
        if isinstance(self.pool, CandidatePool):
            if self.pool.domain != domain:
                raise ValueError("pool domain does not match the search domain")
            return self.pool
        m = default_pool_size(domain.dim) if self.pool is None else int(self.pool)
        return sobol_pool(m, domain)

    def minimize(self, objective, domain, initial=None) -> RunRecord:
        if self.q < 1:
            raise ValueError("q must be >= 1")
        objective = as_objective(objective)
        domain = check_domain(domain)
        stop = self._stop_rule()
        seed = self._seed()
        design, init_t = self._build_initial(objective, domain, initial, seed)
        pool = self._resolve_pool(domain)
        cfg = self._config(objective, domain, len(design), seed, stop)
        cfg["pool_size"] = pool.size
        record = RunRecord(cfg, domain, design.X.tolist(), design.y.tolist(), initial_eval_time=init_t)
        if self.q == 1:
            return _serial_loop(self, objective, design, stop, seed, record)
        if pool.size < self.q:
            raise ValueError(f"pool of {pool.size} points cannot supply batches of {self.q}")

        while True:
            reason = stop.reached(design.best_y, len(design), record.n_stages)
            if reason:
                record.stop_reason = reason
                return record
            t = record.n_stages
            tic = time.perf_counter()
            try:
                model = self._fit(design, t, seed)
                ei = ExpectedImprovement(model)
                shifted = random_shift(pool, keyed_rng(seed, _SHIFT, t))
                pts, vals = ranked_maximizers(
                    ei,
                    keyed_rng(seed, _SELECT, t),
                    n_starts=self.polish_starts,
                    scan_per_dim=self.scan_per_dim,
                    extra_scan=shifted.points,
                    exclusions=design.X,
                )
                x_new = pts[0]
                wp = weigh(shifted, ei)
                remaining = stop.remaining_evaluations(len(design))
                batch = self.q if math.isinf(remaining) else int(min(self.q, remaining))
                extra = np.empty((0, domain.dim))
                if batch > 1:
                    extra = resample(
                        wp,
                        batch - 1,
                        keyed_rng(seed, _RESAMPLE, t),
                        exclusions=np.vstack([design.X, x_new[None, :]]),
                    )
            except SingularCorrelationError as err:
                record.stop_reason = "error:singular-correlation"
                raise SingularCorrelationError(str(err), record=record) from err
            except PoolExhaustedError as err:
                record.stop_reason = "error:pool-exhausted"
                raise PoolExhaustedError(str(err), record=record) from err
            select_t = time.perf_counter() - tic

            batch_pts = [x_new] + [e for e in extra]
            tic = time.perf_counter()
            responses = objective.evaluate_batch(batch_pts)
            eval_t = time.perf_counter() - tic
            design.append(x_new, responses[0], "argmax")
            for p, r in zip(extra, responses[1:]):
                design.append(p, r, "resampled")
            record.stages.append(
                StageResult(
                    index=t,
                    argmax_point=x_new.tolist(),
                    argmax_ei=float(vals[0]),
                    extra_points=extra.tolist(),
                    responses=[float(r) for r in responses],
                    best_so_far=design.best_y,
                    weights=wp.weights.tolist(),
                    pool_max_ei=float(wp.raw_ei.max()),
                    select_time=select_t,
                    eval_time=eval_t,
                )
            )


class ConstantLiar(_SurrogateStrategy):
    """Batch baseline: q sequential EI maximizations against temporary lies.

    Within a stage the correlation parameters stay fixed; each selected point
    is appended with a constant fake response (the current minimum for
    CL(min)) and only the linear algebra is refit. The lies are then discarded
    and all q points are evaluated for real.

    Parameters
    ----------
    lie : {"min", "max"} or float
        The constant used for fake responses.
    """

    _strategy_name = "constant-liar"

    def __init__(
        self,
        stop: StopRule,
        q: int = 5,
        lie="min",
        kernel: str = "matern52",
        restarts: int = 10,
        scan_per_dim: int = 512,
        polish_starts: int = 5,
        random_state=None,
    ):
        self.stop = stop
        self.q = q
        self.lie = lie
        self.kernel = kernel
        self.restarts = restarts
        self.scan_per_dim = scan_per_dim
        self.polish_starts = polish_starts
        self.random_state = random_state

    def _lie_value(self, design: Design) -> float:
        if self.lie == "min":
            return design.best_y
        if self.lie == "max":
            return float(np.max(design.y))
        return float(self.lie)

    def minimize(self, objective, domain, initial=None) -> RunRecord:
        if self.q < 1:
            raise ValueError("q must be >= 1")
        objective = as_objective(objective)
        domain = check_domain(domain)
        stop = self._stop_rule()
        seed = self._seed()
        design, init_t = self._build_initial(objective, domain, initial, seed)
        record = RunRecord(
            self._config(objective, domain, len(design), seed, stop),
            domain,
            design.X.tolist(),
            design.y.tolist(),
            initial_eval_time=init_t,
        )
        if self.q == 1:
            return _serial_loop(self, objective, design, stop, seed, record)

        while True:
            reason = stop.reached(design.best_y, len(design), record.n_stages)
            if reason:
                record.stop_reason = reason
                return record
            t = record.n_stages
            tic = time.perf_counter()
            try:
                model = self._fit(design, t, seed)
                lie = self._lie_value(design)
                remaining = stop.remaining_evaluations(len(design))
                batch = self.q if math.isinf(remaining) else int(min(self.q, remaining))
                lie_X = [p for p in design.X]
                lie_y = list(design.y)
                inner = model
                batch_pts: list[np.ndarray] = []
                argmax_ei = 0.0
                for j in range(batch):
                    ei = ExpectedImprovement(inner)
                    pts, vals = ranked_maximizers(
                        ei,
                        keyed_rng(seed, _SELECT, t, j),
                        n_starts=self.polish_starts,
                        scan_per_dim=self.scan_per_dim,
                        exclusions=np.array(lie_X),
                    )
                    chosen = None
                    others = design.domain.to_unit(np.array(lie_X))
                    for cand in pts[:3]:
                        du = design.domain.to_unit(cand)
                        if np.min(np.max(np.abs(others - du), axis=1)) >= DUP_TOL:
                            chosen = cand
                            break
                    if chosen is None:
                        raise PoolExhaustedError(
                            f"no admissible liar point after 3 candidates at stage {t}"
                        )
                    if j == 0:
                        argmax_ei = float(vals[0])
                    batch_pts.append(chosen)
                    lie_X.append(chosen)
                    lie_y.append(lie)
                    if j < batch - 1:
                        inner = model.refit(np.array(lie_X), np.array(lie_y))
            except SingularCorrelationError as err:
                record.stop_reason = "error:singular-correlation"
                raise SingularCorrelationError(str(err), record=record) from err
            except PoolExhaustedError as err:
                record.stop_reason = "error:pool-exhausted"
                raise PoolExhaustedError(str(err), record=record) from err
            select_t = time.perf_counter() - tic

            tic = time.perf_counter()
            responses = objective.evaluate_batch(batch_pts)
            eval_t = time.perf_counter() - tic
            design.append(batch_pts[0], responses[0], "argmax")
            for p, r in zip(batch_pts[1:], responses[1:]):
                design.append(p, r, "liar-replaced")
            record.stages.append(
                StageResult(
                    index=t,
                    argmax_point=np.asarray(batch_pts[0]).tolist(),
                    argmax_ei=argmax_ei,
                    extra_points=[np.asarray(p).tolist() for p in batch_pts[1:]],
                    responses=[float(r) for r in responses],
                    best_so_far=design.best_y,
                    select_time=select_t,
                    eval_time=eval_t,
                )
            )
