"""Experiment harness: seeded campaigns, result files, external objectives.

A campaign is a list of experiment specs (function x strategy x batch size x
pool size), each repeated with seeds derived from a base seed. Raw traces are
written as JSON lines (one record per replicate, deterministic bytes: no
wall-clock fields), timings go to a sidecar CSV, and summaries to a flat CSV.
"""

from __future__ import annotations

import csv
import json
import math
import os
import subprocess
import threading
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Domain, Objective
from .strategies import EGO, AcceleratedEGO, ConstantLiar, RunRecord, StopRule
from .testfns import catalog_names, lookup

#: Initial-design size and candidate-pool size per benchmark function.
DESIGN_DEFAULTS = {
    "branin": (21, 100),
    "sixcamel": (21, 100),
    "goldprice": (21, 100),
    "sin2": (21, 100),
    "hartmann3": (35, 150),
    "hartmann6": (65, 300),
    "ackley10": (100, 750),
    "levy10": (100, 750),
    "trid12": (120, 1000),
}

DEFAULT_REPETITIONS = 25

_STRATEGIES = ("ego", "accelerated", "constant-liar")


@dataclass
class ExperimentSpec:
    """One cell of a campaign: a function, a strategy, and its settings."""

    function: str
    strategy: str = "ego"
    q: int = 1
    n_initial: int | None = None
    pool_size: int | None = None
    stop: dict = field(default_factory=dict)
    repetitions: int = DEFAULT_REPETITIONS
    seed: int = 0
    lie: str | float = "min"
    kernel: str = "matern52"
    restarts: int = 10
    scan_per_dim: int = 512
    polish_starts: int = 5
    external: dict | None = None
    id: str | None = None

    def __post_init__(self):
        if self.strategy not in _STRATEGIES:
            raise ValueError(f"strategy must be one of {_STRATEGIES}, got {self.strategy!r}")
        if self.external is not None:
            for key in ("cmd", "dim", "domain"):
                if key not in self.external:
                    raise ValueError(f"external objective spec needs {key!r}")
        else:
            lookup(self.function)  # fail early on unknown functions
        n, m = DESIGN_DEFAULTS.get(self.function, (21, None))
        if self.n_initial is None:
            self.n_initial = n
        if self.pool_size is None:
            self.pool_size = m
        if not self.stop:
            raise ValueError(f"spec for {self.function} needs a stop rule")
        StopRule.from_dict(self.stop)  # validate
        if self.id is None:
            self.id = f"{self.function}-{self.strategy}-q{self.q}-m{self.pool_size}-n{self.n_initial}"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "function": self.function,
            "strategy": self.strategy,
            "q": self.q,
            "n_initial": self.n_initial,
            "pool_size": self.pool_size,
            "stop": self.stop,
            "repetitions": self.repetitions,
            "seed": self.seed,
            "lie": self.lie,
            "kernel": self.kernel,
            "restarts": self.restarts,
            "scan_per_dim": self.scan_per_dim,
            "polish_starts": self.polish_starts,
            "external": self.external,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown spec keys: {sorted(extra)}")
        return cls(**d)


@dataclass
class Campaign:
    specs: list

    def __post_init__(self):
        self.specs = [
            s if isinstance(s, ExperimentSpec) else ExperimentSpec.from_dict(s) for s in self.specs
        ]
        ids = [s.id for s in self.specs]
        if len(set(ids)) != len(ids):
            raise ValueError("spec ids must be unique")

    @classmethod
    def from_file(cls, path) -> "Campaign":
        with open(path) as f:
            payload = json.load(f)
        if isinstance(payload, dict):
            payload = payload["specs"]
        return cls(payload)

    def to_file(self, path) -> None:
        with open(path, "w") as f:
            json.dump({"specs": [s.to_dict() for s in self.specs]}, f, indent=2)


def _build_strategy(spec: ExperimentSpec, rep_seed: int):
    stop = StopRule.from_dict(spec.stop)
    common = dict(
        stop=stop,
        kernel=spec.kernel,
        restarts=spec.restarts,
        scan_per_dim=spec.scan_per_dim,
        polish_starts=spec.polish_starts,
        random_state=rep_seed,
    )
    if spec.strategy == "ego":
        return EGO(**common)
    if spec.strategy == "accelerated":
        return AcceleratedEGO(q=spec.q, pool=spec.pool_size, **common)
    return ConstantLiar(q=spec.q, lie=spec.lie, **common)


def run_replicate(spec: ExperimentSpec, rep: int) -> dict:
    """Execute one replicate; failures come back as an error row, not a crash."""
    rep_seed = spec.seed + rep
    if spec.external is not None:
        ext = spec.external
        domain = Domain.from_dict(ext["domain"])
        objective = ExternalObjective(
            ext["cmd"],
            int(ext["dim"]),
            domain,
            timeout=float(ext.get("timeout", 60.0)),
            max_inflight=int(ext.get("max_inflight", 8)),
            name=spec.function,
        )
    else:
        fn = lookup(spec.function)
        domain = fn.domain
        objective = fn.objective()
    strategy = _build_strategy(spec, rep_seed)
    row = {"spec_id": spec.id, "rep": rep, "seed": rep_seed}
    try:
        record = strategy.minimize(objective, domain, spec.n_initial)
    except Exception as err:  # per-replicate failures recorded in-row
        row["error"] = f"{type(err).__name__}: {err}"
        partial = getattr(err, "record", None)
        if partial is not None:
            row["record"] = partial.to_dict(include_times=False)
        return row
    finally:
        objective.close()
    row["record"] = record.to_dict(include_times=False)
    row["times"] = {
        "select_time": record.select_time,
        "eval_time": record.eval_time,
        "total_time": record.select_time + record.eval_time,
    }
    return row


def _run_replicate_worker(args):
    spec_dict, rep = args
    return run_replicate(ExperimentSpec.from_dict(spec_dict), rep)


@dataclass
class SummaryRow:
    spec_id: str
    repetitions: int
    failures: int
    stages_mean: float
    stages_std: float
    stages_median: float
    best_mean: float
    best_std: float
    select_time_mean: float
    select_time_std: float
    total_time_mean: float
    total_time_std: float

    COLUMNS = (
        "spec_id",
        "repetitions",
        "failures",
        "stages_mean",
        "stages_std",
        "stages_median",
        "best_mean",
        "best_std",
        "select_time_mean",
        "select_time_std",
        "total_time_mean",
        "total_time_std",
    )

    def as_list(self) -> list:
        return [getattr(self, c) for c in self.COLUMNS]


def _mean_std(values) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    arr = np.asarray(values, dtype=float)
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return float(np.mean(arr)), std


def summarize_rows(spec_id: str, rows: list[dict], timings: list[dict]) -> SummaryRow:
    """Summary statistics recomputable bit-for-bit from the raw records."""
    ok = [r for r in rows if "error" not in r]
    stages = [len(r["record"]["stages"]) for r in ok]
    bests = [r["record"]["totals"]["best_y"] for r in ok]
    t_by_rep = {t["rep"]: t for t in timings}
    sel = [t_by_rep[r["rep"]]["select_time"] for r in ok if r["rep"] in t_by_rep]
    tot = [t_by_rep[r["rep"]]["total_time"] for r in ok if r["rep"] in t_by_rep]
    stages_mean, stages_std = _mean_std(stages)
    best_mean, best_std = _mean_std(bests)
    sel_mean, sel_std = _mean_std(sel)
    tot_mean, tot_std = _mean_std(tot)
    return SummaryRow(
        spec_id=spec_id,
        repetitions=len(rows),
        failures=len(rows) - len(ok),
        stages_mean=stages_mean,
        stages_std=stages_std,
        stages_median=float(np.median(stages)) if stages else math.nan,
        best_mean=best_mean,
        best_std=best_std,
        select_time_mean=sel_mean,
        select_time_std=sel_std,
        total_time_mean=tot_mean,
        total_time_std=tot_std,
    )


def _raw_path(out_dir: str, spec_id: str) -> str:
    return os.path.join(out_dir, "raw", f"{spec_id}.jsonl")


def _load_existing(out_dir: str, spec_id: str) -> dict[int, dict]:
    path = _raw_path(out_dir, spec_id)
    done = {}
    if os.path.exists(path):
        with open(path) as f:
            for line in f:
                line = line.strip()
                if line:
                    row = json.loads(line)
                    done[row["rep"]] = row
    return done


def _load_timings(out_dir: str) -> dict[str, list[dict]]:
    path = os.path.join(out_dir, "timings.csv")
    out: dict[str, list[dict]] = {}
    if os.path.exists(path):
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                out.setdefault(row["spec_id"], []).append(
                    {
                        "rep": int(row["rep"]),
                        "select_time": float(row["select_time"]),
                        "eval_time": float(row["eval_time"]),
                        "total_time": float(row["total_time"]),
                    }
                )
    return out


def run_campaign(campaign: Campaign, out_dir: str, parallelism: int = 1) -> list[SummaryRow]:
    """Run every replicate of every spec, resuming over completed ones.

    Raw traces carry no wall-clock fields, so reruns with the same base seed
    produce byte-identical files at any parallelism; timings live in
    ``timings.csv`` next to them.
    """
    os.makedirs(os.path.join(out_dir, "raw"), exist_ok=True)
    all_rows: dict[str, dict[int, dict]] = {}
    all_times = _load_timings(out_dir)
    pending: list[tuple[dict, int]] = []
    for spec in campaign.specs:
        done = _load_existing(out_dir, spec.id)
        all_rows[spec.id] = done
        have_times = {t["rep"] for t in all_times.get(spec.id, [])}
        for rep in range(spec.repetitions):
            if rep not in done or (rep not in have_times and "error" not in done[rep]):
                done.pop(rep, None)
                pending.append((spec.to_dict(), rep))

    if pending:
        if parallelism > 1:
            with ProcessPoolExecutor(max_workers=parallelism) as pool:
                results = list(pool.map(_run_replicate_worker, pending))
        else:
            results = [_run_replicate_worker(job) for job in pending]
        for row in results:
            spec_id = row["spec_id"]
            times = row.pop("times", None)
            if times is not None:
                entries = [t for t in all_times.setdefault(spec_id, []) if t["rep"] != row["rep"]]
                entries.append({"rep": row["rep"], **times})
                all_times[spec_id] = entries
            all_rows[spec_id][row["rep"]] = row

    summaries = []
    for spec in campaign.specs:
        rows = [all_rows[spec.id][rep] for rep in sorted(all_rows[spec.id])]
        with open(_raw_path(out_dir, spec.id), "w") as f:
            for row in rows:
                f.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")
        summaries.append(summarize_rows(spec.id, rows, all_times.get(spec.id, [])))

    with open(os.path.join(out_dir, "timings.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["spec_id", "rep", "select_time", "eval_time", "total_time"])
        for spec in campaign.specs:
            for t in sorted(all_times.get(spec.id, []), key=lambda t: t["rep"]):
                writer.writerow([spec.id, t["rep"], t["select_time"], t["eval_time"], t["total_time"]])

    write_summary_csv(summaries, os.path.join(out_dir, "summary.csv"))
    return summaries


def write_summary_csv(summaries: list[SummaryRow], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SummaryRow.COLUMNS)
        for s in summaries:
            writer.writerow(s.as_list())


def summarize_directory(out_dir: str) -> list[SummaryRow]:
    """Recompute summaries from the raw files of a finished (or partial) run."""
    raw_dir = os.path.join(out_dir, "raw")
    if not os.path.isdir(raw_dir):
        raise FileNotFoundError(f"no raw/ directory under {out_dir}")
    timings = _load_timings(out_dir)
    summaries = []
    for name in sorted(os.listdir(raw_dir)):
        if not name.endswith(".jsonl"):
            continue
        spec_id = name[: -len(".jsonl")]
        with open(os.path.join(raw_dir, name)) as f:
            rows = [json.loads(line) for line in f if line.strip()]
        summaries.append(summarize_rows(spec_id, rows, timings.get(spec_id, [])))
    write_summary_csv(summaries, os.path.join(out_dir, "summary.csv"))
    return summaries


def list_functions() -> list[dict]:
    out = []
    for name in catalog_names():
        fn = lookup(name)
        n, m = DESIGN_DEFAULTS.get(fn.name, (21, None))
        out.append(
            {
                "name": fn.name,
                "dim": fn.dim,
                "minimum": fn.minimum,
                "domain": fn.domain.to_dict(),
                "default_initial": n,
                "default_pool": m,
            }
        )
    return out


# -- external objectives ----------------------------------------------------


class ProtocolError(RuntimeError):
    """The child process wrote a line the harness could not parse/match."""


class EvaluationTimeout(RuntimeError):
    """The child did not answer a request within the deadline."""


class ChildExitError(RuntimeError):
    """The child process terminated while evaluations were outstanding."""


class ExternalObjective(Objective):
    """Objective evaluated by a child process over line-delimited JSON.

    Per evaluation the harness writes one request ``{"id": k, "x": [..]}``
    to the child's stdin and waits for a response line ``{"id": k, "y": v}``
    on its stdout. Responses may arrive out of order; they are matched by id,
    so up to ``max_inflight`` evaluations can be outstanding at once (batch
    evaluations exploit this). Every request attempt is charged to the
    evaluation ledger, failures included.

    Parameters
    ----------
    cmd : list[str]
        Child command line.
    dim : int
        Declared input dimension.
    domain : Domain
        Declared box; requests outside it are rejected before reaching the
        child.
    timeout : float
        Seconds to wait per evaluation.
    """

    def __init__(self, cmd, dim: int, domain: Domain, timeout: float = 60.0, max_inflight: int = 8, name: str | None = None):
        super().__init__(self._evaluate, name=name or "external")
        self.cmd = list(cmd)
        self.dim = int(dim)
        self.domain = domain
        self.timeout = float(timeout)
        self.max_inflight = int(max_inflight)
        self._proc = subprocess.Popen(
            self.cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
        )
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._results: dict[int, object] = {}
        self._next_id = 0
        self._reader_error: Exception | None = None
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self):
        try:
            assert self._proc.stdout is not None
            for line in self._proc.stdout:
                line = line.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line)
                    rid = int(msg["id"])
                    y = float(msg["y"])
                except (ValueError, KeyError, TypeError) as err:
                    with self._cond:
                        self._reader_error = ProtocolError(f"bad response line {line!r}: {err}")
                        self._cond.notify_all()
                    return
                with self._cond:
                    self._results[rid] = y
                    self._cond.notify_all()
        finally:
            with self._cond:
                if self._reader_error is None:
                    self._reader_error = ChildExitError(
                        f"child exited with code {self._proc.poll()}"
                    )
                self._cond.notify_all()

    def _submit(self, x) -> int:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise ProtocolError(f"point has dimension {x.shape[0]}, declared {self.dim}")
        self.domain.validate(x)
        with self._cond:
            rid = self._next_id
            self._next_id += 1
        request = json.dumps({"id": rid, "x": x.tolist()}) + "\n"
        try:
            assert self._proc.stdin is not None
            self._proc.stdin.write(request)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as err:
            raise ChildExitError(f"could not write to child: {err}") from err
        return rid

    def _wait(self, rid: int) -> float:
        deadline = time.monotonic() + self.timeout
        with self._cond:
            while rid not in self._results:
                if self._reader_error is not None and rid not in self._results:
                    raise self._reader_error
                left = deadline - time.monotonic()
                if left <= 0:
                    raise EvaluationTimeout(f"no response for request {rid} in {self.timeout}s")
                self._cond.wait(timeout=left)
            return float(self._results.pop(rid))

    def _evaluate(self, x) -> float:
        return self._wait(self._submit(x))

    def evaluate_batch(self, points) -> list[float]:
        """Pipeline up to ``max_inflight`` requests; results in input order."""
        results: list[float] = []
        queue = list(points)
        inflight: list[int] = []
        submitted = 0
        try:
            while queue or inflight:
                while queue and len(inflight) < self.max_inflight:
                    p = queue.pop(0)
                    self._n_evaluations += 1
                    inflight.append(self._submit(p))
                    submitted += 1
                results.append(self._wait(inflight.pop(0)))
        except Exception:
            raise
        return results

    def __call__(self, x) -> float:
        self._n_evaluations += 1
        return self._evaluate(x)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
                self._proc.wait(timeout=2.0)
            except Exception:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_objective(cmd, dim: int, domain, timeout: float = 60.0, max_inflight: int = 8) -> ExternalObjective:
    """Build an :class:`ExternalObjective` from a command spec."""
    from .validation import check_domain

    return ExternalObjective(cmd, dim, check_domain(domain, dim), timeout=timeout, max_inflight=max_inflight)
