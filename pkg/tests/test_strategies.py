import json

import numpy as np
import pytest

from egobatch import (
    DUP_TOL,
    AcceleratedEGO,
    CandidatePool,
    ConstantLiar,
    Design,
    Domain,
    EGO,
    Objective,
    PoolExhaustedError,
    RunRecord,
    SingularCorrelationError,
    StopRule,
    lookup,
)

FAST = dict(restarts=2, scan_per_dim=64, polish_starts=1)


def sphere(x):
    return float(np.sum(x**2))


SPHERE_DOMAIN = Domain([-1.0, -1.0], [1.0, 1.0])


class TestStopRule:
    def test_requires_at_least_one_rule(self):
        with pytest.raises(ValueError):
            StopRule()

    def test_target_needs_epsilon(self):
        with pytest.raises(ValueError):
            StopRule(target=0.0)

    def test_reached_priorities(self):
        rule = StopRule(target=0.0, epsilon=0.1, max_evaluations=10, max_stages=3)
        assert rule.reached(0.05, 2, 0) == "target"
        assert rule.reached(5.0, 10, 0) == "budget"
        assert rule.reached(5.0, 2, 3) == "max-stages"
        assert rule.reached(5.0, 2, 1) is None

    def test_dict_round_trip(self):
        rule = StopRule(max_evaluations=50, max_stages=7)
        assert StopRule.from_dict(rule.to_dict()) == rule


class TestSerialEgo:
    def test_budget_zero_extra_evaluations(self):
        obj = Objective(sphere)
        stop = StopRule(max_evaluations=8)
        rec = EGO(stop=stop, random_state=0, **FAST).minimize(obj, SPHERE_DOMAIN, 8)
        assert rec.n_stages == 0
        assert rec.stop_reason == "budget"
        assert rec.best_y == min(rec.initial_responses)
        assert obj.n_evaluations == 8 == rec.n_evaluations

    def test_constant_objective_degenerate_ei(self):
        rec = EGO(stop=StopRule(max_stages=2), random_state=1, **FAST).minimize(
            lambda x: 5.0, SPHERE_DOMAIN, 6
        )
        assert rec.stop_reason == "max-stages"
        assert rec.n_stages == 2
        assert rec.best_y == 5.0

    def test_target_stop_on_sphere(self):
        stop = StopRule(target=0.0, epsilon=0.05, max_stages=15)
        rec = EGO(stop=stop, random_state=3, **FAST).minimize(sphere, SPHERE_DOMAIN, 8)
        assert rec.stop_reason in ("target", "max-stages")
        if rec.stop_reason == "target":
            assert rec.best_y < 0.05

    def test_stage_batches_are_single_point(self):
        rec = EGO(stop=StopRule(max_stages=3), random_state=2, **FAST).minimize(
            sphere, SPHERE_DOMAIN, 6
        )
        assert all(s.batch_size == 1 for s in rec.stages)

    def test_evaluation_ledger_matches_totals(self):
        obj = Objective(sphere)
        rec = EGO(stop=StopRule(max_stages=4), random_state=5, **FAST).minimize(
            obj, SPHERE_DOMAIN, 6
        )
        assert obj.n_evaluations == rec.n_evaluations == 6 + 4


class TestAcceleratedEgo:
    def test_deterministic_bit_identical(self):
        stop = StopRule(max_stages=3)
        a = AcceleratedEGO(stop=stop, q=4, pool=40, random_state=11, **FAST).minimize(
            sphere, SPHERE_DOMAIN, 6
        )
        b = AcceleratedEGO(stop=stop, q=4, pool=40, random_state=11, **FAST).minimize(
            sphere, SPHERE_DOMAIN, 6
        )
        assert a.to_json(include_times=False) == b.to_json(include_times=False)

    def test_q1_is_exactly_serial_ego(self):
        stop = StopRule(max_stages=3)
        a = EGO(stop=stop, random_state=21, **FAST).minimize(sphere, SPHERE_DOMAIN, 6)
        b = AcceleratedEGO(stop=stop, q=1, pool=40, random_state=21, **FAST).minimize(
            sphere, SPHERE_DOMAIN, 6
        )
        da, db = a.to_dict(include_times=False), b.to_dict(include_times=False)
        da["config"].pop("q", None), db["config"].pop("q", None)
        da["config"].pop("pool_size", None), db["config"].pop("pool_size", None)
        da["config"].pop("strategy"), db["config"].pop("strategy")
        assert json.dumps(da, sort_keys=True) == json.dumps(db, sort_keys=True)

    def test_batch_composition_and_origins(self):
        obj = Objective(sphere)
        rec = AcceleratedEGO(
            stop=StopRule(max_stages=2), q=4, pool=40, random_state=2, **FAST
        ).minimize(obj, SPHERE_DOMAIN, 6)
        assert all(s.batch_size == 4 for s in rec.stages)
        assert all(len(s.weights) == 40 for s in rec.stages)
        assert obj.n_evaluations == rec.n_evaluations == 6 + 8

    def test_argmax_ei_not_below_pool_max(self):
        for seed in range(3):
            rec = AcceleratedEGO(
                stop=StopRule(max_stages=3), q=3, pool=30, random_state=seed, **FAST
            ).minimize(sphere, SPHERE_DOMAIN, 6)
            for s in rec.stages:
                assert s.argmax_ei >= s.pool_max_ei - 1e-12

    def test_best_so_far_monotone(self):
        for seed in range(3):
            rec = AcceleratedEGO(
                stop=StopRule(max_stages=4), q=3, pool=30, random_state=seed, **FAST
            ).minimize(sphere, SPHERE_DOMAIN, 6)
            bests = [s.best_so_far for s in rec.stages]
            assert all(b2 <= b1 for b1, b2 in zip(bests, bests[1:]))
            assert bests[0] <= min(rec.initial_responses)

    def test_all_points_in_domain_and_separated(self):
        rec = AcceleratedEGO(
            stop=StopRule(max_stages=4), q=4, pool=40, random_state=9, **FAST
        ).minimize(sphere, SPHERE_DOMAIN, 8)
        pts = np.array([p for p, _ in rec.iter_evaluations()])
        assert np.all(pts >= -1.0) and np.all(pts <= 1.0)
        unit = rec.domain.to_unit(pts)
        dist = np.max(np.abs(unit[:, None, :] - unit[None, :, :]), axis=-1)
        np.fill_diagonal(dist, 1.0)
        assert dist.min() >= DUP_TOL

    def test_budget_truncates_last_batch(self):
        rec = AcceleratedEGO(
            stop=StopRule(max_evaluations=6 + 5 + 2, max_stages=10),
            q=5,
            pool=40,
            random_state=4,
            **FAST,
        ).minimize(sphere, SPHERE_DOMAIN, 6)
        assert [s.batch_size for s in rec.stages] == [5, 2]
        assert rec.stop_reason == "budget"
        assert rec.n_evaluations == 13

    def test_pool_capacity_boundary(self):
        # a triple point offers a single admissible location: J=1 succeeds,
        # J=2 exhausts the pool after the duplicate elimination
        design = Design(SPHERE_DOMAIN)
        pts = np.array([[-0.5, -0.5], [0.5, 0.5], [0.0, 0.5], [-0.5, 0.5]])
        for p in pts:
            design.append(p, sphere(p))
        pool = CandidatePool(
            np.array([[0.25, -0.25], [0.25, -0.25], [0.25, -0.25]]), SPHERE_DOMAIN, "external"
        )
        ok = AcceleratedEGO(
            stop=StopRule(max_stages=1), q=2, pool=pool, random_state=0, **FAST
        ).minimize(sphere, SPHERE_DOMAIN, design)
        assert ok.n_stages == 1
        assert ok.stages[0].batch_size == 2
        with pytest.raises(PoolExhaustedError) as err:
            AcceleratedEGO(
                stop=StopRule(max_stages=1), q=3, pool=pool, random_state=0, **FAST
            ).minimize(sphere, SPHERE_DOMAIN, design)
        assert err.value.record is not None
        assert err.value.record.stop_reason == "error:pool-exhausted"

    def test_pool_smaller_than_q_rejected(self):
        with pytest.raises(ValueError):
            AcceleratedEGO(
                stop=StopRule(max_stages=1), q=5, pool=3, random_state=0, **FAST
            ).minimize(sphere, SPHERE_DOMAIN, 6)

    def test_singular_correlation_attaches_partial_record(self, monkeypatch):
        calls = {"n": 0}
        from egobatch import strategies as st

        original = st._SurrogateStrategy._fit

        def flaky(self, design, stage, seed):
            if stage >= 1:
                raise SingularCorrelationError("forced failure")
            return original(self, design, stage, seed)

        monkeypatch.setattr(st._SurrogateStrategy, "_fit", flaky)
        with pytest.raises(SingularCorrelationError) as err:
            AcceleratedEGO(
                stop=StopRule(max_stages=5), q=3, pool=30, random_state=1, **FAST
            ).minimize(sphere, SPHERE_DOMAIN, 6)
        assert err.value.record is not None
        assert err.value.record.n_stages == 1
        assert err.value.record.stop_reason == "error:singular-correlation"


class TestConstantLiar:
    def test_batch_sizes_and_origin_tags(self):
        obj = Objective(sphere)
        rec = ConstantLiar(
            stop=StopRule(max_stages=2), q=3, random_state=3, **FAST
        ).minimize(obj, SPHERE_DOMAIN, 6)
        assert all(s.batch_size == 3 for s in rec.stages)
        assert obj.n_evaluations == rec.n_evaluations == 6 + 6
        assert all(s.weights is None for s in rec.stages)

    def test_lie_value_alias_matches_lie_min_single_stage(self):
        stop = StopRule(max_evaluations=6 + 3)
        a = ConstantLiar(stop=stop, q=3, lie="min", random_state=8, **FAST).minimize(
            sphere, SPHERE_DOMAIN, 6
        )
        lie_const = min(a.initial_responses)
        b = ConstantLiar(stop=stop, q=3, lie=lie_const, random_state=8, **FAST).minimize(
            sphere, SPHERE_DOMAIN, 6
        )
        da, db = a.to_dict(include_times=False), b.to_dict(include_times=False)
        da["config"].pop("lie"), db["config"].pop("lie")
        assert json.dumps(da, sort_keys=True) == json.dumps(db, sort_keys=True)

    def test_lie_max_variant_runs(self):
        rec = ConstantLiar(
            stop=StopRule(max_stages=2), q=2, lie="max", random_state=1, **FAST
        ).minimize(sphere, SPHERE_DOMAIN, 6)
        assert rec.n_stages == 2

    def test_best_so_far_monotone(self):
        rec = ConstantLiar(
            stop=StopRule(max_stages=3), q=3, random_state=5, **FAST
        ).minimize(sphere, SPHERE_DOMAIN, 6)
        bests = [s.best_so_far for s in rec.stages]
        assert all(b2 <= b1 for b1, b2 in zip(bests, bests[1:]))

    def test_batch_points_separated(self):
        rec = ConstantLiar(
            stop=StopRule(max_stages=3), q=4, random_state=6, **FAST
        ).minimize(sphere, SPHERE_DOMAIN, 8)
        pts = np.array([p for p, _ in rec.iter_evaluations()])
        unit = rec.domain.to_unit(pts)
        dist = np.max(np.abs(unit[:, None, :] - unit[None, :, :]), axis=-1)
        np.fill_diagonal(dist, 1.0)
        assert dist.min() >= DUP_TOL

    def test_q1_is_exactly_serial_ego(self):
        stop = StopRule(max_stages=2)
        a = EGO(stop=stop, random_state=13, **FAST).minimize(sphere, SPHERE_DOMAIN, 6)
        b = ConstantLiar(stop=stop, q=1, random_state=13, **FAST).minimize(
            sphere, SPHERE_DOMAIN, 6
        )
        assert [s.argmax_point for s in a.stages] == [s.argmax_point for s in b.stages]


class TestRunRecord:
    @pytest.fixture()
    def record(self):
        return AcceleratedEGO(
            stop=StopRule(max_stages=2), q=3, pool=30, random_state=1, **FAST
        ).minimize(sphere, SPHERE_DOMAIN, 6)

    def test_json_round_trip(self, record):
        clone = RunRecord.from_json(record.to_json())
        assert clone.to_json() == record.to_json()
        assert clone.n_evaluations == record.n_evaluations
        assert clone.best_y == record.best_y

    def test_deterministic_json_drops_times(self, record):
        d = json.loads(record.to_json(include_times=False))
        assert "select_time" not in d["stages"][0]
        assert "initial_eval_time" not in d

    def test_csv_rows(self, record, tmp_path):
        path = tmp_path / "stages.csv"
        record.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "stage,batch_size,argmax_ei,best_so_far,select_time,eval_time"
        assert len(lines) == 1 + record.n_stages

    def test_totals_consistent(self, record):
        assert record.n_evaluations == len(record.initial_points) + sum(
            s.batch_size for s in record.stages
        )
        all_responses = list(record.initial_responses) + [
            r for s in record.stages for r in s.responses
        ]
        assert record.best_y == min(all_responses)

    def test_initial_design_passed_as_design_object(self):
        design = Design(SPHERE_DOMAIN)
        rng = np.random.default_rng(0)
        for p in rng.uniform(-1, 1, size=(6, 2)):
            design.append(p, sphere(p))
        obj = Objective(sphere)
        rec = EGO(stop=StopRule(max_stages=1), random_state=0, **FAST).minimize(
            obj, SPHERE_DOMAIN, design
        )
        # pre-evaluated initial design consumes no objective budget
        assert obj.n_evaluations == 1
        assert rec.n_evaluations == 7
