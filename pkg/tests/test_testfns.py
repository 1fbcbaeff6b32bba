import math

import numpy as np
import pytest

from egobatch import UnknownFunctionError, lookup
from egobatch.testfns import catalog_names

PUBLISHED = [
    ("branin", (math.pi, 2.275), 0.397887, 1e-5),
    ("sixcamel", (0.0898, -0.7126), -1.0316, 1e-4),
    ("goldprice", (0.0, -1.0), -3.129126, 1e-5),
    ("sin2", (0.0, 0.0), 0.9, 1e-12),
    ("hartmann3", (0.1146, 0.5556, 0.8525), -3.86278, 1e-4),
    ("hartmann6", (0.2017, 0.1500, 0.4769, 0.2753, 0.3117, 0.6573), -3.32237, 1e-4),
]


class TestPublishedOptima:
    @pytest.mark.parametrize("name,point,minimum,tol", PUBLISHED)
    def test_value_at_published_minimizer(self, name, point, minimum, tol):
        fn = lookup(name)
        assert fn(np.array(point)) == pytest.approx(minimum, abs=tol)
        assert fn.minimum == pytest.approx(minimum, abs=tol)

    def test_every_catalog_minimizer_inside_domain_and_matches(self):
        for name in catalog_names():
            fn = lookup(name)
            for mz in fn.minimizers:
                assert fn.domain.contains(np.array(mz))
                assert fn(np.array(mz)) == pytest.approx(fn.minimum, abs=1e-4)

    def test_branin_three_minimizers_agree(self):
        fn = lookup("branin")
        vals = [fn(np.array(m)) for m in fn.minimizers]
        assert len(vals) == 3
        assert max(vals) - min(vals) < 1e-5

    def test_sin2_origin_plug_in(self):
        assert lookup("sin2")(np.zeros(2)) == pytest.approx(0.9, abs=1e-15)

    def test_ackley_zero_at_origin(self):
        for s in (2, 10):
            assert abs(lookup("ackley", dim=s)(np.zeros(s))) < 1e-12

    def test_trid12_formula_minimum(self):
        fn = lookup("trid12")
        assert fn.minimum == -352
        x = np.array(fn.minimizers[0], dtype=float)
        assert fn(x) == pytest.approx(-352, abs=1e-6)

    def test_levy_zero_at_ones_vector(self):
        fn = lookup("levy10")
        assert abs(fn(np.ones(10))) < 1e-12
        # the all-zeros point is NOT the minimizer of the published formula
        assert fn(np.zeros(10)) > 1.0


class TestStructure:
    def test_sixcamel_symmetry(self):
        fn = lookup("sixcamel")
        pts = fn.domain.uniform(np.random.default_rng(0), 1000)
        for p in pts:
            assert fn(p) == pytest.approx(fn(-p), abs=1e-12)

    def test_evaluators_total_on_domain(self):
        rng = np.random.default_rng(1)
        for name in catalog_names():
            fn = lookup(name)
            vals = [fn(p) for p in fn.domain.uniform(rng, 200)]
            assert np.all(np.isfinite(vals))

    def test_ackley2_uses_toy_domain(self):
        fn = lookup("ackley2")
        assert np.array_equal(fn.domain.lower, [-2, -2])
        assert np.array_equal(fn.domain.upper, [2, 2])

    def test_ackley10_uses_standard_domain(self):
        fn = lookup("ackley10")
        assert np.array_equal(fn.domain.lower, [-5.12] * 10)

    def test_trid_domain_scales_with_dimension(self):
        fn = lookup("trid12")
        assert np.array_equal(fn.domain.lower, [-144.0] * 12)

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError):
            lookup("branin")(np.zeros(3))


class TestLookup:
    def test_unknown_function(self):
        with pytest.raises(UnknownFunctionError):
            lookup("nosuchfn")

    def test_fixed_name_with_suffix_rejected(self):
        with pytest.raises(UnknownFunctionError):
            lookup("branin3")

    def test_parametric_requires_dimension(self):
        with pytest.raises(UnknownFunctionError):
            lookup("levy")

    def test_dim_argument_equivalent_to_suffix(self):
        a = lookup("trid", dim=12)
        b = lookup("trid12")
        assert a.name == b.name == "trid12"
        assert a.minimum == b.minimum

    def test_objective_counts_evaluations(self):
        obj = lookup("branin").objective()
        obj(np.array([0.0, 5.0]))
        obj(np.array([1.0, 5.0]))
        assert obj.n_evaluations == 2
        assert obj.name == "branin"
