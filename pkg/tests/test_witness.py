import json
import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slnwitness.cases import CASES
from slnwitness.errors import DomainError
from slnwitness.geometry import STRATEGIES, reduce_to_independent, vertex, vertex_matrix
from slnwitness.physics import ExperimentParams, joint_table
from slnwitness.stats import exact_moments, lambda_decompose
from slnwitness.witness import (
    Verdict,
    ViolationReport,
    assess,
    evaluate,
    find_witness,
    lhs,
    quadratic_sup,
    rhs_sup,
    rhs_sup_many,
)

coef = st.floats(-50, 50)
lam_strategy = st.lists(st.floats(-2, 2), min_size=8, max_size=8).map(np.array)
DENSE_T = np.linspace(0.0, 1.0, 100_001)


class TestQuadraticSup:
    @pytest.mark.parametrize(
        "abc, expected", [((-1, 1, 0), (0.25, 0.5)), ((1, 0, 0), (1.0, 1.0)), ((0, -2, 3), (3.0, 0.0))]
    )
    def test_values(self, abc, expected):
        assert quadratic_sup(*abc) == pytest.approx(expected)

    @given(coef, coef, coef)
    def test_dense_grid(self, a, b, c):
        value, t = quadratic_sup(a, b, c)
        dense = (a * DENSE_T + b) * DENSE_T + c
        assert value >= dense.max() - 1e-9
        assert value - dense.max() <= 1e-9
        assert 0.0 <= t <= 1.0 and a * t * t + b * t + c == pytest.approx(value, abs=1e-9)


class TestRhs:
    def test_marginal_term(self):
        assert rhs_sup(np.eye(8)[6])[0] == 1.0

    def test_zero(self):
        assert rhs_sup(np.zeros(8))[0] == 0.0

    def test_interior(self):
        value, (s, t) = rhs_sup(np.eye(8)[1])
        assert value == pytest.approx(0.5) and t == pytest.approx(0.5) and s.a1 == 0

    @given(lam_strategy)
    def test_dominates_dense_curves(self, lam):
        value, _ = rhs_sup(lam)
        for s in STRATEGIES:
            pts = np.array([vertex(s, t).m for t in np.linspace(0, 1, 2001)])
            assert (pts @ lam).max() <= value + 1e-12

    @given(lam_strategy)
    def test_attained(self, lam):
        value, (s, t) = rhs_sup(lam)
        assert lam @ vertex(s, t).m == pytest.approx(value, abs=1e-12)

    @given(st.lists(lam_strategy, min_size=1, max_size=5))
    def test_vectorised(self, lams):
        many = rhs_sup_many(np.array(lams))
        assert np.allclose(many, [rhs_sup(l)[0] for l in lams], atol=1e-13)

    def test_wrong_length(self):
        with pytest.raises(DomainError):
            rhs_sup(np.ones(7))


class TestLhs:
    def test_basis(self, case_vectors):
        v = case_vectors["C"]
        assert lhs(np.eye(8)[0], v) == v[0]
        assert lhs(np.zeros(8), v) == 0.0

    def test_lambda_form(self):
        case = CASES["C"]
        table = joint_table(case.params)
        m1, m2, _, _ = exact_moments(lambda_decompose(case.lam), table)
        assert m1 + m2 == pytest.approx(lhs(case.lam, reduce_to_independent(table)), abs=1e-12)


class TestEvaluate:
    @pytest.mark.parametrize("c", [0.1, 3.0, 100.0])
    @pytest.mark.parametrize("name", sorted(CASES))
    def test_scale_invariance(self, name, c, case_vectors):
        case = CASES[name]
        found = find_witness(case_vectors[name])
        for lam in (case.lam, found.lam):
            a = evaluate(lam, case.params)
            b = evaluate(c * lam, case.params)
            assert a.verdict == b.verdict
            assert b.v_coeff == pytest.approx(a.v_coeff, rel=1e-9)

    def test_zero_witness(self):
        rep = evaluate(np.zeros(8), CASES["A"].params)
        assert rep.v_coeff == 0.0 and rep.verdict is Verdict.NO_VIOLATION

    def test_non_latent_violation(self):
        # Bob's n_a = 1 statistics are explicitly nonclassical below gamma_min
        params = ExperimentParams(1.0, 0.9, 0.9, 0.0, 0.3)
        rep = find_witness(reduce_to_independent(joint_table(params)))
        assert rep is not None and rep.verdict is Verdict.LHCS_VIOLATION
        assert min(rep.margins.values()) < 0

    def test_json_round_trip(self, case_vectors):
        rep = find_witness(case_vectors["B"])
        data = json.loads(json.dumps(rep.to_dict()))
        assert set(data) == {"lhs", "rhs", "epsilon_coeff", "v_coeff", "lambda", "argmax", "verdict"}
        back = ViolationReport.from_dict(data)
        again = evaluate(back.lam, CASES["B"].params)
        assert again.lhs == pytest.approx(rep.lhs, abs=1e-12)
        assert again.rhs == pytest.approx(rep.rhs, abs=1e-12)
        assert back.verdict is rep.verdict and back.argmax == rep.argmax

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            assess(np.ones(5), joint_table(CASES["A"].params))


class TestFindWitness:
    @pytest.mark.parametrize("method", ["lp", "hull"])
    def test_vacuum_none(self, method):
        v = reduce_to_independent(joint_table(ExperimentParams(0.0, 0.7, 0.5, 0.3, 1.0)))
        assert find_witness(v, M=10, method=method) is None

    @pytest.mark.parametrize("name", sorted(CASES))
    def test_cases_violate(self, name, case_vectors):
        rep = find_witness(case_vectors[name])
        assert rep.v_coeff > 0 and rep.verdict is Verdict.SLN
        # certificate: exact continuous-t supremum dominates a dense grid
        dense = vertex_matrix(4001) @ rep.lam
        assert rep.rhs >= dense.max() - 1e-12
        assert rep.lhs - rep.rhs > 1e-10

    def test_hull_small_grid(self, case_vectors):
        rep = find_witness(case_vectors["C"], M=15, method="hull")
        assert rep is not None and rep.v_coeff > 0
        assert rep.search_info["method"] == "hull"

    def test_hull_degenerate_falls_back(self, caplog):
        # with M=2 the 8 vertices cannot span 8 dimensions
        v = reduce_to_independent(joint_table(CASES["C"].params))
        with caplog.at_level(logging.WARNING):
            rep = find_witness(v, M=2, method="hull")
        assert "falling back" in caplog.text
        assert rep is None or rep.search_info.get("fallback") == "lp"

    def test_bad_arguments(self, case_vectors):
        with pytest.raises(DomainError):
            find_witness(case_vectors["A"], M=1)
        with pytest.raises(DomainError):
            find_witness(case_vectors["A"], method="simplex")

    def test_deterministic(self, case_vectors):
        a = find_witness(case_vectors["A"])
        b = find_witness(case_vectors["A"])
        assert np.array_equal(a.lam, b.lam)

    @given(
        st.lists(st.tuples(st.sampled_from(STRATEGIES), st.floats(0, 1), st.floats(0.01, 1)), min_size=1, max_size=6)
    )
    def test_sound_on_mixtures(self, parts):
        w = np.array([p[2] for p in parts])
        w /= w.sum()
        v = sum(wi * vertex(s, t).m for wi, (s, t, _) in zip(w, parts))
        assert find_witness(v, M=12) is None
