import numpy as np
import pytest

from marslasso import (
    ArgumentError,
    BasisIndex,
    DomainError,
    MarsModel,
    Term,
    build_knots,
    design_matrix,
    enumerate_basis,
    eval_model,
    eval_term,
    vmars_finite,
)
from marslasso.sim import test_function as get_truth

from oracles import brute_design, fig1_value


class TestBuildKnots:
    def test_sorted_and_padded(self):
        g = build_knots(np.array([[0.2], [0.5], [0.9]]))
        np.testing.assert_array_equal(g.knots[0], [0, 0.2, 0.5, 0.9, 1])
        assert g.n == (4,)

    def test_endpoints_only(self):
        g = build_knots(np.array([[0.0], [1.0]]))
        np.testing.assert_array_equal(g.knots[0], [0, 1])
        assert g.n == (1,)

    def test_duplicates_collapse(self):
        g = build_knots(np.array([[0.5], [0.5]]))
        np.testing.assert_array_equal(g.knots[0], [0, 0.5, 1])
        assert g.n == (2,)

    def test_rejects_outside_unit_cube(self):
        with pytest.raises(DomainError):
            build_knots(np.array([[0.5, 1.2]]))
        with pytest.raises(DomainError):
            build_knots(np.array([[-0.1]]))


class TestEnumerateBasis:
    def test_one_dimension(self):
        g = build_knots(np.array([[0.2], [0.5], [0.9]]))
        basis = enumerate_basis(g, 1)
        assert basis == [BasisIndex((1,), (l,)) for l in range(4)]

    def test_product_count(self):
        g = build_knots(np.array([[0.3, 0.7], [0.3, 0.7]]))
        assert g.n == (2, 2)
        assert len(enumerate_basis(g, 2)) == 3 * 3 - 1

    def test_main_effects_only(self):
        g = build_knots(np.array([[0.5, 0.5, 0.5]]))
        basis = enumerate_basis(g, 1)
        assert len(basis) == 6
        assert all(b.order == 1 for b in basis)

    def test_lexicographic_order(self):
        g = build_knots(np.array([[0.3, 0.7], [0.3, 0.7]]))
        basis = enumerate_basis(g)
        assert basis == sorted(basis, key=lambda b: (int("".join(map(str, b.alpha)), 2), b.l))
        assert [b.alpha for b in basis][:2] == [(0, 1), (0, 1)]

    def test_nested_in_s(self):
        g = build_knots(np.random.default_rng(0).random((4, 3)))
        assert set(enumerate_basis(g, 1)) <= set(enumerate_basis(g, 2)) <= set(enumerate_basis(g, 3))

    @pytest.mark.parametrize("s", [0, 3])
    def test_bad_cap(self, s):
        g = build_knots(np.array([[0.5, 0.5]]))
        with pytest.raises(ArgumentError):
            enumerate_basis(g, s)


class TestEvalTerm:
    def test_single_hinge(self):
        assert eval_term((1, 0), (0.3,), (0.5, 0.9)) == pytest.approx(0.2)

    def test_clamped_factor(self):
        assert eval_term((1, 1), (0.3, 0.6), (0.5, 0.5)) == 0.0

    def test_linear_product(self):
        assert eval_term((1, 1), (0.0, 0.0), (0.4, 0.5)) == pytest.approx(0.2)


class TestDesignMatrix:
    def test_hand_column(self):
        X = np.array([[0.2], [0.5], [0.9]])
        g = build_knots(X)
        basis = enumerate_basis(g)
        M, mask = design_matrix(X, basis, g)
        np.testing.assert_allclose(M[:, 1], [0.0, 0.3, 0.7])
        np.testing.assert_array_equal(M[:, 0], X[:, 0])
        assert not mask[0] and mask[1:].all()

    def test_unpenalized_count(self):
        X = np.array([[0.3, 0.7], [0.3, 0.7]])
        g = build_knots(X)
        _, mask = design_matrix(X, enumerate_basis(g), g)
        assert (~mask).sum() == 3

    def test_matches_elementwise_evaluation(self):
        X = np.random.default_rng(3).random((7, 3))
        g = build_knots(X)
        basis = enumerate_basis(g, 2)
        M, _ = design_matrix(X, basis, g)
        terms = [(b.alpha, [g.knots[k][lk] for k, lk in zip(b.support, b.l)]) for b in basis]
        np.testing.assert_array_equal(M, brute_design(X, terms))
        for j in (0, 5, len(basis) - 1):
            b = basis[j]
            t = [g.knots[k][lk] for k, lk in zip(b.support, b.l)]
            assert all(M[i, j] == eval_term(b.alpha, t, X[i]) for i in range(len(X)))


class TestModel:
    def test_fig1_values(self):
        f = get_truth("fig1").truth
        assert eval_model(f, (0, 0)) == 10.0
        assert eval_model(f, (1, 1)) == pytest.approx(11.79, abs=1e-12)
        for x in np.random.default_rng(1).random((20, 2)):
            assert eval_model(f, x) == pytest.approx(fig1_value(*x), abs=1e-12)

    def test_intercept_only(self):
        m = MarsModel(d=2, intercept=3.0)
        assert eval_model(m, (0.1, 0.7)) == 3.0

    def test_vmars_finite(self):
        assert vmars_finite(get_truth("fig1").truth) == 15.0
        linear = MarsModel(d=2, intercept=1.0, terms=(Term((1, 0), (0.0,), 4.0), Term((1, 1), (0.0, 0.0), -2.0)))
        assert vmars_finite(linear) == 0.0
        single = MarsModel(d=1, intercept=0.0, terms=(Term((1,), (0.3,), -2.5),))
        assert vmars_finite(single) == 2.5

    def test_affine_in_coefficients(self):
        f = get_truth("fig1").truth
        x = (0.45, 0.8)
        for c in (-2.0, 0.5, 3.0):
            scaled = MarsModel(d=2, intercept=f.intercept,
                               terms=tuple(Term(t.alpha, t.knots, c * t.coef) for t in f.terms))
            assert eval_model(scaled, x) == pytest.approx(c * (eval_model(f, x) - f.intercept) + f.intercept)

    def test_invariants_enforced(self):
        with pytest.raises(ArgumentError):
            MarsModel(d=1, intercept=0.0, terms=(Term((1,), (0.3,), 0.0),))
        with pytest.raises(ArgumentError):
            MarsModel(d=1, intercept=0.0, terms=(Term((1,), (0.3,), 1.0), Term((1,), (0.3,), 2.0)))
        with pytest.raises(DomainError):
            MarsModel(d=1, intercept=0.0, terms=(Term((1,), (1.0,), 1.0),))
