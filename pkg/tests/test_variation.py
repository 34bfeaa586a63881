import math

import numpy as np
import pytest

from marslasso import ArgumentError, NumericError, SmoothFunction, vmars_smooth
from marslasso.sim import test_function as get_truth
from marslasso.variation import effective_step, mixed_partial_fd, stencil_weights

from oracles import fig2_mixed22, fig2_vmars_quad


def fig2():
    return get_truth("fig2").truth


def test_affine_has_zero_variation():
    assert vmars_smooth(SmoothFunction(1, lambda X: 2.0 + 3.0 * X[:, 0])) == pytest.approx(0, abs=1e-8)


def test_square():
    assert vmars_smooth(SmoothFunction(1, lambda X: X[:, 0] ** 2)) == pytest.approx(2.0, rel=1e-6)


def test_fig2_against_adaptive_quadrature():
    assert vmars_smooth(fig2()) == pytest.approx(fig2_vmars_quad(), rel=2e-4)


@pytest.mark.parametrize("m", [64, 128])
def test_grid_refinement_stable(m):
    a, b = vmars_smooth(fig2(), m), vmars_smooth(fig2(), 2 * m)
    assert abs(a - b) / b < 0.01


def test_additive_components():
    g = SmoothFunction(1, lambda X: X[:, 0] ** 3)
    h = SmoothFunction(1, lambda X: np.sin(X[:, 0]))
    both = SmoothFunction(2, lambda X: X[:, 0] ** 3 + np.sin(X[:, 1]))
    one_d = vmars_smooth(g) + vmars_smooth(h)
    assert one_d == pytest.approx(3.0 + 1.0 - math.cos(1.0), rel=1e-5)
    assert vmars_smooth(both) == pytest.approx(one_d, rel=0.01)


def test_analytic_partial_path():
    def partial(beta, X):
        if tuple(beta) == (2, 2):
            return fig2_mixed22(X[:, 0] * X[:, 1])
        return np.zeros(len(X))  # every other face pins a coordinate at 0

    exact = SmoothFunction(2, fig2().evaluator, partial=partial)
    assert vmars_smooth(exact, 128) == pytest.approx(vmars_smooth(fig2(), 128), rel=1e-4)


def test_pointwise_evaluator():
    f = SmoothFunction(1, lambda x: float(x[0]) ** 2, vectorized=False)
    assert vmars_smooth(f, 32) == pytest.approx(2.0, rel=1e-6)


def test_mixed_partial_near_boundary():
    f = SmoothFunction(2, lambda X: np.exp(X[:, 0]) * X[:, 1] ** 2)
    X = np.array([[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]])
    np.testing.assert_allclose(mixed_partial_fd(f, (1, 2), X, effective_step(1e-3, 3)), 2 * np.exp(X[:, 0]), rtol=1e-6)


def test_central_weights():
    np.testing.assert_allclose(stencil_weights(np.arange(-2, 3), 2), [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12])


def test_non_finite_evaluator():
    with pytest.raises(NumericError):
        vmars_smooth(SmoothFunction(1, lambda X: 1.0 / X[:, 0] - np.inf))


def test_preconditions():
    with pytest.raises(ArgumentError):
        vmars_smooth(SmoothFunction(4, lambda X: X.sum(axis=1)))
    with pytest.raises(ArgumentError):
        vmars_smooth(fig2(), m=8)
    with pytest.raises(ArgumentError):
        vmars_smooth(fig2(), h=0.0)
