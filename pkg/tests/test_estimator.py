import json

import numpy as np
import pytest

from marslasso import (
    ArgumentError,
    DegenerateRangeError,
    FitConfig,
    MarsModel,
    ScalingTransform,
    Term,
    fit,
    load_model,
    loss,
    predict,
    save_model,
    scale_apply,
    scale_fit,
    scale_invert,
    to_original_domain,
    vmars_finite,
)
from marslasso.lattice import lattice_points
from marslasso.sim import test_function as get_truth


def noisy_2d(seed=0, n=25):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2 + 0.1 * rng.normal(size=n)
    return X, y


class TestScaling:
    def test_endpoints(self):
        t = scale_fit(np.array([[2.0], [4.0], [6.0]]))
        np.testing.assert_allclose(scale_apply(t, np.array([[2.0], [4.0], [6.0]]))[:, 0], [0, 0.5, 1])

    def test_inverse_pair(self):
        X = np.random.default_rng(0).normal(size=(30, 3)) * 100
        t = scale_fit(X)
        np.testing.assert_allclose(scale_invert(t, scale_apply(t, X)), X, atol=1e-12 * 100)

    def test_already_scaled(self):
        X = np.array([[0.0], [1.0]])
        np.testing.assert_array_equal(scale_apply(scale_fit(X), X), X)

    def test_constant_column_reports_index(self):
        with pytest.raises(DegenerateRangeError) as err:
            scale_fit(np.array([[1.0, 5.0], [2.0, 5.0]]))
        assert err.value.column == 1


class TestFit:
    def test_constant_response(self):
        X, _ = noisy_2d()
        m = fit(X, np.full(len(X), 4.2), FitConfig(V=3.0))
        assert m.terms == () and m.intercept == pytest.approx(4.2)

    def test_noiseless_fig1_on_lattice(self):
        X = lattice_points((30, 30))
        f = get_truth("fig1")
        m = fit(X, f(X), FitConfig(V=15.0))
        assert loss(predict(m, X), f(X)) < 1e-6

    def test_main_effects_only(self):
        rng = np.random.default_rng(1)
        X = rng.random((20, 2))
        y = X[:, 0] ** 2 + np.abs(X[:, 1] - 0.5)
        m = fit(X, y, FitConfig(V=5.0, s=1))
        assert m.terms and all(sum(t.alpha) == 1 for t in m.terms)

    def test_budget_respected(self):
        X, y = noisy_2d(2)
        for V in (0.1, 1.0, 4.0):
            m = fit(X, y, FitConfig(V=V))
            assert vmars_finite(m) <= V + 1e-8
            assert m.meta["converged"]

    def test_training_loss_monotone_in_budget(self):
        X, y = noisy_2d(3)
        losses = [loss(predict(fit(X, y, FitConfig(V=V)), X), y) for V in (0.0, 0.5, 1.0, 2.0, 4.0)]
        assert all(b <= a + 1e-10 for a, b in zip(losses, losses[1:]))

    def test_permutation_equivariance(self):
        X, y = noisy_2d(4)
        perm = np.random.default_rng(0).permutation(len(y))
        a = predict(fit(X, y, FitConfig(V=1.0)), X)
        b = predict(fit(X[perm], y[perm], FitConfig(V=1.0)), X[perm])
        np.testing.assert_allclose(b, a[perm], atol=1e-8)

    def test_constant_shift(self):
        X, y = noisy_2d(5)
        a = predict(fit(X, y, FitConfig(V=1.0)), X)
        b = predict(fit(X, y + 7.5, FitConfig(V=1.0)), X)
        np.testing.assert_allclose(b - a, 7.5, atol=1e-8)

    def test_scaled_inputs_match_manual_scaling(self):
        X, y = noisy_2d(6)
        raw = X * [10.0, 3.0] + [5.0, -2.0]
        m = fit(raw, y, FitConfig(V=1.0, scale_inputs=True))
        t = scale_fit(raw)
        manual = fit(t.apply(raw), y, FitConfig(V=1.0))
        assert m.transform == t
        np.testing.assert_allclose(predict(m, raw), predict(manual, t.apply(raw)), atol=1e-10)

    def test_validation(self):
        with pytest.raises(ArgumentError):
            FitConfig(V=-1.0)
        with pytest.raises(ArgumentError):
            fit(np.array([[0.5]]), np.array([1.0]), FitConfig(V=1.0))
        with pytest.raises(ArgumentError):
            fit(np.random.random((5, 2)), np.ones(4), FitConfig(V=1.0))
        with pytest.raises(ArgumentError):
            fit(np.random.random((5, 2)), np.ones(5), FitConfig(V=1.0, s=3))


class TestPredictAndLoss:
    def test_intercept_only(self):
        np.testing.assert_array_equal(predict(MarsModel(d=3, intercept=-1.0), np.random.random((4, 3))), -1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ArgumentError):
            predict(MarsModel(d=2, intercept=0.0), np.zeros((3, 3)))

    def test_loss_examples(self):
        v = np.array([1.0, 2.0])
        assert loss(v, v) == 0.0
        assert loss(np.array([1.0, -1.0]), np.zeros(2)) == 1.0
        assert loss(3 * v, 3 * np.zeros(2)) == pytest.approx(9 * loss(v, np.zeros(2)))
        with pytest.raises(ArgumentError):
            loss(v, np.zeros(3))


class TestOriginalDomain:
    def test_hand_example(self):
        m = MarsModel(d=1, intercept=1.0, terms=(Term((1,), (0.2,), 2.0),),
                      transform=ScalingTransform(np.array([10.0]), np.array([5.0])))
        o = to_original_domain(m)
        (t,) = o.terms
        assert t.coef == pytest.approx(0.4) and t.knots[0] == pytest.approx(11.0)
        assert o.domain_tag == "original" and o.intercept == 1.0

    def test_identity_transform(self):
        m = MarsModel(d=2, intercept=0.5, terms=(Term((1, 1), (0.1, 0.4), -3.0),),
                      transform=ScalingTransform(np.zeros(2), np.ones(2)))
        assert to_original_domain(m).terms == m.terms

    def test_predictions_preserved(self):
        X, y = noisy_2d(7, n=30)
        raw = X * [4.0, 0.5] + [-3.0, 100.0]
        m = fit(raw, y, FitConfig(V=2.0, scale_inputs=True))
        pts = np.random.default_rng(1).random((100, 2)) * [4.0, 0.5] + [-3.0, 100.0]
        np.testing.assert_allclose(predict(to_original_domain(m), pts), predict(m, pts), atol=1e-8)

    def test_missing_transform(self):
        with pytest.raises(ArgumentError):
            to_original_domain(MarsModel(d=1, intercept=0.0))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        X, y = noisy_2d(8)
        m = fit(X * 3 + 1, y, FitConfig(V=1.5, scale_inputs=True))
        save_model(m, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json")
        assert back == m
        np.testing.assert_array_equal(predict(back, X), predict(m, X))
        meta = json.loads((tmp_path / "m.json").read_text())["fit_meta"]
        assert set(meta) >= {"V", "s", "converged", "objective"}

    def test_version_mismatch(self, tmp_path):
        m = MarsModel(d=1, intercept=1.0)
        save_model(m, tmp_path / "m.json")
        data = json.loads((tmp_path / "m.json").read_text())
        data["version"] = 99
        (tmp_path / "m.json").write_text(json.dumps(data))
        with pytest.raises(ArgumentError, match="version"):
            load_model(tmp_path / "m.json")
