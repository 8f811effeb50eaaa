import numpy as np
import pytest

from oddshift import ConfigError, LearnerSpec, fit_learner
from oddshift.learners import OMEGA_FLOOR, PI_CLIP


class TestLogistic:
    def test_balanced_no_signal(self):
        X = np.array([[1.0], [1.0], [-1.0], [-1.0]])
        y = np.array([1.0, 0.0, 0.0, 1.0])
        model = fit_learner(LearnerSpec.logistic(), X, y, "probability")
        assert np.max(np.abs(model.predict(X) - 0.5)) < 1e-6

    def test_degenerate_single_class(self):
        X = np.linspace(0, 1, 8)[:, None]
        model = fit_learner(LearnerSpec.logistic(), X, np.ones(8), "probability")
        assert np.all(model.predict(X) == 1.0 - PI_CLIP)
        model0 = fit_learner(LearnerSpec.logistic(), X, np.zeros(8), "probability")
        assert np.all(model0.predict(X) == PI_CLIP)

    def test_recovers_logit_slope(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(4000, 2))
        p = 1.0 / (1.0 + np.exp(-(0.5 + X @ np.array([1.0, -2.0]))))
        y = (rng.random(4000) < p).astype(float)
        model = fit_learner(LearnerSpec.logistic(), X, y, "probability")
        assert model.converged
        assert np.allclose(model.coef_, [1.0, -2.0], atol=0.2)
        assert abs(model.intercept_ - 0.5) < 0.2

    def test_rejects_non_binary(self):
        with pytest.raises(ConfigError):
            fit_learner(LearnerSpec.logistic(), np.ones((3, 1)), np.array([0.0, 0.5, 1.0]), "probability")
        with pytest.raises(ConfigError):
            fit_learner(LearnerSpec.logistic(), np.ones((3, 1)), np.ones(3), "regression")

    def test_clip_range(self):
        X = np.array([[-50.0], [50.0]] * 6)
        y = np.array([0.0, 1.0] * 6)
        model = fit_learner(LearnerSpec.logistic(), X, y, "probability")
        preds = model.predict(np.array([[-500.0], [500.0]]))
        assert preds[0] >= PI_CLIP and preds[1] <= 1.0 - PI_CLIP


class TestKnn:
    def test_k1_self_target(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(20, 3))
        y = rng.normal(size=20)
        model = fit_learner(LearnerSpec.knn(1), X, y, "regression")
        assert np.allclose(model.predict(X), y)

    def test_tie_break_lowest_index(self):
        X = np.zeros((3, 2))  # all points tie at distance zero
        y = np.array([5.0, 7.0, 9.0])
        model = fit_learner(LearnerSpec.knn(2), X, y, "regression")
        assert model.predict(np.zeros((1, 2)))[0] == pytest.approx(6.0)

    def test_convex_combination_bound(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(50, 4))
        y = rng.normal(size=50)
        model = fit_learner(LearnerSpec.knn(7), X, y, "regression")
        preds = model.predict(rng.normal(size=(200, 4)))
        assert np.max(np.abs(preds)) <= np.max(np.abs(y)) + 1e-12

    def test_constant_targets(self):
        X = np.random.default_rng(4).normal(size=(15, 2))
        model = fit_learner(LearnerSpec.knn(4), X, np.full(15, 3.25), "regression")
        assert np.all(model.predict(X) == 3.25)


class TestRidge:
    def test_exact_linear_fit(self):
        x = np.linspace(-2, 2, 30)[:, None]
        y = 2.0 * x[:, 0]
        model = fit_learner(LearnerSpec.ridge(0.0), x, y, "regression")
        assert model.coef_[0] == pytest.approx(2.0, abs=1e-8)
        assert model.intercept_ == pytest.approx(0.0, abs=1e-8)

    def test_singular_system_resolved_by_jitter(self):
        X = np.column_stack([np.ones(10), np.ones(10)])  # perfectly collinear
        y = np.arange(10.0)
        model = fit_learner(LearnerSpec.ridge(0.0), X, y, "regression")
        assert np.all(np.isfinite(model.predict(X)))

    def test_constant_targets(self):
        X = np.random.default_rng(5).normal(size=(12, 3))
        model = fit_learner(LearnerSpec.ridge(0.5), X, np.full(12, -1.5), "regression")
        assert np.allclose(model.predict(X), -1.5)

    def test_probability_clipping(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        model = fit_learner(LearnerSpec.ridge(0.0), X, y, "probability", clip=(OMEGA_FLOOR, 1.0))
        preds = model.predict(np.array([[-100.0], [100.0]]))
        assert preds[0] == OMEGA_FLOOR and preds[1] == 1.0


class TestOracleAndZero:
    def test_oracle_passthrough(self):
        model = fit_learner(
            LearnerSpec.oracle(lambda F: F[:, 0] ** 2),
            np.empty((0, 1)),
            np.empty(0),
            "regression",
        )
        assert np.allclose(model.predict(np.array([[3.0], [4.0]])), [9.0, 16.0])

    def test_zero_predictor(self):
        model = fit_learner(LearnerSpec.zero(), np.ones((4, 2)), np.ones(4), "regression")
        assert np.all(model.predict(np.ones((7, 2))) == 0.0)

    def test_spec_parsing(self):
        assert LearnerSpec.from_config("knn:15").k == 15
        assert LearnerSpec.from_config("ridge:0.25").lam == 0.25
        assert LearnerSpec.from_config("logistic").kind == "logistic_irls"
        with pytest.raises(ConfigError):
            LearnerSpec.from_config("forest")
        with pytest.raises(ConfigError):
            LearnerSpec.knn(0)
        with pytest.raises(ConfigError):
            LearnerSpec.ridge(-1.0)
