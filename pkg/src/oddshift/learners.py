"""Self-contained regression and classification learners.

The estimator only needs a fit/predict contract, so the menu is small:
logistic regression fit by iteratively reweighted least squares, k-nearest
neighbours, closed-form ridge, a constant-zero predictor, and an oracle
wrapper around a user-supplied function.  Probability predictions are
clipped away from {0, 1} so inverse weights stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, EstimationError

__all__ = ["LearnerSpec", "FittedModel", "fit_learner", "PI_CLIP", "OMEGA_FLOOR"]

# floors for predicted probabilities: treatment propensities are clipped
# symmetrically, retention propensities only from below (they may be 1).
PI_CLIP = 1e-6
OMEGA_FLOOR = 0.01

IRLS_MAX_ITER = 100
IRLS_TOL = 1e-8
RIDGE_JITTER = 1e-10


@dataclass(frozen=True)
class LearnerSpec:
    """Declarative learner choice used by the nuisance pipelines."""

    kind: str
    k: int = 5
    lam: float = 0.0
    fn: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("logistic_irls", "knn", "ridge", "oracle", "zero"):
            raise ConfigError(f"unknown learner kind {self.kind!r}")
        if self.kind == "knn" and self.k < 1:
            raise ConfigError("knn needs k >= 1")
        if self.kind == "ridge" and self.lam < 0:
            raise ConfigError("ridge needs lam >= 0")
        if self.kind == "oracle" and self.fn is None:
            raise ConfigError("oracle spec needs a function handle")

    @classmethod
    def logistic(cls) -> "LearnerSpec":
        return cls(kind="logistic_irls")

    @classmethod
    def knn(cls, k: int) -> "LearnerSpec":
        return cls(kind="knn", k=k)

    @classmethod
    def ridge(cls, lam: float = 0.0) -> "LearnerSpec":
        return cls(kind="ridge", lam=lam)

    @classmethod
    def oracle(cls, fn: Callable) -> "LearnerSpec":
        return cls(kind="oracle", fn=fn)

    @classmethod
    def zero(cls) -> "LearnerSpec":
        return cls(kind="zero")

    @classmethod
    def from_config(cls, obj) -> "LearnerSpec":
        """Parse 'logistic_irls' | 'knn:15' | 'ridge:0.001' | 'zero'."""
        if isinstance(obj, LearnerSpec):
            return obj
        if not isinstance(obj, str):
            raise ConfigError(f"cannot parse learner spec {obj!r}")
        name, _, arg = obj.partition(":")
        if name == "knn":
            return cls.knn(int(arg)) if arg else cls.knn(5)
        if name == "ridge":
            return cls.ridge(float(arg)) if arg else cls.ridge(0.0)
        if name in ("logistic_irls", "logistic"):
            return cls.logistic()
        if name == "zero":
            return cls.zero()
        raise ConfigError(f"unknown learner {obj!r}")


@dataclass
class FittedModel:
    """Deterministic predictor with training metadata."""

    kind: str
    predict_fn: Callable = field(repr=False)
    n_train: int = 0
    iterations: int = 0
    converged: bool = True
    clip: tuple | None = None
    coef_: np.ndarray | None = None
    intercept_: float | None = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.asarray(self.predict_fn(X), dtype=float)
        if self.clip is not None:
            out = np.clip(out, self.clip[0], self.clip[1])
        return out


def _expit(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -35.0, 35.0)))


def _fit_logistic_irls(X: np.ndarray, y: np.ndarray, clip: tuple) -> FittedModel:
    n, p = X.shape
    Xd = np.column_stack([np.ones(n), X])
    mean_y = float(np.mean(y))
    if mean_y in (0.0, 1.0):
        # degenerate single-class target: constant model at the clipped frequency
        const = float(np.clip(mean_y, clip[0], clip[1]))
        return FittedModel(
            kind="logistic_irls",
            predict_fn=lambda Xq, c=const: np.full(Xq.shape[0], c),
            n_train=n,
            iterations=0,
            converged=True,
            clip=clip,
        )
    beta = np.zeros(p + 1)
    converged = False
    it = 0
    for it in range(1, IRLS_MAX_ITER + 1):
        mu = _expit(Xd @ beta)
        grad = Xd.T @ (y - mu)
        if np.linalg.norm(grad) < IRLS_TOL:
            converged = True
            break
        w = np.maximum(mu * (1.0 - mu), 1e-10)
        H = Xd.T @ (w[:, None] * Xd)
        H[np.diag_indices_from(H)] += RIDGE_JITTER
        beta = beta + np.linalg.solve(H, grad)
    fitted = beta.copy()
    return FittedModel(
        kind="logistic_irls",
        predict_fn=lambda Xq, b=fitted: _expit(
            np.column_stack([np.ones(Xq.shape[0]), Xq]) @ b
        ),
        n_train=n,
        iterations=it,
        converged=converged,
        clip=clip,
        coef_=fitted[1:],
        intercept_=float(fitted[0]),
    )


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mu = X.mean(axis=0) if X.shape[0] else np.zeros(X.shape[1])
    sd = X.std(axis=0) if X.shape[0] else np.ones(X.shape[1])
    sd = np.where(sd > 0, sd, 1.0)
    return (X - mu) / sd, mu, sd


def _fit_knn(X: np.ndarray, y: np.ndarray, k: int, clip: tuple | None) -> FittedModel:
    n = X.shape[0]
    k_eff = min(k, n)
    Xs, mu, sd = _standardize(X)
    ys = y.astype(float).copy()

    def predict(Xq, Xs=Xs, ys=ys, mu=mu, sd=sd, k_eff=k_eff):
        Q = (Xq - mu) / sd
        if Xs.shape[1] == 0:
            # featureless: every training point ties at distance zero
            return np.full(Q.shape[0], ys[:k_eff].mean())
        d2 = (
            np.sum(Q**2, axis=1)[:, None]
            - 2.0 * Q @ Xs.T
            + np.sum(Xs**2, axis=1)[None, :]
        )
        # stable sort keeps the lowest training row index among ties
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
        return ys[nearest].mean(axis=1)

    return FittedModel(kind="knn", predict_fn=predict, n_train=n, clip=clip)


def _fit_ridge(X: np.ndarray, y: np.ndarray, lam: float, clip: tuple | None) -> FittedModel:
    n = X.shape[0]
    Xs, mu, sd = _standardize(X)
    ybar = float(np.mean(y))
    G = Xs.T @ Xs
    G[np.diag_indices_from(G)] += lam + RIDGE_JITTER
    beta = np.linalg.solve(G, Xs.T @ (y - ybar)) if X.shape[1] else np.empty(0)

    def predict(Xq, beta=beta, mu=mu, sd=sd, ybar=ybar):
        return ybar + ((Xq - mu) / sd) @ beta

    return FittedModel(
        kind="ridge",
        predict_fn=predict,
        n_train=n,
        clip=clip,
        coef_=beta / sd if X.shape[1] else beta,
        intercept_=ybar - float((beta * mu / sd).sum()) if X.shape[1] else ybar,
    )


def fit_learner(
    spec: LearnerSpec,
    features: np.ndarray,
    targets: np.ndarray,
    task: str,
    clip: tuple | None = None,
) -> FittedModel:
    """Fit one learner on a feature matrix.

    ``task`` is 'probability' (targets in {0,1}, predictions clipped) or
    'regression' (unrestricted).  ``clip`` overrides the default
    probability clipping range [PI_CLIP, 1 - PI_CLIP].
    """
    if task not in ("probability", "regression"):
        raise ConfigError(f"unknown task {task!r}")
    X = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    if spec.kind != "oracle":
        if X.shape[0] != y.shape[0]:
            raise ConfigError("features and targets disagree on row count")
        if X.shape[0] < 1:
            raise EstimationError("cannot fit on an empty training set")
        if np.isnan(X).any() or np.isnan(y).any():
            raise EstimationError("training data contain unavailable (NaN) cells")
    if task == "probability":
        if spec.kind != "oracle" and not np.all((y == 0) | (y == 1)):
            raise ConfigError("probability task requires {0,1} targets")
        if clip is None:
            clip = (PI_CLIP, 1.0 - PI_CLIP)

    if spec.kind == "logistic_irls":
        if task != "probability":
            raise ConfigError("logistic_irls only fits probability targets")
        return _fit_logistic_irls(X, y, clip)
    if spec.kind == "knn":
        return _fit_knn(X, y, spec.k, clip)
    if spec.kind == "ridge":
        return _fit_ridge(X, y, spec.lam, clip)
    if spec.kind == "zero":
        return FittedModel(
            kind="zero",
            predict_fn=lambda Xq: np.zeros(Xq.shape[0]),
            n_train=X.shape[0],
            clip=clip,
        )
    # oracle: wrap the supplied handle, ignoring the training data
    return FittedModel(
        kind="oracle",
        predict_fn=spec.fn,
        n_train=X.shape[0] if X.size else 0,
        clip=clip,
    )
