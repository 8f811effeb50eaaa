"""Sequential nuisance fitting: treatment, retention, and continuation models.

Three pipelines feed the influence-function estimator, all trained on a
designated pool (everything outside one held-out fold) and evaluated on
every retained unit:

* ``fit_propensity_sequence``   -- regress A_t on the history H_t;
* ``fit_missingness_sequence``  -- regress R_{t+1} on (H_t, A_t);
* ``fit_pseudo_outcome_sequence`` -- backward recursion for the
  delta-specific continuation values m_t(H_t, a).

The recursion starts from the horizon outcome and repeatedly (i) regresses
the current pseudo-outcome on (H_t, A_t) among units still present at
t+1, then (ii) collapses the treatment arm with the shifted propensity
weights, producing the next regression target:

    M_t = [delta * pi_t * m_t(H_t,1) + (1 - pi_t) * m_t(H_t,0)]
          / (delta * pi_t + 1 - pi_t).

Predictions for units already censored at t are defined as zero; every
influence-function term touching them carries a retention indicator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, EstimationError
from .learners import OMEGA_FLOOR, FittedModel, LearnerSpec, fit_learner
from .panel import FoldAssignment, PanelDataset, history_features

__all__ = [
    "NuisanceSpecs",
    "SequenceFit",
    "PseudoOutcomeFit",
    "NuisanceSet",
    "fit_propensity_sequence",
    "fit_missingness_sequence",
    "fit_pseudo_outcome_sequence",
    "fit_nuisances",
]


@dataclass(frozen=True)
class NuisanceSpecs:
    """Learner choice per nuisance.

    Each entry is a LearnerSpec applied at every time, or a sequence with
    one spec per time 1..t*.  ``m`` may also be a callable delta ->
    (spec | sequence) because the continuation models are delta-specific.
    """

    pi: LearnerSpec | Sequence[LearnerSpec]
    omega: LearnerSpec | Sequence[LearnerSpec]
    m: LearnerSpec | Sequence[LearnerSpec] | Callable

    def m_for(self, delta: float):
        return self.m(delta) if callable(self.m) else self.m


def _spec_at(spec, s: int) -> LearnerSpec:
    """Spec for 1-based time s."""
    if isinstance(spec, LearnerSpec):
        return spec
    return spec[s - 1]


def _train_mask(ds: PanelDataset, folds: FoldAssignment | None, exclude_fold) -> np.ndarray:
    if exclude_fold is None:
        return np.ones(ds.n, dtype=bool)
    if folds is None:
        raise ConfigError("exclude_fold given without a fold assignment")
    return folds.by_index != exclude_fold


@dataclass
class SequenceFit:
    """Per-time fitted models with a dataset-wide prediction cache."""

    models: list[FittedModel]
    pred: np.ndarray  # (n, t_star), NaN where the unit has left
    train_rows: np.ndarray
    warnings: list[str] = field(default_factory=list)


@dataclass
class PseudoOutcomeFit:
    models: list[FittedModel]
    m1: np.ndarray  # (n, t_star), zero where the unit has left
    m0: np.ndarray
    delta: float
    train_rows: np.ndarray
    warnings: list[str] = field(default_factory=list)


def _check_pool(n_train: int, d: int, s: int, warnings: list[str], what: str) -> None:
    if n_train < 2:
        raise EstimationError(f"{n_train} training unit(s) for {what} at t={s}; need at least 2")
    if n_train < max(10, d * s + 2):
        warnings.append(f"underdetermined {what} fit at t={s}: {n_train} units")


def fit_propensity_sequence(
    ds: PanelDataset,
    folds: FoldAssignment | None,
    spec,
    exclude_fold: int | None = None,
    t_star: int | None = None,
) -> SequenceFit:
    """Fit A_t ~ H_t for t = 1..t* on retained units in the training pool."""
    t_star = ds.T if t_star is None else t_star
    train = _train_mask(ds, folds, exclude_fold)
    pred = np.full((ds.n, t_star), np.nan)
    models, warns = [], []
    for s in range(1, t_star + 1):
        F, alive, _ = history_features(ds, s)
        pool = train & alive
        _check_pool(int(pool.sum()), ds.d, s, warns, "propensity")
        model = fit_learner(_spec_at(spec, s), F[pool], ds.A[pool, s - 1], "probability")
        pred[alive, s - 1] = model.predict(F[alive])
        models.append(model)
    return SequenceFit(models=models, pred=pred, train_rows=np.flatnonzero(train), warnings=warns)


def fit_missingness_sequence(
    ds: PanelDataset,
    folds: FoldAssignment | None,
    spec,
    exclude_fold: int | None = None,
    t_star: int | None = None,
) -> SequenceFit:
    """Fit R_{t+1} ~ (H_t, A_t) for t = 1..t*; predictions floored at OMEGA_FLOOR."""
    t_star = ds.T if t_star is None else t_star
    train = _train_mask(ds, folds, exclude_fold)
    pred = np.full((ds.n, t_star), np.nan)
    models, warns = [], []
    for s in range(1, t_star + 1):
        F, alive, _ = history_features(ds, s, with_action=True)
        pool = train & alive
        _check_pool(int(pool.sum()), ds.d, s, warns, "missingness")
        target = ds.R[pool, s].astype(float)
        model = fit_learner(
            _spec_at(spec, s), F[pool], target, "probability", clip=(OMEGA_FLOOR, 1.0)
        )
        pred[alive, s - 1] = model.predict(F[alive])
        models.append(model)
    return SequenceFit(models=models, pred=pred, train_rows=np.flatnonzero(train), warnings=warns)


def fit_pseudo_outcome_sequence(
    ds: PanelDataset,
    folds: FoldAssignment | None,
    pi_pred: np.ndarray,
    spec,
    delta: float,
    t_star: int,
    exclude_fold: int | None = None,
) -> PseudoOutcomeFit:
    """Backward continuation-value recursion for one odds multiplier.

    ``pi_pred`` must hold propensity predictions from the same training
    pool; they weight the two arms when the recursion collapses A_t.
    """
    if t_star not in ds.outcome_times:
        raise ConfigError(f"no recorded outcome at horizon t={t_star}")
    train = _train_mask(ds, folds, exclude_fold)
    n = ds.n
    m1 = np.zeros((n, t_star))
    m0 = np.zeros((n, t_star))
    models: list[FittedModel | None] = [None] * t_star
    warns: list[str] = []

    target = np.where(ds.R[:, t_star] == 1, ds.Y[:, t_star - 1], np.nan)
    for s in range(t_star, 0, -1):
        F, alive, layout = history_features(ds, s, with_action=True)
        next_alive = ds.R[:, s] == 1  # R_{s+1} = 1
        pool = train & next_alive
        _check_pool(int(pool.sum()), ds.d, s, warns, "pseudo-outcome")
        model = fit_learner(_spec_at(spec, s), F[pool], target[pool], "regression")
        models[s - 1] = model
        F1 = F[alive].copy()
        F1[:, layout.action_col] = 1.0
        m1[alive, s - 1] = model.predict(F1)
        F1[:, layout.action_col] = 0.0
        m0[alive, s - 1] = model.predict(F1)
        if s > 1:
            p = pi_pred[:, s - 1]
            num = delta * p * m1[:, s - 1] + (1.0 - p) * m0[:, s - 1]
            target = np.where(alive, num / (delta * p + 1.0 - p), np.nan)
    return PseudoOutcomeFit(
        models=models,
        m1=m1,
        m0=m0,
        delta=delta,
        train_rows=np.flatnonzero(train),
        warnings=warns,
    )


@dataclass
class NuisanceSet:
    """Fitted nuisances for one (excluded fold, delta) pair.

    Prediction caches cover the full dataset; the influence function for a
    unit in the excluded fold is evaluated against models that never saw
    that unit.
    """

    pi: np.ndarray      # (n, t_star)
    omega: np.ndarray   # (n, t_star)
    m1: np.ndarray      # (n, t_star)
    m0: np.ndarray      # (n, t_star)
    delta: float
    t_star: int
    excluded_fold: int | None
    train_rows: np.ndarray
    pi_models: list = field(default_factory=list)
    omega_models: list = field(default_factory=list)
    m_models: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def summary(self) -> dict:
        """JSON-ready diagnostics: convergence flags and effective sizes per t."""
        return {
            "delta": self.delta,
            "t_star": self.t_star,
            "excluded_fold": self.excluded_fold,
            "n_train": int(self.train_rows.size),
            "pi_converged": [bool(m.converged) for m in self.pi_models],
            "pi_iterations": [int(m.iterations) for m in self.pi_models],
            "omega_converged": [bool(m.converged) for m in self.omega_models],
            "n_train_per_t": [int(m.n_train) for m in self.pi_models],
            "warnings": list(self.warnings),
        }


def fit_nuisances(
    ds: PanelDataset,
    folds: FoldAssignment | None,
    specs: NuisanceSpecs,
    delta: float,
    t_star: int,
    exclude_fold: int | None = None,
    omega_one: bool = False,
    pi_fit: SequenceFit | None = None,
    omega_fit: SequenceFit | None = None,
) -> NuisanceSet:
    """Fit all three nuisance sequences for one (fold, delta) pair.

    ``pi_fit``/``omega_fit`` allow reusing delta-independent fits across
    grid values.  ``omega_one`` pins the retention propensities at one
    (the no-dropout analysis of complete cases).
    """
    if pi_fit is None:
        pi_fit = fit_propensity_sequence(ds, folds, specs.pi, exclude_fold, t_star)
    if omega_one:
        omega_fit = SequenceFit(
            models=[],
            pred=np.where(ds.R[:, :t_star] == 1, 1.0, np.nan),
            train_rows=pi_fit.train_rows,
        )
    elif omega_fit is None:
        omega_fit = fit_missingness_sequence(ds, folds, specs.omega, exclude_fold, t_star)
    m_fit = fit_pseudo_outcome_sequence(
        ds, folds, pi_fit.pred, specs.m_for(delta), delta, t_star, exclude_fold
    )
    return NuisanceSet(
        pi=pi_fit.pred,
        omega=omega_fit.pred,
        m1=m_fit.m1,
        m0=m_fit.m0,
        delta=delta,
        t_star=t_star,
        excluded_fold=exclude_fold,
        train_rows=m_fit.train_rows,
        pi_models=pi_fit.models,
        omega_models=omega_fit.models,
        m_models=m_fit.models,
        warnings=pi_fit.warnings + omega_fit.warnings + m_fit.warnings,
    )
