"""Influence-value computation and the four effect estimators.

The estimand is the mean outcome at a horizon t if every unit's odds of
treatment were multiplied by delta at times 1..t, with monotone dropout
handled by inverse retention weighting.  The per-unit uncentered
influence value phi is built from running products

    ratio_s = (delta*A_s + 1 - A_s) / (delta*pi_s + 1 - pi_s),
    C_0 = 1,   C_s = C_{s-1} * ratio_s * R_{s+1} / omega_s,

arm-collapsed continuation values

    g_s = [delta*pi_s*m_s(H_s,1) + (1-pi_s)*m_s(H_s,0)] / (delta*pi_s + 1 - pi_s),

and the propensity-perturbation term

    b_s = delta*(A_s - pi_s)*[m_s(H_s,1) - m_s(H_s,0)] / (delta*pi_s + 1 - pi_s)^2,

as

    phi = sum_s C_{s-1} * [g_s + b_s - ratio_s*(R_{s+1}/omega_s)*m_s(H_s,A_s)] * R_s
          + C_t * Y_t.

Averaging phi gives the effect; every term for a censored stage carries a
retention indicator, so censored units contribute finite values without
ever touching their unavailable data.

Estimators: ``estimate_cross_fit`` (nuisances fit on K-1 folds, values
averaged on the held-out fold), ``estimate_plugin`` (no splitting),
``estimate_ipw`` (weight products only, no continuation models), and
``estimate_complete_case`` (subgroup mean contrast among fully retained,
fully compliant units).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EstimationError
from .intervention import DeltaGrid
from .nuisance import NuisanceSet, NuisanceSpecs, fit_missingness_sequence, fit_nuisances, fit_propensity_sequence
from .panel import FoldAssignment, PanelDataset, split_folds

__all__ = [
    "EifMatrix",
    "EffectEstimate",
    "eif_from_arrays",
    "eif_values_for",
    "eif_contribution",
    "eif_correction_terms",
    "eif_single_period",
    "estimate_cross_fit",
    "estimate_plugin",
    "estimate_ipw",
    "estimate_no_censoring",
    "estimate_complete_case",
    "complete_case_subset",
]


def _gate(cond: np.ndarray, values: np.ndarray, fill: float) -> np.ndarray:
    """Replace unavailable entries before arithmetic; NaN * 0 is still NaN."""
    return np.where(cond, values, fill)


def eif_from_arrays(
    A: np.ndarray,
    R: np.ndarray,
    y_term: np.ndarray,
    pi: np.ndarray,
    omega: np.ndarray,
    m1: np.ndarray,
    m0: np.ndarray,
    delta: float,
) -> np.ndarray:
    """Uncentered influence values for one delta, vectorized over units.

    Shapes: A, pi, omega, m1, m0 are (n, t); R is (n, t+1) with R[:, 0]
    the time-1 retention (always one); y_term is the horizon outcome,
    used only where R[:, t] = 1.
    """
    A = np.atleast_2d(A)
    n, t = A.shape
    phi = np.zeros(n)
    C = np.ones(n)
    for s in range(t):
        alive = R[:, s] == 1
        a = _gate(alive, A[:, s], 0.0)
        p = _gate(alive, pi[:, s], 0.5)
        w = _gate(alive, omega[:, s], 1.0)
        if np.any(alive & ((p <= 0.0) | (p >= 1.0))):
            raise EstimationError(f"propensity outside (0,1) at t={s + 1}")
        if np.any(alive & (w <= 0.0)):
            raise EstimationError(f"retention propensity not positive at t={s + 1}")
        r_next = R[:, s + 1].astype(float)
        denom = delta * p + 1.0 - p
        ratio = (delta * a + 1.0 - a) / denom
        m1s = _gate(alive, m1[:, s], 0.0)
        m0s = _gate(alive, m0[:, s], 0.0)
        m_obs = np.where(a == 1.0, m1s, m0s)
        g = (delta * p * m1s + (1.0 - p) * m0s) / denom
        b = delta * (a - p) * (m1s - m0s) / denom**2
        summand = g + b - ratio * (r_next / w) * m_obs
        phi += C * np.where(alive, summand, 0.0)
        C = C * np.where(alive, ratio * r_next / w, 0.0)
    phi = phi + C * _gate(R[:, t] == 1, y_term, 0.0)
    if not np.all(np.isfinite(phi)):
        raise EstimationError("non-finite influence value")
    return phi


def eif_values_for(ds: PanelDataset, eta: NuisanceSet) -> np.ndarray:
    """Influence values for every unit of a dataset under fitted nuisances."""
    t = eta.t_star
    return eif_from_arrays(
        ds.A[:, :t], ds.R[:, : t + 1], ds.Y[:, t - 1],
        eta.pi, eta.omega, eta.m1, eta.m0, eta.delta,
    )


def eif_contribution(ds: PanelDataset, eta: NuisanceSet, i: int) -> float:
    """Influence value of one trajectory (dataset row i)."""
    t = eta.t_star
    return float(
        eif_from_arrays(
            ds.A[i : i + 1, :t], ds.R[i : i + 1, : t + 1], ds.Y[i : i + 1, t - 1],
            eta.pi[i : i + 1], eta.omega[i : i + 1],
            eta.m1[i : i + 1], eta.m0[i : i + 1], eta.delta,
        )[0]
    )


def eif_correction_terms(
    A: np.ndarray,
    R: np.ndarray,
    pi: np.ndarray,
    omega: np.ndarray,
    m1: np.ndarray,
    m0: np.ndarray,
    delta: float,
) -> np.ndarray:
    """Per-stage correction terms g_s + b_s - ratio_s (R_{s+1}/omega_s) m_s(H_s, A_s).

    Returns (n, t) with NaN where the unit has already left.  Under true
    nuisances each column is conditionally mean-zero among retained units.
    """
    A = np.atleast_2d(A)
    n, t = A.shape
    out = np.full((n, t), np.nan)
    for s in range(t):
        alive = R[:, s] == 1
        a = _gate(alive, A[:, s], 0.0)
        p = _gate(alive, pi[:, s], 0.5)
        w = _gate(alive, omega[:, s], 1.0)
        r_next = R[:, s + 1].astype(float)
        denom = delta * p + 1.0 - p
        ratio = (delta * a + 1.0 - a) / denom
        m1s = _gate(alive, m1[:, s], 0.0)
        m0s = _gate(alive, m0[:, s], 0.0)
        m_obs = np.where(a == 1.0, m1s, m0s)
        g = (delta * p * m1s + (1.0 - p) * m0s) / denom
        b = delta * (a - p) * (m1s - m0s) / denom**2
        out[alive, s] = (g + b - ratio * (r_next / w) * m_obs)[alive]
    return out


def eif_single_period(a, y, r, pi, omega, mu1, mu0, delta) -> float:
    """Closed-form influence value for a single-period study (T = 1).

    A weighted average of the two per-arm influence values
    phi_a = 1(A=a) 1(R=1) / (pi_a * omega) * (y - mu_a) + mu_a
    with weights delta*pi and 1-pi, plus the propensity-perturbation term
    delta*(mu1 - mu0)*(a - pi) / (delta*pi + 1 - pi)^2.  Serves as an
    independent check of the general recursion at t = 1.
    """
    if r not in (0, 1) or a not in (0, 1):
        raise ConfigError("a and r must be binary")
    if not 0 < pi < 1:
        raise ConfigError("pi must lie in (0,1)")
    if not 0 < omega <= 1:
        raise ConfigError("omega must lie in (0,1]")
    if delta <= 0:
        raise ConfigError("delta must be positive")
    resid1 = (y - mu1) if (a == 1 and r == 1) else 0.0
    resid0 = (y - mu0) if (a == 0 and r == 1) else 0.0
    phi1 = resid1 / (pi * omega) + mu1
    phi0 = resid0 / ((1.0 - pi) * omega) + mu0
    denom = delta * pi + 1.0 - pi
    wavg = (delta * pi * phi1 + (1.0 - pi) * phi0) / denom
    correction = delta * (mu1 - mu0) * (a - pi) / denom**2
    return float(wavg + correction)


@dataclass
class EifMatrix:
    """Per-unit uncentered influence values over a delta grid."""

    values: np.ndarray  # (n, D)
    t: int
    grid: DeltaGrid
    fold_by_row: np.ndarray  # (n,), 0 when no splitting was used

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def to_csv(self, path) -> None:
        """Long-format dump: one row per (unit, delta) with fold provenance."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("unit,fold,delta,phi\n")
            for i in range(self.n):
                for j, delta in enumerate(self.grid.values):
                    fh.write(
                        f"{i},{int(self.fold_by_row[i])},"
                        f"{format(delta, '.17g')},{format(self.values[i, j], '.17g')}\n"
                    )


@dataclass
class EffectEstimate:
    """Effect curve with its influence-value standard deviations."""

    psi_hat: np.ndarray   # (D,)
    sigma_hat: np.ndarray  # (D,)
    n: int
    t: int
    kind: str
    grid: DeltaGrid
    per_fold: np.ndarray  # (K, D) fold-wise means
    diagnostics: dict = field(default_factory=dict)

    def rows(self):
        for j, delta in enumerate(self.grid.values):
            yield delta, float(self.psi_hat[j]), float(self.sigma_hat[j])


def _sigma_hat(values: np.ndarray, psi_hat: np.ndarray) -> np.ndarray:
    if values.shape[0] < 2:
        raise EstimationError("variance needs at least two units")
    return np.sqrt(np.mean((values - psi_hat[None, :]) ** 2, axis=0))


def _reduce(values: np.ndarray, fold_by_row: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Average of fold means (columns are grid points)."""
    per_fold = np.stack(
        [values[fold_by_row == k].mean(axis=0) for k in range(1, K + 1)]
    )
    return per_fold.mean(axis=0), per_fold


def _as_grid(grid) -> DeltaGrid:
    if isinstance(grid, DeltaGrid):
        return grid
    return DeltaGrid(values=tuple(grid), spacing="linear")


def estimate_cross_fit(
    ds: PanelDataset,
    K: int,
    seed: int,
    specs: NuisanceSpecs,
    grid,
    t: int,
    omega_one: bool = False,
    folds: FoldAssignment | None = None,
) -> tuple[EffectEstimate, EifMatrix]:
    """Cross-fitted effect curve: eta fit per excluded fold, phi averaged per fold.

    Deterministic given (data, K, seed, specs); the reduction runs in
    fixed fold order so results do not depend on scheduling.
    """
    grid = _as_grid(grid)
    if folds is None:
        folds = split_folds(ds, K, seed)
    values = np.empty((ds.n, len(grid)))
    diagnostics: dict = {"folds": [], "warnings": []}
    for k in range(1, K + 1):
        pi_fit = fit_propensity_sequence(ds, folds, specs.pi, exclude_fold=k, t_star=t)
        omega_fit = None
        if not omega_one:
            omega_fit = fit_missingness_sequence(ds, folds, specs.omega, exclude_fold=k, t_star=t)
        rows = folds.by_index == k
        for j, delta in enumerate(grid.values):
            eta = fit_nuisances(
                ds, folds, specs, delta, t,
                exclude_fold=k, omega_one=omega_one,
                pi_fit=pi_fit, omega_fit=omega_fit,
            )
            phi = eif_values_for(ds, eta)
            values[rows, j] = phi[rows]
            if j == 0:
                diagnostics["folds"].append(eta.summary())
            diagnostics["warnings"].extend(eta.warnings)
    psi_hat, per_fold = _reduce(values, folds.by_index, K)
    diagnostics["fully_weighted_units"] = int(np.sum(ds.R[:, t] == 1))
    estimate = EffectEstimate(
        psi_hat=psi_hat,
        sigma_hat=_sigma_hat(values, psi_hat),
        n=ds.n,
        t=t,
        kind="cross_fit" if not omega_one else "no_censoring",
        grid=grid,
        per_fold=per_fold,
        diagnostics=diagnostics,
    )
    eif = EifMatrix(values=values, t=t, grid=grid, fold_by_row=folds.by_index.copy())
    return estimate, eif


def estimate_plugin(
    ds: PanelDataset,
    specs: NuisanceSpecs,
    grid,
    t: int,
    omega_one: bool = False,
) -> tuple[EffectEstimate, EifMatrix]:
    """Plug-in estimator: nuisances fit on all data, no sample splitting."""
    grid = _as_grid(grid)
    values = np.empty((ds.n, len(grid)))
    diagnostics: dict = {"folds": [], "warnings": []}
    pi_fit = fit_propensity_sequence(ds, None, specs.pi, exclude_fold=None, t_star=t)
    omega_fit = None
    if not omega_one:
        omega_fit = fit_missingness_sequence(ds, None, specs.omega, exclude_fold=None, t_star=t)
    for j, delta in enumerate(grid.values):
        eta = fit_nuisances(
            ds, None, specs, delta, t,
            exclude_fold=None, omega_one=omega_one,
            pi_fit=pi_fit, omega_fit=omega_fit,
        )
        values[:, j] = eif_values_for(ds, eta)
        if j == 0:
            diagnostics["folds"].append(eta.summary())
    psi_hat = values.mean(axis=0)
    estimate = EffectEstimate(
        psi_hat=psi_hat,
        sigma_hat=_sigma_hat(values, psi_hat),
        n=ds.n,
        t=t,
        kind="plugin",
        grid=grid,
        per_fold=psi_hat[None, :].copy(),
        diagnostics=diagnostics,
    )
    eif = EifMatrix(values=values, t=t, grid=grid, fold_by_row=np.zeros(ds.n, dtype=np.int64))
    return estimate, eif


def ipw_weight_products(
    A: np.ndarray,
    R: np.ndarray,
    pi: np.ndarray,
    omega: np.ndarray,
    delta: float,
) -> np.ndarray:
    """Cumulative weights prod_s ratio_s * 1(R_{s+1}=1)/omega_s over all t stages."""
    n, t = np.atleast_2d(A).shape
    W = np.ones(n)
    for s in range(t):
        alive = R[:, s] == 1
        a = _gate(alive, A[:, s], 0.0)
        p = _gate(alive, pi[:, s], 0.5)
        w = _gate(alive, omega[:, s], 1.0)
        ratio = (delta * a + 1.0 - a) / (delta * p + 1.0 - p)
        W = W * np.where(alive, ratio * R[:, s + 1] / w, 0.0)
    return W


def estimate_ipw(
    ds: PanelDataset,
    specs: NuisanceSpecs,
    grid,
    t: int,
) -> EffectEstimate:
    """Pure inverse-probability-weighted estimator (continuation models unused).

    Propensities are fit on the full sample, mirroring how this baseline
    is usually run with parametric models.
    """
    grid = _as_grid(grid)
    pi_fit = fit_propensity_sequence(ds, None, specs.pi, exclude_fold=None, t_star=t)
    omega_fit = fit_missingness_sequence(ds, None, specs.omega, exclude_fold=None, t_star=t)
    y = _gate(ds.R[:, t] == 1, ds.Y[:, t - 1], 0.0)
    values = np.empty((ds.n, len(grid)))
    for j, delta in enumerate(grid.values):
        W = ipw_weight_products(
            ds.A[:, :t], ds.R[:, : t + 1], pi_fit.pred, omega_fit.pred, delta
        )
        values[:, j] = W * y
    psi_hat = values.mean(axis=0)
    return EffectEstimate(
        psi_hat=psi_hat,
        sigma_hat=_sigma_hat(values, psi_hat),
        n=ds.n,
        t=t,
        kind="ipw",
        grid=grid,
        per_fold=psi_hat[None, :].copy(),
        diagnostics={"warnings": pi_fit.warnings + omega_fit.warnings},
    )


def complete_case_subset(ds: PanelDataset, t: int) -> PanelDataset:
    """Units fully retained through the horizon outcome, truncated to t periods."""
    keep = ds.R[:, t] == 1
    if not np.any(keep):
        raise EstimationError(f"no unit retained through the outcome at t={t}")
    idx = np.flatnonzero(keep)
    R = np.ones((idx.size, t + 1), dtype=np.int8)
    return PanelDataset.from_arrays(
        ds.X[idx, :t, :], ds.A[idx, :t], ds.Y[idx, :t], R,
        ids=[ds.ids[i] for i in idx],
    )


def estimate_no_censoring(
    ds: PanelDataset,
    K: int,
    seed: int,
    specs: NuisanceSpecs,
    grid,
    t: int,
) -> tuple[EffectEstimate, EifMatrix]:
    """Cross-fit estimator that discards dropped-out units and pins omega at one."""
    sub = complete_case_subset(ds, t)
    return estimate_cross_fit(sub, K, seed, specs, grid, t, omega_one=True)


def estimate_complete_case(ds: PanelDataset, t: int) -> float:
    """Always-treated minus never-treated mean among fully retained units.

    Positivity failures surface as an error: with many periods the
    always- or never-treated retained subgroup is routinely empty.
    """
    if t not in ds.outcome_times:
        raise ConfigError(f"no recorded outcome at t={t}")
    retained = ds.R[:, t] == 1
    A = ds.A[:, :t]
    all_treated = retained & np.all(A == 1.0, axis=1)
    none_treated = retained & np.all(A == 0.0, axis=1)
    if not np.any(all_treated) or not np.any(none_treated):
        raise EstimationError(
            "complete-case contrast undefined: empty always- or never-treated subgroup"
        )
    y = ds.Y[:, t - 1]
    return float(y[all_treated].mean() - y[none_treated].mean())
