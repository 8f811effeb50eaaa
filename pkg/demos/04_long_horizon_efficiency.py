"""Why odds shifts beat fixed regimes over long horizons, exactly and by simulation.

Under a constant treatment probability p, the fixed-regime weight
estimator multiplies 1/p per period, so its variance grows like (1/p)^T;
the odds-shift weights stay bounded.  The exact single-draw variances
follow from the sequential-integral expansion, and the variance of the
shifted estimator decomposes exactly across fixed treatment sequences.
"""

import numpy as np

import oddshift as od

delta, p = 5.0, 0.5

report = od.efficiency_curve(lambda T: od.trial_moments(T, p, delta), T_max=12)
print(f"delta={delta}, p={p}; ratio = Var(shifted) / Var(always-treated)")
print("  T   Var(fixed)     Var(shifted)   ratio      upper bound")
for row in report.rows:
    print(
        f" {row['T']:2d}   {row['var_deterministic']:12.2f}  {row['var_incremental']:12.4f}"
        f"  {row['ratio']:.6f}   {row['upper']:.6f}"
    )
print(f"\nexact variance crossing at T = {report.crossing_T}; "
      f"scan certificate: gains for every T > {report.scan_T_strict}")

# the exact decomposition across treatment sequences, checked by enumeration
def atoms(a_bar):
    pr = 0.2 + 0.6 * sum(a_bar) / max(len(a_bar), 1)
    return np.array([0.0, 1.0]), np.array([1.0 - pr, pr])

gap = od.decomposition_check(p=0.5, delta=2.0, T=3, atoms=atoms)
print(f"decomposition discrepancy by full enumeration at T=3: {gap:.2e}")

# simulated ratio curve with the analytic lower bound attached
import warnings

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    recs = od.relative_efficiency_mc(
        od.DgpConfig(kind="trial", n=250, T=1, p=p, seed=0),
        delta, horizons=range(1, 13), reps=100, seed=5,
    )
print("\nsimulated Var(fixed)/Var(shifted) by horizon (None = degenerate draw):")
for rec in recs[::2]:
    ratio = "None" if rec["ratio"] is None else f"{rec['ratio']:.2f}"
    print(f"  t={rec['t']:2d}  ratio={ratio:>8s}  analytic lower bound {rec['lower_bound']:.4f}")
