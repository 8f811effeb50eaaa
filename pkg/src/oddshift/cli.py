"""Batch command-line front end.

Five subcommands: ``estimate``, ``simulate``, ``bench``, ``efficiency``,
``validate``.  Parameters come from an optional JSON config file with
command-line flags taking precedence; a seed is always required, so every
command is a pure function of its inputs and reruns are byte-identical.
Numbers are written with 17 significant digits so downstream diffs are
exact.  Exit codes: 0 ok, 2 input or configuration error, 3 runtime
estimation error; failures print a one-line JSON error to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .efficiency import efficiency_curve, trial_moments
from .errors import ConfigError, EstimationError, PanelDataError
from .estimator import estimate_cross_fit
from .inference import uniform_band
from .intervention import DeltaGrid, default_grid
from .learners import LearnerSpec
from .nuisance import NuisanceSpecs
from .panel import load_long_csv, validate_monotonicity, write_long_csv
from .simulation import DgpConfig, run_benchmark, simulate

__all__ = ["main"]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, (int, float, np.floating)) and not isinstance(v, bool) else str(v) for v in row) + "\n")


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _merge_config(args: argparse.Namespace, keys: list[str]) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        unknown = set(cfg) - set(keys)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg.get("seed") is None:
        raise ConfigError("a seed is required (no wall-clock default)")
    return cfg


def _grid_from(cfg: dict) -> DeltaGrid:
    if cfg.get("grid"):
        vals = cfg["grid"]
        if isinstance(vals, str):
            vals = json.loads(vals)
        return DeltaGrid(values=tuple(float(v) for v in vals), spacing="linear")
    num = int(cfg.get("grid_size", 25))
    lo = float(cfg.get("grid_lo", 0.1))
    hi = float(cfg.get("grid_hi", 5.0))
    if (num, lo, hi) == (25, 0.1, 5.0):
        return default_grid()
    return DeltaGrid.log_spaced(lo, hi, num)


def _specs_from(cfg: dict) -> NuisanceSpecs:
    return NuisanceSpecs(
        pi=LearnerSpec.from_config(cfg.get("pi_learner", "logistic_irls")),
        omega=LearnerSpec.from_config(cfg.get("omega_learner", "logistic_irls")),
        m=LearnerSpec.from_config(cfg.get("m_learner", "ridge:1e-6")),
    )


def _outdir(cfg: dict) -> Path:
    out = Path(cfg.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_validate(args) -> int:
    cfg = _merge_config(args, ["input", "seed", "out"])
    if not cfg.get("input"):
        raise ConfigError("validate needs --input")
    ds = load_long_csv(cfg["input"])
    report = validate_monotonicity(ds)
    payload = {
        "n": ds.n,
        "n_periods": ds.T,
        "d": ds.d,
        "outcome_times": list(ds.outcome_times),
        "violations": [{"id": sid, "t": t} for sid, t in report],
    }
    print(json.dumps(payload, sort_keys=True))
    return 0 if not report else 2


def _cmd_estimate(args) -> int:
    keys = [
        "input", "out", "seed", "K", "t", "alpha", "B", "threads",
        "grid", "grid_size", "grid_lo", "grid_hi",
        "pi_learner", "omega_learner", "m_learner",
    ]
    cfg = _merge_config(args, keys)
    if not cfg.get("input"):
        raise ConfigError("estimate needs --input")
    ds = load_long_csv(cfg["input"])
    t = int(cfg.get("t", ds.T))
    K = int(cfg.get("K", 2))
    alpha = float(cfg.get("alpha", 0.05))
    B = int(cfg.get("B", 10_000))
    seed = int(cfg["seed"])
    grid = _grid_from(cfg)
    specs = _specs_from(cfg)
    est, eif = estimate_cross_fit(ds, K, seed, specs, grid, t)
    band = uniform_band(eif, est, alpha=alpha, B=B, seed=seed)
    out = _outdir(cfg)
    _write_csv(
        out / "effect_curve.csv",
        ["delta", "psi_hat", "sigma_hat", "n"],
        ((d, p, s, est.n) for d, p, s in est.rows()),
    )
    _write_csv(
        out / "band.csv",
        ["delta", "psi_hat", "pw_lo", "pw_hi", "unif_lo", "unif_hi"],
        zip(
            band.deltas, band.psi_hat,
            band.pointwise_lo, band.pointwise_hi,
            band.uniform_lo, band.uniform_hi,
        ),
    )
    _write_json(
        out / "diagnostics.json",
        {
            "config": {k: cfg.get(k) for k in sorted(cfg)},
            "kind": est.kind,
            "n": est.n,
            "t": est.t,
            "c_alpha": band.c_alpha,
            "c_alpha_raw": band.c_alpha_raw,
            "B": band.B,
            "alpha": band.alpha,
            "seed": seed,
            "excluded_deltas": list(band.excluded),
            "nuisance": est.diagnostics.get("folds", []),
            "warnings": est.diagnostics.get("warnings", []),
        },
    )
    return 0


def _cmd_simulate(args) -> int:
    keys = ["kind", "n", "t", "ul", "p", "seed", "out"]
    cfg = _merge_config(args, keys)
    dgp = DgpConfig(
        kind=cfg.get("kind", "dropout"),
        n=int(cfg.get("n", 1000)),
        T=int(cfg.get("t", 10)),
        u_l=float(cfg.get("ul", 1.0)),
        p=float(cfg.get("p", 0.5)),
        seed=int(cfg["seed"]),
    )
    ds = simulate(dgp)
    out = _outdir(cfg)
    write_long_csv(ds, out / "panel.csv")
    _write_json(
        out / "simulate.json",
        {
            "config": {
                "kind": dgp.kind, "n": dgp.n, "t": dgp.T,
                "ul": dgp.u_l, "p": dgp.p, "seed": dgp.seed,
            },
            "dropout_fraction": float(np.mean(ds.R[:, ds.T] == 0)),
        },
    )
    return 0


def _cmd_bench(args) -> int:
    keys = [
        "kind", "n", "t", "ul", "p", "seed", "out", "S", "K", "threads",
        "grid_size", "grid_lo", "grid_hi", "truth_draws",
        "pi_learner", "omega_learner", "m_learner",
    ]
    cfg = _merge_config(args, keys)
    dgp = DgpConfig(
        kind=cfg.get("kind", "dropout"),
        n=int(cfg.get("n", 1000)),
        T=int(cfg.get("t", 10)),
        u_l=float(cfg.get("ul", 1.0)),
        p=float(cfg.get("p", 0.5)),
        seed=int(cfg["seed"]),
    )
    grid = DeltaGrid.log_spaced(
        float(cfg.get("grid_lo", 0.1)),
        float(cfg.get("grid_hi", 5.0)),
        int(cfg.get("grid_size", 9)),
    )
    result = run_benchmark(
        dgp,
        S=int(cfg.get("S", 50)),
        grid=grid,
        specs=_specs_from(cfg),
        seed=int(cfg["seed"]),
        K=int(cfg.get("K", 2)),
        truth_draws=int(cfg.get("truth_draws", 200_000)),
        threads=int(cfg.get("threads", 1)),
    )
    out = _outdir(cfg)
    summary = result.summary()
    summary["config"] = {k: cfg.get(k) for k in sorted(cfg)}
    _write_json(out / "benchmark.json", summary)
    rows = []
    for kind, arr in result.estimates.items():
        for r in range(arr.shape[0]):
            for j, delta in enumerate(grid.values):
                rows.append(
                    (kind, delta, r + 1, arr[r, j], result.truths[j],
                     arr[r, j] - result.truths[j])
                )
    _write_csv(
        out / "errors.csv",
        ["estimator", "delta", "rep", "estimate", "truth", "error"],
        rows,
    )
    return 0


def _cmd_efficiency(args) -> int:
    keys = ["delta", "p", "tmax", "variant", "c", "seed", "out"]
    cfg = _merge_config(args, keys)
    delta = float(cfg.get("delta", 2.0))
    p = float(cfg.get("p", 0.5))
    tmax = int(cfg.get("tmax", 12))
    variant = cfg.get("variant", "always_treated")
    c = float(cfg["c"]) if cfg.get("c") is not None else None
    report = efficiency_curve(
        lambda T: trial_moments(T, p, delta), tmax, variant=variant, c=c
    )
    out = _outdir(cfg)
    _write_csv(
        out / "efficiency.csv",
        ["T", "lower", "upper", "exact_ratio", "variant"],
        report.as_csv_rows(),
    )
    _write_json(
        out / "efficiency.json",
        {
            "config": {k: cfg.get(k) for k in sorted(cfg)},
            "variant": report.variant,
            "delta": report.delta,
            "p": report.p,
            "crossing_T": report.crossing_T,
            "scan_T": report.scan_T,
            "scan_T_strict": report.scan_T_strict,
        },
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oddshift",
        description="Odds-multiplier effect curves for panels with dropout",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="JSON config file; flags override its keys")
        sp.add_argument("--seed", type=int, help="required RNG seed")
        sp.add_argument("--out", help="output directory (default: current)")

    sp = sub.add_parser("estimate", help="effect curve with bands from a panel CSV")
    add_common(sp)
    sp.add_argument("--input", help="long-format panel CSV")
    sp.add_argument("--K", type=int, help="number of folds (default 2)")
    sp.add_argument("--t", type=int, help="horizon (default: last period)")
    sp.add_argument("--alpha", type=float, help="band level (default 0.05)")
    sp.add_argument("--B", type=int, help="bootstrap replicates (default 10000)")
    sp.add_argument("--threads", type=int, help="worker count; outputs do not depend on it")
    sp.add_argument("--grid", help="explicit JSON list of delta values")
    sp.add_argument("--grid-size", dest="grid_size", type=int)
    sp.add_argument("--grid-lo", dest="grid_lo", type=float)
    sp.add_argument("--grid-hi", dest="grid_hi", type=float)
    sp.add_argument("--pi-learner", dest="pi_learner")
    sp.add_argument("--omega-learner", dest="omega_learner")
    sp.add_argument("--m-learner", dest="m_learner")
    sp.set_defaults(fn=_cmd_estimate)

    sp = sub.add_parser("simulate", help="draw a synthetic panel CSV")
    add_common(sp)
    sp.add_argument("--kind", choices=["dropout", "trial", "observational"])
    sp.add_argument("--n", type=int)
    sp.add_argument("--t", type=int, help="number of periods")
    sp.add_argument("--ul", type=float, help="frailty lower endpoint")
    sp.add_argument("--p", type=float, help="trial treatment probability")
    sp.set_defaults(fn=_cmd_simulate)

    sp = sub.add_parser("bench", help="estimator benchmark against the Monte Carlo truth")
    add_common(sp)
    sp.add_argument("--kind", choices=["dropout", "trial", "observational"])
    sp.add_argument("--n", type=int)
    sp.add_argument("--t", type=int)
    sp.add_argument("--ul", type=float)
    sp.add_argument("--p", type=float)
    sp.add_argument("--S", type=int, help="number of replications")
    sp.add_argument("--K", type=int)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--grid-size", dest="grid_size", type=int)
    sp.add_argument("--grid-lo", dest="grid_lo", type=float)
    sp.add_argument("--grid-hi", dest="grid_hi", type=float)
    sp.add_argument("--truth-draws", dest="truth_draws", type=int)
    sp.add_argument("--pi-learner", dest="pi_learner")
    sp.add_argument("--omega-learner", dest="omega_learner")
    sp.add_argument("--m-learner", dest="m_learner")
    sp.set_defaults(fn=_cmd_bench)

    sp = sub.add_parser("efficiency", help="analytic variance-ratio bounds and exact curve")
    add_common(sp)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--p", type=float)
    sp.add_argument("--tmax", type=int)
    sp.add_argument("--variant", choices=["always_treated", "never_treated"])
    sp.add_argument("--c", type=float, help="bound constant; default 1.001x its floor")
    sp.set_defaults(fn=_cmd_efficiency)

    sp = sub.add_parser("validate", help="check a panel CSV against the schema")
    add_common(sp)
    sp.add_argument("--input", help="long-format panel CSV")
    sp.set_defaults(fn=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, PanelDataError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except EstimationError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
