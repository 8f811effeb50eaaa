"""Longitudinal panel container with monotone dropout.

Data model
----------
Each subject contributes a chain over times t = 1..T of covariates X_t
(fixed dimension d), a binary treatment A_t, an optional outcome Y_t, and
retention indicators R_1..R_{T+1}.  Retention is monotone: once a subject
leaves, they never return.  (X_t, A_t) exist exactly when R_t = 1 and Y_t
exists exactly when R_{t+1} = 1 (subjects can leave after treatment is
recorded but before the outcome is measured).

A dataset need not record outcomes at every time; ``outcome_times`` lists
the times at which outcomes are present for every retained subject.

CSV layout (long format, one row per observed subject-time):
``id,time,x1,...,xd,a,y,r`` with time 1-based, a and r in {0,1}, and
y left empty where the outcome is unobserved or unrecorded.  Rows absent
after a subject's last r=1 row are read as dropout (R = 0 afterwards).
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, PanelDataError

__all__ = [
    "Trajectory",
    "PanelDataset",
    "FoldAssignment",
    "FeatureLayout",
    "retention_violations",
    "validate_monotonicity",
    "split_folds",
    "history_at",
    "history_features",
    "load_long_csv",
    "write_long_csv",
]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class Trajectory:
    """One subject's chain. Entries for times with R_t = 0 are None."""

    subject_id: str
    covariates: tuple  # tuple over t=1..T of tuple[float, ...] | None
    treatments: tuple  # tuple over t=1..T of int | None
    outcomes: tuple    # tuple over t=1..T of float | None
    retention: tuple   # tuple over t=1..T+1 of int

    @property
    def n_periods(self) -> int:
        return len(self.covariates)

    def observed_through(self) -> int:
        """Last time t with R_t = 1."""
        r = self.retention
        t = 0
        for i in range(len(r) - 1):
            if r[i] == 1:
                t = i + 1
        return t


def retention_violations(retention: Sequence[int]) -> list[int]:
    """Times t at which a retention sequence breaks monotonicity.

    Returns the 1-based times where R_t = 1 follows R_{t-1} = 0, plus
    t = 1 if R_1 != 1.
    """
    bad = []
    if len(retention) == 0 or retention[0] != 1:
        bad.append(1)
    for i in range(1, len(retention)):
        if retention[i] == 1 and retention[i - 1] == 0:
            bad.append(i + 1)
    return bad


class PanelDataset:
    """Immutable collection of trajectories plus dense array views.

    Arrays are indexed [unit, time-1]; entries unavailable because of
    dropout hold NaN (never a usable sentinel).  ``R`` has one extra
    column so that R[:, t] is the retention indicator R_{t+1} gating Y_t.
    """

    def __init__(self, trajectories: Sequence[Trajectory], validate: bool = True):
        trajectories = list(trajectories)
        if not trajectories:
            raise PanelDataError("dataset needs at least one trajectory")
        T = trajectories[0].n_periods
        d = None
        for tr in trajectories:
            if tr.n_periods != T:
                raise PanelDataError(
                    f"subject {tr.subject_id!r}: expected {T} periods, got {tr.n_periods}"
                )
            for x in tr.covariates:
                if x is not None:
                    if d is None:
                        d = len(x)
                    elif len(x) != d:
                        raise PanelDataError(
                            f"subject {tr.subject_id!r}: covariate dimension mismatch"
                        )
        if d is None:
            d = 0

        n = len(trajectories)
        X = np.full((n, T, d), np.nan)
        A = np.full((n, T), np.nan)
        Y = np.full((n, T), np.nan)
        R = np.zeros((n, T + 1), dtype=np.int8)
        for i, tr in enumerate(trajectories):
            if len(tr.retention) != T + 1:
                raise PanelDataError(
                    f"subject {tr.subject_id!r}: retention must have length T+1"
                )
            R[i] = tr.retention
            for t in range(T):
                if tr.covariates[t] is not None:
                    X[i, t] = tr.covariates[t]
                if tr.treatments[t] is not None:
                    A[i, t] = tr.treatments[t]
                if tr.outcomes[t] is not None:
                    Y[i, t] = tr.outcomes[t]

        self.trajectories = tuple(trajectories)
        self.n = n
        self.T = T
        self.d = d
        self.X = X
        self.A = A
        self.Y = Y
        self.R = R
        # times (1-based) at which any retained unit has a recorded outcome
        self.outcome_times = tuple(
            int(t + 1) for t in range(T) if np.any(~np.isnan(Y[:, t]))
        )
        self.ids = tuple(tr.subject_id for tr in trajectories)
        for arr in (self.X, self.A, self.Y):
            arr.setflags(write=False)
        self.R.setflags(write=False)

        if validate:
            problems = self.check_invariants()
            if problems:
                raise PanelDataError("; ".join(problems[:8]))

    def check_invariants(self) -> list[str]:
        """Return human-readable descriptions of every invariant violation."""
        problems = []
        for i, tr in enumerate(self.trajectories):
            bad = retention_violations(tr.retention)
            for t in bad:
                problems.append(
                    f"subject {tr.subject_id!r}: non-monotone retention at t={t}"
                )
            if bad:
                continue
            for t in range(self.T):
                alive = tr.retention[t] == 1
                has_x = tr.covariates[t] is not None
                has_a = tr.treatments[t] is not None
                if alive != has_x or alive != has_a:
                    problems.append(
                        f"subject {tr.subject_id!r}: covariate/treatment presence "
                        f"disagrees with R at t={t + 1}"
                    )
                if has_a and tr.treatments[t] not in (0, 1):
                    problems.append(
                        f"subject {tr.subject_id!r}: non-binary treatment at t={t + 1}"
                    )
                has_y = tr.outcomes[t] is not None
                y_ok = tr.retention[t + 1] == 1
                if has_y and not y_ok:
                    problems.append(
                        f"subject {tr.subject_id!r}: outcome recorded at t={t + 1} "
                        "but subject had left"
                    )
                if (t + 1) in self.outcome_times and y_ok and not has_y:
                    problems.append(
                        f"subject {tr.subject_id!r}: missing outcome at recorded "
                        f"time t={t + 1}"
                    )
        return problems

    def trajectory(self, i: int) -> Trajectory:
        return self.trajectories[i]

    @classmethod
    def from_arrays(
        cls,
        X: np.ndarray,
        A: np.ndarray,
        Y: np.ndarray,
        R: np.ndarray,
        ids: Sequence[str] | None = None,
        validate: bool = True,
    ) -> "PanelDataset":
        """Build a dataset from dense arrays (NaN marks unavailable cells)."""
        n, T = A.shape
        if X.ndim == 2:
            X = X[:, :, None]
        if ids is None:
            ids = [f"s{i + 1}" for i in range(n)]
        trajectories = []
        for i in range(n):
            cov, trt, out = [], [], []
            for t in range(T):
                if R[i, t] == 1:
                    cov.append(tuple(float(v) for v in X[i, t]))
                    trt.append(int(A[i, t]))
                else:
                    cov.append(None)
                    trt.append(None)
                out.append(float(Y[i, t]) if not np.isnan(Y[i, t]) else None)
            trajectories.append(
                Trajectory(
                    subject_id=str(ids[i]),
                    covariates=tuple(cov),
                    treatments=tuple(trt),
                    outcomes=tuple(out),
                    retention=tuple(int(v) for v in R[i]),
                )
            )
        return cls(trajectories, validate=validate)


def validate_monotonicity(ds: PanelDataset) -> list[tuple[str, int]]:
    """Report (subject_id, time) pairs where retention is non-monotone.

    Valid datasets return an empty list.
    """
    report = []
    for tr in ds.trajectories:
        for t in retention_violations(tr.retention):
            report.append((tr.subject_id, t))
    return report


@dataclass(frozen=True)
class FoldAssignment:
    """Partition of subjects into K folds, generated from an explicit seed."""

    labels: dict  # subject_id -> fold in 1..K
    K: int
    seed: int
    by_index: np.ndarray = field(repr=False)  # (n,) fold label per dataset row

    def indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.by_index == k)


def split_folds(ds: PanelDataset, K: int, seed: int) -> FoldAssignment:
    """Randomly partition subjects into K folds of near-equal size.

    Deterministic given the seed and independent of trajectory contents;
    fold sizes differ by at most one.
    """
    n = ds.n
    if K < 2 or K > n:
        raise ConfigError(f"fold count K={K} must satisfy 2 <= K <= n={n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    by_index = np.empty(n, dtype=np.int64)
    by_index[order] = np.arange(n) % K + 1
    labels = {ds.ids[i]: int(by_index[i]) for i in range(n)}
    return FoldAssignment(labels=labels, K=K, seed=seed, by_index=by_index)


@dataclass(frozen=True)
class FeatureLayout:
    """Column layout of a flattened history feature matrix at time t.

    Order is fixed: covariate blocks X_1..X_t (d columns each), then past
    treatments A_1..A_{t-1}, then past outcomes Y_s for recorded times
    s <= t-1 in increasing s, then (optionally) the current treatment A_t.
    """

    d: int
    t: int
    outcome_cols: tuple  # 1-based outcome times included
    with_action: bool

    @property
    def width(self) -> int:
        return self.d * self.t + (self.t - 1) + len(self.outcome_cols) + (
            1 if self.with_action else 0
        )

    def x_block(self, s: int) -> slice:
        """Columns of X_s (1-based s <= t)."""
        return slice((s - 1) * self.d, s * self.d)

    def a_col(self, s: int) -> int:
        """Column of past treatment A_s (1-based s <= t-1)."""
        return self.d * self.t + (s - 1)

    def y_col(self, s: int) -> int:
        return self.d * self.t + (self.t - 1) + self.outcome_cols.index(s)

    @property
    def action_col(self) -> int:
        if not self.with_action:
            raise ValueError("layout has no action column")
        return self.width - 1


def history_features(
    ds: PanelDataset, t: int, with_action: bool = False
) -> tuple[np.ndarray, np.ndarray, FeatureLayout]:
    """Flattened history H_t for every unit, plus the alive-at-t mask.

    Rows for units with R_t = 0 contain NaN and must not be used.  With
    ``with_action`` the observed A_t is appended as the last column.
    """
    if not 1 <= t <= ds.T:
        raise ConfigError(f"time t={t} outside 1..{ds.T}")
    outcome_cols = tuple(s for s in ds.outcome_times if s <= t - 1)
    layout = FeatureLayout(d=ds.d, t=t, outcome_cols=outcome_cols, with_action=with_action)
    parts = [ds.X[:, :t, :].reshape(ds.n, t * ds.d)]
    if t > 1:
        parts.append(ds.A[:, : t - 1])
    if outcome_cols:
        parts.append(ds.Y[:, [s - 1 for s in outcome_cols]])
    if with_action:
        parts.append(ds.A[:, t - 1 : t])
    F = np.concatenate(parts, axis=1) if parts else np.empty((ds.n, 0))
    alive = ds.R[:, t - 1] == 1
    return F, alive, layout


def history_at(tr: Trajectory, t: int) -> np.ndarray:
    """Flattened history vector for one trajectory (R_t = 1 required)."""
    if not 1 <= t <= tr.n_periods:
        raise ConfigError(f"time t={t} outside 1..{tr.n_periods}")
    if tr.retention[t - 1] != 1:
        raise PanelDataError(
            f"subject {tr.subject_id!r} not retained at t={t}; history undefined"
        )
    parts: list[float] = []
    for s in range(t):
        parts.extend(tr.covariates[s])
    parts.extend(tr.treatments[s] for s in range(t - 1))
    parts.extend(
        tr.outcomes[s] for s in range(t - 1) if tr.outcomes[s] is not None
    )
    return np.asarray(parts, dtype=float)


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------


def _parse_binary(raw: str, what: str, line_no: int) -> int:
    if raw not in ("0", "1"):
        raise PanelDataError(f"line {line_no}: non-binary {what} value {raw!r}")
    return int(raw)


def load_long_csv(path, n_periods: int | None = None) -> PanelDataset:
    """Read a long-format panel CSV (see module docstring for the schema).

    ``n_periods`` overrides the horizon T; otherwise the metadata sidecar
    ``<path>.meta.json`` is consulted, falling back to the largest time
    present in the file.
    """
    path = Path(path)
    if not path.exists():
        raise PanelDataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelDataError(f"{path}: empty file") from None
        rows = list(reader)

    if len(header) < 4 or header[0] != "id" or header[1] != "time":
        raise PanelDataError(f"{path}: header must start with id,time")
    if header[-1] != "r" or header[-2] != "y" or header[-3] != "a":
        raise PanelDataError(f"{path}: header must end with a,y,r")
    x_names = header[2:-3]
    d = len(x_names)
    for j, name in enumerate(x_names):
        if name != f"x{j + 1}":
            raise PanelDataError(f"{path}: covariate column {j + 3} must be x{j + 1}")

    records: dict[str, dict[int, tuple]] = {}
    order: list[str] = []
    for k, row in enumerate(rows):
        line_no = k + 2
        if len(row) != len(header):
            raise PanelDataError(f"line {line_no}: expected {len(header)} fields")
        sid = row[0]
        try:
            t = int(row[1])
        except ValueError:
            raise PanelDataError(f"line {line_no}: bad time {row[1]!r}") from None
        if t < 1:
            raise PanelDataError(f"line {line_no}: time must be >= 1")
        r = _parse_binary(row[-1], "r", line_no)
        if r == 1:
            try:
                x = tuple(float(v) for v in row[2 : 2 + d])
            except ValueError:
                raise PanelDataError(f"line {line_no}: bad covariate value") from None
            a = _parse_binary(row[-3], "a", line_no)
            y_raw = row[-2]
            y = float(y_raw) if y_raw != "" else None
        else:
            if any(v != "" for v in row[2:-1]):
                raise PanelDataError(
                    f"line {line_no}: r=0 row must leave x, a, y empty"
                )
            x, a, y = None, None, None
        if sid not in records:
            records[sid] = {}
            order.append(sid)
        if t in records[sid]:
            raise PanelDataError(f"line {line_no}: duplicate (id, time) ({sid!r}, {t})")
        records[sid][t] = (r, x, a, y)

    if not records:
        raise PanelDataError(f"{path}: no data rows")
    T = n_periods
    if T is None:
        meta_path = path.with_suffix(path.suffix + ".meta.json")
        if meta_path.exists():
            with open(meta_path, encoding="utf-8") as fh:
                T = int(json.load(fh)["n_periods"])
        else:
            T = max(max(times) for times in records.values())

    trajectories = []
    for sid in order:
        per_t = records[sid]
        retention = []
        cov, trt, out = [], [], []
        for t in range(1, T + 1):
            r, x, a, y = per_t.get(t, (0, None, None, None))
            retention.append(r)
            cov.append(x)
            trt.append(a)
            out.append(y)
        # R_{T+1}: the terminal outcome is observed iff the subject stayed
        # for its measurement.
        last = retention[T - 1]
        retention.append(1 if (last == 1 and out[T - 1] is not None) else 0)
        bad = retention_violations(tuple(retention))
        if bad:
            raise PanelDataError(
                f"subject {sid!r}: non-monotone retention at t={bad[0]}"
            )
        # Y at t < T implies the subject was present at t+1.
        for t in range(1, T):
            if out[t - 1] is not None and retention[t] != 1:
                raise PanelDataError(
                    f"subject {sid!r}: outcome at t={t} but no data at t={t + 1}"
                )
        trajectories.append(
            Trajectory(
                subject_id=sid,
                covariates=tuple(cov),
                treatments=tuple(trt),
                outcomes=tuple(out),
                retention=tuple(retention),
            )
        )
    return PanelDataset(trajectories)


def write_long_csv(ds: PanelDataset, path, sidecar: bool = True) -> None:
    """Write the canonical long CSV (observed rows only) plus a metadata sidecar."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["id", "time"] + [f"x{j + 1}" for j in range(ds.d)] + ["a", "y", "r"]
        )
        for tr in ds.trajectories:
            for t in range(1, tr.n_periods + 1):
                if tr.retention[t - 1] != 1:
                    break
                y = tr.outcomes[t - 1]
                writer.writerow(
                    [tr.subject_id, t]
                    + [_fmt(v) for v in tr.covariates[t - 1]]
                    + [tr.treatments[t - 1], "" if y is None else _fmt(y), 1]
                )
    if sidecar:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        meta = {
            "n": ds.n,
            "n_periods": ds.T,
            "d": ds.d,
            "outcome_times": list(ds.outcome_times),
            "sha256": digest,
        }
        with open(path.with_suffix(path.suffix + ".meta.json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
