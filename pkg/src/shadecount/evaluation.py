"""RMSE metric, day-grouped cross-validation driver, and report assembly.

Models enter as fit callables ``fit(X_train, y_train) -> predict`` where
``predict`` maps a feature matrix to a prediction vector. Fold evaluation
never sees day identities beyond grouping, and a fold's training set is the
union of the other folds' days, so a date planted in two folds surfaces as
FoldLeak instead of silently training on test days.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .dataset import DayRecord, FoldPlan
from .errors import EmptyInput, FoldLeak, LengthMismatch, UnknownDate
from .features import build_examples, to_matrix

FitFn = Callable[[np.ndarray, np.ndarray], Callable[[np.ndarray], np.ndarray]]

# static metadata for the comparison report
MODEL_LABELS = {
    "decision_tree": ("Very High", "High"),
    "random_forest": ("Medium/High", "Medium"),
    "neural_network": ("Low", "Low"),
}

TRACE_CSV_HEADER = "time_hours,actual,predicted,thi_current,thi_accum,thi_night_prev"

COMPARISON_CSV_HEADER = "model,rmse,interpretability,explainability"


def rmse(actual, predicted) -> float:
    """Root mean squared error; 0 iff the sequences match exactly."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape:
        raise LengthMismatch(f"actual {a.shape} vs predicted {p.shape}")
    if a.size == 0:
        raise EmptyInput("rmse of empty sequences is undefined")
    return float(np.sqrt(np.mean((a - p) ** 2)))


@dataclass(frozen=True)
class CvReport:
    per_fold_rmse: tuple[float, ...]
    overall_rmse: float  # unweighted mean of per-fold values
    pooled_rmse: float  # over all test residuals, reported for transparency
    per_day_rmse: dict[date, float]
    quartiles: tuple[float, float, float]  # (q1, median, q3) of per-day RMSE


@dataclass(frozen=True)
class QuartileSummary:
    q1: float
    median: float
    q3: float
    vmin: float
    vmax: float
    values: tuple[float, ...]  # sorted, raincloud-ready


@dataclass(frozen=True)
class DayTrace:
    date: date
    rows: tuple[tuple[float, float, float, float, float, float], ...]


@dataclass(frozen=True)
class ComparisonRow:
    model: str
    rmse: float
    interpretability: str
    explainability: str


def quartile_summary(per_day_rmse) -> QuartileSummary:
    """Quartiles of per-day RMSE by linear interpolation between order
    statistics (numpy's default convention)."""
    if isinstance(per_day_rmse, Mapping):
        values = sorted(float(v) for v in per_day_rmse.values())
    else:
        values = sorted(float(v) for v in per_day_rmse)
    if not values:
        raise EmptyInput("quartile summary of an empty map")
    arr = np.asarray(values)
    q1, med, q3 = np.quantile(arr, [0.25, 0.5, 0.75])
    return QuartileSummary(
        float(q1), float(med), float(q3), values[0], values[-1], tuple(values)
    )


def _fold_index(dates: Sequence[date], plan: FoldPlan) -> np.ndarray:
    """Map each example date to its fold; reject overlapping or missing days."""
    owner: dict[date, int] = {}
    for i, fold in enumerate(plan.folds):
        for d in fold:
            if d in owner:
                raise FoldLeak(f"date {d} appears in folds {owner[d]} and {i}")
            owner[d] = i
    idx = np.empty(len(dates), dtype=int)
    for j, d in enumerate(dates):
        if d not in owner:
            raise ValueError(f"example date {d} is in no fold")
        idx[j] = owner[d]
    return idx


def _eval_fold(payload):
    X_tr, y_tr, X_te, y_te, te_dates, fit = payload
    predictor = fit(X_tr, y_tr)
    preds = np.asarray(predictor(X_te), dtype=float)
    fold_rmse = rmse(y_te, preds)
    per_day: dict[date, float] = {}
    for d in sorted(set(te_dates)):
        sel = np.array([td == d for td in te_dates])
        per_day[d] = rmse(y_te[sel], preds[sel])
    sse = float(np.sum((y_te - preds) ** 2))
    return fold_rmse, per_day, y_te.size, sse


def cross_validate(
    X,
    y,
    dates: Sequence[date],
    plan: FoldPlan,
    fit: FitFn,
    jobs: int = 1,
) -> CvReport:
    """Train on k-1 folds of days, test on the held-out days, k times.

    Features must be computed before folding (they only depend on same-day
    and previous-night data, so this leaks nothing). The training set of
    fold i is built as the union of the other folds' days, never as "all
    minus test", and train/test date sets are asserted disjoint per fold.
    With jobs > 1 folds run in separate processes; ``fit`` must then be
    picklable (module-level function or functools.partial over one).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.size or X.shape[0] != len(dates):
        raise LengthMismatch(
            f"X rows {X.shape[0]}, y {y.size}, dates {len(dates)} must match"
        )
    fold_idx = _fold_index(dates, plan)
    dates_arr = np.asarray(list(dates), dtype=object)

    payloads = []
    for i, fold in enumerate(plan.folds):
        train_dates = frozenset().union(
            *(f for j, f in enumerate(plan.folds) if j != i)
        )
        if train_dates & fold:
            raise FoldLeak(f"fold {i} shares days with its training union")
        te = fold_idx == i
        tr = np.array([d in train_dates for d in dates_arr])
        test_day_set = set(dates_arr[te])
        if test_day_set & set(dates_arr[tr]):
            raise FoldLeak(f"fold {i} test days found in training examples")
        payloads.append(
            (X[tr], y[tr], X[te], y[te], list(dates_arr[te]), fit)
        )

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(payloads))) as pool:
            results = list(pool.map(_eval_fold, payloads))
    else:
        results = [_eval_fold(p) for p in payloads]

    per_fold = tuple(r[0] for r in results)
    per_day: dict[date, float] = {}
    for _, fold_days, _, _ in results:
        per_day.update(fold_days)
    total_n = sum(r[2] for r in results)
    total_sse = sum(r[3] for r in results)
    summary = quartile_summary(per_day)
    return CvReport(
        per_fold_rmse=per_fold,
        overall_rmse=float(np.mean(per_fold)),
        pooled_rmse=float(np.sqrt(total_sse / total_n)),
        per_day_rmse=dict(sorted(per_day.items())),
        quartiles=(summary.q1, summary.median, summary.q3),
    )


def _mean_fit(X, y):
    m = float(np.mean(y))
    return lambda X_test: np.full(np.asarray(X_test).shape[0], m)


def mean_baseline_fitter() -> FitFn:
    """Predicts the global training mean everywhere; reference model for
    sanity checks (its fold RMSE is the test targets' spread around that
    mean by definition)."""
    return _mean_fit


def day_trace(predict: Callable[[np.ndarray], np.ndarray], day: DayRecord) -> DayTrace:
    """Actual vs predicted counts plus the three THI series for one day."""
    examples = build_examples(day)
    X, y, _ = to_matrix(examples)
    preds = np.asarray(predict(X), dtype=float)
    return _assemble_trace(X, y, preds, day.date)


def trace_from_examples(
    predict: Callable[[np.ndarray], np.ndarray],
    examples,
    day: date,
) -> DayTrace:
    """Same as :func:`day_trace` but starting from prebuilt examples, e.g.
    rows read back from a feature CSV."""
    selected = [ex for ex in examples if ex.date == day]
    if not selected:
        raise UnknownDate(f"no examples dated {day.isoformat()}")
    X, y, _ = to_matrix(selected)
    preds = np.asarray(predict(X), dtype=float)
    return _assemble_trace(X, y, preds, day)


def _assemble_trace(X, y, preds, day: date) -> DayTrace:
    t, cur, night, acc = (X[:, i] for i in range(4))
    rows = tuple(
        (float(t[i]), float(y[i]), float(preds[i]), float(cur[i]), float(acc[i]),
         float(night[i]))
        for i in range(X.shape[0])
    )
    return DayTrace(date=day, rows=rows)


def compare_models(
    X,
    y,
    dates: Sequence[date],
    plan: FoldPlan,
    fitters: Mapping[str, FitFn],
    jobs: int = 1,
) -> list[ComparisonRow]:
    """One cross-validated row per model, with static capability labels."""
    rows = []
    for name, fit in fitters.items():
        report = cross_validate(X, y, dates, plan, fit, jobs=jobs)
        interp, explain = MODEL_LABELS.get(name, ("n/a", "n/a"))
        rows.append(ComparisonRow(name, report.overall_rmse, interp, explain))
    return rows


def report_json(report: CvReport, model: str, config: dict) -> dict:
    return {
        "model": model,
        "config": config,
        "per_fold": list(report.per_fold_rmse),
        "overall": report.overall_rmse,
        "pooled": report.pooled_rmse,
        "per_day": {d.isoformat(): v for d, v in report.per_day_rmse.items()},
        "quartiles": {
            "q1": report.quartiles[0],
            "median": report.quartiles[1],
            "q3": report.quartiles[2],
        },
    }


def write_day_trace_csv(trace: DayTrace, path: str | Path, meta: dict | None = None) -> None:
    lines = []
    if meta is not None:
        lines.append("# meta " + json.dumps(meta, sort_keys=True))
    lines.append(TRACE_CSV_HEADER)
    for row in trace.rows:
        lines.append(",".join(repr(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_comparison_csv(
    rows: Sequence[ComparisonRow], path: str | Path, meta: dict | None = None
) -> None:
    lines = []
    if meta is not None:
        lines.append("# meta " + json.dumps(meta, sort_keys=True))
    lines.append(COMPARISON_CSV_HEADER)
    for r in rows:
        lines.append(f"{r.model},{r.rmse!r},{r.interpretability},{r.explainability}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def render_comparison(rows: Sequence[ComparisonRow]) -> str:
    header = f"{'model':<16} {'rmse':>8}  {'interpretability':<16} {'explainability':<14}"
    out = [header, "-" * len(header)]
    for r in rows:
        out.append(
            f"{r.model:<16} {r.rmse:>8.3f}  {r.interpretability:<16} {r.explainability:<14}"
        )
    return "\n".join(out)
