"""Thermal-stress feature engineering.

Builds the four model inputs for each daytime observation:

- ``time_hours``: observation time as fractional hours since midnight,
- ``thi_current``: temperature-humidity index of the observation,
- ``thi_night_prev``: mean THI over the preceding night window,
- ``thi_accum``: running mean of THI from the day's first observation
  up to and including the current one.

The target is the observed shade count, kept in animal units so RMSE
stays directly interpretable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import DayRecord, RawObservation
from .errors import DomainError, EmptyNight

FEATURE_NAMES = ("time_hours", "thi_current", "thi_night_prev", "thi_accum")

FEATURE_CSV_HEADER = "date,time_hours,thi_current,thi_night_prev,thi_accum,cow_count"


@dataclass(frozen=True)
class FeatureVector:
    time_hours: float
    thi_current: float
    thi_night_prev: float
    thi_accum: float

    def as_row(self) -> tuple[float, float, float, float]:
        return (self.time_hours, self.thi_current, self.thi_night_prev, self.thi_accum)


@dataclass(frozen=True)
class LabeledExample:
    features: FeatureVector
    target: float
    date: date


def thi(temperature_c, relative_humidity_pct):
    """Temperature-humidity index (NRC 1971 form), RH in percent.

    Accepts scalars or equally shaped arrays; scalar in, Python float out.

    Written as ``F - 0.55*(1 - RH/100)*(F - 58)`` with ``F = 1.8*T + 32``
    rather than with the expanded ``0.55 - 0.0055*RH`` factor: the two are
    algebraically identical, but this form makes the humidity correction
    vanish exactly (not just to rounding) at RH = 100, preserving the
    identity thi(T, 100) == 1.8*T + 32 in floating point.
    """
    t = np.asarray(temperature_c, dtype=float)
    rh = np.asarray(relative_humidity_pct, dtype=float)
    if not np.all((rh >= 0.0) & (rh <= 100.0)):
        raise DomainError(
            f"relative humidity {relative_humidity_pct!r} outside [0, 100]"
        )
    fahrenheit = 1.8 * t + 32.0
    correction = 0.55 * (1.0 - rh / 100.0)
    out = fahrenheit - correction * (1.8 * t - 26.0)
    if out.ndim == 0:
        return float(out)
    return out


def time_to_real(timestamp: datetime) -> float:
    """Fractional hours since local midnight, e.g. 12:30:00 -> 12.5."""
    return (
        timestamp.hour
        + timestamp.minute / 60.0
        + timestamp.second / 3600.0
        + timestamp.microsecond / 3.6e9
    )


def night_mean_thi(night_obs: Sequence[RawObservation]) -> float:
    """Arithmetic mean THI over the preceding night's observations."""
    if not night_obs:
        raise EmptyNight("no observations in the preceding night window")
    values = [thi(o.temperature_c, o.relative_humidity_pct) for o in night_obs]
    return float(np.mean(values))


def accumulate_thi(day_thi: Sequence[float]) -> np.ndarray:
    """Running mean of THI over a day's observations, element i = mean of [0..i]."""
    values = np.asarray(day_thi, dtype=float)
    if values.size == 0:
        return values
    return np.cumsum(values) / np.arange(1, values.size + 1)


def build_examples(day: DayRecord) -> list[LabeledExample]:
    """One labeled example per daytime observation of ``day``.

    Raises EmptyNight when the preceding night window is empty; callers
    exclude such days upstream.
    """
    night_thi = night_mean_thi(day.night_obs_prev)
    current = [thi(o.temperature_c, o.relative_humidity_pct) for o in day.day_obs]
    accum = accumulate_thi(current)
    examples = []
    for obs, thi_now, thi_acc in zip(day.day_obs, current, accum):
        vec = FeatureVector(
            time_hours=time_to_real(obs.timestamp),
            thi_current=thi_now,
            thi_night_prev=night_thi,
            thi_accum=float(thi_acc),
        )
        examples.append(
            LabeledExample(features=vec, target=float(obs.cow_count), date=day.date)
        )
    return examples


def build_all_examples(days: Iterable[DayRecord]) -> list[LabeledExample]:
    out: list[LabeledExample] = []
    for day in days:
        out.extend(build_examples(day))
    return out


def to_matrix(
    examples: Sequence[LabeledExample],
) -> tuple[np.ndarray, np.ndarray, list[date]]:
    """Stack examples into (X, y, dates) with columns in FEATURE_NAMES order."""
    X = np.array([ex.features.as_row() for ex in examples], dtype=float)
    y = np.array([ex.target for ex in examples], dtype=float)
    dates = [ex.date for ex in examples]
    return X, y, dates


def write_feature_csv(
    examples: Sequence[LabeledExample], path: str | Path, meta: dict | None = None
) -> None:
    """Dump examples as audit-friendly CSV (one optional leading meta comment)."""
    lines = []
    if meta is not None:
        lines.append("# meta " + json.dumps(meta, sort_keys=True))
    lines.append(FEATURE_CSV_HEADER)
    for ex in examples:
        f = ex.features
        lines.append(
            f"{ex.date.isoformat()},{f.time_hours!r},{f.thi_current!r},"
            f"{f.thi_night_prev!r},{f.thi_accum!r},{ex.target!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_feature_csv(path: str | Path) -> list[LabeledExample]:
    """Inverse of :func:`write_feature_csv`; skips ``#`` comment lines."""
    examples: list[LabeledExample] = []
    with open(path, encoding="utf-8") as fh:
        header = None
        for raw_line in fh:
            line = raw_line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line
                if header != FEATURE_CSV_HEADER:
                    raise ValueError(
                        f"unexpected feature CSV header {header!r} in {path}"
                    )
                continue
            day, t, cur, night, acc, count = line.split(",")
            vec = FeatureVector(
                time_hours=float(t),
                thi_current=float(cur),
                thi_night_prev=float(night),
                thi_accum=float(acc),
            )
            examples.append(
                LabeledExample(
                    features=vec, target=float(count), date=date.fromisoformat(day)
                )
            )
    if header is None:
        raise ValueError(f"feature CSV {path} is empty")
    return examples
