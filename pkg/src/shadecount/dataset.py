"""Raw sensor log ingestion, day/night grouping, and fold planning.

Input CSV schema: ``timestamp,temperature_c,relative_humidity_pct,cow_count``,
UTF-8, comma separated, ``.`` decimal point, cow_count empty on night rows.
Rows that fail validation are rejected with a line number and reason, never
silently dropped; the run aborts only when the reject fraction exceeds a
configurable bound.

Day window is [07:00, 21:00), the preceding night window [21:00, 07:00) of
the next calendar date, both half-open: a row at exactly 21:00 belongs to
the night block of the following day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    EmptyFile,
    MissingColumn,
    TooFewDays,
    TooManyRejects,
)
from .rng import stream

RAW_COLUMNS = ("timestamp", "temperature_c", "relative_humidity_pct", "cow_count")

DAY_START = time(7, 0)
DAY_END = time(21, 0)


@dataclass(frozen=True)
class RawObservation:
    timestamp: datetime
    temperature_c: float
    relative_humidity_pct: float
    cow_count: int | None  # None on night rows


@dataclass(frozen=True)
class DayRecord:
    date: date
    day_obs: tuple[RawObservation, ...]
    night_obs_prev: tuple[RawObservation, ...]


@dataclass(frozen=True)
class FoldPlan:
    seed: int
    folds: tuple[frozenset[date], ...]

    @property
    def k(self) -> int:
        return len(self.folds)

    def all_dates(self) -> frozenset[date]:
        out: frozenset[date] = frozenset()
        for f in self.folds:
            out = out | f
        return out


@dataclass(frozen=True)
class RejectedRow:
    line: int  # 1-based file line number
    reason: str


@dataclass(frozen=True)
class IngestResult:
    observations: tuple[RawObservation, ...]
    rejects: tuple[RejectedRow, ...]
    n_rows: int

    @property
    def reject_fraction(self) -> float:
        return len(self.rejects) / self.n_rows if self.n_rows else 0.0


@dataclass(frozen=True)
class DroppedRow:
    timestamp: datetime
    reason: str


@dataclass(frozen=True)
class DroppedDay:
    date: date
    reason: str
    n_day_obs: int
    n_night_obs: int


@dataclass(frozen=True)
class GroupResult:
    days: tuple[DayRecord, ...]
    dropped_days: tuple[DroppedDay, ...]
    dropped_rows: tuple[DroppedRow, ...]


def ingest_csv(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    herd_size: int = 80,
    max_reject_fraction: float = 0.10,
) -> IngestResult:
    """Parse a raw sensor CSV into validated observations plus a reject list.

    ``schema`` maps the logical column names in RAW_COLUMNS to the header
    names actually present in the file; identity by default. Leading ``#``
    comment lines are skipped. Raises EmptyFile on a file without data rows,
    MissingColumn when the header lacks a mapped column, and TooManyRejects
    when more than ``max_reject_fraction`` of the data rows fail validation.
    """
    mapping = dict(schema) if schema is not None else {c: c for c in RAW_COLUMNS}
    for logical in RAW_COLUMNS:
        if logical not in mapping:
            raise MissingColumn(f"schema does not map required column {logical!r}")

    header_cols: list[str] | None = None
    col_idx: dict[str, int] = {}
    observations: list[RawObservation] = []
    rejects: list[RejectedRow] = []
    n_rows = 0
    last_ts: datetime | None = None

    with open(path, encoding="utf-8") as fh:
        for lineno, raw_line in enumerate(fh, start=1):
            line = raw_line.strip()
            if not line or line.startswith("#"):
                continue
            if header_cols is None:
                header_cols = line.split(",")
                for logical in RAW_COLUMNS:
                    name = mapping[logical]
                    if name not in header_cols:
                        raise MissingColumn(
                            f"column {name!r} (for {logical!r}) missing from header"
                        )
                    col_idx[logical] = header_cols.index(name)
                continue

            n_rows += 1
            parts = line.split(",")
            if len(parts) != len(header_cols):
                rejects.append(RejectedRow(lineno, "wrong field count"))
                continue

            try:
                ts = datetime.fromisoformat(parts[col_idx["timestamp"]])
            except ValueError:
                rejects.append(RejectedRow(lineno, "unparseable timestamp"))
                continue
            try:
                temp = float(parts[col_idx["temperature_c"]])
                rh = float(parts[col_idx["relative_humidity_pct"]])
            except ValueError:
                rejects.append(RejectedRow(lineno, "unparseable numeric field"))
                continue
            if not (math.isfinite(temp) and math.isfinite(rh)):
                rejects.append(RejectedRow(lineno, "non-finite numeric field"))
                continue
            if not 0.0 <= rh <= 100.0:
                rejects.append(RejectedRow(lineno, "relative humidity outside [0, 100]"))
                continue

            count_field = parts[col_idx["cow_count"]].strip()
            if count_field == "":
                count: int | None = None
            else:
                try:
                    count = int(count_field)
                except ValueError:
                    rejects.append(RejectedRow(lineno, "unparseable cow count"))
                    continue
                if not 0 <= count <= herd_size:
                    rejects.append(
                        RejectedRow(lineno, f"cow count outside [0, {herd_size}]")
                    )
                    continue

            if last_ts is not None and ts <= last_ts:
                rejects.append(RejectedRow(lineno, "timestamp not strictly increasing"))
                continue
            last_ts = ts
            observations.append(RawObservation(ts, temp, rh, count))

    if header_cols is None or n_rows == 0:
        raise EmptyFile(f"{path} contains no data rows")

    result = IngestResult(tuple(observations), tuple(rejects), n_rows)
    if result.reject_fraction > max_reject_fraction:
        raise TooManyRejects(
            f"{len(rejects)} of {n_rows} rows rejected "
            f"(> {max_reject_fraction:.0%} allowed)"
        )
    return result


def _slot(ts: datetime) -> tuple[date, bool]:
    """(owning date, is_day) for one timestamp under the half-open windows."""
    t = ts.time()
    if DAY_START <= t < DAY_END:
        return ts.date(), True
    if t >= DAY_END:
        return ts.date() + timedelta(days=1), False
    return ts.date(), False


def group_days(
    obs: Sequence[RawObservation], min_day_rows: int = 30
) -> GroupResult:
    """Assemble DayRecords and report every exclusion.

    A day is dropped when it has no daytime rows, fewer than ``min_day_rows``
    of them (partial sensor coverage), or an empty preceding-night window.
    Daytime rows lacking a cow count cannot be used as examples and are
    dropped individually.
    """
    day_rows: dict[date, list[RawObservation]] = {}
    night_rows: dict[date, list[RawObservation]] = {}
    dropped_rows: list[DroppedRow] = []

    for o in obs:
        owner, is_day = _slot(o.timestamp)
        if is_day:
            if o.cow_count is None:
                dropped_rows.append(DroppedRow(o.timestamp, "daytime row without cow count"))
                continue
            day_rows.setdefault(owner, []).append(o)
        else:
            night_rows.setdefault(owner, []).append(o)

    days: list[DayRecord] = []
    dropped_days: list[DroppedDay] = []
    for d in sorted(set(day_rows) | set(night_rows)):
        n_day = len(day_rows.get(d, ()))
        n_night = len(night_rows.get(d, ()))
        if n_day == 0:
            dropped_days.append(DroppedDay(d, "no daytime observations", n_day, n_night))
        elif n_day < min_day_rows:
            dropped_days.append(
                DroppedDay(d, f"fewer than {min_day_rows} daytime rows", n_day, n_night)
            )
        elif n_night == 0:
            dropped_days.append(
                DroppedDay(d, "no preceding-night observations", n_day, n_night)
            )
        else:
            days.append(DayRecord(d, tuple(day_rows[d]), tuple(night_rows[d])))

    return GroupResult(tuple(days), tuple(dropped_days), tuple(dropped_rows))


def make_folds(dates: Iterable[date], k: int = 5, seed: int = 0) -> FoldPlan:
    """Randomly partition dates into k folds whose sizes differ by at most 1.

    The shuffle runs on the Philox stream tagged "folds", so the plan is a
    pure function of (dates, k, seed).
    """
    ordered = sorted(set(dates))
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if len(ordered) < k:
        raise TooFewDays(f"{len(ordered)} usable days, need at least {k} for {k} folds")

    rng = stream(seed, "folds")
    perm = rng.permutation(len(ordered))
    shuffled = [ordered[i] for i in perm]

    n, r = divmod(len(shuffled), k)
    folds: list[frozenset[date]] = []
    start = 0
    for i in range(k):
        size = n + (1 if i < r else 0)
        folds.append(frozenset(shuffled[start : start + size]))
        start += size
    return FoldPlan(seed=seed, folds=tuple(folds))


def exclusion_report(ingested: IngestResult, grouped: GroupResult) -> dict:
    """JSON-ready summary of everything that was filtered out and why."""
    return {
        "n_rows": ingested.n_rows,
        "n_accepted_rows": len(ingested.observations),
        "rejected_rows": [
            {"line": r.line, "reason": r.reason} for r in ingested.rejects
        ],
        "dropped_rows": [
            {"timestamp": r.timestamp.isoformat(), "reason": r.reason}
            for r in grouped.dropped_rows
        ],
        "dropped_days": [
            {
                "date": d.date.isoformat(),
                "reason": d.reason,
                "n_day_obs": d.n_day_obs,
                "n_night_obs": d.n_night_obs,
            }
            for d in grouped.dropped_days
        ],
        "n_usable_days": len(grouped.days),
    }
