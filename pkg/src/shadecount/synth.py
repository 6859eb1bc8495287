"""Seeded synthetic sensor streams plus the brute-force test oracles.

The generator emits the same raw CSV schema the ingestion layer consumes:
diurnal temperature/humidity with per-day drift, and shade counts drawn
from a latent behavior kernel (smooth saturating response above a THI
threshold, modulated by time of day) plus gaussian noise. It exists to
verify the pipeline, not to model real herds.

The oracles at the bottom re-derive answers by brute force (exhaustive
midpoint-split enumeration with naive two-pass variance, central finite
differences, plain-loop forward evaluation) and deliberately share no code
with the modules they check.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Sequence

import json

import numpy as np

from .dataset import RAW_COLUMNS, RawObservation
from .features import thi, time_to_real
from .rng import stream


@dataclass(frozen=True)
class WeatherConfig:
    """Diurnal sinusoids with independent per-day offsets."""

    temp_base_c: float = 26.0
    temp_amplitude_c: float = 8.0
    temp_peak_hour: float = 15.0
    rh_base_pct: float = 60.0
    rh_amplitude_pct: float = 25.0
    temp_drift_std_c: float = 2.5
    rh_drift_std_pct: float = 6.0


@dataclass(frozen=True)
class BehaviorKernel:
    """Latent rule mapping the four model inputs to an expected shade count.

    A logistic response in a weighted THI mix, centered on a threshold near
    the values where heat stress sets in, windowed by a half-sine over the
    day so counts start near zero in the morning and fall off after late
    afternoon. Expected counts stay inside [0, herd_size] by construction.
    """

    herd_size: int = 80
    thi_threshold: float = 80.0
    softness: float = 3.0
    w_current: float = 0.85
    w_accum: float = 0.10
    w_night: float = 0.05

    def expected(self, time_hours, thi_current, thi_accum, thi_night_prev):
        mix = (
            self.w_current * np.asarray(thi_current, dtype=float)
            + self.w_accum * np.asarray(thi_accum, dtype=float)
            + self.w_night * np.asarray(thi_night_prev, dtype=float)
        )
        response = 1.0 / (1.0 + np.exp(-(mix - self.thi_threshold) / self.softness))
        window = np.sin(np.pi * (np.asarray(time_hours, dtype=float) - 7.0) / 14.0)
        window = np.clip(window, 0.0, None)
        return self.herd_size * response * window


@dataclass(frozen=True)
class SynthConfig:
    n_days: int = 75
    cadence_minutes: float = 7.5
    herd_size: int = 80
    noise_std: float = 8.0
    seed: int = 0
    start_date: date = date(2024, 6, 1)
    weather: WeatherConfig = WeatherConfig()


def generate(config: SynthConfig) -> tuple[list[RawObservation], BehaviorKernel]:
    """Full day+night observation stream plus the latent kernel behind it.

    Targets are clamp(round(kernel + gaussian noise), 0, herd_size). The
    stream opens with the night block before the first day, so every day
    has a preceding night and the whole output survives ingestion and
    grouping with zero rejects. Weather offsets and count noise come from
    per-day substreams, making the output a pure function of the config.
    """
    kernel = BehaviorKernel(herd_size=config.herd_size)
    wx = config.weather
    step = timedelta(minutes=config.cadence_minutes)
    t0 = datetime.combine(config.start_date - timedelta(days=1), time(21, 0))
    t_end = datetime.combine(
        config.start_date + timedelta(days=config.n_days - 1), time(21, 0)
    )

    times: list[datetime] = []
    t = t0
    while t < t_end:
        times.append(t)
        t += step

    hours = np.array([time_to_real(ts) for ts in times])
    # calendar index relative to the night-before date, for weather drift
    cal_idx = np.array([(ts.date() - t0.date()).days for ts in times])
    n_cal = int(cal_idx.max()) + 1
    temp_off = np.empty(n_cal)
    rh_off = np.empty(n_cal)
    for d in range(n_cal):
        rng = stream(config.seed, "weather", d)
        temp_off[d] = rng.normal(0.0, wx.temp_drift_std_c)
        rh_off[d] = rng.normal(0.0, wx.rh_drift_std_pct)

    phase = 2.0 * np.pi * (hours - wx.temp_peak_hour) / 24.0
    temp = wx.temp_base_c + wx.temp_amplitude_c * np.cos(phase) + temp_off[cal_idx]
    rh = np.clip(
        wx.rh_base_pct - wx.rh_amplitude_pct * np.cos(phase) + rh_off[cal_idx],
        0.0,
        100.0,
    )
    thi_all = thi(temp, rh)

    # model-day owner: rows at/after 21:00 belong to the next day's night
    owner = np.array([(ts.date() - config.start_date).days for ts in times])
    owner = owner + (hours >= 21.0)
    is_day = (hours >= 7.0) & (hours < 21.0)

    counts: dict[int, np.ndarray] = {}
    for j in range(config.n_days):
        day_sel = np.flatnonzero(is_day & (owner == j))
        night_sel = np.flatnonzero(~is_day & (owner == j))
        cur = thi_all[day_sel]
        accum = np.cumsum(cur) / np.arange(1, cur.size + 1)
        night_mean = float(np.mean(thi_all[night_sel]))
        expected = kernel.expected(hours[day_sel], cur, accum, night_mean)
        noise = stream(config.seed, "noise", j).normal(
            0.0, config.noise_std, size=cur.size
        )
        counts[j] = np.clip(
            np.rint(expected + noise), 0, config.herd_size
        ).astype(int)

    obs: list[RawObservation] = []
    cursor = {j: 0 for j in range(config.n_days)}
    for i, ts in enumerate(times):
        if is_day[i]:
            j = int(owner[i])
            count: int | None = int(counts[j][cursor[j]])
            cursor[j] += 1
        else:
            count = None
        obs.append(RawObservation(ts, float(temp[i]), float(rh[i]), count))
    return obs, kernel


def write_raw_csv(
    obs: Sequence[RawObservation], path: str | Path, meta: dict | None = None
) -> None:
    """Emit the ingestion schema; cow_count left empty on night rows."""
    lines = []
    if meta is not None:
        lines.append("# meta " + json.dumps(meta, sort_keys=True))
    lines.append(",".join(RAW_COLUMNS))
    for o in obs:
        count = "" if o.cow_count is None else str(o.cow_count)
        lines.append(
            f"{o.timestamp.isoformat()},{o.temperature_c!r},"
            f"{o.relative_humidity_pct!r},{count}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# oracles


def _sse(values) -> float:
    # naive two-pass: mean first, then squared deviations
    m = sum(values) / len(values)
    return sum((v - m) ** 2 for v in values)


def oracle_best_split(
    X,
    y,
    feature_subset: Sequence[int] | None = None,
    weighting: str = "size_weighted",
) -> tuple[int, float, float] | None:
    """Exhaustive best-split search, O(n^2 d), for checking the tree module.

    Evaluates every midpoint between consecutive distinct sorted values of
    every candidate feature, scoring each split with a naive two-pass
    variance. Returns (feature, threshold, objective) or None when no split
    strictly beats the parent objective. A candidate must improve on the
    incumbent by more than 1 part in 1e10 to replace it, so near-ties
    (notably identical partitions reachable through different features)
    resolve to scan order: lowest feature index, then smallest threshold.
    A midpoint that rounds up to the higher of two adjacent floats falls
    back to the lower value. Intended for n <= 64 or so.
    """
    if weighting not in ("size_weighted", "unweighted"):
        raise ValueError(f"unknown weighting {weighting!r}")
    X = np.asarray(X, dtype=float)
    y = [float(v) for v in y]
    n, d = X.shape
    features = sorted(feature_subset) if feature_subset is not None else range(d)

    if weighting == "size_weighted":
        parent = _sse(y)
    else:
        parent = _sse(y) / n

    best: tuple[float, int, float] | None = None
    for f in features:
        distinct = sorted(set(float(v) for v in X[:, f]))
        for lo, hi in zip(distinct, distinct[1:]):
            thr = 0.5 * (lo + hi)
            if thr >= hi:  # adjacent floats
                thr = lo
            left = [y[i] for i in range(n) if X[i, f] <= thr]
            right = [y[i] for i in range(n) if X[i, f] > thr]
            if not left or not right:
                continue
            if weighting == "size_weighted":
                obj = _sse(left) + _sse(right)
            else:
                obj = _sse(left) / len(left) + _sse(right) / len(right)
            if best is None or obj < best[0] * (1.0 - 1e-10):
                best = (obj, f, thr)
    if best is None or not best[0] < parent:
        return None
    return best[1], best[2], best[0]


def oracle_fd_gradient(net, X, y, step: float = 1e-6) -> list:
    """Central-difference MSE gradients, one (dW, db) pair per layer.

    Perturbs each parameter of ``net`` in place and restores it exactly;
    only the network's forward/loss path is exercised, never its own
    gradient code. fp64 throughout. Meaningful only at generic points: a
    pre-activation within ``step`` of a relu kink makes the two-sided
    difference straddle the non-differentiable point, so comparisons
    should draw nets whose pre-activations keep a margin from zero
    (zero-init biases notoriously park whole layers exactly on the kink
    whenever an earlier relu layer goes all-dead for some row).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    grads = []
    for layer in net.layers:
        pair = []
        for arr in (layer.W, layer.b):
            g = np.zeros_like(arr)
            flat = arr.reshape(-1)
            gflat = g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                hi = net.mse_loss(X, y)
                flat[i] = orig - step
                lo = net.mse_loss(X, y)
                flat[i] = orig
                gflat[i] = (hi - lo) / (2.0 * step)
            pair.append(g)
        grads.append((pair[0], pair[1]))
    return grads


def oracle_forward(layers, x) -> list[float]:
    """Plain-loop forward pass for tiny nets.

    ``layers`` is a sequence of (W, b, activation) triples with W indexed
    [input][output] and activation one of "relu" / "linear". Kept free of
    numpy so it cannot share a bug with the vectorized implementation.
    """
    h = [float(v) for v in x]
    for W, b, act in layers:
        out = []
        for j in range(len(b)):
            s = float(b[j])
            for i, v in enumerate(h):
                s += v * float(W[i][j])
            if act == "relu":
                s = s if s > 0.0 else 0.0
            elif act != "linear":
                raise ValueError(f"unknown activation {act!r}")
            out.append(s)
        h = out
    return h
