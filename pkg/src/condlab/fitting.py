"""Exponent extraction: power and log-power least squares, flat-ratio verdicts."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InsufficientData
from .series import GrowthSeries, Kind

MIN_POINTS = 5
BOUNDED_SLOPE = 0.02


@dataclass
class FitReport:
    model: str
    gamma: float
    intercept: float
    r2: float
    range: tuple
    points_used: int
    extra: dict = field(default_factory=dict)

    def to_json(self):
        d = asdict(self)
        d["range"] = list(self.range)
        if not d["extra"]:
            d.pop("extra")
        return d


@dataclass
class StabilityReport:
    limit: float
    spread: float
    slope: float
    threshold: float

    @property
    def bounded(self) -> bool:
        return abs(self.slope) < self.threshold

    @property
    def verdict(self) -> str:
        return "bounded" if self.bounded else "unbounded"


def _xy(series, values=None):
    """Accept a GrowthSeries (exact + lower_witness points only) or plain arrays."""
    if isinstance(series, GrowthSeries):
        m, v = series.select((Kind.EXACT, Kind.LOWER))
    else:
        m = np.asarray(series, dtype=float)
        v = np.asarray(values, dtype=float)
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    if m.shape != v.shape:
        raise ValueError("m and values differ in length")
    if len(m) < MIN_POINTS:
        raise InsufficientData(f"need at least {MIN_POINTS} points, got {len(m)}")
    if np.any(v <= 0) or np.any(m <= 0):
        raise ValueError("values and indices must be positive for log fits")
    return m, v


def _lstsq(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    (g, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (g * x + b)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float((resid**2).sum())
    if ss_tot <= 1e-30 * max(1.0, float((y**2).sum())):
        r2 = 1.0 if ss_res <= 1e-24 * max(1.0, float((y**2).sum())) else 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return float(g), float(b), r2


def fit_power(series, values=None) -> FitReport:
    """Least squares of log value on log m: value ~ e^b m^gamma."""
    m, v = _xy(series, values)
    g, b, r2 = _lstsq(np.log(m), np.log(v))
    return FitReport("power", g, b, r2, (float(m[0]), float(m[-1])), len(m))


def doubling_diagnostic(m, v):
    """value(m^2)/value(m) for every pair present; tends to 2^gamma for (log m)^gamma."""
    lookup = {int(a): float(b) for a, b in zip(m, v)}
    out = []
    for a in sorted(lookup):
        if a >= 2 and a * a in lookup:
            out.append((a, lookup[a * a] / lookup[a]))
    return out


def fit_log_power(series, values=None) -> FitReport:
    """Least squares of log value on log log m: value ~ e^b (log m)^gamma."""
    m, v = _xy(series, values)
    if m.min() < 3:
        raise ValueError("fit_log_power needs m >= 3")
    g, b, r2 = _lstsq(np.log(np.log(m)), np.log(v))
    pairs = doubling_diagnostic(m, v)
    extra = {"doubling": [[a, r] for a, r in pairs]}
    if pairs:
        extra["doubling_gamma"] = [float(np.log2(r)) for _, r in pairs]
    return FitReport("log-power", g, b, r2, (float(m[0]), float(m[-1])), len(m), extra)


def ratio_stabilization(series, values=None, threshold=BOUNDED_SLOPE) -> StabilityReport:
    """Last-third mean, max/min spread and power-law trend slope of a ratio series."""
    m, v = _xy(series, values)
    tail = v[len(v) - max(1, len(v) // 3):]
    slope = fit_power(m, v).gamma
    return StabilityReport(float(tail.mean()), float(v.max() / v.min()), slope, threshold)
