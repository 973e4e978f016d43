"""Welch t, two-sample K-S, Pearson r, Granger F-tests and daily count series."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats as sps

from .classify import UserClass
from .events import EventLog, Kind, Platform

logger = logging.getLogger(__name__)

# p-values that underflow are reported as the smallest positive double, never 0
P_FLOOR = float(np.nextafter(0.0, 1.0))


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    method: str
    statistic: float
    p_value: float
    df: Optional[float | tuple[float, float]]
    n: tuple[int, ...]

    __test__ = False  # keep pytest from collecting this class


def _p(p: float) -> float:
    return min(1.0, max(P_FLOOR, float(p)))


def _sample(x, name: str, min_n: int) -> np.ndarray:
    a = np.asarray(x, dtype=float).ravel()
    if a.size < min_n:
        raise StatsError(f"{name} needs at least {min_n} observations, got {a.size}")
    if not np.all(np.isfinite(a)):
        raise StatsError(f"{name} contains non-finite values")
    return a


def welch_t(a, b) -> TestResult:
    """Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom."""
    a = _sample(a, "a", 2)
    b = _sample(b, "b", 2)
    na, nb = a.size, b.size
    va, vb = a.var(ddof=1) / na, b.var(ddof=1) / nb
    diff = a.mean() - b.mean()
    if va + vb == 0:
        if diff != 0:
            raise StatsError("degenerate samples: zero variance with unequal means")
        return TestResult("welch_t", 0.0, 1.0, float(na + nb - 2), (na, nb))
    t = diff / math.sqrt(va + vb)
    # normalized so tiny variances cannot underflow the denominator
    wa, wb = va / (va + vb), vb / (va + vb)
    df = 1.0 / (wa * wa / (na - 1) + wb * wb / (nb - 1))
    p = 2.0 * sps.t.sf(abs(t), df)
    return TestResult("welch_t", float(t), _p(p), float(df), (na, nb))


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the Kolmogorov distribution, P(K > lam)."""
    if lam <= 0:
        return 1.0
    if lam < 1.18:
        # Jacobi-theta form converges fast for small lam
        y = math.exp(-math.pi ** 2 / (8 * lam * lam))
        s = sum(y ** ((2 * k - 1) ** 2) for k in range(1, 8))
        return 1.0 - math.sqrt(2 * math.pi) / lam * s
    s = 0.0
    for k in range(1, 101):
        term = (-1) ** (k - 1) * math.exp(-2 * k * k * lam * lam)
        s += term
        if abs(term) < 1e-17:
            break
    return 2.0 * s


def ks_test(a, b) -> TestResult:
    """Two-sample K-S test with the asymptotic p-value at n_eff = n*m/(n+m)."""
    a = np.sort(_sample(a, "a", 1))
    b = np.sort(_sample(b, "b", 1))
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    n_eff = a.size * b.size / (a.size + b.size)
    if min(a.size, b.size) < 8:
        logger.debug("K-S asymptotic p-value with small samples (%d, %d)", a.size, b.size)
    p = kolmogorov_sf(math.sqrt(n_eff) * d)
    return TestResult("ks", d, _p(p), None, (a.size, b.size))


def pearson_r(a, b) -> float:
    a = _sample(a, "a", 2)
    b = _sample(b, "b", 2)
    if a.size != b.size:
        raise StatsError("series lengths differ")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = math.sqrt(da @ da), math.sqrt(db @ db)
    if sa == 0 or sb == 0:
        raise StatsError("zero variance")
    return float(max(-1.0, min(1.0, (da @ db) / (sa * sb))))


def pearson_test(a, b) -> TestResult:
    r = pearson_r(a, b)
    n = len(a)
    if abs(r) == 1.0 or n < 3:
        p = 0.0 if abs(r) == 1.0 else 1.0
    else:
        t = r * math.sqrt((n - 2) / (1 - r * r))
        p = 2.0 * sps.t.sf(abs(t), n - 2)
    return TestResult("pearson", r, _p(p), float(n - 2), (n, n))


# -- Granger -------------------------------------------------------------------

@dataclass(frozen=True)
class GrangerLag:
    lag: int
    f: float
    p_value: float
    df_num: int
    df_den: int
    significant: bool


@dataclass
class GrangerResult:
    cause: str
    effect: str
    alpha: float
    lags: list[GrangerLag] = field(default_factory=list)

    def at(self, lag: int) -> GrangerLag:
        return self.lags[lag - 1]


def _lagged(v: np.ndarray, lag: int) -> np.ndarray:
    """Columns v_{t-1} .. v_{t-lag} for t = lag .. n-1."""
    n = v.size
    return np.column_stack([v[lag - j:n - j] for j in range(1, lag + 1)])


def _ssr(design: np.ndarray, target: np.ndarray, lag: int) -> float:
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise StatsError(f"singular design matrix at lag {lag}")
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ coef
    return float(resid @ resid)


def granger_test(x, y, maxlag: int = 5, alpha: float = 0.05, difference: bool = False,
                 cause: str = "x", effect: str = "y") -> GrangerResult:
    """F-tests of whether lags of ``x`` improve an OLS autoregression of ``y``.

    For each lag L the first L points are dropped, so the regression uses
    n_obs = n - L rows and df_den = n_obs - 2L - 1.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise StatsError("series lengths differ")
    if maxlag < 1:
        raise StatsError("maxlag must be >= 1")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise StatsError("series contain non-finite values")
    if difference:
        x, y = np.diff(x), np.diff(y)
    if x.size <= 3 * maxlag:
        raise StatsError(f"series of length {x.size} too short for maxlag {maxlag}")
    result = GrangerResult(cause, effect, alpha)
    for lag in range(1, maxlag + 1):
        target = y[lag:]
        n_obs = target.size
        const = np.ones((n_obs, 1))
        ylags, xlags = _lagged(y, lag), _lagged(x, lag)
        restricted = np.hstack([const, ylags])
        full = np.hstack([restricted, xlags])
        ssr_u = _ssr(full, target, lag)
        ssr_r = _ssr(restricted, target, lag)
        df_den = n_obs - 2 * lag - 1
        if df_den <= 0:
            raise StatsError(f"no residual degrees of freedom at lag {lag}")
        if ssr_u <= 0:
            raise StatsError(f"perfect fit at lag {lag}")
        f = ((ssr_r - ssr_u) / lag) / (ssr_u / df_den)
        p = _p(sps.f.sf(f, lag, df_den))
        result.lags.append(GrangerLag(lag, float(f), p, lag, df_den, p < alpha))
    return result


# -- daily series ------------------------------------------------------------------

class MetricKind(str, Enum):
    UNIQUE_USERS = "UNIQUE_USERS"
    CASCADE_SIZE = "CASCADE_SIZE"
    CASCADE_DEPTH = "CASCADE_DEPTH"


@dataclass
class DailySeries:
    community: Optional[str]
    user_class: Optional[UserClass]
    metric_kind: MetricKind
    dates: list[date]
    counts: np.ndarray

    @property
    def label(self) -> str:
        cls = self.user_class.value if self.user_class else "ALL"
        return f"{self.community or 'ALL'}:{cls}:{self.metric_kind.value}"


def utc_day(ts: float) -> date:
    return datetime.fromtimestamp(ts, tz=timezone.utc).date()


def day_grid(log: EventLog) -> list[date]:
    if not log.events:
        return []
    first, last = utc_day(log.events[0].timestamp), utc_day(log.events[-1].timestamp)
    return [first + timedelta(days=i) for i in range((last - first).days + 1)]


def _spreads(e) -> bool:
    return e.kind is (Kind.RETWEET if e.platform is Platform.X else Kind.REPLY)


def build_daily_series(log: EventLog, classes: Mapping[str, UserClass], metric_kind: MetricKind | str,
                       community: Optional[str] = None, user_class: Optional[UserClass] = None,
                       dates: Optional[Sequence[date]] = None) -> DailySeries:
    """Per-day counts on a contiguous UTC grid.

    UNIQUE_USERS counts distinct acting users of the class. CASCADE_SIZE counts
    spreading events (retweets on X, replies on Reddit) whose influencer belongs to the
    class; CASCADE_DEPTH counts distinct (influencer, spreader) pairs per day.
    ``user_class=None`` means all actors. ``dates`` defaults to the grid of ``log``.
    """
    metric_kind = MetricKind(metric_kind)
    grid = list(dates) if dates is not None else day_grid(log)
    index = {d: i for i, d in enumerate(grid)}
    buckets: list[set] = [set() for _ in grid]
    counts = np.zeros(len(grid), dtype=float)

    def in_class(actor: Optional[str]) -> bool:
        return user_class is None or classes.get(actor, UserClass.UNKNOWN) is user_class

    for e in log.events:
        if community is not None and e.community != community:
            continue
        i = index.get(utc_day(e.timestamp))
        if i is None:
            continue
        if metric_kind is MetricKind.UNIQUE_USERS:
            if in_class(e.actor_id):
                buckets[i].add(e.actor_id)
        elif _spreads(e) and in_class(e.target_actor_id):
            if metric_kind is MetricKind.CASCADE_SIZE:
                counts[i] += 1
            else:
                buckets[i].add((e.target_actor_id, e.actor_id))
    if metric_kind is not MetricKind.CASCADE_SIZE:
        counts = np.array([len(b) for b in buckets], dtype=float)
    series = DailySeries(community, user_class, metric_kind, grid, counts)
    if grid and not counts.any():
        logger.warning("series %s is all zeros", series.label)
    return series
