"""Cascade extraction, per-influencer size/depth, CCDFs and per-class comparisons.

On X a cascade is one influencer sharing one object (URL); its size is
``max(1, retweet_count)`` so that an unretweeted post still counts once while
retweets replace the original in the tally. Influencer depth is the number of
distinct users who retweeted the influencer.

On Reddit one cascade collects the replies to one ``parent_id``. A user's size is the
number of items they authored and their depth the number of replies their items
received. A parent whose author is not in the log
is attributed to the anonymous node ``parent:<parent_id>``.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from .classify import UserClass
from .events import EventLog, Kind, Platform
from .stats import StatsError, ks_test, welch_t


@dataclass
class Cascade:
    influencer: str
    object_id: str
    retweet_count: int = 0
    unique_spreaders: set[str] = field(default_factory=set)
    first_ts: float = math.inf
    last_ts: float = -math.inf

    @property
    def size(self) -> int:
        return max(1, self.retweet_count)

    @property
    def depth(self) -> int:
        return len(self.unique_spreaders)

    def _touch(self, ts: float) -> None:
        if ts < self.first_ts:
            self.first_ts = ts
        if ts > self.last_ts:
            self.last_ts = ts


def _reddit_parent_key(parent_id: str) -> str:
    return parent_id[3:] if parent_id[:3] in ("t1_", "t3_") else parent_id


def extract_cascades(log: EventLog, platform: Platform | str = Platform.X) -> list[Cascade]:
    platform = Platform(platform)
    cascades: dict[tuple[str, str], Cascade] = {}

    def get(influencer: str, obj: str) -> Cascade:
        c = cascades.get((influencer, obj))
        if c is None:
            c = cascades[(influencer, obj)] = Cascade(influencer, obj)
        return c

    if platform is Platform.X:
        x, post, retweet = Platform.X, Kind.POST, Kind.RETWEET
        for e in log.events:
            if e.platform is not x:
                continue
            if e.kind is post:
                get(e.actor_id, e.object_id)._touch(e.timestamp)
            elif e.kind is retweet:
                key = (e.target_actor_id, e.object_id)
                c = cascades.get(key) or get(*key)
                c.retweet_count += 1
                c.unique_spreaders.add(e.actor_id)
                c._touch(e.timestamp)
    else:
        events = [e for e in log.events if e.platform is Platform.REDDIT]
        authors = {e.event_id: e.actor_id for e in events}
        for e in events:
            if e.kind is not Kind.REPLY or not e.object_id:
                continue
            influencer = (authors.get(_reddit_parent_key(e.object_id))
                          or e.target_actor_id or f"parent:{e.object_id}")
            c = get(influencer, e.object_id)
            c.retweet_count += 1
            c.unique_spreaders.add(e.actor_id)
            c._touch(e.timestamp)
    return [cascades[k] for k in sorted(cascades)]


@dataclass(frozen=True)
class InfluenceStats:
    size: int
    depth: int


def influencer_metrics(log: EventLog, platform: Platform | str = Platform.X,
                       cascades: Optional[list[Cascade]] = None) -> dict[str, InfluenceStats]:
    """Per-influencer size and depth (see the module docstring for the platform rules)."""
    platform = Platform(platform)
    if cascades is None:
        cascades = extract_cascades(log, platform)
    size: dict[str, int] = defaultdict(int)
    depth: dict[str, int] = defaultdict(int)
    if platform is Platform.X:
        spreaders: dict[str, set[str]] = defaultdict(set)
        for c in cascades:
            size[c.influencer] += c.size
            spreaders[c.influencer] |= c.unique_spreaders
        depth.update((k, len(v)) for k, v in spreaders.items())
    else:
        for e in log.events:
            if e.platform is Platform.REDDIT:
                size[e.actor_id] += 1
        for c in cascades:
            depth[c.influencer] += c.retweet_count
    actors = sorted(set(size) | set(depth))
    return {a: InfluenceStats(size.get(a, 0), depth.get(a, 0)) for a in actors}


def ccdf(values: Iterable[float]) -> list[tuple[float, float]]:
    """Survival points ``(x, P(X >= x))`` over the sorted distinct support."""
    v = np.sort(np.asarray(list(values), dtype=float))
    if v.size == 0:
        raise ValueError("ccdf of an empty sample")
    xs, first = np.unique(v, return_index=True)
    surv = (v.size - first) / v.size
    return [(float(x), float(p)) for x, p in zip(xs, surv)]


@dataclass
class ClassDistribution:
    user_class: UserClass
    metric: str
    values: list[float]

    @property
    def summary(self) -> dict[str, float]:
        v = np.asarray(self.values, dtype=float)
        if v.size == 0:
            return {"n": 0, "mean": math.nan, "median": math.nan, "max": math.nan,
                    "mean_log10": math.nan}
        pos = v[v > 0]
        return {
            "n": int(v.size),
            "mean": float(v.mean()),
            "median": float(np.median(v)),
            "max": float(v.max()),
            "mean_log10": float(np.log10(pos).mean()) if pos.size else math.nan,
        }


@dataclass(frozen=True)
class PairTest:
    class_a: UserClass
    class_b: UserClass
    metric: str
    method: str
    statistic: float
    p_value: float
    df: float = math.nan
    n: tuple[int, int] = (0, 0)
    note: str = ""


@dataclass
class DistributionReport:
    distributions: dict[tuple[str, UserClass], ClassDistribution]
    tests: list[PairTest]
    excluded: list[tuple[str, UserClass]]


METRICS = ("size", "depth")


def class_distribution_report(influence: Mapping[str, InfluenceStats],
                              classes: Mapping[str, UserClass],
                              class_order: Iterable[UserClass] = (
                                  UserClass.A_BOT, UserClass.A_HUMAN,
                                  UserClass.B_BOT, UserClass.B_HUMAN)) -> DistributionReport:
    """Per-class size/depth distributions with pairwise Welch t and K-S tests.

    Tests run on raw values. Classes with fewer than two influencers are left out
    of the tests and listed in ``excluded``.
    """
    order = list(class_order)
    dists: dict[tuple[str, UserClass], ClassDistribution] = {}
    for metric in METRICS:
        for cls in order:
            dists[(metric, cls)] = ClassDistribution(cls, metric, [])
    for actor in sorted(influence):
        cls = classes.get(actor, UserClass.UNKNOWN)
        if cls not in order:
            continue
        st = influence[actor]
        dists[("size", cls)].values.append(float(st.size))
        dists[("depth", cls)].values.append(float(st.depth))
    tests: list[PairTest] = []
    excluded = [(m, c) for (m, c), d in dists.items() if len(d.values) < 2]
    for metric in METRICS:
        usable = [c for c in order if (metric, c) not in excluded]
        for a, b in itertools.combinations(usable, 2):
            va, vb = dists[(metric, a)].values, dists[(metric, b)].values
            for name, fn in (("welch_t", welch_t), ("ks", ks_test)):
                n = (len(va), len(vb))
                try:
                    r = fn(va, vb)
                    df = r.df if isinstance(r.df, float) else math.nan
                    tests.append(PairTest(a, b, metric, name, r.statistic, r.p_value, df, n))
                except StatsError as exc:
                    tests.append(PairTest(a, b, metric, name, math.nan, math.nan, math.nan, n, str(exc)))
    return DistributionReport(dists, tests, excluded)
