"""Co-retweet / co-reply networks over pairwise time windows.

Two actions qualify as a co-action when they share an ``object_id``, come from
different actors and lie at most ``window_seconds`` apart. Every qualifying event
pair adds 1 to the weight of the undirected actor pair.

Events are sorted by ``(object, timestamp)`` and joined against their successors
one offset at a time; a row drops out as soon as its successor leaves the window or
the object group, so the work is proportional to the number of qualifying pairs.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np

from .classify import UserClass
from .events import EventLog, Kind
from .graph import undirected_profile

X_WINDOWS = (15, 25, 35, 45, 55)
REDDIT_WINDOWS = (120, 240, 360, 480, 600)


class ActionKind(str, Enum):
    CO_RETWEET = "CO_RETWEET"
    CO_REPLY = "CO_REPLY"

    @property
    def event_kind(self) -> Kind:
        return Kind.RETWEET if self is ActionKind.CO_RETWEET else Kind.REPLY


class CoordinationError(ValueError):
    pass


@dataclass
class CoActionPairs:
    """All qualifying event pairs up to ``max_window``, as parallel arrays."""

    actors: list[str]
    a: np.ndarray  # actor code of the earlier event
    b: np.ndarray  # actor code of the later event
    obj: np.ndarray
    dt: np.ndarray
    max_window: float


def _columns(log: EventLog, kind: Kind):
    actor_codes: dict[str, int] = {}
    obj_codes: dict[str, int] = {}
    acts, objs, times = [], [], []
    for e in log.events:
        if e.kind is kind and e.object_id is not None:
            acts.append(actor_codes.setdefault(e.actor_id, len(actor_codes)))
            objs.append(obj_codes.setdefault(e.object_id, len(obj_codes)))
            times.append(e.timestamp)
    return (list(actor_codes), np.asarray(acts, dtype=np.int64),
            np.asarray(objs, dtype=np.int64), np.asarray(times, dtype=float))


def co_action_pairs(log: EventLog, kind: ActionKind | str, max_window: float) -> CoActionPairs:
    kind = ActionKind(kind)
    if max_window <= 0:
        raise CoordinationError("window must be positive")
    actors, act, obj, t = _columns(log, kind.event_kind)
    order = np.lexsort((t, obj))
    act, obj, t = act[order], obj[order], t[order]
    n = t.size
    out_a, out_b, out_o, out_dt = [], [], [], []
    rows = np.arange(n - 1, dtype=np.int64)
    offset = 1
    while rows.size:
        nxt = rows + offset
        dt = t[nxt] - t[rows]
        ok = (obj[nxt] == obj[rows]) & (dt <= max_window)
        rows, nxt, dt = rows[ok], nxt[ok], dt[ok]
        distinct = act[rows] != act[nxt]
        out_a.append(act[rows][distinct])
        out_b.append(act[nxt][distinct])
        out_o.append(obj[rows][distinct])
        out_dt.append(dt[distinct])
        offset += 1
        rows = rows[nxt + 1 < n]
    cat = lambda parts, dtype: np.concatenate(parts) if parts else np.empty(0, dtype=dtype)
    return CoActionPairs(actors, cat(out_a, np.int64), cat(out_b, np.int64),
                         cat(out_o, np.int64), cat(out_dt, float), float(max_window))


@dataclass
class CoordinationNetwork:
    window_seconds: float
    action_kind: ActionKind
    nodes: set[str] = field(default_factory=set)
    edges: dict[tuple[str, str], int] = field(default_factory=dict)
    composition: dict[UserClass, int] = field(default_factory=dict)


def _network(pairs: CoActionPairs, kind: ActionKind, window: float, min_weight: int,
             dedup: bool, classes: Optional[Mapping[str, UserClass]]) -> CoordinationNetwork:
    if window <= 0:
        raise CoordinationError("window must be positive")
    if window > pairs.max_window:
        raise CoordinationError("window exceeds the precomputed maximum")
    sel = pairs.dt <= window
    lo = np.minimum(pairs.a[sel], pairs.b[sel])
    hi = np.maximum(pairs.a[sel], pairs.b[sel])
    n_act = max(len(pairs.actors), 1)
    key = lo * n_act + hi
    if dedup:
        key = np.unique(np.stack([pairs.obj[sel], key], axis=1), axis=0)[:, 1]
    uniq, counts = np.unique(key, return_counts=True)
    keep = counts >= min_weight
    uniq, counts = uniq[keep], counts[keep]
    names = pairs.actors
    edges: dict[tuple[str, str], int] = {}
    for lo_c, hi_c, w in zip((uniq // n_act).tolist(), (uniq % n_act).tolist(), counts.tolist()):
        u, v = names[lo_c], names[hi_c]
        edges[(u, v) if u < v else (v, u)] = w
    nodes = {u for e in edges for u in e}
    net = CoordinationNetwork(window, kind, nodes, edges)
    if classes is not None:
        comp = Counter(classes.get(u, UserClass.UNKNOWN) for u in nodes)
        net.composition = {c: comp[c] for c in UserClass}
    return net


def co_action_network(log: EventLog, kind: ActionKind | str, window_seconds: float,
                      min_weight: int = 1, dedup: bool = False,
                      classes: Optional[Mapping[str, UserClass]] = None) -> CoordinationNetwork:
    """Co-action network for a single window.

    ``dedup`` counts each actor pair at most once per object instead of once per
    qualifying event pair.
    """
    kind = ActionKind(kind)
    pairs = co_action_pairs(log, kind, window_seconds)
    return _network(pairs, kind, window_seconds, min_weight, dedup, classes)


@dataclass
class WindowSummary:
    window_seconds: float
    network: CoordinationNetwork
    profile: dict[str, tuple[float, float]]  # actor -> (degree_centrality, clustering)

    @property
    def n_nodes(self) -> int:
        return len(self.network.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.network.edges)


@dataclass
class WindowSweep:
    action_kind: ActionKind
    windows: list[WindowSummary]


def window_sweep(log: EventLog, kind: ActionKind | str, windows: Sequence[float],
                 min_weight: int = 1, dedup: bool = False,
                 classes: Optional[Mapping[str, UserClass]] = None,
                 with_profile: bool = True) -> WindowSweep:
    kind = ActionKind(kind)
    windows = list(windows)
    if not windows:
        raise CoordinationError("no windows given")
    if any(w <= 0 for w in windows):
        raise CoordinationError("window must be positive")
    if any(b <= a for a, b in zip(windows, windows[1:])):
        raise CoordinationError("windows must be strictly increasing")
    pairs = co_action_pairs(log, kind, windows[-1])
    out = []
    for w in windows:
        net = _network(pairs, kind, w, min_weight, dedup, classes)
        profile: dict[str, tuple[float, float]] = {}
        if with_profile:
            nodes = sorted(net.nodes)
            cent, clus = undirected_profile(nodes, net.edges)
            profile = {u: (float(a), float(b)) for u, a, b in zip(nodes, cent, clus)}
        out.append(WindowSummary(w, net, profile))
    return WindowSweep(kind, out)
