"""Directed retweet/reply networks, k-core peeling, Louvain partitioning and node metrics."""

from __future__ import annotations

import csv
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence
from xml.sax.saxutils import quoteattr

import numpy as np
from scipy import sparse

from .events import EventLog, Kind


class GraphError(ValueError):
    pass


@dataclass
class InteractionGraph:
    """Directed weighted graph; ``edges`` maps ``(src, dst)`` to an interaction count."""

    edge_kind: Kind
    nodes: set[str] = field(default_factory=set)
    edges: dict[tuple[str, str], int] = field(default_factory=dict)
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def add_edge(self, src: str, dst: str, weight: int = 1) -> None:
        if src == dst:
            return
        self.nodes.add(src)
        self.nodes.add(dst)
        self.edges[(src, dst)] = self.edges.get((src, dst), 0) + weight

    def undirected_neighbors(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {n: set() for n in self.nodes}
        for s, d in self.edges:
            adj[s].add(d)
            adj[d].add(s)
        return adj

    def undirected_weights(self) -> dict[tuple[str, str], float]:
        """Undirected projection; reciprocal edges have their weights summed."""
        out: dict[tuple[str, str], float] = {}
        for (s, d), w in self.edges.items():
            key = (s, d) if s < d else (d, s)
            out[key] = out.get(key, 0) + w
        return out

    def subgraph(self, keep: Iterable[str]) -> "InteractionGraph":
        keep = set(keep)
        g = InteractionGraph(self.edge_kind, nodes=set(keep))
        g.edges = {(s, d): w for (s, d), w in self.edges.items() if s in keep and d in keep}
        return g


def build_interaction_network(log: EventLog, kind: Kind | str) -> InteractionGraph:
    """Edge direction is actor -> original author, so author in-degree counts times retweeted."""
    kind = Kind(kind)
    g = InteractionGraph(kind)
    counts: dict[tuple[str, str], int] = defaultdict(int)
    skipped = 0
    for e in log.events:
        if e.kind is not kind:
            continue
        if e.target_actor_id is None:
            skipped += 1
            continue
        if e.target_actor_id != e.actor_id:
            counts[(e.actor_id, e.target_actor_id)] += 1
    g.edges = dict(counts)
    for s, d in counts:
        g.nodes.add(s)
        g.nodes.add(d)
    g.skipped = skipped
    return g


def k_core(graph: InteractionGraph, k: int) -> InteractionGraph:
    """Maximal subgraph whose nodes all have undirected, unweighted degree >= k."""
    if k < 1:
        raise GraphError("k must be >= 1")
    adj = graph.undirected_neighbors()
    degree = {n: len(nbrs) for n, nbrs in adj.items()}
    removed: set[str] = set()
    queue = deque(n for n, d in degree.items() if d < k)
    while queue:
        n = queue.popleft()
        if n in removed:
            continue
        removed.add(n)
        for m in adj[n]:
            if m not in removed:
                degree[m] -= 1
                if degree[m] == k - 1:
                    queue.append(m)
    return graph.subgraph(n for n in graph.nodes if n not in removed)


# -- modularity --------------------------------------------------------------

@dataclass
class Partition:
    assignment: dict[str, int]
    modularity: float

    def communities(self) -> dict[int, set[str]]:
        out: dict[int, set[str]] = defaultdict(set)
        for n, c in self.assignment.items():
            out[c].add(n)
        return dict(out)


def modularity(graph: InteractionGraph, assignment: Mapping[str, int]) -> float:
    """Newman-Girvan modularity of the weighted undirected projection."""
    weights = graph.undirected_weights()
    m = float(sum(weights.values()))
    if m == 0:
        return 0.0
    internal: dict[int, float] = defaultdict(float)
    degree_sum: dict[int, float] = defaultdict(float)
    for (a, b), w in weights.items():
        ca, cb = assignment[a], assignment[b]
        if ca == cb:
            internal[ca] += w
        degree_sum[ca] += w
        degree_sum[cb] += w
    return sum(internal[c] / m - (degree_sum[c] / (2 * m)) ** 2 for c in degree_sum)


class _Level:
    """One Louvain level: integer nodes, neighbor weights, self-loop weights."""

    def __init__(self, n: int, nbrs: list[dict[int, float]], loops: list[float]):
        self.n = n
        self.nbrs = nbrs
        self.loops = loops
        self.degree = [2 * loops[i] + sum(nbrs[i].values()) for i in range(n)]
        self.total = sum(self.degree) / 2


def _one_level(level: _Level, rng: random.Random, min_gain: float) -> tuple[list[int], bool]:
    m2 = 2 * level.total
    comm = list(range(level.n))
    tot = list(level.degree)
    order = list(range(level.n))
    rng.shuffle(order)
    moved_any = False
    improved = True
    while improved:
        improved = False
        gain_sum = 0.0
        for i in order:
            ci = comm[i]
            ki = level.degree[i]
            links: dict[int, float] = defaultdict(float)
            for j, w in level.nbrs[i].items():
                links[comm[j]] += w
            tot[ci] -= ki
            stay_gain = links.get(ci, 0.0) - tot[ci] * ki / m2
            best, best_gain = ci, stay_gain
            # a node only leaves for a strictly better community
            for c, w in links.items():
                gain = w - tot[c] * ki / m2
                if gain > best_gain:
                    best, best_gain = c, gain
            tot[best] += ki
            if best != ci:
                gain_sum += (best_gain - stay_gain) / level.total
                comm[i] = best
                moved_any = True
        improved = gain_sum > min_gain
    return comm, moved_any


def _aggregate(level: _Level, comm: list[int]) -> tuple[_Level, list[int]]:
    relabel: dict[int, int] = {}
    for c in comm:
        relabel.setdefault(c, len(relabel))
    new = [relabel[c] for c in comm]
    n = len(relabel)
    nbrs: list[dict[int, float]] = [defaultdict(float) for _ in range(n)]
    loops = [0.0] * n
    for i in range(level.n):
        ci = new[i]
        loops[ci] += level.loops[i]
        for j, w in level.nbrs[i].items():
            cj = new[j]
            if ci == cj:
                if i < j:
                    loops[ci] += w
            else:
                nbrs[ci][cj] += w
    return _Level(n, [dict(d) for d in nbrs], loops), new


def louvain_partition(graph: InteractionGraph, seed: int = 0,
                      min_gain: float = 1e-7) -> Partition:
    """Louvain community detection (resolution 1.0) on the undirected projection.

    Node visit order is shuffled with ``random.Random(seed)``; community indices in
    the result are renumbered by first appearance in sorted node order.
    """
    if not graph.nodes:
        raise GraphError("cannot partition an empty graph")
    names = sorted(graph.nodes)
    index = {n: i for i, n in enumerate(names)}
    nbrs: list[dict[int, float]] = [dict() for _ in names]
    for (a, b), w in graph.undirected_weights().items():
        ia, ib = index[a], index[b]
        nbrs[ia][ib] = nbrs[ia].get(ib, 0) + w
        nbrs[ib][ia] = nbrs[ib].get(ia, 0) + w
    level = _Level(len(names), nbrs, [0.0] * len(names))
    membership = list(range(len(names)))
    rng = random.Random(seed)
    if level.total > 0:
        while True:
            comm, moved = _one_level(level, rng, min_gain)
            if not moved:
                break
            level, relabel = _aggregate(level, comm)
            membership = [relabel[c] for c in membership]
    canon: dict[int, int] = {}
    assignment = {}
    for i, name in enumerate(names):
        assignment[name] = canon.setdefault(membership[i], len(canon))
    return Partition(assignment, modularity(graph, assignment))


# -- node metrics ------------------------------------------------------------

def undirected_profile(nodes: Sequence[str], edges: Mapping[tuple[str, str], object]
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Degree centrality and local clustering for an undirected, unweighted graph."""
    n = len(nodes)
    if n == 0:
        return np.zeros(0), np.zeros(0)
    index = {u: i for i, u in enumerate(nodes)}
    r = np.fromiter((index[u] for u, _ in edges), dtype=np.int64, count=len(edges))
    c = np.fromiter((index[v] for _, v in edges), dtype=np.int64, count=len(edges))
    adj = sparse.coo_matrix((np.ones(2 * r.size), (np.r_[r, c], np.r_[c, r])), shape=(n, n)).tocsr()
    adj.data[:] = 1.0
    deg = np.asarray(adj.sum(axis=1)).ravel()
    triangles = np.asarray(adj.multiply(adj @ adj).sum(axis=1)).ravel() / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        clus = np.where(deg > 1, 2 * triangles / (deg * (deg - 1)), 0.0)
    cent = deg / (n - 1) if n > 1 else np.zeros(n)
    return cent, clus


def node_metrics(graph: InteractionGraph) -> dict[str, dict[str, float]]:
    indeg: dict[str, int] = defaultdict(int)
    outdeg: dict[str, int] = defaultdict(int)
    for (s, d), w in graph.edges.items():
        outdeg[s] += w
        indeg[d] += w
    nodes = sorted(graph.nodes)
    cent, clus = undirected_profile(nodes, graph.undirected_weights())
    return {
        n: {
            "indegree": indeg[n],
            "outdegree": outdeg[n],
            "degree_centrality": float(cent[i]),
            "clustering_coefficient": float(clus[i]),
        }
        for i, n in enumerate(nodes)
    }


# -- export ------------------------------------------------------------------

def _edge_rows(edges: Mapping[tuple[str, str], float]):
    return sorted(edges.items())


def write_edge_csv(edges: Mapping[tuple[str, str], float], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "weight"])
        for (s, d), weight in _edge_rows(edges):
            w.writerow([s, d, weight])


def write_gexf(nodes: Iterable[str], edges: Mapping[tuple[str, str], float], path: str | Path,
               classes: Optional[Mapping[str, object]] = None, directed: bool = True) -> None:
    """Stream a GEXF 1.3 document; nodes and edges are written in sorted order."""
    edge_type = "directed" if directed else "undirected"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        out = fh.write
        out("<?xml version='1.0' encoding='utf-8'?>\n")
        out('<gexf xmlns="http://gexf.net/1.3" version="1.3">\n')
        out(f'  <graph mode="static" defaultedgetype="{edge_type}">\n')
        if classes is not None:
            out('    <attributes class="node">\n')
            out('      <attribute id="0" title="class" type="string" />\n')
            out("    </attributes>\n")
        out("    <nodes>\n")
        quoted = {n: quoteattr(n) for n in sorted(nodes)}
        for n, q in quoted.items():
            if classes is None:
                out(f"      <node id={q} label={q} />\n")
                continue
            label = classes.get(n, "UNKNOWN")
            label = quoteattr(str(getattr(label, "value", label)))
            out(f"      <node id={q} label={q}><attvalues><attvalue for=\"0\" value={label} />"
                f"</attvalues></node>\n")
        out("    </nodes>\n    <edges>\n")
        for i, ((s, d), w) in enumerate(_edge_rows(edges)):
            qs = quoted.get(s) or quoteattr(s)
            qd = quoted.get(d) or quoteattr(d)
            out(f'      <edge id="{i}" source={qs} target={qd} weight="{w}" />\n')
        out("    </edges>\n  </graph>\n</gexf>\n")


def export_graph(graph: InteractionGraph, path: str | Path, format: str = "EDGE_CSV",
                 classes: Optional[Mapping[str, object]] = None) -> Path:
    path = Path(path)
    try:
        if format.upper() == "EDGE_CSV":
            write_edge_csv(graph.edges, path)
        elif format.upper() == "GEXF":
            write_gexf(graph.nodes, graph.edges, path, classes=classes, directed=True)
        else:
            raise GraphError(f"unknown export format {format!r}")
    except OSError as exc:
        raise GraphError(f"cannot write {path}: {exc}") from exc
    return path
