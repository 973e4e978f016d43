import csv
import itertools
import xml.etree.ElementTree as ET

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from botscope.classify import UserClass
from botscope.events import Event, Kind, Platform, normalize_log
from botscope.graph import (GraphError, InteractionGraph, build_interaction_network, export_graph,
                            k_core, louvain_partition, modularity, node_metrics)
from factories import ev
from oracles import best_partition, local_clustering, matrix_modularity, peel_k_core


def graph_of(edges, nodes=()) -> InteractionGraph:
    g = InteractionGraph(Kind.RETWEET)
    g.nodes.update(nodes)
    for a, b in edges:
        g.add_edge(a, b)
    return g


def clique(prefix, n):
    names = [f"{prefix}{i}" for i in range(n)]
    return list(itertools.combinations(names, 2))


class TestBuild:
    def test_aggregates_weight(self):
        log = normalize_log([ev("RETWEET", "u1", t, "u2") for t in range(3)])
        g = build_interaction_network(log, Kind.RETWEET)
        assert g.edges == {("u1", "u2"): 3}

    def test_self_loops_dropped(self):
        log = normalize_log([ev("RETWEET", "u1", 0, "u1")])
        g = build_interaction_network(log, "RETWEET")
        assert g.edges == {} and g.nodes == set()

    def test_weighted_indegree(self):
        log = normalize_log([ev("RETWEET", "u1", 0, "u2"), ev("RETWEET", "u1", 1, "u2"),
                             ev("RETWEET", "u3", 2, "u2"), ev("REPLY", "u4", 3, "u2", "x")])
        g = build_interaction_network(log, Kind.RETWEET)
        assert node_metrics(g)["u2"]["indegree"] == 3

    def test_missing_targets_are_tallied(self):
        e = Event("r1", Platform.REDDIT, Kind.REPLY, "a", 1.0, object_id="t1_zz")
        g = build_interaction_network(normalize_log([e]), Kind.REPLY)
        assert g.skipped == 1 and not g.edges

    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), max_size=40))
    def test_degree_sums_equal_event_count(self, pairs):
        log = normalize_log([ev("RETWEET", f"u{a}", i, f"u{b}") for i, (a, b) in enumerate(pairs)])
        g = build_interaction_network(log, Kind.RETWEET)
        m = node_metrics(g)
        counted = sum(1 for a, b in pairs if a != b)
        assert sum(v["indegree"] for v in m.values()) == counted
        assert sum(v["outdegree"] for v in m.values()) == counted
        assert all(w >= 1 for w in g.edges.values())


class TestKCore:
    def test_k4_unchanged(self):
        g = graph_of(clique("a", 4))
        assert k_core(g, 3).nodes == g.nodes

    def test_path_vanishes(self):
        g = graph_of([(f"p{i}", f"p{i + 1}") for i in range(4)])
        assert k_core(g, 3).nodes == set()

    def test_pendant_removed(self):
        g = graph_of(clique("a", 4) + [("a0", "p")])
        core = k_core(g, 3)
        assert core.nodes == {"a0", "a1", "a2", "a3"}
        assert len(core.edges) == 6

    def test_weights_preserved(self):
        g = graph_of(clique("a", 4))
        g.add_edge("a0", "a1", 4)
        assert k_core(g, 3).edges[("a0", "a1")] == 5

    def test_k_must_be_positive(self):
        with pytest.raises(GraphError):
            k_core(graph_of([]), 0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 60), st.floats(0.0, 0.3), st.integers(1, 5), st.integers(0, 2**31))
    def test_matches_peel_oracle(self, n, p, k, seed):
        rng = np.random.default_rng(seed)
        edges = [(f"n{i}", f"n{j}") for i in range(n) for j in range(n)
                 if i != j and rng.random() < p / 2]
        g = graph_of(edges, nodes={f"n{i}" for i in range(n)})
        assert k_core(g, k).nodes == peel_k_core(g.nodes, set(g.edges), k)


class TestModularity:
    def test_two_k4_bridge(self):
        g = graph_of(clique("a", 4) + clique("b", 4) + [("a0", "b0")])
        part = louvain_partition(g, seed=0)
        assert sorted(map(sorted, part.communities().values())) == [
            ["a0", "a1", "a2", "a3"], ["b0", "b1", "b2", "b3"]]
        # exhaustive search over all 4140 partitions of the 8 nodes
        q_best, best = best_partition(sorted(g.nodes), g.undirected_weights())
        assert sorted(map(sorted, best)) == sorted(map(sorted, part.communities().values()))
        assert part.modularity == pytest.approx(q_best, abs=1e-12)
        assert part.modularity == pytest.approx(0.4231, abs=5e-5)

    def test_two_triangles(self):
        g = graph_of(clique("a", 3) + clique("b", 3))
        part = louvain_partition(g, seed=3)
        q_best, _ = best_partition(sorted(g.nodes), g.undirected_weights())
        assert len(part.communities()) == 2
        assert part.modularity == pytest.approx(0.5, abs=1e-12) == q_best

    def test_single_node(self):
        g = graph_of([], nodes={"solo"})
        part = louvain_partition(g)
        assert part.assignment == {"solo": 0} and part.modularity == 0.0

    def test_empty_graph_errors(self):
        with pytest.raises(GraphError):
            louvain_partition(graph_of([]))

    def test_reciprocal_edges_summed(self):
        g = graph_of([("a", "b"), ("b", "a"), ("b", "c")])
        assert g.undirected_weights() == {("a", "b"): 2, ("b", "c"): 1}

    def test_deterministic_per_seed(self, reference_data):
        g = build_interaction_network(reference_data.log.for_community("en"), Kind.RETWEET)
        a = louvain_partition(g, seed=5)
        b = louvain_partition(g, seed=5)
        assert a.assignment == b.assignment and a.modularity == b.modularity

    def test_matches_networkx_on_karate(self):
        kg = nx.karate_club_graph()
        g = graph_of([(f"k{a:02d}", f"k{b:02d}") for a, b in kg.edges()])
        part = louvain_partition(g, seed=1)
        comms = [{int(n[1:]) for n in c} for c in part.communities().values()]
        assert part.modularity == pytest.approx(nx.community.modularity(kg, comms, weight=None),
                                                abs=1e-12)
        assert part.modularity > 0.40

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 40), st.floats(0.05, 0.5), st.integers(0, 2**31), st.integers(0, 100))
    def test_stored_q_matches_recomputation(self, n, p, gseed, seed):
        rng = np.random.default_rng(gseed)
        edges = [(f"n{i}", f"n{j}") for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        weights = {e: int(rng.integers(1, 4)) for e in edges}
        g = graph_of([], nodes={f"n{i}" for i in range(n)})
        for (a, b), w in weights.items():
            g.add_edge(a, b, w)
        part = louvain_partition(g, seed=seed)
        nodes = sorted(g.nodes)
        assert part.modularity == pytest.approx(
            matrix_modularity(nodes, g.undirected_weights(), part.assignment), abs=1e-9)
        assert part.modularity == pytest.approx(modularity(g, part.assignment), abs=1e-12)
        singletons = {v: i for i, v in enumerate(nodes)}
        assert part.modularity >= modularity(g, singletons) - 1e-12
        assert set(part.assignment) == g.nodes


class TestNodeMetrics:
    def test_star(self):
        m = node_metrics(graph_of([("c", f"l{i}") for i in range(4)]))
        assert m["c"]["degree_centrality"] == 1.0 and m["c"]["clustering_coefficient"] == 0.0

    def test_triangle(self):
        m = node_metrics(graph_of(clique("t", 3)))
        assert all(v["clustering_coefficient"] == 1.0 for v in m.values())

    def test_k4_plus_pendant(self):
        m = node_metrics(graph_of(clique("a", 4) + [("a0", "p")]))
        assert m["a0"]["clustering_coefficient"] == pytest.approx(0.5)
        assert m["p"]["clustering_coefficient"] == 0.0

    def test_single_node_centrality(self):
        assert node_metrics(graph_of([], nodes={"x"}))["x"]["degree_centrality"] == 0.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 30), st.floats(0.05, 0.6), st.integers(0, 2**31))
    def test_against_networkx_and_set_oracle(self, n, p, seed):
        rng = np.random.default_rng(seed)
        edges = [(f"n{i}", f"n{j}") for i in range(n) for j in range(n) if i != j and rng.random() < p]
        g = graph_of(edges, nodes={f"n{i}" for i in range(n)})
        m = node_metrics(g)
        ug = nx.Graph()
        ug.add_nodes_from(g.nodes)
        ug.add_edges_from(g.edges)
        nx_clus = nx.clustering(ug)
        nx_cent = nx.degree_centrality(ug)
        mine = local_clustering(g.undirected_neighbors())
        for v in g.nodes:
            assert m[v]["clustering_coefficient"] == pytest.approx(nx_clus[v], abs=1e-12)
            assert m[v]["clustering_coefficient"] == pytest.approx(mine[v], abs=1e-12)
            assert m[v]["degree_centrality"] == pytest.approx(nx_cent[v], abs=1e-12)


class TestExport:
    def test_edge_csv(self, tmp_path):
        g = graph_of([])
        g.add_edge("u1", "u2", 3)
        path = export_graph(g, tmp_path / "g.csv", "EDGE_CSV")
        assert path.read_text().splitlines() == ["src,dst,weight", "u1,u2,3"]

    def test_empty_csv_is_header_only(self, tmp_path):
        path = export_graph(graph_of([]), tmp_path / "g.csv")
        assert list(csv.reader(open(path))) == [["src", "dst", "weight"]]

    def test_gexf_carries_classes(self, tmp_path):
        g = graph_of([("u1", "u2")])
        path = export_graph(g, tmp_path / "g.gexf", "GEXF",
                            classes={"u1": UserClass.A_BOT, "u2": UserClass.B_HUMAN})
        root = ET.parse(path).getroot()
        ns = {"g": "http://gexf.net/1.3"}
        assert root.get("version") == "1.3"
        labels = {n.get("id"): n.find("g:attvalues/g:attvalue", ns).get("value")
                  for n in root.iterfind(".//g:node", ns)}
        assert labels == {"u1": "A_BOT", "u2": "B_HUMAN"}
        (edge,) = root.iterfind(".//g:edge", ns)
        assert (edge.get("source"), edge.get("target"), edge.get("weight")) == ("u1", "u2", "1")
        assert root.find("g:graph", ns).get("defaultedgetype") == "directed"

    def test_unwritable_destination(self, tmp_path):
        with pytest.raises(GraphError):
            export_graph(graph_of([("a", "b")]), tmp_path / "missing" / "g.csv")

    def test_unknown_format(self, tmp_path):
        with pytest.raises(GraphError):
            export_graph(graph_of([]), tmp_path / "g.x", "DOT")

    def test_gexf_escapes_markup_in_ids(self, tmp_path):
        odd = 'a<b>&"c\''
        path = export_graph(graph_of([(odd, "plain")]), tmp_path / "g.gexf", "GEXF")
        ns = {"g": "http://gexf.net/1.3"}
        root = ET.parse(path).getroot()
        assert {n.get("id") for n in root.iterfind(".//g:node", ns)} == {odd, "plain"}
