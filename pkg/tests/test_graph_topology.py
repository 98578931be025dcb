import math
import unittest

import networkx as nx
import numpy as np

from nlsgraph.graph_io import load_fixture
from nlsgraph.graph_topology import (
    INFINITY,
    OMEGA,
    Edge,
    GraphValidationError,
    MetricGraph,
    bridge_set,
    classify,
    compact_core,
    compactify,
    has_cycle_covering,
    shortest_loop_length,
    subdivide,
    terminal_points,
)
from nlsgraph.models import TopologyTag


def _half_line(edge_id: str, vertex: str) -> Edge:
    return Edge(edge_id, vertex, INFINITY, math.inf)


class TestMetricGraph(unittest.TestCase):

    def test_degree_counts_loops_twice(self):
        graph = load_fixture("tadpole")
        self.assertEqual(graph.degree("v"), 3)

    def test_requires_a_half_line(self):
        with self.assertRaises(GraphValidationError):
            MetricGraph(vertices=("a", "b"), edges=(Edge("e", "a", "b", 1.0),))

    def test_rejects_disconnected_graph(self):
        edges = (_half_line("h", "a"), _half_line("k", "b"))
        with self.assertRaises(GraphValidationError):
            MetricGraph(vertices=("a", "b"), edges=edges)

    def test_rejects_duplicate_edge_ids(self):
        edges = (_half_line("h", "a"), _half_line("h", "a"))
        with self.assertRaises(GraphValidationError):
            MetricGraph(vertices=("a",), edges=edges)

    def test_rejects_nonpositive_length(self):
        edges = (_half_line("h", "a"), Edge("e", "a", "b", 0.0))
        with self.assertRaises(GraphValidationError):
            MetricGraph(vertices=("a", "b"), edges=edges)

    def test_rejects_reserved_vertex_id(self):
        with self.assertRaises(GraphValidationError):
            MetricGraph(vertices=(OMEGA,), edges=(_half_line("h", OMEGA),))

    def test_compact_core_drops_half_lines(self):
        core = compact_core(load_fixture("signpost"))
        self.assertFalse(core.noncompact)
        self.assertEqual({e.id for e in core.edges}, {"post", "loop"})


class TestClassification(unittest.TestCase):

    EXPECTED = {
        "line": (TopologyTag.CYCLE_COVERED, set()),
        "half_line": (TopologyTag.TIP, {"h"}),
        "tadpole": (TopologyTag.ONE_HALF_LINE_NO_TIP, {"h"}),
        "signpost": (TopologyTag.OTHER, {"post"}),
        "fig1": (TopologyTag.TIP, {"pendant"}),
        "fig2": (TopologyTag.CYCLE_COVERED, set()),
        "fig3": (TopologyTag.ONE_HALF_LINE_NO_TIP, {"h1"}),
    }

    def test_fixtures(self):
        for name, (tag, bridges) in self.EXPECTED.items():
            with self.subTest(graph=name):
                graph = load_fixture(name)
                self.assertEqual(classify(graph).tag, tag)
                self.assertEqual(bridge_set(graph), bridges)

    def test_half_lines_meet_at_omega(self):
        # the two ends of the line close a cycle through the point at infinity
        multigraph = compactify(load_fixture("line"))
        self.assertEqual(multigraph.number_of_edges("v", OMEGA), 2)
        self.assertTrue(has_cycle_covering(load_fixture("line")))

    def test_terminal_points(self):
        self.assertEqual(terminal_points(load_fixture("half_line")), {"v"})
        self.assertEqual(terminal_points(load_fixture("fig1")), {"term"})
        self.assertEqual(terminal_points(load_fixture("tadpole")), set())

    def test_tip_wins_over_cycle_covering(self):
        # a line with a pendant edge: every edge but the pendant lies on a cycle
        graph = MetricGraph(
            vertices=("v", "t"),
            edges=(_half_line("a", "v"), _half_line("b", "v"), Edge("p", "v", "t", 1.0)),
        )
        tc = classify(graph)
        self.assertEqual(tc.tag, TopologyTag.TIP)
        self.assertEqual(tc.bridges, ("p",))
        self.assertEqual(tc.terminal_points, ("t",))

    def test_parallel_edges_are_not_bridges(self):
        graph = MetricGraph(
            vertices=("v", "w"),
            edges=(_half_line("h", "v"), Edge("e1", "v", "w", 1.0), Edge("e2", "v", "w", 2.0)),
        )
        self.assertEqual(bridge_set(graph), {"h"})
        self.assertEqual(classify(graph).tag, TopologyTag.ONE_HALF_LINE_NO_TIP)

    def test_classification_survives_subdivision(self):
        for name in self.EXPECTED:
            graph = load_fixture(name)
            finite = graph.finite_edges
            if not finite:
                continue
            with self.subTest(graph=name):
                split = subdivide(graph, finite[0].id, at=0.3)
                self.assertEqual(classify(split).tag, classify(graph).tag)

    def test_to_dict_reports_case_letter(self):
        data = classify(load_fixture("signpost")).to_dict()
        self.assertEqual(data["case"], "d")
        self.assertEqual(data["half_line_count"], 2)


def _random_graph(rng: np.random.Generator, index: int) -> MetricGraph:
    """Connected graph with a random spanning tree, extra edges (loops and parallels allowed) and 1-3 half-lines."""
    n = int(rng.integers(1, 7))
    vertices = tuple(f"v{k}" for k in range(n))
    edges = []
    for k in range(1, n):
        edges.append(Edge(f"t{k}", vertices[int(rng.integers(k))], vertices[k], float(rng.uniform(0.5, 2.0))))
    for k in range(int(rng.integers(0, 5))):
        a, b = rng.integers(n, size=2)
        edges.append(Edge(f"x{k}", vertices[int(a)], vertices[int(b)], float(rng.uniform(0.5, 2.0))))
    for k in range(int(rng.integers(1, 4))):
        edges.append(_half_line(f"h{k}", vertices[int(rng.integers(n))]))
    return MetricGraph(vertices=vertices, edges=tuple(edges), name=f"random-{index}")


def _bridges_by_deletion(graph: MetricGraph) -> set[str]:
    multigraph = compactify(graph)
    found = set()
    for u, v, key in list(multigraph.edges(keys=True)):
        data = multigraph.edges[u, v, key]
        multigraph.remove_edge(u, v, key=key)
        if not nx.has_path(multigraph, u, v):
            found.add(key)
        multigraph.add_edge(u, v, key=key, **data)
    return found


class TestRandomGraphs(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(2024)
        self.graphs = [_random_graph(rng, k) for k in range(200)]

    def test_bridges_match_edge_deletion(self):
        for graph in self.graphs:
            with self.subTest(graph=graph.name):
                self.assertEqual(bridge_set(graph), _bridges_by_deletion(graph))

    def test_every_graph_gets_exactly_one_case(self):
        seen = set()
        for graph in self.graphs:
            tc = classify(graph)
            tips = terminal_points(graph)
            bridges = bridge_set(graph)
            matches = [
                bool(tips),
                not tips and not bridges,
                not tips and bool(bridges) and len(graph.half_lines) == 1,
                not tips and bool(bridges) and len(graph.half_lines) > 1,
            ]
            with self.subTest(graph=graph.name):
                self.assertEqual(sum(matches), 1)
                tags = [TopologyTag.TIP, TopologyTag.CYCLE_COVERED, TopologyTag.ONE_HALF_LINE_NO_TIP, TopologyTag.OTHER]
                self.assertEqual(tc.tag, tags[matches.index(True)])
            seen.add(tc.tag)
        self.assertEqual(seen, set(TopologyTag))

    def test_cycle_covering_forces_two_half_lines_and_no_tip(self):
        for graph in self.graphs:
            if has_cycle_covering(graph):
                with self.subTest(graph=graph.name):
                    self.assertEqual(terminal_points(graph), set())
                    self.assertGreaterEqual(len(graph.half_lines), 2)

    def test_compactify_adds_one_vertex(self):
        for graph in self.graphs:
            multigraph = compactify(graph)
            self.assertEqual(multigraph.number_of_nodes(), len(graph.vertices) + 1)
            self.assertEqual(multigraph.number_of_edges(), len(graph.edges))

    def test_subdivision_keeps_the_case(self):
        for graph in self.graphs:
            if graph.finite_edges:
                split = subdivide(graph, graph.finite_edges[-1].id, at=0.4)
                self.assertEqual(classify(split).tag, classify(graph).tag)


class TestShortestLoop(unittest.TestCase):

    def test_self_loop(self):
        self.assertAlmostEqual(shortest_loop_length(load_fixture("tadpole")), 2 * math.pi)

    def test_forest_core(self):
        self.assertIsNone(shortest_loop_length(load_fixture("line")))
        self.assertIsNone(shortest_loop_length(load_fixture("half_line")))

    def test_parallel_pair(self):
        graph = MetricGraph(
            vertices=("v", "w"),
            edges=(_half_line("h", "v"), Edge("e1", "v", "w", 1.0), Edge("e2", "v", "w", 2.5)),
        )
        self.assertAlmostEqual(shortest_loop_length(graph), 3.5)

    def test_signpost(self):
        self.assertAlmostEqual(shortest_loop_length(load_fixture("signpost")), 1.0)


class TestSubdivide(unittest.TestCase):

    def test_pieces_keep_length(self):
        graph = subdivide(load_fixture("tadpole"), "loop")
        self.assertIn("loop~m", graph.vertices)
        self.assertAlmostEqual(graph.edge("loop~1").length, math.pi)
        self.assertAlmostEqual(graph.edge("loop~2").length, math.pi)

    def test_rejects_half_line(self):
        with self.assertRaises(GraphValidationError):
            subdivide(load_fixture("tadpole"), "h")


if __name__ == "__main__":
    unittest.main()
