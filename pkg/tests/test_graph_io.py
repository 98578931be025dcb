import json
import math
import os
import tempfile
import unittest

import numpy as np

from nlsgraph.discrete import GraphFunction, GridSpec, build_mesh, distance_from
from nlsgraph.graph_io import (
    FUNCTION_FORMAT,
    GraphParseError,
    dump_graph,
    fixture_names,
    function_from_dict,
    function_to_dict,
    load_fixture,
    load_function,
    parse_graph,
    resolve_graph,
    save_function,
    save_graph,
)
from nlsgraph.reference import soliton

VALID = """\
name: stick
vertices: [v, w]
edges:
  - {id: h, from: v, to: INF, length: INF}
  - {id: e, from: v, to: w, length: 2.5}
  - {id: k, from: INF, to: w, length: INF}
"""


class TestParseGraph(unittest.TestCase):

    def test_valid_document(self):
        graph = parse_graph(VALID)
        self.assertEqual(graph.name, "stick")
        self.assertEqual(graph.vertices, ("v", "w"))
        self.assertTrue(graph.edge("h").is_half_line)
        self.assertEqual(graph.edge("e").length, 2.5)

    def test_infinite_tail_is_flipped(self):
        edge = parse_graph(VALID).edge("k")
        self.assertEqual(edge.tail, "w")
        self.assertTrue(edge.is_half_line)

    def test_unknown_vertex_reports_line(self):
        text = (
            "name: bad\n"
            "vertices: [v]\n"
            "edges:\n"
            "  - {id: a, from: v, to: INF, length: INF}\n"
            "  - {id: b, from: v, to: w, length: 1.0}\n"
        )
        with self.assertRaises(GraphParseError) as ctx:
            parse_graph(text, source="bad.yaml")
        self.assertEqual(ctx.exception.line, 5)
        self.assertIn("unknown vertex", str(ctx.exception))
        self.assertTrue(str(ctx.exception).startswith("bad.yaml:5"))

    def test_finite_length_to_infinity(self):
        text = "vertices: [v]\nedges:\n  - {id: a, from: v, to: INF, length: 3}\n"
        with self.assertRaises(GraphParseError) as ctx:
            parse_graph(text)
        self.assertEqual(ctx.exception.line, 3)

    def test_non_numeric_length(self):
        text = "vertices: [v, w]\nedges:\n  - {id: a, from: v, to: INF, length: INF}\n  - {id: b, from: v, to: w, length: far}\n"
        with self.assertRaises(GraphParseError):
            parse_graph(text)

    def test_invalid_yaml(self):
        with self.assertRaises(GraphParseError):
            parse_graph("vertices: [v\n")

    def test_empty_document(self):
        with self.assertRaises(GraphParseError):
            parse_graph("")

    def test_missing_edges(self):
        with self.assertRaises(GraphParseError):
            parse_graph("vertices: [v]\n")

    def test_duplicate_edge_id(self):
        text = "vertices: [v]\nedges:\n  - {id: a, from: v, to: INF, length: INF}\n  - {id: a, from: v, to: INF, length: INF}\n"
        with self.assertRaises(GraphParseError) as ctx:
            parse_graph(text)
        self.assertEqual(ctx.exception.line, 4)

    def test_graph_invariant_becomes_parse_error(self):
        # compact graphs are rejected by the graph itself, not the parser
        with self.assertRaises(GraphParseError) as ctx:
            parse_graph("vertices: [a, b]\nedges:\n  - {id: e, from: a, to: b, length: 1}\n")
        self.assertIn("no half-line", str(ctx.exception))
        self.assertEqual(ctx.exception.line, 3)

    def test_disconnected_piece_reports_its_edge_line(self):
        text = (
            "vertices: [a, b, c]\n"
            "edges:\n"
            "  - {id: h, from: a, to: INF, length: INF}\n"
            "  - {id: e, from: b, to: c, length: 1.0}\n"
        )
        with self.assertRaises(GraphParseError) as ctx:
            parse_graph(text, source="split.yaml")
        self.assertEqual(ctx.exception.line, 4)
        self.assertIn("not connected", str(ctx.exception))
        self.assertTrue(str(ctx.exception).startswith("split.yaml:4"))

    def test_isolated_vertex_reports_its_line(self):
        text = "vertices:\n  - a\n  - b\nedges:\n  - {id: h, from: a, to: INF, length: INF}\n"
        with self.assertRaises(GraphParseError) as ctx:
            parse_graph(text)
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn("isolated", str(ctx.exception))

    def test_name_defaults_to_file_stem(self):
        graph = parse_graph("vertices: [v]\nedges:\n  - {id: h, from: v, to: INF, length: INF}\n", source="dir/ray.yaml")
        self.assertEqual(graph.name, "ray")


class TestFixtures(unittest.TestCase):

    def test_fixture_names(self):
        self.assertEqual(
            set(fixture_names()),
            {"line", "half_line", "tadpole", "signpost", "fig1", "fig2", "fig3"},
        )

    def test_unknown_fixture(self):
        with self.assertRaises(GraphParseError):
            load_fixture("nope")

    def test_tadpole_loop_length(self):
        self.assertAlmostEqual(load_fixture("tadpole").edge("loop").length, 2 * math.pi)

    def test_dump_and_reload(self):
        graph = load_fixture("signpost")
        self.assertEqual(parse_graph(dump_graph(graph)), graph)

    def test_resolve_prefers_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = save_graph(parse_graph(VALID), os.path.join(tmp, "stick.yaml"))
            self.assertEqual(resolve_graph(path).name, "stick")
        self.assertEqual(resolve_graph("tadpole").name, "tadpole")


class TestFunctionFiles(unittest.TestCase):

    def setUp(self):
        self.graph = load_fixture("tadpole")
        mesh = build_mesh(self.graph, GridSpec(h=0.1, L=10.0))
        self.u = GraphFunction(mesh, soliton(1.0, distance_from(mesh, vertex="v")))

    def test_save_and_load(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = save_function(self.u, os.path.join(tmp, "u.json"))
            with open(path, encoding="utf-8") as f:
                self.assertEqual(json.load(f)["format"], FUNCTION_FORMAT)
            loaded = load_function(path, self.graph)
        np.testing.assert_allclose(loaded.values, self.u.values)
        self.assertEqual(loaded.grid, self.u.grid)

    def test_wrong_format(self):
        data = function_to_dict(self.u)
        data["format"] = "other/1"
        with self.assertRaises(GraphParseError):
            function_from_dict(data, self.graph)

    def test_wrong_sample_count(self):
        data = function_to_dict(self.u)
        data["edges"]["loop"] = data["edges"]["loop"][:-1]
        with self.assertRaises(GraphParseError):
            function_from_dict(data, self.graph)

    def test_half_line_must_end_at_zero(self):
        data = function_to_dict(self.u)
        data["edges"]["h"][-1] = 0.5
        with self.assertRaises(GraphParseError):
            function_from_dict(data, self.graph)


if __name__ == "__main__":
    unittest.main()
