import json
import logging
import math
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from nlsgraph.discrete import GraphFunction, GridSpec, build_mesh
from nlsgraph.graph_topology import INFINITY, Edge, GraphValidationError, MetricGraph

logger = logging.getLogger(__name__)

FIXTURES_DIR = Path(__file__).parent / "fixtures"

FUNCTION_FORMAT = "nlsgraph-function/1"


class GraphParseError(ValueError):
    """Malformed graph file. `line` is 1-based, or None when no position applies."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = "<graph>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


def _line(node: yaml.Node) -> int:
    return node.start_mark.line + 1


def _mapping(node: yaml.Node, what: str, source: str) -> dict[str, yaml.Node]:
    if not isinstance(node, yaml.MappingNode):
        raise GraphParseError(f"{what} must be a mapping", _line(node), source)
    result = {}
    for key, value in node.value:
        if not isinstance(key, yaml.ScalarNode):
            raise GraphParseError(f"{what} has a non-scalar key", _line(key), source)
        result[key.value] = value
    return result


def _scalar(node: yaml.Node, what: str, source: str) -> str:
    if not isinstance(node, yaml.ScalarNode):
        raise GraphParseError(f"{what} must be a scalar", _line(node), source)
    return str(node.value)


def _length(node: yaml.Node, edge_id: str, source: str) -> float:
    raw = _scalar(node, f"length of edge {edge_id!r}", source)
    if raw.upper() == INFINITY:
        return math.inf
    try:
        return float(raw)
    except ValueError:
        raise GraphParseError(f"edge {edge_id!r}: length {raw!r} is not a number", _line(node), source)


def parse_graph(text: str, source: str = "<graph>") -> MetricGraph:
    """
    Parse a graph description.

    Args:
        text: YAML document with `name`, `vertices` and `edges`
            (each edge: id, from, to, length; "INF" marks the far end of a half-line)
        source: Name used in error messages

    Returns:
        Validated MetricGraph

    Raises:
        GraphParseError: On syntax errors or violated invariants, with a line anchor
    """
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise GraphParseError(f"invalid YAML: {e}", mark.line + 1 if mark else None, source)
    if root is None:
        raise GraphParseError("empty document", 1, source)

    top = _mapping(root, "graph document", source)
    name = _scalar(top["name"], "name", source) if "name" in top else Path(source).stem

    if "vertices" not in top:
        raise GraphParseError("missing 'vertices'", _line(root), source)
    vertices_node = top["vertices"]
    if not isinstance(vertices_node, yaml.SequenceNode):
        raise GraphParseError("'vertices' must be a list", _line(vertices_node), source)
    vertices = []
    vertex_lines: dict[str, int] = {}
    for item in vertices_node.value:
        vertex = _scalar(item, "vertex id", source)
        if vertex in vertices:
            raise GraphParseError(f"duplicate vertex {vertex!r}", _line(item), source)
        if vertex.upper() == INFINITY:
            raise GraphParseError(f"vertex id {vertex!r} is reserved", _line(item), source)
        vertices.append(vertex)
        vertex_lines[vertex] = _line(item)

    if "edges" not in top:
        raise GraphParseError("missing 'edges'", _line(root), source)
    edges_node = top["edges"]
    if not isinstance(edges_node, yaml.SequenceNode):
        raise GraphParseError("'edges' must be a list", _line(edges_node), source)

    edges = []
    ids: set[str] = set()
    edge_lines: dict[str, int] = {}
    for item in edges_node.value:
        line = _line(item)
        fields = _mapping(item, "edge", source)
        missing = [k for k in ("id", "from", "to", "length") if k not in fields]
        if missing:
            raise GraphParseError(f"edge is missing {missing}", line, source)
        edge_id = _scalar(fields["id"], "edge id", source)
        if edge_id in ids:
            raise GraphParseError(f"duplicate edge id {edge_id!r}", line, source)
        ids.add(edge_id)
        edge_lines[edge_id] = line
        tail = _scalar(fields["from"], "edge endpoint", source)
        head = _scalar(fields["to"], "edge endpoint", source)
        length = _length(fields["length"], edge_id, source)

        if tail.upper() == INFINITY:
            tail, head = head, tail
        tail_infinite = tail.upper() == INFINITY
        head_infinite = head.upper() == INFINITY
        if tail_infinite:
            raise GraphParseError(f"edge {edge_id!r} has two points at infinity", line, source)
        for endpoint in (tail,) + (() if head_infinite else (head,)):
            if endpoint not in vertices:
                raise GraphParseError(f"edge {edge_id!r}: unknown vertex {endpoint!r}", line, source)
        if head_infinite != math.isinf(length):
            raise GraphParseError(
                f"edge {edge_id!r}: an edge reaches infinity exactly when its length is INF", line, source
            )
        if not head_infinite and not length > 0:
            raise GraphParseError(f"edge {edge_id!r}: length must be positive, got {length}", line, source)
        edges.append(Edge(edge_id, tail, INFINITY if head_infinite else head, length))

    try:
        return MetricGraph(vertices=tuple(vertices), edges=tuple(edges), name=name)
    except GraphValidationError as e:
        if e.edge_id in edge_lines:
            line = edge_lines[e.edge_id]
        elif e.vertex in vertex_lines:
            line = vertex_lines[e.vertex]
        else:
            line = _line(edges_node)
        raise GraphParseError(str(e), line, source)


def load_graph(path: str) -> MetricGraph:
    file_path = Path(path)
    try:
        text = file_path.read_text(encoding="utf-8")
    except OSError as e:
        raise GraphParseError(f"cannot read graph file: {e}", None, str(path))
    graph = parse_graph(text, source=str(path))
    logger.info(f"Loaded graph {graph.name}: {len(graph.vertices)} vertices, {len(graph.edges)} edges")
    return graph


def fixture_names() -> list[str]:
    return sorted(p.stem for p in FIXTURES_DIR.glob("*.yaml"))


def load_fixture(name: str) -> MetricGraph:
    path = FIXTURES_DIR / f"{name}.yaml"
    if not path.is_file():
        raise GraphParseError(f"no fixture named {name!r}; available: {fixture_names()}")
    return load_graph(str(path))


def graph_reference_exists(reference: str) -> bool:
    return Path(reference).is_file() or (FIXTURES_DIR / f"{reference}.yaml").is_file()


def resolve_graph(reference: str) -> MetricGraph:
    """Load a graph from a file path, or from the shipped fixtures by name."""
    if Path(reference).is_file():
        return load_graph(reference)
    return load_fixture(reference)


def dump_graph(graph: MetricGraph) -> str:
    return yaml.safe_dump(graph.to_dict(), sort_keys=False, allow_unicode=True)


def save_graph(graph: MetricGraph, path: str) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(dump_graph(graph), encoding="utf-8")
    logger.info(f"Saved graph {graph.name}: {path}")
    return path


def function_to_dict(u: GraphFunction) -> dict:
    return {
        "format": FUNCTION_FORMAT,
        "graph": u.graph.name,
        "grid": u.grid.to_dict(),
        "vertices": {v: u.vertex_value(v) for v in u.graph.vertices},
        "edges": {e.id: u.edge_values(e.id).tolist() for e in u.graph.edges},
    }


def function_from_dict(data: dict, graph: MetricGraph) -> GraphFunction:
    """
    Rebuild a GraphFunction on `graph` from its serialized form.

    Raises:
        GraphParseError: If the document does not fit the graph
    """
    if data.get("format") != FUNCTION_FORMAT:
        raise GraphParseError(f"unsupported function format {data.get('format')!r}")
    mesh = build_mesh(graph, GridSpec.from_dict(data["grid"]))
    full = np.zeros(mesh.size + 1)

    edges = data.get("edges", {})
    missing = sorted({e.id for e in graph.edges} - set(edges))
    if missing:
        raise GraphParseError(f"function has no samples for edges {missing}")
    for edge in graph.edges:
        samples = np.asarray(edges[edge.id], dtype=float)
        nodes = mesh.edge_nodes[edge.id]
        if samples.shape != nodes.shape:
            raise GraphParseError(
                f"edge {edge.id!r}: expected {len(nodes)} samples, got {len(samples)}"
            )
        if edge.is_half_line and samples[-1] != 0.0:
            raise GraphParseError(f"half-line {edge.id!r}: truncated end must be 0")
        full[nodes[1:-1]] = samples[1:-1]
    for vertex, value in data.get("vertices", {}).items():
        if vertex not in mesh.vertex_index:
            raise GraphParseError(f"unknown vertex {vertex!r}")
        full[mesh.vertex_index[vertex]] = float(value)
    return GraphFunction(mesh, full[: mesh.size])


def save_function(u: GraphFunction, path: str) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(function_to_dict(u), f, indent=2)
    logger.info(f"Saved function on {u.graph.name}: {path}")
    return path


def load_function(path: str, graph: MetricGraph) -> GraphFunction:
    with open(path, "r", encoding="utf-8") as f:
        return function_from_dict(json.load(f), graph)
