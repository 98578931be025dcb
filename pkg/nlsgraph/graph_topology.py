import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx

from nlsgraph.models import TopologyTag

logger = logging.getLogger(__name__)

# Far endpoint of a half-line. Never a vertex of a MetricGraph.
INFINITY = "INF"

# Special vertex that all half-line ends are merged into by compactify().
OMEGA = "Ω"


class GraphValidationError(ValueError):
    """A MetricGraph invariant does not hold. Names the offending edge or vertex when there is one."""

    def __init__(self, message: str, edge_id: Optional[str] = None, vertex: Optional[str] = None):
        super().__init__(message)
        self.edge_id = edge_id
        self.vertex = vertex


@dataclass(frozen=True)
class Edge:
    """A finite edge [0, length] or a half-line [0, inf) glued at its endpoints."""

    id: str
    tail: str  # endpoint at coordinate 0, always a vertex
    head: str  # endpoint at coordinate length; INFINITY for half-lines
    length: float

    @property
    def is_half_line(self) -> bool:
        return self.head == INFINITY

    @property
    def is_loop(self) -> bool:
        return self.tail == self.head

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "from": self.tail,
            "to": self.head,
            "length": "INF" if self.is_half_line else self.length,
        }


@dataclass(frozen=True)
class MetricGraph:
    """
    Connected metric graph made of finite edges and half-lines.

    Compact graphs (no half-lines) are only built internally, by compact_core(),
    with noncompact=False.
    """

    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    name: str = "graph"
    noncompact: bool = True

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))
        self._validate()

    def _validate(self):
        known = set(self.vertices)
        if len(known) != len(self.vertices):
            raise GraphValidationError("duplicate vertex ids")
        if not self.vertices:
            raise GraphValidationError("graph has no vertices")
        for reserved in (INFINITY, OMEGA):
            if reserved in known:
                raise GraphValidationError(f"vertex id {reserved!r} is reserved")

        seen: set[str] = set()
        for edge in self.edges:
            if edge.id in seen:
                raise GraphValidationError(f"duplicate edge id {edge.id!r}", edge_id=edge.id)
            seen.add(edge.id)
            if edge.tail not in known:
                raise GraphValidationError(f"edge {edge.id!r}: unknown vertex {edge.tail!r}", edge_id=edge.id)
            if edge.is_half_line:
                if not math.isinf(edge.length):
                    raise GraphValidationError(f"half-line {edge.id!r} must have infinite length", edge_id=edge.id)
            else:
                if edge.head not in known:
                    raise GraphValidationError(f"edge {edge.id!r}: unknown vertex {edge.head!r}", edge_id=edge.id)
                if not (math.isfinite(edge.length) and edge.length > 0):
                    raise GraphValidationError(
                        f"edge {edge.id!r}: length must be positive and finite, got {edge.length}", edge_id=edge.id
                    )

        if self.noncompact:
            if not any(e.is_half_line for e in self.edges):
                raise GraphValidationError("graph has no half-line")
            touched = {e.tail for e in self.edges} | {e.head for e in self.edges if not e.is_half_line}
            isolated = sorted(known - touched)
            if isolated:
                raise GraphValidationError(f"isolated vertices: {isolated}", vertex=isolated[0])
        elif any(e.is_half_line for e in self.edges):
            raise GraphValidationError("compact graph cannot carry half-lines")

        core = self.core_multigraph()
        if not nx.is_connected(core):
            reached = nx.node_connected_component(core, self.vertices[0])
            stray = next(v for v in self.vertices if v not in reached)
            edge_id = next((e.id for e in self.edges if stray in (e.tail, e.head)), None)
            raise GraphValidationError(
                f"graph is not connected: {stray!r} is unreachable from {self.vertices[0]!r}",
                edge_id=edge_id,
                vertex=stray,
            )

    @property
    def half_lines(self) -> list[Edge]:
        return [e for e in self.edges if e.is_half_line]

    @property
    def finite_edges(self) -> list[Edge]:
        return [e for e in self.edges if not e.is_half_line]

    def edge(self, edge_id: str) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(edge_id)

    def degree(self, vertex: str) -> int:
        """Combinatorial degree; a self-loop counts twice, half-lines count once."""
        return sum((e.tail == vertex) + (e.head == vertex) for e in self.edges)

    def core_multigraph(self) -> nx.MultiGraph:
        """Vertices and finite edges, weighted by length, keyed by edge id."""
        graph = nx.MultiGraph()
        graph.add_nodes_from(self.vertices)
        for e in self.finite_edges:
            graph.add_edge(e.tail, e.head, key=e.id, length=e.length)
        return graph

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "vertices": list(self.vertices),
            "edges": [e.to_dict() for e in self.edges],
        }


@dataclass(frozen=True)
class TopologyClass:
    """Existence regime of a graph together with the structures that decide it."""

    tag: TopologyTag
    terminal_points: tuple[str, ...] = field(default_factory=tuple)
    bridges: tuple[str, ...] = field(default_factory=tuple)
    half_line_count: int = 0

    def to_dict(self) -> dict:
        return {
            "tag": self.tag.value,
            "case": self.tag.case,
            "terminal_points": list(self.terminal_points),
            "bridges": list(self.bridges),
            "half_line_count": self.half_line_count,
        }


def terminal_points(graph: MetricGraph) -> set[str]:
    """Vertices of degree one. Points at infinity never count."""
    return {v for v in graph.vertices if graph.degree(v) == 1}


def compactify(graph: MetricGraph) -> nx.MultiGraph:
    """
    Merge every point at infinity into the special vertex OMEGA.

    Returns:
        MultiGraph keyed by edge id; parallel edges and self-loops are kept
    """
    multigraph = nx.MultiGraph()
    multigraph.add_nodes_from(graph.vertices)
    if graph.half_lines:
        multigraph.add_node(OMEGA)
    for e in graph.edges:
        head = OMEGA if e.is_half_line else e.head
        multigraph.add_edge(e.tail, head, key=e.id, length=e.length)
    return multigraph


def bridge_set(graph: MetricGraph) -> set[str]:
    """Edges of the graph lying on no cycle of its compactification."""
    multigraph = compactify(graph)
    # networkx never reports a parallel pair, so each bridge carries exactly one key
    return {next(iter(multigraph[u][v])) for u, v in nx.bridges(multigraph)}


def has_cycle_covering(graph: MetricGraph) -> bool:
    return not bridge_set(graph)


def classify(graph: MetricGraph) -> TopologyClass:
    """Apply the tests for cases (a), (b), (c) in order; everything else is (d)."""
    tips = tuple(sorted(terminal_points(graph)))
    bridges = tuple(sorted(bridge_set(graph)))
    half_lines = len(graph.half_lines)

    if tips:
        tag = TopologyTag.TIP
    elif not bridges:
        tag = TopologyTag.CYCLE_COVERED
    elif half_lines == 1:
        tag = TopologyTag.ONE_HALF_LINE_NO_TIP
    else:
        tag = TopologyTag.OTHER

    logger.debug(f"Classified {graph.name}: case ({tag.case}), bridges={list(bridges)}")
    return TopologyClass(tag=tag, terminal_points=tips, bridges=bridges, half_line_count=half_lines)


def compact_core(graph: MetricGraph) -> MetricGraph:
    """The graph without the interiors of its half-lines; all vertices are kept."""
    return MetricGraph(
        vertices=graph.vertices,
        edges=tuple(graph.finite_edges),
        name=f"{graph.name}-core",
        noncompact=False,
    )


def shortest_loop_length(graph: MetricGraph) -> Optional[float]:
    """
    Length of the shortest cycle in the compact core.

    Returns:
        The length, or None when the core is a forest
    """
    core = graph.core_multigraph()
    best: Optional[float] = None
    for tail, head, key, data in list(core.edges(keys=True, data=True)):
        length = data["length"]
        if tail == head:
            candidate = length
        else:
            core.remove_edge(tail, head, key=key)
            try:
                candidate = length + nx.shortest_path_length(core, tail, head, weight="length")
            except nx.NetworkXNoPath:
                candidate = None
            core.add_edge(tail, head, key=key, **data)
        if candidate is not None and (best is None or candidate < best):
            best = candidate
    return best


def subdivide(graph: MetricGraph, edge_id: str, at: float = 0.5) -> MetricGraph:
    """
    Split a finite edge in two at fraction `at` of its length.

    The new vertex is named "<edge>~m"; the pieces are "<edge>~1" and "<edge>~2".
    """
    target = graph.edge(edge_id)
    if target.is_half_line:
        raise GraphValidationError(f"cannot subdivide half-line {edge_id!r}")
    if not 0 < at < 1:
        raise GraphValidationError("subdivision point must lie strictly inside the edge")
    middle = f"{edge_id}~m"
    edges = []
    for e in graph.edges:
        if e.id != edge_id:
            edges.append(e)
            continue
        edges.append(Edge(f"{edge_id}~1", e.tail, middle, e.length * at))
        edges.append(Edge(f"{edge_id}~2", middle, e.head, e.length * (1 - at)))
    return MetricGraph(vertices=graph.vertices + (middle,), edges=tuple(edges), name=graph.name)
