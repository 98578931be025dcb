import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional, Union

import networkx as nx
import numpy as np
from scipy import sparse

from nlsgraph.graph_topology import Edge, MetricGraph

logger = logging.getLogger(__name__)


class DiscretizationError(ValueError):
    """Invalid grid, invalid nodal data, or a functional evaluated where it is undefined."""


@dataclass(frozen=True)
class GridSpec:
    """
    Per-edge sampling of a metric graph.

    Overrides are stored as sorted (edge id, value) pairs so that a GridSpec
    stays hashable; use step(), truncation() and intervals() to read them.
    """

    h: float = 1e-2
    L: float = 40.0
    edge_h: tuple[tuple[str, float], ...] = ()
    edge_L: tuple[tuple[str, float], ...] = ()
    edge_n: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        for name in ("edge_h", "edge_L", "edge_n"):
            value = getattr(self, name)
            if isinstance(value, dict):
                value = value.items()
            object.__setattr__(self, name, tuple(sorted(value)))

        if not (math.isfinite(self.h) and self.h > 0):
            raise DiscretizationError(f"step h must be positive, got {self.h}")
        if not self.L >= 10:
            raise DiscretizationError(f"truncation L must be at least 10, got {self.L}")
        for edge_id, h in self.edge_h:
            if not h > 0:
                raise DiscretizationError(f"edge {edge_id!r}: step must be positive, got {h}")
        for edge_id, length in self.edge_L:
            if not length >= 10:
                raise DiscretizationError(f"half-line {edge_id!r}: truncation must be at least 10, got {length}")
        for edge_id, n in self.edge_n:
            if int(n) != n or n < 2:
                raise DiscretizationError(f"edge {edge_id!r}: needs at least 2 intervals, got {n}")

    def step(self, edge_id: str) -> float:
        return dict(self.edge_h).get(edge_id, self.h)

    def truncation(self, edge_id: str) -> float:
        return dict(self.edge_L).get(edge_id, self.L)

    def computational_length(self, edge: Edge) -> float:
        return self.truncation(edge.id) if edge.is_half_line else edge.length

    def intervals(self, edge: Edge) -> int:
        fixed = dict(self.edge_n).get(edge.id)
        if fixed is not None:
            return int(fixed)
        return max(2, math.ceil(self.computational_length(edge) / self.step(edge.id) - 1e-9))

    def replace(self, **changes) -> "GridSpec":
        current = {
            "h": self.h,
            "L": self.L,
            "edge_h": dict(self.edge_h),
            "edge_L": dict(self.edge_L),
            "edge_n": dict(self.edge_n),
        }
        for key, value in changes.items():
            if key in ("edge_h", "edge_L", "edge_n"):
                current[key] = {**current[key], **dict(value)}
            else:
                current[key] = value
        return GridSpec(**current)

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "L": self.L,
            "edge_h": dict(self.edge_h),
            "edge_L": dict(self.edge_L),
            "edge_n": dict(self.edge_n),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        return cls(
            h=float(data["h"]),
            L=float(data["L"]),
            edge_h={k: float(v) for k, v in data.get("edge_h", {}).items()},
            edge_L={k: float(v) for k, v in data.get("edge_L", {}).items()},
            edge_n={k: int(v) for k, v in data.get("edge_n", {}).items()},
        )


class Mesh:
    """
    Piecewise-linear nodal discretization of a metric graph.

    Free nodes are numbered vertices first, then the interior nodes of each
    edge in graph order. Index `zero` (== size) is a slot that always holds 0;
    every truncated half-line ends there.
    """

    def __init__(self, graph: MetricGraph, grid: GridSpec):
        self.graph = graph
        self.grid = grid
        self.vertex_index = {v: i for i, v in enumerate(graph.vertices)}
        self.vertex_count = len(graph.vertices)

        count = self.vertex_count
        self.edge_nodes: dict[str, np.ndarray] = {}
        self.edge_x: dict[str, np.ndarray] = {}
        node_edge = [-1] * count
        node_s = [0.0] * count
        lefts, rights, steps, owners = [], [], [], []

        for position, edge in enumerate(graph.edges):
            n = grid.intervals(edge)
            x = np.linspace(0.0, grid.computational_length(edge), n + 1)
            interior = np.arange(count, count + n - 1)
            count += n - 1
            head = -1 if edge.is_half_line else self.vertex_index[edge.head]
            nodes = np.concatenate(([self.vertex_index[edge.tail]], interior, [head])).astype(np.int64)
            self.edge_nodes[edge.id] = nodes
            self.edge_x[edge.id] = x
            node_edge.extend([position] * (n - 1))
            node_s.extend(x[1:-1].tolist())
            owners.append(np.full(n, position, dtype=np.int64))
            steps.append(np.diff(x))

        self.size = count
        self.zero = count
        for edge in graph.half_lines:
            self.edge_nodes[edge.id][-1] = self.zero
        for edge in graph.edges:
            nodes = self.edge_nodes[edge.id]
            lefts.append(nodes[:-1])
            rights.append(nodes[1:])

        self.node_edge = np.asarray(node_edge, dtype=np.int64)
        self.node_s = np.asarray(node_s, dtype=float)
        self.left = np.concatenate(lefts)
        self.right = np.concatenate(rights)
        self.dx = np.concatenate(steps)
        self.interval_edge = np.concatenate(owners)

        half = self.dx / 2
        self.lumped = (
            np.bincount(self.left, half, minlength=self.size + 1)
            + np.bincount(self.right, half, minlength=self.size + 1)
        )[: self.size]
        self.stiffness = self._assemble(np.array([1.0, -1.0, -1.0, 1.0]), 1.0 / self.dx)
        self.consistent_mass = self._assemble(np.array([2.0, 1.0, 1.0, 2.0]) / 6.0, self.dx)

        logger.debug(f"Mesh for {graph.name}: {self.size} free nodes, {len(self.dx)} intervals")

    def _assemble(self, local: np.ndarray, scale: np.ndarray) -> sparse.csr_matrix:
        rows = np.concatenate([self.left, self.left, self.right, self.right])
        cols = np.concatenate([self.left, self.right, self.left, self.right])
        data = np.concatenate([local[k] * scale for k in range(4)])
        keep = (rows < self.size) & (cols < self.size)
        matrix = sparse.coo_matrix((data[keep], (rows[keep], cols[keep])), shape=(self.size, self.size))
        return matrix.tocsr()

    def padded(self, values: np.ndarray) -> np.ndarray:
        return np.append(values, 0.0)

    def ends(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nodal values at the left and right end of every interval."""
        full = self.padded(values)
        return full[self.left], full[self.right]

    def edge_mask(self, edge_ids: Iterable[str]) -> np.ndarray:
        wanted = set(edge_ids)
        positions = [i for i, e in enumerate(self.graph.edges) if e.id in wanted]
        return np.isin(self.interval_edge, positions)

    def scatter(self, left_values: np.ndarray, right_values: np.ndarray) -> np.ndarray:
        """Sum per-interval end contributions into a free-node vector."""
        total = np.bincount(self.left, left_values, minlength=self.size + 1) + np.bincount(
            self.right, right_values, minlength=self.size + 1
        )
        return total[: self.size]


@lru_cache(maxsize=32)
def build_mesh(graph: MetricGraph, grid: GridSpec) -> Mesh:
    return Mesh(graph, grid)


@dataclass(frozen=True, eq=False)
class GraphFunction:
    """Continuous piecewise-linear function; one value per free node."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.mesh.size,):
            raise DiscretizationError(f"expected {self.mesh.size} nodal values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DiscretizationError("nodal values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def graph(self) -> MetricGraph:
        return self.mesh.graph

    @property
    def grid(self) -> GridSpec:
        return self.mesh.grid

    def edge_values(self, edge_id: str) -> np.ndarray:
        """Samples along the edge, endpoints included, in edge coordinate order."""
        return self.mesh.padded(self.values)[self.mesh.edge_nodes[edge_id]]

    def vertex_value(self, vertex: str) -> float:
        return float(self.values[self.mesh.vertex_index[vertex]])

    def with_values(self, values: np.ndarray) -> "GraphFunction":
        return GraphFunction(self.mesh, values)

    def scaled(self, factor: float) -> "GraphFunction":
        return GraphFunction(self.mesh, self.values * factor)

    def abs(self) -> "GraphFunction":
        return GraphFunction(self.mesh, np.abs(self.values))


@dataclass
class EnergyBreakdown:
    """Kinetic and potential parts of E(u) = 1/2 |u'|^2 - 1/6 |u|^6."""

    kinetic: float  # 1/2 of the integral of u'^2
    potential: float  # 1/6 of the integral of u^6
    total: float
    mass: float

    def to_dict(self) -> dict:
        return {
            "kinetic": self.kinetic,
            "potential": self.potential,
            "total": self.total,
            "mass": self.mass,
        }


def zeros(mesh: Mesh) -> GraphFunction:
    return GraphFunction(mesh, np.zeros(mesh.size))


def from_edge_function(mesh: Mesh, fn: Callable[[Edge, np.ndarray], np.ndarray]) -> GraphFunction:
    """
    Sample fn(edge, coordinates) on every edge.

    A vertex takes the value from the first incident edge end in graph order;
    truncated half-line ends are forced to zero.
    """
    full = np.zeros(mesh.size + 1)
    assigned = np.zeros(mesh.size + 1, dtype=bool)
    for edge in mesh.graph.edges:
        nodes = mesh.edge_nodes[edge.id]
        sampled = np.asarray(fn(edge, mesh.edge_x[edge.id]), dtype=float)
        fresh = ~assigned[nodes]
        full[nodes[fresh]] = sampled[fresh]
        assigned[nodes] = True
    return GraphFunction(mesh, full[: mesh.size])


def distance_from(
    mesh: Mesh,
    vertex: Optional[str] = None,
    point: Optional[tuple[str, float]] = None,
) -> np.ndarray:
    """
    Graph distance from a vertex, or from a point (edge id, coordinate), to every free node.
    """
    if (vertex is None) == (point is None):
        raise DiscretizationError("give exactly one of vertex or point")
    graph = mesh.graph
    core = graph.core_multigraph()
    source: Union[str, tuple] = vertex
    if point is not None:
        edge = graph.edge(point[0])
        s0 = float(point[1])
        source = ("source",)
        core.add_edge(source, edge.tail, length=s0)
        if not edge.is_half_line:
            core.add_edge(source, edge.head, length=edge.length - s0)
    reach = nx.single_source_dijkstra_path_length(core, source, weight="length")

    distances = np.full(mesh.size, np.inf)
    for v, i in mesh.vertex_index.items():
        distances[i] = reach.get(v, np.inf)
    for position, edge in enumerate(graph.edges):
        on_edge = mesh.node_edge == position
        s = mesh.node_s[on_edge]
        best = reach.get(edge.tail, np.inf) + s
        if not edge.is_half_line:
            best = np.minimum(best, reach.get(edge.head, np.inf) + edge.length - s)
        if point is not None and edge.id == point[0]:
            best = np.minimum(best, np.abs(s - point[1]))
        distances[on_edge] = best
    return distances


def interval_lp(a: np.ndarray, b: np.ndarray, dx: np.ndarray, p: int) -> np.ndarray:
    """
    Exact integral of |linear|^p over intervals with end values a, b and length dx.
    """
    if int(p) != p or p < 1:
        raise DiscretizationError(f"p must be a positive integer, got {p}")
    p = int(p)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aa, bb = np.abs(a), np.abs(b)
    crossing = (a * b) < 0

    same = np.zeros(np.broadcast(aa, bb).shape)
    for k in range(p + 1):
        same = same + aa**k * bb ** (p - k)
    same = same / (p + 1)

    denominator = np.where(crossing, aa + bb, 1.0)
    cross = (aa ** (p + 1) + bb ** (p + 1)) / ((p + 1) * denominator)
    return dx * np.where(crossing, cross, same)


def _interval_lp(u: GraphFunction, p: int) -> np.ndarray:
    a, b = u.mesh.ends(u.values)
    return interval_lp(a, b, u.mesh.dx, p)


def lp_norm_p(u: GraphFunction, p: int) -> float:
    """Integral of |u|^p."""
    return float(np.sum(_interval_lp(u, p)))


def mass(u: GraphFunction) -> float:
    return lp_norm_p(u, 2)


def edge_lp(u: GraphFunction, edge_ids: Iterable[str], p: int) -> float:
    """Integral of |u|^p over the given edges only."""
    mask = u.mesh.edge_mask(edge_ids)
    return float(np.sum(_interval_lp(u, p)[mask]))


def kinetic(u: GraphFunction) -> float:
    """Integral of u'^2 (without the 1/2)."""
    a, b = u.mesh.ends(u.values)
    return float(np.sum((b - a) ** 2 / u.mesh.dx))


def edge_kinetic(u: GraphFunction, edge_ids: Iterable[str]) -> float:
    a, b = u.mesh.ends(u.values)
    mask = u.mesh.edge_mask(edge_ids)
    return float(np.sum(((b - a) ** 2 / u.mesh.dx)[mask]))


def h1_norm(u: GraphFunction) -> float:
    return math.sqrt(mass(u) + kinetic(u))


def energy(u: GraphFunction) -> EnergyBreakdown:
    kin = 0.5 * kinetic(u)
    pot = lp_norm_p(u, 6) / 6.0
    return EnergyBreakdown(kinetic=kin, potential=pot, total=kin - pot, mass=mass(u))


def gn_quotient(u: GraphFunction) -> float:
    """|u|_6^6 / (|u|_2^4 |u'|_2^2)."""
    m = mass(u)
    kin = kinetic(u)
    if m <= 0:
        raise DiscretizationError("quotient undefined for the zero function")
    if kin <= 0:
        raise DiscretizationError("quotient undefined for a function with zero kinetic term")
    return lp_norm_p(u, 6) / (m * m * kin)


def potential_dual_gradient(u: GraphFunction) -> np.ndarray:
    """Derivative of 1/6 int u^6 with respect to the free nodal values."""
    a, b = u.mesh.ends(u.values)
    scale = u.mesh.dx / 42.0
    d_left = np.zeros_like(a)
    d_right = np.zeros_like(b)
    for k in range(7):
        if k >= 1:
            d_left = d_left + k * a ** (k - 1) * b ** (6 - k)
        if k <= 5:
            d_right = d_right + (6 - k) * a**k * b ** (5 - k)
    return u.mesh.scatter(scale * d_left, scale * d_right)


def energy_dual_gradient(u: GraphFunction) -> np.ndarray:
    """Derivative of E with respect to the free nodal values."""
    return u.mesh.stiffness @ u.values - potential_dual_gradient(u)


def energy_gradient(u: GraphFunction) -> GraphFunction:
    """
    Gradient of E represented in the lumped-mass inner product.

    Interior rows approximate -u'' - u^5; vertex rows carry the Kirchhoff flux balance.
    """
    return u.with_values(energy_dual_gradient(u) / u.mesh.lumped)


def inner(u: GraphFunction, v: GraphFunction) -> float:
    """Lumped-mass inner product, the one energy_gradient is represented in."""
    return float(np.sum(u.mesh.lumped * u.values * v.values))


def omega_estimate(u: GraphFunction) -> float:
    """Multiplier of u'' + u^5 = omega u, from testing the equation against u."""
    m = mass(u)
    if m <= 0:
        raise DiscretizationError("omega is undefined for zero mass")
    return (lp_norm_p(u, 6) - kinetic(u)) / m


def stationary_residual(u: GraphFunction, omega: float) -> float:
    """
    Discrete L2 norm of -u'' - u^5 + omega u plus the vertex flux defects, over the H1 norm of u.
    """
    if not np.any(u.values):
        return 0.0
    mesh = u.mesh
    r = mesh.stiffness @ u.values - potential_dual_gradient(u) + omega * (mesh.consistent_mass @ u.values)
    nv = mesh.vertex_count
    interior = np.sum(r[nv:] ** 2 / mesh.lumped[nv:])
    flux = np.sum(r[:nv] ** 2)
    return math.sqrt(interior + flux) / h1_norm(u)


def rescale_to_mass(u: GraphFunction, mu: float) -> GraphFunction:
    m = mass(u)
    if m <= 0:
        raise DiscretizationError("cannot rescale the zero function")
    return u.scaled(math.sqrt(mu / m))


def concentration_width(u: GraphFunction) -> float:
    """Smallest total length of cells, taken by decreasing density, that holds half the mass."""
    cell_mass = _interval_lp(u, 2)
    total = float(np.sum(cell_mass))
    if total <= 0:
        raise DiscretizationError("width is undefined for zero mass")
    dx = u.mesh.dx
    order = np.argsort(-(cell_mass / dx), kind="stable")
    cumulative = np.cumsum(cell_mass[order])
    half = total / 2
    k = int(np.searchsorted(cumulative, half))
    before = cumulative[k - 1] if k > 0 else 0.0
    width = float(np.sum(dx[order[:k]]))
    return width + dx[order[k]] * (half - before) / cell_mass[order[k]]


def _edge_origin(graph: MetricGraph, edge: Edge) -> str:
    """Which end of the edge the rescaling is anchored at: 'tail' or 'head'."""
    if edge.is_half_line:
        return "tail"
    if graph.degree(edge.tail) == 1:
        return "tail"
    if graph.degree(edge.head) == 1:
        return "head"
    raise DiscretizationError(f"edge {edge.id!r} is neither a half-line nor a terminal edge")


def concentrate(u: GraphFunction, lam: float, edge_id: str, mass_tolerance: float = 1e-3) -> GraphFunction:
    """
    Mass-preserving rescaling sqrt(lam) u(lam x) along a half-line or terminal edge.

    The coordinate x runs from the finite end of a half-line, or from the tip of
    a terminal edge. Interpolation onto the fixed grid loses mass once u(lam x)
    is under-resolved; the relative loss before the final rescale must stay
    within mass_tolerance.

    Raises:
        DiscretizationError: If u has mass off the edge, lam < 1, or the
            interpolation defect exceeds mass_tolerance
    """
    if lam < 1:
        raise DiscretizationError(f"lambda must be at least 1, got {lam}")
    graph = u.graph
    edge = graph.edge(edge_id)
    origin = _edge_origin(graph, edge)

    cell_mass = _interval_lp(u, 2)
    outside = ~u.mesh.edge_mask([edge_id])
    if np.sum(cell_mass[outside]) > 1e-12:
        offending = sorted(
            {graph.edges[i].id for i in np.unique(u.mesh.interval_edge[outside & (cell_mass > 0)])}
        )
        raise DiscretizationError(f"u is not supported on {edge_id!r}; mass found on {offending}")
    if lam == 1:
        return u

    x = u.mesh.edge_x[edge_id]
    samples = u.edge_values(edge_id)
    if origin == "tail":
        s, profile = x, samples
    else:
        s, profile = (x[-1] - x)[::-1], samples[::-1]
    rescaled = math.sqrt(lam) * np.interp(lam * s, s, profile, right=0.0)
    if origin == "head":
        rescaled = rescaled[::-1]

    full = np.zeros(u.mesh.size + 1)
    full[u.mesh.edge_nodes[edge_id]] = rescaled
    result = u.with_values(full[: u.mesh.size])
    target = mass(u)
    if target <= 0:
        raise DiscretizationError("cannot concentrate the zero function")
    defect = abs(mass(result) - target) / target
    logger.debug(f"Concentrating on {edge_id!r} with lambda={lam:g}: mass defect {defect:.3g} before rescale")
    if defect > mass_tolerance:
        raise DiscretizationError(
            f"lambda={lam:g} under-resolves u on {edge_id!r}: relative mass defect {defect:.3g} exceeds {mass_tolerance:g}"
        )
    return rescale_to_mass(result, target)
