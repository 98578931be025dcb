import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np
from scipy import integrate

from nlsgraph.config import settings
from nlsgraph.discrete import (
    GraphFunction,
    GridSpec,
    build_mesh,
    edge_lp,
    interval_lp,
    kinetic,
    lp_norm_p,
    mass,
)
from nlsgraph.graph_topology import Edge, MetricGraph, bridge_set, shortest_loop_length, terminal_points
from nlsgraph.reference import CONSTANTS

logger = logging.getLogger(__name__)

HALF_LINE = "half-line"
LINE = "line"


class TransformError(ValueError):
    """A transform was called outside its preconditions."""


class UnsupportedInputError(TransformError):
    """No continuation path from the maximum point leaves it connected to infinity."""


@dataclass
class RearrangedFunction:
    """
    Rearranged profile on [0, T] (half-line) or [-T/2, T/2] (line).

    The cell model (cell_values, cell_lengths) is the exact rearrangement;
    (x, values) is its continuous re-interpolation.
    """

    domain: str
    x: np.ndarray
    values: np.ndarray
    cell_values: np.ndarray
    cell_lengths: np.ndarray

    def cell_lp(self, p: int) -> float:
        return float(np.sum(self.cell_values**p * self.cell_lengths))

    def lp_norm_p(self, p: int) -> float:
        """Integral of the re-interpolated profile to the power p."""
        return float(np.sum(interval_lp(self.values[:-1], self.values[1:], np.diff(self.x), p)))

    def mass(self) -> float:
        return self.lp_norm_p(2)

    def kinetic(self) -> float:
        return float(np.sum(np.diff(self.values) ** 2 / np.diff(self.x)))

    def gn_quotient(self) -> float:
        m = self.mass()
        kin = self.kinetic()
        if m <= 0 or kin <= 0:
            raise TransformError("quotient undefined for a constant profile")
        return self.lp_norm_p(6) / (m * m * kin)

    def interpolation_error(self, p: int) -> float:
        """Relative change of the p-norm integral caused by re-interpolation."""
        exact = self.cell_lp(p)
        return abs(self.lp_norm_p(p) - exact) / exact if exact > 0 else 0.0

    def is_monotone(self) -> bool:
        if self.domain == HALF_LINE:
            return bool(np.all(np.diff(self.values) <= 0))
        centre = int(np.argmax(self.values))
        return bool(np.all(np.diff(self.values[: centre + 1]) >= 0) and np.all(np.diff(self.values[centre:]) <= 0))

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "mass": self.mass(),
            "kinetic": self.kinetic(),
            "cell_l2": self.cell_lp(2),
            "cell_l6": self.cell_lp(6),
            "interpolation_error": {"2": self.interpolation_error(2), "6": self.interpolation_error(6)},
        }


def _pieces(u: GraphFunction, subdivisions: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """End values and lengths of every interval of |u|, each split into equal sub-cells."""
    if subdivisions < 1:
        raise TransformError("subdivisions must be at least 1")
    a, b = u.mesh.ends(np.abs(u.values))
    return _subdivide(a, b, u.mesh.dx, subdivisions)


def _subdivide(a, b, lengths, subdivisions: int):
    if subdivisions == 1:
        return a, b, lengths
    t = np.linspace(0.0, 1.0, subdivisions + 1)
    left = (a[:, None] + (b - a)[:, None] * t[None, :-1]).ravel()
    right = (a[:, None] + (b - a)[:, None] * t[None, 1:]).ravel()
    return left, right, np.repeat(lengths / subdivisions, subdivisions)


def cell_model(u: GraphFunction, subdivisions: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """(cell mean of |u|, cell length) pairs, in mesh order."""
    a, b, lengths = _pieces(u, subdivisions)
    return (a + b) / 2, lengths


def _sorted_layout(a, b, lengths):
    """Sort cells by decreasing mean and re-interpolate at the cumulative boundaries."""
    means = (a + b) / 2
    order = np.argsort(-means, kind="stable")
    cells = means[order]
    widths = lengths[order]
    start = float(max(np.max(a), np.max(b)))
    end = float(min(np.min(a), np.min(b)))
    x = np.concatenate(([0.0], np.cumsum(widths)))
    values = np.concatenate(([start], (cells[:-1] + cells[1:]) / 2, [end]))
    return x, values, cells, widths


def _decreasing_from_pieces(a, b, lengths) -> RearrangedFunction:
    x, values, cells, widths = _sorted_layout(a, b, lengths)
    return RearrangedFunction(domain=HALF_LINE, x=x, values=values, cell_values=cells, cell_lengths=widths)


def decreasing_rearrangement(u: GraphFunction, subdivisions: int = 1) -> RearrangedFunction:
    """Nonincreasing rearrangement of |u| on the half-line."""
    return _decreasing_from_pieces(*_pieces(u, subdivisions))


def symmetric_rearrangement(u: GraphFunction, subdivisions: int = 1) -> RearrangedFunction:
    """Even, radially nonincreasing rearrangement of |u| on the line."""
    a, b, lengths = _pieces(u, subdivisions)
    x, values, cells, widths = _sorted_layout(a, b, lengths / 2)
    return RearrangedFunction(
        domain=LINE,
        x=np.concatenate((-x[::-1], x[1:])),
        values=np.concatenate((values[::-1], values[1:])),
        cell_values=np.concatenate((cells, cells)),
        cell_lengths=np.concatenate((widths, widths)),
    )


def bridge_double_graph(graph: MetricGraph) -> MetricGraph:
    """Stretch every bridge by 2 and duplicate it as `<id>/a`, `<id>/b`. Half-lines stay half-lines."""
    bridges = bridge_set(graph)
    edges: list[Edge] = []
    for e in graph.edges:
        if e.id not in bridges:
            edges.append(e)
            continue
        length = e.length if e.is_half_line else 2 * e.length
        edges.append(Edge(f"{e.id}/a", e.tail, e.head, length))
        edges.append(Edge(f"{e.id}/b", e.tail, e.head, length))
    return MetricGraph(vertices=graph.vertices, edges=tuple(edges), name=f"{graph.name}-doubled")


def bridge_double(graph: MetricGraph, u: GraphFunction) -> tuple[MetricGraph, GraphFunction]:
    """
    Carry u to the bridge-doubled graph: each copy of a bridge samples x -> u(x/2).

    Every doubled edge keeps the interval count of its original, so nodes map
    one to one and the norm identities hold to rounding.
    """
    if u.graph != graph:
        raise TransformError("function is not defined on this graph")
    bridges = bridge_set(graph)
    if not bridges:
        return graph, u

    doubled = bridge_double_graph(graph)
    grid = u.grid
    edge_n: dict[str, int] = {}
    edge_L: dict[str, float] = {}
    for e in graph.edges:
        n = grid.intervals(e)
        copies = [f"{e.id}/a", f"{e.id}/b"] if e.id in bridges else [e.id]
        factor = 2 if e.id in bridges else 1
        for copy in copies:
            edge_n[copy] = n
            if e.is_half_line:
                edge_L[copy] = factor * grid.truncation(e.id)
    edge_h = {k: v for k, v in grid.edge_h if k not in bridges}
    doubled_grid = GridSpec(h=grid.h, L=grid.L, edge_h=edge_h, edge_L=edge_L, edge_n=edge_n)
    mesh = build_mesh(doubled, doubled_grid)

    full = np.zeros(mesh.size + 1)
    for v, i in u.mesh.vertex_index.items():
        full[mesh.vertex_index[v]] = u.values[i]
    for e in graph.edges:
        samples = u.edge_values(e.id)
        copies = [f"{e.id}/a", f"{e.id}/b"] if e.id in bridges else [e.id]
        for copy in copies:
            nodes = mesh.edge_nodes[copy]
            full[nodes[1:-1]] = samples[1:-1]
    logger.debug(f"Doubled {len(bridges)} bridges of {graph.name}")
    return doubled, GraphFunction(mesh, full[: mesh.size])


@dataclass
class BridgeIdentityCheck:
    """Both sides of the bridge-doubling identities and the GN bound they imply."""

    bridges: list[str]
    l2: tuple[float, float]  # (int over doubled graph, int_G + 3 int_B)
    l6: tuple[float, float]
    kinetic: tuple[float, float]  # (doubled, original)
    bound: tuple[float, float]  # bridge_doubling_bound_check

    def max_relative_error(self) -> float:
        errors = []
        for lhs, rhs in (self.l2, self.l6, self.kinetic):
            scale = max(abs(lhs), abs(rhs), 1e-300)
            errors.append(abs(lhs - rhs) / scale)
        return max(errors)

    def to_dict(self) -> dict:
        return {
            "bridges": self.bridges,
            "l2": list(self.l2),
            "l6": list(self.l6),
            "kinetic": list(self.kinetic),
            "bound": list(self.bound),
            "max_relative_error": self.max_relative_error(),
        }


def bridge_doubling_bound_check(graph: MetricGraph, u: GraphFunction) -> tuple[float, float]:
    """
    Returns:
        (int u^6 + 3 int_B u^6, 3 ((mu + 3 mu_B) / mu_R)^2 int u'^2)
    """
    bridges = bridge_set(graph)
    lhs = lp_norm_p(u, 6) + 3 * edge_lp(u, bridges, 6)
    mu = mass(u)
    mu_b = edge_lp(u, bridges, 2)
    rhs = 3 * ((mu + 3 * mu_b) / CONSTANTS.mu_R) ** 2 * kinetic(u)
    return lhs, rhs


def bridge_identity_check(graph: MetricGraph, u: GraphFunction) -> BridgeIdentityCheck:
    bridges = sorted(bridge_set(graph))
    _, doubled = bridge_double(graph, u)
    sides = {}
    for p in (2, 6):
        sides[p] = (lp_norm_p(doubled, p), lp_norm_p(u, p) + 3 * edge_lp(u, bridges, p))
    return BridgeIdentityCheck(
        bridges=bridges,
        l2=sides[2],
        l6=sides[6],
        kinetic=(kinetic(doubled), kinetic(u)),
        bound=bridge_doubling_bound_check(graph, u),
    )


@dataclass
class TailRegularization:
    """Profile psi on [0, ell] cut at x0 and continued by an exponential tail."""

    ell: float
    x0: float
    x0_index: int
    theta: float  # half the mass of psi on [x0, ell]
    lam: Optional[float]  # tail decay rate; None when theta == 0
    m: float  # mass of psi on [ell/2, ell]
    psi0: float  # psi(x0)
    psi_start: float  # psi(0)
    v_start: float
    psi_mass: float
    psi_kinetic: float
    psi_sextic: float
    v_mass: float
    v_kinetic: float
    v_sextic: float
    tail_mass: float
    tail_kinetic: float
    tail_sextic: float
    quadrature_error: float  # closed-form tail integrals vs adaptive quadrature
    c_kinetic: float  # measured C in the kinetic estimate
    c_kinetic_bound: float
    c_sextic: float  # measured C in the L6 estimate
    c_sextic_bound: float
    x: np.ndarray = field(repr=False, default=None)
    psi: np.ndarray = field(repr=False, default=None)

    def v(self, points) -> np.ndarray:
        """The regularized profile on the half-line."""
        points = np.asarray(points, dtype=float)
        head = np.interp(points, self.x[: self.x0_index + 1], self.psi[: self.x0_index + 1])
        if self.lam is None:
            return np.where(points <= self.x0, head, 0.0)
        tail = self.psi0 * np.exp(-self.lam * np.clip(points - self.x0, 0.0, None))
        return np.where(points <= self.x0, head, tail)

    @property
    def mass_defect(self) -> float:
        return self.v_mass - (self.psi_mass - self.theta)

    @property
    def certified(self) -> bool:
        scale = max(1.0, self.psi_mass)
        return (
            self.v_start == self.psi_start
            and abs(self.mass_defect) <= 1e-10 * scale
            and 0.0 <= self.theta <= self.psi_mass
            and self.c_kinetic <= self.c_kinetic_bound * (1 + 1e-9) + 1e-12
            and self.c_sextic <= self.c_sextic_bound * (1 + 1e-9) + 1e-12
            and self.quadrature_error <= 1e-10
        )

    def to_dict(self) -> dict:
        return {
            "ell": self.ell,
            "x0": self.x0,
            "theta": self.theta,
            "lambda": self.lam,
            "m": self.m,
            "mass_defect": self.mass_defect,
            "v_mass": self.v_mass,
            "v_kinetic": self.v_kinetic,
            "v_sextic": self.v_sextic,
            "psi_mass": self.psi_mass,
            "psi_kinetic": self.psi_kinetic,
            "psi_sextic": self.psi_sextic,
            "c_kinetic": self.c_kinetic,
            "c_kinetic_bound": self.c_kinetic_bound,
            "c_sextic": self.c_sextic,
            "c_sextic_bound": self.c_sextic_bound,
            "quadrature_error": self.quadrature_error,
            "certified": self.certified,
        }


TAIL_QUADRATURE_CUTOFF = 40.0  # exp(-2t) < 1e-34 past the cutoff


def _tail_quadrature(psi0: float, lam: float) -> tuple[float, float, float]:
    # t = lam * s maps every tail onto the same O(1) integrands on a finite interval
    opts = {"epsabs": 0.0, "epsrel": 1e-13, "limit": 200}
    unit2, _ = integrate.quad(lambda t: math.exp(-2.0 * t), 0.0, TAIL_QUADRATURE_CUTOFF, **opts)
    unit6, _ = integrate.quad(lambda t: math.exp(-6.0 * t), 0.0, TAIL_QUADRATURE_CUTOFF, **opts)
    q2 = psi0**2 / lam * unit2
    qk = lam * psi0**2 * unit2
    q6 = psi0**6 / lam * unit6
    return q2, qk, q6


def tail_regularize(psi: np.ndarray, ell: float) -> TailRegularization:
    """
    Cut a nonincreasing profile at the first admissible x0 in [ell/2, ell) and add an exponential tail.

    Args:
        psi: Samples of psi on a uniform grid of [0, ell]; an even number of intervals
        ell: Length of the interval

    Raises:
        TransformError: If psi is not nonnegative and nonincreasing, or no grid point qualifies
    """
    psi = np.asarray(psi, dtype=float)
    n = len(psi) - 1
    if n < 2 or n % 2:
        raise TransformError("psi needs an even number (>= 2) of intervals")
    if not ell > 0:
        raise TransformError("ell must be positive")
    scale = max(float(np.max(np.abs(psi))), 1e-300)
    if np.any(psi < -1e-12 * scale) or np.any(np.diff(psi) > 1e-12 * scale):
        raise TransformError("psi must be nonnegative and nonincreasing")
    psi = np.clip(psi, 0.0, None)

    x = np.linspace(0.0, ell, n + 1)
    dx = np.diff(x)
    cells2 = interval_lp(psi[:-1], psi[1:], dx, 2)
    cells6 = interval_lp(psi[:-1], psi[1:], dx, 6)
    cells_kin = np.diff(psi) ** 2 / dx
    half = n // 2
    m = float(np.sum(cells2[half:]))
    # mass of psi on [x_i, ell]
    from_right = np.concatenate((np.cumsum(cells2[::-1])[::-1], [0.0]))

    x0_index = None
    for i in range(half, n):
        bound = 64.0 * math.sqrt(m) / ell**2 * from_right[i] ** 1.5
        if psi[i] ** 4 <= bound * (1 + 1e-12):
            x0_index = i
            break
    if x0_index is None:
        raise TransformError("no admissible x0 on this grid; refine the samples of psi")

    theta = 0.5 * float(from_right[x0_index])
    psi0 = float(psi[x0_index])
    head_mass = float(np.sum(cells2[:x0_index]))
    head_kin = float(np.sum(cells_kin[:x0_index]))
    head_six = float(np.sum(cells6[:x0_index]))

    if theta > 0:
        lam = psi0**2 / (2 * theta)
        tail_mass = psi0**2 / (2 * lam)
        tail_kin = lam * psi0**2 / 2
        tail_six = psi0**6 / (6 * lam)
        q2, qk, q6 = _tail_quadrature(psi0, lam)
        quadrature_error = max(
            abs(q2 - tail_mass) / max(tail_mass, 1e-300),
            abs(qk - tail_kin) / max(tail_kin, 1e-300),
            abs(q6 - tail_six) / max(tail_six, 1e-300),
        )
    else:
        # psi vanishes on [x0, ell]: extend by zero
        lam = None
        tail_mass = tail_kin = tail_six = 0.0
        quadrature_error = 0.0

    psi_mass = float(np.sum(cells2))
    psi_kin = float(np.sum(cells_kin))
    psi_six = float(np.sum(cells6))
    v_mass = head_mass + tail_mass
    v_kin = head_kin + tail_kin
    v_six = head_six + tail_six

    if theta > 0:
        c_kin = max(0.0, v_kin - psi_kin) / math.sqrt(theta)
        c_six = max(0.0, psi_six - v_six) / theta
    else:
        c_kin = c_six = 0.0

    return TailRegularization(
        ell=ell,
        x0=float(x[x0_index]),
        x0_index=x0_index,
        theta=theta,
        lam=lam,
        m=m,
        psi0=psi0,
        psi_start=float(psi[0]),
        v_start=float(psi[0]),
        psi_mass=psi_mass,
        psi_kinetic=psi_kin,
        psi_sextic=psi_six,
        v_mass=v_mass,
        v_kinetic=v_kin,
        v_sextic=v_six,
        tail_mass=tail_mass,
        tail_kinetic=tail_kin,
        tail_sextic=tail_six,
        quadrature_error=quadrature_error,
        c_kinetic=c_kin,
        c_kinetic_bound=32.0 * math.sqrt(2.0 * m) / ell**2,
        c_sextic=c_six,
        c_sextic_bound=2.0 * float(psi[half]) ** 4,
        x=x,
        psi=psi,
    )


def modified_gn_constant_bound(ell: float) -> float:
    """Upper bound for the constant C of the modified GN inequality, from the tail estimates."""
    mu_r = CONSTANTS.mu_R
    return 96.0 * math.sqrt(2.0 * mu_r) / ell**2 + 8.0 * mu_r**2.5 / ell**2


@dataclass
class ContinuationPath:
    """A simple path of length ell starting at the maximum point, as interval pieces."""

    start: int  # node index of the maximum
    pieces: list[tuple[int, float, float]]  # (interval, t0, t1), fractions of the interval
    edges: list[str]
    detached: list[dict] = field(default_factory=list)


def _interval_offsets(mesh) -> dict[str, int]:
    offsets, position = {}, 0
    for e in mesh.graph.edges:
        offsets[e.id] = position
        position += len(mesh.edge_nodes[e.id]) - 1
    return offsets


def _start_options(mesh, node: int) -> list[tuple[Edge, int, int]]:
    """Edge-ends leaving a node: (edge, local node index, direction)."""
    options = []
    if node < mesh.vertex_count:
        vertex = mesh.graph.vertices[node]
        for e in mesh.graph.edges:
            n = len(mesh.edge_nodes[e.id]) - 1
            if e.tail == vertex:
                options.append((e, 0, 1))
            if not e.is_half_line and e.head == vertex:
                options.append((e, n, -1))
        return options
    e = mesh.graph.edges[int(mesh.node_edge[node])]
    k = int(np.flatnonzero(mesh.edge_nodes[e.id] == node)[0])
    return [(e, k, 1), (e, k, -1)]


def _walks(mesh, offsets, edge: Edge, k: int, d: int, remaining: float, visited: frozenset, pieces: list):
    """Depth-first enumeration of simple paths of the remaining length."""
    n = len(mesh.edge_nodes[edge.id]) - 1
    while not ((d > 0 and k == n) or (d < 0 and k == 0)):
        interval = offsets[edge.id] + (k if d > 0 else k - 1)
        dx = mesh.dx[interval]
        if remaining <= dx:
            frac = remaining / dx
            yield pieces + [(interval, 0.0, frac) if d > 0 else (interval, 1.0 - frac, 1.0)]
            return
        pieces = pieces + [(interval, 0.0, 1.0)]
        remaining -= dx
        k += d
    if edge.is_half_line and d > 0:
        return
    vertex = edge.head if d > 0 else edge.tail
    if vertex in visited:
        return
    arrived = (edge.id, k)
    for next_edge, next_k, next_d in _start_options(mesh, mesh.vertex_index[vertex]):
        if (next_edge.id, next_k) == arrived:
            continue
        yield from _walks(mesh, offsets, next_edge, next_k, next_d, remaining, visited | {vertex}, pieces)


def _point_id(mesh, node: int, edge_id: str):
    return ("inf", edge_id) if node == mesh.zero else node


def _remainder_components(mesh, pieces, offsets) -> tuple[list[set], set]:
    """Connected components of the closure of G minus the path, and the points the path touches."""
    owner = {}
    for e in mesh.graph.edges:
        for j in range(len(mesh.edge_nodes[e.id]) - 1):
            owner[offsets[e.id] + j] = e.id
    covered = {}
    for interval, t0, t1 in pieces:
        covered[interval] = (t0, t1)

    rest = nx.Graph()
    touched = set()
    for interval in range(len(mesh.dx)):
        edge_id = owner[interval]
        left = _point_id(mesh, int(mesh.left[interval]), edge_id)
        right = _point_id(mesh, int(mesh.right[interval]), edge_id)
        if interval not in covered:
            rest.add_edge(left, right)
            continue
        t0, t1 = covered[interval]
        low = left if t0 == 0.0 else ("split", interval, t0)
        high = right if t1 == 1.0 else ("split", interval, t1)
        touched.update((low, high))
        if t0 > 0.0:
            rest.add_edge(left, low)
        if t1 < 1.0:
            rest.add_edge(high, right)
    return [set(c) for c in nx.connected_components(rest)], touched


def _point_value(mesh, values: np.ndarray, point) -> float:
    if isinstance(point, tuple) and point[0] == "split":
        _, interval, t = point
        full = mesh.padded(values)
        a, b = full[mesh.left[interval]], full[mesh.right[interval]]
        return float(a + (b - a) * t)
    if isinstance(point, tuple):
        return 0.0
    return float(values[point])


def _reaches_infinity(component: set) -> bool:
    return any(isinstance(p, tuple) and p[0] == "inf" for p in component)


def _detached(mesh, values, start, components, touched) -> list[dict]:
    detached = []
    for component in components:
        if start in component:
            continue
        levels = [_point_value(mesh, values, p) for p in component & touched]
        detached.append(
            {
                "points": len(component),
                "reaches_infinity": _reaches_infinity(component),
                "attach_level": max(levels) if levels else 0.0,
            }
        )
    return detached


def find_continuation_path(u: GraphFunction, ell: float, reattach: bool = False) -> ContinuationPath:
    """
    Path of length ell from the maximum of |u| such that the part of the graph
    left over, seen from the maximum, still reaches infinity.

    Other components of the leftover are recorded as detached, with the level
    of |u| where they hang off the path. With reattach=True the first path is
    taken even when the maximum is cut off from infinity.

    Raises:
        UnsupportedInputError: No path qualifies
    """
    mesh = u.mesh
    values = np.abs(u.values)
    start = int(np.argmax(values))
    offsets = _interval_offsets(mesh)
    visited = frozenset([mesh.graph.vertices[start]]) if start < mesh.vertex_count else frozenset()
    owner_edges = [e.id for e in mesh.graph.edges]

    first = None
    for edge, k, d in _start_options(mesh, start):
        for pieces in _walks(mesh, offsets, edge, k, d, ell, visited, []):
            components, touched = _remainder_components(mesh, pieces, offsets)
            edges = sorted({owner_edges[int(mesh.interval_edge[i])] for i, _, _ in pieces})
            path = ContinuationPath(start=start, pieces=pieces, edges=edges)
            if first is None:
                first = (path, components, touched)
            main = [c for c in components if start in c]
            if main and _reaches_infinity(main[0]):
                path.detached = _detached(mesh, values, start, components, touched)
                return path

    if first is None:
        raise UnsupportedInputError(f"no simple path of length {ell:g} leaves the maximum point")
    if not reattach:
        raise UnsupportedInputError(
            "every continuation path cuts the maximum point off from infinity; rerun with reattach enabled"
        )
    path, components, touched = first
    path.detached = _detached(mesh, values, start, components, touched)
    logger.info(f"Continuation path reattaches {len(path.detached)} components")
    return path


@dataclass
class ModifiedGNCheck:
    """Both sides of |u|_6^6 <= 3((mu - theta)/mu_R)^2 |u'|_2^2 + C theta^(1/2)."""

    theta: float
    lhs: float
    rhs_kinetic: float
    measured_C: float
    ell: float
    mu: float
    constant_bound: float
    path_edges: list[str]
    reattachments: list[dict]
    tail: TailRegularization
    step1_kinetic_ratio: float  # kinetic of the line profile over kinetic of u
    w_mass: float
    w_sextic: float
    w_kinetic: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs_kinetic + self.constant_bound * math.sqrt(self.theta) * (1 + 1e-9)

    @property
    def w_gn_holds(self) -> bool:
        return self.w_sextic <= 3 * (self.w_mass / CONSTANTS.mu_R) ** 2 * self.w_kinetic * (1 + 1e-9)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.theta, self.lhs, self.rhs_kinetic, self.measured_C

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "lhs": self.lhs,
            "rhs_kinetic": self.rhs_kinetic,
            "measured_C": self.measured_C,
            "constant_bound": self.constant_bound,
            "holds": self.holds,
            "ell": self.ell,
            "mu": self.mu,
            "path_edges": self.path_edges,
            "reattachments": self.reattachments,
            "step1_kinetic_ratio": self.step1_kinetic_ratio,
            "w": {"mass": self.w_mass, "sextic": self.w_sextic, "kinetic": self.w_kinetic, "gn_holds": self.w_gn_holds},
            "tail": self.tail.to_dict(),
        }


def modified_gn_check(
    u: GraphFunction,
    mu: Optional[float] = None,
    reattach: bool = False,
    samples: int = 1024,
    mass_budget: float = settings.check_slack,
) -> ModifiedGNCheck:
    """
    Build the line profile of u (rest of the graph on (-inf, 0], the continuation
    path on [0, ell]), regularize its tail and evaluate the modified GN inequality.

    Args:
        u: Function on a graph without terminal points
        mu: Mass of u; defaults to mass(u)
        reattach: Accept continuation paths that disconnect the graph
        samples: Uniform intervals used to resample psi on [0, ell]
        mass_budget: Allowed excess of mu over mu_R

    Raises:
        TransformError: Preconditions violated
        UnsupportedInputError: No continuation path available
    """
    graph = u.graph
    tips = terminal_points(graph)
    if tips:
        raise TransformError(f"graph has terminal points {sorted(tips)}")
    v = u.abs()
    m = mass(v)
    if m <= 0:
        raise TransformError("u must not vanish")
    if mu is None:
        mu = m
    if abs(m - mu) > 1e-8 * mu:
        raise TransformError(f"mass of u is {m:.10g}, expected {mu:.10g}")
    if mu > CONSTANTS.mu_R + mass_budget:
        raise TransformError(f"mass {mu:.6g} exceeds mu_R by more than the budget")

    loop = shortest_loop_length(graph)
    ell = loop / 2 if loop is not None else 1.0
    path = find_continuation_path(v, ell, reattach=reattach)

    mesh = v.mesh
    a, b = mesh.ends(v.values)
    in_path = np.zeros(len(mesh.dx), dtype=bool)
    path_a, path_b, path_len = [], [], []
    rest_a, rest_b, rest_len = [], [], []
    for interval, t0, t1 in path.pieces:
        in_path[interval] = True
        lo = a[interval] + (b[interval] - a[interval]) * t0
        hi = a[interval] + (b[interval] - a[interval]) * t1
        path_a.append(lo)
        path_b.append(hi)
        path_len.append(mesh.dx[interval] * (t1 - t0))
        if t0 > 0:
            rest_a.append(a[interval])
            rest_b.append(lo)
            rest_len.append(mesh.dx[interval] * t0)
        if t1 < 1:
            rest_a.append(hi)
            rest_b.append(b[interval])
            rest_len.append(mesh.dx[interval] * (1 - t1))
    free = ~in_path
    rest_a = np.concatenate((a[free], rest_a))
    rest_b = np.concatenate((b[free], rest_b))
    rest_len = np.concatenate((mesh.dx[free], rest_len))

    on_path = _decreasing_from_pieces(np.array(path_a), np.array(path_b), np.array(path_len))
    rest = _decreasing_from_pieces(rest_a, rest_b, rest_len)

    grid = np.linspace(0.0, ell, samples + 1)
    psi = np.interp(grid, on_path.x, on_path.values)
    tail = tail_regularize(psi, ell)

    lhs = lp_norm_p(v, 6)
    u_kin = kinetic(v)
    rhs_kinetic = 3 * ((mu - tail.theta) / CONSTANTS.mu_R) ** 2 * u_kin
    excess = lhs - rhs_kinetic
    if tail.theta > 0:
        measured = max(0.0, excess) / math.sqrt(tail.theta)
    else:
        measured = 0.0 if excess <= 0 else math.inf

    result = ModifiedGNCheck(
        theta=tail.theta,
        lhs=lhs,
        rhs_kinetic=rhs_kinetic,
        measured_C=measured,
        ell=ell,
        mu=mu,
        constant_bound=modified_gn_constant_bound(ell),
        path_edges=path.edges,
        reattachments=path.detached,
        tail=tail,
        step1_kinetic_ratio=(rest.kinetic() + on_path.kinetic()) / u_kin if u_kin > 0 else math.inf,
        w_mass=rest.mass() + tail.v_mass,
        w_sextic=rest.lp_norm_p(6) + tail.v_sextic,
        w_kinetic=rest.kinetic() + tail.v_kinetic,
    )
    logger.info(
        f"Modified GN on {graph.name}: theta={result.theta:.4g}, measured C={result.measured_C:.4g} "
        f"(bound {result.constant_bound:.4g})"
    )
    return result


@dataclass
class ModifiedGNFamily:
    """Modified GN checks over a family of functions, with the spread of the measured constant."""

    checks: list[ModifiedGNCheck]

    @property
    def min_measured_C(self) -> float:
        return min(c.measured_C for c in self.checks)

    @property
    def max_measured_C(self) -> float:
        return max(c.measured_C for c in self.checks)

    @property
    def window_ok(self) -> bool:
        return all(c.holds and c.tail.certified and c.measured_C <= c.constant_bound for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "count": len(self.checks),
            "min_measured_C": self.min_measured_C,
            "max_measured_C": self.max_measured_C,
            "window_ok": self.window_ok,
            "checks": [c.to_dict() for c in self.checks],
        }


def modified_gn_family(functions: list[GraphFunction], reattach: bool = False) -> ModifiedGNFamily:
    """
    Run modified_gn_check on every function of a family.

    Raises:
        TransformError: If the family is empty or a member violates the preconditions
    """
    if not functions:
        raise TransformError("empty family")
    family = ModifiedGNFamily(checks=[modified_gn_check(u, reattach=reattach) for u in functions])
    logger.info(
        f"Modified GN family of {len(family.checks)}: measured C in "
        f"[{family.min_measured_C:.4g}, {family.max_measured_C:.4g}], window ok={family.window_ok}"
    )
    return family
