import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import zip_longest
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import splu

from nlsgraph.config import SolverConfig, settings
from nlsgraph.discrete import (
    EnergyBreakdown,
    GraphFunction,
    GridSpec,
    Mesh,
    build_mesh,
    concentration_width,
    distance_from,
    energy,
    energy_dual_gradient,
    from_edge_function,
    kinetic,
    lp_norm_p,
    mass,
    omega_estimate,
    rescale_to_mass,
    stationary_residual,
)
from nlsgraph.graph_topology import MetricGraph, terminal_points
from nlsgraph.models import SolverStatus
from nlsgraph.reference import soliton, soliton_energy_defect

logger = logging.getLogger(__name__)

# Type for status callback
StatusCallback = Optional[Callable[[str], None]]

SPREAD_EPSILONS = (0.5, 0.25, 0.125)
INIT_LAMBDAS = (1.0, 2.0, 4.0)

UNBOUNDED_NOTE = (
    "UnboundedBelowDetected is operational: energy below -E_cut with half-mass width "
    "below width_factor*h was detected, not proved"
)


class SolverError(ValueError):
    """Invalid mass, empty set of initial data, or violated preconditions."""


@dataclass
class IterationRecord:
    iteration: int
    energy: float
    residual: float
    omega: float
    step: float

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "energy": self.energy,
            "residual": self.residual,
            "omega": self.omega,
            "step": self.step,
        }


@dataclass
class ProbeStep:
    lam: float
    energy: float
    width: float

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "energy": self.energy, "width": self.width}


@dataclass
class ProbeFamily:
    """Concentrating trial functions anchored at one point."""

    kind: str  # "soliton" at a half-line midpoint, "half-soliton" at a tip
    anchor: str
    edge: str
    steps: list[ProbeStep] = field(default_factory=list)
    detected: bool = False
    u: Optional[GraphFunction] = field(default=None, repr=False)

    @property
    def scaling_ratio(self) -> Optional[float]:
        """E(lam)/E(lam/2) over the last doubling; 4 under exact lambda^2 scaling."""
        if len(self.steps) < 2 or self.steps[-2].energy == 0:
            return None
        return self.steps[-1].energy / self.steps[-2].energy

    @property
    def scaling_ok(self) -> bool:
        ratio = self.scaling_ratio
        return ratio is not None and abs(ratio / 4.0 - 1.0) <= 0.05

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "anchor": self.anchor,
            "edge": self.edge,
            "detected": self.detected,
            "scaling_ratio": self.scaling_ratio,
            "scaling_ok": self.scaling_ok,
            "steps": [s.to_dict() for s in self.steps],
        }


@dataclass
class ProbeResult:
    mu: float
    families: list[ProbeFamily]

    @property
    def detected(self) -> Optional[ProbeFamily]:
        for family in self.families:
            if family.detected:
                return family
        return None

    def to_dict(self) -> dict:
        hit = self.detected
        return {
            "mu": self.mu,
            "detected": hit is not None,
            "detected_by": None if hit is None else f"{hit.kind}@{hit.anchor}",
            "families": [f.to_dict() for f in self.families],
        }


@dataclass
class GroundStateResult:
    """Best candidate of the constrained minimization at one mass."""

    u: GraphFunction
    mu: float
    energy: EnergyBreakdown
    omega: float
    residual: float
    status: SolverStatus
    width: float
    start: str = ""
    iterations: list[IterationRecord] = field(default_factory=list)
    probe: Optional[ProbeResult] = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "status": self.status.value,
            "energy": self.energy.to_dict(),
            "omega": self.omega,
            "residual": self.residual,
            "width": self.width,
            "start": self.start,
            "iterations": len(self.iterations),
            "log": [r.to_dict() for r in self.iterations],
            "probe": self.probe.to_dict() if self.probe else None,
            "notes": self.notes,
        }


def spread_function(mesh: Mesh, eps: float) -> GraphFunction:
    """
    sqrt(eps) on the compact core and a spread soliton sqrt(eps) phi(eps x) on each
    half-line, shifted and clipped so it is continuous and vanishes at the truncation.
    """
    grid = mesh.grid
    root = math.sqrt(eps)

    def sample(edge, x):
        if not edge.is_half_line:
            return np.full_like(x, root)
        floor = soliton(1.0, eps * grid.truncation(edge.id))
        return root * (soliton(1.0, eps * x) - floor) / (1.0 - floor)

    return from_edge_function(mesh, sample)


def _spread_epsilons(grid: GridSpec) -> list[float]:
    return [eps for eps in SPREAD_EPSILONS if eps >= 4.0 / grid.L]


def random_bumps(mesh: Mesh, rng: np.random.Generator, bumps: int = 3) -> GraphFunction:
    graph = mesh.graph
    total = np.zeros(mesh.size)
    for _ in range(bumps):
        edge = graph.edges[int(rng.integers(len(graph.edges)))]
        reach = min(mesh.grid.computational_length(edge), 10.0)
        centre = float(rng.uniform(0.0, reach))
        width = float(rng.uniform(0.5, 2.0))
        amplitude = float(rng.uniform(0.5, 1.5))
        d = distance_from(mesh, point=(edge.id, centre))
        total += amplitude * np.exp(-((d / width) ** 2))
    return GraphFunction(mesh, total)


def labelled_inits(
    graph: MetricGraph,
    mu: float,
    count: int,
    grid: Optional[GridSpec] = None,
    seed: int = settings.seed,
) -> list[tuple[str, GraphFunction]]:
    """
    Initial data of mass mu, taken round-robin from four families, each ranked by energy.

    Returns:
        (label, function) pairs
    """
    if count < 1:
        raise SolverError("count must be at least 1")
    if not mu > 0:
        raise SolverError(f"mass must be positive, got {mu}")
    grid = grid or GridSpec()
    mesh = build_mesh(graph, grid)

    spread = [(f"spread:eps={eps:g}", spread_function(mesh, eps)) for eps in _spread_epsilons(grid)]
    at_vertices = []
    for vertex in graph.vertices:
        d = distance_from(mesh, vertex=vertex)
        for lam in INIT_LAMBDAS:
            at_vertices.append((f"soliton:{vertex}:lambda={lam:g}", GraphFunction(mesh, soliton(lam, d))))
    at_midpoints = []
    for edge in graph.half_lines:
        d = distance_from(mesh, point=(edge.id, grid.truncation(edge.id) / 2))
        for lam in INIT_LAMBDAS:
            at_midpoints.append((f"midpoint:{edge.id}:lambda={lam:g}", GraphFunction(mesh, soliton(lam, d))))
    rng = np.random.default_rng(seed)
    random = [(f"random:{k}", random_bumps(mesh, rng)) for k in range(count)]

    families = []
    for family in (spread, at_vertices, at_midpoints, random):
        scaled = [(label, rescale_to_mass(u, mu)) for label, u in family]
        scaled.sort(key=lambda item: energy(item[1]).total)
        families.append(scaled)

    chosen = []
    for row in zip_longest(*families):
        for item in row:
            if item is not None and len(chosen) < count:
                chosen.append(item)
    return chosen


def default_inits(
    graph: MetricGraph,
    mu: float,
    count: int,
    grid: Optional[GridSpec] = None,
    seed: int = settings.seed,
) -> list[GraphFunction]:
    return [u for _, u in labelled_inits(graph, mu, count, grid=grid, seed=seed)]


def _probe_family(
    mesh: Mesh,
    mu: float,
    config: SolverConfig,
    kind: str,
    anchor: str,
    edge_id: str,
    distance: np.ndarray,
) -> ProbeFamily:
    family = ProbeFamily(kind=kind, anchor=anchor, edge=edge_id)
    h_probe = mesh.grid.step(edge_id)
    threshold = config.width_factor * config.step_h
    lam = 1.0
    while lam * h_probe <= 1.0:
        u = rescale_to_mass(GraphFunction(mesh, soliton(lam, distance)), mu)
        e = energy(u).total
        width = concentration_width(u)
        family.steps.append(ProbeStep(lam=lam, energy=e, width=width))
        family.u = u
        logger.debug(f"Probe {kind}@{anchor} lambda={lam:g}: E={e:.6g}, width={width:.4g}")
        if e < -config.e_cut and width < threshold:
            family.detected = True
            break
        lam *= 2
    return family


def concentration_probe(graph: MetricGraph, mu: float, config: Optional[SolverConfig] = None) -> ProbeResult:
    """
    Concentrate solitons at half-line midpoints and half-solitons at tips, doubling lambda.

    Each family runs on a mesh refined by 4 along its own edge.
    """
    config = config or SolverConfig()
    base = config.grid_spec()
    families = []

    for edge in graph.half_lines:
        grid = base.replace(edge_h={edge.id: base.step(edge.id) / 4})
        mesh = build_mesh(graph, grid)
        d = distance_from(mesh, point=(edge.id, grid.truncation(edge.id) / 2))
        families.append(_probe_family(mesh, mu, config, "soliton", f"{edge.id}/2", edge.id, d))
        if families[-1].detected:
            return ProbeResult(mu=mu, families=families)

    for tip in sorted(terminal_points(graph)):
        edge = next(e for e in graph.edges if tip in (e.tail, e.head))
        grid = base.replace(edge_h={edge.id: base.step(edge.id) / 4})
        mesh = build_mesh(graph, grid)
        d = distance_from(mesh, vertex=tip)
        families.append(_probe_family(mesh, mu, config, "half-soliton", tip, edge.id, d))
        if families[-1].detected:
            break
    return ProbeResult(mu=mu, families=families)


class _Preconditioner:
    """LU factors of K + c M_c, refreshed when the shift c drifts by more than a quarter."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.shift: Optional[float] = None
        self.lu = None

    def solve(self, shift: float, rhs: np.ndarray) -> np.ndarray:
        if self.shift is None or abs(shift - self.shift) > 0.25 * self.shift:
            matrix = (self.mesh.stiffness + shift * self.mesh.consistent_mass).tocsc()
            self.lu = splu(matrix)
            self.shift = shift
        return self.lu.solve(rhs)


def _stalled(log: list[IterationRecord], window: int, tol: float, scale: float) -> bool:
    """True when the energy fell by at most tol * scale over the last window iterations."""
    if len(log) <= window:
        return False
    return log[-1 - window].energy - log[-1].energy <= tol * scale


def _line_search(
    u: GraphFunction, e: float, search: np.ndarray, slope: float, tau: float, mu: float, config: SolverConfig
) -> tuple[Optional[tuple[GraphFunction, float]], float]:
    """Armijo backtracking along -search, rescaled to mass mu after every trial step."""
    while tau >= config.min_step:
        trial = rescale_to_mass(u.with_values(u.values - tau * search), mu)
        e_trial = energy(trial).total
        if e_trial <= e - config.armijo * tau * slope:
            return (trial, e_trial), tau
        tau /= 2
    return None, tau


def _flow(u0: GraphFunction, mu: float, config: SolverConfig, label: str) -> GroundStateResult:
    """
    Normalized, preconditioned gradient flow from one start.

    Converged means the stationary residual is below the tolerance and the energy
    has stopped falling over the last stall_window iterations.
    """
    mesh = u0.mesh
    mc = mesh.consistent_mass
    precond = _Preconditioner(mesh)
    threshold = config.width_factor * config.step_h

    u = rescale_to_mass(u0, mu)
    e = energy(u).total
    log: list[IterationRecord] = []
    tau = config.initial_step
    status = SolverStatus.MAX_ITERS
    notes: list[str] = []
    previous = None  # (gradient direction, search direction, gradient norm) of the last step

    for it in range(config.max_iters):
        omega = omega_estimate(u)
        residual = stationary_residual(u, omega)
        log.append(IterationRecord(iteration=it, energy=e, residual=residual, omega=omega, step=tau))
        if residual <= config.tolerance and _stalled(log, config.stall_window, config.stall_tol, kinetic(u)):
            status = SolverStatus.CONVERGED
            break

        dual = energy_dual_gradient(u)
        shift = max(omega, config.omega_floor)
        g = precond.solve(shift, dual)
        w = precond.solve(shift, mc @ u.values)
        uw = float(u.values @ (mc @ w))
        direction = g - float(u.values @ (mc @ g)) / uw * w
        grad_norm = float(dual @ direction)
        if grad_norm <= 0:
            if residual <= config.tolerance:
                status = SolverStatus.CONVERGED
            else:
                notes.append(f"{label}: no descent direction at iteration {it}")
            break

        search = direction
        if config.conjugate and previous is not None:
            last_direction, last_search, last_norm = previous
            gamma = max(0.0, float(dual @ (direction - last_direction)) / last_norm)
            carried = last_search - float(u.values @ (mc @ last_search)) / uw * w
            candidate = direction + gamma * carried
            if float(dual @ candidate) > 0:
                search = candidate
        slope = float(dual @ search)

        accepted, tau = _line_search(u, e, search, slope, min(config.initial_step, 2 * tau), mu, config)
        if accepted is None and search is not direction:
            # restart from the plain gradient direction
            search = direction
            accepted, tau = _line_search(u, e, search, grad_norm, config.initial_step, mu, config)
        if accepted is None:
            # no decrease left at machine precision
            if residual <= config.tolerance:
                status = SolverStatus.CONVERGED
            else:
                notes.append(f"{label}: line search stalled at iteration {it}")
            break
        previous = (direction, search, grad_norm)
        u, e = accepted

        if e < -config.e_cut and concentration_width(u) < threshold:
            status = SolverStatus.UNBOUNDED_BELOW
            log.append(IterationRecord(iteration=it + 1, energy=e, residual=math.nan, omega=omega, step=tau))
            break

    omega = omega_estimate(u)
    return GroundStateResult(
        u=u,
        mu=mu,
        energy=energy(u),
        omega=omega,
        residual=stationary_residual(u, omega),
        status=status,
        width=concentration_width(u),
        start=label,
        iterations=log,
        notes=notes,
    )


def minimize_at_mass(
    graph: MetricGraph,
    mu: float,
    config: Optional[SolverConfig] = None,
    inits: Optional[list[GraphFunction]] = None,
    status_callback: StatusCallback = None,
) -> GroundStateResult:
    """
    Minimize E over functions of mass mu by normalized gradient flow from several starts.

    Args:
        graph: Noncompact metric graph
        mu: Target mass
        config: Solver parameters; defaults from settings
        inits: Initial functions; default_inits when omitted
        status_callback: Optional callback to report progress

    Returns:
        The lowest-energy converged result, an UnboundedBelowDetected result as soon
        as a probe or a flow detects concentration, or the best MaxIters result

    Raises:
        SolverError: Invalid mass, empty init set, or every start failed
    """
    def update_status(msg: str):
        if status_callback:
            status_callback(msg)

    if not (math.isfinite(mu) and mu > 0):
        raise SolverError(f"mass must be positive, got {mu}")
    config = config or SolverConfig()

    if config.probe:
        update_status(f"Probing concentration at mu={mu:g}")
        probe = concentration_probe(graph, mu, config)
        hit = probe.detected
        if hit is not None:
            u = hit.u
            omega = omega_estimate(u)
            logger.info(f"Probe detected unbounded energy on {graph.name} at mu={mu:g} ({hit.kind}@{hit.anchor})")
            return GroundStateResult(
                u=u,
                mu=mu,
                energy=energy(u),
                omega=omega,
                residual=stationary_residual(u, omega),
                status=SolverStatus.UNBOUNDED_BELOW,
                width=hit.steps[-1].width,
                start=f"probe:{hit.kind}@{hit.anchor}",
                probe=probe,
                notes=[UNBOUNDED_NOTE],
            )
    else:
        probe = None

    if inits is None:
        labelled = labelled_inits(graph, mu, config.multi_start, grid=config.grid_spec(), seed=config.seed)
    else:
        labelled = [(f"init:{k}", u) for k, u in enumerate(inits)]
    if not labelled:
        raise SolverError("no initial functions")

    logger.info(f"Minimizing on {graph.name} at mu={mu:g} from {len(labelled)} starts")
    results: list[GroundStateResult] = []
    notes: list[str] = []
    for k, (label, u0) in enumerate(labelled):
        update_status(f"Start {k + 1}/{len(labelled)}: {label}")
        try:
            result = _flow(u0, mu, config, label)
        except Exception as e:
            logger.error(f"Start {label} failed: {e}")
            notes.append(f"{label}: failed: {e}")
            continue
        notes.extend(result.notes)
        if result.status == SolverStatus.UNBOUNDED_BELOW:
            result.probe = probe
            result.notes = notes + [UNBOUNDED_NOTE]
            logger.info(f"Flow from {label} concentrated: E={result.energy.total:.4g}")
            return result
        if result.status != SolverStatus.CONVERGED:
            logger.warning(f"Start {label} ended with {result.status.value}, residual={result.residual:.3g}")
        results.append(result)

    if not results:
        raise SolverError(f"every start failed on {graph.name} at mu={mu:g}")

    converged = [r for r in results if r.status == SolverStatus.CONVERGED]
    pool = converged or results
    best = min(pool, key=lambda r: r.energy.total)
    best.probe = probe
    best.notes = notes
    logger.info(
        f"Best at mu={mu:g}: {best.status.value}, E={best.energy.total:.6g}, "
        f"omega={best.omega:.4g}, residual={best.residual:.3g} ({best.start})"
    )
    return best


@dataclass
class EnergyScan:
    """Best energies over a grid of masses and the critical-mass bracket they imply."""

    masses: list[float]
    energies: list[float]
    statuses: list[SolverStatus]
    omegas: list[float]
    residuals: list[float]
    budget: float
    bracket: tuple[float, Optional[float]]
    unbounded_onset: Optional[float]
    monotone: bool
    results: list[Optional[GroundStateResult]] = field(default_factory=list, repr=False)
    errors: dict[str, str] = field(default_factory=dict)

    def rows(self) -> list[tuple[float, float, float, str]]:
        return [
            (m, e, w, s.value) for m, e, w, s in zip(self.masses, self.energies, self.omegas, self.statuses)
        ]

    def to_dict(self) -> dict:
        return {
            "masses": self.masses,
            "energies": self.energies,
            "statuses": [s.value for s in self.statuses],
            "omegas": self.omegas,
            "residuals": self.residuals,
            "budget": self.budget,
            "bracket": list(self.bracket),
            "unbounded_onset": self.unbounded_onset,
            "monotone_observed": self.monotone,
            "errors": self.errors,
        }


def scan_budget(config: SolverConfig) -> float:
    """
    Energy threshold below which a scan point counts as negative: ten times the
    energy the discretization gives the zero-energy soliton at the scan's h and L.
    """
    return 10.0 * abs(soliton_energy_defect(1.0, config.trunc_L, config.step_h))


def _scan_point(graph: MetricGraph, mu: float, config: SolverConfig) -> GroundStateResult:
    return minimize_at_mass(graph, mu, config)


def energy_scan(
    graph: MetricGraph,
    mass_grid: list[float],
    config: Optional[SolverConfig] = None,
    workers: int = 1,
    status_callback: StatusCallback = None,
) -> EnergyScan:
    """
    Run minimize_at_mass at every grid mass; a failing point is recorded, never fatal.

    With workers > 1 the points run in a process pool; results are merged in grid order.
    """
    def update_status(msg: str):
        if status_callback:
            status_callback(msg)

    if not mass_grid:
        raise SolverError("mass grid is empty")
    if any(b <= a for a, b in zip(mass_grid, mass_grid[1:])) or mass_grid[0] <= 0:
        raise SolverError("mass grid must be positive and strictly increasing")
    config = config or SolverConfig()
    budget = scan_budget(config)
    logger.info(f"Scanning {graph.name} over {len(mass_grid)} masses, budget={budget:.3g}")

    results: list[Optional[GroundStateResult]] = [None] * len(mass_grid)
    errors: dict[str, str] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_scan_point, graph, mu, config) for mu in mass_grid]
            for k, future in enumerate(futures):
                try:
                    results[k] = future.result()
                except Exception as e:
                    logger.error(f"Scan point mu={mass_grid[k]:g} failed: {e}")
                    errors[f"{mass_grid[k]:g}"] = str(e)
                update_status(f"Scanned {k + 1}/{len(mass_grid)}")
    else:
        for k, mu in enumerate(mass_grid):
            update_status(f"Scanning mu={mu:g} ({k + 1}/{len(mass_grid)})")
            try:
                results[k] = _scan_point(graph, mu, config)
            except Exception as e:
                logger.error(f"Scan point mu={mu:g} failed: {e}")
                errors[f"{mu:g}"] = str(e)

    energies, statuses, omegas, residuals = [], [], [], []
    for result in results:
        if result is None:
            energies.append(math.nan)
            statuses.append(SolverStatus.FAILED)
            omegas.append(math.nan)
            residuals.append(math.nan)
        else:
            energies.append(result.energy.total)
            statuses.append(result.status)
            omegas.append(result.omega)
            residuals.append(result.residual)

    first_negative = None
    onset = None
    for k, (e, status) in enumerate(zip(energies, statuses)):
        if status == SolverStatus.UNBOUNDED_BELOW and onset is None:
            onset = mass_grid[k]
        if first_negative is None and (status == SolverStatus.UNBOUNDED_BELOW or e < -budget):
            first_negative = k
    if first_negative is None:
        bracket = (mass_grid[-1], None)
    elif first_negative == 0:
        bracket = (mass_grid[0], mass_grid[0])
    else:
        bracket = (mass_grid[first_negative - 1], mass_grid[first_negative])

    finite = [e for e, s in zip(energies, statuses) if s not in (SolverStatus.FAILED, SolverStatus.UNBOUNDED_BELOW)]
    monotone = all(b <= a + budget for a, b in zip(finite, finite[1:]))

    scan = EnergyScan(
        masses=list(mass_grid),
        energies=energies,
        statuses=statuses,
        omegas=omegas,
        residuals=residuals,
        budget=budget,
        bracket=bracket,
        unbounded_onset=onset,
        monotone=monotone,
        results=results,
        errors=errors,
    )
    logger.info(f"Scan of {graph.name} done: bracket={bracket}, unbounded onset={onset}")
    return scan


def best_energy(result: GroundStateResult) -> float:
    """
    Estimate of the infimum at the result's mass: -inf once concentration was
    detected, else the computed energy capped at 0, since mass escaping along a
    half-line keeps the infimum nonpositive.
    """
    if result.status == SolverStatus.UNBOUNDED_BELOW:
        return -math.inf
    return min(result.energy.total, 0.0)


@dataclass
class SandwichCheck:
    """Per-mass best energies of a graph against the half-line and the line."""

    graph: str
    masses: list[float]
    half_line: list[float]
    energies: list[float]
    line: list[float]
    budget: float

    def violations(self) -> list[str]:
        found = []
        for mu, low, mid, high in zip(self.masses, self.half_line, self.energies, self.line):
            if not low <= mid + self.budget:
                found.append(f"mu={mu:g}: half-line {low:.4g} above {self.graph} {mid:.4g}")
            if not mid <= high + self.budget:
                found.append(f"mu={mu:g}: {self.graph} {mid:.4g} above line {high:.4g}")
        return found

    @property
    def holds(self) -> bool:
        return not self.violations()

    def to_dict(self) -> dict:
        return {
            "graph": self.graph,
            "masses": self.masses,
            "half_line": self.half_line,
            "energies": self.energies,
            "line": self.line,
            "budget": self.budget,
            "holds": self.holds,
            "violations": self.violations(),
        }


def sandwich_check(
    graph: MetricGraph,
    masses: list[float],
    half_line: MetricGraph,
    line: MetricGraph,
    config: Optional[SolverConfig] = None,
    reference: Optional[tuple[list[float], list[float]]] = None,
) -> SandwichCheck:
    """
    Compare best energies of graph with those of the half-line and the line at every mass.

    Args:
        reference: Precomputed (half-line, line) best energies over masses, to share
            them between graphs

    Raises:
        SolverError: If the mass list is empty or a minimization fails outright
    """
    if not masses:
        raise SolverError("mass list is empty")
    config = config or SolverConfig()
    if reference is None:
        reference = (
            [best_energy(minimize_at_mass(half_line, mu, config)) for mu in masses],
            [best_energy(minimize_at_mass(line, mu, config)) for mu in masses],
        )
    low, high = reference
    check = SandwichCheck(
        graph=graph.name,
        masses=list(masses),
        half_line=list(low),
        energies=[best_energy(minimize_at_mass(graph, mu, config)) for mu in masses],
        line=list(high),
        budget=scan_budget(config),
    )
    if check.holds:
        logger.info(f"Sandwich holds on {graph.name} over {len(masses)} masses")
    else:
        logger.warning(f"Sandwich fails on {graph.name}: {'; '.join(check.violations())}")
    return check


def scaling_subhomogeneity_check(u: GraphFunction, mu_target: float) -> tuple[float, float]:
    """
    Returns:
        (E(sqrt(mu/m) u), (mu/m) E(u)); the first is strictly smaller when mu > m

    Raises:
        SolverError: If E(u) > 0, u vanishes, or mu_target < mass(u)
    """
    e = energy(u)
    if e.total > 0:
        raise SolverError("energy of u must be nonpositive")
    if lp_norm_p(u, 6) <= 0:
        raise SolverError("u must not vanish")
    m = mass(u)
    if mu_target < m:
        raise SolverError(f"target mass {mu_target:g} is below the mass {m:g} of u")
    ratio = mu_target / m
    lhs = energy(u.scaled(math.sqrt(ratio))).total
    return lhs, ratio * e.total
