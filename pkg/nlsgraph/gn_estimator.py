import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import splu

from nlsgraph.config import GNConfig, settings
from nlsgraph.discrete import (
    GraphFunction,
    GridSpec,
    Mesh,
    build_mesh,
    distance_from,
    gn_quotient,
    kinetic,
    lp_norm_p,
    mass,
    potential_dual_gradient,
    rescale_to_mass,
)
from nlsgraph.graph_topology import MetricGraph, TopologyClass, classify, terminal_points
from nlsgraph.models import TopologyTag
from nlsgraph.reference import CONSTANTS, CriticalMass, critical_mass_exact, soliton
from nlsgraph.solver import StatusCallback, random_bumps, spread_function
from nlsgraph.transforms import symmetric_rearrangement

logger = logging.getLogger(__name__)


@dataclass
class AscentRun:
    label: str
    family: str
    parameter: Optional[float]  # eps for spread starts, lambda for soliton starts
    initial: float
    final: float
    iterations: int

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "family": self.family,
            "parameter": self.parameter,
            "initial": self.initial,
            "final": self.final,
            "iterations": self.iterations,
        }


@dataclass
class GNEstimate:
    """Lower bound on K_G from quotient ascent, and the mass bound it implies."""

    K_lower: float
    maximizer: GraphFunction
    mu_upper: float
    exact: CriticalMass
    winner: AscentRun
    truncation_limited: bool  # winner is the smallest eps the truncation allows
    budget: float
    runs: list[AscentRun] = field(default_factory=list)

    def rows(self) -> list[tuple[str, float]]:
        return [(run.label, run.final) for run in self.runs]

    def to_dict(self) -> dict:
        return {
            "K_lower": self.K_lower,
            "mu_upper": self.mu_upper,
            "exact": self.exact.to_dict(),
            "winner": self.winner.to_dict(),
            "truncation_limited": self.truncation_limited,
            "budget": self.budget,
            "runs": [run.to_dict() for run in self.runs],
        }


def _log_quotient(u: GraphFunction) -> float:
    return math.log(lp_norm_p(u, 6)) - 2 * math.log(mass(u)) - math.log(kinetic(u))


def _log_quotient_gradient(u: GraphFunction) -> tuple[np.ndarray, float]:
    mesh = u.mesh
    p6 = lp_norm_p(u, 6)
    m = mass(u)
    d = kinetic(u)
    grad = (
        6 * potential_dual_gradient(u) / p6
        - 2 * (2 * (mesh.consistent_mass @ u.values)) / m
        - (2 * (mesh.stiffness @ u.values)) / d
    )
    return grad, d


def _ascend(u0: GraphFunction, config: GNConfig) -> tuple[GraphFunction, float, int]:
    """Preconditioned Armijo ascent of log Q at unit mass."""
    mesh = u0.mesh
    u = rescale_to_mass(u0, 1.0)
    value = _log_quotient(u)
    lu, shift = None, None
    tau = 1.0
    it = 0
    for it in range(1, config.max_iters + 1):
        grad, d = _log_quotient_gradient(u)
        if lu is None or abs(d - shift) > 0.25 * shift:
            lu = splu((mesh.stiffness + d * mesh.consistent_mass).tocsc())
            shift = d
        direction = d * lu.solve(grad)
        slope = float(grad @ direction)
        if slope <= 0:
            break
        tau = min(1.0, 2 * tau)
        accepted = None
        while tau >= config.min_step:
            trial_values = u.values + tau * direction
            if np.any(trial_values):
                trial = rescale_to_mass(u.with_values(trial_values), 1.0)
                if kinetic(trial) > 0:
                    trial_value = _log_quotient(trial)
                    if trial_value >= value + config.armijo * tau * slope:
                        accepted = (trial, trial_value)
                        break
            tau /= 2
        if accepted is None:
            break
        improvement = accepted[1] - value
        u, value = accepted
        if improvement < config.tolerance:
            break
    return u, math.exp(value), it


def _starts(graph: MetricGraph, mesh: Mesh, grid: GridSpec, config: GNConfig) -> list[tuple[str, str, Optional[float], GraphFunction]]:
    starts = []
    for k in range(config.eps_max_exponent + 1):
        eps = 2.0**-k
        if eps < 4.0 / grid.L:
            break
        starts.append((f"spread:eps={eps:g}", "spread", eps, spread_function(mesh, eps)))
    for vertex in graph.vertices:
        d = distance_from(mesh, vertex=vertex)
        for lam in config.lambdas:
            starts.append((f"soliton:{vertex}:lambda={lam:g}", "vertex-soliton", lam, GraphFunction(mesh, soliton(lam, d))))
    for edge in graph.half_lines:
        d = distance_from(mesh, point=(edge.id, grid.truncation(edge.id) / 2))
        for lam in config.lambdas:
            starts.append((f"midpoint:{edge.id}:lambda={lam:g}", "midpoint-soliton", lam, GraphFunction(mesh, soliton(lam, d))))
    for tip in sorted(terminal_points(graph)):
        d = distance_from(mesh, vertex=tip)
        for lam in config.lambdas:
            starts.append((f"tip:{tip}:lambda={lam:g}", "tip-half-soliton", lam, GraphFunction(mesh, soliton(lam, d))))
    rng = np.random.default_rng(config.seed)
    for k in range(config.random_starts):
        starts.append((f"random:{k}", "random", None, random_bumps(mesh, rng)))
    return starts


def maximize_quotient(
    graph: MetricGraph,
    config: Optional[GNConfig] = None,
    status_callback: StatusCallback = None,
) -> GNEstimate:
    """
    Ascend the Gagliardo-Nirenberg quotient from every start family and keep the best.

    The result is a lower bound on K_G; mu_upper = sqrt(3 / K_lower) bounds mu_G from above.
    """
    def update_status(msg: str):
        if status_callback:
            status_callback(msg)

    config = config or GNConfig()
    grid = config.grid_spec()
    mesh = build_mesh(graph, grid)
    starts = _starts(graph, mesh, grid, config)
    logger.info(f"Maximizing the GN quotient on {graph.name} from {len(starts)} starts")

    runs: list[AscentRun] = []
    best: Optional[tuple[float, GraphFunction, AscentRun]] = None
    for k, (label, family, parameter, u0) in enumerate(starts):
        update_status(f"Ascent {k + 1}/{len(starts)}: {label}")
        try:
            initial = gn_quotient(u0)
            u, value, iterations = _ascend(u0, config)
        except Exception as e:
            logger.error(f"Ascent from {label} failed: {e}")
            continue
        run = AscentRun(label=label, family=family, parameter=parameter, initial=initial, final=value, iterations=iterations)
        runs.append(run)
        if value <= initial * (1 + 1e-12):
            logger.debug(f"Ascent from {label} did not improve ({value:.8g})")
        if best is None or value > best[0]:
            best = (value, u, run)

    if best is None:
        raise RuntimeError(f"no ascent run succeeded on {graph.name}")

    value, maximizer, winner = best
    smallest_eps = min((run.parameter for run in runs if run.family == "spread"), default=None)
    estimate = GNEstimate(
        K_lower=value,
        maximizer=maximizer,
        mu_upper=math.sqrt(3.0 / value),
        exact=critical_mass_exact(classify(graph)),
        winner=winner,
        truncation_limited=winner.family == "spread" and winner.parameter == smallest_eps,
        budget=config.budget,
        runs=runs,
    )
    logger.info(f"K_lower={estimate.K_lower:.6f}, mu_upper={estimate.mu_upper:.6f} on {graph.name} ({winner.label})")
    return estimate


@dataclass
class ConsistencyReport:
    """Comparison of a GN estimate with the values implied by topology."""

    tag: TopologyTag
    K_lower: float
    mu_upper: float
    exact_K: Optional[float]
    sandwich_ok: bool
    violation: bool
    margin: Optional[float]  # mu_R - mu_upper, case (d) only
    rearrangement_quotient: Optional[float] = None  # cycle-covered graphs only
    rearrangement_ok: Optional[bool] = None
    messages: list[str] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.sandwich_ok and not self.violation and self.rearrangement_ok is not False

    def to_dict(self) -> dict:
        return {
            "tag": self.tag.value,
            "case": self.tag.case,
            "K_lower": self.K_lower,
            "mu_upper": self.mu_upper,
            "exact_K": self.exact_K,
            "sandwich_ok": self.sandwich_ok,
            "violation": self.violation,
            "margin": self.margin,
            "rearrangement_quotient": self.rearrangement_quotient,
            "rearrangement_ok": self.rearrangement_ok,
            "consistent": self.consistent,
            "messages": self.messages,
        }


def consistency_report(
    graph: MetricGraph,
    est: GNEstimate,
    tc: Optional[TopologyClass] = None,
    tol_rearr: float = settings.tol_rearr,
) -> ConsistencyReport:
    tc = tc or classify(graph)
    c = CONSTANTS
    budget = est.budget
    exact = critical_mass_exact(tc)
    exact_K = exact.gn_constant
    messages = []

    sandwich_ok = c.K_R - budget <= est.K_lower <= c.K_R_plus + budget
    if not sandwich_ok:
        messages.append(f"K_lower={est.K_lower:.6f} outside [K_R, K_R+] beyond budget {budget:g}")

    violation = exact_K is not None and est.K_lower > exact_K + budget
    if exact_K is not None:
        verdict = "violates" if violation else "consistent with"
        messages.append(f"K_lower={est.K_lower:.6f} {verdict} exact K_G={exact_K:.6f} (gap {exact_K - est.K_lower:.3g})")

    margin = None
    if tc.tag == TopologyTag.OTHER:
        margin = c.mu_R - est.mu_upper
        if margin > 0:
            messages.append(f"mu_G < mu_R detected: mu_upper={est.mu_upper:.6f}, margin {margin:.3g}")
        else:
            messages.append(f"no margin below mu_R detected (mu_upper={est.mu_upper:.6f})")

    rearranged_q = None
    rearranged_ok = None
    if tc.tag == TopologyTag.CYCLE_COVERED:
        rearranged_q = symmetric_rearrangement(est.maximizer).gn_quotient()
        rearranged_ok = est.K_lower <= rearranged_q * (1 + tol_rearr) and rearranged_q <= c.K_R + budget
        messages.append(f"symmetric rearrangement quotient {rearranged_q:.6f} (certificate {'ok' if rearranged_ok else 'failed'})")

    report = ConsistencyReport(
        tag=tc.tag,
        K_lower=est.K_lower,
        mu_upper=est.mu_upper,
        exact_K=exact_K,
        sandwich_ok=sandwich_ok,
        violation=violation,
        margin=margin,
        rearrangement_quotient=rearranged_q,
        rearrangement_ok=rearranged_ok,
        messages=messages,
    )
    if not report.consistent:
        logger.warning(f"Inconsistent GN estimate on {graph.name}: {messages}")
    return report
