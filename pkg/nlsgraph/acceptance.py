import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from nlsgraph.config import GNConfig, SolverConfig, settings
from nlsgraph.discrete import (
    GraphFunction,
    GridSpec,
    build_mesh,
    distance_from,
    energy,
    energy_dual_gradient,
    gn_quotient,
    kinetic,
    mass,
    rescale_to_mass,
    stationary_residual,
)
from nlsgraph.gn_estimator import maximize_quotient
from nlsgraph.graph_io import load_fixture
from nlsgraph.graph_topology import bridge_set, classify, has_cycle_covering
from nlsgraph.models import SolverStatus, TopologyTag
from nlsgraph.reference import CONSTANTS, soliton
from nlsgraph.solver import (
    best_energy,
    concentration_probe,
    energy_scan,
    minimize_at_mass,
    random_bumps,
    sandwich_check,
    spread_function,
)
from nlsgraph.transforms import (
    bridge_identity_check,
    cell_model,
    decreasing_rearrangement,
    modified_gn_family,
    symmetric_rearrangement,
    tail_regularize,
)

logger = logging.getLogger(__name__)

EXPECTED_TOPOLOGY = {
    "line": (TopologyTag.CYCLE_COVERED, ()),
    "half_line": (TopologyTag.TIP, ("h",)),
    "tadpole": (TopologyTag.ONE_HALF_LINE_NO_TIP, ("h",)),
    "signpost": (TopologyTag.OTHER, ("post",)),
    "fig1": (TopologyTag.TIP, ("pendant",)),
    "fig2": (TopologyTag.CYCLE_COVERED, ()),
    "fig3": (TopologyTag.ONE_HALF_LINE_NO_TIP, ("h1",)),
}

SAMPLE_FIXTURES = ("line", "half_line", "tadpole", "signpost")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def random_function(graph, grid: GridSpec, rng: np.random.Generator, signed: bool = False) -> GraphFunction:
    mesh = build_mesh(graph, grid)
    u = random_bumps(mesh, rng)
    if signed:
        u = u.with_values(u.values - 0.7 * random_bumps(mesh, rng).values)
    return u


def check_soliton_mass() -> CheckResult:
    mesh = build_mesh(load_fixture("line"), GridSpec(h=1e-3, L=40.0))
    u = GraphFunction(mesh, soliton(1.0, distance_from(mesh, vertex="v")))
    error = abs(mass(u) - CONSTANTS.mu_R)
    return CheckResult("soliton mass", error <= 1e-6, f"|mass - mu_R| = {error:.3g}")


def check_soliton_energy() -> CheckResult:
    mesh = build_mesh(load_fixture("line"), GridSpec(h=1e-3, L=40.0))
    d = distance_from(mesh, vertex="v")
    e1 = energy(GraphFunction(mesh, soliton(1.0, d))).total
    e2 = energy(GraphFunction(mesh, soliton(2.0, d))).total
    return CheckResult(
        "soliton zero energy", abs(e1) <= 1e-6 and abs(e2) <= 4e-6, f"E(phi_1) = {e1:.3g}, E(phi_2) = {e2:.3g}"
    )


def check_gn_constants() -> CheckResult:
    grid = GridSpec(h=1e-3, L=40.0)
    line = build_mesh(load_fixture("line"), grid)
    half = build_mesh(load_fixture("half_line"), grid)
    q_line = gn_quotient(GraphFunction(line, soliton(1.0, distance_from(line, vertex="v"))))
    q_half = gn_quotient(GraphFunction(half, soliton(1.0, distance_from(half, vertex="v"))))
    ok = abs(q_line - CONSTANTS.K_R) <= 1e-4 and abs(q_half - CONSTANTS.K_R_plus) <= 1e-3
    return CheckResult("GN constants", ok, f"Q(line) = {q_line:.6f}, Q(half-line) = {q_half:.6f}")


def check_gradient(samples: int = 100) -> CheckResult:
    rng = np.random.default_rng(settings.seed)
    grid = GridSpec(h=5e-2, L=10.0)
    worst = 0.0
    for name in SAMPLE_FIXTURES:
        graph = load_fixture(name)
        for _ in range(samples):
            u = random_function(graph, grid, rng, signed=True)
            v = random_function(graph, grid, rng, signed=True)
            eps = 1e-5
            fd = (energy(u.with_values(u.values + eps * v.values)).total - energy(u.with_values(u.values - eps * v.values)).total) / (2 * eps)
            g = energy_dual_gradient(u)
            exact = float(g @ v.values)
            scale = abs(exact) + 1e-3 * float(np.linalg.norm(g) * np.linalg.norm(v.values))
            worst = max(worst, abs(fd - exact) / max(scale, 1e-12))
    return CheckResult("energy gradient", worst <= 1e-6, f"worst relative error {worst:.3g}")


def check_topology() -> CheckResult:
    wrong = []
    for name, (tag, bridges) in EXPECTED_TOPOLOGY.items():
        graph = load_fixture(name)
        tc = classify(graph)
        if tc.tag != tag or tuple(sorted(bridge_set(graph))) != bridges:
            wrong.append(f"{name}: {tc.tag.value} {sorted(bridge_set(graph))}")
    return CheckResult("topology classification", not wrong, "; ".join(wrong) or "all fixtures match")


def check_bridge_doubling(samples: int = 10) -> CheckResult:
    rng = np.random.default_rng(settings.seed)
    grid = GridSpec(h=5e-2, L=10.0)
    worst, violations = 0.0, 0
    for name in EXPECTED_TOPOLOGY:
        graph = load_fixture(name)
        for _ in range(samples):
            u = random_function(graph, grid, rng).abs()
            check = bridge_identity_check(graph, u)
            worst = max(worst, check.max_relative_error())
            lhs, rhs = check.bound
            if lhs > rhs * (1 + settings.check_slack):
                violations += 1
    ok = worst <= 1e-12 and violations == 0
    return CheckResult("bridge doubling", ok, f"worst identity error {worst:.3g}, bound violations {violations}")


def check_rearrangements(samples: int = 10) -> CheckResult:
    rng = np.random.default_rng(settings.seed)
    grid = GridSpec(h=2e-2, L=10.0)
    problems = []
    for name in EXPECTED_TOPOLOGY:
        graph = load_fixture(name)
        covered = has_cycle_covering(graph)
        for _ in range(samples):
            u = random_function(graph, grid, rng)
            values, lengths = cell_model(u)
            source = {p: float(np.sum(values**p * lengths)) for p in (2, 6)}
            kin = kinetic(u)
            decreasing = decreasing_rearrangement(u)
            for p in (2, 6):
                if abs(decreasing.cell_lp(p) - source[p]) > 1e-8 * source[p]:
                    problems.append(f"{name}: L{p} not preserved")
            if decreasing.kinetic() > kin * (1 + settings.tol_rearr):
                problems.append(f"{name}: decreasing kinetic increased")
            if covered and symmetric_rearrangement(u).kinetic() > kin * (1 + settings.tol_rearr):
                problems.append(f"{name}: symmetric kinetic increased")
    return CheckResult("rearrangements", not problems, "; ".join(problems[:5]) or "all samples pass")


def check_tail_regularization(samples: int = 10) -> CheckResult:
    rng = np.random.default_rng(settings.seed)
    failed = 0
    for _ in range(samples):
        ell = float(rng.uniform(0.5, 3.0))
        lam = float(rng.uniform(0.5, 4.0))
        x = np.linspace(0.0, ell, 513)
        psi = soliton(lam, x) * float(rng.uniform(0.2, 1.5))
        if not tail_regularize(psi, ell).certified:
            failed += 1
    return CheckResult("tail regularization", failed == 0, f"{failed} of {samples} profiles without certificate")


def check_modified_gn() -> CheckResult:
    tadpole = build_mesh(load_fixture("tadpole"), GridSpec(h=0.02, L=20.0))
    line = build_mesh(load_fixture("line"), GridSpec(h=0.02, L=20.0))
    d = distance_from(line, vertex="v")
    problems = []
    for name, functions in (
        ("tadpole", [rescale_to_mass(spread_function(tadpole, eps), mu) for eps in (1.0, 0.5, 0.25) for mu in (1.5, 2.0)]),
        ("line", [rescale_to_mass(GraphFunction(line, soliton(lam, d)), 2.0) for lam in (0.5, 1.0, 2.0)]),
    ):
        family = modified_gn_family(functions)
        if not family.window_ok:
            problems.append(f"{name}: C in [{family.min_measured_C:.3g}, {family.max_measured_C:.3g}]")
    return CheckResult("modified GN family", not problems, "; ".join(problems) or "every member within the bound")


def check_unbounded_probe() -> CheckResult:
    config = SolverConfig()
    missed = []
    for name in EXPECTED_TOPOLOGY:
        probe = concentration_probe(load_fixture(name), 1.1 * CONSTANTS.mu_R, config)
        hit = probe.detected
        if hit is None or not hit.scaling_ok:
            missed.append(name)
    return CheckResult("unboundedness probe", not missed, f"missed: {missed}" if missed else "detected on every fixture")


def check_tadpole_window() -> CheckResult:
    graph = load_fixture("tadpole")
    config = SolverConfig(trunc_L=200.0, step_h=1e-2)
    scan = energy_scan(graph, [round(1.0 + 0.1 * k, 10) for k in range(12)], config)
    low, high = scan.bracket
    ok = high is not None and low <= CONSTANTS.mu_R_plus <= high and high - low <= 0.2
    problems = [] if ok else [f"bracket {scan.bracket}"]
    for mu, e in zip(scan.masses, scan.energies):
        if mu in (1.0, 1.2) and not e >= -scan.budget:
            problems.append(f"mu={mu:g}: E={e:.3g} below -budget {scan.budget:.3g}")
    for mu in (1.8, 2.2, CONSTANTS.mu_R):
        result = minimize_at_mass(graph, mu, config)
        if not (
            result.status == SolverStatus.CONVERGED
            and result.energy.total <= -1e-3
            and stationary_residual(result.u, result.omega) <= 1e-3
            and result.omega > 0
        ):
            problems.append(f"mu={mu:g}: {result.status.value}, E={result.energy.total:.3g}")
    return CheckResult("tadpole existence window", not problems, "; ".join(problems) or f"bracket {scan.bracket}")


SANDWICH_MASSES = (1.0, 2.0, 2.5, 3.0)


def check_sandwich() -> CheckResult:
    config = SolverConfig()
    half_line, line = load_fixture("half_line"), load_fixture("line")
    reference = (
        [best_energy(minimize_at_mass(half_line, mu, config)) for mu in SANDWICH_MASSES],
        [best_energy(minimize_at_mass(line, mu, config)) for mu in SANDWICH_MASSES],
    )
    problems = []
    for name in EXPECTED_TOPOLOGY:
        check = sandwich_check(load_fixture(name), list(SANDWICH_MASSES), half_line, line, config, reference=reference)
        problems.extend(f"{name}: {v}" for v in check.violations())
    return CheckResult("sandwich", not problems, "; ".join(problems[:5]) or "all fixtures between half-line and line")


def check_signpost() -> CheckResult:
    graph = load_fixture("signpost")
    result = minimize_at_mass(graph, CONSTANTS.mu_R, SolverConfig())
    estimate = maximize_quotient(graph, GNConfig())
    margin = CONSTANTS.mu_R - estimate.mu_upper
    ok = result.energy.total <= -1e-3 and margin > 0
    return CheckResult("signpost below mu_R", ok, f"E(mu_R) = {result.energy.total:.4g}, margin {margin:.3g}")


FAST_CHECKS: list[Callable[[], CheckResult]] = [
    check_soliton_mass,
    check_soliton_energy,
    check_gn_constants,
    check_gradient,
    check_topology,
    check_bridge_doubling,
    check_rearrangements,
    check_tail_regularization,
    check_modified_gn,
    check_unbounded_probe,
]

SLOW_CHECKS: list[Callable[[], CheckResult]] = [
    check_tadpole_window,
    check_sandwich,
    check_signpost,
]


def run_checks(full: bool = False, status_callback: Optional[Callable[[str], None]] = None) -> list[CheckResult]:
    checks = FAST_CHECKS + (SLOW_CHECKS if full else [])
    results = []
    for check in checks:
        name = check.__name__.removeprefix("check_")
        if status_callback:
            status_callback(f"Checking {name}")
        try:
            result = check()
        except Exception as e:
            logger.error(f"Check {name} raised: {e}")
            result = CheckResult(name, False, f"raised {type(e).__name__}: {e}")
        level = logging.INFO if result.passed else logging.WARNING
        logger.log(level, f"{result.name}: {'ok' if result.passed else 'FAILED'} ({result.detail})")
        results.append(result)
    return results
