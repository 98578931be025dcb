import logging
import os
from datetime import datetime
from typing import Callable, Optional

from nlsgraph import report
from nlsgraph.acceptance import run_checks
from nlsgraph.config import RunConfig, settings
from nlsgraph.discrete import gn_quotient, kinetic
from nlsgraph.gn_estimator import consistency_report, maximize_quotient
from nlsgraph.graph_io import load_function, resolve_graph, save_function, save_graph
from nlsgraph.graph_topology import classify, has_cycle_covering, shortest_loop_length
from nlsgraph.models import Command, SolverStatus, TopologyTag, TransformName
from nlsgraph.reference import CONSTANTS, critical_mass_exact
from nlsgraph.solver import UNBOUNDED_NOTE, energy_scan, minimize_at_mass
from nlsgraph.transforms import (
    bridge_double,
    bridge_double_graph,
    bridge_identity_check,
    decreasing_rearrangement,
    modified_gn_check,
    symmetric_rearrangement,
)

logger = logging.getLogger(__name__)

# Type for status callback
StatusCallback = Optional[Callable[[str], None]]

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INVALID = 2
EXIT_UNBOUNDED = 3
EXIT_MAX_ITERS = 4
EXIT_CHECK_FAILED = 5

STATUS_EXIT = {
    SolverStatus.CONVERGED: EXIT_OK,
    SolverStatus.UNBOUNDED_BELOW: EXIT_UNBOUNDED,
    SolverStatus.MAX_ITERS: EXIT_MAX_ITERS,
    SolverStatus.FAILED: EXIT_UNEXPECTED,
}

DETECTED_NOTE = "numerical evidence at finite resolution: results are detected, not proved"


def _record(config: RunConfig, result: dict, notes: Optional[list[str]] = None) -> dict:
    return {
        "command": config.command.value,
        "created_at": datetime.utcnow().strftime("%Y-%m-%d %H:%M:%S"),
        "config": config.model_dump(mode="json"),
        "constants": CONSTANTS.to_dict(),
        "result": result,
        "notes": [DETECTED_NOTE] + (notes or []),
    }


def _wants(config: RunConfig, fmt: str) -> bool:
    return fmt in config.formats


def run_classify(config: RunConfig, status_callback: StatusCallback = None) -> tuple[dict, int]:
    def update_status(msg: str):
        if status_callback:
            status_callback(msg)

    graph = resolve_graph(config.graph)
    update_status(f"Classifying {graph.name}")
    tc = classify(graph)
    critical = critical_mass_exact(tc)
    summary = f"case ({tc.tag.case}), {critical.describe()}"
    logger.info(f"{graph.name}: {summary}")
    result = {
        "graph": graph.name,
        "summary": summary,
        "topology": tc.to_dict(),
        "critical_mass": critical.to_dict(),
        "shortest_loop": shortest_loop_length(graph),
    }
    record = _record(config, result)
    if _wants(config, "json"):
        report.write_record(report.run_directory(config.out, graph.name, config.command.value), record)
    return record, EXIT_OK


def run_solve(config: RunConfig, status_callback: StatusCallback = None) -> tuple[dict, int]:
    graph = resolve_graph(config.graph)
    run_dir = report.run_directory(config.out, graph.name, config.command.value)
    result = minimize_at_mass(graph, config.mass, config.solver, status_callback=status_callback)

    artifacts = [save_function(result.u, os.path.join(run_dir, "function.json"))]
    if _wants(config, "csv"):
        artifacts.append(report.write_csv(os.path.join(run_dir, "profile.csv"), "profile", report.profile_rows(result.u)))
    if _wants(config, "plot"):
        title = f"{graph.name}, mu={config.mass:g}: {result.status.value}"
        artifacts.append(report.plot_profile(result.u, os.path.join(run_dir, "profile.svg"), title))

    record = _record(config, {**result.to_dict(), "artifacts": artifacts}, notes=result.notes)
    if _wants(config, "json"):
        report.write_record(run_dir, record)
    return record, STATUS_EXIT[result.status]


def run_scan(config: RunConfig, status_callback: StatusCallback = None) -> tuple[dict, int]:
    graph = resolve_graph(config.graph)
    run_dir = report.run_directory(config.out, graph.name, config.command.value)
    scan = energy_scan(graph, config.mass_grid, config.solver, workers=config.workers, status_callback=status_callback)

    artifacts = []
    if _wants(config, "csv"):
        artifacts.append(report.write_csv(os.path.join(run_dir, "scan.csv"), "scan", scan.rows()))
    if _wants(config, "plot"):
        artifacts.append(
            report.plot_scan(scan.masses, scan.energies, os.path.join(run_dir, "scan.svg"), graph.name, scan.bracket)
        )

    notes = [UNBOUNDED_NOTE] if scan.unbounded_onset is not None else []
    record = _record(config, {**scan.to_dict(), "artifacts": artifacts}, notes=notes)
    if _wants(config, "json"):
        report.write_record(run_dir, record)
    failed = all(s == SolverStatus.FAILED for s in scan.statuses)
    return record, EXIT_UNEXPECTED if failed else EXIT_OK


def run_gn(config: RunConfig, status_callback: StatusCallback = None) -> tuple[dict, int]:
    graph = resolve_graph(config.graph)
    run_dir = report.run_directory(config.out, graph.name, config.command.value)
    estimate = maximize_quotient(graph, config.gn, status_callback=status_callback)
    consistency = consistency_report(graph, estimate)

    artifacts = []
    if _wants(config, "csv"):
        artifacts.append(report.write_csv(os.path.join(run_dir, "gn.csv"), "gn", estimate.rows()))
    if _wants(config, "plot"):
        artifacts.append(
            report.plot_profile(estimate.maximizer, os.path.join(run_dir, "maximizer.svg"), f"{graph.name}: GN maximizer")
        )

    record = _record(
        config,
        {"estimate": estimate.to_dict(), "consistency": consistency.to_dict(), "artifacts": artifacts},
        notes=consistency.messages,
    )
    if _wants(config, "json"):
        report.write_record(run_dir, record)
    return record, EXIT_OK if consistency.consistent else EXIT_CHECK_FAILED


def _rearrangement_result(config: RunConfig, graph, run_dir) -> tuple[dict, bool, list[str]]:
    u = load_function(config.function, graph)
    covered = has_cycle_covering(graph)
    if config.transform == TransformName.DECREASING:
        rearranged = decreasing_rearrangement(u)
        asserted = True
    else:
        rearranged = symmetric_rearrangement(u)
        asserted = covered

    source_kinetic = kinetic(u)
    ratio = rearranged.kinetic() / source_kinetic if source_kinetic > 0 else None
    kinetic_ok = ratio is None or ratio <= 1 + settings.tol_rearr
    interpolation_ok = all(rearranged.interpolation_error(p) <= settings.tol_rearr for p in (2, 6))
    passed = interpolation_ok and (kinetic_ok or not asserted)

    artifacts = []
    name = config.transform.value
    if _wants(config, "csv"):
        artifacts.append(report.write_csv(os.path.join(run_dir, f"{name}.csv"), "rearranged", report.rearranged_rows(rearranged)))
    if _wants(config, "plot"):
        artifacts.append(report.plot_rearranged(rearranged, os.path.join(run_dir, f"{name}.svg"), graph.name))

    result = {
        **rearranged.to_dict(),
        "source_kinetic": source_kinetic,
        "kinetic_ratio": ratio,
        "kinetic_bound_asserted": asserted,
        "kinetic_ok": kinetic_ok,
        "source_quotient": gn_quotient(u) if source_kinetic > 0 else None,
        "passed": passed,
        "artifacts": artifacts,
    }
    return result, passed, []


def _bridge_double_result(config: RunConfig, graph, run_dir) -> tuple[dict, bool, list[str]]:
    doubled_graph = bridge_double_graph(graph)
    doubled_class = classify(doubled_graph)
    artifacts = [save_graph(doubled_graph, os.path.join(run_dir, "doubled.yaml"))]
    passed = doubled_class.tag == TopologyTag.CYCLE_COVERED
    result = {"doubled_graph": doubled_graph.name, "doubled_topology": doubled_class.to_dict()}
    notes = []
    if config.function:
        u = load_function(config.function, graph).abs()
        check = bridge_identity_check(graph, u)
        _, doubled_u = bridge_double(graph, u)
        artifacts.append(save_function(doubled_u, os.path.join(run_dir, "doubled_function.json")))
        lhs, rhs = check.bound
        bound_ok = lhs <= rhs * (1 + settings.check_slack)
        identities_ok = check.max_relative_error() <= 1e-12
        passed = passed and bound_ok and identities_ok
        result["identities"] = check.to_dict()
        result["bound_ok"] = bound_ok
        if kinetic(doubled_u) > 0:
            result["doubled_quotient"] = gn_quotient(doubled_u)
        if not identities_ok:
            notes.append(f"identity error {check.max_relative_error():.3g} exceeds 1e-12")
    result["passed"] = passed
    result["artifacts"] = artifacts
    return result, passed, notes


def _modified_gn_result(config: RunConfig, graph, run_dir) -> tuple[dict, bool, list[str]]:
    u = load_function(config.function, graph)
    check = modified_gn_check(u, reattach=config.reattach)
    passed = check.holds and check.tail.certified
    result = {**check.to_dict(), "passed": passed}
    notes = [f"reattached {len(check.reattachments)} components"] if check.reattachments else []
    return result, passed, notes


def run_transform(config: RunConfig, status_callback: StatusCallback = None) -> tuple[dict, int]:
    def update_status(msg: str):
        if status_callback:
            status_callback(msg)

    graph = resolve_graph(config.graph)
    run_dir = report.run_directory(config.out, graph.name, config.command.value)
    update_status(f"Applying {config.transform.value} on {graph.name}")

    if config.transform in (TransformName.DECREASING, TransformName.SYMMETRIC):
        result, passed, notes = _rearrangement_result(config, graph, run_dir)
    elif config.transform == TransformName.BRIDGE_DOUBLE:
        result, passed, notes = _bridge_double_result(config, graph, run_dir)
    else:
        result, passed, notes = _modified_gn_result(config, graph, run_dir)

    record = _record(config, {"transform": config.transform.value, **result}, notes=notes)
    if _wants(config, "json"):
        report.write_record(run_dir, record)
    logger.info(f"Transform {config.transform.value} on {graph.name}: {'passed' if passed else 'FAILED'}")
    return record, EXIT_OK if passed else EXIT_CHECK_FAILED


def run_selftest(config: RunConfig, status_callback: StatusCallback = None) -> tuple[dict, int]:
    """
    Run the acceptance checks in-process.

    Returns:
        (record, exit code); 5 when any check fails
    """
    start_time = datetime.utcnow()
    results = run_checks(full=config.full, status_callback=status_callback)
    failed = [r.name for r in results if not r.passed]
    stats = {
        "checks": [r.to_dict() for r in results],
        "passed": len(results) - len(failed),
        "failed": failed,
        "duration_seconds": (datetime.utcnow() - start_time).total_seconds(),
    }
    logger.info(f"Selftest: {stats['passed']}/{len(results)} checks passed")
    record = _record(config, stats)
    if _wants(config, "json"):
        run_dir = report.run_directory(config.out, "selftest", "full" if config.full else "fast")
        report.write_record(run_dir, record)
    return record, EXIT_CHECK_FAILED if failed else EXIT_OK


COMMANDS = {
    Command.CLASSIFY: run_classify,
    Command.SOLVE: run_solve,
    Command.SCAN: run_scan,
    Command.GN: run_gn,
    Command.TRANSFORM: run_transform,
    Command.SELFTEST: run_selftest,
}


def run_command(config: RunConfig, status_callback: StatusCallback = None) -> tuple[dict, int]:
    return COMMANDS[config.command](config, status_callback)
