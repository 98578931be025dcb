import csv
import json
import logging
import math
import os
from pathlib import Path
from typing import Iterable, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from slugify import slugify  # noqa: E402

from nlsgraph.config import settings  # noqa: E402
from nlsgraph.discrete import GraphFunction  # noqa: E402
from nlsgraph.transforms import RearrangedFunction  # noqa: E402

logger = logging.getLogger(__name__)

# CSV column layouts, keyed by table name
COLUMNS = {
    "scan": ("mass", "energy", "omega", "status"),
    "profile": ("edge", "s", "arclength", "value"),
    "gn": ("family", "quotient"),
    "rearranged": ("x", "value"),
}


def schema_line(table: str) -> str:
    return f"# schema: nlsgraph-{table}/{settings.csv_schema}"


def run_directory(out: str, graph_name: str, command: str) -> Path:
    """Output directory of one run: <out>/<graph slug>-<command>."""
    path = Path(out) / f"{slugify(graph_name)}-{command}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _clean(value):
    # JSON has no NaN or infinity
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_record(run_dir: Path, record: dict, name: str = "record.json") -> str:
    path = os.path.join(run_dir, name)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_clean(record), f, indent=2)
    logger.info(f"Wrote record: {path}")
    return path


def load_record(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_csv(path: str, table: str, rows: Iterable[tuple]) -> str:
    """Write rows under the versioned schema line and the column header of `table`."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(schema_line(table) + "\n")
        writer = csv.writer(f)
        writer.writerow(COLUMNS[table])
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    logger.info(f"Wrote {table} table: {path}")
    return path


def profile_rows(u: GraphFunction) -> list[tuple[str, float, float, float]]:
    """Samples along every edge in graph order, with an arclength that runs across edges."""
    rows = []
    offset = 0.0
    for edge in u.graph.edges:
        x = u.mesh.edge_x[edge.id]
        values = u.edge_values(edge.id)
        for s, value in zip(x, values):
            rows.append((edge.id, float(s), float(offset + s), float(value)))
        offset += float(x[-1])
    return rows


def rearranged_rows(r: RearrangedFunction) -> list[tuple[float, float]]:
    return [(float(x), float(v)) for x, v in zip(r.x, r.values)]


def plot_profile(u: GraphFunction, path: str, title: Optional[str] = None) -> str:
    fig, ax = plt.subplots(figsize=(8, 4))
    offset = 0.0
    for edge in u.graph.edges:
        x = u.mesh.edge_x[edge.id]
        ax.plot(offset + x, u.edge_values(edge.id), linewidth=1, label=edge.id)
        ax.axvline(offset, color="0.85", linewidth=0.5)
        offset += float(x[-1])
    ax.set_xlabel("arclength (edges unrolled in graph order)")
    ax.set_ylabel("u")
    ax.set_title(title or u.graph.name)
    if len(u.graph.edges) <= 12:
        ax.legend(fontsize="small", ncol=2)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    logger.info(f"Wrote plot: {path}")
    return path


def plot_scan(masses: list[float], energies: list[float], path: str, title: str, bracket=None) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    finite = [(m, e) for m, e in zip(masses, energies) if e is not None and math.isfinite(e)]
    if finite:
        ax.plot(*zip(*finite), marker="o", linewidth=1)
    ax.axhline(0.0, color="0.6", linewidth=0.5)
    if bracket is not None:
        for m in bracket:
            if m is not None:
                ax.axvline(m, color="tab:red", linestyle="--", linewidth=0.8)
    ax.set_xlabel("mass")
    ax.set_ylabel("best energy")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    logger.info(f"Wrote plot: {path}")
    return path


def plot_rearranged(r: RearrangedFunction, path: str, title: str) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(r.x, r.values, linewidth=1)
    ax.set_xlabel("x")
    ax.set_ylabel(f"{r.domain} rearrangement")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    logger.info(f"Wrote plot: {path}")
    return path
