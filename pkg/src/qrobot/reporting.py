"""Result serialization and figure rendering.

Files written here are byte-deterministic for a given payload: JSON is
emitted with sorted keys and no timestamps, CSV uses a fixed header and a
fixed float format (9 significant digits).  Figures are an optional report
companion rendered next to the delimited output; they are not part of the
determinism contract.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Iterable

from .machine import TARIFF
from .scaling import ScalingRow

ARTIFACT_NAME = "qrobot"
ARTIFACT_VERSION = "0.1.0"

SWEEP_CSV_HEADER = (
    "variant,d,N,M,grover_iterations,steps_total,"
    "computation_steps,action_steps,carry_ops,max_entropy_bits"
)


def provenance() -> dict:
    """Version and tariff echo attached to every JSON document."""
    return {
        "artifact": ARTIFACT_NAME,
        "version": ARTIFACT_VERSION,
        "tariff": dict(sorted(TARIFF.items())),
    }


def format_float(x: float) -> str:
    return f"{x:.9g}"


def render_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def render_sweep_csv(rows: Iterable[ScalingRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_CSV_HEADER.split(","))
    for r in rows:
        writer.writerow(
            [
                r.variant,
                r.d,
                r.N,
                r.M,
                r.grover_iterations,
                r.steps_total,
                r.computation_steps,
                r.action_steps,
                r.carry_ops,
                format_float(r.max_entropy_bits),
            ]
        )
    return buf.getvalue()


def render_trace_tsv(rows: Iterable[tuple]) -> str:
    return "".join("\t".join(str(c) for c in row) + "\n" for row in rows)


def render_pairs_csv(header: tuple[str, ...], rows: Iterable[tuple]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(c) if isinstance(c, float) else c for c in row])
    return buf.getvalue()


# -- figures -----------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_sweep_figure(rows: list[ScalingRow], path: str) -> None:
    """Log-log steps vs N, one line per (variant, d)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.2))
    series: dict[tuple[str, int], list[ScalingRow]] = {}
    for r in rows:
        series.setdefault((r.variant, r.d), []).append(r)
    for (variant, d), group in sorted(series.items()):
        group = sorted(group, key=lambda r: r.N)
        ax.loglog(
            [r.N for r in group],
            [r.steps_total for r in group],
            marker="o",
            label=f"{variant} d={d}",
        )
    ax.set_xlabel("grid side N")
    ax.set_ylabel("steps")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_series_figure(
    points: list[tuple], path: str, xlabel: str, ylabel: str, title: str = ""
) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.plot([p[0] for p in points], [p[1] for p in points], marker=".", lw=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_trace_figure(rows: list[tuple], d: int, path: str) -> None:
    """Robot path for d=2, otherwise first-coordinate series."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5) if d == 2 else (6, 4.2))
    positions = [tuple(int(c) for c in row[2].split(",")) for row in rows]
    if d == 2:
        ax.plot([p[0] for p in positions], [p[1] for p in positions], "-o", ms=3)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_aspect("equal")
    else:
        ax.plot(range(len(positions)), [p[0] for p in positions], "-o", ms=3)
        ax.set_xlabel("step")
        ax.set_ylabel("x1")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
