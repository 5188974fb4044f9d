"""Optional figure rendering for exported campaigns.

The CSV is the canonical export; these plots are a quick visual pass over
the same store for humans skimming a finished run.  Rendering is headless
(Agg) and file-based so it works in CI.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import parse_scan
from .store import ResultsStore


def _open_port_count(summary: str) -> int | None:
    """Open ports in a scan summary; handles both scan renderings."""
    if summary.startswith("["):
        try:
            return sum(1 for _, is_open in parse_scan(summary) if is_open)
        except (ValueError, SyntaxError):
            return None
    if summary == "":
        return 0
    if all(part.isdigit() for part in summary.split(";")):
        return len(summary.split(";"))
    return None


def render_figures(store: ResultsStore, out_dir: str) -> list[str]:
    """Write campaign figures into out_dir; returns the created paths."""
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []
    changes = store.changes()

    # Change status distribution.
    counts: dict[str, int] = {}
    for change in changes:
        counts[change.status] = counts.get(change.status, 0) + 1
    if counts:
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.bar(list(counts.keys()), list(counts.values()), color="#4878a8")
        ax.set_ylabel("changes")
        ax.set_title("Change confirmation status")
        fig.tight_layout()
        path = os.path.join(out_dir, "statuses.png")
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    # Open-port count across the campaign, when a scan test ran.
    scan_points: list[tuple[int, int]] = []
    for record in store.results():
        if record.result_name != "ports_open":
            continue
        count = _open_port_count(record.result_summary)
        if count is not None:
            scan_points.append((record.change_id, count))
    if scan_points:
        scan_points.sort()
        fig, ax = plt.subplots(figsize=(6, 3))
        ax.step(
            [p[0] for p in scan_points],
            [p[1] for p in scan_points],
            where="mid",
            color="#a84848",
        )
        ax.set_xlabel("change id")
        ax.set_ylabel("open ports")
        ax.set_title("Open ports per change")
        fig.tight_layout()
        path = os.path.join(out_dir, "ports_open.png")
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    return written
