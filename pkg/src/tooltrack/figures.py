"""Matplotlib figure rendering for the report path.

Figures go to files next to the delimited report output; nothing here opens
a window (the Agg canvas is used directly).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .evaluate import ErrorReport
from .pose3d import InstrumentTrack
from .synth import GroundTruth

_SERIES_KEYS = ("cum_x", "cum_y", "cum_z", "cum_roll", "cum_pitch", "cum_yaw")
_LABELS = {
    "cum_x": "x (px)",
    "cum_y": "y (px)",
    "cum_z": "z (depth)",
    "cum_roll": "roll (rad)",
    "cum_pitch": "pitch (rad)",
    "cum_yaw": "yaw (rad)",
}


def render_report_figure(report: ErrorReport, path) -> Path:
    """Bar chart of mean absolute error with std whiskers, grouped by part."""
    path = Path(path)
    parts = sorted({s.part_id for s in report.stats})
    variables = []
    for s in report.stats:
        if s.variable not in variables:
            variables.append(s.variable)
    fig = Figure(figsize=(7.0, 4.0), dpi=110)
    ax = fig.add_subplot(111)
    width = 0.8 / max(len(parts), 1)
    x = np.arange(len(variables), dtype=float)
    for i, pid in enumerate(parts):
        means = []
        stds = []
        for var in variables:
            st = report.stat(pid, var)
            means.append(st.mean_abs)
            stds.append(st.std)
        ax.bar(
            x + i * width, means, width=width, yerr=stds, capsize=3,
            label=f"part {pid}",
        )
    ax.set_xticks(x + width * (len(parts) - 1) / 2.0)
    ax.set_xticklabels(variables)
    ax.set_ylabel("mean absolute error")
    ax.set_title(f"{report.kind.upper()} error, runs={report.n_runs}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    return path


def render_track_figure(
    track: InstrumentTrack, gt: GroundTruth | None, path
) -> Path:
    """Cumulative motion per variable, estimate vs ground truth when given."""
    path = Path(path)
    fig = Figure(figsize=(10.0, 6.5), dpi=110)
    axes = fig.subplots(2, 3).ravel()
    for ax, key in zip(axes, _SERIES_KEYS):
        for pid in track.part_ids:
            s = track.series(pid)
            if len(s["frame"]) == 0:
                continue
            vals = s[key] - s[key][0]
            if key == "cum_z" and gt is not None and pid in gt.parts and s[key][0] > 0:
                # Monocular depth carries a free scale; align it for display.
                vals = vals * (gt.parts[pid].depth[0] / s[key][0])
            ax.plot(s["frame"], vals, label=f"part {pid} est")
            if gt is not None and pid in gt.parts:
                g = gt.parts[pid].series()
                ax.plot(gt.frames, g[key] - g[key][0], "--", label=f"part {pid} gt")
        ax.set_title(_LABELS[key])
        ax.set_xlabel("frame")
    axes[0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    return path
