"""Error analysis between estimated tracks and ground truth.

Reports carry the mean absolute error and its (population) standard
deviation per part and motion variable. 3D comparisons run on cumulative
series origin-aligned at the first common frame; reinitialized frames are
excluded from the statistics and counted separately. Depth is scale-aligned
at the origin frame by default, since a monocular estimate carries an
unknown scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geom2d
from .errors import DataError
from .pose3d import InstrumentTrack
from .synth import GroundTruth
from .tracker2d import Frame2DResult

_3D_VARIABLES = ("x", "y", "z", "roll", "pitch", "yaw")
_3D_UNITS = {"x": "px", "y": "px", "z": "depth", "roll": "rad", "pitch": "rad", "yaw": "rad"}

CSV_SCHEMA = "#schema=v1"
_CSV_COLUMNS = "part,variable,unit,mean_abs_err,std,n_frames,n_excluded"


@dataclass(frozen=True)
class ErrorStat:
    part_id: int
    variable: str
    unit: str
    mean_abs: float
    std: float
    n_frames: int
    n_excluded: int


@dataclass(frozen=True)
class ErrorReport:
    kind: str  # "2d" or "3d"
    stats: tuple[ErrorStat, ...]
    n_runs: int = 1

    def stat(self, part_id: int, variable: str) -> ErrorStat:
        for s in self.stats:
            if s.part_id == part_id and s.variable == variable:
                return s
        raise KeyError((part_id, variable))


def _mean_std(errors: np.ndarray) -> tuple[float, float]:
    if len(errors) == 0:
        return 0.0, 0.0
    return float(np.mean(errors)), float(np.std(errors))


def compare_2d(est: list[Frame2DResult], gt: GroundTruth) -> ErrorReport:
    """Per-frame absolute error of box center x, y and box angle.

    The ground-truth box is the minimum-area rectangle of the true projected
    corners. Angle error folds the rectangle's half-turn symmetry and is
    reported in degrees; positions are pixels. Frames where either side
    lacks the part are excluded and counted.
    """
    est_by_frame = {r.index: r for r in est}
    gt_frames = [int(n) for n in gt.frames]
    common = [n for n in gt_frames if n in est_by_frame]
    if not common:
        raise DataError("estimate and ground truth share no frames")

    stats: list[ErrorStat] = []
    for pid in sorted(gt.parts):
        gtp = gt.parts[pid]
        idx = {n: i for i, n in enumerate(gt_frames)}
        ex = []
        ey = []
        eth = []
        excluded = 0
        for n in common:
            det = est_by_frame[n].parts.get(pid)
            i = idx[n]
            if det is None or not det.present or not gtp.on_screen[i]:
                excluded += 1
                continue
            gbox = geom2d.min_area_rect(gtp.corners_px[i])
            ex.append(abs(det.box.cx - gbox.cx))
            ey.append(abs(det.box.cy - gbox.cy))
            eth.append(geom2d.angle_distance_mod_pi(det.box.theta, gbox.theta))
        for var, unit, vals in (
            ("x", "px", ex),
            ("y", "px", ey),
            ("theta", "deg", [math.degrees(v) for v in eth]),
        ):
            mean, std = _mean_std(np.asarray(vals, dtype=float))
            stats.append(ErrorStat(pid, var, unit, mean, std, len(vals), excluded))
    return ErrorReport(kind="2d", stats=tuple(stats))


def compare_3d(
    est: InstrumentTrack,
    gt: GroundTruth,
    use_deltas: bool = False,
    z_align: str = "first",
) -> ErrorReport:
    """Absolute error of cumulative x, y, z, roll, pitch, yaw per part.

    Series are origin-aligned at the first common frame. Depth is
    additionally scale-aligned there unless ``z_align="none"``; the unknown
    monocular scale would otherwise dominate every z figure. Reinitialized
    or missing frames are excluded and counted. With ``use_deltas`` the
    per-frame deltas are compared instead of cumulative series.
    """
    if z_align not in ("first", "none"):
        raise DataError(f"unknown z_align mode {z_align!r}")
    gt_frames = [int(n) for n in gt.frames]
    gt_index = {n: i for i, n in enumerate(gt_frames)}

    stats: list[ErrorStat] = []
    for pid in sorted(gt.parts):
        if pid not in est.poses:
            raise DataError(f"estimated track has no part {pid}")
        gtp = gt.parts[pid]
        series = est.series(pid)
        est_index = {int(n): i for i, n in enumerate(series["frame"])}
        common = [
            n
            for n in gt_frames
            if n in est_index and gtp.on_screen[gt_index[n]]
        ]
        if not common:
            raise DataError(f"part {pid}: no common frames to compare")
        f0 = common[0]
        e0, g0 = est_index[f0], gt_index[f0]

        gt_series = gtp.series()
        gt_deltas = gtp.deltas()
        z_scale = 1.0
        if z_align == "first" and series["cum_z"][e0] > 0:
            z_scale = gt_series["cum_z"][g0] / series["cum_z"][e0]

        compared = [n for n in common if not series["reinit"][est_index[n]]]
        excluded = len(common) - len(compared)
        ei = np.array([est_index[n] for n in compared], dtype=int)
        gi = np.array([gt_index[n] for n in compared], dtype=int)

        for var in _3D_VARIABLES:
            key = {"x": "cum_x", "y": "cum_y", "z": "cum_z",
                   "roll": "cum_roll", "pitch": "cum_pitch", "yaw": "cum_yaw"}[var]
            if use_deltas:
                dkey = "d" + var
                est_vals = series[dkey][ei]
                gt_vals = gt_deltas[dkey][gi]
            else:
                est_vals = series[key][ei] - series[key][e0]
                gt_vals = gt_series[key][gi] - gt_series[key][g0]
            if var == "z":
                est_vals = est_vals * z_scale
            err = np.abs(est_vals - gt_vals)
            mean, std = _mean_std(err)
            stats.append(
                ErrorStat(pid, var, _3D_UNITS[var], mean, std, len(err), excluded)
            )
    return ErrorReport(kind="3d", stats=tuple(stats))


def aggregate_runs(reports: list[ErrorReport]) -> ErrorReport:
    """Cross-run aggregate: mean of per-run means, std over per-run means."""
    if not reports:
        raise DataError("no reports to aggregate")
    kinds = {r.kind for r in reports}
    if len(kinds) != 1:
        raise DataError(f"cannot aggregate mixed report kinds {sorted(kinds)}")
    keys = [(s.part_id, s.variable) for s in reports[0].stats]
    for r in reports[1:]:
        if [(s.part_id, s.variable) for s in r.stats] != keys:
            raise DataError("reports do not share part/variable layout")
    stats = []
    for i, (pid, var) in enumerate(keys):
        per_run = np.array([r.stats[i].mean_abs for r in reports])
        stats.append(
            ErrorStat(
                part_id=pid,
                variable=var,
                unit=reports[0].stats[i].unit,
                mean_abs=float(np.mean(per_run)),
                std=float(np.std(per_run)),
                n_frames=int(sum(r.stats[i].n_frames for r in reports)),
                n_excluded=int(sum(r.stats[i].n_excluded for r in reports)),
            )
        )
    return ErrorReport(kind=reports[0].kind, stats=tuple(stats), n_runs=len(reports))


def report_render(report: ErrorReport) -> tuple[str, str]:
    """Render a report as a fixed-width text table and a CSV document."""
    title = f"{report.kind.upper()} tracking error report (runs={report.n_runs})"
    header = (
        f"{'part':>4}  {'variable':<8}  {'unit':<5}  {'mean_abs_err':>14}  "
        f"{'std':>14}  {'n_frames':>8}  {'n_excluded':>10}"
    )
    lines = [title, "=" * len(header), header, "-" * len(header)]
    for s in report.stats:
        lines.append(
            f"{s.part_id:>4}  {s.variable:<8}  {s.unit:<5}  {s.mean_abs:>14.6f}  "
            f"{s.std:>14.6f}  {s.n_frames:>8}  {s.n_excluded:>10}"
        )
    text = "\n".join(lines) + "\n"

    csv_lines = [CSV_SCHEMA, _CSV_COLUMNS]
    for s in report.stats:
        csv_lines.append(
            f"{s.part_id},{s.variable},{s.unit},{s.mean_abs!r},{s.std!r},"
            f"{s.n_frames},{s.n_excluded}"
        )
    return text, "\n".join(csv_lines) + "\n"
