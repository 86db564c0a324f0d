"""Frame-to-frame 3D motion estimation from ordered box corners.

Per part and frame the estimator takes the four box corners and derives:
in-plane translation from the corner centroid, depth from the area scale
ratio (z = f * S / sqrt(A)), and roll/pitch/yaw proxies from internal-angle
sums and edge inclinations. Deltas against the previous frame are composed
into a translation-term matrix and a Z*Y*X rotation matrix.

The fold over frames is strictly sequential; everything upstream of it is
per-frame pure and parallelizable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import atan2, cos, hypot, pi, sin, sqrt

import numpy as np

from .errors import GeometryError
from .frames_io import CameraModel, PartConfig, TrackerOptions
from .geom2d import internal_angles
from .tracker2d import Frame2DResult, track_sequence_2d

log = logging.getLogger("tooltrack")

_HALF_PI = pi / 2.0


@dataclass(frozen=True)
class AngleFeatures:
    """Internal angles of a box quad plus derived orientation features.

    ``e_roll`` and ``e_pitch`` are signed internal-angle asymmetries (zero for
    any true rectangle); ``e_yaw`` is pi minus the summed edge inclinations,
    averaged over the four edges.
    """

    angles: tuple[float, float, float, float]
    e_roll: float
    e_pitch: float
    e_yaw: float


@dataclass(frozen=True)
class PartPose:
    """Per-frame 3D motion record for one instrument part.

    ``dx``/``dy`` are pixels, ``dz`` and ``z_abs`` are focal-pixel depth
    units, angles are radians. ``cum_*`` are prefix sums of the deltas,
    anchored at the first frame's centroid and depth; reinitialized frames
    contribute zero deltas so the cumulative track stays continuous. ``T``
    and ``R`` are the composed matrices; the delta fields are the
    authoritative motion record.
    """

    frame: int
    part_id: int
    dx: float
    dy: float
    dz: float
    droll: float
    dpitch: float
    dyaw: float
    z_abs: float
    area: float
    scale: float
    cum_x: float
    cum_y: float
    cum_z: float
    cum_roll: float
    cum_pitch: float
    cum_yaw: float
    reinit: bool
    T: np.ndarray
    R: np.ndarray


@dataclass
class InstrumentTrack:
    """Time-ordered pose records for all parts plus provenance."""

    camera: CameraModel
    options: TrackerOptions
    part_ids: list[int]
    frames: list[int]
    poses: dict[int, dict[int, PartPose]]  # part -> frame -> pose
    reinit_events: list[tuple[int, int]] = field(default_factory=list)
    missing: dict[int, list[int]] = field(default_factory=dict)
    results2d: list[Frame2DResult] | None = None

    def pose_list(self, part_id: int) -> list[PartPose]:
        by_frame = self.poses[part_id]
        return [by_frame[n] for n in self.frames if n in by_frame]

    def series(self, part_id: int) -> dict[str, np.ndarray]:
        """Column arrays over the part's present frames, for reports and plots."""
        poses = self.pose_list(part_id)
        out: dict[str, np.ndarray] = {
            "frame": np.array([p.frame for p in poses], dtype=int),
            "reinit": np.array([p.reinit for p in poses], dtype=bool),
        }
        for name in (
            "dx", "dy", "dz", "droll", "dpitch", "dyaw", "z_abs", "area",
            "scale", "cum_x", "cum_y", "cum_z", "cum_roll", "cum_pitch",
            "cum_yaw",
        ):
            out[name] = np.array([getattr(p, name) for p in poses], dtype=float)
        return out


def scale_change(area: float, area_prev: float) -> float:
    """Area ratio between consecutive frames; the first frame uses 1 by decree."""
    if not area_prev > 0:
        raise GeometryError(f"previous area must be positive, got {area_prev}")
    return area / area_prev


def depth_estimate(scale: float, area: float, cam: CameraModel) -> float:
    """Depth in focal-pixel units: z = f * S / sqrt(A)."""
    if not area > 0:
        raise GeometryError(f"area must be positive, got {area}")
    return cam.focal_px * scale / sqrt(area)


def _fold_inclination(angle: float) -> float:
    """Fold an edge direction into (-pi/2, pi/2]; vertical edges map to pi/2."""
    a = angle % pi
    if a > _HALF_PI:
        a -= pi
    return a


def _quad_stats(x1, y1, x2, y2, x3, y3, x4, y4):
    """Area, centroid, internal angles, and inclination sum of one quad.

    Scalar math on purpose: this sits on the per-frame hot path and the
    inputs are always exactly four points.
    """
    e1x, e1y = x2 - x1, y2 - y1
    e2x, e2y = x3 - x2, y3 - y2
    e3x, e3y = x4 - x3, y4 - y3
    e4x, e4y = x1 - x4, y1 - y4

    s = (x1 * y2 - x2 * y1) + (x2 * y3 - x3 * y2)
    s += (x3 * y4 - x4 * y3) + (x4 * y1 - x1 * y4)
    area = abs(s) / 2.0
    cx = (x1 + x2 + x3 + x4) / 4.0
    cy = (y1 + y2 + y3 + y4) / 4.0

    angles = []
    ex = (e1x, e2x, e3x, e4x)
    ey = (e1y, e2y, e3y, e4y)
    incl_sum = 0.0
    for i in range(4):
        j = (i + 1) % 4
        cross = ex[i] * ey[j] - ey[i] * ex[j]
        dot = ex[i] * ex[j] + ey[i] * ey[j]
        if cross == 0.0 and dot == 0.0:
            raise GeometryError("degenerate quad: zero-length edge")
        a = pi - atan2(cross, dot)
        if not 0.0 < a < pi:
            raise GeometryError("degenerate quad: reflex or collinear corner")
        angles.append(a)
        incl_sum += _fold_inclination(atan2(ey[i], ex[i]))
    return area, cx, cy, angles[0], angles[1], angles[2], angles[3], incl_sum


def _features_from_angles(a1, a2, a3, a4, incl_sum, convention):
    if convention == "a14":
        e_r = a1 + a4 - a2 - a3
        e_p = a3 + a4 - a1 - a2
    elif convention == "a12":
        e_r = a1 + a2 - a3 - a4
        e_p = a1 + a4 - a2 - a3
    else:
        raise ValueError(f"unknown angle convention: {convention!r}")
    e_y = (pi - incl_sum) / 4.0
    return e_r, e_p, e_y


def angle_features(q, convention: str = "a14") -> AngleFeatures:
    """Angle-based orientation features of a corner quad.

    The roll and pitch features are differences of paired internal-angle
    sums; the pairing is selected by ``convention`` ("a14" sums angles 1 and
    4 positively in the roll feature, "a12" angles 1 and 2). The yaw feature
    averages the edge inclinations, with vertical edges folded to pi/2, and
    subtracts from pi.
    """
    pts = np.asarray(q, dtype=float)
    if pts.shape != (4, 2):
        raise GeometryError(f"expected 4 corner points, got shape {pts.shape}")
    v = pts.ravel().tolist()
    _, _, _, a1, a2, a3, a4, incl_sum = _quad_stats(*v)
    e_r, e_p, e_y = _features_from_angles(a1, a2, a3, a4, incl_sum, convention)
    return AngleFeatures(angles=(a1, a2, a3, a4), e_roll=e_r, e_pitch=e_p, e_yaw=e_y)


def rotation_zyx(droll: float, dpitch: float, dyaw: float) -> np.ndarray:
    """Rotation matrix R = Rz(dyaw) @ Ry(dpitch) @ Rx(droll), composed closed-form.

    Zero deltas produce the exact identity.
    """
    ca, sa = cos(droll), sin(droll)
    cb, sb = cos(dpitch), sin(dpitch)
    cc, sc = cos(dyaw), sin(dyaw)
    return np.array(
        (
            (cc * cb, cc * sb * sa - sc * ca, cc * sb * ca + sc * sa),
            (sc * cb, sc * sb * sa + cc * ca, sc * sb * ca - cc * sa),
            (-sb, cb * sa, cb * ca),
        )
    )


def translation_factors(dx: float, dy: float, dz: float):
    """The three 3x3 translation-term factors (Tz, Ty, Tx).

    These use a non-homogeneous layout: dx and dy ride in the third column of
    their factor, dz sits on the last diagonal entry (a scale-like slot).
    Kept for fidelity with the composed form below.
    """
    tz = np.array(((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, dz)))
    ty = np.array(((1.0, 0.0, 0.0), (0.0, 1.0, dy), (0.0, 0.0, 1.0)))
    tx = np.array(((1.0, 0.0, dx), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)))
    return tz, ty, tx


def translation_matrix(dx: float, dy: float, dz: float) -> np.ndarray:
    """Composed translation-term matrix Tz @ Ty @ Tx.

    Equals [[1, 0, dx], [0, 1, dy], [0, 0, dz]]. Note this is not a
    homogeneous transform (zero deltas give a singular matrix); the delta
    vector on the pose is the authoritative motion record.
    """
    return np.array(((1.0, 0.0, dx), (0.0, 1.0, dy), (0.0, 0.0, dz)))


@dataclass
class _PartState:
    present: bool = False
    ever_seen: bool = False
    cx: float = 0.0
    cy: float = 0.0
    area: float = 0.0
    base_area: float = 0.0
    z: float = 0.0
    e_r: float = 0.0
    e_p: float = 0.0
    e_y: float = 0.0
    cum_x: float = 0.0
    cum_y: float = 0.0
    cum_z: float = 0.0
    cum_roll: float = 0.0
    cum_pitch: float = 0.0
    cum_yaw: float = 0.0


def detect_camera_motion(
    curr: Frame2DResult, prev: Frame2DResult, options: TrackerOptions
) -> bool:
    """True when any part's box jumps in area or position between two frames.

    Area ratio outside [1/(1+area_jump), 1+area_jump] or a centroid jump of
    more than centroid_jump times the image diagonal counts as camera motion.
    """
    diag = hypot(curr.width, curr.height)
    for pid, det in curr.parts.items():
        pd = prev.parts.get(pid)
        if det.present and pd is not None and pd.present:
            v = det.corners.ravel().tolist()
            area, cx, cy, *_ = _quad_stats(*v)
            pv = pd.corners.ravel().tolist()
            parea, pcx, pcy, *_ = _quad_stats(*pv)
            if _is_jump(area, cx, cy, parea, pcx, pcy, diag, options):
                return True
    return False


def _is_jump(area, cx, cy, prev_area, prev_cx, prev_cy, diag, options) -> bool:
    ratio = area / prev_area if prev_area > 0 else float("inf")
    hi = 1.0 + options.area_jump
    if ratio > hi or ratio < 1.0 / hi:
        return True
    return hypot(cx - prev_cx, cy - prev_cy) > options.centroid_jump * diag


def pose_step(
    curr: Frame2DResult,
    state: dict[int, _PartState],
    cam: CameraModel,
    options: TrackerOptions = TrackerOptions(),
) -> dict[int, PartPose]:
    """Advance the per-part fold state by one frame, emitting poses.

    ``state`` is mutated in place. Pass a fresh dict (one empty _PartState
    per part) to start a track; the first frame then comes out as a
    reinitialization baseline with zero deltas.
    """
    poses, _ = _step(curr, state, cam, options)
    return poses


def _step(curr, state, cam, options):
    f = cam.focal_px
    diag = hypot(curr.width, curr.height)
    convention = options.angle_convention
    cumulative = options.scale_mode == "cumulative"

    stats: dict[int, tuple] = {}
    motion = False
    for pid in sorted(curr.parts):
        det = curr.parts[pid]
        if not det.present:
            continue
        v = det.corners.ravel().tolist()
        st = _quad_stats(*v)
        stats[pid] = st
        ps = state.get(pid)
        if ps is not None and ps.present and not motion:
            motion = _is_jump(st[0], st[1], st[2], ps.area, ps.cx, ps.cy, diag, options)

    poses: dict[int, PartPose] = {}
    for pid in sorted(curr.parts):
        ps = state.setdefault(pid, _PartState())
        if pid not in stats:
            ps.present = False
            continue
        area, cx, cy, a1, a2, a3, a4, incl_sum = stats[pid]
        if area <= 0.0:
            log.warning("frame %d part %d: zero corner area; skipping", curr.index, pid)
            ps.present = False
            continue
        e_r, e_p, e_y = _features_from_angles(a1, a2, a3, a4, incl_sum, convention)

        reinit = motion or not ps.present
        if reinit:
            s = 1.0
            z = f / sqrt(area)
            dx = dy = dz = droll = dpitch = dyaw = 0.0
            ps.base_area = area
            if not ps.ever_seen:
                ps.cum_x, ps.cum_y, ps.cum_z = cx, cy, z
                ps.cum_roll = ps.cum_pitch = ps.cum_yaw = 0.0
        else:
            s = area / (ps.base_area if cumulative else ps.area)
            z = f * s / sqrt(area)
            dx = cx - ps.cx
            dy = cy - ps.cy
            dz = z - ps.z
            droll = e_r - ps.e_r
            dpitch = e_p - ps.e_p
            dyaw = e_y - ps.e_y
            ps.cum_x += dx
            ps.cum_y += dy
            ps.cum_z += dz
            ps.cum_roll += droll
            ps.cum_pitch += dpitch
            ps.cum_yaw += dyaw

        poses[pid] = PartPose(
            frame=curr.index,
            part_id=pid,
            dx=dx,
            dy=dy,
            dz=dz,
            droll=droll,
            dpitch=dpitch,
            dyaw=dyaw,
            z_abs=z,
            area=area,
            scale=s,
            cum_x=ps.cum_x,
            cum_y=ps.cum_y,
            cum_z=ps.cum_z,
            cum_roll=ps.cum_roll,
            cum_pitch=ps.cum_pitch,
            cum_yaw=ps.cum_yaw,
            reinit=reinit,
            T=translation_matrix(dx, dy, dz),
            R=rotation_zyx(droll, dpitch, dyaw),
        )
        ps.present = True
        ps.ever_seen = True
        ps.cx, ps.cy, ps.area, ps.z = cx, cy, area, z
        ps.e_r, ps.e_p, ps.e_y = e_r, e_p, e_y
    return poses, motion


def track_from_results(
    results: list[Frame2DResult],
    cam: CameraModel,
    options: TrackerOptions = TrackerOptions(),
) -> InstrumentTrack:
    """Sequential pose fold over precomputed per-frame box results."""
    if not results:
        raise GeometryError("cannot track an empty sequence")
    part_ids = sorted(results[0].parts)
    state: dict[int, _PartState] = {}
    poses: dict[int, dict[int, PartPose]] = {pid: {} for pid in part_ids}
    reinit_events: list[tuple[int, int]] = []
    missing: dict[int, list[int]] = {pid: [] for pid in part_ids}
    for res in results:
        frame_poses, _ = _step(res, state, cam, options)
        for pid in part_ids:
            pose = frame_poses.get(pid)
            if pose is None:
                missing[pid].append(res.index)
            else:
                poses[pid][res.index] = pose
                if pose.reinit:
                    reinit_events.append((res.index, pid))
    return InstrumentTrack(
        camera=cam,
        options=options,
        part_ids=part_ids,
        frames=[r.index for r in results],
        poses=poses,
        reinit_events=reinit_events,
        missing=missing,
        results2d=results,
    )


def track_instrument(
    frames,
    parts: tuple[PartConfig, ...] | list[PartConfig],
    cam: CameraModel,
    options: TrackerOptions = TrackerOptions(),
    overlap: tuple[int, int] | None = None,
) -> InstrumentTrack:
    """Full pipeline: 2D box extraction per frame, then the sequential 3D fold."""
    if not frames:
        raise GeometryError("cannot track an empty sequence")
    results = track_sequence_2d(
        frames,
        parts,
        box_mode=options.box_mode,
        overlap=overlap,
        link_gap=options.link_gap,
    )
    return track_from_results(results, cam, options)
