"""Synthetic two-part instrument scenes with exact ground truth.

World frame: x right, y up, z toward the viewer; the camera sits at the
origin looking along -z, so visible points carry a positive ``depth``
(distance into the scene). Pixel coordinates run x right, y down, origin at
the top-left frame corner. With these conventions a positive scripted yaw
(counter-clockwise as the viewer sees it) comes out of the estimator as a
positive yaw delta.

Parts are planar rectangles (the faces the tracker's boxes would wrap
anyway), perspective-projected and rasterized with 4x4 supersampling and
majority fill to keep boundary noise bounded.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ProjectionError
from .frames_io import (
    CameraModel,
    LabelFrame,
    PartConfig,
    TrackConfig,
    TrackerOptions,
)
from .pose3d import rotation_zyx

DEFAULT_CAMERA = CameraModel(focal_px=200.0)
DEFAULT_FRAME_SIZE = (320, 240)  # (width, height)

CLASPER = 1
SHAFT = 2

GT_SCHEMA = "#schema=v1"
_GT_COLUMNS = [
    "n", "k", "gx", "gy", "gz", "groll", "gpitch", "gyaw", "visible",
    "c1x", "c1y", "c2x", "c2y", "c3x", "c3y", "c4x", "c4y",
]


@dataclass(frozen=True)
class SceneCoding:
    """Intensity assignment for rasterized parts and their linkage overlap."""

    part_intensity: dict = field(
        default_factory=lambda: {CLASPER: 120, SHAFT: 220}
    )
    part_range: dict = field(
        default_factory=lambda: {CLASPER: (100, 150), SHAFT: (200, 255)}
    )
    overlap_intensity: int = 60
    overlap_range: tuple[int, int] = (50, 70)


DEFAULT_CODING = SceneCoding()

_PART_NAMES = {CLASPER: "clasper", SHAFT: "shaft"}


def default_config(
    coding: SceneCoding = DEFAULT_CODING,
    cam: CameraModel = DEFAULT_CAMERA,
    tracker: TrackerOptions = TrackerOptions(),
    min_pixels: int = 25,
) -> TrackConfig:
    """Tracker configuration matching the synthetic intensity coding."""
    parts = tuple(
        PartConfig(
            part_id=k,
            name=_PART_NAMES.get(k, f"part{k}"),
            intensity_lo=lo,
            intensity_hi=hi,
            min_pixels=min_pixels,
        )
        for k, (lo, hi) in sorted(coding.part_range.items())
    )
    return TrackConfig(
        parts=parts, camera=cam, tracker=tracker, overlap=coding.overlap_range
    )


@dataclass(frozen=True)
class PartGeom:
    """Drawn rectangle extents of one part, in scene units."""

    part_id: int
    length: float
    width: float
    thickness: float = 0.0  # reserved; the rasterizer draws the face rectangle

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0 and self.thickness >= 0):
            raise ConfigError(f"part {self.part_id}: extents must be positive")


@dataclass(frozen=True)
class MotionScript:
    """Per-frame pose of every part: columns x, y, depth, roll, pitch, yaw."""

    parts: tuple[PartGeom, ...]
    poses: np.ndarray  # (n_frames, n_parts, 6)
    linked: bool = True
    link_tolerance: float = 0.0

    def __post_init__(self):
        poses = np.asarray(self.poses, dtype=float)
        object.__setattr__(self, "poses", poses)
        if poses.ndim != 3 or poses.shape[1] != len(self.parts) or poses.shape[2] != 6:
            raise ConfigError(f"pose array has shape {poses.shape}")
        if poses.shape[0] < 2:
            raise ConfigError("a motion script needs at least 2 frames")
        if not np.all(np.isfinite(poses)):
            raise ConfigError("script poses must be finite")
        if self.linked:
            self._check_linkage()

    @property
    def n_frames(self) -> int:
        return self.poses.shape[0]

    def part_index(self, part_id: int) -> int:
        for i, p in enumerate(self.parts):
            if p.part_id == part_id:
                return i
        raise KeyError(part_id)

    def _check_linkage(self):
        try:
            si = self.part_index(SHAFT)
            ci = self.part_index(CLASPER)
        except KeyError:
            return
        tol = self.link_tolerance + 1e-9
        for n in range(self.n_frames):
            tip = _axis_endpoint(self.poses[n, si], self.parts[si].length, +1.0)
            base = _axis_endpoint(self.poses[n, ci], self.parts[ci].length, -1.0)
            if np.linalg.norm(tip - base) > tol:
                raise ConfigError(
                    f"frame {n + 1}: clasper base is "
                    f"{np.linalg.norm(tip - base):.4f} scene units from the "
                    f"shaft tip (tolerance {tol:.4f})"
                )


def _world_center(pose) -> np.ndarray:
    x, y, depth = pose[0], pose[1], pose[2]
    return np.array((x, y, -depth))


def _axis_endpoint(pose, length: float, sign: float) -> np.ndarray:
    rot = rotation_zyx(pose[3], pose[4], pose[5])
    return _world_center(pose) + rot @ np.array((sign * length / 2.0, 0.0, 0.0))


def project_part(
    pose,
    extents: tuple[float, float],
    cam: CameraModel = DEFAULT_CAMERA,
    frame_size: tuple[int, int] = DEFAULT_FRAME_SIZE,
) -> np.ndarray:
    """Perspective projection of the part's face rectangle corners, in pixels.

    Raises when any corner reaches or crosses the camera plane.
    """
    pose = np.asarray(pose, dtype=float)
    length, width = extents
    rot = rotation_zyx(pose[3], pose[4], pose[5])
    center = _world_center(pose)
    hl, hw = length / 2.0, width / 2.0
    local = np.array(
        ((-hl, -hw, 0.0), (hl, -hw, 0.0), (hl, hw, 0.0), (-hl, hw, 0.0))
    )
    corners = center + local @ rot.T
    depths = -corners[:, 2]
    if np.any(depths <= 1e-12):
        raise ProjectionError(
            f"part extends to depth {depths.min():.4g}; all points must be in "
            "front of the camera"
        )
    w, h = frame_size
    u = w / 2.0 + cam.focal_px * corners[:, 0] / depths
    v = h / 2.0 - cam.focal_px * corners[:, 1] / depths
    return np.stack((u, v), axis=1)


def _coverage_mask(quad: np.ndarray, frame_size: tuple[int, int]) -> np.ndarray:
    """Pixels whose 4x4 subsample majority falls inside the convex quad."""
    w, h = frame_size
    q = np.asarray(quad, dtype=float)
    c = q.mean(axis=0)
    q = q[np.argsort(np.arctan2(q[:, 1] - c[1], q[:, 0] - c[0]))]
    x0 = max(0, int(math.floor(q[:, 0].min())))
    x1 = min(w, int(math.ceil(q[:, 0].max())))
    y0 = max(0, int(math.floor(q[:, 1].min())))
    y1 = min(h, int(math.ceil(q[:, 1].max())))
    mask = np.zeros((h, w), dtype=bool)
    if x1 <= x0 or y1 <= y0:
        return mask
    sub = (np.arange(4) + 0.5) / 4.0
    us = (x0 + np.add.outer(np.arange(x1 - x0), sub)).ravel()
    vs = (y0 + np.add.outer(np.arange(y1 - y0), sub)).ravel()
    uu, vv = np.meshgrid(us, vs)
    inside = np.ones(uu.shape, dtype=bool)
    for i in range(4):
        ax, ay = q[i]
        bx, by = q[(i + 1) % 4]
        inside &= (bx - ax) * (vv - ay) - (by - ay) * (uu - ax) >= 0.0
    counts = inside.reshape(y1 - y0, 4, x1 - x0, 4).sum(axis=(1, 3))
    mask[y0:y1, x0:x1] = counts >= 8
    return mask


def rasterize_scene(
    quads: dict[int, np.ndarray],
    coding: SceneCoding = DEFAULT_CODING,
    frame_size: tuple[int, int] = DEFAULT_FRAME_SIZE,
    index: int = 1,
) -> tuple[LabelFrame, dict[int, bool]]:
    """Rasterize projected part quads into one label frame.

    Pixels covered by more than one part take the overlap intensity, no
    matter the drawing order. Returns the frame plus an on-screen flag per
    part (False when the part contributed no pixels at all).
    """
    w, h = frame_size
    masks = {k: _coverage_mask(q, frame_size) for k, q in quads.items()}
    on_screen = {k: bool(m.any()) for k, m in masks.items()}

    overlap = np.zeros((h, w), dtype=np.uint8)
    for m in masks.values():
        overlap += m.astype(np.uint8)
    overlap_px = overlap >= 2

    px = np.zeros((h, w), dtype=np.uint8)
    for k, m in masks.items():
        px[m & ~overlap_px] = coding.part_intensity[k]
    px[overlap_px] = coding.overlap_intensity
    return LabelFrame(index=index, width=w, height=h, pixels=px), on_screen


@dataclass
class GroundTruthPart:
    """Exact per-frame observables for one part."""

    part_id: int
    corners_px: np.ndarray  # (N, 4, 2)
    centroid_px: np.ndarray  # (N, 2) mean of projected corners
    depth: np.ndarray  # (N,) scene units
    rpy: np.ndarray  # (N, 3) radians
    on_screen: np.ndarray  # (N,) bool

    def deltas(self) -> dict[str, np.ndarray]:
        """Per-frame differences (first row zero) for all six motion variables."""
        def diff(a):
            d = np.zeros_like(a)
            d[1:] = a[1:] - a[:-1]
            return d

        return {
            "dx": diff(self.centroid_px[:, 0]),
            "dy": diff(self.centroid_px[:, 1]),
            "dz": diff(self.depth),
            "droll": diff(self.rpy[:, 0]),
            "dpitch": diff(self.rpy[:, 1]),
            "dyaw": diff(self.rpy[:, 2]),
        }

    def series(self) -> dict[str, np.ndarray]:
        """Cumulative series in the same keys the estimated track exposes."""
        return {
            "cum_x": self.centroid_px[:, 0].copy(),
            "cum_y": self.centroid_px[:, 1].copy(),
            "cum_z": self.depth.copy(),
            "cum_roll": self.rpy[:, 0] - self.rpy[0, 0],
            "cum_pitch": self.rpy[:, 1] - self.rpy[0, 1],
            "cum_yaw": self.rpy[:, 2] - self.rpy[0, 2],
        }


@dataclass
class GroundTruth:
    frames: np.ndarray  # (N,) 1-based frame indices
    parts: dict[int, GroundTruthPart]
    frame_size: tuple[int, int] | None = None
    focal_px: float | None = None


def generate(
    script: MotionScript,
    cam: CameraModel = DEFAULT_CAMERA,
    frame_size: tuple[int, int] = DEFAULT_FRAME_SIZE,
    coding: SceneCoding = DEFAULT_CODING,
) -> tuple[list[LabelFrame], GroundTruth]:
    """Render a script into label frames plus exact ground truth."""
    n_frames = script.n_frames
    frames: list[LabelFrame] = []
    per_part = {
        p.part_id: GroundTruthPart(
            part_id=p.part_id,
            corners_px=np.zeros((n_frames, 4, 2)),
            centroid_px=np.zeros((n_frames, 2)),
            depth=np.zeros(n_frames),
            rpy=np.zeros((n_frames, 3)),
            on_screen=np.zeros(n_frames, dtype=bool),
        )
        for p in script.parts
    }
    for n in range(n_frames):
        quads: dict[int, np.ndarray] = {}
        for i, geom in enumerate(script.parts):
            pose = script.poses[n, i]
            try:
                quad = project_part(
                    pose, (geom.length, geom.width), cam, frame_size
                )
            except ProjectionError as exc:
                raise ProjectionError(f"frame {n + 1}: {exc}") from exc
            quads[geom.part_id] = quad
            gt = per_part[geom.part_id]
            gt.corners_px[n] = quad
            gt.centroid_px[n] = quad.mean(axis=0)
            gt.depth[n] = pose[2]
            gt.rpy[n] = pose[3:6]
        frame, on_screen = rasterize_scene(quads, coding, frame_size, index=n + 1)
        for k, flag in on_screen.items():
            per_part[k].on_screen[n] = flag
        frames.append(frame)
    gt = GroundTruth(
        frames=np.arange(1, n_frames + 1),
        parts=per_part,
        frame_size=frame_size,
        focal_px=cam.focal_px,
    )
    return frames, gt


# ---------------------------------------------------------------------------
# Scripted presets. All build a linked two-part instrument whose linkage point
# follows the requested trajectory; per-frame values are endpoint-exact linear
# interpolations (N-1 equal steps).
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InstrumentGeometry:
    shaft_length: float = 1.2
    shaft_width: float = 0.30
    clasper_length: float = 0.50
    clasper_width: float = 0.18
    overlap_depth: float = 0.06

    def parts(self) -> tuple[PartGeom, PartGeom]:
        return (
            PartGeom(
                part_id=CLASPER,
                length=self.clasper_length + self.overlap_depth,
                width=self.clasper_width,
            ),
            PartGeom(part_id=SHAFT, length=self.shaft_length, width=self.shaft_width),
        )


DEFAULT_GEOMETRY = InstrumentGeometry()


def _require_finite(**params):
    for name, value in params.items():
        if not np.all(np.isfinite(value)):
            raise ConfigError(f"preset parameter {name} must be finite, got {value}")


def _assembly_script(
    link_xyd: np.ndarray,  # (N, 3): linkage point x, y, depth
    rpy: np.ndarray,  # (N, 3)
    geometry: InstrumentGeometry = DEFAULT_GEOMETRY,
) -> MotionScript:
    """Derive per-part poses from a linkage-point trajectory.

    The shaft extends backward from the linkage point along the assembly
    axis; the clasper extends forward, its drawn rectangle reaching
    ``overlap_depth`` back into the shaft so the rasterized masks share an
    overlap band.
    """
    parts = geometry.parts()
    n = len(link_xyd)
    poses = np.zeros((n, len(parts), 6))
    clasper_offset = (geometry.clasper_length - geometry.overlap_depth) / 2.0
    offsets = {CLASPER: clasper_offset, SHAFT: -geometry.shaft_length / 2.0}
    for f in range(n):
        rot = rotation_zyx(rpy[f, 0], rpy[f, 1], rpy[f, 2])
        axis = rot @ np.array((1.0, 0.0, 0.0))
        link_world = np.array((link_xyd[f, 0], link_xyd[f, 1], -link_xyd[f, 2]))
        for i, geom in enumerate(parts):
            center = link_world + offsets[geom.part_id] * axis
            poses[f, i, 0] = center[0]
            poses[f, i, 1] = center[1]
            poses[f, i, 2] = -center[2]
            poses[f, i, 3:6] = rpy[f]
    return MotionScript(
        parts=parts,
        poses=poses,
        linked=True,
        link_tolerance=geometry.overlap_depth,
    )


_DEFAULT_LINK = (0.35, 0.0, 2.0)  # x, y, depth of the linkage point

# Default in-plane tilt of the instrument axis. A perfectly axis-aligned
# rectangle gains and loses whole pixel rows at once during smooth motion;
# a small tilt decoheres that quantization along the edges.
_DEFAULT_TILT = 0.2


def _constant_link(frames: int, link=_DEFAULT_LINK) -> np.ndarray:
    return np.tile(np.asarray(link, dtype=float), (frames, 1))


def _constant_rpy(frames: int, yaw0: float) -> np.ndarray:
    rpy = np.zeros((frames, 3))
    rpy[:, 2] = yaw0
    return rpy


def static(
    frames: int = 10,
    yaw0: float = _DEFAULT_TILT,
    geometry: InstrumentGeometry = DEFAULT_GEOMETRY,
) -> MotionScript:
    """No motion at all; every frame identical."""
    _require_finite(frames=frames, yaw0=yaw0)
    return _assembly_script(
        _constant_link(frames), _constant_rpy(frames, yaw0), geometry
    )


def translate_xy(
    vx: float = 0.5,
    vy: float = 0.3,
    frames: int = 60,
    yaw0: float = _DEFAULT_TILT,
    cam: CameraModel = DEFAULT_CAMERA,
    geometry: InstrumentGeometry = DEFAULT_GEOMETRY,
) -> MotionScript:
    """Constant in-plane translation; vx and vy are pixels per frame."""
    _require_finite(vx=vx, vy=vy, yaw0=yaw0)
    x0, y0, depth = _DEFAULT_LINK
    # Convert the pixel velocity into world units at the constant depth.
    wx = vx * depth / cam.focal_px
    wy = -vy * depth / cam.focal_px  # pixel y runs downward, world y upward
    link = np.zeros((frames, 3))
    steps = np.arange(frames, dtype=float)
    link[:, 0] = x0 - (frames - 1) / 2.0 * wx + steps * wx
    link[:, 1] = y0 - (frames - 1) / 2.0 * wy + steps * wy
    link[:, 2] = depth
    return _assembly_script(link, _constant_rpy(frames, yaw0), geometry)


def dolly(
    z0: float = 2.0,
    z1: float = 2.4,
    frames: int = 50,
    yaw0: float = _DEFAULT_TILT,
    geometry: InstrumentGeometry = DEFAULT_GEOMETRY,
) -> MotionScript:
    """Pure depth motion from z0 to z1 (endpoint-exact linear steps)."""
    _require_finite(z0=z0, z1=z1, yaw0=yaw0)
    if z0 <= 0 or z1 <= 0:
        raise ConfigError("dolly depths must be positive")
    link = _constant_link(frames)
    link[:, 2] = np.linspace(z0, z1, frames)
    return _assembly_script(link, _constant_rpy(frames, yaw0), geometry)


def yaw_spin(
    rate: float = math.radians(0.5),
    frames: int = 30,
    yaw0: float = math.radians(20.0),
    geometry: InstrumentGeometry = DEFAULT_GEOMETRY,
) -> MotionScript:
    """In-plane rotation about the linkage point at ``rate`` radians per step."""
    _require_finite(rate=rate, yaw0=yaw0)
    rpy = np.zeros((frames, 3))
    rpy[:, 2] = yaw0 + rate * np.arange(frames)
    return _assembly_script(_constant_link(frames), rpy, geometry)


def pitch_tilt(
    rate: float = math.radians(0.4),
    frames: int = 30,
    yaw0: float = _DEFAULT_TILT,
    geometry: InstrumentGeometry = DEFAULT_GEOMETRY,
) -> MotionScript:
    """Out-of-plane tilt about the vertical axis at ``rate`` radians per step."""
    _require_finite(rate=rate, yaw0=yaw0)
    rpy = np.zeros((frames, 3))
    rpy[:, 1] = rate * np.arange(frames)
    rpy[:, 2] = yaw0
    return _assembly_script(_constant_link(frames), rpy, geometry)


def combined(
    seed: int = 0,
    frames: int = 30,
    cam: CameraModel = DEFAULT_CAMERA,
    geometry: InstrumentGeometry = DEFAULT_GEOMETRY,
) -> MotionScript:
    """Seeded random walk across all six motion variables."""
    _require_finite(seed=seed)
    rng = np.random.default_rng(seed)
    x0, y0, depth0 = _DEFAULT_LINK
    scale = depth0 / cam.focal_px
    dxy = rng.normal(0.0, 0.4 * scale, size=(frames, 2))
    ddepth = rng.normal(0.0, 0.004, size=frames)
    drpy = rng.normal(0.0, math.radians(0.25), size=(frames, 3))
    dxy[0] = 0.0
    ddepth[0] = 0.0
    drpy[0] = 0.0
    link = np.zeros((frames, 3))
    link[:, 0] = x0 + np.cumsum(dxy[:, 0])
    link[:, 1] = y0 + np.cumsum(dxy[:, 1])
    link[:, 2] = depth0 + np.cumsum(ddepth)
    rpy = np.cumsum(drpy, axis=0)
    rpy[:, 2] += math.radians(12.0)  # keep edges clear of inclination wraps
    return _assembly_script(link, rpy, geometry)


PRESETS = {
    "static": static,
    "translate_xy": translate_xy,
    "dolly": dolly,
    "yaw_spin": yaw_spin,
    "pitch_tilt": pitch_tilt,
    "combined": combined,
}


# ---------------------------------------------------------------------------
# Ground-truth file round trip
# ---------------------------------------------------------------------------

def write_ground_truth(gt: GroundTruth, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(GT_SCHEMA + "\n")
        writer = csv.writer(fh)
        writer.writerow(_GT_COLUMNS)
        for i, n in enumerate(gt.frames):
            for k in sorted(gt.parts):
                p = gt.parts[k]
                row = [
                    int(n),
                    k,
                    repr(float(p.centroid_px[i, 0])),
                    repr(float(p.centroid_px[i, 1])),
                    repr(float(p.depth[i])),
                    repr(float(p.rpy[i, 0])),
                    repr(float(p.rpy[i, 1])),
                    repr(float(p.rpy[i, 2])),
                    int(p.on_screen[i]),
                ]
                row.extend(
                    repr(float(v)) for v in p.corners_px[i].ravel()
                )
                writer.writerow(row)


def read_ground_truth(path) -> GroundTruth:
    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as fh:
        schema = fh.readline().strip()
        if schema != GT_SCHEMA:
            raise DataError(
                f"{path}: unsupported ground-truth schema {schema!r}, "
                f"expected {GT_SCHEMA!r}"
            )
        reader = csv.reader(fh)
        header = next(reader)
        if header != _GT_COLUMNS:
            raise DataError(f"{path}: unexpected ground-truth columns {header}")
        rows = [r for r in reader if r]

    frames = sorted({int(r[0]) for r in rows})
    index_of = {n: i for i, n in enumerate(frames)}
    part_ids = sorted({int(r[1]) for r in rows})
    n_frames = len(frames)
    parts = {
        k: GroundTruthPart(
            part_id=k,
            corners_px=np.zeros((n_frames, 4, 2)),
            centroid_px=np.zeros((n_frames, 2)),
            depth=np.zeros(n_frames),
            rpy=np.zeros((n_frames, 3)),
            on_screen=np.zeros(n_frames, dtype=bool),
        )
        for k in part_ids
    }
    for r in rows:
        i = index_of[int(r[0])]
        p = parts[int(r[1])]
        p.centroid_px[i] = (float(r[2]), float(r[3]))
        p.depth[i] = float(r[4])
        p.rpy[i] = (float(r[5]), float(r[6]), float(r[7]))
        p.on_screen[i] = bool(int(r[8]))
        p.corners_px[i] = np.array([float(v) for v in r[9:17]]).reshape(4, 2)
    return GroundTruth(frames=np.array(frames), parts=parts)
