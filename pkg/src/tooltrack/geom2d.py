"""2D geometric primitives for oriented-box tracking.

Everything here works on plain coordinates in mathematical orientation
(y up, counter-clockwise means positive signed area). Pixel-space callers
get consistent results as long as they stay in one convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import GeometryError

_HALF_PI = math.pi / 2.0


def normalize_box_angle(theta: float) -> float:
    """Fold a rectangle orientation into [-pi/2, pi/2); rectangles repeat mod pi."""
    t = (theta + _HALF_PI) % math.pi
    return t - _HALF_PI


@dataclass(frozen=True)
class OrientedBox:
    """Rotated rectangle: center, length (major side), width, angle in radians.

    The angle is the direction of the length side, normalized to [-pi/2, pi/2).
    """

    cx: float
    cy: float
    length: float
    width: float
    theta: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.length, self.width, self.theta)
        if not all(math.isfinite(v) for v in vals):
            raise GeometryError(f"non-finite oriented box: {vals}")
        if self.width < 0 or self.length < self.width:
            raise GeometryError(
                f"oriented box requires length >= width >= 0, got "
                f"length={self.length} width={self.width}"
            )
        object.__setattr__(self, "theta", normalize_box_angle(self.theta))

    @property
    def area(self) -> float:
        return self.length * self.width


@dataclass(frozen=True)
class AABB:
    """Axis-aligned box given by its top-left corner and side lengths."""

    x: float
    y: float
    length: float
    width: float

    def __post_init__(self):
        if self.length < 0 or self.width < 0:
            raise GeometryError("AABB sides must be non-negative")

    @property
    def area(self) -> float:
        return self.length * self.width


class BoxCorners(NamedTuple):
    """Corner extraction result; ``degenerate`` marks collapsed corner sets."""

    pts: np.ndarray  # (4, 2) float64
    degenerate: bool


class QuadFitResult(NamedTuple):
    """Quadrilateral fit; ``from_min_rect`` marks the small-hull fallback."""

    pts: np.ndarray  # (4, 2) float64
    from_min_rect: bool


def _as_quad(q) -> np.ndarray:
    pts = np.asarray(q, dtype=float)
    if pts.shape != (4, 2):
        raise GeometryError(f"expected 4 corner points, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("corner coordinates must be finite")
    return pts


def corners_from_box(box: OrientedBox, mode: str = "rotated") -> BoxCorners:
    """Return the four corners of an oriented box.

    mode="rotated" applies the full planar rotation (the geometry the rest of
    the pipeline relies on) and returns canonically ordered corners.
    mode="separable" scales the half-extents by cos/sin of the angle without
    rotating (x gets the cosine, y the sine). That variant collapses whenever
    either trig factor vanishes and is kept only for documentation and tests;
    its output is unordered.
    """
    hl, hw = box.length / 2.0, box.width / 2.0
    c, s = math.cos(box.theta), math.sin(box.theta)
    if mode == "rotated":
        local = ((-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw))
        pts = np.array(
            [(box.cx + x * c - y * s, box.cy + x * s + y * c) for x, y in local]
        )
    elif mode == "separable":
        dx, dy = hl * c, hw * s
        pts = np.array(
            [
                (box.cx - dx, box.cy + dy),
                (box.cx + dx, box.cy + dy),
                (box.cx - dx, box.cy - dy),
                (box.cx + dx, box.cy - dy),
            ]
        )
    else:
        raise ValueError(f"unknown corner mode: {mode!r}")

    scale = 1.0 + max(box.length, box.width)
    degenerate = _min_pair_distance(pts) <= 1e-9 * scale
    if mode == "rotated" and not degenerate:
        pts = canonical_order(pts)
    return BoxCorners(pts, degenerate)


def _min_pair_distance(pts: np.ndarray) -> float:
    best = math.inf
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = math.hypot(pts[i, 0] - pts[j, 0], pts[i, 1] - pts[j, 1])
            best = min(best, d)
    return best


def shoelace_area(q, mode: str = "full") -> float:
    """Quadrilateral area by the shoelace formula.

    mode="full" is the absolute cyclic sum over all four edges and is the
    pipeline default. mode="truncated" evaluates only the first three terms
    of each sum (no closing edge, signed); it does not generally equal the
    area and exists purely as a comparison artifact.
    """
    p = _as_quad(q)
    x1, y1 = p[0]
    x2, y2 = p[1]
    x3, y3 = p[2]
    x4, y4 = p[3]
    if mode == "full":
        s = (x1 * y2 - x2 * y1) + (x2 * y3 - x3 * y2)
        s += (x3 * y4 - x4 * y3) + (x4 * y1 - x1 * y4)
        return abs(s) / 2.0
    if mode == "truncated":
        return 0.5 * ((x1 * y2 + x2 * y3 + x3 * y4) - (x2 * y1 + x3 * y2 + x4 * y3))
    raise ValueError(f"unknown area mode: {mode!r}")


def centroid(q) -> np.ndarray:
    """Component-wise mean of the four corners."""
    return _as_quad(q).mean(axis=0)


def edge_directions(q) -> tuple[np.ndarray, np.ndarray]:
    """Direction angle and slope of each edge i -> i+1 (cyclic).

    Returns (angles, slopes). Angles are atan2(dy, dx) in (-pi, pi]; slopes
    are dy/dx with vertical edges reported as the +inf sentinel.
    """
    p = _as_quad(q)
    angles = np.empty(4)
    slopes = np.empty(4)
    for i in range(4):
        dx = p[(i + 1) % 4, 0] - p[i, 0]
        dy = p[(i + 1) % 4, 1] - p[i, 1]
        if dx == 0.0 and dy == 0.0:
            raise GeometryError(f"degenerate edge at corner {i + 1}")
        angles[i] = math.atan2(dy, dx)
        slopes[i] = math.inf if dx == 0.0 else dy / dx + 0.0
    return angles, slopes


def internal_angles(q) -> np.ndarray:
    """Interior angle between consecutive edges i and i+1 of a convex quad.

    Computed from edge direction vectors (atan2 of cross and dot), which
    stays defined where the slope-difference arctan formula blows up:
    perpendicular edges give exactly pi/2 and vertical edges need no special
    case. Angles land in the open interval (0, pi); the input must be a
    simple quad in counter-clockwise order.
    """
    p = _as_quad(q)
    ex = [p[(i + 1) % 4, 0] - p[i, 0] for i in range(4)]
    ey = [p[(i + 1) % 4, 1] - p[i, 1] for i in range(4)]
    out = np.empty(4)
    for i in range(4):
        if ex[i] == 0.0 and ey[i] == 0.0:
            raise GeometryError(f"degenerate edge at corner {i + 1}")
        j = (i + 1) % 4
        cross = ex[i] * ey[j] - ey[i] * ex[j]
        dot = ex[i] * ex[j] + ey[i] * ey[j]
        a = math.pi - math.atan2(cross, dot)
        if not 0.0 < a < math.pi:
            raise GeometryError(
                "internal angle outside (0, pi); quad is reflex, collinear, "
                "or not counter-clockwise"
            )
        out[i] = a
    return out


def convex_hull(points) -> np.ndarray:
    """Convex hull by monotone chain, counter-clockwise, collinear points dropped."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError(f"expected (N, 2) points, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("hull input must be finite")
    pts = np.unique(pts, axis=0)
    if len(pts) < 3:
        raise GeometryError("convex hull needs at least 3 distinct points")

    def build(seq):
        chain: list[np.ndarray] = []
        for p in seq:
            while len(chain) >= 2:
                ax, ay = chain[-2]
                bx, by = chain[-1]
                if (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax) > 0:
                    break
                chain.pop()
            chain.append(p)
        return chain

    lower = build(pts)
    upper = build(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise GeometryError("degenerate hull: all points collinear")
    return np.array(hull)


def min_area_rect(points) -> OrientedBox:
    """Minimum-area enclosing rectangle via rotating calipers.

    The optimal rectangle has one side collinear with a hull edge, so it
    suffices to test each hull edge direction. Returns an OrientedBox with
    length >= width and angle normalized to [-pi/2, pi/2).
    """
    hull = convex_hull(points)
    edges = np.roll(hull, -1, axis=0) - hull
    ang = np.arctan2(edges[:, 1], edges[:, 0])
    ca, sa = np.cos(ang), np.sin(ang)
    # Coordinates of every hull point in every edge-aligned frame.
    xr = ca[:, None] * hull[None, :, 0] + sa[:, None] * hull[None, :, 1]
    yr = -sa[:, None] * hull[None, :, 0] + ca[:, None] * hull[None, :, 1]
    xmin, xmax = xr.min(axis=1), xr.max(axis=1)
    ymin, ymax = yr.min(axis=1), yr.max(axis=1)
    areas = (xmax - xmin) * (ymax - ymin)
    i = int(np.argmin(areas))

    mx, my = (xmin[i] + xmax[i]) / 2.0, (ymin[i] + ymax[i]) / 2.0
    cx = ca[i] * mx - sa[i] * my
    cy = sa[i] * mx + ca[i] * my
    ext_x = xmax[i] - xmin[i]
    ext_y = ymax[i] - ymin[i]
    theta = float(ang[i])
    if ext_x >= ext_y:
        length, width = ext_x, ext_y
    else:
        length, width = ext_y, ext_x
        theta += _HALF_PI
    return OrientedBox(float(cx), float(cy), float(length), float(width), theta)


def _simplify_hull(hull: np.ndarray, target: int) -> np.ndarray:
    """Drop the least-significant vertices (smallest ear triangle) until target size."""
    pts = [tuple(p) for p in hull]
    while len(pts) > target:
        n = len(pts)
        best_i, best_a = 0, math.inf
        for i in range(n):
            ax, ay = pts[i - 1]
            bx, by = pts[i]
            cx, cy = pts[(i + 1) % n]
            a = abs((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))
            if a < best_a:
                best_i, best_a = i, a
        pts.pop(best_i)
    return np.array(pts)


def quad_fit(points) -> QuadFitResult:
    """Largest-area quadrilateral whose corners are convex hull vertices.

    Exhaustive over all diagonal splits when the hull has at most 64
    vertices; larger hulls are simplified first. Hulls with fewer than 4
    vertices fall back to the minimum-area rectangle corners (flagged).
    """
    hull = convex_hull(points)
    if len(hull) < 4:
        box = min_area_rect(points)
        pts, degenerate = corners_from_box(box, mode="rotated")
        if degenerate:
            raise GeometryError("degenerate hull: cannot fit a quadrilateral")
        return QuadFitResult(pts, True)
    if len(hull) > 64:
        hull = _simplify_hull(hull, 64)
    m = len(hull)
    x, y = hull[:, 0], hull[:, 1]
    # tri[i, j, k] = 2 * area of triangle (i, j, k)
    dx = x[None, :] - x[:, None]
    dy = y[None, :] - y[:, None]
    tri = np.abs(dx[:, :, None] * dy[:, None, :] - dy[:, :, None] * dx[:, None, :])

    best = -1.0
    best_quad = (0, 1, 2, 3)
    idx = np.arange(m)
    for i in range(m):
        for j in range(i + 2, m):
            inner = idx[i + 1 : j]
            outer = np.concatenate((idx[j + 1 :], idx[:i]))
            if len(inner) == 0 or len(outer) == 0:
                continue
            ti = tri[i, j, inner]
            to = tri[i, j, outer]
            total = ti.max() + to.max()
            if total > best:
                k1 = int(inner[int(np.argmax(ti))])
                k2 = int(outer[int(np.argmax(to))])
                best = total
                best_quad = (i, k1, j, k2)
    quad = hull[list(best_quad)]
    return QuadFitResult(canonical_order(quad), False)


def canonical_order(q, prev=None) -> np.ndarray:
    """Order four corners counter-clockwise with a stable starting corner.

    Without a previous quad the start is the corner with the largest y
    (ties broken by smaller x). With one, the start is the corner nearest
    the previous quad's first corner, which keeps index i pointing at the
    same physical corner across frames while inter-frame corner motion is
    below half the shortest box side.
    """
    pts = _as_quad(q)
    if _min_pair_distance(pts) == 0.0:
        raise GeometryError("duplicate corner points")
    center = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
    pts = pts[np.argsort(ang, kind="stable")]

    if prev is None:
        start = int(np.lexsort((pts[:, 0], -pts[:, 1]))[0])
    else:
        ref = _as_quad(prev)[0]
        d = np.hypot(pts[:, 0] - ref[0], pts[:, 1] - ref[1])
        start = int(np.argmin(d))
    return np.roll(pts, -start, axis=0)


def polygon_area(points) -> float:
    """Absolute shoelace area of an ordered polygon (any vertex count)."""
    pts = np.asarray(points, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))) / 2.0


def angle_distance_mod_pi(a: float, b: float) -> float:
    """Minimal distance between two undirected line angles (period pi)."""
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


__all__ = [
    "AABB",
    "BoxCorners",
    "OrientedBox",
    "QuadFitResult",
    "angle_distance_mod_pi",
    "canonical_order",
    "centroid",
    "convex_hull",
    "corners_from_box",
    "edge_directions",
    "internal_angles",
    "min_area_rect",
    "normalize_box_angle",
    "polygon_area",
    "quad_fit",
    "shoelace_area",
]
