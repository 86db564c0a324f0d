"""Binary masking, connected components, and outer boundary tracing.

Masks come straight from intensity ranges on the label frame; components use
8-connectivity; the outer boundary is traced with Moore neighbor following,
which is all the downstream rectangle fitting needs (holes are ignored).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError, GeometryError
from .frames_io import LabelFrame, PartConfig
from .geom2d import AABB

_EIGHT = np.ones((3, 3), dtype=bool)

# Clockwise Moore neighborhood in (row, col) with rows increasing downward.
_NEIGHBORS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
_NEIGHBOR_INDEX = {d: i for i, d in enumerate(_NEIGHBORS)}


@dataclass(frozen=True)
class BinaryMask:
    """Foreground pixels of one part in one frame."""

    part_id: int
    fg: np.ndarray  # (height, width) bool

    @property
    def width(self) -> int:
        return self.fg.shape[1]

    @property
    def height(self) -> int:
        return self.fg.shape[0]

    @property
    def count(self) -> int:
        return int(self.fg.sum())


@dataclass(frozen=True)
class Component:
    """One 8-connected foreground component, pixels in row-major order."""

    part_id: int
    pixels: np.ndarray  # (N, 2) int32, (row, col)

    @property
    def size(self) -> int:
        return len(self.pixels)


@dataclass(frozen=True)
class Contour:
    """Closed outer boundary of a component, ordered counter-clockwise.

    Points are (x, y) pixel coordinates; consecutive points are 8-adjacent
    and distinct. ``pixel_count`` is the size of the enclosed component.
    """

    part_id: int
    points: np.ndarray  # (N, 2) int32, (x, y)
    pixel_count: int


def mask_by_range(
    frame: LabelFrame,
    cfg: PartConfig,
    overlap: tuple[int, int] | None = None,
) -> BinaryMask:
    """Foreground = pixels inside the part's inclusive intensity range.

    When an overlap range is declared, its pixels are OR-ed in as well: the
    linkage region between connected parts belongs to both of them.
    """
    px = frame.pixels
    fg = (px >= cfg.intensity_lo) & (px <= cfg.intensity_hi)
    if overlap is not None:
        lo, hi = overlap
        fg = fg | ((px >= lo) & (px <= hi))
    return BinaryMask(part_id=cfg.part_id, fg=fg)


def connected_components(mask: BinaryMask) -> list[Component]:
    """8-connected components, sorted by descending size (ties: first pixel)."""
    labeled, n = ndimage.label(mask.fg, structure=_EIGHT)
    if n == 0:
        return []
    flat = labeled.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=n + 1)
    start = int(counts[0])
    h, w = mask.fg.shape
    comps = []
    for label in range(1, n + 1):
        stop = start + int(counts[label])
        idx = order[start:stop]
        pixels = np.stack((idx // w, idx % w), axis=1).astype(np.int32)
        comps.append(Component(part_id=mask.part_id, pixels=pixels))
        start = stop
    comps.sort(key=lambda c: (-c.size, int(c.pixels[0, 0]), int(c.pixels[0, 1])))
    return comps


def trace_outer_contour(comp: Component, min_pixels: int = 1) -> Contour:
    """Moore boundary trace of the component's outer border.

    Walks the 8-neighborhood clockwise from the previous backtrack position
    and stops when the start pixel is re-entered the same way, so the outer
    border (and only it) is followed. Output is reoriented counter-clockwise
    in mathematical convention (positive shoelace on x right, y up).
    """
    if comp.size < min_pixels:
        raise DataError(
            f"component of {comp.size} px is below min_pixels={min_pixels}"
        )
    rows = comp.pixels[:, 0]
    cols = comp.pixels[:, 1]
    r0, c0 = int(rows.min()) - 1, int(cols.min()) - 1
    local = np.zeros((int(rows.max()) - r0 + 2, int(cols.max()) - c0 + 2), dtype=bool)
    local[rows - r0, cols - c0] = True

    # Row-major first pixel: top row, leftmost; its west neighbor is background.
    start = (int(rows[0]) - r0, int(cols[0]) - c0)
    # Walk the deterministic (pixel, backtrack) state machine until a state
    # repeats; the periodic part of the trail is the closed outer boundary.
    state = (start, (start[0], start[1] - 1))
    seen: dict[tuple, int] = {}
    trail: list[tuple[int, int]] = []
    isolated = False
    while state not in seen:
        seen[state] = len(trail)
        cur, back = state
        trail.append(cur)
        d0 = _NEIGHBOR_INDEX[(back[0] - cur[0], back[1] - cur[1])]
        nxt = None
        for k in range(1, 9):
            dr, dc = _NEIGHBORS[(d0 + k) % 8]
            cand = (cur[0] + dr, cur[1] + dc)
            if local[cand]:
                prev_dr, prev_dc = _NEIGHBORS[(d0 + k - 1) % 8]
                nxt = (cand, (cur[0] + prev_dr, cur[1] + prev_dc))
                break
        if nxt is None:
            isolated = True
            break
        state = nxt
    if not isolated:
        trail = trail[seen[state] :]

    pts: list[tuple[int, int]] = []
    for p in trail:
        if not pts or p != pts[-1]:
            pts.append(p)
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts.pop()
    if len(pts) < 3:
        raise GeometryError(
            f"contour of component with {comp.size} px degenerates to "
            f"{len(pts)} point(s); need at least 3"
        )

    xy = np.array([(c + c0, r + r0) for r, c in pts], dtype=np.int32)
    x, y = xy[:, 0].astype(float), xy[:, 1].astype(float)
    signed = float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    if signed < 0:
        xy = xy[::-1].copy()
    return Contour(part_id=comp.part_id, points=xy, pixel_count=comp.size)


def rect_bound(contour: Contour) -> AABB:
    """Tightest axis-aligned pixel rectangle around the contour.

    Side lengths use pixel-count semantics: a single-row contour has width 1.
    """
    x = contour.points[:, 0]
    y = contour.points[:, 1]
    return AABB(
        x=int(x.min()),
        y=int(y.min()),
        length=int(x.max() - x.min() + 1),
        width=int(y.max() - y.min() + 1),
    )
