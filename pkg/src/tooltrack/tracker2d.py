"""Per-frame box extraction: mask, components, contour, axis-aligned and
minimum-area rectangles, ordered corners.

Extraction is stateless per frame except for corner ordering, which is
threaded against the previous frame so corner index i keeps pointing at the
same physical corner while motion stays small.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import contours, geom2d
from .errors import GeometryError, InvariantError
from .frames_io import LabelFrame, PartConfig

log = logging.getLogger("tooltrack")


@dataclass(frozen=True)
class PartDetection:
    """One part in one frame: fitted boxes and ordered corners, if present."""

    part_id: int
    present: bool
    box: geom2d.OrientedBox | None = None
    corners: np.ndarray | None = None  # (4, 2) float, canonical order
    aabb: geom2d.AABB | None = None
    contour_px: int = 0
    quad_fallback: bool = False


@dataclass(frozen=True)
class Frame2DResult:
    """All per-part detections for one frame."""

    index: int
    width: int
    height: int
    parts: dict[int, PartDetection]

    def part(self, part_id: int) -> PartDetection:
        return self.parts[part_id]


def _aabb_gap(a: geom2d.AABB, b: geom2d.AABB) -> float:
    """Largest per-axis separation between two axis-aligned boxes (0 if touching)."""
    gx = max(a.x - (b.x + b.length), b.x - (a.x + a.length), 0.0)
    gy = max(a.y - (b.y + b.width), b.y - (a.y + a.width), 0.0)
    return max(gx, gy)


def _detect_part(
    frame: LabelFrame,
    cfg: PartConfig,
    box_mode: str,
    prev_corners: np.ndarray | None,
    overlap: tuple[int, int] | None,
) -> PartDetection:
    mask = contours.mask_by_range(frame, cfg, overlap=overlap)
    comps = contours.connected_components(mask)
    if not comps or comps[0].size < cfg.min_pixels:
        return PartDetection(part_id=cfg.part_id, present=False)
    comp = comps[0]

    try:
        contour = contours.trace_outer_contour(comp, min_pixels=cfg.min_pixels)
        aabb = contours.rect_bound(contour)
        pts = contour.points.astype(float)
        rect = geom2d.min_area_rect(pts)
    except GeometryError as exc:
        log.warning(
            "frame %d part %d: degenerate component (%s); treating as missing",
            frame.index,
            cfg.part_id,
            exc,
        )
        return PartDetection(part_id=cfg.part_id, present=False)

    # Contour points are pixel centers; a row of M pixels spans M-1 between
    # centers but occupies M pixels, so the fitted sides grow by one pixel.
    box = geom2d.OrientedBox(
        rect.cx, rect.cy, rect.length + 1.0, rect.width + 1.0, rect.theta
    )

    fallback = False
    if box_mode == "quad_fit":
        try:
            corners, fallback = geom2d.quad_fit(pts)
        except GeometryError:
            corners, _ = geom2d.corners_from_box(box)
            fallback = True
    else:
        corners, _ = geom2d.corners_from_box(box)

    corners = geom2d.canonical_order(corners, prev=prev_corners)

    lo = -1.0
    if (
        corners[:, 0].min() < lo
        or corners[:, 1].min() < lo
        or corners[:, 0].max() > frame.width + 1.0
        or corners[:, 1].max() > frame.height + 1.0
    ):
        raise InvariantError(
            f"frame {frame.index} part {cfg.part_id}: corners escape frame "
            f"bounds by more than 1 px"
        )

    return PartDetection(
        part_id=cfg.part_id,
        present=True,
        box=box,
        corners=corners,
        aabb=aabb,
        contour_px=contour.pixel_count,
        quad_fallback=fallback,
    )


def bound_box(
    frame: LabelFrame,
    parts: tuple[PartConfig, ...] | list[PartConfig],
    box_mode: str = "quad_fit",
    prev: Frame2DResult | None = None,
    overlap: tuple[int, int] | None = None,
    link_gap: float = 5.0,
) -> Frame2DResult:
    """Extract boxes and ordered corners for every configured part of one frame.

    A part with no component of at least ``min_pixels`` is flagged missing
    rather than raising. When both parts of a two-part instrument are present
    but their axis-aligned boxes sit farther apart than ``link_gap`` pixels,
    a warning is logged: connected parts should stay connected.
    """
    detections: dict[int, PartDetection] = {}
    for cfg in sorted(parts, key=lambda p: p.part_id):
        prev_corners = None
        if prev is not None:
            pd = prev.parts.get(cfg.part_id)
            if pd is not None and pd.present:
                prev_corners = pd.corners
        detections[cfg.part_id] = _detect_part(
            frame, cfg, box_mode, prev_corners, overlap
        )

    present = [d for d in detections.values() if d.present]
    if len(present) >= 2:
        for a, b in zip(present, present[1:]):
            gap = _aabb_gap(a.aabb, b.aabb)
            if gap > link_gap:
                log.warning(
                    "frame %d: parts %d and %d are %.1f px apart "
                    "(link gap tolerance %.1f px)",
                    frame.index,
                    a.part_id,
                    b.part_id,
                    gap,
                    link_gap,
                )

    return Frame2DResult(
        index=frame.index, width=frame.width, height=frame.height, parts=detections
    )


def track_sequence_2d(
    frames,
    parts: tuple[PartConfig, ...] | list[PartConfig],
    box_mode: str = "quad_fit",
    overlap: tuple[int, int] | None = None,
    link_gap: float = 5.0,
) -> list[Frame2DResult]:
    """Run box extraction over a frame sequence, threading corner order."""
    results: list[Frame2DResult] = []
    prev: Frame2DResult | None = None
    for frame in frames:
        res = bound_box(
            frame, parts, box_mode=box_mode, prev=prev, overlap=overlap,
            link_gap=link_gap,
        )
        results.append(res)
        prev = res
    return results
