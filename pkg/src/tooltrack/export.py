"""File exporters and readers: box dumps, track CSV/JSON, scene replay files.

All CSV files start with a ``#schema=v1`` line; the scene file is JSON lines
with a schema header record. Floats are written with ``repr`` so parsing a
file reproduces the exact same values.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .frames_io import CameraModel, TrackerOptions
from .geom2d import AABB, OrientedBox
from .pose3d import InstrumentTrack, PartPose, rotation_zyx, translation_matrix
from .tracker2d import Frame2DResult, PartDetection

CSV_SCHEMA = "#schema=v1"
TRACK_JSON_SCHEMA = "track.v1"
SCENE_SCHEMA = "scene.v1"

_BOX_COLUMNS = ["n", "k", "cx", "cy", "l", "w", "theta_rad", "present"]
_TRACK_COLUMNS = [
    "n", "k", "dx", "dy", "dz", "droll", "dpitch", "dyaw", "z_abs",
    "cum_x", "cum_y", "cum_z", "cum_roll", "cum_pitch", "cum_yaw",
    "reinit", "present",
]


def _r(v: float) -> str:
    return repr(float(v))


def write_boxes_csv(results: list[Frame2DResult], path) -> None:
    """Per-frame box dump: n, k, cx, cy, l, w, theta_rad, present."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(CSV_SCHEMA + "\n")
        writer = csv.writer(fh)
        writer.writerow(_BOX_COLUMNS)
        for res in results:
            for pid in sorted(res.parts):
                det = res.parts[pid]
                if det.present:
                    writer.writerow(
                        [res.index, pid, _r(det.box.cx), _r(det.box.cy),
                         _r(det.box.length), _r(det.box.width),
                         _r(det.box.theta), 1]
                    )
                else:
                    writer.writerow([res.index, pid, "", "", "", "", "", 0])


def write_track_csv(track: InstrumentTrack, path) -> None:
    """One row per frame and part; absent parts get empty numeric fields."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(CSV_SCHEMA + "\n")
        writer = csv.writer(fh)
        writer.writerow(_TRACK_COLUMNS)
        for n in track.frames:
            for pid in track.part_ids:
                pose = track.poses[pid].get(n)
                if pose is None:
                    writer.writerow([n, pid] + [""] * 13 + ["", 0])
                    continue
                writer.writerow(
                    [
                        n, pid,
                        _r(pose.dx), _r(pose.dy), _r(pose.dz),
                        _r(pose.droll), _r(pose.dpitch), _r(pose.dyaw),
                        _r(pose.z_abs),
                        _r(pose.cum_x), _r(pose.cum_y), _r(pose.cum_z),
                        _r(pose.cum_roll), _r(pose.cum_pitch), _r(pose.cum_yaw),
                        int(pose.reinit), 1,
                    ]
                )


def read_track_csv(path, focal_px: float = 1.0) -> InstrumentTrack:
    """Rebuild a track from its CSV. The camera focal length is not stored in
    the CSV; supply it if downstream code needs depth re-estimation. T and R
    are recomputed from the deltas (they are functions of them)."""
    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as fh:
        schema = fh.readline().strip()
        if schema != CSV_SCHEMA:
            raise DataError(
                f"{path}: unsupported track schema {schema!r}, expected {CSV_SCHEMA!r}"
            )
        reader = csv.reader(fh)
        header = next(reader)
        if header != _TRACK_COLUMNS:
            raise DataError(f"{path}: unexpected track columns {header}")
        rows = [r for r in reader if r]

    frames = sorted({int(r[0]) for r in rows})
    part_ids = sorted({int(r[1]) for r in rows})
    poses: dict[int, dict[int, PartPose]] = {pid: {} for pid in part_ids}
    missing: dict[int, list[int]] = {pid: [] for pid in part_ids}
    reinit_events: list[tuple[int, int]] = []
    for r in rows:
        n, pid = int(r[0]), int(r[1])
        if r[16] != "1":
            missing[pid].append(n)
            continue
        vals = [float(v) for v in r[2:15]]
        reinit = r[15] == "1"
        pose = PartPose(
            frame=n, part_id=pid,
            dx=vals[0], dy=vals[1], dz=vals[2],
            droll=vals[3], dpitch=vals[4], dyaw=vals[5],
            z_abs=vals[6], area=math.nan, scale=math.nan,
            cum_x=vals[7], cum_y=vals[8], cum_z=vals[9],
            cum_roll=vals[10], cum_pitch=vals[11], cum_yaw=vals[12],
            reinit=reinit,
            T=translation_matrix(vals[0], vals[1], vals[2]),
            R=rotation_zyx(vals[3], vals[4], vals[5]),
        )
        poses[pid][n] = pose
        if reinit:
            reinit_events.append((n, pid))
    return InstrumentTrack(
        camera=CameraModel(focal_px),
        options=TrackerOptions(),
        part_ids=part_ids,
        frames=frames,
        poses=poses,
        reinit_events=reinit_events,
        missing=missing,
        results2d=None,
    )


def _pose_to_json(pose: PartPose, det: PartDetection | None) -> dict:
    doc = {
        "k": pose.part_id,
        "present": True,
        "reinit": pose.reinit,
        "dx": pose.dx, "dy": pose.dy, "dz": pose.dz,
        "droll": pose.droll, "dpitch": pose.dpitch, "dyaw": pose.dyaw,
        "z_abs": pose.z_abs, "area": pose.area, "scale": pose.scale,
        "cum": [pose.cum_x, pose.cum_y, pose.cum_z,
                pose.cum_roll, pose.cum_pitch, pose.cum_yaw],
        "T": pose.T.tolist(),
        "R": pose.R.tolist(),
    }
    if det is not None and det.present:
        doc["box"] = {
            "cx": det.box.cx, "cy": det.box.cy, "l": det.box.length,
            "w": det.box.width, "theta": det.box.theta,
        }
        doc["corners"] = det.corners.tolist()
        doc["aabb"] = [det.aabb.x, det.aabb.y, det.aabb.length, det.aabb.width]
        doc["contour_px"] = det.contour_px
        doc["quad_fallback"] = det.quad_fallback
    return doc


def write_track_json(track: InstrumentTrack, path) -> None:
    """Full-fidelity track mirror including matrices and per-frame boxes."""
    results_by_frame = {}
    size = None
    if track.results2d is not None:
        results_by_frame = {r.index: r for r in track.results2d}
        if track.results2d:
            size = [track.results2d[0].width, track.results2d[0].height]
    frames_doc = []
    for n in track.frames:
        parts_doc = []
        for pid in track.part_ids:
            pose = track.poses[pid].get(n)
            if pose is None:
                parts_doc.append({"k": pid, "present": False})
                continue
            det = None
            res = results_by_frame.get(n)
            if res is not None:
                det = res.parts.get(pid)
            parts_doc.append(_pose_to_json(pose, det))
        frames_doc.append({"n": n, "parts": parts_doc})
    doc = {
        "schema": TRACK_JSON_SCHEMA,
        "camera": {"focal_px": track.camera.focal_px},
        "options": {
            "box_mode": track.options.box_mode,
            "angle_convention": track.options.angle_convention,
            "scale_mode": track.options.scale_mode,
            "link_gap": track.options.link_gap,
            "area_jump": track.options.area_jump,
            "centroid_jump": track.options.centroid_jump,
        },
        "frame_size": size,
        "parts": track.part_ids,
        "frames": frames_doc,
    }
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


def read_track_json(path) -> InstrumentTrack:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read track file {path}: {exc}") from exc
    if doc.get("schema") != TRACK_JSON_SCHEMA:
        raise DataError(
            f"{path}: unsupported track schema {doc.get('schema')!r}, "
            f"expected {TRACK_JSON_SCHEMA!r}"
        )
    camera = CameraModel(float(doc["camera"]["focal_px"]))
    opt = doc.get("options", {})
    options = TrackerOptions(
        box_mode=opt.get("box_mode", "quad_fit"),
        angle_convention=opt.get("angle_convention", "a14"),
        scale_mode=opt.get("scale_mode", "per_frame"),
        link_gap=float(opt.get("link_gap", 5.0)),
        area_jump=float(opt.get("area_jump", 0.5)),
        centroid_jump=float(opt.get("centroid_jump", 0.2)),
    )
    part_ids = [int(k) for k in doc["parts"]]
    size = doc.get("frame_size") or [0, 0]
    frames: list[int] = []
    poses: dict[int, dict[int, PartPose]] = {pid: {} for pid in part_ids}
    missing: dict[int, list[int]] = {pid: [] for pid in part_ids}
    reinit_events: list[tuple[int, int]] = []
    results: list[Frame2DResult] = []
    have_boxes = False
    for fd in doc["frames"]:
        n = int(fd["n"])
        frames.append(n)
        dets: dict[int, PartDetection] = {}
        for pd in fd["parts"]:
            pid = int(pd["k"])
            if not pd.get("present", False):
                missing[pid].append(n)
                dets[pid] = PartDetection(part_id=pid, present=False)
                continue
            cum = pd["cum"]
            pose = PartPose(
                frame=n, part_id=pid,
                dx=float(pd["dx"]), dy=float(pd["dy"]), dz=float(pd["dz"]),
                droll=float(pd["droll"]), dpitch=float(pd["dpitch"]),
                dyaw=float(pd["dyaw"]),
                z_abs=float(pd["z_abs"]), area=float(pd["area"]),
                scale=float(pd["scale"]),
                cum_x=float(cum[0]), cum_y=float(cum[1]), cum_z=float(cum[2]),
                cum_roll=float(cum[3]), cum_pitch=float(cum[4]),
                cum_yaw=float(cum[5]),
                reinit=bool(pd["reinit"]),
                T=np.array(pd["T"], dtype=float),
                R=np.array(pd["R"], dtype=float),
            )
            poses[pid][n] = pose
            if pose.reinit:
                reinit_events.append((n, pid))
            if "box" in pd:
                have_boxes = True
                b = pd["box"]
                aabb = pd.get("aabb", [0, 0, 0, 0])
                dets[pid] = PartDetection(
                    part_id=pid,
                    present=True,
                    box=OrientedBox(
                        float(b["cx"]), float(b["cy"]), float(b["l"]),
                        float(b["w"]), float(b["theta"]),
                    ),
                    corners=np.array(pd["corners"], dtype=float),
                    aabb=AABB(aabb[0], aabb[1], aabb[2], aabb[3]),
                    contour_px=int(pd.get("contour_px", 0)),
                    quad_fallback=bool(pd.get("quad_fallback", False)),
                )
            else:
                dets[pid] = PartDetection(part_id=pid, present=False)
        results.append(
            Frame2DResult(index=n, width=size[0], height=size[1], parts=dets)
        )
    return InstrumentTrack(
        camera=camera,
        options=options,
        part_ids=part_ids,
        frames=frames,
        poses=poses,
        reinit_events=reinit_events,
        missing=missing,
        results2d=results if have_boxes else None,
    )


# ---------------------------------------------------------------------------
# Scene replay export
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SceneCylinder:
    """One rendered cylinder: base point, unit axis, length, radius."""

    part_id: int
    base: tuple[float, float, float]
    axis: tuple[float, float, float]
    length: float
    radius: float
    anchored: bool  # True when the base sits on the shaft tip


@dataclass(frozen=True)
class SceneFrame:
    index: int
    cylinders: tuple[SceneCylinder, ...]


def _unit2(theta: float) -> np.ndarray:
    return np.array((math.cos(theta), math.sin(theta), 0.0))


def build_scene(track: InstrumentTrack, shaft_id: int = 2, clasper_id: int = 1) -> list[SceneFrame]:
    """Derive per-frame cylinders from the track and its boxes.

    Cylinder length equals the box length, radius half the box width, both
    in pixels; depth comes from the cumulative track. The clasper's base is
    pinned to the shaft tip (the shaft end nearest the clasper's center)
    whenever both parts are present.
    """
    if track.results2d is None:
        raise DataError("track carries no 2D boxes; cannot build a scene")
    results_by_frame = {r.index: r for r in track.results2d}
    scene: list[SceneFrame] = []
    for n in track.frames:
        res = results_by_frame.get(n)
        cylinders: list[SceneCylinder] = []
        shaft_tip: np.ndarray | None = None
        shaft_center2: np.ndarray | None = None

        spose = track.poses.get(shaft_id, {}).get(n)
        sdet = res.parts.get(shaft_id) if res else None
        cpose = track.poses.get(clasper_id, {}).get(n)
        cdet = res.parts.get(clasper_id) if res else None

        if spose is not None and sdet is not None and sdet.present:
            center = np.array((spose.cum_x, spose.cum_y, spose.cum_z))
            shaft_center2 = center[:2]
            axis = _unit2(sdet.box.theta)
            sign = 1.0
            if cpose is not None and cdet is not None and cdet.present:
                toward = np.array((cpose.cum_x, cpose.cum_y)) - center[:2]
                if float(np.dot(axis[:2], toward)) < 0:
                    sign = -1.0
            axis = sign * axis
            half = sdet.box.length / 2.0
            base = center - half * axis
            shaft_tip = center + half * axis
            cylinders.append(
                SceneCylinder(
                    part_id=shaft_id,
                    base=tuple(float(v) for v in base),
                    axis=tuple(float(v) for v in axis),
                    length=float(sdet.box.length),
                    radius=float(sdet.box.width / 2.0),
                    anchored=False,
                )
            )

        if cpose is not None and cdet is not None and cdet.present:
            center = np.array((cpose.cum_x, cpose.cum_y, cpose.cum_z))
            axis = _unit2(cdet.box.theta)
            if shaft_tip is not None:
                away = center[:2] - shaft_tip[:2]
                if float(np.dot(axis[:2], away)) < 0:
                    axis = -axis
                base = shaft_tip
                anchored = True
            else:
                base = center - (cdet.box.length / 2.0) * axis
                anchored = False
            cylinders.append(
                SceneCylinder(
                    part_id=clasper_id,
                    base=tuple(float(v) for v in base),
                    axis=tuple(float(v) for v in axis),
                    length=float(cdet.box.length),
                    radius=float(cdet.box.width / 2.0),
                    anchored=anchored,
                )
            )
        scene.append(SceneFrame(index=n, cylinders=tuple(cylinders)))
    return scene


def write_scene(scene: list[SceneFrame], path) -> None:
    """JSON-lines scene file: a schema record, then one record per frame."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": SCENE_SCHEMA}) + "\n")
        for frame in scene:
            doc = {
                "n": frame.index,
                "cylinders": [
                    {
                        "k": c.part_id,
                        "base": list(c.base),
                        "axis": list(c.axis),
                        "length": c.length,
                        "radius": c.radius,
                        "anchored": c.anchored,
                    }
                    for c in frame.cylinders
                ],
            }
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


def read_scene(path) -> list[SceneFrame]:
    path = Path(path)
    frames: list[SceneFrame] = []
    with path.open("r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("schema") != SCENE_SCHEMA:
            raise DataError(
                f"{path}: unsupported scene schema {header.get('schema')!r}, "
                f"expected {SCENE_SCHEMA!r}"
            )
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            frames.append(
                SceneFrame(
                    index=int(doc["n"]),
                    cylinders=tuple(
                        SceneCylinder(
                            part_id=int(c["k"]),
                            base=tuple(float(v) for v in c["base"]),
                            axis=tuple(float(v) for v in c["axis"]),
                            length=float(c["length"]),
                            radius=float(c["radius"]),
                            anchored=bool(c["anchored"]),
                        )
                        for c in doc["cylinders"]
                    ),
                )
            )
    return frames


def export_scene(track: InstrumentTrack, path, shaft_id: int = 2, clasper_id: int = 1) -> list[SceneFrame]:
    """Build and write the scene file; returns the frames written."""
    scene = build_scene(track, shaft_id=shaft_id, clasper_id=clasper_id)
    write_scene(scene, path)
    return scene
