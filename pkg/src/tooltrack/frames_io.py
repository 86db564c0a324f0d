"""Loading of segmentation label-map sequences and pipeline configuration.

Frame files are 8-bit single-channel images (PNG or PGM), one per frame,
named ``<stem><zero-padded index>.<ext>`` with 1-based contiguous indices.
RGB input is reduced to grayscale with the usual luminosity weights before
masking. The configuration is a single JSON document; unknown keys are
rejected so typos fail loudly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError, DataError, FrameFormatError, SequenceGapError

_FRAME_NUMBER = re.compile(r"(\d+)$")
_FRAME_SUFFIXES = (".png", ".pgm")

BOX_MODES = ("min_rect", "quad_fit")
ANGLE_CONVENTIONS = ("a14", "a12")
SCALE_MODES = ("per_frame", "cumulative")


@dataclass(frozen=True)
class LabelFrame:
    """One segmentation frame: 8-bit intensity labels on a row-major grid."""

    index: int
    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise FrameFormatError(f"frame {self.index}: non-positive dimensions")
        if self.pixels.shape != (self.height, self.width):
            raise FrameFormatError(
                f"frame {self.index}: pixel grid {self.pixels.shape} does not "
                f"match {self.height}x{self.width}"
            )
        if self.pixels.dtype != np.uint8:
            raise FrameFormatError(f"frame {self.index}: pixels must be uint8")

    def __eq__(self, other):
        if not isinstance(other, LabelFrame):
            return NotImplemented
        return (
            self.index == other.index
            and self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True)
class PartConfig:
    """Intensity range and size floor identifying one instrument part."""

    part_id: int
    name: str
    intensity_lo: int
    intensity_hi: int
    min_pixels: int = 25

    def __post_init__(self):
        if not 0 <= self.intensity_lo <= self.intensity_hi <= 255:
            raise ConfigError(
                f"part {self.part_id}: intensity range "
                f"[{self.intensity_lo}, {self.intensity_hi}] is not a valid "
                f"8-bit range"
            )
        if self.min_pixels < 1:
            raise ConfigError(f"part {self.part_id}: min_pixels must be >= 1")


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera reduced to a focal length in pixels."""

    focal_px: float

    def __post_init__(self):
        if not self.focal_px > 0:
            raise ConfigError(f"camera.focal_px must be > 0, got {self.focal_px}")


@dataclass(frozen=True)
class TrackerOptions:
    """Tunable pipeline behavior; defaults match the shipped configuration."""

    box_mode: str = "quad_fit"
    angle_convention: str = "a14"
    scale_mode: str = "per_frame"
    link_gap: float = 5.0
    area_jump: float = 0.5
    centroid_jump: float = 0.2

    def __post_init__(self):
        if self.box_mode not in BOX_MODES:
            raise ConfigError(f"box_mode must be one of {BOX_MODES}")
        if self.angle_convention not in ANGLE_CONVENTIONS:
            raise ConfigError(f"angle_convention must be one of {ANGLE_CONVENTIONS}")
        if self.scale_mode not in SCALE_MODES:
            raise ConfigError(f"scale_mode must be one of {SCALE_MODES}")
        if self.link_gap < 0:
            raise ConfigError("link_gap must be >= 0")
        if not self.area_jump > 0:
            raise ConfigError("reinit.area_jump must be > 0")
        if not self.centroid_jump > 0:
            raise ConfigError("reinit.centroid_jump must be > 0")


@dataclass(frozen=True)
class TrackConfig:
    """Full parsed configuration: parts, camera, tracker options, output paths."""

    parts: tuple[PartConfig, ...]
    camera: CameraModel
    tracker: TrackerOptions = TrackerOptions()
    overlap: tuple[int, int] | None = None
    output: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.parts:
            raise ConfigError("config must declare at least one part")
        ids = [p.part_id for p in self.parts]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate part ids: {ids}")
        ranges = [(p.intensity_lo, p.intensity_hi, f"part {p.part_id}") for p in self.parts]
        if self.overlap is not None:
            lo, hi = self.overlap
            if not 0 <= lo <= hi <= 255:
                raise ConfigError(f"overlap range [{lo}, {hi}] is not a valid 8-bit range")
            ranges.append((lo, hi, "overlap"))
        ranges.sort()
        for (lo_a, hi_a, name_a), (lo_b, hi_b, name_b) in zip(ranges, ranges[1:]):
            if lo_b <= hi_a:
                raise ConfigError(
                    f"intensity ranges overlap: {name_a} [{lo_a}, {hi_a}] and "
                    f"{name_b} [{lo_b}, {hi_b}]"
                )

    def part(self, part_id: int) -> PartConfig:
        for p in self.parts:
            if p.part_id == part_id:
                return p
        raise KeyError(part_id)


def _require_keys(obj: dict, allowed: set[str], context: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {sorted(unknown)}")


def _get(obj: dict, key: str, context: str):
    if key not in obj:
        raise ConfigError(f"missing required key '{key}' in {context}")
    return obj[key]


def config_from_dict(doc: dict) -> TrackConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    _require_keys(doc, {"camera", "parts", "overlap", "tracker", "output"}, "config")

    cam_doc = _get(doc, "camera", "config")
    _require_keys(cam_doc, {"focal_px"}, "camera")
    camera = CameraModel(float(_get(cam_doc, "focal_px", "camera")))

    parts_doc = _get(doc, "parts", "config")
    if not isinstance(parts_doc, list) or not parts_doc:
        raise ConfigError("'parts' must be a non-empty list")
    parts = []
    for i, pd in enumerate(parts_doc):
        ctx = f"parts[{i}]"
        _require_keys(pd, {"id", "name", "lo", "hi", "min_pixels"}, ctx)
        parts.append(
            PartConfig(
                part_id=int(_get(pd, "id", ctx)),
                name=str(pd.get("name", f"part{pd.get('id', i)}")),
                intensity_lo=int(_get(pd, "lo", ctx)),
                intensity_hi=int(_get(pd, "hi", ctx)),
                min_pixels=int(pd.get("min_pixels", 25)),
            )
        )

    overlap = None
    if "overlap" in doc and doc["overlap"] is not None:
        od = doc["overlap"]
        _require_keys(od, {"lo", "hi"}, "overlap")
        overlap = (int(_get(od, "lo", "overlap")), int(_get(od, "hi", "overlap")))

    tracker = TrackerOptions()
    if "tracker" in doc:
        td = doc["tracker"]
        _require_keys(
            td,
            {"box_mode", "angle_convention", "scale_mode", "link_gap", "reinit"},
            "tracker",
        )
        kwargs = {}
        for key in ("box_mode", "angle_convention", "scale_mode"):
            if key in td:
                kwargs[key] = str(td[key])
        if "link_gap" in td:
            kwargs["link_gap"] = float(td["link_gap"])
        if "reinit" in td:
            rd = td["reinit"]
            _require_keys(rd, {"area_jump", "centroid_jump"}, "tracker.reinit")
            if "area_jump" in rd:
                kwargs["area_jump"] = float(rd["area_jump"])
            if "centroid_jump" in rd:
                kwargs["centroid_jump"] = float(rd["centroid_jump"])
        tracker = TrackerOptions(**kwargs)

    output = doc.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError("'output' must be an object")
    return TrackConfig(
        parts=tuple(parts),
        camera=camera,
        tracker=tracker,
        overlap=overlap,
        output=dict(output),
    )


def config_to_dict(cfg: TrackConfig) -> dict:
    """Serialize with defaults materialized; load(dump(cfg)) == cfg."""
    doc: dict = {
        "camera": {"focal_px": cfg.camera.focal_px},
        "parts": [
            {
                "id": p.part_id,
                "name": p.name,
                "lo": p.intensity_lo,
                "hi": p.intensity_hi,
                "min_pixels": p.min_pixels,
            }
            for p in cfg.parts
        ],
        "tracker": {
            "box_mode": cfg.tracker.box_mode,
            "angle_convention": cfg.tracker.angle_convention,
            "scale_mode": cfg.tracker.scale_mode,
            "link_gap": cfg.tracker.link_gap,
            "reinit": {
                "area_jump": cfg.tracker.area_jump,
                "centroid_jump": cfg.tracker.centroid_jump,
            },
        },
        "output": dict(cfg.output),
    }
    if cfg.overlap is not None:
        doc["overlap"] = {"lo": cfg.overlap[0], "hi": cfg.overlap[1]}
    return doc


def load_config(path) -> TrackConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


def save_config(cfg: TrackConfig, path) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def with_overrides(cfg: TrackConfig, **tracker_overrides) -> TrackConfig:
    """Return a config whose tracker options are selectively replaced."""
    clean = {k: v for k, v in tracker_overrides.items() if v is not None}
    if not clean:
        return cfg
    return replace(cfg, tracker=replace(cfg.tracker, **clean))


def _read_label_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode in ("RGB", "RGBA", "P"):
                img = img.convert("L")
            elif img.mode != "L":
                raise FrameFormatError(
                    f"{path.name}: unsupported image mode {img.mode!r}; "
                    "frames must be 8-bit grayscale"
                )
            return np.asarray(img, dtype=np.uint8)
    except FrameFormatError:
        raise
    except OSError as exc:
        raise DataError(f"cannot read frame file {path}: {exc}") from exc


def load_sequence(path, pattern: str = "*") -> list[LabelFrame]:
    """Load all frames matching ``pattern`` under ``path``, sorted by frame number.

    Frame numbers are the trailing digits of each file stem; they must start
    at 1 or above and be contiguous. All frames must share dimensions.
    """
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"frame directory not found: {root}")
    by_index: dict[int, Path] = {}
    for f in sorted(root.glob(pattern)):
        if f.suffix.lower() not in _FRAME_SUFFIXES:
            continue
        m = _FRAME_NUMBER.search(f.stem)
        if m is None:
            raise FrameFormatError(f"{f.name}: no trailing frame number in filename")
        idx = int(m.group(1))
        if idx in by_index:
            raise FrameFormatError(
                f"duplicate frame number {idx}: {by_index[idx].name} and {f.name}"
            )
        by_index[idx] = f
    if not by_index:
        raise DataError(f"no frame files matching {pattern!r} in {root}")

    indices = sorted(by_index)
    if indices[0] < 1:
        raise FrameFormatError(f"frame numbering must start at 1, found {indices[0]}")
    for expected, actual in zip(range(indices[0], indices[-1] + 1), indices):
        if actual != expected:
            raise SequenceGapError(f"missing frame {expected} in sequence {root}")

    frames: list[LabelFrame] = []
    shape: tuple[int, int] | None = None
    for idx in indices:
        px = _read_label_image(by_index[idx])
        if shape is None:
            shape = px.shape
        elif px.shape != shape:
            raise FrameFormatError(
                f"frame {idx} has size {px.shape[1]}x{px.shape[0]}, expected "
                f"{shape[1]}x{shape[0]}"
            )
        frames.append(
            LabelFrame(index=idx, width=px.shape[1], height=px.shape[0], pixels=px)
        )
    return frames


def save_sequence(frames, path, stem: str = "frame_", ext: str = "png") -> list[Path]:
    """Write frames as ``<stem><zero-padded index>.<ext>``; returns the paths."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(max(f.index for f in frames))))
    out = []
    for f in frames:
        p = root / f"{stem}{f.index:0{width}d}.{ext}"
        Image.fromarray(f.pixels, mode="L").save(p)
        out.append(p)
    return out
