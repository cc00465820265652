"""Bit-exact file formats: CSV point tables, the binary feature-map file,
flat key=value texts, and sequence-bundle layout on disk.

All CSV formats are UTF-8, comma-separated, with one exact header line;
floats are serialized with up to 6 significant decimals and parsing is the
exact inverse of writing at that precision.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ddcf import FeatureMap
from .errors import FormatError, ParseError

DETECTIONS_HEADER = "frame,x,y,conf"
DETECTIONS_HEADER_SCORED = "frame,x,y,conf,score"
METADATA_HEADER = "frame,altitude"
CORRESPONDENCES_HEADER = "frame,prev_x,prev_y,cur_x,cur_y"
GT_HEADER = "frame,id,x,y"
TRACKS_HEADER = "frame,id,x,y,conf,source"

TRACK_SOURCES = ("detection", "ddcf", "coasted")

FMAP_MAGIC = b"FMAP"
FMAP_VERSION = 1

DETECTIONS_NAME = "detections.csv"
METADATA_NAME = "metadata.csv"
CORRESPONDENCES_NAME = "correspondences.csv"
GT_NAME = "gt.csv"
FEATURES_DIRNAME = "features"
MANIFEST_NAME = "manifest.txt"


@dataclass(frozen=True)
class Detection:
    """A point observation in one frame."""

    frame: int
    x: float
    y: float
    conf: float
    score: float | None = None  # optional external classifier probability


@dataclass(frozen=True)
class MetadataRow:
    frame: int
    altitude: float


@dataclass(frozen=True)
class CorrespondenceRow:
    """A background keypoint matched from frame-1 to frame."""

    frame: int
    prev_x: float
    prev_y: float
    cur_x: float
    cur_y: float


@dataclass(frozen=True)
class TrackRow:
    frame: int
    track_id: int
    x: float
    y: float
    conf: float
    source: str


@dataclass(frozen=True)
class GtRow:
    frame: int
    track_id: int
    x: float
    y: float


def format_float(v: float) -> str:
    return f"{float(v):.6g}"


def _split_lines(text: str) -> list[str]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [line.rstrip("\r") for line in lines]


def _check_header(lines: list[str], expected: str | tuple[str, ...]) -> str:
    variants = (expected,) if isinstance(expected, str) else expected
    if not lines:
        raise ParseError(f"empty file, expected header {variants[0]!r}", line=1)
    if lines[0] not in variants:
        raise ParseError(f"bad header {lines[0]!r}, expected {' or '.join(map(repr, variants))}", line=1)
    return lines[0]


def _int_field(raw: str, name: str, lineno: int, minimum: int = 0) -> int:
    try:
        v = int(raw)
    except ValueError:
        raise ParseError(f"non-numeric {name} {raw!r}", line=lineno) from None
    if v < minimum:
        raise ParseError(f"{name} must be >= {minimum}, got {v}", line=lineno)
    return v


def _float_field(raw: str, name: str, lineno: int,
                 lo: float | None = None, hi: float | None = None) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ParseError(f"non-numeric {name} {raw!r}", line=lineno) from None
    if not np.isfinite(v):
        raise ParseError(f"non-finite {name} {raw!r}", line=lineno)
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ParseError(f"{name} {v} outside [{lo}, {hi}]", line=lineno)
    return v


def _fields(line: str, n: int, lineno: int) -> list[str]:
    parts = line.split(",")
    if len(parts) != n:
        raise ParseError(f"expected {n} fields, got {len(parts)}", line=lineno)
    return parts


# --- detections ---

def parse_detections(text: str) -> list[Detection]:
    lines = _split_lines(text)
    header = _check_header(lines, (DETECTIONS_HEADER, DETECTIONS_HEADER_SCORED))
    scored = header == DETECTIONS_HEADER_SCORED
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = _fields(line, 5 if scored else 4, lineno)
        out.append(Detection(
            frame=_int_field(parts[0], "frame", lineno),
            x=_float_field(parts[1], "x", lineno),
            y=_float_field(parts[2], "y", lineno),
            conf=_float_field(parts[3], "conf", lineno, 0.0, 1.0),
            score=_float_field(parts[4], "score", lineno, 0.0, 1.0) if scored else None,
        ))
    return out


def write_detections(dets: list[Detection]) -> str:
    scored = any(d.score is not None for d in dets)
    rows = [DETECTIONS_HEADER_SCORED if scored else DETECTIONS_HEADER]
    for d in dets:
        row = [str(d.frame), format_float(d.x), format_float(d.y), format_float(d.conf)]
        if scored:
            row.append(format_float(0.0 if d.score is None else d.score))
        rows.append(",".join(row))
    return "\n".join(rows) + "\n"


# --- metadata ---

def parse_metadata(text: str) -> list[MetadataRow]:
    lines = _split_lines(text)
    _check_header(lines, METADATA_HEADER)
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = _fields(line, 2, lineno)
        out.append(MetadataRow(
            frame=_int_field(parts[0], "frame", lineno),
            altitude=_float_field(parts[1], "altitude", lineno),
        ))
    return out


def write_metadata(rows: list[MetadataRow]) -> str:
    out = [METADATA_HEADER]
    out += [f"{r.frame},{format_float(r.altitude)}" for r in rows]
    return "\n".join(out) + "\n"


# --- correspondences ---

def parse_correspondences(text: str) -> list[CorrespondenceRow]:
    lines = _split_lines(text)
    _check_header(lines, CORRESPONDENCES_HEADER)
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = _fields(line, 5, lineno)
        out.append(CorrespondenceRow(
            frame=_int_field(parts[0], "frame", lineno),
            prev_x=_float_field(parts[1], "prev_x", lineno),
            prev_y=_float_field(parts[2], "prev_y", lineno),
            cur_x=_float_field(parts[3], "cur_x", lineno),
            cur_y=_float_field(parts[4], "cur_y", lineno),
        ))
    return out


def write_correspondences(rows: list[CorrespondenceRow]) -> str:
    out = [CORRESPONDENCES_HEADER]
    for r in rows:
        out.append(",".join([str(r.frame), format_float(r.prev_x), format_float(r.prev_y),
                             format_float(r.cur_x), format_float(r.cur_y)]))
    return "\n".join(out) + "\n"


# --- ground truth ---

def parse_gt(text: str) -> list[GtRow]:
    lines = _split_lines(text)
    _check_header(lines, GT_HEADER)
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = _fields(line, 4, lineno)
        out.append(GtRow(
            frame=_int_field(parts[0], "frame", lineno),
            track_id=_int_field(parts[1], "id", lineno, minimum=1),
            x=_float_field(parts[2], "x", lineno),
            y=_float_field(parts[3], "y", lineno),
        ))
    return out


def write_gt(rows: list[GtRow]) -> str:
    out = [GT_HEADER]
    for r in rows:
        out.append(",".join([str(r.frame), str(r.track_id),
                             format_float(r.x), format_float(r.y)]))
    return "\n".join(out) + "\n"


# --- tracks ---

def parse_tracks(text: str) -> list[TrackRow]:
    lines = _split_lines(text)
    _check_header(lines, TRACKS_HEADER)
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = _fields(line, 6, lineno)
        source = parts[5]
        if source not in TRACK_SOURCES:
            raise ParseError(f"unknown source {source!r}", line=lineno)
        out.append(TrackRow(
            frame=_int_field(parts[0], "frame", lineno),
            track_id=_int_field(parts[1], "id", lineno, minimum=1),
            x=_float_field(parts[2], "x", lineno),
            y=_float_field(parts[3], "y", lineno),
            conf=_float_field(parts[4], "conf", lineno, 0.0, 1.0),
            source=source,
        ))
    return out


def write_tracks(rows: list[TrackRow]) -> str:
    out = [TRACKS_HEADER]
    for r in rows:
        out.append(",".join([str(r.frame), str(r.track_id), format_float(r.x),
                             format_float(r.y), format_float(r.conf), r.source]))
    return "\n".join(out) + "\n"


# --- binary feature maps ---

def write_feature_map(fmap: FeatureMap) -> bytes:
    h, w, c = fmap.data.shape
    header = FMAP_MAGIC + struct.pack("<IIIIf", FMAP_VERSION, h, w, c, float(fmap.stride))
    payload = np.ascontiguousarray(fmap.data, dtype="<f4").tobytes()
    return header + payload


def read_feature_map(blob: bytes) -> FeatureMap:
    if len(blob) < 4 or blob[:4] != FMAP_MAGIC:
        raise FormatError("bad magic, not a feature-map file")
    if len(blob) < 4 + 20:
        raise FormatError("truncated header")
    version, h, w, c, stride = struct.unpack("<IIIIf", blob[4:24])
    if version != FMAP_VERSION:
        raise FormatError(f"unsupported version {version}")
    if min(h, w, c) < 1:
        raise FormatError(f"bad dimensions {h}x{w}x{c}")
    expected = h * w * c * 4
    payload = blob[24:]
    if len(payload) != expected:
        raise FormatError(f"payload is {len(payload)} bytes, header implies {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(h, w, c)
    return FeatureMap(data=data, stride=float(stride))


def feature_file_name(frame: int) -> str:
    return f"{frame:06d}.fmap"


# --- flat key = value text ---

def parse_kv_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"expected 'key = value', got {stripped!r}", line=lineno)
        key, _, value = stripped.partition("=")
        key = key.strip()
        if not key:
            raise ParseError("empty key", line=lineno)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", line=lineno)
        out[key] = value.strip()
    return out


def write_kv_text(values: dict[str, str]) -> str:
    return "".join(f"{k} = {values[k]}\n" for k in sorted(values))


# --- bundle layout ---

@dataclass
class SequenceBundlePaths:
    """Resolved file locations inside one sequence bundle directory."""

    root: Path
    detections: Path
    metadata: Path | None
    correspondences: Path | None
    features_dir: Path | None
    gt: Path | None
    manifest: Path | None

    @classmethod
    def from_dir(cls, root) -> "SequenceBundlePaths":
        root = Path(root)
        if not root.is_dir():
            raise ParseError(f"bundle directory {root} does not exist")
        detections = root / DETECTIONS_NAME
        if not detections.is_file():
            raise ParseError(f"bundle is missing {DETECTIONS_NAME} in {root}")

        def opt(name: str) -> Path | None:
            p = root / name
            return p if p.exists() else None

        features = root / FEATURES_DIRNAME
        return cls(
            root=root,
            detections=detections,
            metadata=opt(METADATA_NAME),
            correspondences=opt(CORRESPONDENCES_NAME),
            features_dir=features if features.is_dir() else None,
            gt=opt(GT_NAME),
            manifest=opt(MANIFEST_NAME),
        )

    def feature_path(self, frame: int) -> Path | None:
        if self.features_dir is None:
            return None
        p = self.features_dir / feature_file_name(frame)
        return p if p.is_file() else None
