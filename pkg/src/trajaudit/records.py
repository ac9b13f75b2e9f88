"""Data model and JSONL interchange for detections, tracks, and ground truth.

Wire formats (UTF-8, LF, one JSON object per line):

* detections: frame (int), t (float s, optional), cls, score, x, y, z,
  dx, dy, dz, yaw (radians)
* ground truth: gt_id (str), frame, cls, x, y, z, dx, dy, dz, yaw (no score)
* tracks: track_id, cls, frame, x, y, z, yaw, dx, dy, dz, score, provenance

Files written by this toolkit start with a header record carrying
``format_version`` (and usually ``kind`` and ``dt``). Ingestion of
detections/ground truth also accepts headerless files, since that schema is
the boundary with an external detector; a header with the wrong version is a
hard error everywhere.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import SchemaError
from .geometry import BevPose, BoxDims

FORMAT_VERSION = 1

CLASSES = ("car", "truck", "pedestrian", "bicycle")

PROVENANCE_RAW = "raw"
PROVENANCE_INTERPOLATED = "interpolated"
_PROVENANCES = (PROVENANCE_RAW, PROVENANCE_INTERPOLATED)


# ---------------------------------------------------------------------------
# Core records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Detection:
    """One per-frame 3D box observation from the detection boundary."""

    frame_id: int
    t: float
    cls: str
    score: float
    pose: BevPose
    dims: BoxDims


@dataclass
class FrameStream:
    """Detections grouped by frame, sorted by frame id."""

    dt: float
    frames: dict[int, list[Detection]] = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise SchemaError(f"dt must be > 0, got {self.dt!r}")
        self.frames = dict(sorted(self.frames.items()))

    @property
    def frame_ids(self) -> list[int]:
        return list(self.frames.keys())

    def __iter__(self) -> Iterator[tuple[int, list[Detection]]]:
        return iter(self.frames.items())

    def n_detections(self) -> int:
        return sum(len(v) for v in self.frames.values())


@dataclass(frozen=True)
class GtPoint:
    frame_id: int
    cls: str
    pose: BevPose
    dims: BoxDims


@dataclass
class GroundTruthTrack:
    """Identity-consistent annotated trajectory; at most one point per frame."""

    gt_id: str
    points: list[GtPoint] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for p in self.points:
            if p.frame_id in seen:
                raise SchemaError(
                    f"ground-truth track {self.gt_id!r} has duplicate frame {p.frame_id}"
                )
            seen.add(p.frame_id)
        self.points.sort(key=lambda p: p.frame_id)


@dataclass(frozen=True)
class TrackPoint:
    """One frame of a track, annotated with its provenance."""

    frame_id: int
    pose: BevPose
    dims: BoxDims
    score: float
    provenance: str = PROVENANCE_RAW

    def __post_init__(self):
        if self.provenance not in _PROVENANCES:
            raise SchemaError(f"unknown provenance {self.provenance!r}")


@dataclass
class Track:
    """Identity-consistent time series of box states; frames strictly increasing."""

    track_id: int
    cls: str
    points: list[TrackPoint] = field(default_factory=list)

    def __post_init__(self):
        for prev, cur in zip(self.points, self.points[1:]):
            if cur.frame_id <= prev.frame_id:
                raise SchemaError(
                    f"track {self.track_id}: frame ids not strictly increasing "
                    f"({prev.frame_id} then {cur.frame_id})"
                )

    def __len__(self) -> int:
        return len(self.points)

    @property
    def first_frame(self) -> int:
        return self.points[0].frame_id

    @property
    def last_frame(self) -> int:
        return self.points[-1].frame_id

    def frames(self) -> list[int]:
        return [p.frame_id for p in self.points]

    def positions(self) -> list[tuple[float, float]]:
        return [(p.pose.x, p.pose.y) for p in self.points]

    def yaws(self) -> list[float]:
        return [p.pose.yaw for p in self.points]

    def point_at(self, frame_id: int) -> TrackPoint | None:
        for p in self.points:
            if p.frame_id == frame_id:
                return p
        return None


# ---------------------------------------------------------------------------
# Record <-> dict conversion
# ---------------------------------------------------------------------------


def _require(obj: dict, key: str, lineno: int | None = None):
    if key not in obj:
        raise SchemaError(f"missing key {key!r}", lineno)
    return obj[key]


def _as_float(obj: dict, key: str, lineno: int | None = None) -> float:
    value = _require(obj, key, lineno)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"key {key!r} must be a number, got {value!r}", lineno)
    value = float(value)
    if not math.isfinite(value):
        raise SchemaError(f"key {key!r} must be finite, got {value!r}", lineno)
    return value


def _as_frame(obj: dict, key: str = "frame", lineno: int | None = None) -> int:
    value = _require(obj, key, lineno)
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"key {key!r} must be an integer, got {value!r}", lineno)
    if value < 0:
        raise SchemaError(f"key {key!r} must be >= 0, got {value}", lineno)
    return value


def _as_cls(obj: dict, lineno: int | None = None) -> str:
    value = _require(obj, "cls", lineno)
    if value not in CLASSES:
        raise SchemaError(
            f"unknown class {value!r}; expected one of {', '.join(CLASSES)}", lineno
        )
    return value


def _pose_dims(obj: dict, lineno: int | None = None) -> tuple[BevPose, BoxDims]:
    try:
        pose = BevPose(
            x=_as_float(obj, "x", lineno),
            y=_as_float(obj, "y", lineno),
            z=float(obj.get("z", 0.0)),
            yaw=_as_float(obj, "yaw", lineno),
        )
        dims = BoxDims(
            dx=_as_float(obj, "dx", lineno),
            dy=_as_float(obj, "dy", lineno),
            dz=_as_float(obj, "dz", lineno),
        )
    except SchemaError:
        raise
    except Exception as exc:
        raise SchemaError(str(exc), lineno) from exc
    return pose, dims


def detection_from_record(obj: dict, dt: float, lineno: int | None = None) -> Detection:
    frame_id = _as_frame(obj, "frame", lineno)
    cls = _as_cls(obj, lineno)
    score = _as_float(obj, "score", lineno)
    if not 0.0 <= score <= 1.0:
        raise SchemaError(f"score must be in [0, 1], got {score}", lineno)
    pose, dims = _pose_dims(obj, lineno)
    t = float(obj["t"]) if "t" in obj else frame_id * dt
    return Detection(frame_id=frame_id, t=t, cls=cls, score=score, pose=pose, dims=dims)


def detection_to_record(det: Detection) -> dict:
    return {
        "frame": det.frame_id,
        "t": det.t,
        "cls": det.cls,
        "score": det.score,
        "x": det.pose.x,
        "y": det.pose.y,
        "z": det.pose.z,
        "dx": det.dims.dx,
        "dy": det.dims.dy,
        "dz": det.dims.dz,
        "yaw": det.pose.yaw,
    }


def track_point_to_record(track: Track, point: TrackPoint, **extra) -> dict:
    rec = {
        "track_id": track.track_id,
        "cls": track.cls,
        "frame": point.frame_id,
        "x": point.pose.x,
        "y": point.pose.y,
        "z": point.pose.z,
        "yaw": point.pose.yaw,
        "dx": point.dims.dx,
        "dy": point.dims.dy,
        "dz": point.dims.dz,
        "score": point.score,
        "provenance": point.provenance,
    }
    rec.update(extra)
    return rec


# ---------------------------------------------------------------------------
# JSONL plumbing
# ---------------------------------------------------------------------------


def _is_header(obj: dict) -> bool:
    return "format_version" in obj and "frame" not in obj and "track_id" not in obj


def check_header(obj: dict, kind: str | None, lineno: int | None = None) -> dict:
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaError(
            f"unsupported format_version {version!r} (expected {FORMAT_VERSION})",
            lineno,
        )
    if kind is not None and "kind" in obj and obj["kind"] != kind:
        raise SchemaError(
            f"expected kind {kind!r}, file declares {obj['kind']!r}", lineno
        )
    return obj


def header_record(kind: str, **extra) -> dict:
    rec = {"format_version": FORMAT_VERSION, "kind": kind}
    rec.update(extra)
    return rec


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False))
            fh.write("\n")


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line:
                yield lineno, line


# ---------------------------------------------------------------------------
# Detections
# ---------------------------------------------------------------------------


def load_detections(
    path: str | Path, dt: float = 0.1, strict: bool = True
) -> tuple[FrameStream, list[tuple[int, str]]]:
    """Read detection JSONL into a FrameStream.

    In strict mode the first malformed line raises SchemaError with its line
    number; in lenient mode malformed lines are skipped and returned as
    (line, reason) issues. An empty file yields an empty stream. A header
    record with a wrong format_version always aborts.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    issues: list[tuple[int, str]] = []
    frames: dict[int, list[Detection]] = {}
    header_dt: float | None = None

    def reject(lineno: int, reason: str):
        if strict:
            raise SchemaError(reason, lineno)
        issues.append((lineno, reason))

    for lineno, line in iter_jsonl(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            reject(lineno, f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(obj, dict):
            reject(lineno, "record is not a JSON object")
            continue
        if _is_header(obj):
            check_header(obj, "detections", lineno)
            if "dt" in obj:
                header_dt = float(obj["dt"])
            continue
        try:
            det = detection_from_record(obj, dt=header_dt or dt, lineno=lineno)
        except SchemaError as exc:
            reject(lineno, str(exc))
            continue
        frames.setdefault(det.frame_id, []).append(det)

    stream = FrameStream(dt=header_dt or dt, frames=frames)
    return stream, issues


def save_detections(stream: FrameStream, path: str | Path) -> None:
    records = [header_record("detections", dt=stream.dt)]
    for _, dets in stream:
        records.extend(detection_to_record(d) for d in dets)
    write_jsonl(path, records)


# ---------------------------------------------------------------------------
# Ground truth
# ---------------------------------------------------------------------------


def load_ground_truth(path: str | Path) -> list[GroundTruthTrack]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    by_id: dict[str, list[GtPoint]] = {}
    order: list[str] = []
    for lineno, line in iter_jsonl(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", lineno) from exc
        if _is_header(obj):
            check_header(obj, "ground_truth", lineno)
            continue
        gt_id = obj.get("gt_id")
        if not isinstance(gt_id, str) or not gt_id:
            raise SchemaError("ground-truth record needs a non-empty gt_id", lineno)
        pose, dims = _pose_dims(obj, lineno)
        point = GtPoint(
            frame_id=_as_frame(obj, "frame", lineno),
            cls=_as_cls(obj, lineno),
            pose=pose,
            dims=dims,
        )
        if gt_id not in by_id:
            order.append(gt_id)
        by_id.setdefault(gt_id, []).append(point)
    return [GroundTruthTrack(gt_id=g, points=by_id[g]) for g in order]


def save_ground_truth(tracks: Iterable[GroundTruthTrack], path: str | Path) -> None:
    records: list[dict] = [header_record("ground_truth")]
    for tr in tracks:
        for p in tr.points:
            records.append(
                {
                    "gt_id": tr.gt_id,
                    "frame": p.frame_id,
                    "cls": p.cls,
                    "x": p.pose.x,
                    "y": p.pose.y,
                    "z": p.pose.z,
                    "dx": p.dims.dx,
                    "dy": p.dims.dy,
                    "dz": p.dims.dz,
                    "yaw": p.pose.yaw,
                }
            )
    write_jsonl(path, records)


# ---------------------------------------------------------------------------
# Tracks
# ---------------------------------------------------------------------------

TRACK_KINDS = ("tracks", "refined_tracks", "stabilized_tracks")


def save_tracks(
    tracks: Iterable[Track],
    path: str | Path,
    dt: float,
    kind: str = "tracks",
    per_point_extra=None,
    tail_records: Iterable[dict] = (),
    **header_extra,
) -> None:
    """Write tracks as JSONL with a header record.

    per_point_extra(track, index, point) may return a dict of extra columns.
    tail_records are appended verbatim (e.g. per-track summary records).
    """
    records: list[dict] = [header_record(kind, dt=dt, **header_extra)]
    for tr in tracks:
        for i, p in enumerate(tr.points):
            extra = per_point_extra(tr, i, p) if per_point_extra else {}
            records.append(track_point_to_record(tr, p, **extra))
    records.extend(tail_records)
    write_jsonl(path, records)


def load_tracks(
    path: str | Path, expected_kinds: tuple[str, ...] = TRACK_KINDS
) -> tuple[list[Track], dict]:
    """Read track JSONL; returns (tracks, header). Unknown columns are kept out.

    Records carrying a ``record_type`` key (e.g. dims summaries from the
    stabilizer export) are skipped here; use load_track_summaries for those.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    header: dict = {}
    by_id: dict[int, dict] = {}
    order: list[int] = []
    for lineno, line in iter_jsonl(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", lineno) from exc
        if _is_header(obj):
            header = check_header(obj, None, lineno)
            if "kind" in header and header["kind"] not in expected_kinds:
                raise SchemaError(
                    f"expected one of {expected_kinds}, file declares {header['kind']!r}",
                    lineno,
                )
            continue
        if "record_type" in obj:
            continue
        track_id = obj.get("track_id")
        if not isinstance(track_id, int):
            raise SchemaError("track record needs an integer track_id", lineno)
        pose, dims = _pose_dims(obj, lineno)
        provenance = obj.get("provenance", PROVENANCE_RAW)
        point = TrackPoint(
            frame_id=_as_frame(obj, "frame", lineno),
            pose=pose,
            dims=dims,
            score=_as_float(obj, "score", lineno),
            provenance=provenance,
        )
        if track_id not in by_id:
            by_id[track_id] = {"cls": _as_cls(obj, lineno), "points": []}
            order.append(track_id)
        by_id[track_id]["points"].append(point)
    tracks = []
    for tid in order:
        entry = by_id[tid]
        entry["points"].sort(key=lambda p: p.frame_id)
        tracks.append(Track(track_id=tid, cls=entry["cls"], points=entry["points"]))
    return tracks, header


def load_track_summaries(path: str | Path) -> list[dict]:
    """Collect record_type-tagged summary records from a track JSONL file."""
    out = []
    for lineno, line in iter_jsonl(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", lineno) from exc
        if isinstance(obj, dict) and "record_type" in obj:
            out.append(obj)
    return out
