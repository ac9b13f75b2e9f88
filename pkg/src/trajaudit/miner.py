"""Candidate-pair screening, near-miss event extraction, and hotspot grids.

Screening filters encode the lessons of the iterative QA rounds: motion
filtering (movement-valid tracks), threshold gating on closing time and
clearance, anti-repeat merging of replayed pairs, and a stationary-aware
gate that drops pairs which never actually move. Longitudinal closing time
is attached to events as a diagnostic only — it never triggers an event.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientOverlapError, ReferentialIntegrityError
from .metrics import DEFAULT_BUFFER, MetricSeries, pair_metrics, track_velocities
from .records import Track

STATUS_PENDING = "pending"
STATUS_KEPT = "kept"
STATUS_REJECTED = "rejected"
STATUS_DEFERRED = "deferred"
EVENT_STATUSES = (STATUS_PENDING, STATUS_KEPT, STATUS_REJECTED, STATUS_DEFERRED)

TRIGGER_TTC = "ttc"
TRIGGER_SEPARATION = "separation"
TRIGGER_BOTH = "both"


@dataclass(frozen=True)
class ScreeningConfig:
    ttc_threshold: float = 1.5
    sep_threshold: float = 1.0
    min_track_displacement: float = 2.0
    min_track_length: int = 10
    stationary_speed: float = 0.75
    anti_repeat_gap: int = 50
    allowed_class_pairs: frozenset | None = None  # None = all pairs
    buffer: float = DEFAULT_BUFFER
    series_margin: int = 20  # evidence frames kept on each side of the window

    def pair_allowed(self, cls_a: str, cls_b: str) -> bool:
        if self.allowed_class_pairs is None:
            return True
        return (
            frozenset((cls_a, cls_b)) in self.allowed_class_pairs
            or (cls_a, cls_b) in self.allowed_class_pairs
            or (cls_b, cls_a) in self.allowed_class_pairs
        )


@dataclass
class NearMissEvent:
    """One candidate interaction episode with its window summaries."""

    event_id: str
    track_a: int
    track_b: int
    cls_a: str
    cls_b: str
    first_frame: int
    last_frame: int
    trigger: str
    min_sep: float
    min_ttc: float
    min_ttc_long: float
    argmin_sep_frame: int
    argmin_ttc_frame: int
    argmin_ttc_long_frame: int
    location: tuple[float, float]
    branch: str = "B1"
    status: str = STATUS_PENDING
    series: list[dict] = field(default_factory=list)  # window + margin evidence

    @property
    def argmin_frame(self) -> int:
        """Argmin of the primary trigger metric."""
        if self.trigger in (TRIGGER_TTC, TRIGGER_BOTH):
            return self.argmin_ttc_frame
        return self.argmin_sep_frame

    def to_record(self) -> dict:
        def opt(v: float):
            return None if math.isinf(v) else v

        return {
            "event_id": self.event_id,
            "track_a": self.track_a,
            "track_b": self.track_b,
            "cls_a": self.cls_a,
            "cls_b": self.cls_b,
            "first_frame": self.first_frame,
            "last_frame": self.last_frame,
            "trigger": self.trigger,
            "min_sep": self.min_sep,
            "min_ttc": opt(self.min_ttc),
            "min_ttc_long": opt(self.min_ttc_long),
            "argmin_sep_frame": self.argmin_sep_frame,
            "argmin_ttc_frame": self.argmin_ttc_frame,
            "argmin_ttc_long_frame": self.argmin_ttc_long_frame,
            "location_x": self.location[0],
            "location_y": self.location[1],
            "branch": self.branch,
            "status": self.status,
            "series": self.series,
        }


def event_from_record(obj: dict) -> NearMissEvent:
    def unopt(v):
        return math.inf if v is None else float(v)

    return NearMissEvent(
        event_id=obj["event_id"],
        track_a=obj["track_a"],
        track_b=obj["track_b"],
        cls_a=obj["cls_a"],
        cls_b=obj["cls_b"],
        first_frame=obj["first_frame"],
        last_frame=obj["last_frame"],
        trigger=obj["trigger"],
        min_sep=float(obj["min_sep"]),
        min_ttc=unopt(obj["min_ttc"]),
        min_ttc_long=unopt(obj["min_ttc_long"]),
        argmin_sep_frame=obj["argmin_sep_frame"],
        argmin_ttc_frame=obj["argmin_ttc_frame"],
        argmin_ttc_long_frame=obj["argmin_ttc_long_frame"],
        location=(obj["location_x"], obj["location_y"]),
        branch=obj.get("branch", "B1"),
        status=obj.get("status", STATUS_PENDING),
        series=obj.get("series", []),
    )


def movement_valid(track: Track, cfg: ScreeningConfig | None = None) -> bool:
    """Long enough and displaced enough to participate in mining."""
    cfg = cfg or ScreeningConfig()
    if len(track) < cfg.min_track_length:
        return False
    first = track.points[0].pose
    last = track.points[-1].pose
    displacement = math.hypot(last.x - first.x, last.y - first.y)
    return displacement >= cfg.min_track_displacement


def _overlap_frames(a: Track, b: Track) -> list[int]:
    return sorted({p.frame_id for p in a.points} & {p.frame_id for p in b.points})


def screen_pairs(
    tracks: list[Track], cfg: ScreeningConfig | None = None, dt: float = 0.1
) -> list[tuple[Track, Track]]:
    """Unordered candidate pairs surviving the screening gates.

    Movement-valid participants, >= 2 overlapping frames, allowed class
    pair, and not both below stationary speed for the entire overlap.
    """
    cfg = cfg or ScreeningConfig()
    valid = [t for t in tracks if movement_valid(t, cfg)]
    speeds = {
        t.track_id: np.hypot(*track_velocities(t, dt).T) for t in valid
    }
    frame_index = {
        t.track_id: {p.frame_id: i for i, p in enumerate(t.points)} for t in valid
    }
    pairs = []
    for i in range(len(valid)):
        for j in range(i + 1, len(valid)):
            a, b = valid[i], valid[j]
            if not cfg.pair_allowed(a.cls, b.cls):
                continue
            common = _overlap_frames(a, b)
            if len(common) < 2:
                continue
            sa = speeds[a.track_id][[frame_index[a.track_id][f] for f in common]]
            sb = speeds[b.track_id][[frame_index[b.track_id][f] for f in common]]
            # stationary-aware gate: drop pairs where nobody ever moves
            if (sa < cfg.stationary_speed).all() and (sb < cfg.stationary_speed).all():
                continue
            pairs.append((a, b))
    return pairs


def _event_id(track_a: int, track_b: int, argmin_frame: int, trigger: str) -> str:
    key = f"{track_a}:{track_b}:{argmin_frame}:{trigger}".encode()
    return hashlib.sha1(key).hexdigest()[:12]


def _episode_event(
    a: Track,
    b: Track,
    series: MetricSeries,
    first: int,
    last: int,
    cfg: ScreeningConfig,
    branch: str,
) -> NearMissEvent:
    window = series.slice_frames(first, last)
    ttc_hit = window.min_ttc <= cfg.ttc_threshold
    sep_hit = window.min_sep <= cfg.sep_threshold
    trigger = TRIGGER_BOTH if (ttc_hit and sep_hit) else (
        TRIGGER_TTC if ttc_hit else TRIGGER_SEPARATION
    )
    argmin_frame = (
        window.argmin_ttc_frame if trigger in (TRIGGER_TTC, TRIGGER_BOTH)
        else window.argmin_sep_frame
    )
    pa = a.point_at(argmin_frame).pose
    pb = b.point_at(argmin_frame).pose
    evidence = series.slice_frames(first - cfg.series_margin, last + cfg.series_margin)
    return NearMissEvent(
        event_id=_event_id(a.track_id, b.track_id, argmin_frame, trigger),
        track_a=a.track_id,
        track_b=b.track_id,
        cls_a=a.cls,
        cls_b=b.cls,
        first_frame=first,
        last_frame=last,
        trigger=trigger,
        min_sep=window.min_sep,
        min_ttc=window.min_ttc,
        min_ttc_long=window.min_ttc_long,
        argmin_sep_frame=window.argmin_sep_frame,
        argmin_ttc_frame=window.argmin_ttc_frame,
        argmin_ttc_long_frame=window.argmin_ttc_long_frame,
        location=((pa.x + pb.x) / 2.0, (pa.y + pb.y) / 2.0),
        branch=branch,
        series=evidence.to_records(),
    )


def _more_severe(e1: NearMissEvent, e2: NearMissEvent) -> NearMissEvent:
    if e1.min_ttc != e2.min_ttc:
        return e1 if e1.min_ttc < e2.min_ttc else e2
    return e1 if e1.min_sep <= e2.min_sep else e2


def mine_events(
    pairs: list[tuple[Track, Track]],
    cfg: ScreeningConfig | None = None,
    dt: float = 0.1,
    branch: str = "B1",
) -> list[NearMissEvent]:
    """Extract events per trigger episode, then merge near-repeats per pair.

    An episode is a maximal run of frames whose per-frame closing time or
    clearance violates its threshold. Episodes of one pair whose argmin
    frames fall within anti_repeat_gap collapse to the most severe one.
    """
    cfg = cfg or ScreeningConfig()
    events: list[NearMissEvent] = []
    for a, b in pairs:
        try:
            series = pair_metrics(a, b, dt=dt, buffer=cfg.buffer)
        except InsufficientOverlapError:
            continue
        mask = (series.ttc <= cfg.ttc_threshold) | (series.sep <= cfg.sep_threshold)
        if not mask.any():
            continue
        pair_events: list[NearMissEvent] = []
        i = 0
        n = len(mask)
        while i < n:
            if not mask[i]:
                i += 1
                continue
            start = i
            while i < n and mask[i]:
                i += 1
            pair_events.append(
                _episode_event(
                    a, b, series,
                    int(series.frames[start]), int(series.frames[i - 1]),
                    cfg, branch,
                )
            )
        # anti-repeat: merge chains of near-repeats, keeping the most severe
        merged: list[NearMissEvent] = []
        for ev in sorted(pair_events, key=lambda e: e.argmin_frame):
            if merged and ev.argmin_frame - merged[-1].argmin_frame < cfg.anti_repeat_gap:
                merged[-1] = _more_severe(merged[-1], ev)
            else:
                merged.append(ev)
        events.extend(merged)
    events.sort(key=lambda e: (e.first_frame, e.track_a, e.track_b))
    return events


@dataclass
class HotspotGrid:
    """Spatial histogram of event locations over square BEV cells."""

    cell_size: float = 1.0
    counts: dict = field(default_factory=dict)  # (cell_x, cell_y) -> count
    n: int = 0

    def add(self, x: float, y: float) -> None:
        cell = (math.floor(x / self.cell_size), math.floor(y / self.cell_size))
        self.counts[cell] = self.counts.get(cell, 0) + 1
        self.n += 1

    def to_rows(self) -> list[tuple[int, int, int]]:
        return sorted((cx, cy, c) for (cx, cy), c in self.counts.items())


def hotspot(
    events: list[NearMissEvent],
    cell_size: float = 1.0,
    include_rejected: bool = False,
) -> HotspotGrid:
    """Count event locations per cell; rejected events excluded by default."""
    grid = HotspotGrid(cell_size=cell_size)
    for ev in events:
        if not include_rejected and ev.status == STATUS_REJECTED:
            continue
        grid.add(*ev.location)
    return grid


@dataclass
class FeedbackStats:
    decisions: dict = field(default_factory=dict)
    tags: dict = field(default_factory=dict)
    n_records: int = 0


_DECISION_STATUS = {"keep": STATUS_KEPT, "reject": STATUS_REJECTED, "defer": STATUS_DEFERRED}


def apply_review_feedback(events: list[NearMissEvent], records: list) -> FeedbackStats:
    """Fold review decisions into event statuses; latest decision wins.

    records carry .event_id, .decision, .failure_tag (the qa-store shape).
    Unknown event ids are a referential-integrity error. Returns per-tag
    and per-decision tallies so operators can retune the screening config.
    """
    by_id = {ev.event_id: ev for ev in events}
    stats = FeedbackStats()
    for rec in records:
        event_id = rec["event_id"] if isinstance(rec, dict) else rec.event_id
        decision = rec["decision"] if isinstance(rec, dict) else rec.decision
        tag = rec.get("failure_tag") if isinstance(rec, dict) else rec.failure_tag
        if event_id not in by_id:
            raise ReferentialIntegrityError(f"unknown event id {event_id!r}")
        by_id[event_id].status = _DECISION_STATUS[decision]
        stats.decisions[decision] = stats.decisions.get(decision, 0) + 1
        if tag:
            stats.tags[tag] = stats.tags.get(tag, 0) + 1
        stats.n_records += 1
    return stats


@dataclass
class MiningSummary:
    n_tracks: int
    n_movement_valid: int
    n_candidate_pairs: int
    n_events: int
    branch: str

    def to_dict(self) -> dict:
        return {
            "n_tracks": self.n_tracks,
            "n_movement_valid": self.n_movement_valid,
            "n_candidate_pairs": self.n_candidate_pairs,
            "n_events": self.n_events,
            "branch": self.branch,
        }


def mine(
    tracks: list[Track],
    cfg: ScreeningConfig | None = None,
    dt: float = 0.1,
    branch: str = "B1",
) -> tuple[list[NearMissEvent], MiningSummary]:
    """Full mining pass: screen, extract, summarize the funnel."""
    cfg = cfg or ScreeningConfig()
    n_valid = sum(movement_valid(t, cfg) for t in tracks)
    pairs = screen_pairs(tracks, cfg, dt=dt)
    events = mine_events(pairs, cfg, dt=dt, branch=branch)
    summary = MiningSummary(
        n_tracks=len(tracks),
        n_movement_valid=n_valid,
        n_candidate_pairs=len(pairs),
        n_events=len(events),
        branch=branch,
    )
    return events, summary
