"""Embedded file-based store for review queues and structured decisions.

Layout (one directory, no external database):

    store/
      records.jsonl        append-only review-record log, all rounds
      rounds/round-XXX.json  per-round queue export + config snapshot

Review records are never mutated or deleted; event statuses are derived from
the latest record per event. Appends are serialized through an in-process
lock (single-writer contract); reads are lock-free snapshots.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..errors import (
    ReadOnlyStoreError,
    ReferentialIntegrityError,
    ReviewValidationError,
    SchemaError,
    StoreError,
)
from ..miner import NearMissEvent
from ..records import FORMAT_VERSION, Track, track_point_to_record

DECISIONS = ("keep", "reject", "defer")

FAILURE_TAGS = (
    "tracking_break",
    "ttc_misuse",
    "geometry_unstable",
    "cross_lane_false_conflict",
    "true_near_miss",
    "borderline",
    "other",
)

_KEEP_TAGS = ("true_near_miss", "borderline")

_DECISION_STATUS = {"keep": "kept", "reject": "rejected", "defer": "deferred"}

DEFAULT_CONTEXT_MARGIN = 20


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class QueueItem:
    """One reviewable case: event metadata plus tracklet-window evidence."""

    event_id: str
    round_id: str
    created_at: str
    event: dict  # serialized NearMissEvent record (summaries, trigger, series...)
    windows: list[dict]  # per participant: track_id, cls, points

    def metadata(self) -> dict:
        """Queue listing view: everything except the bulky evidence."""
        slim = {k: v for k, v in self.event.items() if k != "series"}
        return {
            "event_id": self.event_id,
            "round_id": self.round_id,
            "created_at": self.created_at,
            "event": slim,
        }

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "round_id": self.round_id,
            "created_at": self.created_at,
            "event": self.event,
            "windows": self.windows,
        }


@dataclass
class ReviewRecord:
    record_id: str
    event_id: str
    round_id: str
    decision: str
    failure_tag: str | None = None
    corrections: list = field(default_factory=list)
    notes: str = ""
    reviewer: str = ""
    created_at: str = ""

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "event_id": self.event_id,
            "round_id": self.round_id,
            "decision": self.decision,
            "failure_tag": self.failure_tag,
            "corrections": self.corrections,
            "notes": self.notes,
            "reviewer": self.reviewer,
            "created_at": self.created_at,
        }


def validate_decision(decision: str, failure_tag: str | None) -> None:
    """Shared invariant checks for review submissions."""
    if decision not in DECISIONS:
        raise ReviewValidationError(
            f"decision must be one of {DECISIONS}, got {decision!r}"
        )
    if failure_tag is not None and failure_tag not in FAILURE_TAGS:
        raise ReviewValidationError(
            f"failure_tag must be one of {FAILURE_TAGS}, got {failure_tag!r}"
        )
    if decision == "reject" and failure_tag is None:
        raise ReviewValidationError("reject decisions require a failure tag")
    if decision == "keep" and failure_tag not in _KEEP_TAGS:
        raise ReviewValidationError(
            f"keep decisions require a tag in {_KEEP_TAGS}, got {failure_tag!r}"
        )


def _tracklet_window(track: Track, first: int, last: int, margin: int) -> dict:
    lo = first - margin
    hi = last + margin
    points = [
        track_point_to_record(track, p)
        for p in track.points
        if lo <= p.frame_id <= hi
    ]
    return {"track_id": track.track_id, "cls": track.cls, "points": points}


class QaStore:
    """Open (or create) a store directory. Not safe across processes for writes."""

    def __init__(self, path: str | Path, read_only: bool = False, create: bool = True):
        self.path = Path(path)
        self.read_only = read_only
        self._lock = threading.Lock()
        self._records: list[ReviewRecord] = []
        self._items: dict[str, QueueItem] = {}
        self._rounds: dict[str, dict] = {}
        if not self.path.exists():
            if read_only or not create:
                raise StoreError(f"store directory {self.path} does not exist")
            (self.path / "rounds").mkdir(parents=True)
        self._load()

    # -- paths ------------------------------------------------------------

    @property
    def _records_path(self) -> Path:
        return self.path / "records.jsonl"

    def _round_path(self, round_id: str) -> Path:
        return self.path / "rounds" / f"round-{round_id}.json"

    # -- loading ----------------------------------------------------------

    def _load(self) -> None:
        rounds_dir = self.path / "rounds"
        if rounds_dir.exists():
            for round_file in sorted(rounds_dir.glob("round-*.json")):
                with open(round_file, encoding="utf-8") as fh:
                    payload = json.load(fh)
                if payload.get("format_version") != FORMAT_VERSION:
                    raise SchemaError(
                        f"{round_file.name}: unsupported format_version "
                        f"{payload.get('format_version')!r}"
                    )
                self._rounds[payload["round_id"]] = payload
                for item in payload.get("queue", []):
                    qi = QueueItem(
                        event_id=item["event_id"],
                        round_id=item["round_id"],
                        created_at=item["created_at"],
                        event=item["event"],
                        windows=item["windows"],
                    )
                    self._items[qi.event_id] = qi
        if self._records_path.exists():
            with open(self._records_path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        obj = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise SchemaError(f"invalid JSON: {exc.msg}", lineno) from exc
                    self._records.append(ReviewRecord(**obj))

    # -- export -----------------------------------------------------------

    def export_queue(
        self,
        events: list[NearMissEvent],
        tracks: list[Track],
        round_id: str,
        margin: int = DEFAULT_CONTEXT_MARGIN,
        stamp: str | None = None,
        config_snapshot: dict | None = None,
        notes: str = "",
    ) -> list[QueueItem]:
        """Persist one QueueItem per pending event; idempotent per (event, round).

        Raises StoreError when a participant track is missing.
        """
        self._require_writable()
        by_id = {t.track_id: t for t in tracks}
        created_at = stamp or _utc_now()
        existing = {
            item.event_id
            for item in self._items.values()
            if item.round_id == round_id
        }
        new_items: list[QueueItem] = []
        for ev in events:
            if ev.status != "pending":
                continue
            if ev.event_id in existing:
                continue
            missing = [tid for tid in (ev.track_a, ev.track_b) if tid not in by_id]
            if missing:
                raise StoreError(
                    f"cannot export event {ev.event_id}: missing track(s) {missing}"
                )
            windows = [
                _tracklet_window(by_id[ev.track_a], ev.first_frame, ev.last_frame, margin),
                _tracklet_window(by_id[ev.track_b], ev.first_frame, ev.last_frame, margin),
            ]
            new_items.append(
                QueueItem(
                    event_id=ev.event_id,
                    round_id=round_id,
                    created_at=created_at,
                    event=ev.to_record(),
                    windows=windows,
                )
            )
        with self._lock:
            payload = self._rounds.get(round_id)
            if payload is None:
                payload = {
                    "format_version": FORMAT_VERSION,
                    "round_id": round_id,
                    "created_at": created_at,
                    "notes": notes,
                    "config_snapshot": config_snapshot or {},
                    "queue": [],
                }
                self._rounds[round_id] = payload
            payload["queue"].extend(item.to_dict() for item in new_items)
            for item in new_items:
                self._items[item.event_id] = item
            self._round_path(round_id).parent.mkdir(parents=True, exist_ok=True)
            with open(self._round_path(round_id), "w", encoding="utf-8") as fh:
                json.dump(payload, fh, ensure_ascii=False, indent=1)
                fh.write("\n")
        return new_items

    # -- reviews ----------------------------------------------------------

    def submit_review(
        self,
        event_id: str,
        decision: str,
        failure_tag: str | None = None,
        corrections: list | None = None,
        notes: str = "",
        reviewer: str = "",
    ) -> str:
        """Append one review record; returns its id. Records are append-only."""
        self._require_writable()
        if event_id not in self._items:
            raise ReferentialIntegrityError(f"unknown event id {event_id!r}")
        validate_decision(decision, failure_tag)
        with self._lock:
            record = ReviewRecord(
                record_id=f"r{len(self._records) + 1:06d}",
                event_id=event_id,
                round_id=self._items[event_id].round_id,
                decision=decision,
                failure_tag=failure_tag,
                corrections=corrections or [],
                notes=notes,
                reviewer=reviewer,
                created_at=_utc_now(),
            )
            with open(self._records_path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(json.dumps(record.to_dict(), ensure_ascii=False))
                fh.write("\n")
            self._records.append(record)
        return record.record_id

    def _require_writable(self) -> None:
        if self.read_only:
            raise ReadOnlyStoreError("store was opened read-only")

    # -- queries ----------------------------------------------------------

    def rounds(self) -> list[dict]:
        out = []
        for round_id in sorted(self._rounds):
            payload = self._rounds[round_id]
            out.append(
                {
                    "round_id": round_id,
                    "case_count": len(payload.get("queue", [])),
                    "created_at": payload.get("created_at", ""),
                    "notes": payload.get("notes", ""),
                    "config_snapshot": payload.get("config_snapshot", {}),
                }
            )
        return out

    def has_round(self, round_id: str) -> bool:
        return round_id in self._rounds

    def queue(self, round_id: str) -> list[QueueItem]:
        if round_id not in self._rounds:
            raise StoreError(f"unknown round {round_id!r}")
        return [i for i in self._items.values() if i.round_id == round_id]

    def case(self, event_id: str) -> QueueItem | None:
        return self._items.get(event_id)

    def records(self, round_id: str | None = None) -> list[ReviewRecord]:
        if round_id is None:
            return list(self._records)
        return [r for r in self._records if r.round_id == round_id]

    def event_status(self, event_id: str) -> str:
        """pending unless decided; the latest record wins, history retained."""
        status = "pending"
        for rec in self._records:
            if rec.event_id == event_id:
                status = _DECISION_STATUS[rec.decision]
        return status

    def round_summary(self, round_id: str) -> dict:
        if round_id not in self._rounds:
            raise StoreError(f"unknown round {round_id!r}")
        decisions = {d: 0 for d in DECISIONS}
        tags: dict[str, int] = {}
        records = self.records(round_id)
        for rec in records:
            decisions[rec.decision] += 1
            if rec.failure_tag:
                tags[rec.failure_tag] = tags.get(rec.failure_tag, 0) + 1
        return {
            "round_id": round_id,
            "total": len(records),
            "decisions": decisions,
            "tags": tags,
        }

    def hotspot_events(self, include_rejected: bool = False) -> list[dict]:
        """Event records for hotspot aggregation (kept + pending by default)."""
        out = []
        for item in self._items.values():
            status = self.event_status(item.event_id)
            if not include_rejected and status == "rejected":
                continue
            ev = dict(item.event)
            ev["status"] = status
            out.append(ev)
        return out
