"""Controlled post-tracking refinement branches.

B0 passes tracks through untouched, B1 applies capped corrections only on
suspicious segments and only where registration quality is sufficient, and
B2 applies whole-track temporal smoothing. Every modification is logged as a
correction record for audit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import InvalidInputError
from .geometry import BevPose, circular_mean, wrap_angle
from .records import Track

_K = _kernels.impl

BRANCHES = ("B0", "B1", "B2")

REASON_YAW_STEP = "yaw_step"
REASON_REGISTRATION = "registration_disagreement"
REASON_COMPOSITE = "composite_score"


@dataclass(frozen=True)
class RefinementConfig:
    """Thresholds for suspicion scoring and capped correction. Radians inside."""

    suspicion_threshold: float = 0.5
    yaw_step_limit: float = math.radians(25.0)  # hard flag, per frame
    yaw_step_scale: float = math.radians(15.0)  # normalization for the composite
    residual_scale: float = 1.5  # = tracker gate radius
    residual_limit: float = 3.0  # hard flag, 2x gate
    score_drop_scale: float = 0.5
    pos_cap: float = 0.5
    yaw_cap: float = math.radians(10.0)
    registration_ok_residual: float = 1.5
    window: int = 9  # B2 smoothing window
    neighbor_count: int = 2  # unflagged frames per side for the B1 yaw reference

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise InvalidInputError(f"window must be odd and >= 3, got {self.window}")


@dataclass(frozen=True)
class FlaggedSegment:
    start_frame: int
    end_frame: int
    reasons: frozenset


@dataclass
class SuspicionReport:
    """Per-frame indicators plus merged flagged segments for one track."""

    track_id: int
    flagged_segments: list[FlaggedSegment] = field(default_factory=list)
    yaw_step_deg: np.ndarray = field(default_factory=lambda: np.zeros(0))
    position_residual_m: np.ndarray = field(default_factory=lambda: np.zeros(0))
    score_drop: np.ndarray = field(default_factory=lambda: np.zeros(0))
    composite: np.ndarray = field(default_factory=lambda: np.zeros(0))
    flagged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    frame_reasons: list = field(default_factory=list)

    def flagged_frame_ids(self, track: Track) -> set[int]:
        return {
            track.points[i].frame_id for i in range(len(self.flagged)) if self.flagged[i]
        }


@dataclass(frozen=True)
class Correction:
    frame_id: int
    dpos: tuple[float, float]
    dyaw: float
    applied: bool
    reason: str


@dataclass
class RefinedTrack:
    """Branch output: the (possibly corrected) track plus the audit log."""

    track: Track
    branch: str
    corrections: list[Correction] = field(default_factory=list)


def prediction_residuals(track: Track, dt: float = 0.1) -> np.ndarray:
    """Registration residuals via constant-velocity extrapolation.

    residual[t] = |p_t - (p_{t-1} + (p_{t-1} - p_{t-2}) * gap ratio)|; the
    first two frames get 0 (no prediction available).
    """
    n = len(track)
    out = np.zeros(n)
    pts = track.points
    for t in range(2, n):
        g_prev = pts[t - 1].frame_id - pts[t - 2].frame_id
        g_cur = pts[t].frame_id - pts[t - 1].frame_id
        scale = g_cur / g_prev
        pred_x = pts[t - 1].pose.x + (pts[t - 1].pose.x - pts[t - 2].pose.x) * scale
        pred_y = pts[t - 1].pose.y + (pts[t - 1].pose.y - pts[t - 2].pose.y) * scale
        out[t] = math.hypot(pts[t].pose.x - pred_x, pts[t].pose.y - pred_y)
    del dt  # residual is purely spatial; dt kept for signature stability
    return out


def score_suspicion(
    track: Track, residuals: np.ndarray | None, cfg: RefinementConfig | None = None
) -> SuspicionReport:
    """Composite suspicion scoring; adjacent flagged frames merge into segments.

    A frame is flagged when its composite exceeds the threshold or any single
    indicator is beyond its hard limit. Tracks shorter than two points yield
    an empty report (no yaw steps computable).
    """
    cfg = cfg or RefinementConfig()
    n = len(track)
    if n < 2:
        return SuspicionReport(track_id=track.track_id)
    if residuals is None:
        residuals = prediction_residuals(track)
    residuals = np.asarray(residuals, dtype=np.float64)
    if residuals.shape[0] != n:
        raise InvalidInputError(
            f"residuals length {residuals.shape[0]} does not match track length {n}"
        )

    pts = track.points
    yaw_step = np.zeros(n)
    score_drop = np.zeros(n)
    for t in range(1, n):
        gap = pts[t].frame_id - pts[t - 1].frame_id
        yaw_step[t] = abs(wrap_angle(pts[t].pose.yaw - pts[t - 1].pose.yaw)) / gap
        score_drop[t] = max(0.0, pts[t - 1].score - pts[t].score)

    yaw_norm = np.clip(yaw_step / cfg.yaw_step_scale, 0.0, 1.0)
    resid_norm = np.clip(residuals / cfg.residual_scale, 0.0, 1.0)
    drop_norm = np.clip(score_drop / cfg.score_drop_scale, 0.0, 1.0)
    composite = (yaw_norm + resid_norm + drop_norm) / 3.0

    frame_reasons: list[set] = [set() for _ in range(n)]
    for t in range(n):
        if composite[t] > cfg.suspicion_threshold:
            frame_reasons[t].add(REASON_COMPOSITE)
        if yaw_step[t] > cfg.yaw_step_limit:
            frame_reasons[t].add(REASON_YAW_STEP)
        if residuals[t] > cfg.residual_limit:
            frame_reasons[t].add(REASON_REGISTRATION)
    flagged = np.array([bool(r) for r in frame_reasons])

    segments: list[FlaggedSegment] = []
    t = 0
    while t < n:
        if not flagged[t]:
            t += 1
            continue
        start = t
        reasons: set = set()
        while t < n and flagged[t]:
            reasons |= frame_reasons[t]
            t += 1
        segments.append(
            FlaggedSegment(
                start_frame=pts[start].frame_id,
                end_frame=pts[t - 1].frame_id,
                reasons=frozenset(reasons),
            )
        )

    return SuspicionReport(
        track_id=track.track_id,
        flagged_segments=segments,
        yaw_step_deg=np.degrees(yaw_step),
        position_residual_m=residuals,
        score_drop=score_drop,
        composite=composite,
        flagged=flagged,
        frame_reasons=frame_reasons,
    )


def refine_b0(track: Track) -> RefinedTrack:
    """Raw passthrough baseline."""
    return RefinedTrack(track=track, branch="B0", corrections=[])


def _local_yaw_reference(
    yaws: list[float], flagged: np.ndarray, i: int, per_side: int
) -> float | None:
    """Circular mean of the nearest unflagged yaws on each side of index i."""
    neighbors: list[float] = []
    found = 0
    for j in range(i - 1, -1, -1):
        if not flagged[j]:
            neighbors.append(yaws[j])
            found += 1
            if found >= per_side:
                break
    found = 0
    for j in range(i + 1, len(yaws)):
        if not flagged[j]:
            neighbors.append(yaws[j])
            found += 1
            if found >= per_side:
                break
    if not neighbors:
        return None
    try:
        return circular_mean(neighbors)
    except Exception:
        return None


def refine_b1(
    track: Track, report: SuspicionReport, cfg: RefinementConfig | None = None
) -> RefinedTrack:
    """Selective capped correction on flagged segments.

    Position is pulled toward the constant-velocity prediction from the
    (already corrected) preceding frames, yaw toward the circular mean of
    nearby unflagged frames; deltas are clipped to pos_cap / yaw_cap. A
    correction is applied only when the frame's registration residual is
    within registration_ok_residual; otherwise it is logged unapplied.
    """
    cfg = cfg or RefinementConfig()
    if report.track_id != track.track_id:
        raise InvalidInputError("suspicion report does not belong to this track")
    n = len(track)
    if n == 0 or not report.flagged_segments:
        return RefinedTrack(track=track, branch="B1", corrections=[])

    pts = track.points
    flagged = report.flagged
    residuals = report.position_residual_m
    xs = [p.pose.x for p in pts]
    ys = [p.pose.y for p in pts]
    yaws = [p.pose.yaw for p in pts]
    corrections: list[Correction] = []
    new_points = list(pts)

    for i in range(n):
        if not flagged[i]:
            continue
        reason = "+".join(sorted(report.frame_reasons[i]))
        dpos = (0.0, 0.0)
        if i >= 2:
            g_prev = pts[i - 1].frame_id - pts[i - 2].frame_id
            g_cur = pts[i].frame_id - pts[i - 1].frame_id
            scale = g_cur / g_prev
            pred_x = xs[i - 1] + (xs[i - 1] - xs[i - 2]) * scale
            pred_y = ys[i - 1] + (ys[i - 1] - ys[i - 2]) * scale
            full = (pred_x - pts[i].pose.x, pred_y - pts[i].pose.y)
            norm = math.hypot(*full)
            if norm > cfg.pos_cap:
                full = (full[0] * cfg.pos_cap / norm, full[1] * cfg.pos_cap / norm)
            dpos = full
        ref = _local_yaw_reference(
            [p.pose.yaw for p in pts], flagged, i, cfg.neighbor_count
        )
        dyaw = 0.0
        if ref is not None:
            dyaw = wrap_angle(ref - pts[i].pose.yaw)
            dyaw = min(max(dyaw, -cfg.yaw_cap), cfg.yaw_cap)
        applied = bool(residuals[i] <= cfg.registration_ok_residual)
        if applied:
            xs[i] = pts[i].pose.x + dpos[0]
            ys[i] = pts[i].pose.y + dpos[1]
            yaws[i] = wrap_angle(pts[i].pose.yaw + dyaw)
            new_points[i] = replace(
                pts[i],
                pose=BevPose(x=xs[i], y=ys[i], z=pts[i].pose.z, yaw=yaws[i]),
            )
        corrections.append(
            Correction(
                frame_id=pts[i].frame_id,
                dpos=dpos,
                dyaw=dyaw,
                applied=applied,
                reason=reason,
            )
        )

    refined = Track(track_id=track.track_id, cls=track.cls, points=new_points)
    return RefinedTrack(track=refined, branch="B1", corrections=corrections)


def refine_b2(track: Track, cfg: RefinementConfig | None = None) -> RefinedTrack:
    """Whole-track temporal smoothing: windowed positions, circular yaw means.

    Windows shrink symmetrically at the ends; dims and scores are untouched.
    Tracks shorter than three points come back unchanged.
    """
    cfg = cfg or RefinementConfig()
    n = len(track)
    if n < 3:
        return RefinedTrack(track=track, branch="B2", corrections=[])
    pts = track.points
    xs = np.array([p.pose.x for p in pts])
    ys = np.array([p.pose.y for p in pts])
    yaws = np.array([p.pose.yaw for p in pts])

    sm_x = _K.moving_average(xs, cfg.window)
    sm_y = _K.moving_average(ys, cfg.window)
    sm_yaw, degenerate = _K.circular_moving_mean(yaws, cfg.window)
    sm_yaw = np.where(degenerate, yaws, sm_yaw)  # keep raw on opposed-angle windows

    corrections = []
    new_points = []
    for i, p in enumerate(pts):
        dyaw = wrap_angle(float(sm_yaw[i]) - p.pose.yaw)
        corrections.append(
            Correction(
                frame_id=p.frame_id,
                dpos=(float(sm_x[i] - p.pose.x), float(sm_y[i] - p.pose.y)),
                dyaw=dyaw,
                applied=True,
                reason="smoothing",
            )
        )
        new_points.append(
            replace(
                p,
                pose=BevPose(
                    x=float(sm_x[i]), y=float(sm_y[i]), z=p.pose.z, yaw=float(sm_yaw[i])
                ),
            )
        )
    refined = Track(track_id=track.track_id, cls=track.cls, points=new_points)
    return RefinedTrack(track=refined, branch="B2", corrections=corrections)


def refine(
    track: Track, branch: str, cfg: RefinementConfig | None = None
) -> RefinedTrack:
    """Dispatch one track through the requested branch."""
    branch = branch.upper()
    if branch not in BRANCHES:
        raise InvalidInputError(f"unknown branch {branch!r}; expected one of {BRANCHES}")
    if branch == "B0":
        return refine_b0(track)
    if branch == "B1":
        cfg = cfg or RefinementConfig()
        report = score_suspicion(track, None, cfg)
        return refine_b1(track, report, cfg)
    return refine_b2(track, cfg)


def correction_records(refined: RefinedTrack) -> list[dict]:
    """JSONL rows for the corrections sidecar."""
    return [
        {
            "track_id": refined.track.track_id,
            "branch": refined.branch,
            "frame": c.frame_id,
            "dpos_x": c.dpos[0],
            "dpos_y": c.dpos[1],
            "dyaw": c.dyaw,
            "applied": c.applied,
            "reason": c.reason,
        }
        for c in refined.corrections
    ]
