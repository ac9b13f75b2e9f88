"""SORT-style multi-object tracking over BEV detections.

Constant-velocity Kalman prediction, class- and distance-gated optimal
assignment, and track lifecycle management. Yaw and dims are passed through
raw; heading correction belongs to the refinement/stabilization stages.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError
from .geometry import BevPose, BoxDims, bev_iou
from .records import (
    PROVENANCE_INTERPOLATED,
    PROVENANCE_RAW,
    Detection,
    FrameStream,
    Track,
    TrackPoint,
)

_GATE_MODES = ("center", "iou")

STATUS_TENTATIVE = "tentative"
STATUS_CONFIRMED = "confirmed"
STATUS_DEAD = "dead"


@dataclass(frozen=True)
class TrackerConfig:
    gate_radius: float = 1.5
    max_misses: int = 5
    min_hits: int = 3
    dt: float = 0.1
    process_noise: float = 0.5  # white-accel std, m/s^2
    measurement_noise: float = 0.1  # position std, m
    init_velocity_std: float = 10.0
    gate_mode: str = "center"
    iou_threshold: float = 0.1

    def __post_init__(self):
        if self.gate_radius <= 0:
            raise InvalidInputError(f"gate_radius must be > 0, got {self.gate_radius}")
        if self.max_misses < 0:
            raise InvalidInputError(f"max_misses must be >= 0, got {self.max_misses}")
        if self.min_hits < 1:
            raise InvalidInputError(f"min_hits must be >= 1, got {self.min_hits}")
        if self.dt <= 0:
            raise InvalidInputError(f"dt must be > 0, got {self.dt}")
        if self.gate_mode not in _GATE_MODES:
            raise InvalidInputError(f"gate_mode must be one of {_GATE_MODES}")


class KalmanCV:
    """Constant-velocity Kalman filter on (x, y, vx, vy)."""

    def __init__(self, x: float, y: float, cfg: TrackerConfig):
        self.cfg = cfg
        self.mean = np.array([x, y, 0.0, 0.0])
        m2 = max(cfg.measurement_noise**2, 1e-6)
        v2 = cfg.init_velocity_std**2
        self.cov = np.diag([m2, m2, v2, v2])

    def predict(self, steps: int = 1) -> None:
        dt = self.cfg.dt
        q = self.cfg.process_noise**2
        for _ in range(steps):
            f = np.array(
                [[1, 0, dt, 0], [0, 1, 0, dt], [0, 0, 1, 0], [0, 0, 0, 1]],
                dtype=np.float64,
            )
            # white-acceleration process noise
            g = np.array([[0.5 * dt * dt, 0], [0, 0.5 * dt * dt], [dt, 0], [0, dt]])
            self.mean = f @ self.mean
            self.cov = f @ self.cov @ f.T + q * (g @ g.T)

    def update(self, x: float, y: float) -> float:
        """Measurement update; returns the pre-update position residual (m)."""
        h = np.array([[1, 0, 0, 0], [0, 1, 0, 0]], dtype=np.float64)
        r = self.cfg.measurement_noise**2 * np.eye(2)
        z = np.array([x, y])
        innovation = z - h @ self.mean
        s = h @ self.cov @ h.T + r
        try:
            k = np.linalg.solve(s, h @ self.cov).T
        except np.linalg.LinAlgError:
            k = np.linalg.solve(s + 1e-12 * np.eye(2), h @ self.cov).T
        self.mean = self.mean + k @ innovation
        self.cov = (np.eye(4) - k @ h) @ self.cov
        self.cov = 0.5 * (self.cov + self.cov.T)
        self._check_psd()
        return float(np.hypot(*innovation))

    def _check_psd(self, tol: float = 1e-8) -> None:
        eigmin = float(np.linalg.eigvalsh(self.cov)[0])
        if eigmin < -tol:
            raise InvalidInputError(f"covariance lost positive semidefiniteness ({eigmin})")

    @property
    def xy(self) -> tuple[float, float]:
        return float(self.mean[0]), float(self.mean[1])


@dataclass
class TrackState:
    """Internal lifecycle state for one live track."""

    track_id: int
    cls: str
    kalman: KalmanCV
    last_pose: BevPose
    last_dims: BoxDims
    last_score: float
    hits: int = 1
    misses: int = 0
    status: str = STATUS_TENTATIVE
    points: list[TrackPoint] = field(default_factory=list)
    pending: list[TrackPoint] = field(default_factory=list)

    @property
    def predicted_xy(self) -> tuple[float, float]:
        return self.kalman.xy


@dataclass
class Assignment:
    matches: list[tuple[int, int]]  # (prediction index, detection index)
    unmatched_predictions: list[int]
    unmatched_detections: list[int]
    cost: float = 0.0


def _pairwise_cost(
    tracks: list[TrackState],
    detections: list[Detection],
    cfg: TrackerConfig,
) -> np.ndarray:
    """Gated cost matrix; infeasible pairs are +inf."""
    cost = np.full((len(tracks), len(detections)), np.inf)
    for i, tr in enumerate(tracks):
        px, py = tr.predicted_xy
        for j, det in enumerate(detections):
            if det.cls != tr.cls:
                continue
            if cfg.gate_mode == "center":
                d = math.hypot(det.pose.x - px, det.pose.y - py)
                if d <= cfg.gate_radius:
                    cost[i, j] = d
            else:
                pred_pose = BevPose(x=px, y=py, z=tr.last_pose.z, yaw=tr.last_pose.yaw)
                iou = bev_iou(pred_pose, tr.last_dims, det.pose, det.dims)
                if iou >= cfg.iou_threshold:
                    cost[i, j] = 1.0 - iou

    return cost


def associate(
    predictions: list[TrackState],
    detections: list[Detection],
    gate_radius: float,
    gate_mode: str = "center",
    iou_threshold: float = 0.1,
) -> Assignment:
    """Globally minimum-cost one-to-one gated assignment.

    Maximum-cardinality matchings are preferred; among those, total BEV
    center distance (or 1-IoU) is minimal. Class mismatches never match.
    """
    cfg = TrackerConfig(
        gate_radius=gate_radius, gate_mode=gate_mode, iou_threshold=iou_threshold
    )
    return _associate(predictions, detections, cfg)


def _associate(
    tracks: list[TrackState], detections: list[Detection], cfg: TrackerConfig
) -> Assignment:
    if not tracks or not detections:
        return Assignment([], list(range(len(tracks))), list(range(len(detections))))
    cost = _pairwise_cost(tracks, detections, cfg)
    feasible = np.isfinite(cost)
    if not feasible.any():
        return Assignment([], list(range(len(tracks))), list(range(len(detections))))
    # big-M makes the solver prefer fewer infeasible picks, i.e. maximum
    # feasible cardinality first, then minimum real cost among those
    big = cost[feasible].sum() + cost[feasible].max() * (sum(cost.shape) + 1) + 1.0
    solv = np.where(feasible, cost, big)
    rows, cols = linear_sum_assignment(solv)
    matches = []
    total = 0.0
    for i, j in zip(rows, cols):
        if feasible[i, j]:
            matches.append((int(i), int(j)))
            total += float(cost[i, j])
    matched_rows = {i for i, _ in matches}
    matched_cols = {j for _, j in matches}
    return Assignment(
        matches=matches,
        unmatched_predictions=[i for i in range(len(tracks)) if i not in matched_rows],
        unmatched_detections=[j for j in range(len(detections)) if j not in matched_cols],
        cost=total,
    )


class Tracker:
    """Per-frame tracking loop. Feed frames in order via step()."""

    def __init__(self, cfg: TrackerConfig | None = None):
        self.cfg = cfg or TrackerConfig()
        self.live: list[TrackState] = []
        self.finished: list[TrackState] = []
        self._next_id = 1

    def step(self, frame_id: int, detections: list[Detection], trace: list | None = None):
        cfg = self.cfg
        for tr in self.live:
            tr.kalman.predict()

        assignment = _associate(self.live, detections, cfg)
        if trace is not None:
            trace.append(
                {
                    "frame": frame_id,
                    "predictions": [
                        (tr.track_id, tr.cls, *tr.predicted_xy) for tr in self.live
                    ],
                    "detections": [
                        (d.cls, d.pose.x, d.pose.y) for d in detections
                    ],
                    "matches": [
                        (self.live[i].track_id, j) for i, j in assignment.matches
                    ],
                    "cost": assignment.cost,
                }
            )

        for i, j in assignment.matches:
            tr = self.live[i]
            det = detections[j]
            tr.kalman.update(det.pose.x, det.pose.y)
            tr.points.extend(tr.pending)
            tr.pending.clear()
            tr.points.append(
                TrackPoint(
                    frame_id=frame_id,
                    pose=det.pose,
                    dims=det.dims,
                    score=det.score,
                    provenance=PROVENANCE_RAW,
                )
            )
            tr.last_pose = det.pose
            tr.last_dims = det.dims
            tr.last_score = det.score
            tr.hits += 1
            tr.misses = 0
            if tr.status == STATUS_TENTATIVE and tr.hits >= cfg.min_hits:
                tr.status = STATUS_CONFIRMED

        survivors = []
        for i in assignment.unmatched_predictions:
            tr = self.live[i]
            tr.misses += 1
            if tr.misses > cfg.max_misses:
                tr.status = STATUS_DEAD
                tr.pending.clear()
                self.finished.append(tr)
                continue
            px, py = tr.predicted_xy
            tr.pending.append(
                TrackPoint(
                    frame_id=frame_id,
                    pose=BevPose(x=px, y=py, z=tr.last_pose.z, yaw=tr.last_pose.yaw),
                    dims=tr.last_dims,
                    score=tr.last_score,
                    provenance=PROVENANCE_INTERPOLATED,
                )
            )
            survivors.append(tr)
        matched_tracks = [self.live[i] for i, _ in assignment.matches]
        self.live = sorted(
            matched_tracks + survivors, key=lambda t: t.track_id
        )

        for j in assignment.unmatched_detections:
            det = detections[j]
            state = TrackState(
                track_id=self._next_id,
                cls=det.cls,
                kalman=KalmanCV(det.pose.x, det.pose.y, cfg),
                last_pose=det.pose,
                last_dims=det.dims,
                last_score=det.score,
            )
            state.points.append(
                TrackPoint(
                    frame_id=frame_id,
                    pose=det.pose,
                    dims=det.dims,
                    score=det.score,
                    provenance=PROVENANCE_RAW,
                )
            )
            self._next_id += 1
            self.live.append(state)

    def tracks(self) -> list[Track]:
        """Emit tracks with enough confirmed points, sorted by first frame then id."""
        out = []
        for state in self.finished + self.live:
            if state.hits >= self.cfg.min_hits and state.points:
                out.append(
                    Track(track_id=state.track_id, cls=state.cls, points=list(state.points))
                )
        out.sort(key=lambda t: (t.first_frame, t.track_id))
        return out


def track(
    frames: FrameStream, cfg: TrackerConfig | None = None, trace: list | None = None
) -> list[Track]:
    """Track a full stream. Iterates the contiguous frame range so dropout
    frames (absent from the map) still age tracks."""
    cfg = cfg or TrackerConfig(dt=frames.dt)
    tracker = Tracker(cfg)
    ids = frames.frame_ids
    if not ids:
        return []
    for frame_id in range(ids[0], ids[-1] + 1):
        tracker.step(frame_id, frames.frames.get(frame_id, []), trace=trace)
    return tracker.tracks()
