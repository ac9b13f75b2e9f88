"""Frame-level surrogate-safety math for track pairs.

Direction-agnostic closing time (time to closest approach of centers while
closing, else +inf), size-adjusted signed separation between circular box
proxies, and longitudinal closing time projected onto the heavy
participant's travel direction. +inf means "not closing" and is serialized
as null, never as a sentinel float.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    InsufficientOverlapError,
    InvalidInputError,
    UndefinedDirectionError,
)
from .geometry import BevPose, BoxDims
from .records import Track

_K = _kernels.impl

log = logging.getLogger(__name__)

DEFAULT_BUFFER = 0.3

# class priority for picking the heavy participant of a pair
_CLASS_PRIORITY = {"truck": 3, "car": 2, "bicycle": 1, "pedestrian": 0}


@dataclass(frozen=True)
class PairFrame:
    """One frame of a candidate pair: poses, velocities, and box dims."""

    frame_id: int
    p1: BevPose
    p2: BevPose
    v1: tuple[float, float]
    v2: tuple[float, float]
    dims1: BoxDims
    dims2: BoxDims

    def __post_init__(self):
        for v in (*self.v1, *self.v2):
            if not math.isfinite(v):
                raise InvalidInputError(f"velocity must be finite, got {v!r}")


def proxy_radius(dims: BoxDims, buffer: float = DEFAULT_BUFFER) -> float:
    """Half the BEV diagonal plus the fixed radius buffer."""
    return 0.5 * math.hypot(dims.dx, dims.dy) + buffer


def separation(frame: PairFrame, buffer: float = DEFAULT_BUFFER) -> float:
    """Signed clearance between the size-adjusted disc proxies.

    Negative values mean the proxies overlap, not literal physical
    penetration.
    """
    dist = math.hypot(frame.p2.x - frame.p1.x, frame.p2.y - frame.p1.y)
    return dist - (proxy_radius(frame.dims1, buffer) + proxy_radius(frame.dims2, buffer))


def ttc(frame: PairFrame) -> float:
    """Projected time to closest approach of centers; +inf unless closing."""
    dpx = frame.p2.x - frame.p1.x
    dpy = frame.p2.y - frame.p1.y
    dvx = frame.v2[0] - frame.v1[0]
    dvy = frame.v2[1] - frame.v1[1]
    dot = dpx * dvx + dpy * dvy
    vv = dvx * dvx + dvy * dvy
    if dot < 0.0 and vv > 0.0:
        return -dot / vv
    return math.inf


def ttc_longitudinal(frame: PairFrame, heavy_is: str = "p1") -> float:
    """Closing time along the heavy participant's travel direction.

    Projects relative position/velocity of the other participant onto the
    heavy participant's unit velocity; returns +inf when not closing
    longitudinally or when the other participant is already behind the
    projection origin. Raises UndefinedDirectionError if the heavy
    participant has zero speed.
    """
    if heavy_is not in ("p1", "p2"):
        raise InvalidInputError(f"heavy_is must be 'p1' or 'p2', got {heavy_is!r}")
    if heavy_is == "p1":
        heavy_v, heavy_p = frame.v1, frame.p1
        other_v, other_p = frame.v2, frame.p2
    else:
        heavy_v, heavy_p = frame.v2, frame.p2
        other_v, other_p = frame.v1, frame.p1
    speed = math.hypot(*heavy_v)
    if speed <= 1e-12:
        raise UndefinedDirectionError(
            f"heavy participant has zero speed at frame {frame.frame_id}"
        )
    ex, ey = heavy_v[0] / speed, heavy_v[1] / speed
    d_par = (other_p.x - heavy_p.x) * ex + (other_p.y - heavy_p.y) * ey
    v_par = (other_v[0] - heavy_v[0]) * ex + (other_v[1] - heavy_v[1]) * ey
    if v_par < 0.0 and d_par > 0.0:
        return d_par / (-v_par)
    return math.inf


def heavy_participant(track_a: Track, track_b: Track) -> str:
    """Pick the heavy participant: class priority, then BEV diagonal, then id."""
    pa = _CLASS_PRIORITY.get(track_a.cls, -1)
    pb = _CLASS_PRIORITY.get(track_b.cls, -1)
    if pa != pb:
        return "a" if pa > pb else "b"
    da = max(p.dims.bev_diagonal() for p in track_a.points)
    db = max(p.dims.bev_diagonal() for p in track_b.points)
    if da != db:
        return "a" if da > db else "b"
    return "a" if track_a.track_id <= track_b.track_id else "b"


def track_velocities(track: Track, dt: float) -> np.ndarray:
    """Per-point velocities by centered finite differences (one-sided at ends)."""
    n = len(track)
    out = np.zeros((n, 2))
    if n < 2:
        return out
    pts = track.points
    for i in range(n):
        lo = max(0, i - 1)
        hi = min(n - 1, i + 1)
        span = (pts[hi].frame_id - pts[lo].frame_id) * dt
        out[i, 0] = (pts[hi].pose.x - pts[lo].pose.x) / span
        out[i, 1] = (pts[hi].pose.y - pts[lo].pose.y) / span
    return out


@dataclass
class MetricSeries:
    """Per-frame metric arrays over a pair's overlap, plus min summaries.

    Summaries are recomputed from the stored arrays, never cached, so they
    always agree with the series.
    """

    frames: np.ndarray
    sep: np.ndarray
    ttc: np.ndarray
    ttc_long: np.ndarray
    heavy: str = "a"  # which participant the longitudinal metric projects on
    n_heavy_zero_speed: int = 0

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def min_sep(self) -> float:
        return float(np.min(self.sep))

    @property
    def min_ttc(self) -> float:
        return float(np.min(self.ttc))

    @property
    def min_ttc_long(self) -> float:
        return float(np.min(self.ttc_long))

    @property
    def argmin_sep_frame(self) -> int:
        return int(self.frames[int(np.argmin(self.sep))])

    @property
    def argmin_ttc_frame(self) -> int:
        return int(self.frames[int(np.argmin(self.ttc))])

    @property
    def argmin_ttc_long_frame(self) -> int:
        return int(self.frames[int(np.argmin(self.ttc_long))])

    def slice_frames(self, first: int, last: int) -> "MetricSeries":
        mask = (self.frames >= first) & (self.frames <= last)
        return MetricSeries(
            frames=self.frames[mask],
            sep=self.sep[mask],
            ttc=self.ttc[mask],
            ttc_long=self.ttc_long[mask],
            heavy=self.heavy,
            n_heavy_zero_speed=self.n_heavy_zero_speed,
        )

    def to_records(self) -> list[dict]:
        """Per-frame rows; +inf becomes null."""
        return [
            {
                "frame": int(f),
                "sep": float(s),
                "ttc": None if math.isinf(t) else float(t),
                "ttc_long": None if math.isinf(tl) else float(tl),
            }
            for f, s, t, tl in zip(self.frames, self.sep, self.ttc, self.ttc_long)
        ]


def pair_metrics(
    track_a: Track,
    track_b: Track,
    dt: float,
    buffer: float = DEFAULT_BUFFER,
    heavy_rule=heavy_participant,
) -> MetricSeries:
    """Metric series over the frames where both tracks have points.

    Velocities come from centered finite differences of each full track and
    are then restricted to the overlap. Frames where the heavy participant
    has zero speed yield +inf longitudinal values and are counted (the
    per-frame operation would raise; here we log instead).
    """
    frames_a = {p.frame_id: i for i, p in enumerate(track_a.points)}
    frames_b = {p.frame_id: i for i, p in enumerate(track_b.points)}
    common = sorted(set(frames_a) & set(frames_b))
    if len(common) < 2:
        raise InsufficientOverlapError(
            f"tracks {track_a.track_id} and {track_b.track_id} overlap in "
            f"{len(common)} frame(s); need >= 2"
        )
    vel_a = track_velocities(track_a, dt)
    vel_b = track_velocities(track_b, dt)

    ia = np.array([frames_a[f] for f in common])
    ib = np.array([frames_b[f] for f in common])
    ax = np.array([track_a.points[i].pose.x for i in ia])
    ay = np.array([track_a.points[i].pose.y for i in ia])
    bx = np.array([track_b.points[i].pose.x for i in ib])
    by = np.array([track_b.points[i].pose.y for i in ib])
    ar = np.array([proxy_radius(track_a.points[i].dims, buffer) for i in ia])
    br = np.array([proxy_radius(track_b.points[i].dims, buffer) for i in ib])

    heavy = heavy_rule(track_a, track_b)
    sep_arr, ttc_arr, ttc_long_arr, n_zero = _K.pair_metric_arrays(
        ax, ay, vel_a[ia, 0], vel_a[ia, 1], ar,
        bx, by, vel_b[ib, 0], vel_b[ib, 1], br,
        heavy == "a",
    )
    if n_zero:
        log.info(
            "pair (%s, %s): heavy participant stationary on %d frame(s); "
            "longitudinal metric undefined there (+inf)",
            track_a.track_id,
            track_b.track_id,
            n_zero,
        )
    return MetricSeries(
        frames=np.array(common, dtype=np.int64),
        sep=sep_arr,
        ttc=ttc_arr,
        ttc_long=ttc_long_arr,
        heavy=heavy,
        n_heavy_zero_speed=n_zero,
    )
