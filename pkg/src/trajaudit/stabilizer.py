"""Dynamics-aware track stabilization.

Three coupled stages over one track: position smoothing with a
constant-velocity blend, heading stabilization with adaptive motion blending
and a bounded turn rate, and robust (median) dimension estimation. Reported
as its own branch, separate from the B0/B1/B2 refinement comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import InvalidInputError
from .geometry import BevPose, BoxDims, angle_delta, wrap_angle
from .records import Track, TrackPoint

_K = _kernels.impl


@dataclass(frozen=True)
class StabilizerConfig:
    """Tuning for the stabilization passes. Angles in radians.

    alpha is the position blend toward the constant-velocity prediction
    (artifact-chosen default 0.3; not specified by the method). alpha_low /
    alpha_high / s_min parameterize the adaptive raw-yaw blend; eps_psi is
    the disagreement threshold beyond which the motion heading wins outright;
    max_step bounds the per-frame heading increment (scaled by frame gaps).
    """

    window: int = 9
    alpha: float = 0.3
    alpha_low: float = 0.35
    alpha_high: float = 0.08
    s_min: float = 0.75
    eps_psi: float = math.radians(20.0)
    max_step: float = math.radians(2.5)
    backprop_heading: bool = True
    dt: float = 0.1

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise InvalidInputError(f"window must be odd and >= 3, got {self.window}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidInputError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.alpha_high <= self.alpha_low <= 1.0:
            raise InvalidInputError(
                "need 0 <= alpha_high <= alpha_low <= 1, got "
                f"alpha_low={self.alpha_low}, alpha_high={self.alpha_high}"
            )
        if self.max_step <= 0.0:
            raise InvalidInputError(f"max_step must be > 0, got {self.max_step}")
        if self.dt <= 0.0:
            raise InvalidInputError(f"dt must be > 0, got {self.dt}")


@dataclass
class StabilizedTrack:
    """Stabilized state plus per-frame diagnostics for one track."""

    track: Track
    x: np.ndarray
    y: np.ndarray
    yaw: np.ndarray
    psi_motion: np.ndarray
    speed: np.ndarray
    reliability: np.ndarray
    beta_eff: np.ndarray
    dims: BoxDims
    config: StabilizerConfig = field(repr=False, default_factory=StabilizerConfig)

    def to_track(self) -> Track:
        """Materialize a Track with stabilized poses and the robust dims."""
        points = []
        for i, p in enumerate(self.track.points):
            points.append(
                replace(
                    p,
                    pose=BevPose(
                        x=float(self.x[i]),
                        y=float(self.y[i]),
                        z=p.pose.z,
                        yaw=float(self.yaw[i]),
                    ),
                    dims=self.dims,
                )
            )
        return Track(track_id=self.track.track_id, cls=self.track.cls, points=points)


def _track_arrays(track: Track):
    xs = np.array([p.pose.x for p in track.points])
    ys = np.array([p.pose.y for p in track.points])
    yaws = np.array([p.pose.yaw for p in track.points])
    frames = np.array(track.frames(), dtype=np.int64)
    gaps = np.ones(len(track), dtype=np.int64)
    if len(track) > 1:
        gaps[1:] = np.diff(frames)
    return xs, ys, yaws, gaps


def smooth_position(track: Track, cfg: StabilizerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Windowed average then constant-velocity blend; returns (p_bar, p_smooth) as Nx2."""
    if not track.points:
        raise InvalidInputError("empty track")
    xs, ys, _, gaps = _track_arrays(track)
    bar_x, bar_y, out_x, out_y = _K.smooth_positions(
        xs, ys, gaps, cfg.window, cfg.alpha, cfg.dt
    )
    return np.column_stack([bar_x, bar_y]), np.column_stack([out_x, out_y])


def motion_heading(
    positions: np.ndarray, gaps: np.ndarray, cfg: StabilizerConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-frame path tangent, speed, reliability, and raw-yaw blend factor."""
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape[0] < 2:
        raise InvalidInputError("motion heading needs >= 2 points")
    return _K.motion_heading(
        positions[:, 0],
        positions[:, 1],
        np.asarray(gaps, dtype=np.int64),
        cfg.dt,
        cfg.s_min,
        cfg.alpha_low,
        cfg.alpha_high,
    )


def blend_heading(
    psi_bar: float, psi_motion: float, alpha_t: float, cfg: StabilizerConfig
) -> tuple[float, float]:
    """Blend the windowed heading toward the motion heading.

    Returns (psi_blend, beta). When the two disagree by more than eps_psi
    the motion heading wins outright (beta = 1).
    """
    delta = angle_delta(psi_motion, psi_bar)
    beta = (1.0 - alpha_t) if abs(delta) <= cfg.eps_psi else 1.0
    return wrap_angle(psi_bar + beta * delta), beta


def clamp_heading_step(
    psi_prev: float, psi_blend: float, frame_gap: int, cfg: StabilizerConfig
) -> float:
    """Clip the proposed heading increment to +/- max_step x frame_gap."""
    if frame_gap < 1:
        raise InvalidInputError(f"frame_gap must be >= 1, got {frame_gap}")
    bound = cfg.max_step * frame_gap
    inc = angle_delta(psi_blend, psi_prev)
    inc = min(max(inc, -bound), bound)
    return wrap_angle(psi_prev + inc)


def backpropagate_heading(headings: np.ndarray, reliability: np.ndarray) -> np.ndarray:
    """Overwrite the low-speed prefix with the first reliable-motion heading."""
    return _K.backpropagate_heading(
        np.asarray(headings, dtype=np.float64),
        np.asarray(reliability, dtype=np.float64),
    )


def robust_dims(dims_series) -> BoxDims:
    """Componentwise median of the observed dims (the l1 minimizer).

    Even counts use the midpoint of the two central order statistics.
    """
    dims_series = list(dims_series)
    if not dims_series:
        raise InvalidInputError("robust_dims needs at least one observation")
    arr = np.array([(d.dx, d.dy, d.dz) for d in dims_series])
    med = np.median(arr, axis=0)
    return BoxDims(dx=float(med[0]), dy=float(med[1]), dz=float(med[2]))


def stabilize(track: Track, cfg: StabilizerConfig | None = None) -> StabilizedTrack:
    """Full stabilization pass over one track.

    Positions are smoothed first; the motion heading is taken from the
    smoothed path; headings then go through windowed circular averaging,
    adaptive blending, and the turn-rate clamp; finally low-speed
    initialization is optionally backpropagated and dims are medianized.
    """
    cfg = cfg or StabilizerConfig()
    if not track.points:
        raise InvalidInputError("empty track")
    xs, ys, yaws, gaps = _track_arrays(track)
    n = len(track)

    _, _, sm_x, sm_y = _K.smooth_positions(xs, ys, gaps, cfg.window, cfg.alpha, cfg.dt)

    if n >= 2:
        psi_motion, speed, reliability, alpha_t = _K.motion_heading(
            sm_x, sm_y, gaps, cfg.dt, cfg.s_min, cfg.alpha_low, cfg.alpha_high
        )
    else:
        psi_motion = np.array([np.nan])
        speed = np.zeros(1)
        reliability = np.zeros(1)
        alpha_t = np.array([cfg.alpha_low])

    _, psi_tilde, beta_eff = _K.stabilize_headings(
        yaws, psi_motion, alpha_t, gaps, cfg.window, cfg.eps_psi, cfg.max_step
    )
    if cfg.backprop_heading:
        psi_tilde = _K.backpropagate_heading(psi_tilde, reliability)

    dims = robust_dims([p.dims for p in track.points])

    # surface the windowed heading where the tangent was undefined
    psi_motion_out = np.where(np.isnan(psi_motion), psi_tilde, psi_motion)

    return StabilizedTrack(
        track=track,
        x=sm_x,
        y=sm_y,
        yaw=psi_tilde,
        psi_motion=psi_motion_out,
        speed=speed,
        reliability=reliability,
        beta_eff=beta_eff,
        dims=dims,
        config=cfg,
    )


def stabilized_point_extras(stab: StabilizedTrack, i: int) -> dict:
    """Extra JSONL columns for one stabilized point (diagnostics)."""
    return {
        "psi_motion": float(stab.psi_motion[i]),
        "r": float(stab.reliability[i]),
        "beta_eff": float(stab.beta_eff[i]),
    }


def dims_summary_record(stab: StabilizedTrack) -> dict:
    return {
        "record_type": "dims_summary",
        "track_id": stab.track.track_id,
        "cls": stab.track.cls,
        "dx": stab.dims.dx,
        "dy": stab.dims.dy,
        "dz": stab.dims.dz,
    }
