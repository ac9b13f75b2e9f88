"""Pure-Python/numpy reference implementation of the hot kernels.

The compiled extension (``trajaudit._kernels._native``) implements the same
contracts; `trajaudit._kernels` selects between them at import time. Keep the
two in lockstep — tests assert cross-backend agreement.

Conventions shared by both backends:
* all arrays are float64 / int64, one entry per track point;
* ``gaps[t]`` is the frame-id gap to the previous point (gaps[0] is unused);
* windowed means shrink symmetrically at the ends, so a window never
  extends past the series and stays centered;
* angles wrap into (-pi, pi].
"""
from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"

_TAU = math.tau
_STEP_EPS = 1e-6  # below this step length a frame counts as stationary
_RESULTANT_EPS = 1e-12
_SPEED_EPS = 1e-12


def _wrap(theta: float) -> float:
    w = math.remainder(theta, _TAU)
    if w <= -math.pi:
        w += _TAU
    return w


def wrap_array(a: np.ndarray) -> np.ndarray:
    """Vectorized wrap into (-pi, pi]."""
    return np.remainder(np.asarray(a, dtype=np.float64) - math.pi, -_TAU) + math.pi


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered uniform moving average with symmetric shrink at the ends."""
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    half = window // 2
    out = np.empty(n)
    if n == 0:
        return out
    if n > 2 * half:
        interior = np.lib.stride_tricks.sliding_window_view(v, 2 * half + 1)
        out[half : n - half] = interior.mean(axis=1)
        edge = half
    else:
        edge = n  # series shorter than the window: everything is an edge
    for t in range(min(edge, n)):
        h = min(half, t, n - 1 - t)
        out[t] = v[t - h : t + h + 1].mean()
    for t in range(max(n - edge, 0), n):
        h = min(half, t, n - 1 - t)
        out[t] = v[t - h : t + h + 1].mean()
    return out


def circular_moving_mean(angles: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Windowed circular mean of angles.

    Returns (means, degenerate) where degenerate marks windows whose
    resultant vector vanished; means there are NaN and the caller must
    substitute a fallback heading.
    """
    a = np.asarray(angles, dtype=np.float64)
    sin_mean = moving_average(np.sin(a), window)
    cos_mean = moving_average(np.cos(a), window)
    resultant = np.hypot(sin_mean, cos_mean)
    degenerate = resultant <= _RESULTANT_EPS
    means = np.where(degenerate, np.nan, np.arctan2(sin_mean, cos_mean))
    means = np.where(means == -math.pi, math.pi, means)
    return means, degenerate


def smooth_positions(
    x: np.ndarray,
    y: np.ndarray,
    gaps: np.ndarray,
    window: int,
    alpha: float,
    dt: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Windowed average followed by a sequential constant-velocity blend.

    Returns (bar_x, bar_y, out_x, out_y): the windowed average and the
    stabilized positions. The first two frames take the windowed average
    directly (no velocity evidence yet).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    gaps = np.asarray(gaps, dtype=np.int64)
    n = x.shape[0]
    bar_x = moving_average(x, window)
    bar_y = moving_average(y, window)
    out_x = np.empty(n)
    out_y = np.empty(n)
    for t in range(n):
        if t < 2:
            out_x[t] = bar_x[t]
            out_y[t] = bar_y[t]
            continue
        span = gaps[t - 1] * dt
        vx = (out_x[t - 1] - out_x[t - 2]) / span
        vy = (out_y[t - 1] - out_y[t - 2]) / span
        pred_x = out_x[t - 1] + vx * gaps[t] * dt
        pred_y = out_y[t - 1] + vy * gaps[t] * dt
        out_x[t] = (1.0 - alpha) * bar_x[t] + alpha * pred_x
        out_y[t] = (1.0 - alpha) * bar_y[t] + alpha * pred_y
    return bar_x, bar_y, out_x, out_y


def motion_heading(
    sx: np.ndarray,
    sy: np.ndarray,
    gaps: np.ndarray,
    dt: float,
    s_min: float,
    alpha_low: float,
    alpha_high: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Path-tangent heading, speed, reliability and raw-yaw blend per frame.

    Stationary steps reuse the previous tangent; leading undefined frames are
    backfilled from the first defined one (NaN when the whole track is
    stationary — callers substitute the windowed heading there). speed[0]
    is backfilled from speed[1] for the reliability series.
    """
    sx = np.asarray(sx, dtype=np.float64)
    sy = np.asarray(sy, dtype=np.float64)
    gaps = np.asarray(gaps, dtype=np.int64)
    n = sx.shape[0]
    psi_motion = np.full(n, np.nan)
    speed = np.zeros(n)
    last = math.nan
    for t in range(1, n):
        step_x = sx[t] - sx[t - 1]
        step_y = sy[t] - sy[t - 1]
        norm = math.hypot(step_x, step_y)
        speed[t] = norm / (gaps[t] * dt)
        if norm >= _STEP_EPS:
            last = math.atan2(step_y, step_x)
        psi_motion[t] = last
    if n >= 2:
        speed[0] = speed[1]
    # backfill leading NaNs from the first defined tangent
    defined = np.flatnonzero(~np.isnan(psi_motion))
    if defined.size:
        psi_motion[: defined[0]] = psi_motion[defined[0]]
    denom = s_min + 0.75
    reliability = np.clip(np.minimum((speed - s_min) / denom, 1.0), 0.0, 1.0)
    alpha_t = alpha_low + (alpha_high - alpha_low) * reliability
    return psi_motion, speed, reliability, alpha_t


def stabilize_headings(
    yaw: np.ndarray,
    psi_motion: np.ndarray,
    alpha_t: np.ndarray,
    gaps: np.ndarray,
    window: int,
    eps_psi: float,
    max_step: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Windowed circular mean + adaptive motion blend + bounded turn rate.

    Returns (psi_bar, psi_tilde, beta_eff). Degenerate windowed means fall
    back to the previous stabilized heading (raw yaw at the first frame).
    """
    yaw = np.asarray(yaw, dtype=np.float64)
    psi_motion = np.asarray(psi_motion, dtype=np.float64)
    gaps = np.asarray(gaps, dtype=np.int64)
    n = yaw.shape[0]
    psi_bar, degenerate = circular_moving_mean(yaw, window)
    psi_tilde = np.empty(n)
    beta_eff = np.empty(n)
    for t in range(n):
        if degenerate[t]:
            bar = yaw[0] if t == 0 else psi_tilde[t - 1]
        else:
            bar = psi_bar[t]
        motion = psi_motion[t] if not math.isnan(psi_motion[t]) else bar
        delta = _wrap(motion - bar)
        beta = (1.0 - alpha_t[t]) if abs(delta) <= eps_psi else 1.0
        beta_eff[t] = beta
        blend = _wrap(bar + beta * delta)
        if t == 0:
            psi_tilde[0] = blend
            continue
        bound = max_step * gaps[t]
        # back saturated steps off a femto-radian: the bound must survive
        # re-measurement through the rounded, wrapped stored headings
        limit = bound - min(1e-15, 0.5 * bound)
        inc = _wrap(blend - psi_tilde[t - 1])
        if inc > limit:
            inc = limit
        elif inc < -limit:
            inc = -limit
        psi_tilde[t] = _wrap(psi_tilde[t - 1] + inc)
    return psi_bar, psi_tilde, beta_eff


def backpropagate_heading(psi_tilde: np.ndarray, reliability: np.ndarray) -> np.ndarray:
    """Overwrite frames before the first reliable-motion frame with its heading."""
    psi = np.array(psi_tilde, dtype=np.float64, copy=True)
    idx = np.flatnonzero(np.asarray(reliability) > 0.0)
    if idx.size and idx[0] > 0:
        psi[: idx[0]] = psi[idx[0]]
    return psi


def pair_metric_arrays(
    p1x: np.ndarray, p1y: np.ndarray, v1x: np.ndarray, v1y: np.ndarray, r1: np.ndarray,
    p2x: np.ndarray, p2y: np.ndarray, v2x: np.ndarray, v2y: np.ndarray, r2: np.ndarray,
    heavy_first: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Per-frame separation, closing-time, and longitudinal closing-time.

    r1/r2 are the size-adjusted radii (half BEV diagonal plus buffer).
    Non-closing frames get +inf. Returns the count of frames where the heavy
    participant had zero speed (longitudinal direction undefined -> +inf).
    """
    p1x = np.asarray(p1x, dtype=np.float64)
    p1y = np.asarray(p1y, dtype=np.float64)
    p2x = np.asarray(p2x, dtype=np.float64)
    p2y = np.asarray(p2y, dtype=np.float64)
    v1x = np.asarray(v1x, dtype=np.float64)
    v1y = np.asarray(v1y, dtype=np.float64)
    v2x = np.asarray(v2x, dtype=np.float64)
    v2y = np.asarray(v2y, dtype=np.float64)

    dpx = p2x - p1x
    dpy = p2y - p1y
    dvx = v2x - v1x
    dvy = v2y - v1y

    sep = np.hypot(dpx, dpy) - (np.asarray(r1) + np.asarray(r2))

    dot = dpx * dvx + dpy * dvy
    vv = dvx * dvx + dvy * dvy
    closing = (dot < 0.0) & (vv > 0.0)
    ttc = np.full(dpx.shape, np.inf)
    ttc[closing] = -dot[closing] / vv[closing]

    if heavy_first:
        hvx, hvy = v1x, v1y
        rel_px, rel_py = dpx, dpy
        rel_vx, rel_vy = dvx, dvy
    else:
        hvx, hvy = v2x, v2y
        rel_px, rel_py = -dpx, -dpy
        rel_vx, rel_vy = -dvx, -dvy
    h_speed = np.hypot(hvx, hvy)
    moving = h_speed > _SPEED_EPS
    ttc_long = np.full(dpx.shape, np.inf)
    with np.errstate(invalid="ignore", divide="ignore"):
        ex = np.where(moving, hvx / np.where(moving, h_speed, 1.0), 0.0)
        ey = np.where(moving, hvy / np.where(moving, h_speed, 1.0), 0.0)
        d_par = rel_px * ex + rel_py * ey
        v_par = rel_vx * ex + rel_vy * ey
        valid = moving & (v_par < 0.0) & (d_par > 0.0)
        ttc_long[valid] = d_par[valid] / (-v_par[valid])
    n_heavy_zero = int(np.count_nonzero(~moving))
    return sep, ttc, ttc_long, n_heavy_zero
