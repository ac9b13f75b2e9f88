# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementation of the hot kernels.

Mirrors trajaudit._kernels.pyref function-for-function; see that module for
the shared contracts. Keep both backends in lockstep.
"""
import math

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, fabs, hypot, remainder, sin, INFINITY, NAN, isnan

cnp.import_array()

BACKEND_NAME = "native"

cdef double _TAU = 2.0 * math.pi
cdef double _PI = math.pi
cdef double _STEP_EPS = 1e-6
cdef double _RESULTANT_EPS = 1e-12
cdef double _SPEED_EPS = 1e-12


cdef inline double _wrap(double theta) nogil:
    cdef double w = remainder(theta, _TAU)
    if w <= -_PI:
        w += _TAU
    return w


def wrap_array(a):
    """Vectorized wrap into (-pi, pi]."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] arr = np.ascontiguousarray(a, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(arr.shape[0])
    cdef Py_ssize_t i
    for i in range(arr.shape[0]):
        out[i] = _wrap(arr[i])
    return out


def moving_average(values, int window):
    """Centered uniform moving average with symmetric shrink at the ends."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef Py_ssize_t half = window // 2
    cdef Py_ssize_t t, k, h
    cdef double acc
    for t in range(n):
        h = half
        if t < h:
            h = t
        if n - 1 - t < h:
            h = n - 1 - t
        acc = 0.0
        for k in range(t - h, t + h + 1):
            acc += v[k]
        out[t] = acc / (2 * h + 1)
    return out


def circular_moving_mean(angles, int window):
    """Windowed circular mean; degenerate windows yield NaN + mask."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(angles, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] means = np.empty(n)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] degenerate = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t half = window // 2
    cdef Py_ssize_t t, k, h
    cdef double s, c, m
    for t in range(n):
        h = half
        if t < h:
            h = t
        if n - 1 - t < h:
            h = n - 1 - t
        s = 0.0
        c = 0.0
        for k in range(t - h, t + h + 1):
            s += sin(a[k])
            c += cos(a[k])
        s /= (2 * h + 1)
        c /= (2 * h + 1)
        if hypot(s, c) <= _RESULTANT_EPS:
            degenerate[t] = 1
            means[t] = NAN
        else:
            m = atan2(s, c)
            if m == -_PI:
                m = _PI
            means[t] = m
    return means, degenerate.view(np.bool_)


def smooth_positions(x, y, gaps, int window, double alpha, double dt):
    """Windowed average followed by a sequential constant-velocity blend."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bar_x = moving_average(x, window)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bar_y = moving_average(y, window)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] g = np.ascontiguousarray(gaps, dtype=np.int64)
    cdef Py_ssize_t n = bar_x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_x = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_y = np.empty(n)
    cdef Py_ssize_t t
    cdef double span, vx, vy, pred_x, pred_y
    for t in range(n):
        if t < 2:
            out_x[t] = bar_x[t]
            out_y[t] = bar_y[t]
            continue
        span = g[t - 1] * dt
        vx = (out_x[t - 1] - out_x[t - 2]) / span
        vy = (out_y[t - 1] - out_y[t - 2]) / span
        pred_x = out_x[t - 1] + vx * g[t] * dt
        pred_y = out_y[t - 1] + vy * g[t] * dt
        out_x[t] = (1.0 - alpha) * bar_x[t] + alpha * pred_x
        out_y[t] = (1.0 - alpha) * bar_y[t] + alpha * pred_y
    return bar_x, bar_y, out_x, out_y


def motion_heading(sx, sy, gaps, double dt, double s_min,
                   double alpha_low, double alpha_high):
    """Path-tangent heading, speed, reliability and raw-yaw blend per frame."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] px = np.ascontiguousarray(sx, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] py = np.ascontiguousarray(sy, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] g = np.ascontiguousarray(gaps, dtype=np.int64)
    cdef Py_ssize_t n = px.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] psi_motion = np.full(n, np.nan)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] speed = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] reliability = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] alpha_t = np.empty(n)
    cdef Py_ssize_t t, first_defined = -1
    cdef double step_x, step_y, norm, last = NAN, denom, r
    for t in range(1, n):
        step_x = px[t] - px[t - 1]
        step_y = py[t] - py[t - 1]
        norm = hypot(step_x, step_y)
        speed[t] = norm / (g[t] * dt)
        if norm >= _STEP_EPS:
            last = atan2(step_y, step_x)
            if first_defined < 0:
                first_defined = t
        psi_motion[t] = last
    if n >= 2:
        speed[0] = speed[1]
    if first_defined > 0:
        for t in range(first_defined):
            psi_motion[t] = psi_motion[first_defined]
    denom = s_min + 0.75
    for t in range(n):
        r = (speed[t] - s_min) / denom
        if r > 1.0:
            r = 1.0
        if r < 0.0:
            r = 0.0
        reliability[t] = r
        alpha_t[t] = alpha_low + (alpha_high - alpha_low) * r
    return psi_motion, speed, reliability, alpha_t


def stabilize_headings(yaw, psi_motion, alpha_t, gaps, int window,
                       double eps_psi, double max_step):
    """Windowed circular mean + adaptive motion blend + bounded turn rate."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] raw = np.ascontiguousarray(yaw, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] motion = np.ascontiguousarray(psi_motion, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] alph = np.ascontiguousarray(alpha_t, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] g = np.ascontiguousarray(gaps, dtype=np.int64)
    cdef Py_ssize_t n = raw.shape[0]
    means_obj, degenerate_obj = circular_moving_mean(raw, window)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] psi_bar = means_obj
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] degenerate = degenerate_obj.view(np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] psi_tilde = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] beta_eff = np.empty(n)
    cdef Py_ssize_t t
    cdef double bar, mot, delta, beta, blend, bound, limit, margin, inc
    for t in range(n):
        if degenerate[t]:
            bar = raw[0] if t == 0 else psi_tilde[t - 1]
        else:
            bar = psi_bar[t]
        mot = motion[t]
        if isnan(mot):
            mot = bar
        delta = _wrap(mot - bar)
        if fabs(delta) <= eps_psi:
            beta = 1.0 - alph[t]
        else:
            beta = 1.0
        beta_eff[t] = beta
        blend = _wrap(bar + beta * delta)
        if t == 0:
            psi_tilde[0] = blend
            continue
        bound = max_step * g[t]
        # back saturated steps off a femto-radian: the bound must survive
        # re-measurement through the rounded, wrapped stored headings
        margin = 0.5 * bound
        if margin > 1e-15:
            margin = 1e-15
        limit = bound - margin
        inc = _wrap(blend - psi_tilde[t - 1])
        if inc > limit:
            inc = limit
        elif inc < -limit:
            inc = -limit
        psi_tilde[t] = _wrap(psi_tilde[t - 1] + inc)
    return psi_bar, psi_tilde, beta_eff


def backpropagate_heading(psi_tilde, reliability):
    """Overwrite frames before the first reliable-motion frame with its heading."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] psi = np.array(psi_tilde, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = np.ascontiguousarray(reliability, dtype=np.float64)
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t t, first = -1
    for t in range(n):
        if r[t] > 0.0:
            first = t
            break
    if first > 0:
        for t in range(first):
            psi[t] = psi[first]
    return psi


def pair_metric_arrays(p1x, p1y, v1x, v1y, r1,
                       p2x, p2y, v2x, v2y, r2,
                       bint heavy_first):
    """Per-frame separation, closing-time, and longitudinal closing-time."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a_px = np.ascontiguousarray(p1x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a_py = np.ascontiguousarray(p1y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a_vx = np.ascontiguousarray(v1x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a_vy = np.ascontiguousarray(v1y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a_r = np.ascontiguousarray(r1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b_px = np.ascontiguousarray(p2x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b_py = np.ascontiguousarray(p2y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b_vx = np.ascontiguousarray(v2x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b_vy = np.ascontiguousarray(v2y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b_r = np.ascontiguousarray(r2, dtype=np.float64)
    cdef Py_ssize_t n = a_px.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sep = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ttc = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ttc_long = np.empty(n)
    cdef Py_ssize_t t
    cdef int n_heavy_zero = 0
    cdef double dpx, dpy, dvx, dvy, dot, vv
    cdef double hvx, hvy, h_speed, ex, ey, rel_px, rel_py, rel_vx, rel_vy, d_par, v_par
    for t in range(n):
        dpx = b_px[t] - a_px[t]
        dpy = b_py[t] - a_py[t]
        dvx = b_vx[t] - a_vx[t]
        dvy = b_vy[t] - a_vy[t]
        sep[t] = hypot(dpx, dpy) - (a_r[t] + b_r[t])
        dot = dpx * dvx + dpy * dvy
        vv = dvx * dvx + dvy * dvy
        if dot < 0.0 and vv > 0.0:
            ttc[t] = -dot / vv
        else:
            ttc[t] = INFINITY
        if heavy_first:
            hvx = a_vx[t]
            hvy = a_vy[t]
            rel_px = dpx
            rel_py = dpy
            rel_vx = dvx
            rel_vy = dvy
        else:
            hvx = b_vx[t]
            hvy = b_vy[t]
            rel_px = -dpx
            rel_py = -dpy
            rel_vx = -dvx
            rel_vy = -dvy
        h_speed = hypot(hvx, hvy)
        if h_speed <= _SPEED_EPS:
            n_heavy_zero += 1
            ttc_long[t] = INFINITY
            continue
        ex = hvx / h_speed
        ey = hvy / h_speed
        d_par = rel_px * ex + rel_py * ey
        v_par = rel_vx * ex + rel_vy * ey
        if v_par < 0.0 and d_par > 0.0:
            ttc_long[t] = d_par / (-v_par)
        else:
            ttc_long[t] = INFINITY
    return sep, ttc, ttc_long, n_heavy_zero
