"""Shared BEV geometry: angle arithmetic, pose and box primitives, distances.

All angles are radians in (-pi, pi], measured from the +x axis,
counterclockwise positive. Degrees appear only at CLI/config boundaries,
always with an explicit ``_deg`` suffix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DegenerateMeanError, DegenerateWindowError, InvalidInputError

TAU = math.tau

# Relative tolerance below which the resultant vector of a circular mean is
# treated as zero (perfectly opposed angles).
_RESULTANT_EPS = 1e-12


def wrap_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi].

    Raises InvalidInputError on non-finite input.
    """
    if not math.isfinite(theta):
        raise InvalidInputError(f"angle must be finite, got {theta!r}")
    wrapped = math.remainder(theta, TAU)
    if wrapped <= -math.pi:
        wrapped += TAU
    return wrapped


def angle_delta(a: float, b: float) -> float:
    """Wrapped angular difference wrap(a - b), in (-pi, pi]."""
    return wrap_angle(a - b)


def circular_mean(angles: Sequence[float], weights: Sequence[float] | None = None) -> float:
    """Weighted circular mean via the resultant vector, wrapped into (-pi, pi].

    Raises DegenerateWindowError when no positive weight is present and
    DegenerateMeanError when the resultant vector vanishes (opposed angles);
    callers are expected to fall back to a previous heading in that case.
    """
    angles = list(angles)
    if not angles:
        raise DegenerateWindowError("empty angle window")
    if weights is None:
        weights = [1.0] * len(angles)
    else:
        weights = list(weights)
        if len(weights) != len(angles):
            raise InvalidInputError(
                f"{len(angles)} angles but {len(weights)} weights"
            )
    sin_sum = 0.0
    cos_sum = 0.0
    weight_sum = 0.0
    for theta, w in zip(angles, weights):
        if not math.isfinite(theta):
            raise InvalidInputError(f"angle must be finite, got {theta!r}")
        if not math.isfinite(w) or w < 0.0:
            raise InvalidInputError(f"weights must be finite and >= 0, got {w!r}")
        sin_sum += w * math.sin(theta)
        cos_sum += w * math.cos(theta)
        weight_sum += w
    if weight_sum <= 0.0:
        raise DegenerateWindowError("all weights are zero")
    if math.hypot(sin_sum, cos_sum) <= _RESULTANT_EPS * weight_sum:
        raise DegenerateMeanError("zero resultant vector (opposed angles)")
    return wrap_angle(math.atan2(sin_sum, cos_sum))


@dataclass(frozen=True)
class BevPose:
    """BEV box center with heading. z is carried through but unused by BEV math."""

    x: float
    y: float
    z: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z", "yaw"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidInputError(f"pose {name} must be finite, got {value!r}")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


@dataclass(frozen=True)
class BoxDims:
    """Box extents in meters; all components strictly positive."""

    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        for name in ("dx", "dy", "dz"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise InvalidInputError(
                    f"dims {name} must be finite and > 0, got {value!r}"
                )

    def bev_diagonal(self) -> float:
        return math.hypot(self.dx, self.dy)


def bev_center_distance(a: BevPose, b: BevPose) -> float:
    """Euclidean distance between BEV centers (z ignored)."""
    return math.hypot(a.x - b.x, a.y - b.y)


def box_corners(pose: BevPose, dims: BoxDims) -> list[tuple[float, float]]:
    """Four BEV corners of a yawed box, counterclockwise starting front-left."""
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    hx, hy = dims.dx / 2.0, dims.dy / 2.0
    corners = []
    for ex, ey in ((hx, hy), (-hx, hy), (-hx, -hy), (hx, -hy)):
        corners.append((pose.x + ex * c - ey * s, pose.y + ex * s + ey * c))
    return corners


def bev_iou(pose_a: BevPose, dims_a: BoxDims, pose_b: BevPose, dims_b: BoxDims) -> float:
    """BEV IoU of two yawed boxes. Requires shapely (optional dependency)."""
    try:
        from shapely.geometry import Polygon
    except ImportError as exc:  # pragma: no cover - environment dependent
        raise ImportError("BEV IoU gating requires the 'shapely' package") from exc
    pa = Polygon(box_corners(pose_a, dims_a))
    pb = Polygon(box_corners(pose_b, dims_b))
    inter = pa.intersection(pb).area
    union = pa.area + pb.area - inter
    return inter / union if union > 0.0 else 0.0


def mean_angle_of(points: Iterable[tuple[float, float]]) -> float:
    """Direction of the summed displacement vector; helper for tests/tools."""
    sx = sum(p[0] for p in points)
    sy = sum(p[1] for p in points)
    if sx == 0.0 and sy == 0.0:
        raise DegenerateMeanError("zero displacement")
    return math.atan2(sy, sx)
