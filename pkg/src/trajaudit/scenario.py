"""Synthetic scenario generation: parametric agent paths with observation noise.

Noiseless paths become ground truth; noisy, possibly dropped observations
become detections. Everything is deterministic under a fixed seed, which is
what makes these scenarios usable as test oracles.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidSpecError
from .geometry import BevPose, BoxDims, wrap_angle
from .records import (
    CLASSES,
    Detection,
    FrameStream,
    GroundTruthTrack,
    GtPoint,
)

_PATH_KINDS = ("const_velocity", "const_turn", "waypoints")


@dataclass(frozen=True)
class PathSpec:
    """Parametric BEV path. Exactly one of the three kinds.

    const_velocity: start + velocity
    const_turn:     start + speed + heading0 + turn_rate (rad/s)
    waypoints:      points traversed at constant speed, clamped at the end
    """

    kind: str
    start: tuple[float, float] = (0.0, 0.0)
    velocity: tuple[float, float] = (0.0, 0.0)
    speed: float = 0.0
    heading0: float = 0.0
    turn_rate: float = 0.0
    points: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in _PATH_KINDS:
            raise InvalidSpecError(f"unknown path kind {self.kind!r}")
        if self.kind == "waypoints":
            if len(self.points) < 2:
                raise InvalidSpecError("waypoints path needs >= 2 points")
            if self.speed <= 0:
                raise InvalidSpecError("waypoints path needs speed > 0")

    def state_at(self, t: float) -> tuple[float, float, float]:
        """Position and tangent heading at time t (seconds from agent start)."""
        if self.kind == "const_velocity":
            vx, vy = self.velocity
            x = self.start[0] + vx * t
            y = self.start[1] + vy * t
            heading = math.atan2(vy, vx) if (vx or vy) else 0.0
            return x, y, heading
        if self.kind == "const_turn":
            h0, w, s = self.heading0, self.turn_rate, self.speed
            if abs(w) < 1e-12:
                return (
                    self.start[0] + s * math.cos(h0) * t,
                    self.start[1] + s * math.sin(h0) * t,
                    h0,
                )
            h = h0 + w * t
            r = s / w
            x = self.start[0] + r * (math.sin(h) - math.sin(h0))
            y = self.start[1] - r * (math.cos(h) - math.cos(h0))
            return x, y, wrap_angle(h)
        # waypoints: arc-length parameterization at constant speed
        dist = self.speed * t
        pts = self.points
        for a, b in zip(pts, pts[1:]):
            seg = math.hypot(b[0] - a[0], b[1] - a[1])
            heading = math.atan2(b[1] - a[1], b[0] - a[0])
            if dist <= seg or (a, b) == (pts[-2], pts[-1]):
                if dist >= seg:
                    return b[0], b[1], heading
                f = dist / seg if seg > 0 else 0.0
                return a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), heading
            dist -= seg
        last = pts[-1]
        return last[0], last[1], 0.0


@dataclass(frozen=True)
class AgentSpec:
    agent_id: str
    cls: str
    dims: tuple[float, float, float]
    path: PathSpec
    yaw: float | None = None  # None => path tangent
    pos_std: float = 0.0
    yaw_std: float = 0.0
    dims_std: float = 0.0
    dropout: float = 0.0
    score_mean: float = 0.9
    score_std: float = 0.0
    z: float = 0.0
    start_frame: int = 0
    n_frames: int | None = None  # None => full scenario duration

    def __post_init__(self):
        if self.cls not in CLASSES:
            raise InvalidSpecError(f"unknown class {self.cls!r}")
        if not 0.0 <= self.dropout <= 1.0:
            raise InvalidSpecError("dropout must be in [0, 1]")
        if min(self.dims) <= 0:
            raise InvalidSpecError("dims must be positive")


@dataclass
class ScenarioSpec:
    dt: float = 0.1
    duration: float = 10.0
    seed: int = 0
    agents: list[AgentSpec] = field(default_factory=list)

    def __post_init__(self):
        if self.dt <= 0:
            raise InvalidSpecError(f"dt must be > 0, got {self.dt}")
        if self.duration <= 0:
            raise InvalidSpecError(f"duration must be > 0, got {self.duration}")
        if not self.agents:
            raise InvalidSpecError("scenario needs at least one agent")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration / self.dt))


def generate_scenario(
    spec: ScenarioSpec, seed: int | None = None
) -> tuple[FrameStream, list[GroundTruthTrack]]:
    """Simulate the scenario; returns (noisy detections, noiseless ground truth)."""
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    frames: dict[int, list[Detection]] = {}
    gt_tracks: list[GroundTruthTrack] = []

    for agent in spec.agents:
        n = spec.n_frames if agent.n_frames is None else agent.n_frames
        gt_points: list[GtPoint] = []
        for k in range(n):
            frame_id = agent.start_frame + k
            t = k * spec.dt
            x, y, tangent = agent.path.state_at(t)
            yaw = tangent if agent.yaw is None else agent.yaw
            gt_points.append(
                GtPoint(
                    frame_id=frame_id,
                    cls=agent.cls,
                    pose=BevPose(x=x, y=y, z=agent.z, yaw=yaw),
                    dims=BoxDims(*agent.dims),
                )
            )
            if rng.random() < agent.dropout:
                continue
            nx = x + rng.normal(0.0, agent.pos_std)
            ny = y + rng.normal(0.0, agent.pos_std)
            nyaw = wrap_angle(yaw + rng.normal(0.0, agent.yaw_std))
            ndims = tuple(
                max(0.05, d + rng.normal(0.0, agent.dims_std)) for d in agent.dims
            )
            score = float(np.clip(agent.score_mean + rng.normal(0.0, agent.score_std), 0.0, 1.0))
            det = Detection(
                frame_id=frame_id,
                t=frame_id * spec.dt,
                cls=agent.cls,
                score=score,
                pose=BevPose(x=nx, y=ny, z=agent.z, yaw=nyaw),
                dims=BoxDims(*ndims),
            )
            frames.setdefault(frame_id, []).append(det)
        gt_tracks.append(GroundTruthTrack(gt_id=agent.agent_id, points=gt_points))

    return FrameStream(dt=spec.dt, frames=frames), gt_tracks


# ---------------------------------------------------------------------------
# JSON scenario files (degrees at the boundary, radians inside)
# ---------------------------------------------------------------------------


def _path_from_json(obj: dict) -> PathSpec:
    kind = obj.get("kind")
    if kind == "const_velocity":
        return PathSpec(
            kind=kind,
            start=tuple(obj.get("start", (0.0, 0.0))),
            velocity=tuple(obj.get("velocity", (0.0, 0.0))),
        )
    if kind == "const_turn":
        return PathSpec(
            kind=kind,
            start=tuple(obj.get("start", (0.0, 0.0))),
            speed=float(obj.get("speed", 0.0)),
            heading0=math.radians(float(obj.get("heading0_deg", 0.0))),
            turn_rate=math.radians(float(obj.get("turn_rate_dps", 0.0))),
        )
    if kind == "waypoints":
        return PathSpec(
            kind=kind,
            points=tuple(tuple(p) for p in obj.get("points", ())),
            speed=float(obj.get("speed", 0.0)),
        )
    raise InvalidSpecError(f"unknown path kind {kind!r}")


def scenario_from_json(obj: dict) -> ScenarioSpec:
    try:
        agents = []
        for a in obj.get("agents", []):
            yaw_deg = a.get("yaw_deg", "tangent")
            agents.append(
                AgentSpec(
                    agent_id=str(a["id"]),
                    cls=a["cls"],
                    dims=tuple(a["dims"]),
                    path=_path_from_json(a["path"]),
                    yaw=None if yaw_deg == "tangent" else math.radians(float(yaw_deg)),
                    pos_std=float(a.get("pos_std", 0.0)),
                    yaw_std=math.radians(float(a.get("yaw_std_deg", 0.0))),
                    dims_std=float(a.get("dims_std", 0.0)),
                    dropout=float(a.get("dropout", 0.0)),
                    score_mean=float(a.get("score_mean", 0.9)),
                    score_std=float(a.get("score_std", 0.0)),
                    z=float(a.get("z", 0.0)),
                    start_frame=int(a.get("start_frame", 0)),
                    n_frames=a.get("n_frames"),
                )
            )
        return ScenarioSpec(
            dt=float(obj.get("dt", 0.1)),
            duration=float(obj.get("duration", 10.0)),
            seed=int(obj.get("seed", 0)),
            agents=agents,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidSpecError(f"bad scenario spec: {exc}") from exc


def load_scenario(path: str | Path) -> ScenarioSpec:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return scenario_from_json(obj)
