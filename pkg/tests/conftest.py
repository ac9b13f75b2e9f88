import itertools
import math

import numpy as np
import pytest

from trajaudit.geometry import BevPose, BoxDims
from trajaudit.records import Track, TrackPoint
from trajaudit.scenario import AgentSpec, PathSpec, ScenarioSpec, generate_scenario
from trajaudit.tracker import TrackerConfig, track as run_tracker

DEFAULT_DIMS = BoxDims(4.0, 2.0, 1.6)


def make_track(
    positions,
    yaws=None,
    frames=None,
    cls="car",
    dims=DEFAULT_DIMS,
    scores=None,
    track_id=1,
    z=0.0,
):
    """Build a Track from raw arrays; defaults fill in the boring fields."""
    n = len(positions)
    if yaws is None:
        yaws = [0.0] * n
    if frames is None:
        frames = list(range(n))
    if scores is None:
        scores = [0.9] * n
    points = [
        TrackPoint(
            frame_id=frames[i],
            pose=BevPose(x=positions[i][0], y=positions[i][1], z=z, yaw=yaws[i]),
            dims=dims,
            score=scores[i],
        )
        for i in range(n)
    ]
    return Track(track_id=track_id, cls=cls, points=points)


def cv_track(start, velocity, n_frames, dt=0.1, yaw=None, **kwargs):
    """Constant-velocity track; yaw defaults to the motion direction."""
    if yaw is None:
        yaw = math.atan2(velocity[1], velocity[0]) if any(velocity) else 0.0
    positions = [
        (start[0] + velocity[0] * k * dt, start[1] + velocity[1] * k * dt)
        for k in range(n_frames)
    ]
    return make_track(positions, yaws=[yaw] * n_frames, **kwargs)


def brute_force_assignment(cost: np.ndarray):
    """Exhaustive max-cardinality min-cost one-to-one matching.

    cost carries +inf for inadmissible pairs. Returns (matches, total_cost).
    Only usable for small instances.
    """
    n, m = cost.shape
    best = ([], 0.0)
    best_card = -1
    rows = list(range(n))
    for k in range(min(n, m), -1, -1):
        if k < best_card:
            break
        for row_subset in itertools.combinations(rows, k):
            for col_perm in itertools.permutations(range(m), k):
                pairs = list(zip(row_subset, col_perm))
                if any(not np.isfinite(cost[i, j]) for i, j in pairs):
                    continue
                total = sum(cost[i, j] for i, j in pairs)
                if k > best_card or (k == best_card and total < best[1] - 1e-12):
                    best = (pairs, total)
                    best_card = k
        if best_card == k and k > 0:
            break
    return best if best_card > 0 else ([], 0.0)


def brute_force_median(values, lo=None, hi=None, steps=20001):
    """Grid minimizer of the summed absolute deviation (independent oracle)."""
    values = np.asarray(values, dtype=np.float64)
    lo = values.min() if lo is None else lo
    hi = values.max() if hi is None else hi
    if lo == hi:
        return float(lo)
    grid = np.linspace(lo, hi, steps)
    losses = np.abs(values[None, :] - grid[:, None]).sum(axis=1)
    return float(grid[np.argmin(losses)])


# ---------------------------------------------------------------------------
# The fixed-seed jitter suite used by the directional regression criteria.
# ---------------------------------------------------------------------------

JITTER_SEED = 123
JITTER_YAW_STD_DEG = 8.0
JITTER_POS_STD = 0.05


def build_jitter_scenario() -> ScenarioSpec:
    lanes = [0.0, 25.0, 50.0, 75.0]
    speeds = [2.5, 4.0, 5.5, 7.0]
    agents = [
        AgentSpec(
            agent_id=f"car{i}",
            cls="car",
            dims=(4.2, 1.9, 1.5),
            path=PathSpec("const_velocity", start=(0.0, lane), velocity=(speed, 0.0)),
            pos_std=JITTER_POS_STD,
            yaw_std=math.radians(JITTER_YAW_STD_DEG),
            score_mean=0.9,
            score_std=0.03,
        )
        for i, (lane, speed) in enumerate(zip(lanes, speeds))
    ]
    return ScenarioSpec(dt=0.1, duration=40.0, seed=JITTER_SEED, agents=agents)


@pytest.fixture(scope="session")
def jitter_suite():
    """Fixed-seed noisy scenario, tracked; the Table-1-style regression input."""
    spec = build_jitter_scenario()
    stream, gt = generate_scenario(spec)
    tracks = run_tracker(stream, TrackerConfig(dt=spec.dt))
    assert len(tracks) == len(spec.agents)
    return {"spec": spec, "stream": stream, "gt": gt, "tracks": tracks}
