import math

import numpy as np
import pytest

from trajaudit.geometry import wrap_angle
from trajaudit.refinement import (
    REASON_REGISTRATION,
    REASON_YAW_STEP,
    RefinementConfig,
    prediction_residuals,
    refine,
    refine_b0,
    refine_b1,
    refine_b2,
    score_suspicion,
)

from conftest import cv_track, make_track

CFG = RefinementConfig()


class TestScoreSuspicion:
    def test_clean_cv_track_unflagged(self):
        tr = cv_track((0, 0), (2.0, 0.0), 30)
        report = score_suspicion(tr, None, CFG)
        assert report.flagged_segments == []
        assert not report.flagged.any()

    def test_yaw_jump_flagged(self):
        yaws = [0.0] * 10 + [math.pi / 2] * 10  # 90 degree jump at index 10
        tr = cv_track((0, 0), (2.0, 0.0), 20, yaw=None)
        tr = make_track(tr.positions(), yaws=yaws)
        report = score_suspicion(tr, None, CFG)
        # independent diff oracle for the indicator value
        assert report.yaw_step_deg[10] == pytest.approx(90.0)
        assert report.flagged[10]
        seg = report.flagged_segments[0]
        assert REASON_YAW_STEP in seg.reasons
        assert seg.start_frame == 10 and seg.end_frame == 10

    def test_injected_residual_flagged(self):
        tr = cv_track((0, 0), (2.0, 0.0), 20)
        residuals = np.zeros(20)
        residuals[7] = 3 * 1.5  # 3x the gate
        report = score_suspicion(tr, residuals, CFG)
        assert report.flagged[7]
        assert REASON_REGISTRATION in report.flagged_segments[0].reasons

    def test_short_track_empty_report(self):
        tr = make_track([(0.0, 0.0)])
        report = score_suspicion(tr, None, CFG)
        assert report.flagged_segments == []
        assert len(report.composite) == 0

    def test_composite_is_mean_of_normalized_indicators(self):
        # one frame with yaw step 7.5deg (norm 0.5), residual 0.75 (norm 0.5),
        # score drop 0.25 (norm 0.5) -> composite exactly 0.5 (not flagged at > 0.5)
        tr = make_track(
            [(0.0, 0.0), (1.0, 0.0)],
            yaws=[0.0, math.radians(7.5)],
            scores=[0.9, 0.65],
        )
        report = score_suspicion(tr, np.array([0.0, 0.75]), CFG)
        assert report.composite[1] == pytest.approx(0.5)
        assert not report.flagged[1]

    def test_adjacent_flagged_frames_merge(self):
        yaws = [0.0, 0.0, 1.0, 2.0, 2.0, 2.0]  # two consecutive huge steps
        tr = make_track([(0.1 * k, 0.0) for k in range(6)], yaws=yaws)
        report = score_suspicion(tr, None, CFG)
        assert len(report.flagged_segments) == 1
        assert report.flagged_segments[0].start_frame == 2
        assert report.flagged_segments[0].end_frame == 3

    def test_prediction_residual_zero_on_cv(self):
        tr = cv_track((0, 0), (3.0, -1.0), 15)
        assert np.abs(prediction_residuals(tr)).max() < 1e-12


class TestRefineB0:
    def test_identity(self):
        tr = cv_track((0, 0), (2.0, 0.5), 10)
        out = refine_b0(tr)
        assert out.branch == "B0"
        assert out.corrections == []
        assert out.track is tr


class TestRefineB1:
    def test_no_flags_is_noop(self):
        tr = cv_track((0, 0), (2.0, 0.0), 25)
        report = score_suspicion(tr, None, CFG)
        out = refine_b1(tr, report, CFG)
        assert out.track.points == tr.points
        assert out.corrections == []

    def test_yaw_cap_clips_proposed_correction(self):
        # flagged frame wants a ~45 degree yaw fix; cap is 10 degrees
        yaws = [0.0] * 10 + [math.radians(45.0)] + [0.0] * 10
        tr = make_track([(0.2 * k, 0.0) for k in range(21)], yaws=yaws)
        report = score_suspicion(tr, None, CFG)
        assert report.flagged[10]
        out = refine_b1(tr, report, CFG)
        corr = next(c for c in out.corrections if c.frame_id == 10 and c.applied)
        assert abs(corr.dyaw) == pytest.approx(CFG.yaw_cap)
        got = out.track.points[10].pose.yaw
        assert got == pytest.approx(math.radians(45.0) - CFG.yaw_cap, abs=1e-9)

    def test_pos_cap_clips(self):
        # yaw glitch flags the frame; position is off by 1.2 m but registration
        # is still acceptable (<= 1.5), so a capped position pull applies
        positions = [(0.2 * k, 0.0) for k in range(21)]
        positions[10] = (2.0, 1.2)
        yaws = [0.0] * 21
        yaws[10] = math.pi / 2
        tr = make_track(positions, yaws=yaws)
        report = score_suspicion(tr, None, CFG)
        assert report.flagged[10]
        out = refine_b1(tr, report, CFG)
        corr = next(c for c in out.corrections if c.frame_id == 10)
        assert corr.applied
        assert math.hypot(*corr.dpos) == pytest.approx(CFG.pos_cap, abs=1e-12)
        assert out.track.points[10].pose.y == pytest.approx(0.7, abs=1e-9)

    def test_registration_gate_blocks_application(self):
        yaws = [0.0] * 10 + [math.radians(45.0)] + [0.0] * 10
        tr = make_track([(0.2 * k, 0.0) for k in range(21)], yaws=yaws)
        residuals = np.zeros(21)
        residuals[10] = 99.0  # hopeless registration
        report = score_suspicion(tr, residuals, CFG)
        out = refine_b1(tr, report, CFG)
        corr = next(c for c in out.corrections if c.frame_id == 10)
        assert corr.applied is False
        assert out.track.points[10].pose == tr.points[10].pose

    def test_unflagged_frames_untouched(self):
        yaws = [0.0] * 10 + [math.radians(45.0)] + [0.0] * 10
        tr = make_track([(0.2 * k, 0.0) for k in range(21)], yaws=yaws)
        report = score_suspicion(tr, None, CFG)
        out = refine_b1(tr, report, CFG)
        for i in range(21):
            if not report.flagged[i]:
                assert out.track.points[i] == tr.points[i]

    def test_cap_invariant_on_corrections_log(self):
        rng = np.random.default_rng(8)
        positions = np.column_stack([np.arange(60) * 0.4, np.zeros(60)])
        positions += rng.normal(scale=0.25, size=positions.shape)
        yaws = rng.normal(scale=math.radians(14), size=60)
        tr = make_track(positions, yaws=list(yaws))
        out = refine_b1(tr, score_suspicion(tr, None, CFG), CFG)
        for c in out.corrections:
            if c.applied:
                assert math.hypot(*c.dpos) <= CFG.pos_cap + 1e-12
                assert abs(c.dyaw) <= CFG.yaw_cap + 1e-12


class TestRefineB2:
    def test_linear_track_unchanged(self):
        tr = cv_track((0, 0), (2.0, 1.0), 30)
        out = refine_b2(tr, CFG)
        for a, b in zip(tr.points, out.track.points):
            assert b.pose.x == pytest.approx(a.pose.x, abs=1e-9)
            assert b.pose.y == pytest.approx(a.pose.y, abs=1e-9)

    def test_spike_attenuated_by_window(self):
        positions = [(0.0, 0.0)] * 31
        positions[15] = (0.0, 1.0)  # +1 m spike
        tr = make_track(positions)
        out = refine_b2(tr, RefinementConfig(window=9))
        assert out.track.points[15].pose.y == pytest.approx(1.0 / 9.0, abs=1e-12)

    def test_short_track_returned_unchanged(self):
        tr = make_track([(0.0, 0.0), (1.0, 0.0)])
        out = refine_b2(tr, CFG)
        assert out.branch == "B2"
        assert out.corrections == []
        assert out.track.points == tr.points

    def test_dims_and_scores_untouched(self):
        rng = np.random.default_rng(4)
        tr = make_track(rng.normal(size=(20, 2)), scores=list(rng.uniform(0.5, 1, 20)))
        out = refine_b2(tr, CFG)
        for a, b in zip(tr.points, out.track.points):
            assert a.dims == b.dims
            assert a.score == b.score

    def test_deltas_recorded(self):
        rng = np.random.default_rng(14)
        tr = make_track(rng.normal(size=(15, 2)))
        out = refine_b2(tr, CFG)
        assert len(out.corrections) == 15
        for c, a, b in zip(out.corrections, tr.points, out.track.points):
            assert b.pose.x == pytest.approx(a.pose.x + c.dpos[0])
            assert abs(wrap_angle(b.pose.yaw - (a.pose.yaw + c.dyaw))) < 1e-12


class TestDispatch:
    def test_refine_dispatch(self):
        tr = cv_track((0, 0), (1.0, 0.0), 12)
        assert refine(tr, "b0").branch == "B0"
        assert refine(tr, "B1").branch == "B1"
        assert refine(tr, "b2").branch == "B2"

    def test_unknown_branch(self):
        tr = cv_track((0, 0), (1.0, 0.0), 5)
        with pytest.raises(Exception):
            refine(tr, "b3")
