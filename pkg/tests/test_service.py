import pytest
from fastapi.testclient import TestClient

from trajaudit.geometry import BoxDims
from trajaudit.miner import ScreeningConfig, mine_events
from trajaudit.qa.store import QaStore
from trajaudit.service import create_app

from conftest import cv_track


@pytest.fixture()
def deployed(tmp_path):
    truck = cv_track((0, 0), (1.4, 0.0), 120, cls="truck",
                     dims=BoxDims(4.5, 2.2, 2.8), track_id=1)
    bike = cv_track((6, 5), (1.25, -2.0), 120, cls="bicycle",
                    dims=BoxDims(1.8, 0.6, 1.6), track_id=2)
    events = mine_events([(truck, bike)], ScreeningConfig())
    store = QaStore(tmp_path / "store")
    store.export_queue(events, [truck, bike], round_id="000",
                       stamp="2026-01-01T00:00:00+00:00")
    client = TestClient(create_app(store))
    return client, store, events


class TestReads:
    def test_rounds_listing(self, deployed):
        client, _, events = deployed
        body = client.get("/api/rounds").json()
        assert body[0]["round_id"] == "000"
        assert body[0]["case_count"] == len(events)

    def test_queue_metadata_only(self, deployed):
        client, _, events = deployed
        body = client.get("/api/rounds/000/queue").json()
        assert len(body) == len(events)
        assert body[0]["status"] == "pending"
        assert "series" not in body[0]["event"]
        assert "windows" not in body[0]

    def test_case_full_evidence(self, deployed):
        client, _, events = deployed
        body = client.get(f"/api/cases/{events[0].event_id}").json()
        assert len(body["windows"]) == 2
        assert body["event"]["series"]

    def test_evidence_parity_with_pipeline(self, deployed):
        # the served series must equal the mined artifact, value for value
        client, _, events = deployed
        body = client.get(f"/api/cases/{events[0].event_id}").json()
        assert body["event"]["series"] == events[0].to_record()["series"]
        assert body["event"]["min_ttc"] == events[0].min_ttc

    def test_unknown_event_404(self, deployed):
        client, _, _ = deployed
        resp = client.get("/api/cases/ffffffffffff")
        assert resp.status_code == 404
        body = resp.json()
        assert body["code"] == "event_not_found"
        assert body["status"] == 404 and body["message"]

    def test_unknown_round_404(self, deployed):
        client, _, _ = deployed
        assert client.get("/api/rounds/404/queue").status_code == 404
        assert client.get("/api/rounds/404/summary").status_code == 404

    def test_hotspot(self, deployed):
        client, _, events = deployed
        body = client.get("/api/hotspot").json()
        assert body["n"] == len(events)
        assert sum(c["count"] for c in body["cells"]) == body["n"]


class TestDecisions:
    def test_post_keep_read_your_write(self, deployed):
        client, _, events = deployed
        resp = client.post(
            f"/api/cases/{events[0].event_id}/decision",
            json={"decision": "keep", "failure_tag": "true_near_miss"},
        )
        assert resp.status_code == 200
        assert resp.json()["status"] == "kept"
        summary = client.get("/api/rounds/000/summary").json()
        assert summary["decisions"]["keep"] == 1

    def test_reject_without_tag_422(self, deployed):
        client, _, events = deployed
        resp = client.post(
            f"/api/cases/{events[0].event_id}/decision", json={"decision": "reject"}
        )
        assert resp.status_code == 422
        assert resp.json()["code"] == "missing_failure_tag"

    def test_invalid_decision_422(self, deployed):
        client, _, events = deployed
        resp = client.post(
            f"/api/cases/{events[0].event_id}/decision", json={"decision": "maybe"}
        )
        assert resp.status_code == 422

    def test_post_unknown_event_404(self, deployed):
        client, _, _ = deployed
        resp = client.post(
            "/api/cases/ffffffffffff/decision",
            json={"decision": "keep", "failure_tag": "true_near_miss"},
        )
        assert resp.status_code == 404

    def test_read_only_store_409(self, deployed, tmp_path):
        _, store, events = deployed
        ro_client = TestClient(create_app(QaStore(store.path, read_only=True)))
        resp = ro_client.post(
            f"/api/cases/{events[0].event_id}/decision",
            json={"decision": "keep", "failure_tag": "true_near_miss"},
        )
        assert resp.status_code == 409
        assert resp.json()["code"] == "store_read_only"

    def test_rejected_drops_out_of_hotspot(self, deployed):
        client, _, events = deployed
        client.post(
            f"/api/cases/{events[0].event_id}/decision",
            json={"decision": "reject", "failure_tag": "cross_lane_false_conflict"},
        )
        assert client.get("/api/hotspot").json()["n"] == 0
        assert client.get("/api/hotspot?include_rejected=true").json()["n"] == 1
