"""JSON-over-HTTP interface for the QA dashboard.

Serves rounds, queues, full case evidence, hotspot and round summaries, and
accepts decision submissions. Metric values are never recomputed here: every
response is assembled from the persisted pipeline artifacts, so reviewers
see exactly what the miner saw.
"""
from __future__ import annotations

import math
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import (
    ReadOnlyStoreError,
    ReferentialIntegrityError,
    ReviewValidationError,
)
from .miner import HotspotGrid
from .qa.store import QaStore, validate_decision


class ApiError(Exception):
    """Carried through to a JSON error body: status + code + message."""

    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


class DecisionBody(BaseModel):
    decision: str
    failure_tag: str | None = None
    corrections: list | None = None
    notes: str = ""
    reviewer: str = ""


def create_app(store: QaStore, assets_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="trajaudit QA service", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"status": exc.status, "code": exc.code, "message": exc.message},
        )

    @app.get("/api/rounds")
    def list_rounds():
        return store.rounds()

    @app.get("/api/rounds/{round_id}/queue")
    def round_queue(round_id: str):
        if not store.has_round(round_id):
            raise ApiError(404, "round_not_found", f"unknown round {round_id!r}")
        items = []
        for item in store.queue(round_id):
            meta = item.metadata()
            meta["status"] = store.event_status(item.event_id)
            items.append(meta)
        items.sort(key=lambda m: m["event"]["first_frame"])
        return items

    @app.get("/api/rounds/{round_id}/summary")
    def round_summary(round_id: str):
        if not store.has_round(round_id):
            raise ApiError(404, "round_not_found", f"unknown round {round_id!r}")
        return store.round_summary(round_id)

    @app.get("/api/cases/{event_id}")
    def case(event_id: str):
        item = store.case(event_id)
        if item is None:
            raise ApiError(404, "event_not_found", f"unknown event {event_id!r}")
        body = item.to_dict()
        body["status"] = store.event_status(event_id)
        return body

    @app.post("/api/cases/{event_id}/decision")
    def decide(event_id: str, body: DecisionBody):
        if store.case(event_id) is None:
            raise ApiError(404, "event_not_found", f"unknown event {event_id!r}")
        try:
            validate_decision(body.decision, body.failure_tag)
        except ReviewValidationError as exc:
            code = (
                "missing_failure_tag"
                if body.decision == "reject" and body.failure_tag is None
                else "invalid_decision"
            )
            raise ApiError(422, code, str(exc)) from exc
        try:
            record_id = store.submit_review(
                event_id=event_id,
                decision=body.decision,
                failure_tag=body.failure_tag,
                corrections=body.corrections,
                notes=body.notes,
                reviewer=body.reviewer,
            )
        except ReadOnlyStoreError as exc:
            raise ApiError(409, "store_read_only", str(exc)) from exc
        except ReferentialIntegrityError as exc:
            raise ApiError(404, "event_not_found", str(exc)) from exc
        return {"record_id": record_id, "status": store.event_status(event_id)}

    @app.get("/api/hotspot")
    def hotspot_endpoint(cell_size: float = 1.0, include_rejected: bool = False):
        if not (math.isfinite(cell_size) and cell_size > 0):
            raise ApiError(422, "invalid_cell_size", "cell_size must be > 0")
        grid = HotspotGrid(cell_size=cell_size)
        for ev in store.hotspot_events(include_rejected=include_rejected):
            grid.add(ev["location_x"], ev["location_y"])
        return {
            "cell_size": cell_size,
            "n": grid.n,
            "cells": [
                {"cell_x": cx, "cell_y": cy, "count": c} for cx, cy, c in grid.to_rows()
            ],
        }

    if assets_dir is not None:
        app.mount("/", StaticFiles(directory=str(assets_dir), html=True), name="assets")

    return app
