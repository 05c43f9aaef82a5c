"""HTTP surface over a single runtime: goal submission, run snapshots,
human feedback and branch choices, incremental and streaming events, the
registry catalogue and the decision model.

All mutating handlers funnel through one lock; the event log itself is the
only shared sink and is already append-only under a total order.
"""

from __future__ import annotations

import json
import threading
import time
from typing import Any, Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, Field

from .config import PatternConfig
from .decisions import decide_patterns
from .errors import (AgoraError, NotAwaiting, NotAChild, UnknownNode,
                     UnknownRequirement, UnknownRun)
from .runtime import AgentRuntime, assemble


class GoalRequest(BaseModel):
    goal_text: str
    seed: int = 0


class FeedbackRequest(BaseModel):
    verdict: str
    critiques: list[list[str]] = Field(default_factory=list)
    suggested_steps: Optional[list[str]] = None


class ChoiceRequest(BaseModel):
    node_id: str
    option_id: str


class DecideRequest(BaseModel):
    requirements: list[str]


def make_app(config: PatternConfig,
             state_dir: Optional[str] = None) -> FastAPI:
    runtime = assemble(config)
    if state_dir:
        from pathlib import Path
        Path(state_dir).mkdir(parents=True, exist_ok=True)
        runtime.load_state(state_dir)
    return build_app(runtime)


def build_app(runtime: AgentRuntime) -> FastAPI:
    app = FastAPI(title="agora")
    lock = threading.Lock()
    app.state.runtime = runtime

    def _view_or_404(run_id: str) -> dict:
        try:
            return runtime.run_view(run_id)
        except UnknownRun:
            raise HTTPException(404, f"unknown run: {run_id}")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "patterns": runtime.active_patterns()}

    @app.post("/goals")
    def submit_goal(body: GoalRequest) -> dict:
        with lock:
            result = runtime.run(body.goal_text, body.seed)
        return {"run_id": result.run_id, "status": result.status}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> dict:
        return _view_or_404(run_id)

    @app.post("/runs/{run_id}/feedback")
    def post_feedback(run_id: str, body: FeedbackRequest) -> dict:
        critiques = [(pair[0], pair[1]) for pair in body.critiques]
        with lock:
            try:
                result = runtime.post_feedback(run_id, body.verdict,
                                               critiques,
                                               body.suggested_steps)
            except UnknownRun as exc:
                raise HTTPException(404, str(exc))
            except NotAwaiting as exc:
                raise HTTPException(409, str(exc))
            except ValueError as exc:
                raise HTTPException(422, str(exc))
        return {"run_id": run_id, "status": result.status}

    @app.post("/runs/{run_id}/choice")
    def post_choice(run_id: str, body: ChoiceRequest) -> dict:
        with lock:
            try:
                result = runtime.post_choice(run_id, body.node_id,
                                             body.option_id)
            except UnknownRun as exc:
                raise HTTPException(404, str(exc))
            except NotAwaiting as exc:
                raise HTTPException(409, str(exc))
            except (UnknownNode, NotAChild) as exc:
                raise HTTPException(422, str(exc))
        return {"run_id": run_id, "status": result.status}

    @app.get("/runs/{run_id}/events")
    def get_events(run_id: str,
                   from_seq: int = Query(0, alias="from")) -> dict:
        _view_or_404(run_id)
        records = [r.to_dict() for r in runtime.event_log.since(from_seq)
                   if r.payload.get("run_id") == run_id]
        return {"run_id": run_id, "events": records,
                "head_seq": len(runtime.event_log)}

    @app.get("/runs/{run_id}/stream")
    def stream_events(run_id: str,
                      from_seq: int = Query(0, alias="from"),
                      ) -> StreamingResponse:
        _view_or_404(run_id)

        def ndjson():
            cursor = from_seq
            idle = 0
            while True:
                fresh = [r for r in runtime.event_log.since(cursor)
                         if r.payload.get("run_id") == run_id]
                for record in fresh:
                    cursor = record.seq
                    yield json.dumps(record.to_dict(),
                                     ensure_ascii=False) + "\n"
                view = runtime.run_view(run_id)
                if view["status"] in ("complete", "failed", "aborted") \
                        and not fresh:
                    break
                if not fresh:
                    idle += 1
                    if idle > 100:  # liveness bound for awaiting runs
                        break
                    time.sleep(0.05)
                else:
                    idle = 0

        return StreamingResponse(ndjson(), media_type="application/x-ndjson")

    @app.get("/registry")
    def get_registry() -> dict:
        return {"entries": [{
            "entry_id": e.entry_id,
            "kind": e.kind,
            "capabilities": sorted(e.capabilities),
            "price_per_call": str(e.price_per_call),
            "context_window": e.context_window,
            "descriptor_ref": e.descriptor_ref,
        } for e in runtime.registry.entries()]}

    @app.post("/decide")
    def decide(body: DecideRequest) -> dict:
        try:
            config, report = decide_patterns(set(body.requirements))
        except UnknownRequirement as exc:
            raise HTTPException(422, str(exc))
        return {"config": config.to_dict(), "report": report}

    @app.exception_handler(AgoraError)
    def agora_error(_request, exc: AgoraError):
        from fastapi.responses import JSONResponse
        return JSONResponse(status_code=400, content={
            "error": type(exc).__name__, "detail": str(exc)})

    return app
