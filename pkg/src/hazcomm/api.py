"""HTTP surface: subscriptions, topics, communities, health, SSE push.

A thin FastAPI adapter over the hub; all state lives in Hub/Pipeline so
the API can be exercised in-process (tests) or served with uvicorn.
"""

from __future__ import annotations

import asyncio
import json
import queue
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .gateway import Hub, Pipeline, UnknownTopic, UnknownUser, community_report
from .topics import top_words

__all__ = ["create_app"]


class SubscriptionRequest(BaseModel):
    user_id: str
    topics: list[int]
    bbox: Optional[list[list[float]]] = None  # [[south, west], [north, east]]


def _parse_bbox(raw: Optional[list[list[float]]]):
    if raw is None:
        return None
    if len(raw) != 2 or any(len(c) != 2 for c in raw):
        raise HTTPException(422, "bbox must be [[south,west],[north,east]]")
    return ((raw[0][0], raw[0][1]), (raw[1][0], raw[1][1]))


def create_app(hub: Hub, pipeline: Pipeline | None = None,
               supervisor=None) -> FastAPI:
    app = FastAPI(title="hazcomm gateway")

    @app.post("/subscriptions")
    def subscribe(req: SubscriptionRequest):
        try:
            sub = hub.subscribe(req.user_id, req.topics, _parse_bbox(req.bbox))
        except UnknownTopic as e:
            raise HTTPException(404, str(e))
        return {
            "user_id": sub.user_id,
            "topics": sorted(sub.topics),
            "bbox": sub.bbox,
            "created_at": sub.created_at,
        }

    @app.delete("/subscriptions/{user_id}/{topic}")
    def unsubscribe(user_id: str, topic: int):
        try:
            hub.unsubscribe(user_id, topic)
        except UnknownUser as e:
            raise HTTPException(404, f"unknown user: {e}")
        except UnknownTopic as e:
            raise HTTPException(404, str(e))
        return {"removed": topic}

    @app.get("/topics")
    def topics():
        if pipeline is None or pipeline.model is None:
            return {"topics": []}
        words = top_words(pipeline.model, 10)
        return {
            "topics": [
                {"topic": j, "words": [{"word": w, "weight": p} for w, p in ws]}
                for j, ws in enumerate(words)
            ]
        }

    @app.get("/communities")
    def communities(topic: int = Query(...),
                    bbox: Optional[str] = Query(default=None)):
        if not (0 <= topic < hub.k):
            raise HTTPException(404, f"topic {topic} outside [0, {hub.k})")
        comms = hub.communities(topic)
        if bbox is not None:
            try:
                s, w, n, e = (float(x) for x in bbox.split(","))
            except ValueError:
                raise HTTPException(422, "bbox must be south,west,north,east")
            comms = [c for c in comms
                     if s <= c.centroid.lat <= n and w <= c.centroid.lon <= e]
        return json.loads(community_report(comms))

    @app.get("/health")
    def health():
        report = {
            "status": "ok",
            "pins": len(hub.pins()),
            "dropped_listeners": hub.dropped_listeners,
        }
        if pipeline is not None:
            report.update({
                "batches": pipeline.batches,
                "quarantined_batches": pipeline.quarantined_batches,
                "model_generation": pipeline.model_generation,
            })
        if supervisor is not None:
            report["source"] = supervisor.health_report()
        return report

    @app.get("/events")
    async def events(request: Request, user_id: str = Query(...)):
        q = hub.attach_listener(user_id)

        async def stream():
            try:
                while True:
                    if await request.is_disconnected():
                        return
                    try:
                        event = await asyncio.to_thread(q.get, True, 0.5)
                    except queue.Empty:
                        yield ": keep-alive\n\n"
                        continue
                    yield f"event: {event['type']}\ndata: {json.dumps(event, sort_keys=True)}\n\n"
            finally:
                hub.detach_listener(user_id)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
