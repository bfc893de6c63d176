import json
import threading

import pytest
from fastapi.testclient import TestClient

from hazcomm.api import create_app
from hazcomm.clock import ManualClock
from hazcomm.gateway import Pipeline, PipelineConfig


@pytest.fixture()
def stack(gazetteer, e2e_records, toy_fake_news_model):
    config = PipelineConfig(k=2, batch_size=32, min_pts=3)
    clock = ManualClock(1000.0)
    pipeline = Pipeline(config, gazetteer, clock=clock,
                        fake_news_model=toy_fake_news_model.model)
    pipeline.process_batch(e2e_records)
    app = create_app(pipeline.hub, pipeline)
    return app, pipeline


class TestHttpSurface:
    def test_subscribe_roundtrip(self, stack):
        app, _ = stack
        with TestClient(app) as client:
            resp = client.post("/subscriptions",
                               json={"user_id": "u1", "topics": [0, 1]})
            assert resp.status_code == 200
            assert resp.json()["topics"] == [0, 1]

    def test_subscribe_unknown_topic_404(self, stack):
        app, _ = stack
        with TestClient(app) as client:
            resp = client.post("/subscriptions",
                               json={"user_id": "u1", "topics": [9]})
            assert resp.status_code == 404

    def test_unsubscribe_and_unknown_user(self, stack):
        app, _ = stack
        with TestClient(app) as client:
            client.post("/subscriptions", json={"user_id": "u1", "topics": [0]})
            assert client.delete("/subscriptions/u1/0").status_code == 200
            assert client.delete("/subscriptions/ghost/0").status_code == 404

    def test_topics_lists_top_words(self, stack):
        app, pipeline = stack
        with TestClient(app) as client:
            body = client.get("/topics").json()
        assert len(body["topics"]) == 2
        for entry in body["topics"]:
            assert len(entry["words"]) == 10
            assert all(0.0 <= w["weight"] <= 1.0 for w in entry["words"])
        words0 = {w["word"] for w in body["topics"][0]["words"]}
        words1 = {w["word"] for w in body["topics"][1]["words"]}
        assert {"rain", "flood"} <= words0 | words1
        assert {"storm", "wind"} <= words0 | words1

    def test_communities_endpoint_with_bbox(self, stack):
        app, _ = stack
        with TestClient(app) as client:
            rows = client.get("/communities", params={"topic": 0}).json()
            assert len(rows) == 2  # london + paris for that topic
            rows_l = client.get(
                "/communities", params={"topic": 0, "bbox": "50,-2,53,1"}
            ).json()
            assert len(rows_l) == 1
            assert client.get("/communities", params={"topic": 9}).status_code == 404

    def test_health_report(self, stack):
        app, _ = stack
        with TestClient(app) as client:
            body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["batches"] == 1
        assert body["quarantined_batches"] == 0


class TestEventStream:
    def test_sse_delivers_pin_events(self, stack):
        # the in-process test client buffers streaming bodies, so the
        # push channel is exercised against a real server
        import time

        import httpx
        import uvicorn

        app, pipeline = stack
        server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=0,
                                               log_level="warning"))
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        deadline = time.monotonic() + 10.0
        while not server.started and time.monotonic() < deadline:
            time.sleep(0.01)
        assert server.started
        port = server.servers[0].sockets[0].getsockname()[1]
        base = f"http://127.0.0.1:{port}"

        try:
            httpx.post(f"{base}/subscriptions",
                       json={"user_id": "u9", "topics": [0]}).raise_for_status()
            with httpx.stream("GET", f"{base}/events",
                              params={"user_id": "u9"}, timeout=10.0) as resp:
                assert resp.status_code == 200
                assert resp.headers["content-type"].startswith("text/event-stream")

                def push():
                    time.sleep(0.2)
                    comms = pipeline.hub.communities(0)
                    pipeline.hub.update_communities(0, comms)

                threading.Thread(target=push, daemon=True).start()
                events = []
                for line in resp.iter_lines():
                    if line.startswith("data: "):
                        events.append(json.loads(line[len("data: "):]))
                        if len(events) >= 2:
                            break
        finally:
            server.should_exit = True
            thread.join(timeout=10.0)

        assert len(events) == 2
        assert all(e["type"] == "pin_upsert" for e in events)
        assert all(e["subscribed"] is True for e in events)
        assert {"pin_id", "topic", "lat", "lon", "member_count"} <= set(events[0])
