import json

import pytest
from fastapi.testclient import TestClient

from neuroloop.adaptation import AdaptationCatalogue, ConfigIdAllocator, resolve
from neuroloop.gateway import Broker, TOPIC_BEHAVIOR, TOPIC_CONFIG
from neuroloop.rl import Action, Layout
from neuroloop.server import build_app


@pytest.fixture
def broker():
    b = Broker()
    yield b
    b.close()


@pytest.fixture
def client(broker):
    app = build_app(broker, state_provider=lambda: {"active": True, "layout": "graph"})
    with TestClient(app) as c:
        yield c


def publish_config(broker, action=Action.PARTIAL_COLOR, epoch_index=0):
    catalogue = AdaptationCatalogue.load()
    config = resolve(
        Layout.GRAPH,
        action,
        catalogue,
        session_id="s",
        allocator=ConfigIdAllocator("s"),
        epoch_index=epoch_index,
    )
    broker.publish(TOPIC_CONFIG, config.to_payload(), session_id="s")


class TestHttp:
    def test_metrics_endpoint(self, client, broker):
        broker.publish(TOPIC_BEHAVIOR, {"event": "layout_switch", "layout": "graph"})
        doc = client.get("/api/metrics").json()
        assert doc["topics"][TOPIC_BEHAVIOR]["published"] == 1

    def test_state_endpoint(self, client):
        doc = client.get("/api/state").json()
        assert doc == {"active": True, "layout": "graph"}


class TestWebSocket:
    def test_forwards_adaptation_configs(self, client, broker):
        with client.websocket_connect("/ws/dashboard") as ws:
            publish_config(broker)
            doc = json.loads(ws.receive_text())
            assert doc["topic"] == TOPIC_CONFIG
            assert doc["seq"] == 1
            assert doc["payload"]["strategy"] == {"kind": "partial", "attribute": "color"}

    def test_behavior_frame_republished(self, client, broker):
        sub = broker.subscribe(TOPIC_BEHAVIOR)
        with client.websocket_connect("/ws/dashboard") as ws:
            ws.send_text(
                json.dumps(
                    {"type": "behavior", "payload": {"event": "layout_switch", "layout": "timeline"}}
                )
            )
            env = sub.get(timeout=2)
        assert env is not None
        assert env.payload["layout"] == "timeline"

    def test_malformed_frame_gets_error_connection_kept(self, client, broker):
        sub = broker.subscribe(TOPIC_BEHAVIOR)
        with client.websocket_connect("/ws/dashboard") as ws:
            ws.send_text("{not json")
            err = json.loads(ws.receive_text())
            assert err["type"] == "error"
            ws.send_text(json.dumps({"type": "something_else"}))
            err = json.loads(ws.receive_text())
            assert err["type"] == "error"
            # schema-invalid behavior payload
            ws.send_text(json.dumps({"type": "behavior", "payload": {"event": "nope"}}))
            err = json.loads(ws.receive_text())
            assert "payload.event" in err["error"]
            # still alive afterwards
            ws.send_text(
                json.dumps(
                    {"type": "behavior", "payload": {"event": "layout_switch", "layout": "graph"}}
                )
            )
            env = sub.get(timeout=2)
            assert env is not None and env.payload["layout"] == "graph"
