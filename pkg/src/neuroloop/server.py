"""WebSocket bridge and HTTP endpoints for dashboards.

Dashboards connect to ``/ws/dashboard``: every ``adaptation.config``
envelope is forwarded to them as a JSON text frame, and frames they send
of the form ``{"type": "behavior", "payload": {...}}`` are republished on
``behavior.events``. ``GET /api/state`` exposes the adaptation engine's
session snapshot and ``GET /api/metrics`` the broker counters.
"""
from __future__ import annotations

import asyncio
import json
import logging
import threading
import time
from typing import Callable

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .errors import SchemaError
from .gateway import (
    Broker,
    CLOSE_OVERFLOW,
    TOPIC_BEHAVIOR,
    TOPIC_CONFIG,
)

logger = logging.getLogger(__name__)

# Application close code sent when a dashboard reads too slowly and its
# subscriber buffer overflows.
WS_CLOSE_SLOW_CONSUMER = 4008


def build_app(
    broker: Broker,
    state_provider: Callable[[], dict] | None = None,
    ws_buffer: int = 256,
) -> FastAPI:
    from fastapi.middleware.cors import CORSMiddleware

    app = FastAPI(title="neuroloop gateway")
    # Dashboards are statically hosted on a different origin.
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["GET"])

    @app.get("/api/metrics")
    def metrics() -> dict:
        return broker.metrics()

    @app.get("/api/state")
    def state() -> dict:
        if state_provider is None:
            return {
                "active": False,
                "layout": None,
                "strategy": None,
                "question_id": None,
                "difficulty": None,
            }
        return state_provider()

    @app.websocket("/ws/dashboard")
    async def dashboard(ws: WebSocket) -> None:
        await ws.accept()
        sub = broker.subscribe(TOPIC_CONFIG, buffer_size=ws_buffer)
        loop = asyncio.get_running_loop()
        closed = False

        async def pump_configs() -> None:
            nonlocal closed
            while True:
                envelope = await loop.run_in_executor(None, sub.get, 0.2)
                if envelope is None:
                    if sub.close_reason == CLOSE_OVERFLOW:
                        closed = True
                        await ws.close(code=WS_CLOSE_SLOW_CONSUMER)
                        return
                    if sub.closed:
                        return
                    continue
                await ws.send_text(json.dumps(envelope.to_json()))

        pump = asyncio.create_task(pump_configs())
        try:
            while True:
                try:
                    raw = await ws.receive_text()
                except WebSocketDisconnect:
                    return
                try:
                    frame = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps({"type": "error", "error": "invalid JSON"}))
                    continue
                if not isinstance(frame, dict) or frame.get("type") != "behavior":
                    await ws.send_text(
                        json.dumps({"type": "error", "error": "expected {type: 'behavior', payload}"})
                    )
                    continue
                payload = frame.get("payload")
                try:
                    broker.publish(
                        TOPIC_BEHAVIOR,
                        payload,
                        session_id=(payload or {}).get("session_id", ""),
                    )
                except SchemaError as exc:
                    logger.warning("rejected behavior frame: %s", exc)
                    await ws.send_text(json.dumps({"type": "error", "error": str(exc)}))
                except Exception as exc:  # broker closed mid-session
                    await ws.send_text(json.dumps({"type": "error", "error": str(exc)}))
        finally:
            pump.cancel()
            sub.close()
            if not closed:
                try:
                    await ws.close()
                except RuntimeError:
                    pass

    return app


class GatewayServer:
    """uvicorn wrapper running the bridge app on a daemon thread."""

    def __init__(
        self,
        broker: Broker,
        port: int,
        host: str = "127.0.0.1",
        state_provider: Callable[[], dict] | None = None,
    ):
        import uvicorn

        self.app = build_app(broker, state_provider)
        self._config = uvicorn.Config(
            self.app, host=host, port=port, log_level="warning", lifespan="off"
        )
        self._server = uvicorn.Server(self._config)
        self._thread: threading.Thread | None = None
        self.host = host
        self.port = port

    def start(self, ready_timeout: float = 10.0) -> "GatewayServer":
        self._thread = threading.Thread(target=self._server.run, name="gateway-ws", daemon=True)
        self._thread.start()
        deadline = time.monotonic() + ready_timeout
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError(f"gateway server failed to start on port {self.port}")
            time.sleep(0.02)
        return self

    def stop(self, timeout: float = 5.0) -> None:
        self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=timeout)


def ws_serve(
    broker: Broker,
    port: int,
    host: str = "127.0.0.1",
    state_provider: Callable[[], dict] | None = None,
) -> GatewayServer:
    """Start the WebSocket/HTTP bridge; returns a handle with ``stop()``."""
    return GatewayServer(broker, port, host=host, state_provider=state_provider).start()
