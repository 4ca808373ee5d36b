"""In-process topic broker with per-topic ordering and bounded fan-out.

Replaces an external message broker at desk scale while keeping the same
topic semantics: publishers and subscribers never know about each other,
every subscriber sees one topic's messages in a single gap-free sequence,
and a slow consumer is disconnected rather than allowed to stall the loop.
A WebSocket bridge for dashboards lives in :mod:`neuroloop.server`.
"""
from __future__ import annotations

import queue
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping

from .errors import ReplayRangeError, SchemaError, UnknownTopicError

TOPIC_EPOCH = "biosignals.eeg.epoch"
TOPIC_FEATURES = "features.bandpower"
TOPIC_MWL = "mwl.estimate"
TOPIC_BEHAVIOR = "behavior.events"
TOPIC_STRATEGY = "strategy.request"
TOPIC_CONFIG = "adaptation.config"

TOPICS: tuple[str, ...] = (
    TOPIC_EPOCH,
    TOPIC_FEATURES,
    TOPIC_MWL,
    TOPIC_BEHAVIOR,
    TOPIC_STRATEGY,
    TOPIC_CONFIG,
)

_LAYOUTS = ("graph", "timeline", "distribution")
_ACTIONS = (
    "no_adaptation",
    "partial_color",
    "partial_shape",
    "partial_size",
    "partial_proximity",
    "partial_thickness",
    "full_adaptation",
)
_BAND_NAMES = ("delta", "theta", "alpha", "beta")
_MWL_CATEGORIES = ("low", "optimal", "high")
_BAND_LEVELS = ("low", "medium", "high")
_BEHAVIOR_EVENTS = ("layout_switch", "question_shown", "answer_submitted")


@dataclass(frozen=True)
class Envelope:
    topic: str
    seq: int
    timestamp_ms: int
    session_id: str
    payload: Mapping

    def to_json(self) -> dict:
        return {
            "topic": self.topic,
            "seq": self.seq,
            "timestamp_ms": self.timestamp_ms,
            "session_id": self.session_id,
            "payload": self.payload,
        }


# ---------------------------------------------------------------------------
# Payload validation. Hand-rolled: these run per message on the hot path.
# Errors name the offending field path.
# ---------------------------------------------------------------------------

def _require(payload: Mapping, f: str, types, path: str = "payload"):
    if f not in payload:
        raise SchemaError(f"{path}.{f}: required field missing")
    value = payload[f]
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise SchemaError(f"{path}.{f}: expected {types}, got bool")
    if not isinstance(value, types):
        raise SchemaError(f"{path}.{f}: expected {types}, got {type(value).__name__}")
    return value


def _require_enum(payload: Mapping, f: str, allowed, path: str = "payload"):
    value = _require(payload, f, str, path)
    if value not in allowed:
        raise SchemaError(f"{path}.{f}: {value!r} not in {list(allowed)}")
    return value


def _validate_epoch(payload: Mapping) -> None:
    _require(payload, "session_id", str)
    idx = _require(payload, "epoch_index", int)
    if idx < 0:
        raise SchemaError("payload.epoch_index: must be >= 0")
    _require(payload, "t_start_ms", (int, float))
    fs = _require(payload, "sample_rate_hz", int)
    if fs <= 0:
        raise SchemaError("payload.sample_rate_hz: must be > 0")
    samples = _require(payload, "samples", dict)
    expected = fs * 2
    for ch in ("Fz", "C3", "P3"):
        if ch not in samples:
            raise SchemaError(f"payload.samples.{ch}: required channel missing")
        if len(samples[ch]) != expected:
            raise SchemaError(
                f"payload.samples.{ch}: expected {expected} samples, got {len(samples[ch])}"
            )


def _validate_features(payload: Mapping) -> None:
    _require(payload, "session_id", str)
    _require(payload, "epoch_index", int)
    power = _require(payload, "power", dict)
    for band in _BAND_NAMES:
        if band not in power:
            raise SchemaError(f"payload.power.{band}: required band missing")
        value = power[band]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"payload.power.{band}: expected number")
        if value < 0:
            raise SchemaError(f"payload.power.{band}: must be >= 0, got {value}")


def _validate_mwl(payload: Mapping) -> None:
    _require(payload, "session_id", str)
    _require(payload, "epoch_index", int)
    bands = _require(payload, "bands", dict)
    for band in _BAND_NAMES:
        if band not in bands:
            raise SchemaError(f"payload.bands.{band}: required band missing")
        if bands[band] not in _BAND_LEVELS:
            raise SchemaError(f"payload.bands.{band}: {bands[band]!r} not in {list(_BAND_LEVELS)}")
    index = _require(payload, "index", (int, float))
    if not (0 <= index <= 2):
        raise SchemaError(f"payload.index: must be within [0, 2], got {index}")
    _require_enum(payload, "category", _MWL_CATEGORIES)


def _validate_behavior(payload: Mapping) -> None:
    event = _require_enum(payload, "event", _BEHAVIOR_EVENTS)
    if event == "layout_switch":
        _require_enum(payload, "layout", _LAYOUTS)
    elif event == "question_shown":
        _require(payload, "question_id", str)
        _require_enum(payload, "difficulty", ("low", "high"))
    elif event == "answer_submitted":
        _require(payload, "question_id", str)
        _require(payload, "correct", bool)
        rt = _require(payload, "reaction_time_ms", (int, float))
        if rt <= 0:
            raise SchemaError(f"payload.reaction_time_ms: must be > 0, got {rt}")


def _validate_strategy(payload: Mapping) -> None:
    _require(payload, "session_id", str)
    _require(payload, "epoch_index", int)
    _require_enum(payload, "layout", _LAYOUTS)
    _require_enum(payload, "action", _ACTIONS)


def _validate_config(payload: Mapping) -> None:
    _require(payload, "config_id", str)
    _require(payload, "session_id", str)
    _require_enum(payload, "layout", _LAYOUTS)
    strategy = _require(payload, "strategy", dict)
    _require_enum(strategy, "kind", ("none", "partial", "full"), path="payload.strategy")
    if strategy["kind"] == "partial":
        _require_enum(
            strategy,
            "attribute",
            ("color", "shape", "size", "proximity", "thickness"),
            path="payload.strategy",
        )
    operations = _require(payload, "operations", list)
    for i, op in enumerate(operations):
        if not isinstance(op, dict):
            raise SchemaError(f"payload.operations[{i}]: expected object")
        for f in ("target", "property"):
            _require(op, f, str, path=f"payload.operations[{i}]")
        if "value" not in op:
            raise SchemaError(f"payload.operations[{i}].value: required field missing")
    _require(payload, "issued_at_ms", (int, float))


_VALIDATORS: dict[str, Callable[[Mapping], None]] = {
    TOPIC_EPOCH: _validate_epoch,
    TOPIC_FEATURES: _validate_features,
    TOPIC_MWL: _validate_mwl,
    TOPIC_BEHAVIOR: _validate_behavior,
    TOPIC_STRATEGY: _validate_strategy,
    TOPIC_CONFIG: _validate_config,
}


def validate_payload(topic: str, payload: Mapping) -> None:
    if topic not in _VALIDATORS:
        raise UnknownTopicError(f"unknown topic {topic!r}")
    if not isinstance(payload, Mapping):
        raise SchemaError(f"payload: expected object, got {type(payload).__name__}")
    _VALIDATORS[topic](payload)


# ---------------------------------------------------------------------------
# Broker
# ---------------------------------------------------------------------------

CLOSE_UNSUBSCRIBED = "unsubscribed"
CLOSE_OVERFLOW = "overflow"
CLOSE_BROKER = "broker_closed"


class Subscription:
    """One consumer's ordered view of a topic.

    Consumed by exactly one task: iterate, or call :meth:`get`. When the
    broker disconnects a slow consumer the subscription closes with reason
    ``overflow``; already-buffered messages remain readable.
    """

    def __init__(self, topic: str, buffer_size: int):
        self.topic = topic
        self._queue: queue.Queue = queue.Queue(maxsize=buffer_size)
        self._close_reason: str | None = None
        self._detach: Callable[[], None] | None = None

    @property
    def closed(self) -> bool:
        return self._close_reason is not None

    @property
    def close_reason(self) -> str | None:
        return self._close_reason

    def _offer(self, envelope: Envelope) -> bool:
        try:
            self._queue.put_nowait(envelope)
            return True
        except queue.Full:
            return False

    def _mark_closed(self, reason: str) -> None:
        if self._close_reason is None:
            self._close_reason = reason

    def get(self, timeout: float | None = None) -> Envelope | None:
        """Next envelope, or None when closed and drained (or on timeout)."""
        while True:
            try:
                if timeout == 0:
                    return self._queue.get_nowait()
                return self._queue.get(timeout=0.05 if timeout is None else min(timeout, 0.05))
            except queue.Empty:
                if self._close_reason is not None:
                    return None
                if timeout is None:
                    continue
                timeout -= 0.05
                if timeout <= 0:
                    return None

    def __iter__(self) -> Iterator[Envelope]:
        while True:
            envelope = self.get()
            if envelope is None:
                if self._close_reason is not None:
                    return
                continue
            yield envelope

    def close(self) -> None:
        if self._detach is not None:
            self._detach()
        self._mark_closed(CLOSE_UNSUBSCRIBED)


class _TopicState:
    __slots__ = ("lock", "next_seq", "ring", "subscribers", "published")

    def __init__(self, retention: int):
        self.lock = threading.Lock()
        self.next_seq = 1
        self.ring: deque[Envelope] = deque(maxlen=retention)
        self.subscribers: list[Subscription] = []
        self.published = 0


class LatencyTracker:
    """End-to-end loop latency: epoch publish -> adaptation-config publish.

    Correlates the two topics on (session_id, epoch_index).
    """

    def __init__(self, max_samples: int = 100_000):
        self._lock = threading.Lock()
        self._starts: dict[tuple[str, int], float] = {}
        self._samples: deque[float] = deque(maxlen=max_samples)

    def on_publish(self, topic: str, session_id: str, payload: Mapping, now: float) -> None:
        epoch_index = payload.get("epoch_index")
        if epoch_index is None:
            return
        key = (session_id, epoch_index)
        with self._lock:
            if topic == TOPIC_EPOCH:
                self._starts[key] = now
                if len(self._starts) > 100_000:
                    self._starts.clear()
            elif topic == TOPIC_CONFIG:
                start = self._starts.pop(key, None)
                if start is not None:
                    self._samples.append((now - start) * 1000.0)

    def snapshot(self) -> dict:
        with self._lock:
            samples = sorted(self._samples)
        if not samples:
            return {"count": 0, "p50_ms": None, "p99_ms": None, "max_ms": None}
        def pct(p: float) -> float:
            return samples[min(int(p * len(samples)), len(samples) - 1)]
        return {
            "count": len(samples),
            "p50_ms": pct(0.50),
            "p99_ms": pct(0.99),
            "max_ms": samples[-1],
        }


class Broker:
    """Topic-based pub/sub with ring retention and non-blocking fan-out.

    publish() is safe from any thread. Delivery to one subscriber never
    blocks on another: a full subscriber buffer disconnects that subscriber.
    """

    def __init__(
        self,
        retention: int = 1024,
        default_buffer: int = 1024,
        validate: bool = True,
    ):
        self._topics = {name: _TopicState(retention) for name in TOPICS}
        self._default_buffer = default_buffer
        self._validate = validate
        self._closed = False
        self.latency = LatencyTracker()

    def publish(self, topic: str, payload: Mapping, session_id: str = "") -> int:
        """Assign the next seq and deliver to every current subscriber."""
        state = self._topics.get(topic)
        if state is None:
            raise UnknownTopicError(f"unknown topic {topic!r}")
        if self._closed:
            raise UnknownTopicError("broker is closed")
        if self._validate:
            validate_payload(topic, payload)
        now = time.monotonic()
        envelope = None
        overflowed: list[Subscription] = []
        with state.lock:
            envelope = Envelope(
                topic=topic,
                seq=state.next_seq,
                timestamp_ms=int(time.time() * 1000),
                session_id=session_id,
                payload=payload,
            )
            state.next_seq += 1
            state.published += 1
            state.ring.append(envelope)
            for sub in state.subscribers:
                if not sub._offer(envelope):
                    overflowed.append(sub)
            for sub in overflowed:
                state.subscribers.remove(sub)
        for sub in overflowed:
            sub._mark_closed(CLOSE_OVERFLOW)
        self.latency.on_publish(topic, session_id, payload, now)
        return envelope.seq

    def subscribe(
        self, topic: str, from_seq: int | None = None, buffer_size: int | None = None
    ) -> Subscription:
        """Attach a new subscriber; optionally replay the retained backlog.

        With from_seq, retained envelopes >= from_seq are buffered before
        going live; a from_seq older than retention raises ReplayRangeError.
        """
        state = self._topics.get(topic)
        if state is None:
            raise UnknownTopicError(f"unknown topic {topic!r}")
        sub = Subscription(topic, buffer_size or self._default_buffer)
        with state.lock:
            if from_seq is not None:
                oldest = state.ring[0].seq if state.ring else state.next_seq
                if from_seq < oldest or from_seq > state.next_seq:
                    raise ReplayRangeError(from_seq, oldest, state.next_seq)
                for envelope in state.ring:
                    if envelope.seq >= from_seq:
                        if not sub._offer(envelope):
                            raise ReplayRangeError(from_seq, oldest, state.next_seq)
            state.subscribers.append(sub)

        def detach(state=state, sub=sub):
            with state.lock:
                if sub in state.subscribers:
                    state.subscribers.remove(sub)

        sub._detach = detach
        return sub

    def metrics(self) -> dict:
        """Per-topic counters plus the loop latency histogram snapshot."""
        topics = {}
        for name, state in self._topics.items():
            with state.lock:
                topics[name] = {
                    "published": state.published,
                    "subscribers": len(state.subscribers),
                    "retained": len(state.ring),
                    "next_seq": state.next_seq,
                }
        return {"topics": topics, "latency": self.latency.snapshot()}

    def close(self) -> None:
        self._closed = True
        for state in self._topics.values():
            with state.lock:
                subs = list(state.subscribers)
                state.subscribers.clear()
            for sub in subs:
                sub._mark_closed(CLOSE_BROKER)
