"""End-to-end loop wiring: configuration, session runs, logging, replay.

``run_loop`` owns every module's lifecycle: it starts the broker, the
WebSocket bridge, the DSP/estimator/agent/engine stages and the epoch
producer, drives the question script, logs every envelope to a session
file, and shuts the stack down in order (ingestion first, gateway last).
"""
from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import yaml

from . import dsp, mwl, rl
from .adaptation import AdaptationCatalogue, EngineService
from .errors import ConfigurationError
from .gateway import (
    Broker,
    TOPIC_BEHAVIOR,
    TOPIC_CONFIG,
    TOPIC_EPOCH,
    TOPICS,
    Envelope,
)
from .ingestion import (
    EPOCH_SECONDS,
    SyntheticSpec,
    generate_epoch,
    publish_epochs,
    replay_stream,
    synthetic_stream,
)
from .simulate import SimulatedUser, generate_dataset

logger = logging.getLogger(__name__)

DEFAULT_SYNTH_AMPLITUDES = {
    "Fz": {"delta": 8.0, "theta": 6.0},
    "C3": {"beta": 4.0},
    "P3": {"alpha": 10.0},
}


@dataclass(frozen=True)
class QuestionItem:
    question_id: str
    difficulty: rl.Difficulty


@dataclass
class SessionConfig:
    session_id: str = ""
    layout: rl.Layout = rl.Layout.GRAPH
    script: list[QuestionItem] = field(default_factory=list)
    epochs_per_question: int = 5
    pacing_s: float = 0.0
    source_kind: str = "synthetic"
    source_spec: SyntheticSpec = field(default_factory=lambda: SyntheticSpec(
        amplitudes=DEFAULT_SYNTH_AMPLITUDES, noise_uv=2.0, seed=7
    ))
    source_file: Path | None = None
    calibration_path: Path = Path("calibration.json")
    model_paths: dict[rl.Layout, Path] = field(default_factory=dict)
    catalogue_path: Path | None = None
    sessions_dir: Path = Path("sessions")
    ws_enabled: bool = False
    ws_port: int = 8765
    retention: int = 1024
    buffer_size: int = 4096
    weights: mwl.MwlWeights = field(default_factory=mwl.MwlWeights)

    def __post_init__(self):
        if not self.session_id:
            self.session_id = f"session-{uuid.uuid4().hex[:8]}"
        if not self.script:
            self.script = [
                QuestionItem(f"q{i + 1}", rl.Difficulty.HIGH if i % 2 else rl.Difficulty.LOW)
                for i in range(4)
            ]
        if self.epochs_per_question <= 0:
            raise ConfigurationError("epochs_per_question must be > 0")
        if not self.model_paths:
            self.model_paths = {
                layout: Path(f"model_{layout.value}.json") for layout in rl.Layout
            }

    @property
    def total_epochs(self) -> int:
        return len(self.script) * self.epochs_per_question

    def validate_paths(self) -> None:
        """Referenced files must exist before the loop starts."""
        missing = []
        if not self.calibration_path.exists():
            raise mwl.CalibrationMissingError(self.calibration_path)
        for layout, path in self.model_paths.items():
            if not path.exists():
                missing.append(f"{layout.value}: {path}")
        if missing:
            raise ConfigurationError("missing model files: " + ", ".join(missing))
        if self.catalogue_path is not None and not self.catalogue_path.exists():
            raise ConfigurationError(f"catalogue file not found: {self.catalogue_path}")
        if self.source_kind == "file":
            if self.source_file is None or not self.source_file.exists():
                raise ConfigurationError(f"replay file not found: {self.source_file}")


def load_session_config(path: str | Path | None, **overrides) -> SessionConfig:
    """Build a SessionConfig from a YAML/JSON file plus keyword overrides."""
    raw: dict = {}
    if path is not None:
        doc = yaml.safe_load(Path(path).read_text())
        if not isinstance(doc, dict):
            raise ConfigurationError(f"{path}: expected a mapping")
        raw = doc
    base = Path(path).parent if path is not None else Path(".")

    def _path(value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    kwargs: dict = {}
    if "session_id" in raw:
        kwargs["session_id"] = str(raw["session_id"])
    if "layout" in raw:
        kwargs["layout"] = rl.Layout(raw["layout"])
    if "script" in raw:
        kwargs["script"] = [
            QuestionItem(str(q["question_id"]), rl.Difficulty(q["difficulty"]))
            for q in raw["script"]
        ]
    if "epochs_per_question" in raw:
        kwargs["epochs_per_question"] = int(raw["epochs_per_question"])
    if "pacing_s" in raw:
        kwargs["pacing_s"] = float(raw["pacing_s"])
    if raw.get("realtime"):
        kwargs["pacing_s"] = float(EPOCH_SECONDS)
    source = raw.get("source", {})
    if source:
        kwargs["source_kind"] = source.get("kind", "synthetic")
        if kwargs["source_kind"] == "synthetic" and "spec" in source:
            spec = source["spec"]
            kwargs["source_spec"] = SyntheticSpec(
                amplitudes=spec.get("amplitudes", DEFAULT_SYNTH_AMPLITUDES),
                noise_uv=float(spec.get("noise_uv", 2.0)),
                seed=int(spec.get("seed", 7)),
                sample_rate_hz=int(spec.get("sample_rate_hz", 256)),
                session_id=kwargs.get("session_id", "synthetic"),
            )
        if kwargs["source_kind"] == "file":
            kwargs["source_file"] = _path(source["file"])
    paths = raw.get("paths", {})
    if "calibration" in paths:
        kwargs["calibration_path"] = _path(paths["calibration"])
    if "models" in paths:
        kwargs["model_paths"] = {
            rl.Layout(name): _path(p) for name, p in paths["models"].items()
        }
    if paths.get("catalogue"):
        kwargs["catalogue_path"] = _path(paths["catalogue"])
    if "sessions_dir" in paths:
        kwargs["sessions_dir"] = _path(paths["sessions_dir"])
    gateway = raw.get("gateway", {})
    if "ws_enabled" in gateway:
        kwargs["ws_enabled"] = bool(gateway["ws_enabled"])
    if "port" in gateway:
        kwargs["ws_port"] = int(gateway["port"])
    if "retention" in gateway:
        kwargs["retention"] = int(gateway["retention"])
    if "buffer" in gateway:
        kwargs["buffer_size"] = int(gateway["buffer"])
    mwl_cfg = raw.get("mwl", {})
    if "weights" in mwl_cfg:
        kwargs["weights"] = mwl.MwlWeights(weights={
            name: float(w) for name, w in mwl_cfg["weights"].items()
        })
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return SessionConfig(**kwargs)


def bootstrap_assets(cfg: SessionConfig, n_records: int = 2000, seed: int = 11) -> list[str]:
    """Generate any missing calibration/model files with the built-in simulator.

    Calibration comes from features of the configured synthetic source (or a
    default noisy spec); models are trained on simulator datasets under a
    uniform behavior policy with the frozen-uniform oracle mode.
    """
    created: list[str] = []
    if not cfg.calibration_path.exists():
        spec = cfg.source_spec if cfg.source_kind == "synthetic" else SyntheticSpec(
            amplitudes=DEFAULT_SYNTH_AMPLITUDES, noise_uv=2.0, seed=seed
        )
        samples: dict[str, list[float]] = {name: [] for name in dsp.BAND_NAMES}
        for i in range(120):
            features = dsp.extract_features(generate_epoch(spec, i))
            for name in dsp.BAND_NAMES:
                samples[name].append(features.power[name])
        cfg.calibration_path.parent.mkdir(parents=True, exist_ok=True)
        mwl.calibrate(samples).save(cfg.calibration_path)
        created.append(str(cfg.calibration_path))
    user = SimulatedUser(seed=seed)
    train_cfg = rl.TrainingConfig(target_mode="frozen_uniform")
    for layout, path in cfg.model_paths.items():
        if path.exists():
            continue
        records = generate_dataset(
            user, "uniform", n_records, layout, seed=seed + list(rl.Layout).index(layout)
        )
        table = rl.train(records, layout, train_cfg)
        path.parent.mkdir(parents=True, exist_ok=True)
        table.save(path)
        created.append(str(path))
    return created


class SessionLogger:
    """Appends every envelope on every topic to one JSONL session file."""

    def __init__(self, broker: Broker, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(path, "w")
        self._lock = threading.Lock()
        self._subs = [broker.subscribe(topic, buffer_size=8192) for topic in TOPICS]
        self._threads = [
            threading.Thread(target=self._pump, args=(sub,), daemon=True, name=f"log-{sub.topic}")
            for sub in self._subs
        ]
        self.path = path

    def start(self) -> "SessionLogger":
        for t in self._threads:
            t.start()
        return self

    def _pump(self, sub) -> None:
        for envelope in sub:
            line = json.dumps(envelope.to_json())
            with self._lock:
                self._fh.write(line + "\n")

    def stop(self) -> None:
        for sub in self._subs:
            sub.close()
        for t in self._threads:
            t.join(timeout=5)
        with self._lock:
            self._fh.flush()
            self._fh.close()


class ScriptDriver:
    """Publishes question_shown events as epochs advance through the script."""

    def __init__(self, broker: Broker, cfg: SessionConfig):
        self._broker = broker
        self._cfg = cfg
        self._sub = broker.subscribe(TOPIC_EPOCH)
        self._thread = threading.Thread(target=self._run, daemon=True, name="script-driver")
        self._published = 1  # question 0 goes out before the producer starts

    def publish_question(self, index: int) -> None:
        item = self._cfg.script[index]
        self._broker.publish(
            TOPIC_BEHAVIOR,
            {
                "event": "question_shown",
                "question_id": item.question_id,
                "difficulty": item.difficulty.value,
                "session_id": self._cfg.session_id,
            },
            session_id=self._cfg.session_id,
        )

    def start(self) -> "ScriptDriver":
        self._thread.start()
        return self

    def _run(self) -> None:
        seen = 0
        for _ in self._sub:
            seen += 1
            next_q = seen // self._cfg.epochs_per_question
            if next_q >= self._published and next_q < len(self._cfg.script):
                self.publish_question(next_q)
                self._published = next_q + 1

    def stop(self) -> None:
        self._sub.close()
        self._thread.join(timeout=5)


def _epoch_source(cfg: SessionConfig) -> Iterable:
    if cfg.source_kind == "synthetic":
        spec = cfg.source_spec
        if spec.session_id != cfg.session_id:
            from dataclasses import replace

            spec = replace(spec, session_id=cfg.session_id)
        return synthetic_stream(spec, n_epochs=cfg.total_epochs)
    if cfg.source_kind == "file":
        return replay_stream(cfg.source_file, session_id=cfg.session_id)
    raise ConfigurationError(f"unknown source kind {cfg.source_kind!r}")


def _paced(source: Iterable, pacing_s: float) -> Iterable:
    if pacing_s <= 0:
        yield from source
        return
    last = 0.0
    for item in source:
        now = time.monotonic()
        wait = pacing_s - (now - last)
        if last > 0 and wait > 0:
            time.sleep(wait)
        last = time.monotonic()
        yield item


def run_loop(cfg: SessionConfig, stop_event: threading.Event | None = None) -> dict:
    """Run one full closed-loop session; returns a summary report.

    Startup failures abort with an error attributed to the failing module.
    The loop ends when the question script is exhausted (all epochs
    produced and drained through to adaptation configs) or when
    ``stop_event`` is set.
    """
    cfg.validate_paths()
    thresholds = mwl.QuantileThresholds.load(cfg.calibration_path)
    tables = {layout: rl.QTable.load(path) for layout, path in cfg.model_paths.items()}
    for layout, table in tables.items():
        if table.layout is not layout:
            raise ConfigurationError(
                f"model for {layout.value} was trained for {table.layout.value}"
            )
    catalogue = AdaptationCatalogue.load(cfg.catalogue_path)

    broker = Broker(retention=cfg.retention, default_buffer=cfg.buffer_size)
    session_path = cfg.sessions_dir / f"{cfg.session_id}.jsonl"
    session_logger = SessionLogger(broker, session_path).start()

    engine = EngineService(broker, catalogue, cfg.session_id)
    agent = rl.AgentService(
        broker,
        tables,
        initial_layout=cfg.layout,
        initial_difficulty=cfg.script[0].difficulty,
    )
    estimator = mwl.EstimatorStage(broker, thresholds, cfg.weights)
    features = dsp.FeatureStage(broker)
    driver = ScriptDriver(broker, cfg)

    threads = [
        threading.Thread(target=engine.run, daemon=True, name="engine"),
        threading.Thread(target=agent.run, daemon=True, name="agent"),
        threading.Thread(target=estimator.run, daemon=True, name="estimator"),
        threading.Thread(target=features.run, daemon=True, name="features"),
    ]
    for t in threads:
        t.start()
    driver.start()

    ws_server = None
    if cfg.ws_enabled:
        from .server import ws_serve

        ws_server = ws_serve(broker, cfg.ws_port, state_provider=engine.current_state)

    # Announce the session context before the first epoch can race past it.
    broker.publish(
        TOPIC_BEHAVIOR,
        {"event": "layout_switch", "layout": cfg.layout.value, "session_id": cfg.session_id},
        session_id=cfg.session_id,
    )
    driver.publish_question(0)

    producer_error: list[Exception] = []

    def produce() -> None:
        try:
            source = _paced(_epoch_source(cfg), cfg.pacing_s)
            publish_epochs(source, broker)
        except Exception as exc:  # surfaced in the report and the log
            producer_error.append(exc)
            logger.error("epoch producer failed: %s", exc)

    producer = threading.Thread(target=produce, daemon=True, name="producer")
    producer.start()

    # Wait for the script to finish: every produced epoch drained through to
    # an adaptation config, or an external stop request.
    expected = cfg.total_epochs if cfg.source_kind == "synthetic" else None
    drain_deadline = None
    try:
        while True:
            if stop_event is not None and stop_event.is_set():
                break
            metrics = broker.metrics()
            configs = metrics["topics"][TOPIC_CONFIG]["published"]
            if not producer.is_alive():
                if producer_error:
                    raise producer_error[0]
                produced = metrics["topics"][TOPIC_EPOCH]["published"]
                target = expected if expected is not None else produced
                if configs >= target:
                    break
                if drain_deadline is None:
                    drain_deadline = time.monotonic() + 30.0
                elif time.monotonic() > drain_deadline:
                    logger.warning(
                        "drain timeout: %d/%d adaptation configs published", configs, target
                    )
                    break
            time.sleep(0.02)
    finally:
        # Ordered shutdown: ingestion first, gateway last.
        driver.stop()
        features.stop()
        estimator.stop()
        agent.stop()
        engine.stop()
        for t in threads:
            t.join(timeout=5)
        session_logger.stop()
        final_metrics = broker.metrics()
        if ws_server is not None:
            ws_server.stop()
        broker.close()

    return {
        "session_id": cfg.session_id,
        "session_file": str(session_path),
        "epochs": final_metrics["topics"][TOPIC_EPOCH]["published"],
        "adaptations": final_metrics["topics"][TOPIC_CONFIG]["published"],
        "metrics": final_metrics,
    }


def read_session(path: str | Path) -> list[Envelope]:
    envelopes = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            envelopes.append(
                Envelope(
                    topic=doc["topic"],
                    seq=doc["seq"],
                    timestamp_ms=doc["timestamp_ms"],
                    session_id=doc.get("session_id", ""),
                    payload=doc["payload"],
                )
            )
    return envelopes


def replay_session(
    path: str | Path,
    broker: Broker | None = None,
    realtime: bool = True,
    ws_port: int | None = None,
) -> dict:
    """Re-publish a recorded session's envelopes with their original pacing."""
    envelopes = sorted(read_session(path), key=lambda e: e.timestamp_ms)
    own_broker = broker is None
    broker = broker if broker is not None else Broker()
    ws_server = None
    if ws_port is not None:
        from .server import ws_serve

        ws_server = ws_serve(broker, ws_port)
    published = 0
    try:
        previous_ts = None
        for envelope in envelopes:
            if realtime and previous_ts is not None:
                delta = (envelope.timestamp_ms - previous_ts) / 1000.0
                if delta > 0:
                    time.sleep(min(delta, EPOCH_SECONDS * 2))
            previous_ts = envelope.timestamp_ms
            broker.publish(envelope.topic, envelope.payload, session_id=envelope.session_id)
            published += 1
    finally:
        if ws_server is not None:
            ws_server.stop()
        if own_broker:
            broker.close()
    return {"published": published, "topics": len({e.topic for e in envelopes})}
