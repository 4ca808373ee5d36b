"""Catalogue-driven mapping from agent actions to dashboard operations.

The catalogue is data, not code: a JSON table mapping (layout, strategy) to
an ordered list of absolute property assignments on view selectors. It is
validated eagerly at startup so resolution can never fail at runtime.
"""
from __future__ import annotations

import itertools
import json
import threading
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ConfigurationError
from .rl import Action, Attribute, Layout, StrategyKind

# Value type expected for each visual property.
PROPERTY_TYPES: dict[str, type] = {
    "color": str,
    "shape": str,
    "size": float,
    "proximity": float,
    "thickness": float,
    "emphasis": bool,
}


@dataclass(frozen=True)
class AdaptationStrategy:
    kind: StrategyKind
    attribute: Attribute | None = None

    def __post_init__(self):
        if self.kind is StrategyKind.PARTIAL and self.attribute is None:
            raise ConfigurationError("partial strategy requires an attribute")
        if self.kind is not StrategyKind.PARTIAL and self.attribute is not None:
            raise ConfigurationError(f"{self.kind.value} strategy must not carry an attribute")

    @classmethod
    def from_action(cls, action: Action) -> "AdaptationStrategy":
        return cls(kind=action.strategy_kind, attribute=action.attribute)

    def to_payload(self) -> dict:
        doc = {"kind": self.kind.value}
        if self.attribute is not None:
            doc["attribute"] = self.attribute.value
        return doc


ALL_STRATEGIES: tuple[AdaptationStrategy, ...] = tuple(
    AdaptationStrategy.from_action(a) for a in Action
)


@dataclass(frozen=True)
class AdaptationOperation:
    target: str
    property: str
    value: object

    def to_payload(self) -> dict:
        return {"target": self.target, "property": self.property, "value": self.value}


@dataclass(frozen=True)
class AdaptationConfig:
    """The wire payload that mutates the dashboard."""

    config_id: str
    session_id: str
    layout: Layout
    strategy: AdaptationStrategy
    operations: tuple[AdaptationOperation, ...]
    issued_at_ms: int
    epoch_index: int | None = None

    def to_payload(self) -> dict:
        doc = {
            "config_id": self.config_id,
            "session_id": self.session_id,
            "layout": self.layout.value,
            "strategy": self.strategy.to_payload(),
            "operations": [op.to_payload() for op in self.operations],
            "issued_at_ms": self.issued_at_ms,
        }
        if self.epoch_index is not None:
            doc["epoch_index"] = self.epoch_index
        return doc


class AdaptationCatalogue:
    """All 21 (layout x strategy) entries, immutable once validated."""

    def __init__(self, entries: Mapping[tuple[Layout, AdaptationStrategy], Sequence[AdaptationOperation]]):
        self._entries = {key: tuple(ops) for key, ops in entries.items()}

    def operations(self, layout: Layout, strategy: AdaptationStrategy) -> tuple[AdaptationOperation, ...]:
        try:
            return self._entries[(layout, strategy)]
        except KeyError:
            raise ConfigurationError(
                f"catalogue has no entry for ({layout.value}, {strategy.to_payload()})"
            ) from None

    def items(self):
        return self._entries.items()

    def __len__(self) -> int:
        return len(self._entries)

    @classmethod
    def from_documents(cls, docs: Sequence[Mapping]) -> "AdaptationCatalogue":
        entries: dict[tuple[Layout, AdaptationStrategy], list[AdaptationOperation]] = {}
        for i, doc in enumerate(docs):
            try:
                layout = Layout(doc["layout"])
                kind = StrategyKind(doc["strategy"])
                attribute = Attribute(doc["attribute"]) if "attribute" in doc else None
                strategy = AdaptationStrategy(kind=kind, attribute=attribute)
            except (KeyError, ValueError, ConfigurationError) as exc:
                raise ConfigurationError(f"catalogue entry {i}: {exc}") from None
            key = (layout, strategy)
            if key in entries:
                raise ConfigurationError(
                    f"catalogue entry {i}: duplicate ({layout.value}, {strategy.to_payload()})"
                )
            ops = []
            for j, op in enumerate(doc.get("operations", [])):
                try:
                    ops.append(
                        AdaptationOperation(
                            target=op["target"], property=op["property"], value=op["value"]
                        )
                    )
                except KeyError as exc:
                    raise ConfigurationError(
                        f"catalogue entry {i}, operation {j}: missing {exc}"
                    ) from None
            entries[key] = ops
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "AdaptationCatalogue":
        """Load from a JSON file, or the packaged default catalogue."""
        if path is None:
            text = resources.files("neuroloop").joinpath("data/catalogue.json").read_text()
        else:
            text = Path(path).read_text()
        docs = json.loads(text)
        if not isinstance(docs, list):
            raise ConfigurationError("catalogue file must contain a JSON array")
        return cls.from_documents(docs)


def load_selector_vocabulary() -> dict:
    """Targets and property types each layout's view exposes (shared with the UI)."""
    text = resources.files("neuroloop").joinpath("data/selector_vocabulary.json").read_text()
    return json.loads(text)


def validate_catalogue(
    catalogue: AdaptationCatalogue, vocabulary: Mapping | None = None
) -> list[str]:
    """Check totality, the full-covers-partial rule, and operation validity.

    Returns a list of human-readable violations; empty means valid.
    """
    vocabulary = vocabulary if vocabulary is not None else load_selector_vocabulary()
    violations: list[str] = []

    expected = set(itertools.product(Layout, ALL_STRATEGIES))
    present = {key for key, _ in catalogue.items()}
    for layout, strategy in sorted(expected - present, key=lambda k: (k[0].value, str(k[1]))):
        violations.append(f"missing entry ({layout.value}, {strategy.to_payload()})")
    if len(catalogue) != len(expected):
        violations.append(f"expected {len(expected)} entries, found {len(catalogue)}")

    for (layout, strategy), ops in catalogue.items():
        label = f"({layout.value}, {strategy.to_payload()})"
        if strategy.kind is StrategyKind.NONE and ops:
            violations.append(f"{label}: no-adaptation entry must have no operations")
        vocab = vocabulary.get(layout.value, {})
        targets = set(vocab.get("targets", ()))
        properties = vocab.get("properties", {})
        for op in ops:
            if op.target not in targets:
                violations.append(f"{label}: unknown target {op.target!r}")
            if op.property not in properties:
                violations.append(f"{label}: unknown property {op.property!r}")
                continue
            expected_type = PROPERTY_TYPES[properties[op.property]] if isinstance(
                properties[op.property], str
            ) else properties[op.property]
            value = op.value
            ok = isinstance(value, expected_type) or (
                expected_type is float and isinstance(value, int) and not isinstance(value, bool)
            )
            if expected_type is not bool and isinstance(value, bool):
                ok = False
            if not ok:
                violations.append(
                    f"{label}: {op.property} value {value!r} is not {expected_type.__name__}"
                )

    # Full adaptation must cover every (target, property) any partial touches.
    for layout in Layout:
        full_key = (layout, AdaptationStrategy(kind=StrategyKind.FULL))
        try:
            full_ops = catalogue.operations(*full_key)
        except ConfigurationError:
            continue
        covered = {(op.target, op.property) for op in full_ops}
        for strategy in ALL_STRATEGIES:
            if strategy.kind is not StrategyKind.PARTIAL:
                continue
            try:
                partial_ops = catalogue.operations(layout, strategy)
            except ConfigurationError:
                continue
            for op in partial_ops:
                if (op.target, op.property) not in covered:
                    violations.append(
                        f"({layout.value}, full) does not cover "
                        f"{op.target}/{op.property} from {strategy.to_payload()}"
                    )
    return violations


class ConfigIdAllocator:
    """Monotonic per-session config ids."""

    def __init__(self, session_id: str):
        self._session_id = session_id
        self._counter = itertools.count(1)

    def next_id(self) -> str:
        return f"{self._session_id}-cfg-{next(self._counter):06d}"


def resolve(
    layout: Layout,
    action: Action,
    catalogue: AdaptationCatalogue,
    *,
    session_id: str = "",
    allocator: ConfigIdAllocator | None = None,
    epoch_index: int | None = None,
    now_ms: int | None = None,
) -> AdaptationConfig:
    """Translate an agent action into a concrete dashboard configuration."""
    strategy = AdaptationStrategy.from_action(action)
    operations = catalogue.operations(layout, strategy)
    allocator = allocator if allocator is not None else ConfigIdAllocator(session_id or "session")
    return AdaptationConfig(
        config_id=allocator.next_id(),
        session_id=session_id,
        layout=layout,
        strategy=strategy,
        operations=operations,
        issued_at_ms=now_ms if now_ms is not None else int(time.time() * 1000),
        epoch_index=epoch_index,
    )


class EngineService:
    """Loop stage: strategy requests in, validated dashboard configs out.

    Also tracks the live session context (last applied config, active
    question) served over the HTTP state endpoint.
    """

    def __init__(self, broker, catalogue: AdaptationCatalogue, session_id: str):
        from .gateway import TOPIC_BEHAVIOR, TOPIC_STRATEGY

        violations = validate_catalogue(catalogue)
        if violations:
            raise ConfigurationError(
                "catalogue failed validation: " + "; ".join(violations[:5])
            )
        self._broker = broker
        self._catalogue = catalogue
        self._session_id = session_id
        self._allocator = ConfigIdAllocator(session_id)
        self._lock = threading.Lock()
        self._snapshot: dict = {"active": False}
        self._strategy_sub = broker.subscribe(TOPIC_STRATEGY)
        self._behavior_sub = broker.subscribe(TOPIC_BEHAVIOR)
        self._behavior_thread: threading.Thread | None = None

    def current_state(self) -> dict:
        """Last applied config and active question context."""
        with self._lock:
            if not self._snapshot.get("active"):
                return {
                    "active": False,
                    "layout": None,
                    "strategy": None,
                    "question_id": None,
                    "difficulty": None,
                }
            return dict(self._snapshot)

    def _watch_behavior(self) -> None:
        for envelope in self._behavior_sub:
            payload = envelope.payload
            with self._lock:
                if payload.get("event") == "question_shown":
                    self._snapshot.setdefault("active", True)
                    self._snapshot["active"] = True
                    self._snapshot["question_id"] = payload["question_id"]
                    self._snapshot["difficulty"] = payload["difficulty"]
                elif payload.get("event") == "layout_switch":
                    self._snapshot["active"] = True
                    self._snapshot["layout"] = payload["layout"]

    def run(self) -> int:
        from .gateway import TOPIC_CONFIG

        self._behavior_thread = threading.Thread(
            target=self._watch_behavior, name="engine-behavior", daemon=True
        )
        self._behavior_thread.start()
        emitted = 0
        for envelope in self._strategy_sub:
            payload = envelope.payload
            config = resolve(
                Layout(payload["layout"]),
                Action.from_wire(payload["action"]),
                self._catalogue,
                session_id=self._session_id,
                allocator=self._allocator,
                epoch_index=payload.get("epoch_index"),
            )
            self._broker.publish(TOPIC_CONFIG, config.to_payload(), session_id=self._session_id)
            with self._lock:
                self._snapshot["active"] = True
                self._snapshot["layout"] = config.layout.value
                self._snapshot["strategy"] = config.strategy.to_payload()
                self._snapshot["config_id"] = config.config_id
                self._snapshot.setdefault("question_id", None)
                self._snapshot.setdefault("difficulty", None)
            emitted += 1
        return emitted

    def stop(self) -> None:
        self._strategy_sub.close()
        self._behavior_sub.close()
        if self._behavior_thread is not None:
            self._behavior_thread.join(timeout=2)
