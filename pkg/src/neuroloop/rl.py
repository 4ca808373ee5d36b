"""Per-layout tabular Q-learning on logged single-transition episodes.

Training is offline: every record is one (state, action, outcome) episode,
so there is no bootstrapped next-state term and the update reduces to an
importance-weighted bandit average,

    Q(s, a) <- Q(s, a) + alpha * (w * r - Q(s, a))

with w correcting for the gap between the behavior policy that logged the
data and the target policy being learned. A separate agent is trained and
served per dashboard layout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DataError, TrainingError
from .mwl import MwlCategory

N_STATES = 18
N_ACTIONS = 7


class Layout(str, Enum):
    GRAPH = "graph"
    TIMELINE = "timeline"
    DISTRIBUTION = "distribution"


class Difficulty(str, Enum):
    LOW = "low"
    HIGH = "high"

    @property
    def index(self) -> int:
        return 0 if self is Difficulty.LOW else 1


class StrategyKind(str, Enum):
    NONE = "none"
    PARTIAL = "partial"
    FULL = "full"

    @property
    def index(self) -> int:
        return {"none": 0, "partial": 1, "full": 2}[self.value]


class Attribute(str, Enum):
    COLOR = "color"
    SHAPE = "shape"
    SIZE = "size"
    PROXIMITY = "proximity"
    THICKNESS = "thickness"


class Action(IntEnum):
    """The seven adaptations an agent can request for any layout."""

    NO_ADAPTATION = 0
    PARTIAL_COLOR = 1
    PARTIAL_SHAPE = 2
    PARTIAL_SIZE = 3
    PARTIAL_PROXIMITY = 4
    PARTIAL_THICKNESS = 5
    FULL_ADAPTATION = 6

    @property
    def wire(self) -> str:
        return self.name.lower()

    @classmethod
    def from_wire(cls, name: str) -> "Action":
        try:
            return cls[name.upper()]
        except KeyError:
            raise DataError(f"unknown action {name!r}") from None

    @property
    def strategy_kind(self) -> StrategyKind:
        if self is Action.NO_ADAPTATION:
            return StrategyKind.NONE
        if self is Action.FULL_ADAPTATION:
            return StrategyKind.FULL
        return StrategyKind.PARTIAL

    @property
    def attribute(self) -> Attribute | None:
        if self.strategy_kind is not StrategyKind.PARTIAL:
            return None
        return Attribute(self.name.split("_", 1)[1].lower())


_MWL_INDEX = {MwlCategory.LOW: 0, MwlCategory.OPTIMAL: 1, MwlCategory.HIGH: 2}
_MWL_BY_INDEX = {v: k for k, v in _MWL_INDEX.items()}


@dataclass(frozen=True)
class State:
    """Agent state: workload category x question difficulty x active strategy."""

    mwl: MwlCategory
    difficulty: Difficulty
    strategy: StrategyKind

    @property
    def index(self) -> int:
        return _MWL_INDEX[self.mwl] * 6 + self.difficulty.index * 3 + self.strategy.index

    @classmethod
    def from_index(cls, index: int) -> "State":
        if not 0 <= index < N_STATES:
            raise DataError(f"state index out of range: {index}")
        mwl, rest = divmod(index, 6)
        diff, strat = divmod(rest, 3)
        return cls(
            mwl=_MWL_BY_INDEX[mwl],
            difficulty=Difficulty.LOW if diff == 0 else Difficulty.HIGH,
            strategy=list(StrategyKind)[strat],
        )

    def to_payload(self) -> dict:
        return {
            "mwl": self.mwl.value,
            "difficulty": self.difficulty.value,
            "strategy": self.strategy.value,
        }

    @classmethod
    def from_payload(cls, payload: Mapping) -> "State":
        return cls(
            mwl=MwlCategory(payload["mwl"]),
            difficulty=Difficulty(payload["difficulty"]),
            strategy=StrategyKind(payload["strategy"]),
        )


@dataclass(frozen=True)
class LoggedTransition:
    """One offline training record: a single-transition episode."""

    layout: Layout
    state: State
    action: Action
    post_mwl: MwlCategory
    accuracy: int
    reaction_time_ms: float
    behavior_prob: float

    def __post_init__(self):
        if self.accuracy not in (0, 1):
            raise DataError(f"accuracy must be 0 or 1, got {self.accuracy}")
        if self.reaction_time_ms <= 0:
            raise DataError(f"reaction_time_ms must be > 0, got {self.reaction_time_ms}")
        if not (0 < self.behavior_prob <= 1):
            raise DataError(
                f"behavior_prob must be in (0, 1], got {self.behavior_prob}"
            )

    def to_json(self) -> dict:
        return {
            "layout": self.layout.value,
            "state": self.state.to_payload(),
            "action": self.action.wire,
            "post_mwl": self.post_mwl.value,
            "accuracy": self.accuracy,
            "reaction_time_ms": float(self.reaction_time_ms),
            "behavior_prob": float(self.behavior_prob),
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "LoggedTransition":
        return cls(
            layout=Layout(doc["layout"]),
            state=State.from_payload(doc["state"]),
            action=Action.from_wire(doc["action"]),
            post_mwl=MwlCategory(doc["post_mwl"]),
            accuracy=int(doc["accuracy"]),
            reaction_time_ms=float(doc["reaction_time_ms"]),
            behavior_prob=float(doc["behavior_prob"]),
        )


@dataclass(frozen=True)
class RewardWeights:
    mwl: float = 1.0
    accuracy: float = 0.0
    reaction_time: float = 0.0
    rt_cap_ms: float = 30_000.0


@dataclass(frozen=True)
class TrainingConfig:
    alpha: float = 0.1
    epsilon: float = 0.1
    max_sweeps: int = 500
    tolerance: float = 1e-4
    weight_clip: float = 10.0
    reward_weights: RewardWeights = field(default_factory=RewardWeights)
    # "coupled": the target policy tracks the evolving Q-table (serving default).
    # "frozen_uniform": uniform target held fixed, visit-count step sizes, so the
    # fixed point is exactly the per-cell mean of w*r (oracle mode).
    target_mode: str = "coupled"

    def __post_init__(self):
        if not (0 < self.alpha <= 1):
            raise ConfigurationError(f"alpha must be in (0, 1], got {self.alpha}")
        if not (0 <= self.epsilon <= 1):
            raise ConfigurationError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.max_sweeps <= 0:
            raise ConfigurationError(f"max_sweeps must be > 0, got {self.max_sweeps}")
        if self.tolerance <= 0:
            raise ConfigurationError(f"tolerance must be > 0, got {self.tolerance}")
        if self.weight_clip <= 0:
            raise ConfigurationError(f"weight_clip must be > 0, got {self.weight_clip}")
        if self.target_mode not in ("coupled", "frozen_uniform"):
            raise ConfigurationError(f"unknown target_mode {self.target_mode!r}")


@dataclass
class TrainReport:
    sweeps: int = 0
    converged: bool = False
    final_max_delta: float = float("inf")
    max_abs_q: float = 0.0


@dataclass
class QTable:
    """Dense 18 x 7 action-value table for one layout."""

    layout: Layout
    values: np.ndarray
    visit_counts: np.ndarray
    report: TrainReport | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.visit_counts = np.asarray(self.visit_counts, dtype=np.int64)
        if self.values.shape != (N_STATES, N_ACTIONS):
            raise DataError(f"q table must be {N_STATES}x{N_ACTIONS}, got {self.values.shape}")
        if self.visit_counts.shape != (N_STATES, N_ACTIONS):
            raise DataError(
                f"visit counts must be {N_STATES}x{N_ACTIONS}, got {self.visit_counts.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DataError("q table contains non-finite entries")

    @classmethod
    def zeros(cls, layout: Layout) -> "QTable":
        return cls(
            layout=layout,
            values=np.zeros((N_STATES, N_ACTIONS)),
            visit_counts=np.zeros((N_STATES, N_ACTIONS), dtype=np.int64),
        )

    def save(self, path: str | Path) -> None:
        doc = {
            "layout": self.layout.value,
            "n_states": N_STATES,
            "n_actions": N_ACTIONS,
            "q": [float(v) for v in self.values.ravel()],
            "visit_counts": [int(v) for v in self.visit_counts.ravel()],
        }
        Path(path).write_text(json.dumps(doc) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "QTable":
        doc = json.loads(Path(path).read_text())
        if doc.get("n_states") != N_STATES or doc.get("n_actions") != N_ACTIONS:
            raise DataError(
                f"model shape mismatch: expected {N_STATES}x{N_ACTIONS}, "
                f"got {doc.get('n_states')}x{doc.get('n_actions')}"
            )
        return cls(
            layout=Layout(doc["layout"]),
            values=np.array(doc["q"]).reshape(N_STATES, N_ACTIONS),
            visit_counts=np.array(doc["visit_counts"]).reshape(N_STATES, N_ACTIONS),
        )


def reward(t: LoggedTransition, weights: RewardWeights | None = None) -> float:
    """Scalar outcome: optimal-workload hit, accuracy bonus, reaction-time cost."""
    w = weights if weights is not None else RewardWeights()
    value = w.mwl * (1.0 if t.post_mwl is MwlCategory.OPTIMAL else 0.0)
    value += w.accuracy * t.accuracy
    value -= w.reaction_time * min(t.reaction_time_ms / w.rt_cap_ms, 1.0)
    return value


def target_policy_probs(q_row: np.ndarray, epsilon: float) -> np.ndarray:
    """Epsilon-greedy distribution over actions for one state's Q row.

    The argmax (lowest index on ties) gets 1 - eps + eps/n; everything else
    gets eps/n.
    """
    probs = np.full(N_ACTIONS, epsilon / N_ACTIONS)
    probs[int(np.argmax(q_row))] += 1.0 - epsilon
    return probs


def importance_weight(t: LoggedTransition, q: QTable, cfg: TrainingConfig) -> float:
    """Clipped likelihood ratio pi_target(a|s) / b(a|s) for one record."""
    if t.behavior_prob <= 0:
        raise DataError(f"behavior_prob must be > 0, got {t.behavior_prob}")
    epsilon = 1.0 if cfg.target_mode == "frozen_uniform" else cfg.epsilon
    probs = target_policy_probs(q.values[t.state.index], epsilon)
    return float(min(probs[int(t.action)] / t.behavior_prob, cfg.weight_clip))


def train(
    dataset: Sequence[LoggedTransition],
    layout: Layout,
    cfg: TrainingConfig | None = None,
) -> QTable:
    """Sweep the dataset until the table settles.

    Per record: Q(s,a) += step * (w * r - Q(s,a)). Convergence is judged at
    sweep boundaries: stop when no cell's net change over a full sweep
    exceeds cfg.tolerance (per-update deltas never vanish under a constant
    step with noisy rewards). In frozen_uniform mode the step is 1/visits,
    which makes the sweep-boundary value the exact running mean of w * r.
    """
    cfg = cfg if cfg is not None else TrainingConfig()
    records = list(dataset)
    if not records:
        raise TrainingError("dataset is empty")
    for i, t in enumerate(records):
        if t.layout is not layout:
            raise DataError(
                f"record {i}: layout {t.layout.value!r} does not match {layout.value!r}"
            )

    q = QTable.zeros(layout)
    report = TrainReport()
    rewards = np.array([reward(t, cfg.reward_weights) for t in records])
    state_idx = np.array([t.state.index for t in records])
    action_idx = np.array([int(t.action) for t in records], dtype=np.int64)
    behavior = np.array([t.behavior_prob for t in records])
    frozen = cfg.target_mode == "frozen_uniform"
    if frozen:
        # Uniform target never changes, so the weights are constants.
        w_frozen = np.minimum((1.0 / N_ACTIONS) / behavior, cfg.weight_clip)

    values = q.values
    visits = q.visit_counts
    eps_share = cfg.epsilon / N_ACTIONS
    for sweep in range(1, cfg.max_sweeps + 1):
        before = values.copy()
        for i in range(len(records)):
            s = state_idx[i]
            a = action_idx[i]
            if frozen:
                w = w_frozen[i]
            else:
                row = values[s]
                prob = eps_share + (1.0 - cfg.epsilon if int(np.argmax(row)) == a else 0.0)
                w = min(prob / behavior[i], cfg.weight_clip)
            visits[s, a] += 1
            step = 1.0 / visits[s, a] if frozen else cfg.alpha
            values[s, a] += step * (w * rewards[i] - values[s, a])
        report.max_abs_q = max(report.max_abs_q, float(np.abs(values).max()))
        report.sweeps = sweep
        report.final_max_delta = float(np.abs(values - before).max())
        if report.final_max_delta < cfg.tolerance:
            report.converged = True
            break
    q.report = report
    return q


def select_action(
    q: QTable,
    state: State,
    mode: str = "greedy",
    epsilon: float = 0.1,
    seed: int | None = None,
) -> Action:
    """Pick an action from one state's row.

    greedy: argmax with lowest-index tie-break. epsilon_greedy: argmax with
    probability 1 - epsilon, otherwise uniform over all actions (seeded).
    """
    row = q.values[state.index]
    if mode == "greedy":
        return Action(int(np.argmax(row)))
    if mode == "epsilon_greedy":
        rng = np.random.default_rng(seed)
        if rng.random() < epsilon:
            return Action(int(rng.integers(N_ACTIONS)))
        return Action(int(np.argmax(row)))
    raise ConfigurationError(f"unknown selection mode {mode!r}")


def load_dataset(
    path: str | Path,
    layout: Layout | None = None,
    estimate_missing_behavior: bool = True,
) -> list[LoggedTransition]:
    """Read a JSONL dataset.

    Records without behavior_prob get the empirical per-state action
    frequency filled in (the logging policy of a study is rarely published).
    """
    raw_docs: list[dict] = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw_docs.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}, line {line_no}: invalid JSON ({exc})") from None
    missing = [d for d in raw_docs if "behavior_prob" not in d or d["behavior_prob"] is None]
    if missing and estimate_missing_behavior:
        counts: dict[tuple[int, int], int] = {}
        totals: dict[int, int] = {}
        for d in raw_docs:
            s = State.from_payload(d["state"]).index
            a = int(Action.from_wire(d["action"]))
            counts[(s, a)] = counts.get((s, a), 0) + 1
            totals[s] = totals.get(s, 0) + 1
        for d in raw_docs:
            if "behavior_prob" not in d or d["behavior_prob"] is None:
                s = State.from_payload(d["state"]).index
                a = int(Action.from_wire(d["action"]))
                d["behavior_prob"] = counts[(s, a)] / totals[s]
    records = [LoggedTransition.from_json(d) for d in raw_docs]
    if layout is not None:
        for i, t in enumerate(records):
            if t.layout is not layout:
                raise DataError(
                    f"{path}: record {i} layout {t.layout.value!r} "
                    f"does not match {layout.value!r}"
                )
    return records


def save_dataset(path: str | Path, records: Iterable[LoggedTransition]) -> int:
    n = 0
    with open(path, "w") as fh:
        for t in records:
            fh.write(json.dumps(t.to_json()) + "\n")
            n += 1
    return n


def evaluate_policy(
    records: Sequence[LoggedTransition],
    q: QTable,
    cfg: TrainingConfig | None = None,
) -> dict:
    """Offline estimates of the greedy policy's value on a logged dataset.

    Reports the behavior policy's empirical mean reward plus ordinary and
    weighted importance-sampling estimates for the greedy target.
    """
    cfg = cfg if cfg is not None else TrainingConfig()
    if not records:
        raise DataError("dataset is empty")
    rewards = np.array([reward(t, cfg.reward_weights) for t in records])
    ratios = np.empty(len(records))
    for i, t in enumerate(records):
        greedy = int(np.argmax(q.values[t.state.index]))
        prob = 1.0 if int(t.action) == greedy else 0.0
        ratios[i] = min(prob / t.behavior_prob, cfg.weight_clip)
    weighted = ratios * rewards
    ratio_sum = float(ratios.sum())
    return {
        "n_records": len(records),
        "behavior_mean_reward": float(rewards.mean()),
        "is_value": float(weighted.mean()),
        "wis_value": float(weighted.sum() / ratio_sum) if ratio_sum > 0 else 0.0,
        "match_fraction": float((ratios > 0).mean()),
    }


class AgentService:
    """Serving loop: assembles states from live messages and requests actions.

    Subscribes to workload estimates and behavior events, tracks the active
    (layout, difficulty, strategy) context, and publishes the greedy action
    of the active layout's agent on ``strategy.request`` for every estimate.
    """

    def __init__(
        self,
        broker,
        tables: Mapping[Layout, QTable],
        *,
        initial_layout: Layout = Layout.GRAPH,
        initial_difficulty: Difficulty = Difficulty.LOW,
        state_provider=None,
    ):
        from .gateway import TOPIC_BEHAVIOR, TOPIC_CONFIG, TOPIC_MWL

        missing = [l.value for l in Layout if l not in tables]
        if missing:
            raise ConfigurationError(f"missing agent tables for layouts: {missing}")
        self._broker = broker
        self._tables = dict(tables)
        self._layout = initial_layout
        self._difficulty = initial_difficulty
        self._strategy = StrategyKind.NONE
        if state_provider is not None:
            snapshot = state_provider()
            if snapshot.get("active"):
                self._layout = Layout(snapshot["layout"])
                self._strategy = StrategyKind(snapshot["strategy"]["kind"])
                if snapshot.get("difficulty"):
                    self._difficulty = Difficulty(snapshot["difficulty"])
        self._mwl_sub = broker.subscribe(TOPIC_MWL)
        self._behavior_sub = broker.subscribe(TOPIC_BEHAVIOR)
        self._config_sub = broker.subscribe(TOPIC_CONFIG)

    def _drain_context(self) -> None:
        """Apply all queued behavior/config messages to the context cache."""
        import logging

        log = logging.getLogger(__name__)
        while True:
            envelope = self._behavior_sub.get(timeout=0)
            if envelope is None:
                break
            payload = envelope.payload
            event = payload.get("event")
            if event == "layout_switch":
                try:
                    self._layout = Layout(payload["layout"])
                except ValueError:
                    log.warning("rejected behavior event with unknown layout: %r", payload)
            elif event == "question_shown":
                self._difficulty = Difficulty(payload["difficulty"])
        while True:
            envelope = self._config_sub.get(timeout=0)
            if envelope is None:
                break
            self._strategy = StrategyKind(envelope.payload["strategy"]["kind"])

    def run(self) -> int:
        from .gateway import TOPIC_STRATEGY

        served = 0
        for envelope in self._mwl_sub:
            self._drain_context()
            state = State(
                mwl=MwlCategory(envelope.payload["category"]),
                difficulty=self._difficulty,
                strategy=self._strategy,
            )
            action = select_action(self._tables[self._layout], state, mode="greedy")
            self._broker.publish(
                TOPIC_STRATEGY,
                {
                    "session_id": envelope.payload["session_id"],
                    "epoch_index": envelope.payload["epoch_index"],
                    "layout": self._layout.value,
                    "action": action.wire,
                },
                session_id=envelope.payload["session_id"],
            )
            served += 1
        return served

    def stop(self) -> None:
        self._mwl_sub.close()
        self._behavior_sub.close()
        self._config_sub.close()
