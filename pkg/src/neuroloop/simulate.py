"""Simulated-user harness: dataset generation and closed-loop evaluation.

The user model stands in for study participants: it maps (question
difficulty, applied strategy kind) to a distribution over the resulting
workload category, and each workload category to answer accuracy and
reaction-time statistics. All numbers are demo configuration, editable via
a user-table file; they encode the premise that adaptation helps most under
load while over-adaptation hurts on easy questions, so the optimal policy
is state-dependent and learning is non-trivial.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigurationError
from .mwl import MwlCategory
from .rl import (
    Action,
    Difficulty,
    Layout,
    LoggedTransition,
    N_ACTIONS,
    N_STATES,
    QTable,
    RewardWeights,
    State,
    StrategyKind,
    select_action,
)

_CATEGORIES = (MwlCategory.LOW, MwlCategory.OPTIMAL, MwlCategory.HIGH)


@dataclass(frozen=True)
class AnswerModel:
    accuracy_prob: float
    rt_mean_ms: float
    rt_sd_ms: float

    def __post_init__(self):
        if not (0 <= self.accuracy_prob <= 1):
            raise ConfigurationError(f"accuracy_prob must be in [0,1], got {self.accuracy_prob}")
        if self.rt_mean_ms <= 0 or self.rt_sd_ms < 0:
            raise ConfigurationError("reaction time parameters must be positive")


def _default_response() -> dict:
    high, low = Difficulty.HIGH, Difficulty.LOW
    none, partial, full = StrategyKind.NONE, StrategyKind.PARTIAL, StrategyKind.FULL
    return {
        (high, full): {MwlCategory.OPTIMAL: 0.80, MwlCategory.HIGH: 0.15, MwlCategory.LOW: 0.05},
        (high, none): {MwlCategory.HIGH: 0.70, MwlCategory.OPTIMAL: 0.20, MwlCategory.LOW: 0.10},
        (high, partial): {MwlCategory.OPTIMAL: 0.50, MwlCategory.HIGH: 0.40, MwlCategory.LOW: 0.10},
        (low, none): {MwlCategory.OPTIMAL: 0.60, MwlCategory.LOW: 0.25, MwlCategory.HIGH: 0.15},
        (low, full): {MwlCategory.OPTIMAL: 0.50, MwlCategory.LOW: 0.35, MwlCategory.HIGH: 0.15},
        (low, partial): {MwlCategory.OPTIMAL: 0.65, MwlCategory.LOW: 0.20, MwlCategory.HIGH: 0.15},
    }


def _default_answers() -> dict:
    return {
        MwlCategory.OPTIMAL: AnswerModel(0.90, 4000.0, 800.0),
        MwlCategory.LOW: AnswerModel(0.75, 6000.0, 1200.0),
        MwlCategory.HIGH: AnswerModel(0.60, 9000.0, 2000.0),
    }


@dataclass(frozen=True)
class SimulatedUser:
    """Response table plus answer model; every draw is seeded and reproducible."""

    response: Mapping[tuple[Difficulty, StrategyKind], Mapping[MwlCategory, float]] = field(
        default_factory=_default_response
    )
    answers: Mapping[MwlCategory, AnswerModel] = field(default_factory=_default_answers)
    seed: int = 0

    def __post_init__(self):
        for diff in Difficulty:
            for kind in StrategyKind:
                key = (diff, kind)
                if key not in self.response:
                    raise ConfigurationError(
                        f"user table missing response row ({diff.value}, {kind.value})"
                    )
                row = self.response[key]
                total = sum(row.get(c, 0.0) for c in _CATEGORIES)
                if abs(total - 1.0) > 1e-9:
                    raise ConfigurationError(
                        f"response row ({diff.value}, {kind.value}) sums to {total}, not 1"
                    )
                for c in _CATEGORIES:
                    p = row.get(c, 0.0)
                    if not (0 <= p <= 1):
                        raise ConfigurationError(
                            f"response row ({diff.value}, {kind.value}): p({c.value})={p}"
                        )
        for c in _CATEGORIES:
            if c not in self.answers:
                raise ConfigurationError(f"answer model missing category {c.value}")

    def post_mwl_probs(self, difficulty: Difficulty, kind: StrategyKind) -> np.ndarray:
        row = self.response[(difficulty, kind)]
        return np.array([row.get(c, 0.0) for c in _CATEGORIES])

    def sample_outcome(
        self, difficulty: Difficulty, kind: StrategyKind, rng: np.random.Generator
    ) -> tuple[MwlCategory, int, float]:
        """Draw (post workload, accuracy, reaction time) for one episode."""
        probs = self.post_mwl_probs(difficulty, kind)
        post = _CATEGORIES[rng.choice(len(_CATEGORIES), p=probs)]
        model = self.answers[post]
        accuracy = int(rng.random() < model.accuracy_prob)
        rt = max(float(rng.normal(model.rt_mean_ms, model.rt_sd_ms)), 1.0)
        return post, accuracy, rt

    @classmethod
    def load(cls, path: str | Path, seed: int = 0) -> "SimulatedUser":
        import yaml

        raw = yaml.safe_load(Path(path).read_text())
        response = {}
        for diff_name, kinds in raw["response"].items():
            for kind_name, probs in kinds.items():
                response[(Difficulty(diff_name), StrategyKind(kind_name))] = {
                    MwlCategory(c): float(p) for c, p in probs.items()
                }
        answers = {
            MwlCategory(c): AnswerModel(
                accuracy_prob=float(m["accuracy_prob"]),
                rt_mean_ms=float(m["rt_mean_ms"]),
                rt_sd_ms=float(m["rt_sd_ms"]),
            )
            for c, m in raw["answers"].items()
        }
        return cls(response=response, answers=answers, seed=int(raw.get("seed", seed)))


# ---------------------------------------------------------------------------
# Behavior policies for dataset generation
# ---------------------------------------------------------------------------

def uniform_behavior() -> np.ndarray:
    return np.full(N_ACTIONS, 1.0 / N_ACTIONS)


def behavior_from_spec(spec: str | Sequence[float]) -> np.ndarray:
    """Parse a behavior policy: "uniform" or seven per-action probabilities."""
    if isinstance(spec, str):
        if spec == "uniform":
            return uniform_behavior()
        raise ConfigurationError(f"unknown behavior policy {spec!r}")
    probs = np.asarray(spec, dtype=np.float64)
    if probs.shape != (N_ACTIONS,):
        raise ConfigurationError(f"behavior policy needs {N_ACTIONS} probabilities")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ConfigurationError(f"behavior policy sums to {probs.sum()}, not 1")
    if (probs <= 0).any():
        bad = int(np.argmin(probs))
        raise ConfigurationError(
            f"behavior policy gives zero probability to {Action(bad).wire}; "
            "importance weighting requires full action coverage"
        )
    return probs


def generate_dataset(
    user: SimulatedUser,
    behavior: str | Sequence[float],
    n: int,
    layout: Layout,
    seed: int = 0,
) -> list[LoggedTransition]:
    """Emit n logged single-transition episodes with true behavior_prob."""
    probs = behavior_from_spec(behavior)
    rng = np.random.default_rng(seed)
    records: list[LoggedTransition] = []
    for _ in range(n):
        state = State.from_index(int(rng.integers(N_STATES)))
        action = Action(int(rng.choice(N_ACTIONS, p=probs)))
        post, accuracy, rt = user.sample_outcome(state.difficulty, action.strategy_kind, rng)
        records.append(
            LoggedTransition(
                layout=layout,
                state=state,
                action=action,
                post_mwl=post,
                accuracy=accuracy,
                reaction_time_ms=rt,
                behavior_prob=float(probs[int(action)]),
            )
        )
    return records


# ---------------------------------------------------------------------------
# Brute-force oracle and closed-loop evaluation
# ---------------------------------------------------------------------------

def _expected_rt_term(model: AnswerModel, cap_ms: float) -> float:
    """Exact E[min(max(X, 1), cap)] / cap for X ~ Normal(mean, sd)."""
    mu, sd = model.rt_mean_ms, model.rt_sd_ms
    if sd == 0:
        return min(max(mu, 1.0), cap_ms) / cap_ms
    a, b = 1.0, cap_ms
    alpha, beta = (a - mu) / sd, (b - mu) / sd
    phi = stats.norm.pdf
    Phi = stats.norm.cdf
    middle = mu * (Phi(beta) - Phi(alpha)) - sd * (phi(beta) - phi(alpha))
    expected = a * Phi(alpha) + b * (1.0 - Phi(beta)) + middle
    return expected / cap_ms


def expected_reward_table(
    user: SimulatedUser, weights: RewardWeights | None = None
) -> np.ndarray:
    """True E[reward | state, action] under the user table, shape 18 x 7."""
    weights = weights if weights is not None else RewardWeights()
    table = np.zeros((N_STATES, N_ACTIONS))
    for s in range(N_STATES):
        difficulty = State.from_index(s).difficulty
        for a in range(N_ACTIONS):
            kind = Action(a).strategy_kind
            probs = user.post_mwl_probs(difficulty, kind)
            value = weights.mwl * probs[_CATEGORIES.index(MwlCategory.OPTIMAL)]
            for c, p in zip(_CATEGORIES, probs):
                model = user.answers[c]
                value += weights.accuracy * p * model.accuracy_prob
                value -= weights.reaction_time * p * _expected_rt_term(model, weights.rt_cap_ms)
            table[s, a] = value
    return table


def optimal_action_sets(expected: np.ndarray, tol: float = 1e-12) -> list[set[int]]:
    """Per state, the set of actions within tol of the best expected reward."""
    return [
        {a for a in range(N_ACTIONS) if expected[s, a] >= expected[s].max() - tol}
        for s in range(N_STATES)
    ]


PolicyFn = Callable[[State], Action]


def greedy_policy(table: QTable) -> PolicyFn:
    return lambda state: select_action(table, state, mode="greedy")


def no_adaptation_policy() -> PolicyFn:
    return lambda state: Action.NO_ADAPTATION


@dataclass(frozen=True)
class PolicyMetrics:
    n_episodes: int
    optimal_rate: float
    mean_accuracy: float
    mean_rt_ms: float

    def to_json(self) -> dict:
        return {
            "n_episodes": self.n_episodes,
            "optimal_rate": self.optimal_rate,
            "mean_accuracy": self.mean_accuracy,
            "mean_rt_ms": self.mean_rt_ms,
        }


def simulate(
    policies: Mapping[str, PolicyFn],
    user: SimulatedUser,
    n_episodes: int,
    seed: int = 0,
) -> dict[str, PolicyMetrics]:
    """Run single-transition episodes per policy and report outcome metrics.

    Every policy sees the same seeded episode contexts (pre-workload,
    difficulty, active strategy), so comparisons are paired; outcome draws
    use a per-policy substream. Fully reproducible for a fixed seed.
    """
    context_rng = np.random.default_rng([user.seed, seed, 0])
    mwl_draw = context_rng.integers(3, size=n_episodes)
    diff_draw = context_rng.integers(2, size=n_episodes)
    strat_draw = context_rng.integers(3, size=n_episodes)
    results: dict[str, PolicyMetrics] = {}
    for policy_idx, (name, policy) in enumerate(sorted(policies.items())):
        rng = np.random.default_rng([user.seed, seed, 1 + policy_idx])
        optimal = 0
        accuracy_sum = 0
        rt_sum = 0.0
        for i in range(n_episodes):
            state = State(
                mwl=list(MwlCategory)[mwl_draw[i]],
                difficulty=Difficulty.LOW if diff_draw[i] == 0 else Difficulty.HIGH,
                strategy=list(StrategyKind)[strat_draw[i]],
            )
            action = policy(state)
            post, acc, rt = user.sample_outcome(state.difficulty, action.strategy_kind, rng)
            optimal += post is MwlCategory.OPTIMAL
            accuracy_sum += acc
            rt_sum += rt
        results[name] = PolicyMetrics(
            n_episodes=n_episodes,
            optimal_rate=optimal / n_episodes,
            mean_accuracy=accuracy_sum / n_episodes,
            mean_rt_ms=rt_sum / n_episodes,
        )
    return results


def report_to_json(report: Mapping[str, PolicyMetrics]) -> str:
    return json.dumps({name: m.to_json() for name, m in report.items()}, indent=2, sort_keys=True)
