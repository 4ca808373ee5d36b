"""Closed-loop neuroadaptive dashboard stack.

Streams 2-second EEG epochs (synthetic or replayed), extracts band-power
features, estimates mental workload against calibrated population
quantiles, lets per-layout offline-trained agents pick dashboard
adaptations, and pushes the resulting configurations to live dashboards
through a topic-based gateway with a WebSocket bridge.
"""

from .adaptation import (
    AdaptationCatalogue,
    AdaptationConfig,
    AdaptationOperation,
    AdaptationStrategy,
    resolve,
    validate_catalogue,
)
from .dsp import (
    Band,
    DEFAULT_BANDS,
    FeatureVector,
    band_power,
    bandpass_filter,
    extract_features,
    power_spectral_density,
)
from .gateway import Broker, Envelope, TOPICS
from .ingestion import (
    Channel,
    EegEpoch,
    SyntheticSpec,
    generate_epoch,
    publish_epochs,
    replay_stream,
)
from .mwl import (
    BandLevel,
    MwlCategory,
    MwlEstimate,
    MwlWeights,
    QuantileThresholds,
    calibrate,
    categorize_band,
    combine,
    estimate,
)
from .rl import (
    Action,
    Difficulty,
    Layout,
    LoggedTransition,
    QTable,
    State,
    StrategyKind,
    TrainingConfig,
    importance_weight,
    reward,
    select_action,
    train,
)
from .simulate import SimulatedUser, expected_reward_table, generate_dataset, simulate

__version__ = "0.1.0"
