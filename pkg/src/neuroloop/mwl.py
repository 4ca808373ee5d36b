"""Mental-workload estimation from band powers via population quantiles.

Each band's power is categorized low/medium/high against the 25th and 75th
percentiles of a calibration population. Theta and beta rise with workload,
so low power means a low contribution; alpha and delta fall with workload,
so the mapping is reversed for them. Band categories are combined with
fixed weights into a workload index in [0, 2], then bucketed into the
Low / Optimal / High state the rest of the loop consumes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dsp import ALPHA, BAND_NAMES, BETA, DELTA, THETA, Band, FeatureVector
from .errors import CalibrationError, CalibrationMissingError, ConfigurationError

# Direction of correlation with workload.
POSITIVE_BANDS = frozenset({THETA.name, BETA.name})
NEGATIVE_BANDS = frozenset({ALPHA.name, DELTA.name})

INDEX_LOW_CUT = 0.75
INDEX_HIGH_CUT = 1.25


class BandLevel(IntEnum):
    """Per-band workload contribution; the int value is the combination score."""

    LOW = 0
    MEDIUM = 1
    HIGH = 2

    @property
    def wire(self) -> str:
        return self.name.lower()

    @classmethod
    def from_wire(cls, name: str) -> "BandLevel":
        return cls[name.upper()]


class MwlCategory(str, Enum):
    LOW = "low"
    OPTIMAL = "optimal"
    HIGH = "high"


@dataclass(frozen=True)
class QuantileThresholds:
    """Calibrated per-band 25th/75th percentile thresholds."""

    q25: Mapping[str, float]
    q75: Mapping[str, float]
    calibration_n: int

    def __post_init__(self):
        if self.calibration_n < 2:
            raise CalibrationError(f"calibration needs >= 2 samples, got {self.calibration_n}")
        for name in BAND_NAMES:
            if name not in self.q25 or name not in self.q75:
                raise CalibrationError(f"thresholds missing band {name!r}")
            if self.q25[name] > self.q75[name]:
                raise CalibrationError(
                    f"band {name}: q25 {self.q25[name]} > q75 {self.q75[name]}"
                )

    def save(self, path: str | Path) -> None:
        doc = {
            name: {"q25": float(self.q25[name]), "q75": float(self.q75[name])}
            for name in BAND_NAMES
        }
        doc["n"] = self.calibration_n
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "QuantileThresholds":
        path = Path(path)
        if not path.exists():
            raise CalibrationMissingError(path)
        doc = json.loads(path.read_text())
        return cls(
            q25={name: doc[name]["q25"] for name in BAND_NAMES},
            q75={name: doc[name]["q75"] for name in BAND_NAMES},
            calibration_n=doc["n"],
        )


@dataclass(frozen=True)
class MwlWeights:
    """Per-band combination weights; must sum to 1."""

    weights: Mapping[str, float] = field(
        default_factory=lambda: {name: 0.25 for name in BAND_NAMES}
    )

    def __post_init__(self):
        if set(self.weights) != set(BAND_NAMES):
            raise ConfigurationError(
                f"weights must cover exactly {list(BAND_NAMES)}, got {sorted(self.weights)}"
            )
        for name, w in self.weights.items():
            if w < 0:
                raise ConfigurationError(f"weight for {name} must be >= 0, got {w}")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"weights must sum to 1 within 1e-9, got {total}")
        object.__setattr__(self, "weights", dict(self.weights))

    def __getitem__(self, band: str) -> float:
        return self.weights[band]


@dataclass(frozen=True)
class MwlEstimate:
    session_id: str
    epoch_index: int
    bands: Mapping[str, BandLevel]
    index: float
    category: MwlCategory

    def to_payload(self) -> dict:
        return {
            "session_id": self.session_id,
            "epoch_index": self.epoch_index,
            "bands": {name: self.bands[name].wire for name in BAND_NAMES},
            "index": float(self.index),
            "category": self.category.value,
        }


def calibrate(samples: Mapping[str, Sequence[float]]) -> QuantileThresholds:
    """Compute per-band q25/q75 with the linear-interpolation estimator.

    This is the interpolated order-statistic definition (numpy's default),
    chosen because it is deterministic and checkable by hand:
    calibrate({"theta": [1,2,3,4,5], ...}) gives q25=2.0, q75=4.0.
    """
    q25: dict[str, float] = {}
    q75: dict[str, float] = {}
    counts = set()
    for name in BAND_NAMES:
        values = np.asarray(samples.get(name, ()), dtype=np.float64)
        if values.size == 0:
            raise CalibrationError(f"no calibration samples for band {name!r}")
        if values.size < 2:
            raise CalibrationError(
                f"band {name!r}: need >= 2 calibration samples, got {values.size}"
            )
        q25[name] = float(np.quantile(values, 0.25, method="linear"))
        q75[name] = float(np.quantile(values, 0.75, method="linear"))
        counts.add(values.size)
    return QuantileThresholds(q25=q25, q75=q75, calibration_n=min(counts))


def categorize_band(power: float, band: Band | str, thresholds: QuantileThresholds) -> BandLevel:
    """Map one band power to its workload contribution level.

    Positively correlated bands (theta, beta): below q25 is LOW, above q75 is
    HIGH. Negatively correlated bands (alpha, delta) reverse that. Values
    exactly on a threshold stay MEDIUM so ties never trigger adaptation.
    """
    name = band.name if isinstance(band, Band) else band
    q25 = thresholds.q25[name]
    q75 = thresholds.q75[name]
    if power < q25:
        raw = BandLevel.LOW
    elif power > q75:
        raw = BandLevel.HIGH
    else:
        raw = BandLevel.MEDIUM
    if name in NEGATIVE_BANDS and raw is not BandLevel.MEDIUM:
        return BandLevel.LOW if raw is BandLevel.HIGH else BandLevel.HIGH
    return raw


def combine(
    categories: Mapping[str, BandLevel], weights: MwlWeights | None = None
) -> tuple[float, MwlCategory]:
    """Weighted score of band levels -> (index in [0,2], workload category).

    Index cut points are symmetric around the all-medium point 1.0; the
    boundaries themselves count as Optimal.
    """
    weights = weights if weights is not None else MwlWeights()
    if set(categories) != set(BAND_NAMES):
        raise ConfigurationError(
            f"categories must cover exactly {list(BAND_NAMES)}, got {sorted(categories)}"
        )
    index = sum(weights[name] * int(categories[name]) for name in BAND_NAMES)
    if index < INDEX_LOW_CUT:
        category = MwlCategory.LOW
    elif index > INDEX_HIGH_CUT:
        category = MwlCategory.HIGH
    else:
        category = MwlCategory.OPTIMAL
    return float(index), category


def estimate(
    features: FeatureVector,
    thresholds: QuantileThresholds,
    weights: MwlWeights | None = None,
) -> MwlEstimate:
    """Categorize every band of a feature vector and combine into one estimate."""
    bands = {
        name: categorize_band(features.power[name], name, thresholds) for name in BAND_NAMES
    }
    index, category = combine(bands, weights)
    return MwlEstimate(
        session_id=features.session_id,
        epoch_index=features.epoch_index,
        bands=bands,
        index=index,
        category=category,
    )


def features_from_jsonl(path: str | Path) -> dict[str, list[float]]:
    """Collect per-band power samples from a JSONL of feature messages."""
    samples: dict[str, list[float]] = {name: [] for name in BAND_NAMES}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            # Session logs store envelopes; bare feature dumps store payloads.
            payload = doc.get("payload", doc)
            power = payload.get("power")
            if power is None:
                continue
            for name in BAND_NAMES:
                if name not in power:
                    raise CalibrationError(f"{path}, line {line_no}: missing band {name!r}")
                samples[name].append(float(power[name]))
    return samples


class EstimatorStage:
    """Loop stage: consumes feature vectors, publishes workload estimates."""

    def __init__(self, broker, thresholds: QuantileThresholds, weights: MwlWeights | None = None):
        from .gateway import TOPIC_FEATURES

        self._broker = broker
        self._thresholds = thresholds
        self._weights = weights if weights is not None else MwlWeights()
        self._sub = broker.subscribe(TOPIC_FEATURES)

    def run(self) -> int:
        from .gateway import TOPIC_MWL

        processed = 0
        for envelope in self._sub:
            features = FeatureVector.from_payload(envelope.payload)
            result = estimate(features, self._thresholds, self._weights)
            self._broker.publish(TOPIC_MWL, result.to_payload(), session_id=result.session_id)
            processed += 1
        return processed

    def stop(self) -> None:
        self._sub.close()
