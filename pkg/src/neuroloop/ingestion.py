"""Epoch sources: synthetic sine-plus-noise generator and CSV replay.

Both sources emit immutable :class:`EegEpoch` objects of exactly 2 seconds,
which is the unit every downstream stage consumes. Hardware drivers are out
of scope; the synthetic generator stands in for a device by construction.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping

import numpy as np

from .errors import ConfigurationError, PublishRetryExhausted, ReplayParseError

logger = logging.getLogger(__name__)

EPOCH_SECONDS = 2
DEFAULT_SAMPLE_RATE_HZ = 256


class Channel(str, Enum):
    """The three electrode channels the pipeline reads. Case-sensitive."""

    FZ = "Fz"
    C3 = "C3"
    P3 = "P3"


CHANNELS: tuple[Channel, ...] = (Channel.FZ, Channel.C3, Channel.P3)


@dataclass(frozen=True)
class EegEpoch:
    """One 2-second window of raw multi-channel samples (microvolts).

    Invariants enforced at construction: all three channels present, equal
    per-channel length of exactly ``sample_rate_hz * 2``, finite amplitudes.
    """

    session_id: str
    epoch_index: int
    t_start_ms: int
    sample_rate_hz: int
    samples: Mapping[Channel, np.ndarray]

    def __post_init__(self):
        if self.epoch_index < 0:
            raise ConfigurationError(f"epoch_index must be >= 0, got {self.epoch_index}")
        if self.sample_rate_hz <= 0:
            raise ConfigurationError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        expected = self.sample_rate_hz * EPOCH_SECONDS
        if set(self.samples.keys()) != set(CHANNELS):
            missing = sorted(set(c.value for c in CHANNELS) - {c.value for c in self.samples})
            raise ConfigurationError(f"epoch must carry exactly {[c.value for c in CHANNELS]}; missing {missing}")
        frozen: dict[Channel, np.ndarray] = {}
        for ch, arr in self.samples.items():
            a = np.asarray(arr, dtype=np.float64)
            if a.ndim != 1 or a.shape[0] != expected:
                raise ConfigurationError(
                    f"channel {ch.value}: expected {expected} samples, got shape {a.shape}"
                )
            if not np.all(np.isfinite(a)):
                raise ConfigurationError(f"channel {ch.value}: non-finite amplitude")
            a.setflags(write=False)
            frozen[ch] = a
        object.__setattr__(self, "samples", frozen)

    @property
    def n_samples(self) -> int:
        return self.sample_rate_hz * EPOCH_SECONDS

    def to_payload(self) -> dict:
        """Wire form for the ``biosignals.eeg.epoch`` topic."""
        return {
            "session_id": self.session_id,
            "epoch_index": self.epoch_index,
            "t_start_ms": self.t_start_ms,
            "sample_rate_hz": self.sample_rate_hz,
            "samples": {ch.value: self.samples[ch].tolist() for ch in CHANNELS},
        }

    @classmethod
    def from_payload(cls, payload: Mapping) -> "EegEpoch":
        return cls(
            session_id=payload["session_id"],
            epoch_index=payload["epoch_index"],
            t_start_ms=payload["t_start_ms"],
            sample_rate_hz=payload["sample_rate_hz"],
            samples={ch: np.asarray(payload["samples"][ch.value]) for ch in CHANNELS},
        )


@dataclass(frozen=True)
class SyntheticSpec:
    """Deterministic stand-in for an acquisition device.

    ``amplitudes`` maps channel -> band name -> target sinusoid amplitude in
    microvolts; the sinusoid frequency is the band's geometric midpoint.
    White noise of ``noise_uv`` RMS is added per channel. The same
    (spec, epoch_index) pair always reproduces the same samples: the stream
    is drawn from PCG64 seeded with (seed, epoch_index).
    """

    amplitudes: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    noise_uv: float = 0.0
    seed: int = 0
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ
    session_id: str = "synthetic"

    def __post_init__(self):
        for ch_name, bands in self.amplitudes.items():
            if ch_name not in (c.value for c in CHANNELS):
                raise ConfigurationError(f"unknown channel in spec: {ch_name!r}")
            for band_name, amp in bands.items():
                if amp < 0:
                    raise ConfigurationError(
                        f"negative amplitude for {ch_name}/{band_name}: {amp}"
                    )
        if self.noise_uv < 0:
            raise ConfigurationError(f"negative noise amplitude: {self.noise_uv}")
        if self.sample_rate_hz <= 0:
            raise ConfigurationError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")


def _band_midpoints() -> dict[str, float]:
    # Local import: dsp depends on ingestion for Channel, not the reverse.
    from .dsp import DEFAULT_BANDS

    return {b.name: math.sqrt(b.f_low * b.f_high) for b in DEFAULT_BANDS}


def generate_epoch(spec: SyntheticSpec, epoch_index: int) -> EegEpoch:
    """Build one synthetic epoch: per-band sinusoids plus seeded white noise.

    Sinusoid phase runs on absolute session time so consecutive epochs are
    continuous. Deterministic in (spec, epoch_index).
    """
    if epoch_index < 0:
        raise ConfigurationError(f"epoch_index must be >= 0, got {epoch_index}")
    fs = spec.sample_rate_hz
    n = fs * EPOCH_SECONDS
    t = (np.arange(n) + epoch_index * n) / fs
    midpoints = _band_midpoints()
    rng = np.random.default_rng([spec.seed, epoch_index])
    samples: dict[Channel, np.ndarray] = {}
    for ch in CHANNELS:
        sig = np.zeros(n)
        for band_name, amp in spec.amplitudes.get(ch.value, {}).items():
            if band_name not in midpoints:
                raise ConfigurationError(f"unknown band in spec: {band_name!r}")
            if amp > 0:
                sig = sig + amp * np.sin(2 * np.pi * midpoints[band_name] * t)
        # One noise draw per channel, in fixed channel order, so streams stay
        # reproducible even when some channels are silent.
        noise = rng.standard_normal(n)
        if spec.noise_uv > 0:
            sig = sig + spec.noise_uv * noise
        samples[ch] = sig
    return EegEpoch(
        session_id=spec.session_id,
        epoch_index=epoch_index,
        t_start_ms=epoch_index * EPOCH_SECONDS * 1000,
        sample_rate_hz=fs,
        samples=samples,
    )


def synthetic_stream(spec: SyntheticSpec, n_epochs: int | None = None) -> Iterator[EegEpoch]:
    """Yield consecutive epochs from index 0; unbounded when n_epochs is None."""
    index = 0
    while n_epochs is None or index < n_epochs:
        yield generate_epoch(spec, index)
        index += 1


# ---------------------------------------------------------------------------
# Replay format: `# sample_rate_hz=<int>` header, then `t_ms,Fz,C3,P3` rows.
# ---------------------------------------------------------------------------

def write_recording(path: str | Path, epochs: Iterable[EegEpoch]) -> int:
    """Write epochs to the replay CSV format. Returns rows written."""
    path = Path(path)
    rows = 0
    with open(path, "w", newline="") as fh:
        writer = None
        for epoch in epochs:
            if writer is None:
                fh.write(f"# sample_rate_hz={epoch.sample_rate_hz}\n")
                fh.write("t_ms," + ",".join(c.value for c in CHANNELS) + "\n")
                writer = csv.writer(fh)
            dt_ms = 1000.0 / epoch.sample_rate_hz
            for i in range(epoch.n_samples):
                t_ms = epoch.t_start_ms + i * dt_ms
                writer.writerow(
                    [f"{t_ms:.6g}"] + [f"{epoch.samples[c][i]:.6g}" for c in CHANNELS]
                )
                rows += 1
    return rows


def replay_stream(
    path: str | Path,
    realtime: bool = False,
    session_id: str | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> Iterator[EegEpoch]:
    """Yield 2-second epochs parsed from a recording file.

    Trailing samples that do not fill a whole epoch are dropped with a
    warning (zero-padding would distort band power). With ``realtime`` set,
    emission is paced at one epoch per 2 s of wall clock.
    """
    path = Path(path)
    session = session_id if session_id is not None else path.stem
    with open(path, "r") as fh:
        header = fh.readline().strip()
        if not header.startswith("# sample_rate_hz="):
            raise ReplayParseError(
                f"expected '# sample_rate_hz=<int>' header, got {header!r}", line=1
            )
        try:
            fs = int(header.split("=", 1)[1])
        except ValueError:
            raise ReplayParseError(f"sample_rate_hz is not an integer in {header!r}", line=1)
        if fs <= 0:
            raise ReplayParseError(f"sample_rate_hz must be positive, got {fs}", line=1)

        columns_line = fh.readline().strip()
        columns = [c.strip() for c in columns_line.split(",")]
        if not columns or columns[0] != "t_ms":
            raise ReplayParseError(f"first column must be t_ms, got {columns_line!r}", line=2)
        known = {c.value for c in CHANNELS}
        for name in columns[1:]:
            if name not in known:
                raise ReplayParseError(f"unknown channel {name!r}", line=2)
        missing = known - set(columns[1:])
        if missing:
            raise ReplayParseError(f"missing channel {sorted(missing)[0]!r}", line=2)
        col_index = {name: i for i, name in enumerate(columns)}

        n = fs * EPOCH_SECONDS
        buffers: dict[Channel, list[float]] = {c: [] for c in CHANNELS}
        epoch_index = 0
        t_starts: list[float] = []
        last_emit = time.monotonic()
        for line_no, raw in enumerate(fh, start=3):
            raw = raw.strip()
            if not raw:
                continue
            parts = raw.split(",")
            if len(parts) != len(columns):
                raise ReplayParseError(
                    f"expected {len(columns)} fields, got {len(parts)}", line=line_no
                )
            try:
                values = [float(p) for p in parts]
            except ValueError:
                raise ReplayParseError(f"non-numeric field in {raw!r}", line=line_no)
            if not all(math.isfinite(v) for v in values):
                raise ReplayParseError(f"non-finite amplitude in {raw!r}", line=line_no)
            if len(buffers[Channel.FZ]) == 0:
                t_starts.append(values[0])
            for ch in CHANNELS:
                buffers[ch].append(values[col_index[ch.value]])
            if len(buffers[Channel.FZ]) == n:
                epoch = EegEpoch(
                    session_id=session,
                    epoch_index=epoch_index,
                    t_start_ms=int(round(t_starts[-1])),
                    sample_rate_hz=fs,
                    samples={ch: np.array(buffers[ch]) for ch in CHANNELS},
                )
                if realtime and epoch_index > 0:
                    remaining = EPOCH_SECONDS - (time.monotonic() - last_emit)
                    if remaining > 0:
                        sleep(remaining)
                last_emit = time.monotonic()
                yield epoch
                epoch_index += 1
                buffers = {c: [] for c in CHANNELS}
        leftover = len(buffers[Channel.FZ])
        if leftover:
            logger.warning(
                "%s: dropped %d trailing samples (< one 2 s epoch)", path.name, leftover
            )


def publish_epochs(
    source: Iterable[EegEpoch],
    gateway,
    *,
    max_attempts: int = 5,
    backoff_s: float = 0.1,
    sleep: Callable[[float], None] = time.sleep,
) -> int:
    """Publish every epoch on ``biosignals.eeg.epoch``, exactly once, in order.

    A failing publish is retried with doubling backoff up to ``max_attempts``
    before giving up. Returns the number of epochs published.
    """
    from .gateway import TOPIC_EPOCH

    count = 0
    for epoch in source:
        payload = epoch.to_payload()
        attempt = 0
        while True:
            try:
                gateway.publish(TOPIC_EPOCH, payload, session_id=epoch.session_id)
                break
            except Exception as exc:  # noqa: BLE001 - the retry contract is generic
                attempt += 1
                if attempt >= max_attempts:
                    raise PublishRetryExhausted(
                        f"publishing epoch {epoch.epoch_index} failed after "
                        f"{max_attempts} attempts: {exc}"
                    ) from exc
                sleep(backoff_s * (2 ** (attempt - 1)))
        count += 1
    return count


def load_synthetic_spec(path: str | Path) -> SyntheticSpec:
    """Read a SyntheticSpec from a YAML/JSON config file."""
    import yaml

    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: expected a mapping")
    return SyntheticSpec(
        amplitudes=raw.get("amplitudes", {}),
        noise_uv=float(raw.get("noise_uv", 0.0)),
        seed=int(raw.get("seed", 0)),
        sample_rate_hz=int(raw.get("sample_rate_hz", DEFAULT_SAMPLE_RATE_HZ)),
        session_id=str(raw.get("session_id", "synthetic")),
    )
