import numpy as np
import pytest

from neuroloop.ingestion import CHANNELS, EegEpoch


@pytest.fixture
def make_epoch():
    """Factory for epochs with arbitrary per-channel signals."""

    def _make(signals=None, fs=256, session_id="test", epoch_index=0):
        n = fs * 2
        samples = {}
        for ch in CHANNELS:
            if signals and ch.value in signals:
                samples[ch] = np.asarray(signals[ch.value], dtype=float)
            else:
                samples[ch] = np.zeros(n)
        return EegEpoch(
            session_id=session_id,
            epoch_index=epoch_index,
            t_start_ms=epoch_index * 2000,
            sample_rate_hz=fs,
            samples=samples,
        )

    return _make


@pytest.fixture
def sine():
    def _sine(freq_hz, amp=1.0, fs=256, phase=0.0):
        t = np.arange(fs * 2) / fs
        return amp * np.sin(2 * np.pi * freq_hz * t + phase)

    return _sine
