"""Shared synthesis helpers for the test suite."""

import numpy as np
import pytest

from audiomorph.audio import DEFAULT_SAMPLE_RATE, AudioBuffer


def sine(freq_hz, duration_s=1.0, rate=DEFAULT_SAMPLE_RATE, amplitude=0.5, phase=0.0):
    """Mono sine tone as an AudioBuffer."""
    n = int(round(duration_s * rate))
    t = np.arange(n) / rate
    return AudioBuffer(amplitude * np.sin(2 * np.pi * freq_hz * t + phase), rate)


def stereo_sine(freq_l, freq_r, duration_s=1.0, rate=DEFAULT_SAMPLE_RATE, amplitude=0.5):
    n = int(round(duration_s * rate))
    t = np.arange(n) / rate
    left = amplitude * np.sin(2 * np.pi * freq_l * t)
    right = amplitude * np.sin(2 * np.pi * freq_r * t)
    return AudioBuffer(np.stack([left, right]), rate)


@pytest.fixture
def tone_440():
    return sine(440.0)


def envelope_period_s(channel, rate, max_lag_s):
    """Dominant repetition period of a smooth envelope: autocorrelation,
    skipping the zero-lag lobe by scanning to its first local minimum."""
    env = np.abs(np.asarray(channel, dtype=float))
    kernel = int(0.005 * rate)
    if kernel > 1:
        env = np.convolve(env, np.ones(kernel) / kernel, mode="same")
    env -= env.mean()
    ac = np.correlate(env, env, mode="full")[env.size - 1 :]
    i = 1
    while i < ac.size - 1 and not (ac[i] <= ac[i - 1] and ac[i] <= ac[i + 1]):
        i += 1
    end = min(ac.size, int(max_lag_s * rate))
    lag = i + int(np.argmax(ac[i:end]))
    return lag / rate
