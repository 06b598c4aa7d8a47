"""Compound signal-level perturbations: compressor, ring modulator, bass
boost, tremolo, distortion, echo, reverb.

Each effect is a composition of the basic tempo/frequency/injection/
amplitude moves; accordingly this module may only depend on the audio
core and the basic ops (enforced by an architecture test).
"""

from __future__ import annotations

import math

import numpy as np

from ..audio import AudioBuffer, clamp
from ..errors import ParameterError
from .basic import time_shift

_RMS_WINDOW_S = 0.010
_ATTACK_S = 0.010
_RELEASE_S = 0.100


def _one_pole(values: np.ndarray, coeff: float) -> np.ndarray:
    out = np.empty_like(values)
    state = values[0]
    for i, v in enumerate(values):
        state = coeff * state + (1.0 - coeff) * v
        out[i] = state
    return out


def _smooth_gain(gain_db: np.ndarray, rate: int) -> np.ndarray:
    """Gain ballistics: compression engages with the 10 ms attack constant
    and lets go with the 100 ms release constant."""
    a_attack = math.exp(-1.0 / (rate * _ATTACK_S))
    a_release = math.exp(-1.0 / (rate * _RELEASE_S))
    out = np.empty_like(gain_db)
    state = 0.0
    for i, g in enumerate(gain_db):
        coeff = a_attack if g < state else a_release
        state = coeff * state + (1.0 - coeff) * g
        out[i] = state
    return out


def compress(x: AudioBuffer, threshold_db: float, ratio: float) -> AudioBuffer:
    """Dynamic range compression: levels above threshold_db are reduced so
    out_level = T + (L - T)/ratio; below threshold the signal is untouched.

    The RMS level detector is calibrated so a full-scale sine reads 0 dBFS;
    the computed gain moves with 10 ms attack / 100 ms release.
    """
    if not threshold_db < 0:
        raise ParameterError(f"threshold must be negative dBFS, got {threshold_db}")
    if not ratio >= 1:
        raise ParameterError(f"ratio must be >= 1, got {ratio}")
    if x.frames == 0:
        return x
    power = np.mean(x.samples**2, axis=0)
    mean_square = _one_pole(power, math.exp(-1.0 / (x.sample_rate * _RMS_WINDOW_S)))
    # sine calibration: mean square A^2/2 must read as level 20*log10(A)
    level_db = 10.0 * np.log10(np.maximum(mean_square * 2.0, 1e-24))
    over = level_db > threshold_db
    gain_db = np.zeros_like(level_db)
    gain_db[over] = (threshold_db - level_db[over]) * (1.0 - 1.0 / ratio)
    gain_db = _smooth_gain(gain_db, x.sample_rate)
    return AudioBuffer(clamp(x.samples * 10.0 ** (gain_db / 20.0)), x.sample_rate)


def ring_modulate(x: AudioBuffer, carrier_hz: float) -> AudioBuffer:
    """Multiply by a sine carrier; a pure tone at f splits into sidebands
    at f +- carrier_hz."""
    nyquist = x.sample_rate / 2.0
    if not 0.0 < carrier_hz < nyquist:
        raise ParameterError(f"carrier must be in (0, {nyquist}) Hz, got {carrier_hz}")
    t = np.arange(x.frames) / x.sample_rate
    return AudioBuffer(x.samples * np.sin(2 * np.pi * carrier_hz * t), x.sample_rate)


def _one_pole_lowpass(samples: np.ndarray, cutoff_hz: float, rate: int) -> np.ndarray:
    beta = 1.0 - math.exp(-2.0 * math.pi * cutoff_hz / rate)
    out = np.empty_like(samples)
    for ch in range(samples.shape[0]):
        state = 0.0
        row = samples[ch]
        dst = out[ch]
        for i in range(row.shape[0]):
            state += beta * (row[i] - state)
            dst[i] = state
    return out


def bass_boost(x: AudioBuffer, cutoff_hz: float, gain_db: float) -> AudioBuffer:
    """Boost low frequencies: y = clamp(x + g * lowpass(x)) with
    g = 10^(gain_db/20) and a first-order low-pass at cutoff_hz."""
    if not 20.0 <= cutoff_hz <= 400.0:
        raise ParameterError(f"cutoff must be in [20, 400] Hz, got {cutoff_hz}")
    if not (math.isfinite(gain_db) and abs(gain_db) <= 40.0):
        raise ParameterError(f"|gain| must be <= 40 dB, got {gain_db}")
    g = 10.0 ** (gain_db / 20.0)
    low = _one_pole_lowpass(x.samples, cutoff_hz, x.sample_rate)
    return AudioBuffer(clamp(x.samples + g * low), x.sample_rate)


def tremolo(x: AudioBuffer, rate_hz: float, depth: float) -> AudioBuffer:
    """Periodic volume modulation: y = x * (1 + depth*sin(2*pi*rate_hz*t))
    / (1 + depth); the normalization keeps the peak at or below the input
    peak."""
    if not 0.5 <= rate_hz <= 20.0:
        raise ParameterError(f"tremolo rate must be in [0.5, 20] Hz, got {rate_hz}")
    if not 0.0 < depth <= 1.0:
        raise ParameterError(f"depth must be in (0, 1], got {depth}")
    t = np.arange(x.frames) / x.sample_rate
    envelope = (1.0 + depth * np.sin(2 * np.pi * rate_hz * t)) / (1.0 + depth)
    return AudioBuffer(x.samples * envelope, x.sample_rate)


#: default harmonic kernel; tap at 2 samples delay scaled by drive
_HARMONIC_KERNEL = (1.0, 0.0, 0.2)


def distort(
    x: AudioBuffer,
    clip_threshold: float,
    drive: float,
    kernel=None,
) -> AudioBuffer:
    """Three-stage distortion: hard clip at +-clip_threshold, convolve
    with a short harmonic kernel ([1, 0, 0.2*drive] unless overridden),
    then apply a linear 1 -> (1+drive) ramp and re-clamp. Length is
    preserved (causal FIR, tail truncated)."""
    if not 0.0 < clip_threshold <= 1.0:
        raise ParameterError(f"clip threshold must be in (0, 1], got {clip_threshold}")
    if not drive >= 0.0:
        raise ParameterError(f"drive must be >= 0, got {drive}")
    if kernel is None:
        taps = np.array([1.0, 0.0, _HARMONIC_KERNEL[2] * drive])
    else:
        taps = np.asarray(kernel, dtype=np.float64)
        if taps.ndim != 1 or taps.size == 0:
            raise ParameterError("kernel must be a nonempty 1-D sequence")
    clipped = np.clip(x.samples, -clip_threshold, clip_threshold)
    n = x.frames
    convolved = np.stack([np.convolve(ch, taps)[:n] for ch in clipped])
    ramp = np.linspace(1.0, 1.0 + drive, n) if n else np.ones(0)
    return AudioBuffer(clamp(convolved * ramp), x.sample_rate)


def echo(x: AudioBuffer, delay_s: float, decay: float, taps: int) -> AudioBuffer:
    """Feedforward delay line: y = x + sum_k decay^k * shift(x, k*delay),
    extended to hold the last tap. decay 0 is the identity."""
    if not delay_s > 0:
        raise ParameterError(f"delay must be positive, got {delay_s}")
    if not 0.0 <= decay < 1.0:
        raise ParameterError(f"decay must be in [0, 1), got {decay}")
    if not (isinstance(taps, (int, np.integer)) and taps >= 1):
        raise ParameterError(f"taps must be an integer >= 1, got {taps}")
    if decay == 0.0:
        return x
    d = int(round(delay_s * x.sample_rate))
    if d == 0:
        return x
    n_out = x.frames + taps * d
    padded = AudioBuffer(
        np.concatenate([x.samples, np.zeros((x.channels, n_out - x.frames))], axis=1),
        x.sample_rate,
    )
    acc = padded.samples.copy()
    for k in range(1, taps + 1):
        acc += decay**k * time_shift(padded, k * d / x.sample_rate).samples
    return AudioBuffer(clamp(acc), x.sample_rate)


def reverb(x: AudioBuffer, intensity: float, duration_s: float, seed: int) -> AudioBuffer:
    """Convolve with a synthetic impulse response: a unit leading tap plus
    seed-deterministic noise under a 60 dB exponential decay over
    duration_s, scaled by intensity. Output length is the full convolution
    length."""
    if not intensity >= 0.0:
        raise ParameterError(f"intensity must be >= 0, got {intensity}")
    if not duration_s >= 0.0:
        raise ParameterError(f"duration must be >= 0, got {duration_s}")
    rate = x.sample_rate
    ir_len = int(round(duration_s * rate))
    h = np.zeros(1 + ir_len)
    h[0] = 1.0
    if ir_len and intensity > 0.0:
        t = np.arange(ir_len) / rate
        envelope = 10.0 ** (-3.0 * t / duration_s)  # -60 dB across the tail
        rng = np.random.default_rng(seed)
        h[1:] = intensity * rng.standard_normal(ir_len) * envelope
    n_out = x.frames + h.size - 1
    size = 1
    while size < n_out:
        size *= 2
    spectrum_h = np.fft.rfft(h, size)
    out = np.stack(
        [np.fft.irfft(np.fft.rfft(ch, size) * spectrum_h, size)[:n_out] for ch in x.samples]
    )
    return AudioBuffer(clamp(out), x.sample_rate)
