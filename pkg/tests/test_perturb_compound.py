"""Compound perturbations: contract examples plus spectral/energy oracles."""

import math

import numpy as np
import pytest

from audiomorph.audio import AudioBuffer, rms, spectrum
from audiomorph.errors import ParameterError
from audiomorph.perturb import compound
from .conftest import envelope_period_s, sine

RATE = 16000


def _peak_dbfs(samples):
    return 20 * math.log10(np.max(np.abs(samples)))


def _top_two_peak_freqs(buf, fft_size):
    spec = spectrum(buf, fft_size)
    mags = spec.magnitudes.copy()
    first = int(np.argmax(mags))
    # suppress the first peak's neighborhood before finding the second
    lo, hi = max(0, first - 5), first + 6
    mags[lo:hi] = 0
    second = int(np.argmax(mags))
    return sorted([spec.bin_frequencies[first], spec.bin_frequencies[second]])


class TestCompress:
    def test_steady_state_peak(self):
        buf = sine(440.0, amplitude=1.0, duration_s=1.5)
        out = compound.compress(buf, threshold_db=-20.0, ratio=4.0)
        tail = out.samples[:, -RATE // 4 :]
        # gain law: level 0 dBFS over a -20 threshold at 4:1 lands at -15
        assert _peak_dbfs(tail) == pytest.approx(-15.0, abs=1.0)

    def test_below_threshold_identity(self):
        buf = sine(440.0, amplitude=0.05)  # -26 dBFS, under the threshold
        out = compound.compress(buf, threshold_db=-20.0, ratio=4.0)
        assert np.max(np.abs(out.samples - buf.samples)) < 1e-6

    def test_crest_factor_decreases(self):
        # speech-like: a carrier under smooth syllabic (2 Hz) modulation;
        # crest measured past the cold-start gain transient
        t = np.arange(3 * RATE) / RATE
        carrier = np.sin(2 * np.pi * 220 * t)
        syllables = 0.1 + 0.9 * np.abs(np.sin(2 * np.pi * 2 * t))
        buf = AudioBuffer(0.9 * carrier * syllables, RATE)
        out = compound.compress(buf, threshold_db=-20.0, ratio=4.0)
        skip = RATE // 2

        def crest(samples):
            return np.max(np.abs(samples)) / np.sqrt(np.mean(samples**2))

        assert crest(out.samples[:, skip:]) < crest(buf.samples[:, skip:])

    @pytest.mark.parametrize("kwargs", [dict(threshold_db=0.0, ratio=4.0), dict(threshold_db=-20.0, ratio=0.5)])
    def test_invalid_params(self, tone_440, kwargs):
        with pytest.raises(ParameterError):
            compound.compress(tone_440, **kwargs)


class TestRingModulate:
    def test_sidebands(self):
        buf = sine(440.0, duration_s=1.5)
        out = compound.ring_modulate(buf, 30.0)
        resolution = RATE / 16384
        low, high = _top_two_peak_freqs(out, 16384)
        assert low == pytest.approx(410.0, abs=resolution)
        assert high == pytest.approx(470.0, abs=resolution)

    def test_silence_passthrough(self):
        buf = AudioBuffer(np.zeros(RATE), RATE)
        assert not np.any(compound.ring_modulate(buf, 100.0).samples)

    def test_energy_halves(self):
        # 1 s at 30 Hz carrier = 30 whole periods
        buf = sine(440.0, duration_s=1.0)
        out = compound.ring_modulate(buf, 30.0)
        assert np.sum(out.samples**2) == pytest.approx(np.sum(buf.samples**2) / 2, rel=0.02)

    @pytest.mark.parametrize("carrier", [0.0, -5.0, 8000.0, 9000.0])
    def test_invalid_carrier(self, tone_440, carrier):
        with pytest.raises(ParameterError):
            compound.ring_modulate(tone_440, carrier)


class TestBassBoost:
    def test_passband_boost(self):
        buf = sine(50.0, amplitude=0.2, duration_s=1.0)
        out = compound.bass_boost(buf, cutoff_hz=200.0, gain_db=6.0)
        skip = RATE // 10  # drop the filter warmup
        ratio = np.sqrt(np.mean(out.samples[:, skip:] ** 2) / np.mean(buf.samples[:, skip:] ** 2))
        expected = 1.0 + 10 ** (6.0 / 20.0)
        assert abs(ratio - expected) <= 0.1 * expected

    def test_stopband_flat(self):
        buf = sine(4000.0, amplitude=0.2, duration_s=1.0)
        out = compound.bass_boost(buf, cutoff_hz=200.0, gain_db=6.0)
        skip = RATE // 10
        ratio_db = 20 * math.log10(
            np.sqrt(np.mean(out.samples[:, skip:] ** 2)) / np.sqrt(np.mean(buf.samples[:, skip:] ** 2))
        )
        assert abs(ratio_db) <= 1.0

    def test_silence_passthrough(self):
        buf = AudioBuffer(np.zeros(RATE), RATE)
        assert not np.any(compound.bass_boost(buf, 200.0, 0.0).samples)

    @pytest.mark.parametrize("kwargs", [dict(cutoff_hz=10.0, gain_db=6.0), dict(cutoff_hz=500.0, gain_db=6.0), dict(cutoff_hz=200.0, gain_db=math.inf)])
    def test_invalid_params(self, tone_440, kwargs):
        with pytest.raises(ParameterError):
            compound.bass_boost(tone_440, **kwargs)


class TestTremolo:
    def test_small_depth_near_identity(self, tone_440):
        out = compound.tremolo(tone_440, 4.0, depth=1e-6)
        assert np.max(np.abs(out.samples - tone_440.samples)) < 1e-5

    def test_envelope_period(self):
        buf = AudioBuffer(np.full(2 * RATE, 0.5), RATE)
        out = compound.tremolo(buf, 4.0, depth=0.8)
        period = envelope_period_s(out.samples[0], RATE, max_lag_s=0.4)
        assert period == pytest.approx(0.25, rel=0.05)

    def test_peak_never_exceeds_input(self):
        rng = np.random.default_rng(4)
        buf = AudioBuffer(rng.uniform(-0.9, 0.9, RATE), RATE)
        out = compound.tremolo(buf, 4.0, depth=1.0)
        assert np.max(np.abs(out.samples)) <= np.max(np.abs(buf.samples)) + 1e-12

    @pytest.mark.parametrize("kwargs", [dict(rate_hz=0.1, depth=0.5), dict(rate_hz=25.0, depth=0.5), dict(rate_hz=4.0, depth=0.0), dict(rate_hz=4.0, depth=1.5)])
    def test_invalid_params(self, tone_440, kwargs):
        with pytest.raises(ParameterError):
            compound.tremolo(tone_440, **kwargs)


class TestDistort:
    def test_clip_peak_exact(self):
        buf = sine(440.0, amplitude=1.0)
        out = compound.distort(buf, clip_threshold=0.5, drive=0.0)
        assert np.max(np.abs(out.samples)) == 0.5

    def test_third_harmonic(self):
        buf = sine(440.0, amplitude=1.0, duration_s=1.5)
        out = compound.distort(buf, clip_threshold=0.5, drive=0.0)
        spec = spectrum(out, 16384)
        third_bin = int(round(1320.0 / spec.resolution))
        window = spec.magnitudes[third_bin - 2 : third_bin + 3]
        floor = np.median(spec.magnitudes)
        assert 20 * math.log10(np.max(window) / floor) >= 20.0

    def test_identity_configuration(self, tone_440):
        out = compound.distort(tone_440, clip_threshold=1.0, drive=0.0)
        assert np.array_equal(out.samples, tone_440.samples)

    def test_custom_kernel(self, tone_440):
        out = compound.distort(tone_440, 1.0, 0.0, kernel=[0.5])
        assert np.allclose(out.samples, tone_440.samples * 0.5)

    def test_ramp_raises_tail(self):
        buf = AudioBuffer(np.full(RATE, 0.25), RATE)
        out = compound.distort(buf, clip_threshold=1.0, drive=1.0)
        # ramp runs 1 -> 2, kernel adds 0.2*drive two samples late
        assert out.samples[0, -1] == pytest.approx(0.25 * 1.2 * 2.0, rel=1e-6)

    @pytest.mark.parametrize("kwargs", [dict(clip_threshold=0.0, drive=0.0), dict(clip_threshold=1.5, drive=0.0), dict(clip_threshold=0.5, drive=-1.0)])
    def test_invalid_params(self, tone_440, kwargs):
        with pytest.raises(ParameterError):
            compound.distort(tone_440, **kwargs)


class TestEcho:
    def test_impulse_taps(self):
        data = np.zeros(RATE)
        data[0] = 1.0
        buf = AudioBuffer(data, RATE)
        out = compound.echo(buf, delay_s=0.25, decay=0.5, taps=2)
        d = int(0.25 * RATE)
        assert out.frames == RATE + 2 * d
        assert out.samples[0, 0] == pytest.approx(1.0, abs=1e-6)
        assert out.samples[0, d] == pytest.approx(0.5, abs=1e-6)
        assert out.samples[0, 2 * d] == pytest.approx(0.25, abs=1e-6)
        others = out.samples.copy()
        for idx in (0, d, 2 * d):
            others[0, idx] = 0.0
        assert np.max(np.abs(others)) < 1e-12

    def test_zero_decay_identity(self, tone_440):
        out = compound.echo(tone_440, 0.25, 0.0, 2)
        assert out.frames == tone_440.frames
        assert np.array_equal(out.samples, tone_440.samples)

    def test_autocorrelation_peak_at_delay(self):
        rng = np.random.default_rng(12)
        buf = AudioBuffer(np.clip(0.4 * rng.standard_normal(RATE // 2), -1, 1), RATE)
        out = compound.echo(buf, delay_s=0.25, decay=0.6, taps=1)
        x = out.samples[0]
        ac = np.correlate(x, x, mode="full")[x.size - 1 :]
        floor = int(0.1 * RATE)
        lag = floor + int(np.argmax(ac[floor : int(0.4 * RATE)]))
        assert abs(lag - int(0.25 * RATE)) <= 1

    @pytest.mark.parametrize("kwargs", [dict(delay_s=0.0, decay=0.5, taps=1), dict(delay_s=0.1, decay=1.0, taps=1), dict(delay_s=0.1, decay=0.5, taps=0)])
    def test_invalid_params(self, tone_440, kwargs):
        with pytest.raises(ParameterError):
            compound.echo(tone_440, **kwargs)


class TestReverb:
    def test_zero_intensity_identity_on_original_span(self, tone_440):
        out = compound.reverb(tone_440, intensity=0.0, duration_s=0.3, seed=1)
        ir_len = int(0.3 * RATE)
        assert out.frames == tone_440.frames + ir_len  # n + (1 + ir_len) - 1
        assert np.allclose(out.samples[:, : tone_440.frames], tone_440.samples, atol=1e-12)
        assert np.max(np.abs(out.samples[:, tone_440.frames :])) < 1e-12

    def test_convolution_length(self, tone_440):
        out = compound.reverb(tone_440, intensity=0.3, duration_s=0.2, seed=7)
        assert out.frames == tone_440.frames + int(0.2 * RATE)

    def test_tail_decays_monotonically(self):
        data = np.zeros(RATE // 4)
        data[0] = 0.5
        buf = AudioBuffer(data, RATE)
        out = compound.reverb(buf, intensity=0.4, duration_s=0.3, seed=3)
        window = int(0.05 * RATE)
        tail = out.samples[0, 1:]  # skip the unit tap
        energies = [
            float(np.sum(tail[k * window : (k + 1) * window] ** 2))
            for k in range(int(0.3 / 0.05))
        ]
        assert all(a > b for a, b in zip(energies, energies[1:]))

    def test_seed_deterministic(self, tone_440):
        a = compound.reverb(tone_440, 0.3, 0.2, seed=9)
        b = compound.reverb(tone_440, 0.3, 0.2, seed=9)
        assert np.array_equal(a.samples, b.samples)
        c = compound.reverb(tone_440, 0.3, 0.2, seed=10)
        assert np.max(np.abs(a.samples - c.samples)) > 0

    @pytest.mark.parametrize("kwargs", [dict(intensity=-0.1, duration_s=0.3, seed=1), dict(intensity=0.3, duration_s=-1.0, seed=1)])
    def test_invalid_params(self, tone_440, kwargs):
        with pytest.raises(ParameterError):
            compound.reverb(tone_440, **kwargs)
