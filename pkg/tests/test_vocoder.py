import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from earbench.signal import SignalError, Waveform, rms
from earbench.vocoder import (
    Band,
    Electrodogram,
    VocoderConfig,
    VocoderConfigError,
    analyze_spectrum,
    apply_filterbank,
    default_band_table,
    electrodogram,
    frame_signal,
    map_dynamic_range,
    select_maxima,
    synthesize_sine,
    vocode,
)


@pytest.fixture(scope="module")
def cfg():
    return VocoderConfig()


def brute_dft_onesided(frame):
    """O(n^2) DFT sum, bins 0..n/2."""
    n = len(frame)
    out = np.zeros(n // 2 + 1, dtype=complex)
    for k in range(n // 2 + 1):
        for t, x in enumerate(frame):
            out[k] += x * np.exp(-2j * np.pi * k * t / n)
    return out


class TestConfig:
    def test_defaults(self, cfg):
        assert cfg.fft_size == 128
        assert cfg.hop == 32
        assert cfg.num_bins == 65
        assert len(cfg.band_table) == 22

    def test_band_table_covers_2_to_64(self, cfg):
        bins = sorted(b for band in cfg.band_table for b in band.bins)
        assert bins == list(range(2, 65))

    def test_centers_strictly_increasing_below_nyquist(self, cfg):
        centers = cfg.center_frequencies()
        assert np.all(np.diff(centers) > 0)
        assert centers[-1] < 8000

    def test_rejects_bad_num_selected(self):
        with pytest.raises(VocoderConfigError):
            VocoderConfig(num_selected=0)
        with pytest.raises(VocoderConfigError):
            VocoderConfig(num_selected=23)

    def test_rejects_threshold_above_comfort(self):
        with pytest.raises(VocoderConfigError):
            VocoderConfig(threshold_level=(2.0,) * 22)

    def test_rejects_overlapping_bands(self):
        bands = list(default_band_table())
        bad = Band(bins=(2,), weights=(1.0,), center_hz=bands[1].center_hz + 1)
        with pytest.raises(VocoderConfigError, match="two bands"):
            VocoderConfig(band_table=tuple([bands[0], bad] + bands[2:]))

    def test_json_roundtrip(self, cfg):
        again = VocoderConfig.from_json(cfg.to_json())
        assert again == cfg

    def test_json_roundtrip_with_options(self):
        cfg = VocoderConfig(pre_emphasis=0.97, envelope_interp="hold").with_random_phases(3)
        assert VocoderConfig.from_json(cfg.to_json()) == cfg

    def test_pre_emphasis_validation(self):
        with pytest.raises(VocoderConfigError):
            VocoderConfig(pre_emphasis=1.5)

    def test_pre_emphasis_changes_low_bands(self, speechlike):
        plain = electrodogram(speechlike, VocoderConfig())
        emphasized = electrodogram(speechlike, VocoderConfig(pre_emphasis=0.97))
        # high-pass: low-channel energy share must drop
        def low_share(eg):
            total = eg.envelopes.sum()
            return eg.envelopes[:5].sum() / total

        assert low_share(emphasized) < low_share(plain)

    def test_random_phases_change_waveform_not_rms(self, speechlike):
        base = vocode(speechlike, VocoderConfig(), 0.08)
        alt = vocode(speechlike, VocoderConfig().with_random_phases(7), 0.08)
        assert not np.array_equal(base.samples, alt.samples)
        assert rms(alt) == pytest.approx(0.08, rel=1e-9)


class TestFraming:
    def test_frame_count_160_samples(self, cfg):
        frames = frame_signal(Waveform(np.ones(160), 16000), cfg)
        assert frames.shape == (5, 128)

    def test_first_frame_is_windowed_input(self, cfg):
        x = np.random.default_rng(0).normal(size=128)
        frames = frame_signal(Waveform(x, 16000), cfg)
        np.testing.assert_allclose(frames[0], x * cfg.window())

    def test_rect_constant_full_frames(self):
        cfg = VocoderConfig(analysis_window="rect")
        frames = frame_signal(Waveform(np.ones(160), 16000), cfg)
        # frames starting at 0 and 32 lie fully inside the signal
        assert np.all(frames[0] == 1.0)
        assert np.all(frames[1] == 1.0)
        # the rest carry zero padding at the tail
        assert frames[4, -32:].sum() == 0

    def test_rate_mismatch(self, cfg):
        with pytest.raises(SignalError):
            frame_signal(Waveform(np.ones(64), 48000), cfg)


class TestSpectrum:
    def test_zero_frame(self):
        np.testing.assert_array_equal(analyze_spectrum(np.zeros(128)), np.zeros(65))

    def test_cosine_at_bin4_concentrates(self):
        t = np.arange(128)
        frame = np.cos(2 * np.pi * 4 * t / 128)  # rect window, exactly bin 4
        spec = np.abs(analyze_spectrum(frame))
        peak = spec[4]
        others = np.delete(spec, 4)
        assert np.all(others < 1e-9 * peak)

    def test_matches_brute_force(self, rng):
        frame = rng.normal(size=128)
        fast = analyze_spectrum(frame)
        slow = brute_dft_onesided(frame)
        np.testing.assert_allclose(fast, slow, atol=1e-9)

    def test_wrong_length(self):
        with pytest.raises(VocoderConfigError):
            analyze_spectrum(np.zeros(64))


class TestFilterbank:
    def test_zero_in_zero_out(self, cfg):
        np.testing.assert_array_equal(apply_filterbank(np.zeros(65), cfg), np.zeros(22))

    def test_unit_bin_maps_to_owner_band(self, cfg):
        mags = np.zeros(65)
        mags[cfg.band_table[7].bins[0]] = 1.0
        env = apply_filterbank(mags, cfg)
        assert env[7] == pytest.approx(1.0)
        assert np.count_nonzero(env) == 1

    def test_matches_direct_sum(self, cfg, rng):
        mags = rng.random(65)
        env = apply_filterbank(mags, cfg)
        for i, band in enumerate(cfg.band_table):
            direct = np.sqrt(sum(w * mags[b] ** 2 for b, w in zip(band.bins, band.weights)))
            assert env[i] == pytest.approx(direct, abs=1e-12)

    @given(scale=st.floats(min_value=1e-6, max_value=1e6))
    @settings(max_examples=20, deadline=None)
    def test_amplitude_homogeneous(self, cfg, scale):
        rng = np.random.default_rng(99)
        mags = rng.random(65)
        base = apply_filterbank(mags, cfg)
        scaled = apply_filterbank(mags * scale, cfg)
        np.testing.assert_allclose(scaled, base * scale, rtol=1e-9)


class TestSelectMaxima:
    def test_single_nonzero_ties_to_low_indices(self):
        env = np.zeros(22)
        env[13] = 1.0
        mask = select_maxima(env, 6)
        assert mask[13]
        assert list(np.nonzero(mask)[0]) == [0, 1, 2, 3, 4, 13]

    def test_strictly_decreasing(self):
        env = np.linspace(22, 1, 22)
        mask = select_maxima(env, 8)
        assert list(np.nonzero(mask)[0]) == list(range(8))

    @given(seed=st.integers(0, 2**20), n=st.integers(1, 22))
    @settings(max_examples=60, deadline=None)
    def test_matches_sort_oracle(self, seed, n):
        env = np.random.default_rng(seed).integers(0, 5, size=22).astype(float)
        mask = select_maxima(env, n)
        assert mask.sum() == n
        # sort oracle with the same tie-break: by (-value, index)
        expect = sorted(range(22), key=lambda i: (-env[i], i))[:n]
        assert sorted(np.nonzero(mask)[0]) == sorted(expect)
        # every selected envelope >= every unselected one
        assert env[mask].min() >= env[~mask].max() if n < 22 else True

    def test_n_out_of_range(self):
        with pytest.raises(VocoderConfigError):
            select_maxima(np.ones(22), 0)


class TestDynamicRange:
    def test_sub_threshold_zeroed(self, cfg):
        env = np.full(22, cfg.threshold_level[0] / 2)
        out = map_dynamic_range(env, np.ones(22, dtype=bool), cfg)
        assert np.all(out == 0)

    def test_above_comfort_clipped(self, cfg):
        env = np.full(22, 2.0 * cfg.comfort_level[0])
        out = map_dynamic_range(env, np.ones(22, dtype=bool), cfg)
        np.testing.assert_array_equal(out, cfg.comfort_level)

    def test_in_range_passthrough(self, cfg):
        env = np.full(22, 0.3)
        out = map_dynamic_range(env, np.ones(22, dtype=bool), cfg)
        np.testing.assert_array_equal(out, env)

    def test_unselected_zeroed(self, cfg):
        env = np.full(22, 0.3)
        mask = np.zeros(22, dtype=bool)
        mask[4] = True
        out = map_dynamic_range(env, mask, cfg)
        assert out[4] == 0.3
        assert np.count_nonzero(out) == 1

    @given(seed=st.integers(0, 2**16))
    @settings(max_examples=40, deadline=None)
    def test_monotone_and_bounded(self, cfg, seed):
        rng = np.random.default_rng(seed)
        lo = rng.uniform(0, 2.0, 22)
        hi = lo + rng.uniform(0, 2.0, 22)
        mask = rng.random(22) < 0.7
        out_lo = map_dynamic_range(lo, mask, cfg)
        out_hi = map_dynamic_range(hi, mask, cfg)
        assert np.all(out_hi >= out_lo)
        assert np.all(out_hi >= 0)
        assert np.all(out_hi <= np.asarray(cfg.comfort_level))


class TestSynthesis:
    def test_zero_egram_is_silence(self, cfg):
        eg = Electrodogram(np.zeros((22, 50)), 2.0, cfg)
        out = synthesize_sine(eg)
        assert len(out) == 50 * 32
        assert np.all(out.samples == 0)

    def test_constant_single_channel_is_pure_tone(self, cfg):
        # FFT-peak oracle: line at the band center, spurs < -40 dB
        ch, cycles = 9, 500
        env = np.zeros((22, cycles))
        env[ch] = 1.0
        out = synthesize_sine(Electrodogram(env, 2.0, cfg))
        fc = cfg.band_table[ch].center_hz
        n = len(out)
        spec = np.abs(np.fft.rfft(out.samples * np.blackman(n)))
        freqs = np.fft.rfftfreq(n, 1 / 16000)
        peak_idx = int(np.argmax(spec))
        assert abs(freqs[peak_idx] - fc) <= 2.0
        away = np.abs(freqs - fc) > 20.0
        assert np.all(spec[away] < 10 ** (-40 / 20) * spec[peak_idx])

    def test_two_channel_power_additivity(self, cfg):
        env = np.zeros((22, 500))
        env[0] = 0.7  # 250 Hz
        env[20] = 0.4  # 6937.5 Hz
        out = synthesize_sine(Electrodogram(env, 2.0, cfg))
        r1 = 0.7 / np.sqrt(2)
        r2 = 0.4 / np.sqrt(2)
        assert rms(out) == pytest.approx(np.sqrt(r1**2 + r2**2), abs=1e-3)

    def test_hold_interpolation(self):
        cfg = VocoderConfig(envelope_interp="hold")
        env = np.zeros((22, 4))
        env[0] = [1.0, 0.0, 1.0, 0.0]
        out = synthesize_sine(Electrodogram(env, 2.0, cfg))
        # second cycle exactly silent under zero-order hold
        assert np.all(out.samples[32:64] == 0)


class TestVocode:
    @pytest.mark.parametrize("n", [6, 12])
    def test_nonzero_channels_per_cycle(self, n, speechlike):
        cfg = VocoderConfig(num_selected=n)
        eg = electrodogram(speechlike, cfg)
        counts = eg.nonzero_counts()
        above = np.count_nonzero(
            apply_filterbank(
                np.abs(analyze_spectrum(frame_signal(speechlike, cfg), 128))
                * (2.0 / np.sum(cfg.window())),
                cfg,
            )
            >= cfg.threshold_level[0],
            axis=1,
        )
        expect = np.minimum(above, n)
        np.testing.assert_array_equal(counts, expect)
        assert np.all(counts <= n)

    def test_deterministic(self, speechlike, cfg):
        a = vocode(speechlike, cfg, 0.08)
        b = vocode(speechlike, cfg, 0.08)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_output_rms(self, speechlike, cfg):
        out = vocode(speechlike, cfg, 0.08)
        assert rms(out) == pytest.approx(0.08, rel=1e-9)

    def test_line_spectrum_mass(self, speechlike, cfg):
        # spectral-mass oracle: >= 90% of energy within 125 Hz of the centers
        out = vocode(speechlike, cfg, 0.08)
        spec = np.abs(np.fft.rfft(out.samples)) ** 2
        freqs = np.fft.rfftfreq(len(out), 1 / 16000)
        near = np.zeros(len(freqs), dtype=bool)
        for fc in cfg.center_frequencies():
            near |= np.abs(freqs - fc) <= 125.0
        assert spec[near].sum() / spec.sum() >= 0.90

    def test_silent_input_rejected(self, cfg):
        with pytest.raises(SignalError):
            vocode(Waveform(np.zeros(1600), 16000), cfg, 0.08)

    def test_selection_set_scale_invariant(self, speechlike, cfg):
        eg1 = electrodogram(speechlike, cfg)
        scaled = Waveform(speechlike.samples * 0.25, 16000)
        eg2 = electrodogram(scaled, cfg)
        np.testing.assert_array_equal(eg1.envelopes != 0, eg2.envelopes != 0)
