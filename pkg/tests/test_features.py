import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.fftpack import dct, idct

from farfield.features import (
    LOG_MEL,
    MFCC,
    FeatureMatrix,
    FrameConfig,
    FrameMask,
    MelConfig,
    VadConfig,
    Waveform,
    apply_mask,
    energy_vad,
    frame_log_energy,
    log_mel,
    mel_filterbank,
    mfcc_from_logmel,
    num_frames,
    short_time_mean_center,
    stft,
)

SR = 16000


def tone(freq, seconds=1.0, amp=0.5):
    t = np.arange(int(seconds * SR)) / SR
    return Waveform(amp * np.sin(2 * np.pi * freq * t), SR)


class TestWaveform:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Waveform(np.array([0.0, np.nan]), SR)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            Waveform(np.zeros(10), 0)


class TestStft:
    def test_zero_one_second_gives_98x257_zeros(self):
        s = stft(Waveform(np.zeros(SR), SR), FrameConfig())
        assert s.shape == (98, 257)
        assert not s.any()

    def test_frame_count_formula_random_lengths(self, rng):
        for _ in range(200):
            frame_length = int(rng.integers(2, 512))
            frame_shift = int(rng.integers(1, frame_length + 1))
            n = int(rng.integers(frame_length, 20000))
            expected = (n - frame_length) // frame_shift + 1
            assert num_frames(n, frame_length, frame_shift) == expected

    def test_dc_frame_concentrates_in_bin_zero(self):
        w = Waveform(np.ones(400) * 0.5, SR)
        s = stft(w, FrameConfig())
        mags = np.abs(s[0])
        assert mags.argmax() == 0

    def test_1khz_tone_peaks_at_bin_32(self):
        s = stft(tone(1000), FrameConfig())
        assert (np.abs(s).argmax(axis=1) == 32).all()  # 1000*512/16000

    def test_too_short_rejected(self):
        with pytest.raises(ValueError, match="too short"):
            stft(Waveform(np.zeros(399), SR), FrameConfig())


class TestLogMel:
    def test_zero_input_hits_log_floor(self):
        m = log_mel(Waveform(np.zeros(SR), SR), FrameConfig(), MelConfig())
        assert m.values.shape == (98, 40)
        assert_allclose(m.values, np.log(1e-10))

    def test_one_second_is_98x40(self):
        m = log_mel(tone(440), FrameConfig(), MelConfig())
        assert m.values.shape == (98, 40)
        assert m.feature_kind == LOG_MEL

    def test_tone_at_filter_center_wins_that_filter(self):
        # oracle: locate each filter's peak bin from the filterbank matrix itself
        mcfg = MelConfig()
        fbank = mel_filterbank(mcfg, 512, SR)
        for k in (0, 5, 13, 26, 39):
            peak_bin = fbank[k].argmax()
            freq = peak_bin * SR / 512
            feats = log_mel(tone(freq), FrameConfig(), mcfg)
            assert (feats.values.argmax(axis=1) == k).all()

    def test_polarity_flip_invariance(self, rng):
        x = rng.standard_normal(SR) * 0.1
        a = log_mel(Waveform(x, SR), FrameConfig(), MelConfig())
        b = log_mel(Waveform(-x, SR), FrameConfig(), MelConfig())
        assert_allclose(a.values, b.values, atol=1e-10)


class TestMfcc:
    def test_zero_matrix_maps_to_zero(self):
        out = mfcc_from_logmel(FeatureMatrix(np.zeros((5, 40))), 13)
        assert out.feature_kind == MFCC
        assert not out.values.any()

    def test_all_ones_frame_gives_only_c0_sqrt_f(self):
        out = mfcc_from_logmel(FeatureMatrix(np.ones((3, 40))), 40)
        assert_allclose(out.values[:, 0], np.sqrt(40))
        assert_allclose(out.values[:, 1:], 0, atol=1e-12)

    def test_full_dct_invertible(self, rng):
        x = FeatureMatrix(rng.standard_normal((11, 40)))
        c = mfcc_from_logmel(x, 40)
        back = idct(c.values, type=2, norm="ortho", axis=1)
        assert_allclose(back, x.values, atol=1e-6)

    def test_nceps_above_dim_rejected(self):
        with pytest.raises(ValueError):
            mfcc_from_logmel(FeatureMatrix(np.zeros((2, 40))), 41)

    def test_dct_orthonormal_for_all_dims_to_64(self):
        for f in range(1, 65):
            m = dct(np.eye(f), type=2, norm="ortho", axis=1)
            assert_allclose(m @ m.T, np.eye(f), atol=1e-6)


class TestEnergyVad:
    def _matrix_with_energies(self, energies):
        # logsumexp of each constant row equals the requested frame energy
        vals = np.array(energies)[:, None] - np.log(40.0) + np.zeros((1, 40))
        return FeatureMatrix(vals)

    def test_two_level_keeps_high_half(self):
        # oracle: explicit thresholding of the two-level energy sequence
        e_hi = 12.0
        e_lo = e_hi - np.log(1000.0)
        energies = [e_hi] * 10 + [e_lo] * 10
        cfg = VadConfig()
        threshold = cfg.offset + cfg.mean_scale * np.mean(energies)
        expected = [e > threshold for e in energies]
        assert expected == [True] * 10 + [False] * 10
        mask = energy_vad(self._matrix_with_energies(energies), cfg)
        assert mask.keep.tolist() == expected

    def test_constant_energy_all_dropped_at_boundary(self):
        mask = energy_vad(self._matrix_with_energies([3.0] * 8),
                          VadConfig(mean_scale=1.0, offset=0.0))
        assert not mask.keep.any()  # strict inequality at the threshold

    def test_mask_length_matches_frames(self, rng):
        for t in (1, 2, 17, 100):
            x = FeatureMatrix(rng.standard_normal((t, 40)))
            assert len(energy_vad(x)) == t

    def test_gain_invariance_mean_relative_zero_offset(self, rng):
        # pure mean-relative threshold: log-energy shifts from gain cancel
        cfg = VadConfig(mean_scale=1.0, offset=0.0)
        x = rng.standard_normal(SR) * 0.05
        a = energy_vad(log_mel(Waveform(x, SR), FrameConfig(), MelConfig()), cfg)
        b = energy_vad(log_mel(Waveform(7.3 * x, SR), FrameConfig(), MelConfig()), cfg)
        assert (a.keep == b.keep).all()

    def test_mfcc_uses_c0(self, rng):
        x = FeatureMatrix(rng.standard_normal((6, 13)), MFCC)
        assert_allclose(frame_log_energy(x), x.values[:, 0])


class TestMeanCentering:
    def test_constant_matrix_becomes_zero(self):
        x = FeatureMatrix(np.full((9, 4), 3.7))
        out = short_time_mean_center(x, 5)
        assert_allclose(out.values, 0, atol=1e-12)

    def test_wide_window_equals_global_mean_subtraction(self, rng):
        x = FeatureMatrix(rng.standard_normal((10, 3)))
        out = short_time_mean_center(x, 2 * 10 - 1)
        assert_allclose(out.values, x.values - x.values.mean(axis=0), atol=1e-12)

    def test_matches_bruteforce_window_means(self, rng):
        x = FeatureMatrix(rng.standard_normal((10, 3)))
        out = short_time_mean_center(x, 5)
        for t in range(10):
            lo, hi = max(0, t - 2), min(10, t + 3)
            expected = x.values[t] - x.values[lo:hi].mean(axis=0)
            assert_allclose(out.values[t], expected, atol=1e-12)

    def test_idempotent_for_global_window(self, rng):
        x = FeatureMatrix(rng.standard_normal((8, 5)))
        once = short_time_mean_center(x, 15)
        twice = short_time_mean_center(once, 15)
        assert_allclose(twice.values, once.values, atol=1e-6)

    def test_even_window_rejected(self):
        with pytest.raises(ValueError):
            short_time_mean_center(FeatureMatrix(np.zeros((4, 2))), 4)


class TestApplyMask:
    def test_drops_marked_frames(self, rng):
        x = FeatureMatrix(rng.standard_normal((6, 2)))
        mask = FrameMask(np.array([True, False, True, True, False, True]))
        out = apply_mask(x, mask)
        assert_allclose(out.values, x.values[[0, 2, 3, 5]])

    def test_length_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            apply_mask(FeatureMatrix(rng.standard_normal((4, 2))), FrameMask(np.ones(5, bool)))
