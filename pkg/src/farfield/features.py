"""Waveform-to-feature front end: STFT, 40-D log-mel, MFCC, energy VAD, mean centering."""

from dataclasses import dataclass

import numpy as np
from scipy.fftpack import dct

# 25 ms frames / 10 ms shift at 16 kHz.
DEFAULT_FRAME_LENGTH = 400
DEFAULT_FRAME_SHIFT = 160
DEFAULT_FFT_SIZE = 512
DEFAULT_N_MELS = 40
DEFAULT_LOG_FLOOR = 1e-10
DEFAULT_CENTERING_WINDOW = 301

LOG_MEL = "log_mel"
MFCC = "mfcc"


@dataclass(frozen=True)
class Waveform:
    """Mono audio signal with its sample rate; amplitudes nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if samples.ndim != 1:
            raise ValueError(f"expected mono 1-D samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class FrameConfig:
    frame_length: int = DEFAULT_FRAME_LENGTH
    frame_shift: int = DEFAULT_FRAME_SHIFT
    window: str = "povey"
    fft_size: int = DEFAULT_FFT_SIZE

    def __post_init__(self):
        if not 0 < self.frame_shift <= self.frame_length <= self.fft_size:
            raise ValueError(
                "require 0 < frame_shift <= frame_length <= fft_size, got "
                f"shift={self.frame_shift} length={self.frame_length} fft={self.fft_size}"
            )


@dataclass(frozen=True)
class MelConfig:
    n_filters: int = DEFAULT_N_MELS
    f_min: float = 20.0
    f_max: float | None = None  # None = Nyquist
    log_floor: float = DEFAULT_LOG_FLOOR

    def __post_init__(self):
        if self.n_filters < 1:
            raise ValueError("n_filters must be >= 1")
        if self.f_min < 0:
            raise ValueError("f_min must be >= 0")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")


@dataclass(frozen=True)
class VadConfig:
    """Frame selection threshold: keep if log-energy > offset + mean_scale * mean(log-energy)."""

    mean_scale: float = 0.5
    offset: float = 5.5


@dataclass(frozen=True)
class FeatureMatrix:
    """T x F matrix of frames; feature_kind is 'log_mel' or 'mfcc'."""

    values: np.ndarray
    feature_kind: str = LOG_MEL

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"expected T x F matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature matrix contains non-finite entries")
        if self.feature_kind not in (LOG_MEL, MFCC):
            raise ValueError(f"unknown feature_kind {self.feature_kind!r}")
        object.__setattr__(self, "values", values)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_dims(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FrameMask:
    keep: np.ndarray

    def __post_init__(self):
        keep = np.asarray(self.keep, dtype=bool)
        if keep.ndim != 1:
            raise ValueError("mask must be a 1-D boolean vector")
        object.__setattr__(self, "keep", keep)

    def __len__(self):
        return len(self.keep)


def num_frames(n_samples: int, frame_length: int, frame_shift: int) -> int:
    """Number of complete frames for an n_samples signal (no padding)."""
    if n_samples < frame_length:
        return 0
    return (n_samples - frame_length) // frame_shift + 1


def window_function(name: str, length: int) -> np.ndarray:
    n = np.arange(length)
    if name == "povey":
        return (0.5 - 0.5 * np.cos(2 * np.pi * n / (length - 1))) ** 0.85
    if name == "hamming":
        return 0.54 - 0.46 * np.cos(2 * np.pi * n / (length - 1))
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2 * np.pi * n / (length - 1))
    if name == "rectangular":
        return np.ones(length)
    raise ValueError(f"unknown window {name!r}")


def frame_signal(samples: np.ndarray, frame_length: int, frame_shift: int) -> np.ndarray:
    """Slice a signal into overlapping frames, shape (T, frame_length)."""
    t = num_frames(len(samples), frame_length, frame_shift)
    idx = np.arange(frame_length)[None, :] + frame_shift * np.arange(t)[:, None]
    return samples[idx]


def stft(w: Waveform, cfg: FrameConfig) -> np.ndarray:
    """Complex spectrogram of shape (T, fft_size // 2 + 1)."""
    if len(w) < cfg.frame_length:
        raise ValueError(
            f"utterance too short: {len(w)} samples < one frame ({cfg.frame_length})"
        )
    frames = frame_signal(w.samples, cfg.frame_length, cfg.frame_shift)
    frames = frames * window_function(cfg.window, cfg.frame_length)
    return np.fft.rfft(frames, n=cfg.fft_size, axis=1)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(mcfg: MelConfig, fft_size: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filterbank, shape (n_filters, fft_size // 2 + 1)."""
    f_max = sample_rate / 2 if mcfg.f_max is None else mcfg.f_max
    if not mcfg.f_min < f_max <= sample_rate / 2:
        raise ValueError(f"require f_min < f_max <= Nyquist, got {mcfg.f_min}, {f_max}")
    mel_points = np.linspace(hz_to_mel(mcfg.f_min), hz_to_mel(f_max), mcfg.n_filters + 2)
    bin_freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    bin_mels = hz_to_mel(bin_freqs)
    fbank = np.zeros((mcfg.n_filters, fft_size // 2 + 1))
    for k in range(mcfg.n_filters):
        left, center, right = mel_points[k], mel_points[k + 1], mel_points[k + 2]
        up = (bin_mels - left) / (center - left)
        down = (right - bin_mels) / (right - center)
        fbank[k] = np.maximum(0.0, np.minimum(up, down))
    return fbank


def log_mel(w: Waveform, fcfg: FrameConfig, mcfg: MelConfig) -> FeatureMatrix:
    """Log mel-filterbank energies: ln(max(mel_energy, log_floor)), shape (T, n_filters)."""
    spec = stft(w, fcfg)
    power = np.abs(spec) ** 2
    fbank = mel_filterbank(mcfg, fcfg.fft_size, w.sample_rate)
    energies = power @ fbank.T
    return FeatureMatrix(np.log(np.maximum(energies, mcfg.log_floor)), LOG_MEL)


def mfcc_from_logmel(x: FeatureMatrix, n_ceps: int) -> FeatureMatrix:
    """Orthonormal DCT-II of each frame, truncated to n_ceps coefficients."""
    if x.feature_kind != LOG_MEL:
        raise ValueError(f"expected log_mel input, got {x.feature_kind}")
    if n_ceps > x.num_dims:
        raise ValueError(f"n_ceps {n_ceps} exceeds feature dimension {x.num_dims}")
    coeffs = dct(x.values, type=2, norm="ortho", axis=1)[:, :n_ceps]
    return FeatureMatrix(coeffs, MFCC)


def frame_log_energy(x: FeatureMatrix) -> np.ndarray:
    """Per-frame log-energy: log of summed linear mel energies (c0 for mfcc)."""
    if x.feature_kind == MFCC:
        return x.values[:, 0].copy()
    # logsumexp over mel dims = log of the summed linear energies
    m = x.values.max(axis=1)
    return m + np.log(np.sum(np.exp(x.values - m[:, None]), axis=1))


def energy_vad(x: FeatureMatrix, cfg: VadConfig = VadConfig()) -> FrameMask:
    """Mean-relative energy VAD: keep frames strictly above the threshold."""
    if x.num_frames < 1:
        raise ValueError("need at least one frame")
    e = frame_log_energy(x)
    threshold = cfg.offset + cfg.mean_scale * e.mean()
    return FrameMask(e > threshold)


def short_time_mean_center(x: FeatureMatrix, window: int = DEFAULT_CENTERING_WINDOW) -> FeatureMatrix:
    """Subtract per-dimension sliding-window means; windows truncate at the edges."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    t = x.num_frames
    half = window // 2
    cumsum = np.vstack([np.zeros((1, x.num_dims)), np.cumsum(x.values, axis=0)])
    lo = np.maximum(np.arange(t) - half, 0)
    hi = np.minimum(np.arange(t) + half + 1, t)
    means = (cumsum[hi] - cumsum[lo]) / (hi - lo)[:, None]
    return FeatureMatrix(x.values - means, x.feature_kind)


def apply_mask(x: FeatureMatrix, mask: FrameMask) -> FeatureMatrix:
    """Drop frames where the mask is False."""
    if len(mask) != x.num_frames:
        raise ValueError(f"mask length {len(mask)} != frame count {x.num_frames}")
    return FeatureMatrix(x.values[mask.keep], x.feature_kind)
