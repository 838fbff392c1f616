"""Synthetic desk-scale corpus: speaker-parameterized formant-like signals and noise."""

from dataclasses import dataclass

import numpy as np

from .features import Waveform

_MAX_HARMONIC_HZ = 3800.0


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: str
    f0: float
    formants: tuple
    bandwidth: float = 160.0


def speaker_profile(index: int, seed: int) -> SpeakerProfile:
    """Deterministic per-speaker pitch and formant layout."""
    rng = np.random.default_rng(np.random.SeedSequence([31, int(seed), int(index)]))
    f0 = float(rng.uniform(90.0, 240.0))
    formants = (
        float(rng.uniform(300.0, 900.0)),
        float(rng.uniform(900.0, 2200.0)),
        float(rng.uniform(2200.0, 3600.0)),
    )
    return SpeakerProfile(f"spk{index:03d}", f0, formants)


def _formant_envelope(freqs: np.ndarray, profile: SpeakerProfile) -> np.ndarray:
    env = np.full_like(freqs, 0.01)
    for center in profile.formants:
        env = env + np.exp(-0.5 * ((freqs - center) / profile.bandwidth) ** 2)
    return env


def _speech_envelope(n: int, sample_rate: int, rng) -> np.ndarray:
    """Slowly varying gamma-amplitude modulation (speech-like level statistics)."""
    hop = sample_rate // 100
    env = rng.gamma(0.4, 1.0, size=n // hop + 2)
    env = np.repeat(env, hop)[:n]
    k = np.ones(hop // 2) / (hop // 2)
    return np.convolve(env, k, mode="same") + 0.02


def _silence_gates(n: int, sample_rate: int, rng, gap_fraction: float = 0.15) -> np.ndarray:
    """Multiplicative gate carving a few near-silent pauses into an utterance."""
    gate = np.ones(n)
    n_gaps = int(rng.integers(2, 5))
    total_gap = int(gap_fraction * n)
    for _ in range(n_gaps):
        width = max(total_gap // n_gaps, sample_rate // 20)
        start = int(rng.integers(max(n - width, 1)))
        gate[start : start + width] = 0.01
    return gate


def synth_utterance(profile: SpeakerProfile, duration_s: float, sample_rate: int,
                    rng, f0_jitter: float = 0.05) -> Waveform:
    """Harmonic stack shaped by the speaker's formants, with amplitude modulation."""
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    f0 = profile.f0 * (1.0 + rng.uniform(-f0_jitter, f0_jitter))
    harmonics = np.arange(1, int(_MAX_HARMONIC_HZ / f0) + 1)
    amps = _formant_envelope(harmonics * f0, profile)
    amps = amps / amps.max()
    phases = rng.uniform(0, 2 * np.pi, size=len(harmonics))
    x = np.zeros(n)
    for k, a, ph in zip(harmonics, amps, phases):
        x += a * np.sin(2 * np.pi * k * f0 * t + ph)
    x *= _speech_envelope(n, sample_rate, rng) * _silence_gates(n, sample_rate, rng)
    x += 10 ** (-40 / 20) * x.std() * rng.standard_normal(n)
    x *= 0.5 / np.abs(x).max()
    return Waveform(x, sample_rate)


def synth_noise(kind: str, duration_s: float, sample_rate: int, rng) -> Waveform:
    """Broadband noise: 'white' or 1/sqrt(f)-shaped 'pink'."""
    n = int(round(duration_s * sample_rate))
    white = rng.standard_normal(n)
    if kind == "white":
        x = white
    elif kind == "pink":
        spectrum = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
        spectrum[1:] /= np.sqrt(freqs[1:])
        spectrum[0] = 0
        x = np.fft.irfft(spectrum, n)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    x = x / np.abs(x).max() * 0.5
    return Waveform(x, sample_rate)
