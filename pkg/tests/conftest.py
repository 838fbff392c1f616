import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from farfield.corpus import CorpusManifest, UtteranceRecord, write_wav
from farfield.features import Waveform


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def speech_like(n, rng, shape=0.4):
    """Gamma-amplitude random-sign signal, the blind-SNR estimator's speech model."""
    return rng.gamma(shape, 1.0, size=n) * rng.choice([-1.0, 1.0], size=n)


def tone(freq, seconds=1.0, sr=16000, amp=0.5):
    t = np.arange(int(seconds * sr)) / sr
    return Waveform(amp * np.sin(2 * np.pi * freq * t), sr)


def make_wav_corpus(tmp_path, waves, domain="clean", speaker=None, session=None, mic=None):
    """Write waveforms and return a manifest over them."""
    Path(tmp_path).mkdir(parents=True, exist_ok=True)
    records = []
    for i, w in enumerate(waves):
        path = tmp_path / f"utt{i:03d}.wav"
        write_wav(path, w)
        records.append(UtteranceRecord(
            f"utt{i:03d}", str(path),
            speaker[i] if speaker else f"spk{i}",
            session[i] if session else "s0",
            mic[i] if mic else "m0",
            domain))
    return CorpusManifest(records, domain)
