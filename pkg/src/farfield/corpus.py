"""Corpus construction: SNR filtering, concatenation, reverberation, noise mixing, manifests."""

import hashlib
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import fftconvolve

from .features import Waveform

DOMAINS = ("clean", "reverb_noise", "noise", "babble", "music")
DEFAULT_SNR_LEVELS = (15.0, 10.0, 5.0, 0.0)
DEFAULT_SNR_THRESHOLD_DB = 19.0

MANIFEST_HEADER = ["utt_id", "path", "speaker", "session", "mic", "domain"]
PAIRED_HEADER = ["degraded_id", "clean_id"]

# Blind SNR estimation: amplitude statistic log(E|z|) - E[log|z|] looked up in the
# gamma-speech-model table of the WADA method (121 entries, -20..100 dB).
WADA_DB_VALS = np.arange(-20.0, 101.0)
WADA_G_VALS = np.array([
    0.40974774, 0.40986926, 0.40998566, 0.40969089, 0.40986186, 0.40999006,
    0.41027138, 0.41052627, 0.41101024, 0.41143264, 0.41231718, 0.41337272,
    0.41526426, 0.4178192, 0.42077252, 0.42452799, 0.42918886, 0.43510373,
    0.44234195, 0.45161485, 0.46221153, 0.47491647, 0.48883809, 0.50509236,
    0.52353709, 0.54372088, 0.56532427, 0.58847532, 0.61346212, 0.63954496,
    0.66750818, 0.69583724, 0.72454762, 0.75414799, 0.78323148, 0.81240985,
    0.84219775, 0.87166406, 0.90030504, 0.92880418, 0.95655449, 0.9835349,
    1.01047155, 1.0362095, 1.06136425, 1.08579312, 1.1094819, 1.13277995,
    1.15472826, 1.17627308, 1.19703503, 1.21671694, 1.23535898, 1.25364313,
    1.27103891, 1.28718029, 1.30302865, 1.31839527, 1.33294817, 1.34700935,
    1.3605727, 1.37345513, 1.38577122, 1.39733504, 1.40856397, 1.41959619,
    1.42983624, 1.43958467, 1.44902176, 1.45804831, 1.46669568, 1.47486938,
    1.48269965, 1.49034339, 1.49748214, 1.50435106, 1.51076426, 1.51698915,
    1.5229097, 1.528578, 1.53389835, 1.5391211, 1.5439065, 1.54858517,
    1.55310776, 1.55744391, 1.56164927, 1.56566348, 1.56938671, 1.57307767,
    1.57654764, 1.57980083, 1.58304129, 1.58602496, 1.58880681, 1.59162477,
    1.5941969, 1.59693155, 1.599446, 1.60185011, 1.60408668, 1.60627134,
    1.60826199, 1.61004547, 1.61192472, 1.61369656, 1.61534074, 1.61688905,
    1.61838916, 1.61985374, 1.62135878, 1.62268119, 1.62390423, 1.62513143,
    1.62632463, 1.6274027, 1.62842767, 1.62945532, 1.6303307, 1.63128026,
    1.63204102,
])
_WADA_EPS = 1e-10


@dataclass(frozen=True)
class UtteranceRecord:
    utt_id: str
    audio_path: str
    speaker_id: str
    session_id: str
    mic_id: str
    domain: str


@dataclass(frozen=True)
class CorpusManifest:
    """Utterance list; domain=None marks a mixed-domain (composed) manifest."""

    records: tuple
    domain: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        ids = [r.utt_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate utt_ids in manifest")
        if self.domain is not None:
            bad = [r.utt_id for r in self.records if r.domain != self.domain]
            if bad:
                raise ValueError(f"records {bad[:3]} do not match manifest domain {self.domain!r}")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def utt_ids(self):
        return [r.utt_id for r in self.records]


@dataclass(frozen=True)
class PairedManifest:
    """(degraded_id, clean_id) correspondences of a parallel corpus."""

    pairs: tuple

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((str(a), str(b)) for a, b in self.pairs))

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


@dataclass(frozen=True)
class RIRSpec:
    rt60: float
    source: str = "synthetic_exponential"
    rir_samples: np.ndarray | None = None

    def __post_init__(self):
        if self.rt60 < 0:
            raise ValueError("rt60 must be >= 0")
        if self.rir_samples is not None:
            h = np.asarray(self.rir_samples, dtype=np.float64)
            if not np.all(np.isfinite(h)):
                raise ValueError("RIR contains non-finite samples")
            object.__setattr__(self, "rir_samples", h)


@dataclass(frozen=True)
class NoiseMixSpec:
    snr_db: float
    noise_source: str = ""

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")


# ---------------------------------------------------------------------------
# audio + manifest I/O (16-bit PCM WAV mono, TSV manifests)
# ---------------------------------------------------------------------------

def read_wav(path) -> Waveform:
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    else:
        samples = data.astype(np.float64)
    return Waveform(samples, int(rate))


def write_wav(path, w: Waveform) -> None:
    clipped = np.clip(w.samples, -1.0, 1.0)
    wavfile.write(path, w.sample_rate, (clipped * 32767.0).astype(np.int16))


def write_manifest(path, m: CorpusManifest) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("\t".join(MANIFEST_HEADER) + "\n")
        for r in m:
            f.write(f"{r.utt_id}\t{r.audio_path}\t{r.speaker_id}\t{r.session_id}\t{r.mic_id}\t{r.domain}\n")


def read_manifest(path, domain: str | None = "infer") -> CorpusManifest:
    records = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        if header != MANIFEST_HEADER:
            raise ValueError(f"{path}: bad manifest header {header}")
        for line in f:
            if not line.strip():
                continue
            utt_id, audio_path, speaker, session, mic, dom = line.rstrip("\n").split("\t")
            records.append(UtteranceRecord(utt_id, audio_path, speaker, session, mic, dom))
    if domain == "infer":
        domains = {r.domain for r in records}
        domain = domains.pop() if len(domains) == 1 else None
    return CorpusManifest(records, domain)


def write_paired_manifest(path, p: PairedManifest) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("\t".join(PAIRED_HEADER) + "\n")
        for deg, clean in p:
            f.write(f"{deg}\t{clean}\n")


def read_paired_manifest(path) -> PairedManifest:
    pairs = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        if header != PAIRED_HEADER:
            raise ValueError(f"{path}: bad paired manifest header {header}")
        for line in f:
            if line.strip():
                deg, clean = line.rstrip("\n").split("\t")
                pairs.append((deg, clean))
    return PairedManifest(pairs)


# ---------------------------------------------------------------------------
# blind SNR estimation and filtering
# ---------------------------------------------------------------------------

def wada_snr(w: Waveform) -> float:
    """Blind SNR estimate in dB, clamped to the table range [-20, 100]."""
    x = w.samples
    peak = np.abs(x).max() if len(x) else 0.0
    if peak <= 0.0:
        warnings.warn("all-zero waveform; returning table minimum SNR")
        return float(WADA_DB_VALS[0])
    a = np.abs(x / peak)
    a = np.maximum(a, _WADA_EPS)
    v3 = np.log(max(_WADA_EPS, a.mean())) - np.log(a).mean()
    if v3 <= WADA_G_VALS[0]:
        return float(WADA_DB_VALS[0])
    if v3 >= WADA_G_VALS[-1]:
        return float(WADA_DB_VALS[-1])
    idx = int(np.searchsorted(WADA_G_VALS, v3, side="right") - 1)
    frac = (v3 - WADA_G_VALS[idx]) / (WADA_G_VALS[idx + 1] - WADA_G_VALS[idx])
    return float(WADA_DB_VALS[idx] + frac * (WADA_DB_VALS[idx + 1] - WADA_DB_VALS[idx]))


def filter_by_snr(m: CorpusManifest, threshold_db: float = DEFAULT_SNR_THRESHOLD_DB,
                  loader=read_wav) -> CorpusManifest:
    """Keep records whose estimated SNR is strictly above threshold_db."""
    kept = [r for r in m if wada_snr(loader(r.audio_path)) > threshold_db]
    return CorpusManifest(kept, m.domain)


# ---------------------------------------------------------------------------
# concatenation, reverberation, mixing
# ---------------------------------------------------------------------------

def concat_same_source(m: CorpusManifest, group_key=None, out_dir=None,
                       loader=read_wav, writer=write_wav) -> CorpusManifest:
    """Concatenate all recordings sharing a source key into one utterance each.

    group_key maps a record to its source id (default: (speaker, session));
    concatenation follows stable manifest order within each group.
    """
    if group_key is None:
        group_key = lambda r: (r.speaker_id, r.session_id)
    out_dir = Path(out_dir) if out_dir is not None else None
    groups = {}
    for r in m:
        groups.setdefault(group_key(r), []).append(r)
    records = []
    for idx, (key, group) in enumerate(groups.items()):
        if len(group) == 1 and out_dir is None:
            records.append(group[0])
            continue
        waves = [loader(r.audio_path) for r in group]
        rates = {w.sample_rate for w in waves}
        if len(rates) != 1:
            raise ValueError(f"group {key}: mismatched sample rates {sorted(rates)}")
        combined = Waveform(np.concatenate([w.samples for w in waves]), rates.pop())
        first = group[0]
        utt_id = f"{first.utt_id}-cat" if len(group) > 1 else first.utt_id
        if out_dir is not None:
            path = out_dir / f"{utt_id}.wav"
            writer(path, combined)
            path = str(path)
        else:
            path = first.audio_path
        records.append(replace(first, utt_id=utt_id, audio_path=path))
    return CorpusManifest(records, m.domain)


def synth_rir(rt60: float, length: int, seed, sample_rate: int = 16000) -> RIRSpec:
    """Exponentially decaying white-noise RIR: envelope energy drops 60 dB at t = rt60 seconds."""
    if rt60 < 0:
        raise ValueError("rt60 must be >= 0")
    if rt60 == 0:
        h = np.zeros(max(length, 1))
        h[0] = 1.0
        return RIRSpec(0.0, "synthetic_exponential", h)
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(length) * rir_envelope(rt60, length, sample_rate)
    h /= np.abs(h).max()
    return RIRSpec(rt60, "synthetic_exponential", h)


def rir_envelope(rt60: float, length: int, sample_rate: int = 16000) -> np.ndarray:
    """Deterministic amplitude envelope used by synth_rir."""
    t = np.arange(length, dtype=np.float64) / sample_rate
    return np.exp(-t * 3.0 * np.log(10.0) / rt60)


def apply_rir(w: Waveform, r: RIRSpec) -> Waveform:
    """Convolve with the RIR, truncate to the input length, match the input peak."""
    if r.rir_samples is None or len(r.rir_samples) == 0:
        raise ValueError("RIR has no samples")
    out = fftconvolve(w.samples, r.rir_samples)[: len(w)]
    peak_in = np.abs(w.samples).max()
    peak_out = np.abs(out).max()
    if peak_in > 0 and peak_out > 0:
        out = out * (peak_in / peak_out)
    return Waveform(out, w.sample_rate)


def fit_noise_length(noise: np.ndarray, length: int, offset: int = 0) -> np.ndarray:
    """Cyclically tile/trim a noise signal to a target length, starting at offset."""
    idx = (offset + np.arange(length)) % len(noise)
    return noise[idx]


def mix_noise_at_snr(s: Waveform, n: Waveform, snr_db: float) -> Waveform:
    """Add noise scaled so the speech-to-noise power ratio is exactly snr_db."""
    noise = fit_noise_length(n.samples, len(s))
    p_s = np.mean(s.samples ** 2)
    p_n = np.mean(noise ** 2)
    if p_s <= 0 or p_n <= 0:
        raise ValueError("speech and noise must both have positive power")
    alpha = np.sqrt(p_s / (p_n * 10.0 ** (snr_db / 10.0)))
    return Waveform(s.samples + alpha * noise, s.sample_rate)


def measure_snr_db(speech: np.ndarray, scaled_noise: np.ndarray) -> float:
    """10*log10 of the mean-square power ratio of the two stored components."""
    return float(10.0 * np.log10(np.mean(speech ** 2) / np.mean(scaled_noise ** 2)))


# ---------------------------------------------------------------------------
# randomized corpus builders
# ---------------------------------------------------------------------------

def utterance_rng(global_seed: int, utt_id: str, label: str = "") -> np.random.Generator:
    """Independent per-utterance random stream derived from (global seed, utt_id)."""
    digest = hashlib.sha256(f"{label}:{utt_id}".encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([int(global_seed)] + words))


@dataclass(frozen=True)
class CorruptionSpec:
    """Per-utterance corruption plan drawn from the seeded stream."""

    utt_id: str
    rt60: float
    snr_db: float
    noise_utt_id: str
    noise_offset: int


def plan_corruption(clean: CorpusManifest, noise: CorpusManifest, seed,
                    rt60_range=(0.0, 1.0), levels=DEFAULT_SNR_LEVELS,
                    noise_lengths=None) -> list:
    """Draw the corruption plan (RT60, SNR level, noise pick) for each clean utterance."""
    if len(clean) == 0 or len(noise) == 0:
        raise ValueError("clean and noise manifests must be non-empty")
    levels = list(levels)
    plan = []
    for rec in clean:
        rng = utterance_rng(seed, rec.utt_id, "corrupt")
        rt60 = rng.uniform(rt60_range[0], rt60_range[1])
        snr = levels[rng.integers(len(levels))]
        noise_rec = noise.records[rng.integers(len(noise))]
        max_off = noise_lengths[noise_rec.utt_id] if noise_lengths else 1
        offset = int(rng.integers(max(max_off, 1)))
        plan.append(CorruptionSpec(rec.utt_id, float(rt60), float(snr), noise_rec.utt_id, offset))
    return plan


def build_parallel_corpus(clean: CorpusManifest, noise: CorpusManifest, out_dir, seed,
                          rt60_range=(0.0, 1.0), levels=DEFAULT_SNR_LEVELS,
                          rir_length=None, loader=read_wav, writer=write_wav):
    """Degrade every clean utterance (seeded RIR + exact-SNR noise) into a paired twin.

    Returns (degraded manifest, paired manifest). All draws derive from
    (seed, utt_id), so builds are deterministic and order-independent.
    """
    if len(clean) == 0 or len(noise) == 0:
        raise ValueError("clean and noise manifests must be non-empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    noise_waves = {r.utt_id: loader(r.audio_path) for r in noise}
    noise_lengths = {k: len(v) for k, v in noise_waves.items()}
    plan = plan_corruption(clean, noise, seed, rt60_range, levels, noise_lengths)

    records, pairs = [], []
    for rec, spec in zip(clean, plan):
        w = loader(rec.audio_path)
        rir_len = rir_length or w.sample_rate // 2
        rir = synth_rir(spec.rt60, rir_len, utterance_rng(seed, rec.utt_id, "rir"),
                        sample_rate=w.sample_rate)
        reverbed = apply_rir(w, rir)
        noise_wave = noise_waves[spec.noise_utt_id]
        shifted = Waveform(fit_noise_length(noise_wave.samples, len(reverbed), spec.noise_offset),
                           noise_wave.sample_rate)
        mixed = mix_noise_at_snr(reverbed, shifted, spec.snr_db)
        peak = np.abs(mixed.samples).max()
        if peak > 0.99:
            mixed = Waveform(mixed.samples * (0.99 / peak), mixed.sample_rate)
        deg_id = f"{rec.utt_id}-rvb"
        path = out_dir / f"{deg_id}.wav"
        writer(path, mixed)
        records.append(replace(rec, utt_id=deg_id, audio_path=str(path), domain="reverb_noise"))
        pairs.append((deg_id, rec.utt_id))
    return CorpusManifest(records, "reverb_noise"), PairedManifest(pairs)


def build_additive_corpus(clean: CorpusManifest, noise: CorpusManifest, out_dir, seed,
                          levels=DEFAULT_SNR_LEVELS, domain="noise",
                          loader=read_wav, writer=write_wav) -> CorpusManifest:
    """Add noise (no reverberation) to every clean utterance at a drawn SNR level."""
    if len(clean) == 0 or len(noise) == 0:
        raise ValueError("clean and noise manifests must be non-empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    noise_waves = {r.utt_id: loader(r.audio_path) for r in noise}
    levels = list(levels)
    records = []
    for rec in clean:
        rng = utterance_rng(seed, rec.utt_id, "additive")
        snr = levels[rng.integers(len(levels))]
        noise_wave = noise_waves[noise.records[rng.integers(len(noise))].utt_id]
        w = loader(rec.audio_path)
        offset = int(rng.integers(max(len(noise_wave), 1)))
        shifted = Waveform(fit_noise_length(noise_wave.samples, len(w), offset), w.sample_rate)
        mixed = mix_noise_at_snr(w, shifted, snr)
        peak = np.abs(mixed.samples).max()
        if peak > 0.99:
            mixed = Waveform(mixed.samples * (0.99 / peak), mixed.sample_rate)
        new_id = f"{rec.utt_id}-{domain}"
        path = out_dir / f"{new_id}.wav"
        writer(path, mixed)
        records.append(replace(rec, utt_id=new_id, audio_path=str(path), domain=domain))
    return CorpusManifest(records, domain)


def draw_unpaired_batches(a: CorpusManifest, b: CorpusManifest, seed, n_epochs=1):
    """Yield unpaired (record_a, record_b) draws with no correspondence.

    Per epoch every utterance of manifest `a` appears exactly once (shuffled);
    the `b` side is drawn independently and uniformly.
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both manifests must be non-empty")
    for epoch in range(n_epochs):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(epoch)]))
        order = rng.permutation(len(a))
        picks = rng.integers(len(b), size=len(a))
        for i, j in zip(order, picks):
            yield a.records[int(i)], b.records[int(j)]
