"""Verification protocol: enrollments, test chunks, trials, embedding, EER / minDCF."""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .checkpoint import load_checkpoint, save_checkpoint
from .features import LOG_MEL, FeatureMatrix, mfcc_from_logmel
from .models import init_parameters, load_module_arrays, module_arrays

TARGET = "target"
NONTARGET = "nontarget"

TRIAL_HEADER = ["enroll_id", "test_id", "label"]
SCORE_HEADER = ["enroll_id", "test_id", "score"]


@dataclass(frozen=True)
class Segment:
    """A [start, end) span of one utterance, in seconds of archived speech."""

    segment_id: str
    utt_id: str
    speaker_id: str
    session_id: str
    mic_id: str
    start: float
    end: float

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError(f"segment {self.segment_id!r}: end must exceed start")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class EnrollmentGroup:
    enroll_id: str
    speaker_id: str
    segments: tuple

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.segments)


@dataclass(frozen=True)
class Trial:
    enroll_id: str
    test_id: str
    label: str

    def __post_init__(self):
        if self.label not in (TARGET, NONTARGET):
            raise ValueError(f"bad trial label {self.label!r}")


@dataclass(frozen=True)
class DcfParams:
    p_target: float = 0.05
    c_miss: float = 1.0
    c_fa: float = 1.0

    def __post_init__(self):
        if not 0 < self.p_target < 1:
            raise ValueError("p_target must be in (0, 1)")
        if self.c_miss <= 0 or self.c_fa <= 0:
            raise ValueError("costs must be positive")


# ---------------------------------------------------------------------------
# protocol construction
# ---------------------------------------------------------------------------

def build_enrollments(m, durations, speech_durations: dict):
    """Greedy non-overlapping accumulation of exact per-speaker enrollment spans.

    speech_durations maps utt_id to seconds of (post-VAD) speech. Speakers with
    less material than a requested duration are skipped and reported. Returns
    (groups, skipped) with skipped entries (speaker, duration, available).
    """
    by_speaker = {}
    for rec in m:
        by_speaker.setdefault(rec.speaker_id, []).append(rec)
    groups, skipped = [], []
    for duration in durations:
        for speaker, recs in by_speaker.items():
            remaining = float(duration)
            segments = []
            for rec in recs:
                if remaining <= 0:
                    break
                available = float(speech_durations[rec.utt_id])
                take = min(available, remaining)
                if take <= 0:
                    continue
                segments.append(Segment(f"{rec.utt_id}[0:{take:g}]", rec.utt_id,
                                        rec.speaker_id, rec.session_id, rec.mic_id,
                                        0.0, take))
                remaining -= take
            if remaining > 1e-9:
                skipped.append((speaker, float(duration), float(duration) - remaining))
                continue
            groups.append(EnrollmentGroup(f"{speaker}-enr{duration:g}s", speaker, segments))
    return groups, skipped


def build_test_chunks(m, speech_durations: dict, chunk_s: float = 60.0,
                      min_keep_s: float = 10.0):
    """Consecutive fixed-length chunks per utterance; final remainder kept if long enough."""
    segments = []
    for rec in m:
        total = float(speech_durations[rec.utt_id])
        start = 0.0
        index = 0
        while start < total:
            end = min(start + chunk_s, total)
            if end - start < chunk_s and end - start < min_keep_s:
                break
            segments.append(Segment(f"{rec.utt_id}-c{index}", rec.utt_id,
                                    rec.speaker_id, rec.session_id, rec.mic_id,
                                    start, end))
            start = end
            index += 1
    return segments


def _same_session_mic(enroll: EnrollmentGroup, test: Segment) -> bool:
    return any(s.session_id == test.session_id and s.mic_id == test.mic_id
               for s in enroll.segments)


BUILTIN_TRIAL_RULES = {
    # the stated protocol rule: same session and same microphone cannot form a target pair
    "no_target_same_session_mic":
        lambda enroll, test, label: label == TARGET and _same_session_mic(enroll, test),
}


def build_trials(enrolls, tests, rules=("no_target_same_session_mic",)):
    """Cartesian product of enrollments and test segments, minus rule-violating pairs."""
    resolved = [BUILTIN_TRIAL_RULES[r] if isinstance(r, str) else r for r in rules]
    trials = []
    for enroll in enrolls:
        for test in tests:
            label = TARGET if enroll.speaker_id == test.speaker_id else NONTARGET
            if any(rule(enroll, test, label) for rule in resolved):
                continue
            trials.append(Trial(enroll.enroll_id, test.segment_id, label))
    return trials


def write_trials(path, trials) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("\t".join(TRIAL_HEADER) + "\n")
        for t in trials:
            f.write(f"{t.enroll_id}\t{t.test_id}\t{t.label}\n")


def read_trials(path):
    trials = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        if header != TRIAL_HEADER:
            raise ValueError(f"{path}: bad trial header {header}")
        for line in f:
            if line.strip():
                enroll_id, test_id, label = line.rstrip("\n").split("\t")
                trials.append(Trial(enroll_id, test_id, label))
    return trials


ENROLL_HEADER = ["enroll_id", "speaker", "utt_id", "session", "mic", "start", "end"]
SEGMENT_HEADER = ["segment_id", "utt_id", "speaker", "session", "mic", "start", "end"]


def write_enrollments(path, groups) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("\t".join(ENROLL_HEADER) + "\n")
        for g in groups:
            for s in g.segments:
                f.write(f"{g.enroll_id}\t{g.speaker_id}\t{s.utt_id}\t{s.session_id}"
                        f"\t{s.mic_id}\t{s.start:.6g}\t{s.end:.6g}\n")


def read_enrollments(path):
    rows = {}
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        if header != ENROLL_HEADER:
            raise ValueError(f"{path}: bad enrollment header {header}")
        for line in f:
            if not line.strip():
                continue
            enroll_id, speaker, utt_id, session, mic, start, end = line.rstrip("\n").split("\t")
            seg = Segment(f"{utt_id}[{start}:{end}]", utt_id, speaker, session, mic,
                          float(start), float(end))
            rows.setdefault((enroll_id, speaker), []).append(seg)
    return [EnrollmentGroup(eid, spk, segs) for (eid, spk), segs in rows.items()]


def write_segments(path, segments) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("\t".join(SEGMENT_HEADER) + "\n")
        for s in segments:
            f.write(f"{s.segment_id}\t{s.utt_id}\t{s.speaker_id}\t{s.session_id}"
                    f"\t{s.mic_id}\t{s.start:.6g}\t{s.end:.6g}\n")


def read_segments(path):
    segments = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        if header != SEGMENT_HEADER:
            raise ValueError(f"{path}: bad segment header {header}")
        for line in f:
            if not line.strip():
                continue
            segment_id, utt_id, speaker, session, mic, start, end = line.rstrip("\n").split("\t")
            segments.append(Segment(segment_id, utt_id, speaker, session, mic,
                                    float(start), float(end)))
    return segments


def write_scores(path, scored) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("\t".join(SCORE_HEADER) + "\n")
        for trial, score in scored:
            f.write(f"{trial.enroll_id}\t{trial.test_id}\t{score:.10g}\n")


def read_scores(path):
    rows = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        if header != SCORE_HEADER:
            raise ValueError(f"{path}: bad score header {header}")
        for line in f:
            if line.strip():
                enroll_id, test_id, score = line.rstrip("\n").split("\t")
                rows.append((enroll_id, test_id, float(score)))
    return rows


# ---------------------------------------------------------------------------
# embedding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmbedderConfig:
    in_dim: int = 40
    hidden_dim: int = 64
    embed_dim: int = 64
    kernel_sizes: tuple = (5, 3, 3)
    dilations: tuple = (1, 2, 3)


class TdnnEmbedder(nn.Module):
    """Small time-delay trunk with mean+std statistics pooling."""

    def __init__(self, config: EmbedderConfig = EmbedderConfig()):
        super().__init__()
        self.config = config
        dims = (config.in_dim,) + (config.hidden_dim,) * len(config.kernel_sizes)
        self.convs = nn.ModuleList(
            nn.Conv1d(dims[i], dims[i + 1], k, dilation=d, padding=(k - 1) // 2 * d)
            for i, (k, d) in enumerate(zip(config.kernel_sizes, config.dilations))
        )
        self.proj = nn.Linear(2 * config.hidden_dim, config.embed_dim)

    def forward(self, x):
        # x: (B, T, F) -> (B, embed_dim)
        h = x.transpose(1, 2)
        for conv in self.convs:
            h = F.relu(conv(h))
        mean = h.mean(dim=2)
        std = torch.sqrt(torch.clamp(h.var(dim=2, unbiased=False), min=1e-10))
        return self.proj(torch.cat([mean, std], dim=1))


def embed(model: TdnnEmbedder, x: np.ndarray) -> np.ndarray:
    """Fixed-length embedding of a T x F feature matrix."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"need at least one frame, got shape {x.shape}")
    with torch.no_grad():
        return model(torch.from_numpy(x)[None])[0].numpy()


def save_embedder(path, model: TdnnEmbedder) -> None:
    cfg = model.config
    save_checkpoint(path, "embedder",
                    {"model": {"in_dim": cfg.in_dim, "hidden_dim": cfg.hidden_dim,
                               "embed_dim": cfg.embed_dim,
                               "kernel_sizes": list(cfg.kernel_sizes),
                               "dilations": list(cfg.dilations)}},
                    module_arrays(model))


def load_embedder(path) -> TdnnEmbedder:
    kind, config, arrays = load_checkpoint(path)
    if kind != "embedder":
        raise ValueError(f"{path}: checkpoint kind {kind!r}, expected 'embedder'")
    c = config["model"]
    model = TdnnEmbedder(EmbedderConfig(c["in_dim"], c["hidden_dim"], c["embed_dim"],
                                        tuple(c["kernel_sizes"]), tuple(c["dilations"])))
    load_module_arrays(model, arrays)
    return model


def train_embedder(features: dict, speakers: dict, config: EmbedderConfig = EmbedderConfig(),
                   epochs: int = 10, seq_len: int = 200, batch_size: int = 16,
                   lr: float = 1e-3, seed: int = 0) -> TdnnEmbedder:
    """Train the trunk with a softmax speaker classifier on fixed-length crops."""
    torch.set_num_threads(1)
    model = init_parameters(TdnnEmbedder(config), seed)
    speaker_ids = sorted(set(speakers.values()))
    index = {s: i for i, s in enumerate(speaker_ids)}
    head = init_parameters(nn.Linear(config.embed_dim, len(speaker_ids)), seed + 1)
    opt = torch.optim.Adam(list(model.parameters()) + list(head.parameters()), lr=lr)
    ids = list(features.keys())
    for epoch in range(epochs):
        rng = np.random.default_rng(np.random.SeedSequence([17, int(seed), epoch]))
        order = rng.permutation(len(ids))
        for lo in range(0, len(order), batch_size):
            chunk = order[lo : lo + batch_size]
            crops, labels = [], []
            for i in chunk:
                values = features[ids[int(i)]]
                offset = int(rng.integers(max(values.shape[0] - seq_len + 1, 1)))
                idx = (offset + np.arange(seq_len)) % values.shape[0]
                crops.append(values[idx])
                labels.append(index[speakers[ids[int(i)]]])
            x = torch.from_numpy(np.ascontiguousarray(np.stack(crops), dtype=np.float32))
            y = torch.tensor(labels)
            logits = head(model(x))
            loss = F.cross_entropy(logits, y)
            opt.zero_grad()
            loss.backward()
            opt.step()
    return model


def segment_feature_slice(features: dict, segment: Segment, frame_shift_s: float) -> np.ndarray:
    values = features[segment.utt_id]
    lo = int(round(segment.start / frame_shift_s))
    hi = int(round(segment.end / frame_shift_s))
    return values[lo : min(hi, values.shape[0])]


def embed_segments(model: TdnnEmbedder, segments, features: dict,
                   frame_shift_s: float, n_ceps=None) -> np.ndarray:
    """Embed the DCT-compressed concatenation of the segments' log-mel frames."""
    parts = [segment_feature_slice(features, s, frame_shift_s) for s in segments]
    stacked = np.concatenate(parts, axis=0)
    if stacked.shape[0] < 1:
        raise ValueError("segments select no frames")
    logmel = FeatureMatrix(stacked.astype(np.float64), LOG_MEL)
    ceps = mfcc_from_logmel(logmel, n_ceps or stacked.shape[1])
    return embed(model, ceps.values)


def score_cosine(e1: np.ndarray, e2: np.ndarray) -> float:
    """Inner product of unit-normalized vectors, in [-1, 1]."""
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    if e1.shape != e2.shape:
        raise ValueError(f"dimension mismatch: {e1.shape} vs {e2.shape}")
    n1, n2 = np.linalg.norm(e1), np.linalg.norm(e2)
    if n1 == 0 or n2 == 0:
        raise ValueError("cannot score a zero vector")
    return float(np.dot(e1, e2) / (n1 * n2))


def score_trials(model: TdnnEmbedder, trials, enrolls, tests, features: dict,
                 frame_shift_s: float, n_ceps=None):
    """Cosine scores for every trial; embeddings computed once per side."""
    enroll_by_id = {e.enroll_id: e for e in enrolls}
    test_by_id = {t.segment_id: t for t in tests}
    enroll_emb = {eid: embed_segments(model, e.segments, features, frame_shift_s, n_ceps)
                  for eid, e in enroll_by_id.items()}
    test_emb = {tid: embed_segments(model, [t], features, frame_shift_s, n_ceps)
                for tid, t in test_by_id.items()}
    return [(t, score_cosine(enroll_emb[t.enroll_id], test_emb[t.test_id])) for t in trials]


# ---------------------------------------------------------------------------
# detection metrics
# ---------------------------------------------------------------------------

def _operating_points(scores: np.ndarray, labels: np.ndarray):
    """(P_fa, P_miss) at threshold +inf and at each distinct score, accept if >= threshold."""
    n_tgt = int(labels.sum())
    n_non = int(len(labels) - n_tgt)
    if n_tgt == 0 or n_non == 0:
        raise ValueError("need at least one target and one nontarget score")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_tgt = labels[order].astype(np.int64)
    cum_tgt = np.concatenate([[0], np.cumsum(sorted_tgt)])
    cum_non = np.concatenate([[0], np.cumsum(1 - sorted_tgt)])
    # accepted-count boundaries after each run of tied scores, plus the empty set
    boundaries = np.concatenate([[0], np.nonzero(np.diff(sorted_scores))[0] + 1, [len(scores)]])
    p_fa = cum_non[boundaries] / n_non
    p_miss = 1.0 - cum_tgt[boundaries] / n_tgt
    return p_fa, p_miss


def compute_eer(scores, labels) -> float:
    """Rate where false-accept equals false-reject, interpolated between ROC points."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    p_fa, p_miss = _operating_points(scores, labels)
    diff = p_miss - p_fa  # starts at +1, ends at -1
    for k in range(len(diff)):
        if diff[k] == 0.0:
            return float(p_fa[k])
        if diff[k] < 0.0:
            t = diff[k - 1] / (diff[k - 1] - diff[k])
            return float(p_fa[k - 1] + t * (p_fa[k] - p_fa[k - 1]))
    raise AssertionError("no equal-error crossing found")


def compute_min_dcf(scores, labels, p: DcfParams = DcfParams()) -> float:
    """Minimum normalized detection cost over all decision thresholds."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    p_fa, p_miss = _operating_points(scores, labels)
    dcf = p.c_miss * p.p_target * p_miss + p.c_fa * (1.0 - p.p_target) * p_fa
    return float(dcf.min() / min(p.c_miss * p.p_target, p.c_fa * (1.0 - p.p_target)))


def scored_arrays(scored):
    """Split [(Trial, score)] into (scores, labels) arrays."""
    scores = np.array([s for _, s in scored], dtype=np.float64)
    labels = np.array([t.label == TARGET for t, _ in scored], dtype=bool)
    return scores, labels


def format_report(name: str, scores, labels, dcf: DcfParams = DcfParams()) -> str:
    """Structured results block: EER (%), minDCF, operating point, trial counts."""
    eer = compute_eer(scores, labels)
    mindcf = compute_min_dcf(scores, labels, dcf)
    n_tgt = int(np.sum(labels))
    lines = [
        f"[{name}]",
        f"trials = {len(labels)} (target {n_tgt}, nontarget {len(labels) - n_tgt})",
        f"eer_percent = {100.0 * eer:.4f}",
        f"min_dcf = {mindcf:.6f}",
        f"dcf_params = p_target {dcf.p_target:g}, c_miss {dcf.c_miss:g}, c_fa {dcf.c_fa:g}",
    ]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# downstream training-corpus composition
# ---------------------------------------------------------------------------

SVS_SCHEMES = ("SVS1", "SVS2", "SVS3")


def compose_svs_corpus(scheme: str, base: dict, enhanced: dict):
    """Training-list composition recipes for the downstream verification system.

    SVS1: every base corpus replaced by its enhanced version, 3 epochs.
    SVS2: enhanced far-field corpus plus unmodified clean/additive, 3 epochs.
    SVS3: originals plus their enhanced versions, 1.5 epochs (the doubled list
    keeps the utterance-visit budget equal to the 3-epoch schemes).

    Returns (composed manifest, epoch budget).
    """
    from .corpus import CorpusManifest  # local import to avoid a cycle

    def need(mapping, key):
        if key not in mapping:
            raise ValueError(f"{scheme}: missing enhanced counterpart for {key!r}")
        return mapping[key]

    records = []
    if scheme == "SVS1":
        for key in base:
            records.extend(need(enhanced, key).records)
        budget = 3.0
    elif scheme == "SVS2":
        if "reverb_noise" not in base:
            raise ValueError("SVS2 requires a reverb_noise base corpus")
        records.extend(need(enhanced, "reverb_noise").records)
        for key, manifest in base.items():
            if key != "reverb_noise":
                records.extend(manifest.records)
        budget = 3.0
    elif scheme == "SVS3":
        for key in base:
            records.extend(base[key].records)
        for key in base:
            records.extend(need(enhanced, key).records)
        budget = 1.5
    else:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SVS_SCHEMES}")
    return CorpusManifest(records, None), budget


def utterance_visit_budget(manifest, epochs: float) -> float:
    """Total utterance visits implied by (corpus size, epoch budget)."""
    return len(manifest) * epochs
