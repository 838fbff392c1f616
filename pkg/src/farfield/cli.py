"""Command-line pipeline: simulate, extract, train, enhance, trials, score, evaluate, ablate.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import hashlib
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import corpus, sveval, synth, training
from .archive import read_feature_archive, write_feature_archive
from .config import PRESETS, SEN_KIND, UsageError, get_preset, load_config, run_paths
from .features import (
    LOG_MEL,
    FeatureMatrix,
    FrameConfig,
    Waveform,
    MelConfig,
    VadConfig,
    apply_mask,
    energy_vad,
    log_mel,
    mfcc_from_logmel,
    short_time_mean_center,
)
from .models import (
    DiscriminatorConfig,
    FeatureGenerator,
    GeneratorConfig,
    PatchDiscriminator,
    init_parameters,
    load_generator,
)
from .training import NumericalFailure, TrainSchedule, train_cyclegan, train_sen


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def child_seed(seed, *labels) -> int:
    """Stable derived integer seed for one named random stream."""
    text = f"{int(seed)}|" + "|".join(map(str, labels))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little") >> 1


def _frame_config(cfg) -> FrameConfig:
    f = cfg["features"]
    return FrameConfig(f["frame_length"], f["frame_shift"], f["window"], f["fft_size"])


def _mel_config(cfg) -> MelConfig:
    f = cfg["features"]
    return MelConfig(f["n_mels"], f["f_min"], f["f_max"], f["log_floor"])


def _vad_config(cfg) -> VadConfig:
    f = cfg["features"]
    return VadConfig(f["vad_mean_scale"], f["vad_offset"])


def _schedule(cfg, data_seed) -> TrainSchedule:
    s = cfg["schedule"]
    return TrainSchedule(
        batch_size=s["batch_size"], seq_len=s["seq_len"], epochs=s["epochs"],
        constant_epochs=s["constant_epochs"], lr_gen=s["lr_gen"], lr_disc=s["lr_disc"],
        lr_min=s["lr_min"], adam_beta1=s["adam_beta1"], adam_beta2=s["adam_beta2"],
        seed=data_seed,
    )


def _generator_config(cfg) -> GeneratorConfig:
    m = cfg["model"]
    return GeneratorConfig(m["base_filters"], m["n_residual_blocks"])


def _discriminator_config(cfg) -> DiscriminatorConfig:
    return DiscriminatorConfig(filters=tuple(cfg["model"]["disc_filters"]))


def _frame_shift_s(cfg) -> float:
    return cfg["features"]["frame_shift"] / cfg["sample_rate"]


def _require(path: Path, hint: str) -> Path:
    if not Path(path).exists():
        raise FileNotFoundError(f"{hint}: missing {path}")
    return Path(path)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _plan_clip_records(cfg):
    """Deterministic id layout of the synthetic clip corpus (no audio involved)."""
    sim = cfg["simulate"]
    records = []
    for i in range(sim["n_speakers"]):
        speaker = f"spk{i:03d}"
        for u in range(sim["utts_per_speaker"]):
            # mic deliberately decorrelated from session so the same-session
            # same-mic trial filter keeps some target pairs
            session = f"s{u % sim['sessions_per_speaker']}"
            mic = f"m{(u // sim['sessions_per_speaker']) % 2}"
            for p in range(sim["clips_per_utt"]):
                utt = f"{speaker}-{session}-u{u:02d}"
                records.append(corpus.UtteranceRecord(
                    f"{utt}-p{p}", "", speaker, session, mic, "clean"))
    return records


def cmd_simulate(cfg, args) -> int:
    sim = cfg["simulate"]
    seed = cfg["seed"]
    paths = run_paths(cfg)
    sr = cfg["sample_rate"]
    clip_records = _plan_clip_records(cfg)
    utt_ids = sorted({r.utt_id.rsplit("-p", 1)[0] for r in clip_records})
    noise_ids = [f"noise{i:03d}" for i in range(sim["n_noise"])]

    if args.dry_run:
        clean_records = [corpus.UtteranceRecord(u, "", u.split("-")[0], u.split("-")[1], "m0", "clean")
                         for u in utt_ids]
        noise_records = [corpus.UtteranceRecord(n, "", "noise", "s0", "m0", "noise")
                         for n in noise_ids]
        plan = corpus.plan_corruption(
            corpus.CorpusManifest(clean_records, "clean"),
            corpus.CorpusManifest(noise_records, "noise"),
            seed, tuple(sim["rt60_range"]), sim["snr_levels"])
        rt60s = np.array([p.rt60 for p in plan])
        snrs = [p.snr_db for p in plan]
        print(f"plan: {sim['n_speakers']} speakers, {len(utt_ids)} utterances "
              f"({len(clip_records)} clips), {sim['n_noise']} noise files")
        print(f"rt60 draws: min {rt60s.min():.3f} max {rt60s.max():.3f} mean {rt60s.mean():.3f} s")
        for level in sim["snr_levels"]:
            print(f"snr {level:g} dB: {snrs.count(level)} utterances")
        print("dry run: nothing written")
        return 0

    for p in paths.values():
        p.mkdir(parents=True, exist_ok=True)

    # synthesize clips per speaker, concatenate same-utterance clips
    profiles = {f"spk{i:03d}": synth.speaker_profile(i, seed) for i in range(sim["n_speakers"])}
    clip_seconds = sim["utt_seconds"] / sim["clips_per_utt"]
    placed = []
    for rec in clip_records:
        rng = corpus.utterance_rng(seed, rec.utt_id, "synth")
        wave = synth.synth_utterance(profiles[rec.speaker_id], clip_seconds, sr, rng)
        path = paths["clips"] / f"{rec.utt_id}.wav"
        corpus.write_wav(path, wave)
        placed.append(replace(rec, audio_path=str(path)))
    clip_manifest = corpus.CorpusManifest(placed, "clean")
    clean_all = corpus.concat_same_source(
        clip_manifest, group_key=lambda r: r.utt_id.rsplit("-p", 1)[0],
        out_dir=paths["clean"])
    clean_all = corpus.filter_by_snr(clean_all, sim["snr_filter_db"])
    if len(clean_all) == 0:
        raise ValueError("SNR filter removed every utterance; lower simulate.snr_filter_db")

    # noise source corpus
    noise_records = []
    for i, noise_id in enumerate(noise_ids):
        rng = corpus.utterance_rng(seed, noise_id, "synth-noise")
        wave = synth.synth_noise("white" if i % 2 == 0 else "pink", sim["noise_seconds"], sr, rng)
        path = paths["noise_src"] / f"{noise_id}.wav"
        corpus.write_wav(path, wave)
        noise_records.append(corpus.UtteranceRecord(noise_id, str(path), "noise", "s0", "m0", "noise"))
    noise_src = corpus.CorpusManifest(noise_records, "noise")

    # speaker-disjoint train/eval split
    speakers = sorted({r.speaker_id for r in clean_all})
    eval_speakers = set(speakers[len(speakers) - sim["eval_speakers"]:])
    split = {
        "train": corpus.CorpusManifest([r for r in clean_all if r.speaker_id not in eval_speakers], "clean"),
        "eval": corpus.CorpusManifest([r for r in clean_all if r.speaker_id in eval_speakers], "clean"),
    }
    manifests = {}
    for name, clean in split.items():
        if len(clean) == 0:
            raise ValueError(f"empty {name} split; adjust simulate.eval_speakers")
        reverb, paired = corpus.build_parallel_corpus(
            clean, noise_src, paths["reverb"], seed,
            rt60_range=tuple(sim["rt60_range"]), levels=sim["snr_levels"],
            rir_length=int(sim["rir_seconds"] * sr))
        manifests[f"clean_{name}"] = clean
        manifests[f"reverb_noise_{name}"] = reverb
        corpus.write_paired_manifest(paths["manifests"] / f"paired_{name}.tsv", paired)
    manifests["noise_train"] = corpus.build_additive_corpus(
        split["train"], noise_src, paths["noise_domain"], seed, levels=sim["snr_levels"])
    manifests["noise_src"] = noise_src
    for name, manifest in manifests.items():
        corpus.write_manifest(paths["manifests"] / f"{name}.tsv", manifest)
        print(f"{name}: {len(manifest)} utterances")
    return 0


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------

_EXTRACT_SETS = ("clean_train", "clean_eval", "reverb_noise_train", "reverb_noise_eval",
                 "noise_train")


def cmd_extract(cfg, args) -> int:
    paths = run_paths(cfg)
    fcfg, mcfg, vcfg = _frame_config(cfg), _mel_config(cfg), _vad_config(cfg)
    window = cfg["features"]["centering_window"]
    scale = cfg["features"]["amplitude_scale"]
    paths["features"].mkdir(parents=True, exist_ok=True)

    clean_masks = {}

    def process(wave):
        # 16-bit-sample energy scale keeps the VAD offset meaningful;
        # mean centering later removes the constant log offset anyway
        scaled = Waveform(wave.samples * scale, wave.sample_rate)
        raw = log_mel(scaled, fcfg, mcfg)
        mask = energy_vad(raw, vcfg)  # VAD on pre-centering energies
        centered = short_time_mean_center(raw, window)
        return centered, mask

    for name in _EXTRACT_SETS:
        manifest_path = paths["manifests"] / f"{name}.tsv"
        if not manifest_path.exists():
            continue
        manifest = corpus.read_manifest(manifest_path)
        pair_of = {}
        if name.startswith("reverb_noise"):
            split = name.rsplit("_", 1)[1]
            paired = corpus.read_paired_manifest(
                _require(paths["manifests"] / f"paired_{split}.tsv",
                         f"extracting {name} needs its paired manifest"))
            pair_of = dict(paired.pairs)
        out = {}
        kept = total = 0
        for rec in manifest:
            centered, mask = process(corpus.read_wav(rec.audio_path))
            if rec.utt_id in pair_of:
                # paired corpora share the clean twin's mask so frames stay aligned
                mask = clean_masks[pair_of[rec.utt_id]]
            selected = apply_mask(centered, mask)
            if name.startswith("clean"):
                clean_masks[rec.utt_id] = mask
            out[rec.utt_id] = selected.values.astype(np.float32)
            kept += selected.num_frames
            total += centered.num_frames
        write_feature_archive(paths["features"] / f"{name}.fea", out)
        print(f"{name}: {len(out)} utterances, kept {kept}/{total} frames")
    return 0


# ---------------------------------------------------------------------------
# train / enhance
# ---------------------------------------------------------------------------

def _load_archive(path: Path, hint: str) -> dict:
    return read_feature_archive(_require(path, hint))


def cmd_train(cfg, args) -> int:
    preset = get_preset(args.preset or cfg["preset"])
    paths = run_paths(cfg)
    seed = cfg["seed"]
    out_dir = paths["models"] / preset.name
    schedule = _schedule(cfg, child_seed(seed, "data", preset.name))
    gen_cfg = _generator_config(cfg)
    disc_cfg = _discriminator_config(cfg)

    if preset.kind == SEN_KIND:
        pairs = corpus.read_paired_manifest(
            _require(paths["manifests"] / "paired_train.tsv",
                     f"preset {preset.name} trains on paired data"))
        deg = _load_archive(paths["features"] / "reverb_noise_train.fea",
                            f"preset {preset.name} needs degraded training features")
        clean = _load_archive(paths["features"] / "clean_train.fea",
                              f"preset {preset.name} needs clean training features")
        gen = init_parameters(FeatureGenerator(gen_cfg), child_seed(seed, "init", "gen"))
        disc = init_parameters(PatchDiscriminator(disc_cfg), child_seed(seed, "init", "disc"))
        train_sen(pairs, deg, clean, gen, disc, preset.weights, schedule,
                  out_dir=out_dir, log_path=out_dir / "losses.jsonl",
                  checkpoint_every_epoch=not args.no_epoch_checkpoints)
        print(f"trained {preset.name}: checkpoint {out_dir / 'sen.ckpt'}")
    else:
        reverb = _load_archive(paths["features"] / "reverb_noise_train.fea",
                               f"preset {preset.name} needs far-field training features")
        source_name = f"{preset.source_domain}_train"
        source = _load_archive(
            paths["features"] / f"{source_name}.fea",
            f"preset {preset.name} needs a {preset.source_domain}-domain source archive")
        names = (f"reverb2{preset.source_domain}", f"{preset.source_domain}2reverb")
        g_ab = init_parameters(FeatureGenerator(gen_cfg), child_seed(seed, "init", "g_ab"))
        g_ba = init_parameters(FeatureGenerator(gen_cfg), child_seed(seed, "init", "g_ba"))
        d_a = init_parameters(PatchDiscriminator(disc_cfg), child_seed(seed, "init", "d_a"))
        d_b = init_parameters(PatchDiscriminator(disc_cfg), child_seed(seed, "init", "d_b"))
        train_cyclegan(reverb, source, g_ab, g_ba, d_a, d_b, preset.weights, schedule,
                       out_dir=out_dir, log_path=out_dir / "losses.jsonl",
                       checkpoint_every_epoch=not args.no_epoch_checkpoints, names=names)
        print(f"trained {preset.name}: checkpoint {out_dir / f'g_{names[0]}.ckpt'}")
    return 0


def _default_enhancer_path(cfg, preset) -> Path:
    paths = run_paths(cfg)
    if preset.kind == SEN_KIND:
        return paths["models"] / preset.name / "sen.ckpt"
    return paths["models"] / preset.name / f"g_reverb2{preset.source_domain}.ckpt"


def cmd_enhance(cfg, args) -> int:
    preset = get_preset(args.preset or cfg["preset"])
    paths = run_paths(cfg)
    ckpt = Path(args.checkpoint) if args.checkpoint else _default_enhancer_path(cfg, preset)
    gen = load_generator(_require(ckpt, "enhance needs a trained generator checkpoint"))
    in_path = Path(args.in_archive) if args.in_archive else paths["features"] / "reverb_noise_eval.fea"
    out_path = (Path(args.out_archive) if args.out_archive
                else paths["enhanced"] / f"reverb_noise_eval.{preset.name}.fea")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    training.enhance_archive(gen, _require(in_path, "enhance needs an input archive"),
                             out_path, chunk_frames=args.chunk_frames)
    print(f"enhanced {in_path} -> {out_path}")
    return 0


# ---------------------------------------------------------------------------
# trials / score / evaluate
# ---------------------------------------------------------------------------

def _speech_durations(features: dict, shift_s: float) -> dict:
    return {utt: values.shape[0] * shift_s for utt, values in features.items()}


def cmd_trials(cfg, args) -> int:
    paths = run_paths(cfg)
    manifest = corpus.read_manifest(
        _require(paths["manifests"] / "reverb_noise_eval.tsv", "trials need the eval manifest"))
    features = _load_archive(paths["features"] / "reverb_noise_eval.fea",
                             "trials need the eval feature archive")
    durations = _speech_durations(features, _frame_shift_s(cfg))
    ev = cfg["eval"]
    enrolls, skipped = sveval.build_enrollments(manifest, ev["enroll_durations"], durations)
    tests = sveval.build_test_chunks(manifest, durations, ev["chunk_s"], ev["chunk_min_s"])
    trials = sveval.build_trials(enrolls, tests)
    paths["eval"].mkdir(parents=True, exist_ok=True)
    sveval.write_enrollments(paths["eval"] / "enrollments.tsv", enrolls)
    sveval.write_segments(paths["eval"] / "test_segments.tsv", tests)
    sveval.write_trials(paths["eval"] / "trials.tsv", trials)
    n_target = sum(1 for t in trials if t.label == sveval.TARGET)
    print(f"{len(enrolls)} enrollments, {len(tests)} test chunks, "
          f"{len(trials)} trials ({n_target} target)")
    for speaker, duration, available in skipped:
        print(f"skipped {speaker} at {duration:g}s: only {available:g}s of speech")
    return 0


def _embedder(cfg):
    paths = run_paths(cfg)
    path = paths["models"] / "embedder.ckpt"
    if path.exists():
        return sveval.load_embedder(path)
    e = cfg["embedder"]
    name = e["train_archive"]
    features = _load_archive(paths["features"] / f"{name}.fea",
                             "embedder training needs its feature archive")
    manifest = corpus.read_manifest(
        _require(paths["manifests"] / f"{name}.tsv", "embedder training needs its manifest"))
    mel_dim = cfg["features"]["n_mels"]
    # the embedder consumes DCT-compressed features, same dimensionality
    mfcc_features = {}
    for utt, values in features.items():
        fm = FeatureMatrix(values.astype(np.float64), LOG_MEL)
        mfcc_features[utt] = mfcc_from_logmel(fm, mel_dim).values.astype(np.float32)
    speakers = {r.utt_id: r.speaker_id for r in manifest}
    model = sveval.train_embedder(
        mfcc_features, speakers,
        sveval.EmbedderConfig(mel_dim, e["hidden_dim"], e["embed_dim"],
                              tuple(e["kernel_sizes"]), tuple(e["dilations"])),
        epochs=e["epochs"], seq_len=e["seq_len"], batch_size=e["batch_size"],
        lr=e["lr"], seed=child_seed(cfg["seed"], "embedder"))
    path.parent.mkdir(parents=True, exist_ok=True)
    sveval.save_embedder(path, model)
    print(f"trained embedder -> {path}")
    return model


def _resolve_feature_archive(cfg, keyword: str) -> Path:
    paths = run_paths(cfg)
    if keyword == "baseline":
        return paths["features"] / "reverb_noise_eval.fea"
    if keyword == "enhanced":
        preset = get_preset(cfg["preset"])
        return paths["enhanced"] / f"reverb_noise_eval.{preset.name}.fea"
    return Path(keyword)


def cmd_score(cfg, args) -> int:
    paths = run_paths(cfg)
    trials = sveval.read_trials(_require(paths["eval"] / "trials.tsv",
                                         "score needs the trial list (run `trials` first)"))
    enrolls = sveval.read_enrollments(paths["eval"] / "enrollments.tsv")
    tests = sveval.read_segments(paths["eval"] / "test_segments.tsv")
    archive = _resolve_feature_archive(cfg, args.features)
    features = _load_archive(archive, "score needs the feature archive")
    model = _embedder(cfg)
    scored = sveval.score_trials(model, trials, enrolls, tests, features, _frame_shift_s(cfg))
    name = args.name or args.features
    out = paths["eval"] / f"scores_{name}.tsv"
    sveval.write_scores(out, scored)
    print(f"scored {len(scored)} trials from {archive} -> {out}")
    return 0


def _metrics_from_file(cfg, trials, score_path):
    labels_by_key = {(t.enroll_id, t.test_id): t.label for t in trials}
    rows = sveval.read_scores(score_path)
    scores, labels = [], []
    for enroll_id, test_id, score in rows:
        key = (enroll_id, test_id)
        if key not in labels_by_key:
            raise ValueError(f"{score_path}: trial {key} not in the trial list")
        scores.append(score)
        labels.append(labels_by_key[key] == sveval.TARGET)
    return np.asarray(scores), np.asarray(labels, dtype=bool)


def cmd_evaluate(cfg, args) -> int:
    paths = run_paths(cfg)
    trials = sveval.read_trials(_require(paths["eval"] / "trials.tsv",
                                         "evaluate needs the trial list"))
    dcf_cfg = cfg["eval"]["dcf"]
    dcf = sveval.DcfParams(dcf_cfg["p_target"], dcf_cfg["c_miss"], dcf_cfg["c_fa"])
    names = args.scores or ["baseline", "enhanced"]
    blocks, summary = [], []
    for name in names:
        path = Path(name) if name.endswith(".tsv") else paths["eval"] / f"scores_{name}.tsv"
        label = Path(name).stem.replace("scores_", "") if name.endswith(".tsv") else name
        scores, labels = _metrics_from_file(cfg, trials, _require(path, "evaluate needs scores"))
        blocks.append(sveval.format_report(label, scores, labels, dcf))
        summary.append((label, sveval.compute_eer(scores, labels),
                        sveval.compute_min_dcf(scores, labels, dcf)))
    report = "\n\n".join(blocks)
    if len(summary) > 1:
        width = max(len(s[0]) for s in summary)
        table = ["", "system".ljust(width) + "  eer_percent  min_dcf"]
        for label, eer, mindcf in summary:
            table.append(f"{label.ljust(width)}  {100 * eer:11.4f}  {mindcf:.6f}")
        report += "\n" + "\n".join(table)
    paths["eval"].mkdir(parents=True, exist_ok=True)
    (paths["eval"] / "report.txt").write_text(report + "\n", encoding="utf-8")
    print(report)
    return 0


def cmd_ablate(cfg, args) -> int:
    """Train/enhance/score every supervised preset and tabulate the comparison."""
    paths = run_paths(cfg)
    presets = ["SEN1", "SEN2", "SEN3", "SEN4", "SEN5"]
    ns = argparse.Namespace(preset=None, no_epoch_checkpoints=True, checkpoint=None,
                            in_archive=None, out_archive=None, chunk_frames=None)
    rows = []
    trials = sveval.read_trials(_require(paths["eval"] / "trials.tsv",
                                         "ablate needs the trial list (run `trials` first)"))
    dcf_cfg = cfg["eval"]["dcf"]
    dcf = sveval.DcfParams(dcf_cfg["p_target"], dcf_cfg["c_miss"], dcf_cfg["c_fa"])

    scores, labels = _metrics_from_file(
        cfg, trials, _require(paths["eval"] / "scores_baseline.tsv",
                              "ablate needs baseline scores (run `score --features baseline`)"))
    rows.append(("BL", "-", "-", sveval.compute_eer(scores, labels),
                 sveval.compute_min_dcf(scores, labels, dcf)))

    for name in presets:
        ns.preset = name
        cmd_train(cfg, ns)
        cmd_enhance(cfg, ns)
        preset = get_preset(name)
        score_args = argparse.Namespace(
            features=str(paths["enhanced"] / f"reverb_noise_eval.{name}.fea"), name=name)
        cmd_score(cfg, score_args)
        scores, labels = _metrics_from_file(cfg, trials, paths["eval"] / f"scores_{name}.tsv")
        rows.append((name, f"{preset.weights.lambda_fm:g}", f"{preset.weights.lambda_adv:g}",
                     sveval.compute_eer(scores, labels),
                     sveval.compute_min_dcf(scores, labels, dcf)))

    lines = ["system  lambda_fm  lambda_adv  eer_percent  min_dcf"]
    for name, lam_fm, lam_adv, eer, mindcf in rows:
        lines.append(f"{name:6s}  {lam_fm:9s}  {lam_adv:10s}  {100 * eer:11.4f}  {mindcf:.6f}")
    table = "\n".join(lines)
    (paths["eval"] / "ablation.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="farfield", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", default=None, help="YAML config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY.PATH=VALUE",
                       help="override a config entry")
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "synthesize the corpus and its degraded twin")
    p.add_argument("--dry-run", action="store_true", help="print the plan without writing")

    add("extract", cmd_extract, "extract centered, VAD-selected log-mel archives")

    p = add("train", cmd_train, "train an enhancement / adaptation network")
    p.add_argument("--preset", default=None, choices=sorted(PRESETS))
    p.add_argument("--no-epoch-checkpoints", action="store_true")

    p = add("enhance", cmd_enhance, "map a feature archive through a trained generator")
    p.add_argument("--preset", default=None, choices=sorted(PRESETS))
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--in-archive", dest="in_archive", default=None)
    p.add_argument("--out-archive", dest="out_archive", default=None)
    p.add_argument("--chunk-frames", type=int, default=None)

    add("trials", cmd_trials, "build enrollments, test chunks and the trial list")

    p = add("score", cmd_score, "embed segments and score all trials")
    p.add_argument("--features", default="baseline",
                   help="'baseline', 'enhanced', or an archive path")
    p.add_argument("--name", default=None, help="output score-set name")

    p = add("evaluate", cmd_evaluate, "EER / minDCF report over score sets")
    p.add_argument("--scores", nargs="*", default=None,
                   help="score-set names or .tsv paths (default: baseline enhanced)")

    add("ablate", cmd_ablate, "run all supervised presets and tabulate them")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config, args.set)
        return args.func(cfg, args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except NumericalFailure as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except (OSError, ValueError, KeyError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
