"""Paired and unpaired training loops, LR schedule, epoch batching, bulk enhancement."""

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .archive import read_feature_archive, write_feature_archive
from .checkpoint import load_checkpoint, save_checkpoint
from .losses import LossWeights, cyclegan_generator_terms, loss_adv_gen, loss_disc, loss_fm
from .models import (
    FeatureGenerator,
    PatchDiscriminator,
    load_module_arrays,
    module_arrays,
    save_generator,
)

# distinct seed-derivation streams so data sampling never collides across uses
_STREAM_CROPS = 11
_STREAM_UNPAIRED = 13


class NumericalFailure(RuntimeError):
    """Raised when a training loss stops being finite."""


@dataclass(frozen=True)
class TrainSchedule:
    batch_size: int = 32
    seq_len: int = 127
    epochs: int = 50
    constant_epochs: int = 15
    lr_gen: float = 3e-4
    lr_disc: float = 1e-4
    lr_min: float = 1e-6
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.constant_epochs < self.epochs:
            raise ValueError("require 0 <= constant_epochs < epochs")
        if self.lr_min > min(self.lr_gen, self.lr_disc):
            raise ValueError("lr_min must not exceed the base learning rates")


def lr_at(s: TrainSchedule, epoch: int, base_lr: float) -> float:
    """Base LR through the constant epochs, then linear decay to lr_min at the last epoch."""
    if not 0 <= epoch < s.epochs:
        raise ValueError(f"epoch {epoch} outside schedule range [0, {s.epochs})")
    last = s.epochs - 1
    if epoch < s.constant_epochs or last == s.constant_epochs:
        return base_lr
    frac = (epoch - s.constant_epochs) / (last - s.constant_epochs)
    return base_lr + frac * (s.lr_min - base_lr)


def crop_frames(values: np.ndarray, offset: int, seq_len: int) -> np.ndarray:
    """seq_len frames starting at offset; short inputs are cyclically tiled."""
    t = values.shape[0]
    idx = (offset + np.arange(seq_len)) % t
    return values[idx]


def epoch_batches(features: dict, s: TrainSchedule, seed: int, epoch: int):
    """One epoch of shuffled batches: exactly one random crop per utterance.

    Yields (utt_ids, array of shape B x seq_len x F); the final partial batch
    is kept. Short utterances are tiled to seq_len.
    """
    if not features:
        raise ValueError("empty feature set")
    rng = np.random.default_rng(np.random.SeedSequence([_STREAM_CROPS, int(seed), int(epoch)]))
    ids = list(features.keys())
    order = rng.permutation(len(ids))
    crops, batch_ids = [], []
    for i in order:
        utt_id = ids[int(i)]
        values = features[utt_id]
        offset = int(rng.integers(max(values.shape[0] - s.seq_len + 1, 1)))
        crops.append(crop_frames(values, offset, s.seq_len))
        batch_ids.append(utt_id)
        if len(crops) == s.batch_size:
            yield batch_ids, np.stack(crops)
            crops, batch_ids = [], []
    if crops:
        yield batch_ids, np.stack(crops)


def paired_epoch_batches(pairs, deg_features: dict, clean_features: dict,
                         s: TrainSchedule, seed: int, epoch: int):
    """Paired batches with shared crop offsets; one crop per clean utterance per epoch."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty paired manifest")
    rng = np.random.default_rng(np.random.SeedSequence([_STREAM_CROPS, int(seed), int(epoch)]))
    order = rng.permutation(len(pairs))
    deg_crops, clean_crops, batch_ids = [], [], []
    for i in order:
        deg_id, clean_id = pairs[int(i)]
        deg = deg_features[deg_id]
        clean = clean_features[clean_id]
        if deg.shape[0] != clean.shape[0]:
            raise ValueError(
                f"paired frame counts differ for ({deg_id}, {clean_id}): "
                f"{deg.shape[0]} vs {clean.shape[0]}; extract the degraded corpus "
                "with VAD masks taken from the clean twin"
            )
        offset = int(rng.integers(max(clean.shape[0] - s.seq_len + 1, 1)))
        deg_crops.append(crop_frames(deg, offset, s.seq_len))
        clean_crops.append(crop_frames(clean, offset, s.seq_len))
        batch_ids.append(clean_id)
        if len(deg_crops) == s.batch_size:
            yield batch_ids, np.stack(deg_crops), np.stack(clean_crops)
            deg_crops, clean_crops, batch_ids = [], [], []
    if deg_crops:
        yield batch_ids, np.stack(deg_crops), np.stack(clean_crops)


def unpaired_epoch_batches(ref_features: dict, other_features: dict,
                           s: TrainSchedule, seed: int, epoch: int):
    """Unpaired batches: one crop per reference utterance, independent draws from the other."""
    if not ref_features or not other_features:
        raise ValueError("empty feature set")
    rng = np.random.default_rng(np.random.SeedSequence([_STREAM_UNPAIRED, int(seed), int(epoch)]))
    ref_ids = list(ref_features.keys())
    other_ids = list(other_features.keys())
    order = rng.permutation(len(ref_ids))
    ref_crops, other_crops = [], []
    for i in order:
        ref = ref_features[ref_ids[int(i)]]
        other = other_features[other_ids[int(rng.integers(len(other_ids)))]]
        ref_off = int(rng.integers(max(ref.shape[0] - s.seq_len + 1, 1)))
        other_off = int(rng.integers(max(other.shape[0] - s.seq_len + 1, 1)))
        ref_crops.append(crop_frames(ref, ref_off, s.seq_len))
        other_crops.append(crop_frames(other, other_off, s.seq_len))
        if len(ref_crops) == s.batch_size:
            yield np.stack(ref_crops), np.stack(other_crops)
            ref_crops, other_crops = [], []
    if ref_crops:
        yield np.stack(ref_crops), np.stack(other_crops)


def _to_batch(x: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(x, dtype=np.float32)).unsqueeze(1)


def _check_finite(value: float, out_dir, nets: dict, context: str):
    if np.isfinite(value):
        return
    path = None
    if out_dir is not None:
        path = Path(out_dir) / "diagnostic_nan.ckpt"
        arrays = {}
        for name, net in nets.items():
            arrays.update(module_arrays(net, prefix=f"{name}."))
        save_checkpoint(path, "diagnostic", {"context": context}, arrays)
    raise NumericalFailure(f"non-finite loss at {context}" + (f"; snapshot at {path}" if path else ""))


class _LossLog:
    def __init__(self, path):
        self.path = Path(path) if path else None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._f = open(self.path, "a", encoding="utf-8")

    def write(self, record: dict):
        if self.path:
            self._f.write(json.dumps(record) + "\n")
            self._f.flush()

    def close(self):
        if self.path:
            self._f.close()


def _optimizer_arrays(opt, prefix: str) -> dict:
    arrays = {}
    params = [p for group in opt.param_groups for p in group["params"]]
    for i, p in enumerate(params):
        state = opt.state.get(p)
        if not state:
            continue
        arrays[f"{prefix}.{i}.step"] = np.asarray(float(state["step"]), dtype=np.float32)
        arrays[f"{prefix}.{i}.exp_avg"] = state["exp_avg"].numpy()
        arrays[f"{prefix}.{i}.exp_avg_sq"] = state["exp_avg_sq"].numpy()
    return arrays


def _load_optimizer_arrays(opt, arrays: dict, prefix: str) -> None:
    params = [p for group in opt.param_groups for p in group["params"]]
    for i, p in enumerate(params):
        key = f"{prefix}.{i}.step"
        if key not in arrays:
            continue
        opt.state[p] = {
            "step": torch.tensor(float(arrays[key])),
            "exp_avg": torch.from_numpy(np.array(arrays[f"{prefix}.{i}.exp_avg"])),
            "exp_avg_sq": torch.from_numpy(np.array(arrays[f"{prefix}.{i}.exp_avg_sq"])),
        }


def _make_adam(params, s: TrainSchedule, lr: float):
    return torch.optim.Adam(params, lr=lr, betas=(s.adam_beta1, s.adam_beta2), eps=s.adam_eps)


def _set_lr(opt, lr: float):
    for group in opt.param_groups:
        group["lr"] = lr


def train_sen(pairs, deg_features: dict, clean_features: dict,
              generator: FeatureGenerator, discriminator: PatchDiscriminator,
              w: LossWeights, s: TrainSchedule, out_dir=None,
              log_path=None, resume_from=None, checkpoint_every_epoch=True):
    """Train the supervised enhancement generator on paired degraded-clean features.

    Per step the discriminator is updated first (generator output detached),
    then the generator on the weighted FM + adversarial objective. Returns the
    trained (generator, discriminator).
    """
    torch.set_num_threads(1)  # keeps runs reproducible on any host
    pairs = list(pairs)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    opt_g = _make_adam(generator.parameters(), s, s.lr_gen)
    opt_d = _make_adam(discriminator.parameters(), s, s.lr_disc)
    start_epoch, step = 0, 0
    if resume_from is not None:
        kind, config, arrays = load_checkpoint(resume_from)
        if kind != "sen_train_state":
            raise ValueError(f"{resume_from}: not a SEN training state checkpoint")
        load_module_arrays(generator, arrays, "gen.")
        load_module_arrays(discriminator, arrays, "disc.")
        _load_optimizer_arrays(opt_g, arrays, "opt_g")
        _load_optimizer_arrays(opt_d, arrays, "opt_d")
        start_epoch = int(config["next_epoch"])
        step = int(config["step"])
    log = _LossLog(log_path)
    adversarial = w.lambda_adv > 0
    try:
        for epoch in range(start_epoch, s.epochs):
            _set_lr(opt_g, lr_at(s, epoch, s.lr_gen))
            _set_lr(opt_d, lr_at(s, epoch, s.lr_disc))
            for _, deg_np, clean_np in paired_epoch_batches(
                    pairs, deg_features, clean_features, s, s.seed, epoch):
                x_deg = _to_batch(deg_np)
                x_clean = _to_batch(clean_np)
                record = {"step": step, "epoch": epoch,
                          "lr_gen": lr_at(s, epoch, s.lr_gen),
                          "lr_disc": lr_at(s, epoch, s.lr_disc)}
                if adversarial:
                    with torch.no_grad():
                        fake = generator(x_deg)
                    ld = loss_disc(discriminator(x_clean), discriminator(fake))
                    opt_d.zero_grad()
                    ld.backward()
                    opt_d.step()
                    record["loss_disc"] = ld.detach().item()
                    _check_finite(record["loss_disc"], out_dir,
                                  {"gen": generator, "disc": discriminator},
                                  f"disc step {step}")
                y = generator(x_deg)
                fm = loss_fm(y, x_clean)
                total = w.lambda_fm * fm
                record["loss_fm"] = fm.detach().item()
                if adversarial:
                    adv = loss_adv_gen(discriminator(y))
                    total = total + w.lambda_adv * adv
                    record["loss_adv"] = adv.detach().item()
                opt_g.zero_grad()
                total.backward()
                opt_g.step()
                record["total"] = total.detach().item()
                _check_finite(record["total"], out_dir,
                              {"gen": generator, "disc": discriminator},
                              f"generator step {step}")
                log.write(record)
                step += 1
            if out_dir and checkpoint_every_epoch:
                _save_sen_state(out_dir / f"sen_state_e{epoch:03d}.ckpt",
                                generator, discriminator, opt_g, opt_d, s, w, epoch + 1, step)
        if out_dir:
            _save_sen_state(out_dir / "sen_state.ckpt",
                            generator, discriminator, opt_g, opt_d, s, w, s.epochs, step)
            save_generator(out_dir / "sen.ckpt", generator, extra_config={"role": "sen"})
    finally:
        log.close()
    return generator, discriminator


def _save_sen_state(path, generator, discriminator, opt_g, opt_d, s, w, next_epoch, step):
    arrays = module_arrays(generator, "gen.")
    arrays.update(module_arrays(discriminator, "disc."))
    arrays.update(_optimizer_arrays(opt_g, "opt_g"))
    arrays.update(_optimizer_arrays(opt_d, "opt_d"))
    save_checkpoint(path, "sen_train_state",
                    {"schedule": asdict(s), "weights": asdict(w),
                     "next_epoch": next_epoch, "step": step,
                     "gen_config": asdict(generator.config)},
                    arrays)


def train_cyclegan(a_features: dict, b_features: dict,
                   g_ab: FeatureGenerator, g_ba: FeatureGenerator,
                   d_a: PatchDiscriminator, d_b: PatchDiscriminator,
                   w: LossWeights, s: TrainSchedule, out_dir=None,
                   log_path=None, resume_from=None, checkpoint_every_epoch=True,
                   names=("a2b", "b2a")):
    """Train the unpaired mappers between domains a (reverberant) and b (chosen source).

    Epochs are defined over domain b: each b utterance contributes one crop per
    epoch, a-side crops are drawn uniformly at random. Both discriminators are
    updated first, then the two generators jointly on the cycle + adversarial
    objective. Returns (g_ab, g_ba, d_a, d_b).
    """
    torch.set_num_threads(1)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    opt_g = _make_adam(list(g_ab.parameters()) + list(g_ba.parameters()), s, s.lr_gen)
    opt_da = _make_adam(d_a.parameters(), s, s.lr_disc)
    opt_db = _make_adam(d_b.parameters(), s, s.lr_disc)
    nets = {"g_ab": g_ab, "g_ba": g_ba, "d_a": d_a, "d_b": d_b}
    start_epoch, step = 0, 0
    if resume_from is not None:
        kind, config, arrays = load_checkpoint(resume_from)
        if kind != "cyclegan_train_state":
            raise ValueError(f"{resume_from}: not a CycleGAN training state checkpoint")
        for name, net in nets.items():
            load_module_arrays(net, arrays, f"{name}.")
        _load_optimizer_arrays(opt_g, arrays, "opt_g")
        _load_optimizer_arrays(opt_da, arrays, "opt_da")
        _load_optimizer_arrays(opt_db, arrays, "opt_db")
        start_epoch = int(config["next_epoch"])
        step = int(config["step"])
    log = _LossLog(log_path)
    try:
        for epoch in range(start_epoch, s.epochs):
            _set_lr(opt_g, lr_at(s, epoch, s.lr_gen))
            _set_lr(opt_da, lr_at(s, epoch, s.lr_disc))
            _set_lr(opt_db, lr_at(s, epoch, s.lr_disc))
            for b_np, a_np in unpaired_epoch_batches(b_features, a_features, s, s.seed, epoch):
                x_a = _to_batch(a_np)
                x_b = _to_batch(b_np)
                with torch.no_grad():
                    fake_b = g_ab(x_a)
                    fake_a = g_ba(x_b)
                ld_b = loss_disc(d_b(x_b), d_b(fake_b))
                opt_db.zero_grad()
                ld_b.backward()
                opt_db.step()
                ld_a = loss_disc(d_a(x_a), d_a(fake_a))
                opt_da.zero_grad()
                ld_a.backward()
                opt_da.step()
                total, parts = cyclegan_generator_terms(w, g_ab, g_ba, d_a, d_b, x_a, x_b)
                opt_g.zero_grad()
                total.backward()
                opt_g.step()
                record = {"step": step, "epoch": epoch,
                          "loss_disc_a": ld_a.detach().item(), "loss_disc_b": ld_b.detach().item(),
                          "total": total.detach().item(),
                          "lr_gen": lr_at(s, epoch, s.lr_gen),
                          "lr_disc": lr_at(s, epoch, s.lr_disc)}
                record.update(parts)
                _check_finite(record["total"] + record["loss_disc_a"] + record["loss_disc_b"], out_dir, nets,
                              f"cyclegan step {step}")
                log.write(record)
                step += 1
            if out_dir and checkpoint_every_epoch:
                _save_cyclegan_state(out_dir / f"cyclegan_state_e{epoch:03d}.ckpt",
                                     nets, opt_g, opt_da, opt_db, s, w, epoch + 1, step)
        if out_dir:
            _save_cyclegan_state(out_dir / "cyclegan_state.ckpt",
                                 nets, opt_g, opt_da, opt_db, s, w, s.epochs, step)
            save_generator(out_dir / f"g_{names[0]}.ckpt", g_ab, extra_config={"role": names[0]})
            save_generator(out_dir / f"g_{names[1]}.ckpt", g_ba, extra_config={"role": names[1]})
    finally:
        log.close()
    return g_ab, g_ba, d_a, d_b


def _save_cyclegan_state(path, nets, opt_g, opt_da, opt_db, s, w, next_epoch, step):
    arrays = {}
    for name, net in nets.items():
        arrays.update(module_arrays(net, f"{name}."))
    arrays.update(_optimizer_arrays(opt_g, "opt_g"))
    arrays.update(_optimizer_arrays(opt_da, "opt_da"))
    arrays.update(_optimizer_arrays(opt_db, "opt_db"))
    save_checkpoint(path, "cyclegan_train_state",
                    {"schedule": asdict(s), "weights": asdict(w),
                     "next_epoch": next_epoch, "step": step,
                     "gen_config": asdict(nets["g_ab"].config)},
                    arrays)


def enhance_features(g: FeatureGenerator, features: dict, chunk_frames=None) -> dict:
    """Map every utterance through the generator, preserving frame counts.

    Full-utterance inference is the default. With chunk_frames set, utterances
    are processed in consecutive chunks; instance normalization then sees each
    chunk in isolation, so values near chunk boundaries can differ slightly
    from full-utterance inference.
    """
    out = {}
    with torch.no_grad():
        for utt_id, values in features.items():
            x = np.ascontiguousarray(values, dtype=np.float32)
            if chunk_frames is None or x.shape[0] <= chunk_frames:
                y = g(torch.from_numpy(x)[None, None])[0, 0].numpy()
            else:
                parts = []
                for lo in range(0, x.shape[0], chunk_frames):
                    chunk = x[lo : lo + chunk_frames]
                    parts.append(g(torch.from_numpy(chunk)[None, None])[0, 0].numpy())
                y = np.concatenate(parts, axis=0)
            out[utt_id] = y
    return out


def enhance_archive(g: FeatureGenerator, in_path, out_path, chunk_frames=None) -> None:
    """Archive-to-archive enhancement with frame counts preserved."""
    features = read_feature_archive(in_path)
    write_feature_archive(out_path, enhance_features(g, features, chunk_frames))
