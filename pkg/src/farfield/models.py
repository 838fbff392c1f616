"""Residual encoder-decoder generator and patch discriminator for T x F feature maps."""

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .checkpoint import load_checkpoint, save_checkpoint

INSTANCE_NORM_EPS = 1e-5
INIT_STD = 0.02


@dataclass(frozen=True)
class GeneratorConfig:
    base_filters: int = 32
    n_residual_blocks: int = 9
    use_input_shortcut: bool = True

    def __post_init__(self):
        if self.base_filters < 1:
            raise ValueError("base_filters must be >= 1")
        if self.n_residual_blocks < 0:
            raise ValueError("n_residual_blocks must be >= 0")


@dataclass(frozen=True)
class DiscriminatorConfig:
    filters: tuple = (64, 128, 256, 512, 1)
    strides: tuple = (2, 2, 2, 1, 1)
    kernel: int = 4
    leaky_slope: float = 0.2


# topology-preserving small preset for CPU runs
DESK_GENERATOR = GeneratorConfig(base_filters=8, n_residual_blocks=2)
DESK_DISCRIMINATOR = DiscriminatorConfig(filters=(16, 32, 64, 128, 1))


class InstanceNorm(nn.Module):
    """Affine per-channel, per-sample normalization over the spatial dims.

    Unlike nn.InstanceNorm2d this accepts 1x1 spatial maps (the normalized
    value is then 0), which the generator hits at its bottleneck for very
    small inputs.
    """

    def __init__(self, channels: int, eps: float = INSTANCE_NORM_EPS):
        super().__init__()
        self.eps = eps
        self.affine = True
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x):
        mean = x.mean(dim=(2, 3), keepdim=True)
        var = x.var(dim=(2, 3), keepdim=True, unbiased=False)
        xhat = (x - mean) / torch.sqrt(var + self.eps)
        return xhat * self.weight[None, :, None, None] + self.bias[None, :, None, None]


class ResidualBlock(nn.Module):
    """Two 3x3 conv layers with instance norm and an additive skip."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.norm1 = InstanceNorm(channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.norm2 = InstanceNorm(channels)

    def forward(self, x):
        y = F.relu(self.norm1(self.conv1(x)))
        y = self.norm2(self.conv2(y))
        return x + y


class FeatureGenerator(nn.Module):
    """Encoder (strides 1,2,2) -> residual blocks -> decoder (2 transposed stages).

    Input is treated as a 1-channel image over (time, mel). The decoder targets
    the encoder's recorded sizes, so odd extents are restored exactly, and the
    input shortcut makes the network an exact identity at zero parameters.
    """

    def __init__(self, config: GeneratorConfig = GeneratorConfig()):
        super().__init__()
        self.config = config
        bf = config.base_filters
        self.enc1 = nn.Conv2d(1, bf, 3, 1, 1)  # no norm on the first layer
        self.enc2 = nn.Conv2d(bf, 2 * bf, 3, 2, 1)
        self.enc2_norm = InstanceNorm(2 * bf)
        self.enc3 = nn.Conv2d(2 * bf, 4 * bf, 3, 2, 1)
        self.enc3_norm = InstanceNorm(4 * bf)
        self.blocks = nn.ModuleList(ResidualBlock(4 * bf) for _ in range(config.n_residual_blocks))
        self.dec1 = nn.ConvTranspose2d(4 * bf, 2 * bf, 3, 2, 1)
        self.dec1_norm = InstanceNorm(2 * bf)
        self.dec2 = nn.ConvTranspose2d(2 * bf, bf, 3, 2, 1)
        self.dec2_norm = InstanceNorm(bf)
        self.out = nn.Conv2d(bf, 1, 3, 1, 1)  # no norm, no activation on the last layer

    def forward(self, x):
        if x.shape[-1] < 4:
            raise ValueError(f"generator needs F >= 4, got F={x.shape[-1]}")
        size0 = x.shape[-2:]
        h = F.relu(self.enc1(x))
        h = F.relu(self.enc2_norm(self.enc2(h)))
        size1 = h.shape[-2:]
        h = F.relu(self.enc3_norm(self.enc3(h)))
        for block in self.blocks:
            h = block(h)
        h = F.relu(self.dec1_norm(self.dec1(h, output_size=size1)))
        h = F.relu(self.dec2_norm(self.dec2(h, output_size=size0)))
        h = self.out(h)
        return x + h if self.config.use_input_shortcut else h


class PatchDiscriminator(nn.Module):
    """Five conv layers (kernel 4), leaky activations, linear patch-score output."""

    def __init__(self, config: DiscriminatorConfig = DiscriminatorConfig()):
        super().__init__()
        self.config = config
        channels = (1,) + tuple(config.filters)
        self.convs = nn.ModuleList(
            nn.Conv2d(channels[i], channels[i + 1], config.kernel, config.strides[i], 0)
            for i in range(len(config.filters))
        )

    def forward(self, x):
        t, f = x.shape[-2], x.shape[-1]
        if t < 8 or f < 8:
            raise ValueError(f"discriminator needs at least 8x8 input, got {t}x{f}")
        h = x
        for i, conv in enumerate(self.convs):
            h = _pad_same(h, self.config.kernel, self.config.strides[i])
            h = conv(h)
            if i < len(self.convs) - 1:
                h = F.leaky_relu(h, self.config.leaky_slope)
        return h


def _pad_same(x, kernel: int, stride: int):
    """Asymmetric zero padding so conv output extent is ceil(input / stride)."""
    pads = []
    for size in (x.shape[-1], x.shape[-2]):  # F.pad wants last dim first
        out = -(-size // stride)
        total = max((out - 1) * stride + kernel - size, 0)
        pads.extend([total // 2, total - total // 2])
    return F.pad(x, pads)


def discriminator_map_shape(cfg: DiscriminatorConfig, t: int, f: int):
    """(T', F') of the score map from the per-layer ceil(size / stride) arithmetic."""
    for stride in cfg.strides:
        t = -(-t // stride)
        f = -(-f // stride)
    return t, f


def init_parameters(module: nn.Module, seed: int) -> nn.Module:
    """Conv weights ~ N(0, 0.02); norm scales 1, all offsets 0. Deterministic in seed."""
    gen = torch.Generator().manual_seed(int(seed))
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Conv1d, nn.Linear)):
            with torch.no_grad():
                m.weight.normal_(0.0, INIT_STD, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, (InstanceNorm, nn.BatchNorm1d)) and m.affine:
            with torch.no_grad():
                m.weight.fill_(1.0)
                m.bias.zero_()
    return module


def zero_parameters(module: nn.Module) -> nn.Module:
    """Zero every parameter; with the input shortcut this makes a generator the identity."""
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


def _as_batch(x: np.ndarray) -> torch.Tensor:
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError(f"expected a T x F matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    return torch.from_numpy(np.ascontiguousarray(x, dtype=np.float32))[None, None]


def generator_forward(g: FeatureGenerator, x: np.ndarray) -> np.ndarray:
    """Map one T x F matrix through the generator (inference, no grad)."""
    with torch.no_grad():
        return g(_as_batch(x))[0, 0].numpy()


def discriminator_forward(d: PatchDiscriminator, x: np.ndarray) -> np.ndarray:
    """Score map for one T x F matrix."""
    with torch.no_grad():
        return d(_as_batch(x))[0, 0].numpy()


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


# ---------------------------------------------------------------------------
# checkpoint plumbing
# ---------------------------------------------------------------------------

_KIND_GENERATOR = "generator"
_KIND_DISCRIMINATOR = "discriminator"


def module_arrays(module: nn.Module, prefix: str = "model.") -> dict:
    return {prefix + k: v.detach().numpy() for k, v in module.state_dict().items()}


def load_module_arrays(module: nn.Module, arrays: dict, prefix: str = "model.") -> None:
    state = {}
    for k, v in arrays.items():
        if k.startswith(prefix):
            state[k[len(prefix):]] = torch.from_numpy(np.asarray(v, dtype=np.float32))
    module.load_state_dict(state)


def save_generator(path, g: FeatureGenerator, extra_config=None, extra_arrays=None) -> None:
    config = {"model": asdict(g.config)}
    if extra_config:
        config.update(extra_config)
    arrays = module_arrays(g)
    if extra_arrays:
        arrays.update(extra_arrays)
    save_checkpoint(path, _KIND_GENERATOR, config, arrays)


def load_generator(path) -> FeatureGenerator:
    kind, config, arrays = load_checkpoint(path)
    if kind != _KIND_GENERATOR:
        raise ValueError(f"{path}: checkpoint kind {kind!r}, expected {_KIND_GENERATOR!r}")
    g = FeatureGenerator(GeneratorConfig(**config["model"]))
    load_module_arrays(g, arrays)
    return g


def save_discriminator(path, d: PatchDiscriminator, extra_config=None, extra_arrays=None) -> None:
    config = {"model": asdict(d.config)}
    if extra_config:
        config.update(extra_config)
    arrays = module_arrays(d)
    if extra_arrays:
        arrays.update(extra_arrays)
    save_checkpoint(path, _KIND_DISCRIMINATOR, config, arrays)


def load_discriminator(path) -> PatchDiscriminator:
    kind, config, arrays = load_checkpoint(path)
    if kind != _KIND_DISCRIMINATOR:
        raise ValueError(f"{path}: checkpoint kind {kind!r}, expected {_KIND_DISCRIMINATOR!r}")
    d = PatchDiscriminator(DiscriminatorConfig(
        filters=tuple(config["model"]["filters"]),
        strides=tuple(config["model"]["strides"]),
        kernel=config["model"]["kernel"],
        leaky_slope=config["model"]["leaky_slope"],
    ))
    load_module_arrays(d, arrays)
    return d
