"""Training objectives: L1 feature mapping, least-squares adversarial terms, cycle consistency."""

from dataclasses import dataclass

import torch


@dataclass(frozen=True)
class LossWeights:
    lambda_fm: float = 1.0
    lambda_adv: float = 0.1
    lambda_cyc: float = 0.0

    def __post_init__(self):
        if min(self.lambda_fm, self.lambda_adv, self.lambda_cyc) < 0:
            raise ValueError("loss weights must be >= 0")
        if self.lambda_fm == self.lambda_adv == self.lambda_cyc == 0:
            raise ValueError("at least one loss weight must be positive")


def loss_fm(y_enh, x_clean):
    """Mean absolute difference between enhanced and reference features."""
    if y_enh.shape != x_clean.shape:
        raise ValueError(f"shape mismatch: {tuple(y_enh.shape)} vs {tuple(x_clean.shape)}")
    return torch.mean(torch.abs(y_enh - x_clean))


def loss_disc(d_real, d_fake):
    """Least-squares discriminator objective: mean((d_real - 1)^2) + mean(d_fake^2).

    d_fake must be computed on a detached generator output so no gradient
    reaches the generator.
    """
    return torch.mean((d_real - 1.0) ** 2) + torch.mean(d_fake ** 2)


def loss_adv_gen(d_fake):
    """Least-squares generator objective: mean((d_fake - 1)^2)."""
    return torch.mean((d_fake - 1.0) ** 2)


def loss_sen(w: LossWeights, y_enh, x_clean, d_fake=None):
    """Multi-task supervised objective: lambda_fm * L1 + lambda_adv * adversarial."""
    total = w.lambda_fm * loss_fm(y_enh, x_clean)
    if w.lambda_adv != 0:
        if d_fake is None:
            raise ValueError("lambda_adv > 0 requires discriminator scores")
        total = total + w.lambda_adv * loss_adv_gen(d_fake)
    return total


def loss_cycle(g_ab, g_ba, x_a, x_b):
    """Round-trip reconstruction penalty: L1 through both generator compositions."""
    rec_a = g_ba(g_ab(x_a))
    rec_b = g_ab(g_ba(x_b))
    return torch.mean(torch.abs(rec_a - x_a)) + torch.mean(torch.abs(rec_b - x_b))


def cyclegan_generator_terms(w: LossWeights, g_ab, g_ba, d_a, d_b, x_a, x_b):
    """Composite unpaired objective; returns (total, component dict)."""
    fake_b = g_ab(x_a)
    fake_a = g_ba(x_b)
    cyc = torch.mean(torch.abs(g_ba(fake_b) - x_a)) + torch.mean(torch.abs(g_ab(fake_a) - x_b))
    adv = loss_adv_gen(d_b(fake_b)) + loss_adv_gen(d_a(fake_a))
    total = w.lambda_cyc * cyc + w.lambda_adv * adv
    return total, {"loss_cyc": cyc.detach().item(), "loss_adv": adv.detach().item()}


def loss_cyclegan_gen(w: LossWeights, g_ab, g_ba, d_a, d_b, x_a, x_b):
    """Scalar form of the composite unpaired generator objective."""
    total, _ = cyclegan_generator_terms(w, g_ab, g_ba, d_a, d_b, x_a, x_b)
    return total
