"""Loss terms for the adversarial multi-task objective, plus the frozen
feature extractor backing the style and perceptual terms."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields

import torch
import torch.nn as nn
import torch.nn.functional as F

logger = logging.getLogger(__name__)

PSNR_CAP = 99.0

# conv counts and width multipliers of the five stages of a VGG16 trunk
_STAGE_CONVS = (2, 2, 3, 3, 3)
_STAGE_WIDTH_FACTORS = (1, 2, 4, 8, 8)
_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


def pixel_loss(x: torch.Tensor, target: torch.Tensor, mask: torch.Tensor | None = None,
               hole_weight: float = 1.0) -> torch.Tensor:
    """Mean absolute pixel difference, optionally up-weighting the hole region."""
    if x.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(target.shape)}")
    diff = (x - target).abs()
    if mask is None or hole_weight == 1.0:
        return diff.mean()
    weight = (1.0 + (hole_weight - 1.0) * mask).expand_as(diff)
    return (weight * diff).sum() / weight.sum()


def landmark_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean squared error over the 136 landmark scalars."""
    p = pred.reshape(pred.shape[0], -1)
    t = target.reshape(target.shape[0], -1)
    if p.shape[1] != 136 or t.shape[1] != 136:
        raise ValueError(f"expected 136 scalars per record, got {p.shape[1]} and {t.shape[1]}")
    return F.mse_loss(p, t)


def total_variation_loss(x: torch.Tensor) -> torch.Tensor:
    """Anisotropic L1 total variation, averaged over all neighbor pairs."""
    dh = (x[..., :, 1:] - x[..., :, :-1]).abs()
    dv = (x[..., 1:, :] - x[..., :-1, :]).abs()
    return (dh.sum() + dv.sum()) / (dh.numel() + dv.numel())


def gram_matrix(activations: torch.Tensor) -> torch.Tensor:
    """(B, C, H, W) activations -> (B, C, C) Gram matrix, normalized by C*H*W
    so the statistic is resolution-independent."""
    b, c, h, w = activations.shape
    flat = activations.reshape(b, c, h * w)
    return flat @ flat.transpose(1, 2) / (c * h * w)


def style_loss(x: torch.Tensor, target: torch.Tensor, extractor) -> torch.Tensor:
    """Summed mean absolute difference between Gram matrices per extractor layer."""
    total = x.new_zeros(())
    for ax, at in zip(extractor(x), extractor(target)):
        total = total + (gram_matrix(ax) - gram_matrix(at)).abs().mean()
    return total


def perceptual_loss(x: torch.Tensor, target: torch.Tensor, extractor) -> torch.Tensor:
    """Summed mean absolute difference between extractor activations per layer."""
    total = x.new_zeros(())
    for ax, at in zip(extractor(x), extractor(target)):
        total = total + (ax - at).abs().mean()
    return total


def adversarial_losses(real_scores: torch.Tensor, fake_scores: torch.Tensor):
    """Hinge GAN objective. Returns (generator term, discriminator term)."""
    loss_g = -fake_scores.mean()
    loss_d = F.relu(1.0 - real_scores).mean() + F.relu(1.0 + fake_scores).mean()
    return loss_g, loss_d


def masked_psnr(x: torch.Tensor, target: torch.Tensor, mask: torch.Tensor,
                cap: float = PSNR_CAP) -> float:
    """PSNR restricted to hole pixels, capped for (near-)identical content.

    A zero-area mask means there is nothing to score; the composite there is
    exact, so the capped maximum is reported.
    """
    weight = mask.expand_as(x)
    denom = weight.sum().item()
    if denom == 0:
        return cap
    mse = ((x - target) ** 2 * weight).sum().item() / denom
    if mse <= 10.0 ** (-cap / 10.0):
        return cap
    return 10.0 * math.log10(1.0 / mse)


@dataclass
class LossWeights:
    """Per-term weights for the aggregate generator objective."""

    pixel: float = 1.0
    landmark: float = 0.1
    tv: float = 0.1
    style: float = 250.0
    perceptual: float = 0.1
    adversarial: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"loss weight {f.name} must be >= 0")


@dataclass
class LossBundle:
    """The six generator loss terms (and the discriminator term, when known)."""

    pixel: torch.Tensor
    landmark: torch.Tensor
    tv: torch.Tensor
    style: torch.Tensor
    perceptual: torch.Tensor
    adv_g: torch.Tensor
    adv_d: torch.Tensor | None = None

    def generator_terms(self) -> dict:
        return {
            "pixel": self.pixel,
            "landmark": self.landmark,
            "tv": self.tv,
            "style": self.style,
            "perceptual": self.perceptual,
            "adversarial": self.adv_g,
        }

    def scalars(self) -> dict:
        out = {k: float(v.detach()) for k, v in self.generator_terms().items()}
        if self.adv_d is not None:
            out["adv_d"] = float(self.adv_d.detach())
        return out


def aggregate_generator_loss(bundle: LossBundle, weights: LossWeights) -> torch.Tensor:
    """Weighted sum of the six generator terms."""
    terms = bundle.generator_terms()
    missing = [k for k, v in terms.items() if v is None]
    if missing:
        raise ValueError(f"missing loss terms: {missing}")
    total = bundle.pixel.new_zeros(())
    for name, value in terms.items():
        total = total + getattr(weights, name) * value
    return total


class FeatureExtractor(nn.Module):
    """Frozen VGG16-layout trunk exposing activations at stage-end ReLUs.

    ``layers`` selects which of the five convolutional stages to tap (1-5).
    Inputs in [0, 1] are normalized with the ImageNet statistics the
    pretrained weights expect. Parameters never receive gradients.
    """

    def __init__(self, layers=(1, 2, 3, 4, 5), base_width=64):
        super().__init__()
        layers = tuple(sorted(set(int(l) for l in layers)))
        if not layers or layers[0] < 1 or layers[-1] > 5:
            raise ValueError(f"extractor layers must be within 1..5, got {layers}")
        self.layers = layers
        self.trunk = self._build_trunk(base_width)
        self._tap_indices = self._stage_end_indices()
        self.register_buffer("mean", torch.tensor(_IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(_IMAGENET_STD).view(1, 3, 1, 1))
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    @staticmethod
    def _build_trunk(base_width):
        modules, in_c = [], 3
        for n_convs, factor in zip(_STAGE_CONVS, _STAGE_WIDTH_FACTORS):
            for _ in range(n_convs):
                modules += [nn.Conv2d(in_c, base_width * factor, 3, padding=1), nn.ReLU()]
                in_c = base_width * factor
            modules.append(nn.MaxPool2d(2))
        return nn.Sequential(*modules)

    @staticmethod
    def _stage_end_indices():
        indices, i = [], 0
        for n_convs in _STAGE_CONVS:
            i += 2 * n_convs
            indices.append(i - 1)  # the ReLU closing the stage
            i += 1  # pool
        return indices

    def train(self, mode: bool = True):
        return super().train(False)  # stays frozen in eval mode

    def forward(self, x: torch.Tensor) -> list:
        x = (x - self.mean) / self.std
        taps = {self._tap_indices[l - 1] for l in self.layers}
        out = []
        for i, module in enumerate(self.trunk):
            x = module(x)
            if i in taps:
                out.append(x)
            if i >= max(taps):
                break
        return out

    @classmethod
    def create(cls, layers=(1, 2, 3, 4, 5), weights="auto", base_width=64, seed=0):
        """Build an extractor with pretrained, random, or best-effort weights.

        ``pretrained`` loads the torchvision VGG16 classification weights
        (base_width must be 64). ``random`` draws a fixed seeded
        initialization, which still yields a valid frozen feature metric and
        needs no downloads. ``auto`` tries pretrained and falls back.
        """
        extractor = cls(layers=layers, base_width=base_width)
        if weights not in ("auto", "pretrained", "random"):
            raise ValueError(f"unknown extractor weights mode: {weights!r}")
        if weights in ("auto", "pretrained"):
            try:
                extractor._load_pretrained()
                return extractor
            except Exception as exc:  # noqa: BLE001 - download/env dependent
                if weights == "pretrained":
                    raise RuntimeError(f"failed to load pretrained extractor weights: {exc}") from exc
                logger.warning("pretrained extractor weights unavailable (%s); "
                               "using a fixed random initialization", exc)
        extractor._seed_random(seed)
        return extractor

    def _load_pretrained(self):
        from torchvision.models import VGG16_Weights, vgg16

        if self.trunk[0].out_channels != 64:
            raise ValueError("pretrained weights require base_width=64")
        source = vgg16(weights=VGG16_Weights.IMAGENET1K_V1).features
        self.trunk.load_state_dict(source.state_dict())
        for p in self.parameters():
            p.requires_grad_(False)

    def _seed_random(self, seed):
        gen = torch.Generator().manual_seed(int(seed))
        for module in self.trunk:
            if isinstance(module, nn.Conv2d):
                fan_in = module.in_channels * 9
                module.weight.data.normal_(0.0, math.sqrt(2.0 / fan_in), generator=gen)
                module.bias.data.zero_()
