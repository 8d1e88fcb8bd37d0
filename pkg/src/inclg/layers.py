"""Network building blocks: gated convolutions, dilated residual blocks and
the masked-region attention used at the end of the encoder."""

from __future__ import annotations

import logging

import torch
import torch.nn as nn
import torch.nn.functional as F

logger = logging.getLogger(__name__)


class GatedConv2d(nn.Module):
    """Convolution with a learned soft gate.

    Two parallel convolutions share the input: a feature branch and a gate
    branch. The block output is

        norm(relu(feature(x))) * sigmoid(gate(x))

    so the gate can suppress invalid (hole) activations per channel and
    location. Normalization is per-instance; gate values are strictly in
    (0, 1) for finite inputs.
    """

    def __init__(self, in_channels, out_channels, kernel_size, stride=1,
                 dilation=1, norm=True):
        super().__init__()
        if in_channels < 1 or out_channels < 1:
            raise ValueError("channel counts must be positive")
        padding = dilation * (kernel_size - 1) // 2
        self.feature = nn.Conv2d(in_channels, out_channels, kernel_size,
                                 stride=stride, padding=padding, dilation=dilation)
        self.gate = nn.Conv2d(in_channels, out_channels, kernel_size,
                              stride=stride, padding=padding, dilation=dilation)
        self.norm = nn.InstanceNorm2d(out_channels, affine=True) if norm else None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.feature.in_channels:
            raise ValueError(
                f"expected {self.feature.in_channels} input channels, got {x.shape[1]}")
        feat = F.relu(self.feature(x))
        if self.norm is not None:
            feat = self.norm(feat)
        return feat * torch.sigmoid(self.gate(x))


class UpsampleGatedConv(nn.Module):
    """Nearest-neighbor 2x upsampling followed by a gated convolution."""

    def __init__(self, in_channels, out_channels, kernel_size=3):
        super().__init__()
        self.conv = GatedConv2d(in_channels, out_channels, kernel_size)

    def forward(self, x):
        return self.conv(F.interpolate(x, scale_factor=2, mode="nearest"))


class DilatedResidualBlock(nn.Module):
    """Residual block whose branch is a single dilated 3x3 convolution.

    out = x + relu(conv(x)); with zeroed weights the block is the identity.
    The dilation widens the receptive field without changing resolution.
    """

    def __init__(self, channels, dilation=2):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, padding=dilation, dilation=dilation)

    def forward(self, x):
        return x + F.relu(self.conv(x))


class MaskedAttention(nn.Module):
    """Cosine-similarity attention matching masked positions to unmasked ones.

    Each masked-position feature attends over all unmasked positions with
    softmax(cos-similarity / temperature) weights; the attended vector is
    added as a residual. Unmasked positions pass through unchanged, so an
    all-zero mask makes this an exact identity. A fully masked map has no
    reference features and falls back to identity with a warning.
    """

    def __init__(self, temperature: float = 1.0):
        super().__init__()
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.temperature = temperature

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if mask.shape[-2:] != x.shape[-2:]:
            raise ValueError(
                f"mask resolution {tuple(mask.shape[-2:])} does not match "
                f"features {tuple(x.shape[-2:])}")
        b, c, h, w = x.shape
        outs = []
        for i in range(b):
            hole = mask[i].reshape(-1) > 0.5
            if not hole.any():
                outs.append(x[i])
                continue
            if hole.all():
                logger.warning("attention: feature map fully masked, passing through")
                outs.append(x[i])
                continue
            feats = x[i].reshape(c, -1)
            q = feats[:, hole]
            u = feats[:, ~hole]
            qn = q / q.norm(dim=0, keepdim=True).clamp_min(1e-8)
            un = u / u.norm(dim=0, keepdim=True).clamp_min(1e-8)
            weights = torch.softmax(qn.t() @ un / self.temperature, dim=1)
            attended = u @ weights.t()
            residual = torch.zeros_like(feats)
            residual[:, hole] = attended
            outs.append((feats + residual).reshape(c, h, w))
        return torch.stack(outs, dim=0)
