"""Generator and discriminator networks.

The generator is a single-pass multi-task model: a shared gated-convolution
encoder feeds an image-completion head and a landmark-regression head. The
landmark head blends pooled image features through a zero-initialized scalar
gate; its predicted points are rasterized into a binary map stack and fed
back into the image head's second fusion layer.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils import spectral_norm

from inclg.layers import DilatedResidualBlock, GatedConv2d, MaskedAttention, UpsampleGatedConv

NUM_LANDMARKS = 68


def composite(generated: torch.Tensor, original: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Keep original pixels outside the hole: generated*mask + original*(1-mask)."""
    if generated.shape != original.shape:
        raise ValueError(f"shape mismatch: {tuple(generated.shape)} vs {tuple(original.shape)}")
    return generated * mask + original * (1.0 - mask)


def rasterize_landmarks(points: torch.Tensor, map_size: int = 128,
                        channels: int = NUM_LANDMARKS) -> torch.Tensor:
    """Rasterize normalized (x, y) points into a binary map stack.

    Each point lights pixel (round(x*(S-1)), round(y*(S-1))) with
    round-half-away-from-zero; out-of-range points clamp to the border.
    The single map is replicated across ``channels`` identical channels.
    Index extraction is integer-valued, so no gradient flows through here.
    """
    pts = points.reshape(points.shape[0], -1, 2).clamp(0.0, 1.0)
    scaled = pts * (map_size - 1)
    idx = torch.floor(scaled + 0.5).long().clamp(0, map_size - 1)
    b, n, _ = idx.shape
    maps = points.new_zeros((b, 1, map_size, map_size))
    batch_idx = torch.arange(b, device=points.device).repeat_interleave(n)
    maps[batch_idx, 0, idx[:, :, 1].reshape(-1), idx[:, :, 0].reshape(-1)] = 1.0
    return maps.detach().repeat(1, channels, 1, 1)


class Encoder(nn.Module):
    """Three downsampling gated-conv blocks, a dilated residual chain and
    masked attention. Spatial size shrinks 4x (e.g. 256 -> 128 -> 64)."""

    def __init__(self, base_width=64, dilated_blocks=8, dilation=2):
        super().__init__()
        w = base_width
        self.block1 = GatedConv2d(4, w, 5)
        self.block2 = GatedConv2d(w, 2 * w, 3, stride=2)
        self.block3 = GatedConv2d(2 * w, 4 * w, 3, stride=2)
        self.dilated = nn.ModuleList(
            [DilatedResidualBlock(4 * w, dilation) for _ in range(dilated_blocks)])
        self.attention = MaskedAttention()

    def forward(self, masked_image: torch.Tensor, mask: torch.Tensor):
        """Returns (f_share, [full-res skip, half-res skip]).

        ``masked_image`` must already have the hole zeroed; the mask rides
        along as a fourth input channel.
        """
        x = torch.cat([masked_image, mask], dim=1)
        s1 = self.block1(x)
        s2 = self.block2(s1)
        f = self.block3(s2)
        for block in self.dilated:
            f = block(f)
        small_mask = F.interpolate(mask, size=f.shape[-2:], mode="nearest")
        f = self.attention(f, small_mask)
        return f, [s1, s2]


class LandmarkHead(nn.Module):
    """Landmark regressor over the shared feature, fused with image features.

    Parallel 1x1 convolutions followed by global average pooling extract
    vectors of increasing channel counts; the widest passes through a PReLU.
    Their concatenation is blended with the pooled image feature through a
    zero-initialized trainable scalar before the final fully connected layer:

        landmarks = FC(gamma * project(pool(f1)) + landmark_feature)

    With gamma at its zero initialization the output is exactly
    FC(landmark_feature), independent of the image branch.
    """

    def __init__(self, share_channels, image_channels, branch_widths=(64, 128, 256)):
        super().__init__()
        widths = tuple(branch_widths)
        if any(b >= a for b, a in zip(widths, widths[1:])):
            raise ValueError(f"branch widths must be strictly increasing, got {widths}")
        self.branch_widths = widths
        self.branches = nn.ModuleList(
            [nn.Conv2d(share_channels, w, 1) for w in widths])
        self.prelu = nn.PReLU()
        self.project = nn.Linear(image_channels, sum(widths))
        self.fc = nn.Linear(sum(widths), 2 * NUM_LANDMARKS)
        self.gamma = nn.Parameter(torch.zeros(1))

    def landmark_feature(self, f_share: torch.Tensor) -> torch.Tensor:
        feats = [branch(f_share).mean(dim=(2, 3)) for branch in self.branches]
        feats[-1] = self.prelu(feats[-1])
        return torch.cat(feats, dim=1)

    def fuse(self, f1_pooled: torch.Tensor, f_lmk: torch.Tensor) -> torch.Tensor:
        """Adaptive fusion of the pooled image feature into the landmark path."""
        projected = self.project(f1_pooled)
        if projected.shape != f_lmk.shape:
            raise ValueError(
                f"fusion shape mismatch: {tuple(projected.shape)} vs {tuple(f_lmk.shape)}")
        return self.fc(self.gamma * projected + f_lmk)

    def forward(self, f_share: torch.Tensor, f1: torch.Tensor) -> torch.Tensor:
        return self.fuse(f1.mean(dim=(2, 3)), self.landmark_feature(f_share))


class ImageHead(nn.Module):
    """Upsampling image decoder with three 1x1 fusion layers.

    fuse1 merges the first upsampled feature with the half-resolution skip,
    fuse2 merges the rasterized landmark stack, fuse3 merges the
    full-resolution skip before the output convolution.
    """

    def __init__(self, base_width=64, landmark_channels=NUM_LANDMARKS):
        super().__init__()
        w = base_width
        self.up1 = UpsampleGatedConv(4 * w, 2 * w)
        self.fuse1 = nn.Conv2d(4 * w, 2 * w, 1)
        self.fuse2 = nn.Conv2d(2 * w + landmark_channels, 2 * w, 1)
        self.up2 = UpsampleGatedConv(2 * w, w)
        self.fuse3 = nn.Conv2d(2 * w, w, 1)
        self.out = nn.Conv2d(w, 3, 3, padding=1)

    def first_stage(self, f_share, skip_half):
        u = self.up1(f_share)
        return self.fuse1(torch.cat([u, skip_half], dim=1))

    def second_stage(self, f1, landmark_stack, skip_full):
        if landmark_stack.shape[-2:] != f1.shape[-2:]:
            landmark_stack = F.interpolate(
                landmark_stack, size=f1.shape[-2:], mode="bilinear", align_corners=False)
        g = self.fuse2(torch.cat([f1, landmark_stack], dim=1))
        g = self.up2(g)
        g = self.fuse3(torch.cat([g, skip_full], dim=1))
        return (torch.tanh(self.out(g)) + 1.0) / 2.0


class MultiTaskGenerator(nn.Module):
    """Single-pass joint inpainting and landmark prediction.

    forward(image, mask) runs: encode -> first image stage -> landmark head
    (consuming the shared feature and the fused image feature) -> landmark
    rasterization fed back into the second image stage -> composite. Output
    pixels outside the hole equal the input exactly.
    """

    def __init__(self, image_size=256, base_width=64, dilated_blocks=8,
                 dilation=2, lm_map_size=128, lm_branch_factors=(1, 2, 4)):
        super().__init__()
        if image_size % 4 != 0:
            raise ValueError("image_size must be divisible by 4")
        self.image_size = image_size
        self.lm_map_size = lm_map_size
        branch_widths = tuple(f * base_width for f in lm_branch_factors)
        self.encoder = Encoder(base_width, dilated_blocks, dilation)
        self.landmark_head = LandmarkHead(4 * base_width, 2 * base_width, branch_widths)
        self.image_head = ImageHead(base_width)
        self.hyperparams = {
            "image_size": image_size,
            "base_width": base_width,
            "dilated_blocks": dilated_blocks,
            "dilation": dilation,
            "lm_map_size": lm_map_size,
            "lm_branch_factors": list(lm_branch_factors),
        }

    def encode(self, image: torch.Tensor, mask: torch.Tensor):
        """Zero-fill the hole, append the mask channel and run the encoder."""
        self._check_inputs(image, mask)
        return self.encoder(image * (1.0 - mask), mask)

    def forward(self, image: torch.Tensor, mask: torch.Tensor):
        f_share, (skip_full, skip_half) = self.encode(image, mask)
        f1 = self.image_head.first_stage(f_share, skip_half)
        landmarks = self.landmark_head(f_share, f1)
        stack = rasterize_landmarks(landmarks, self.lm_map_size)
        generated = self.image_head.second_stage(f1, stack, skip_full)
        return composite(generated, image, mask), landmarks

    def _check_inputs(self, image, mask):
        s = self.image_size
        if image.dim() != 4 or image.shape[1] != 3 or image.shape[-2:] != (s, s):
            raise ValueError(f"expected image of shape (B, 3, {s}, {s}), got {tuple(image.shape)}")
        if mask.shape[-2:] != (s, s):
            raise ValueError(f"expected {s}x{s} mask, got {tuple(mask.shape[-2:])}")


class PatchDiscriminator(nn.Module):
    """Spectral-normalized patch discriminator.

    Five 4x4 convolutions (strides 2, 2, 2, 1, 1) map a 256x256 image to a
    30x30 grid of real/fake scores.
    """

    def __init__(self, base_width=64):
        super().__init__()
        w = base_width
        specs = [(3, w, 2), (w, 2 * w, 2), (2 * w, 4 * w, 2),
                 (4 * w, 8 * w, 1), (8 * w, 1, 1)]
        self.convs = nn.ModuleList(
            [spectral_norm(nn.Conv2d(i, o, 4, stride=s, padding=1)) for i, o, s in specs])

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        if image.dim() != 4 or image.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W) input, got {tuple(image.shape)}")
        x = image
        for conv in self.convs[:-1]:
            x = F.leaky_relu(conv(x), 0.2)
        return self.convs[-1](x)


def build_generator(config) -> MultiTaskGenerator:
    """Construct a generator from a TrainingConfig-like object."""
    return MultiTaskGenerator(
        image_size=config.image_size,
        base_width=config.base_width,
        dilated_blocks=config.dilated_blocks,
        dilation=config.dilation,
        lm_map_size=config.lm_map_size,
        lm_branch_factors=config.lm_branch_factors,
    )


def build_discriminator(config) -> PatchDiscriminator:
    return PatchDiscriminator(base_width=config.disc_width)
