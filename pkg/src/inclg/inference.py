"""Checkpoint-backed inference: single requests and batch testing.

The loaded model is read-only. Arbitrary input sizes are handled by resizing
to the model resolution, then resizing the generated content back and
compositing at native resolution, so pixels outside the hole always equal
the request image exactly.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from inclg import validation as V
from inclg.checkpoint import checkpoint_hash, load_checkpoint, load_state_into
from inclg.config import TrainingConfig
from inclg.data import DecodeError, load_image, load_landmarks, load_mask, read_flist, save_landmarks
from inclg.losses import PSNR_CAP, masked_psnr
from inclg.networks import build_generator

logger = logging.getLogger(__name__)


@dataclass
class InferenceResult:
    image: np.ndarray            # HxWx3 float32 in [0, 1], native resolution
    landmarks: np.ndarray        # (68, 2) normalized [0, 1] coordinates
    latency_ms: float
    model_id: str
    noop: bool = False
    warnings: list = field(default_factory=list)


class InpaintingModel:
    """A frozen generator plus the bookkeeping needed to serve it."""

    def __init__(self, generator, config: TrainingConfig, model_id: str = "unsaved"):
        self.generator = generator.eval()
        self.config = config
        self.model_id = model_id
        for p in self.generator.parameters():
            p.requires_grad_(False)

    @classmethod
    def from_checkpoint(cls, path, device: str = "cpu") -> "InpaintingModel":
        payload = load_checkpoint(path)
        config = TrainingConfig.from_dict(payload["config"])
        generator = build_generator(config).to(device)
        load_state_into(generator, payload["generator"], "generator")
        return cls(generator, config, model_id=checkpoint_hash(path))

    def infer(self, image, mask) -> InferenceResult:
        """Inpaint one image. ``image`` is HxWx3 in [0, 1]; ``mask`` is HxW
        binary with 1 marking the hole; both must share a resolution."""
        start = time.perf_counter()
        image = V.check_image(image)
        mask = V.check_mask(mask)
        if image.shape[:2] != mask.shape:
            raise ValueError(
                f"image size {image.shape[1]}x{image.shape[0]} does not match "
                f"mask size {mask.shape[1]}x{mask.shape[0]}")
        warnings = []
        noop = not mask.any()
        if mask.all():
            warnings.append("mask covers the entire image; attention has no "
                            "unmasked references and passes features through")
        size = self.config.image_size
        img_t = V.image_to_tensor(image)
        mask_t = V.mask_to_tensor(mask)
        if image.shape[:2] != (size, size):
            small_img = F.interpolate(img_t, size=(size, size), mode="bilinear",
                                      align_corners=False).clamp(0.0, 1.0)
            small_mask = (F.interpolate(mask_t, size=(size, size), mode="nearest"))
        else:
            small_img, small_mask = img_t, mask_t
        with torch.inference_mode():
            out, landmarks = self.generator(small_img, small_mask)
        if image.shape[:2] != (size, size):
            out = F.interpolate(out, size=image.shape[:2], mode="bilinear",
                                align_corners=False).clamp(0.0, 1.0)
        final = out * mask_t + img_t * (1.0 - mask_t)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        return InferenceResult(
            image=V.tensor_to_image(final),
            landmarks=landmarks.reshape(68, 2).clamp(0.0, 1.0).numpy(),
            latency_ms=elapsed_ms,
            model_id=self.model_id,
            noop=noop,
            warnings=warnings,
        )


def write_png(path, image: np.ndarray) -> None:
    Image.fromarray((np.clip(image, 0.0, 1.0) * 255.0).round().astype(np.uint8)).save(path)


def batch_test(model: InpaintingModel, image_flist, mask_flist, out_dir,
               landmark_flist=None) -> dict:
    """Run the model over aligned image/mask flists, writing one inpainted PNG
    and one landmark file per record. Unreadable records are skipped and
    counted. Returns summary metrics (and prints them)."""
    images = read_flist(image_flist)
    masks = read_flist(mask_flist)
    if len(images) != len(masks):
        raise ValueError(f"test flists are misaligned: {len(images)} images vs {len(masks)} masks")
    gt_landmarks = read_flist(landmark_flist) if landmark_flist else None
    if gt_landmarks is not None and len(gt_landmarks) != len(images):
        raise ValueError("landmark flist is misaligned with the image flist")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    size = model.config.image_size
    n_done, skipped = 0, 0
    latency_sum = 0.0
    psnr_values = []
    lm_err_sum = 0.0
    for i, (img_path, mask_path) in enumerate(zip(images, masks)):
        try:
            image = load_image(img_path, size=size)
            mask = load_mask(mask_path, size=size)
        except DecodeError as exc:
            logger.error("skipping record %d: %s", i, exc)
            skipped += 1
            continue
        result = model.infer(image, mask)
        stem = Path(img_path).stem
        write_png(out_dir / f"{stem}_inpainted.png", result.image)
        save_landmarks(out_dir / f"{stem}_landmarks.txt", result.landmarks, size, size)
        latency_sum += result.latency_ms
        psnr_values.append(masked_psnr(
            torch.from_numpy(result.image), torch.from_numpy(image),
            torch.from_numpy(mask)[..., None]))
        if gt_landmarks is not None:
            gt = load_landmarks(gt_landmarks[i])
            lm_err_sum += float(np.mean((result.landmarks - gt) ** 2))
        n_done += 1

    summary = {
        "records": n_done,
        "skipped": skipped,
        "mean_latency_ms": latency_sum / n_done if n_done else 0.0,
        "masked_psnr": float(np.mean(psnr_values)) if psnr_values else PSNR_CAP,
    }
    if gt_landmarks is not None and n_done:
        summary["landmark_error"] = lm_err_sum / n_done
    for key, value in summary.items():
        print(f"{key}: {value}")
    return summary
