"""Scikit-learn style estimator facade over the training and inference APIs.

``MultiTaskInpainter`` follows the fit/predict/get_params conventions so the
model slots into standard tooling (cloning, grid search over init params).
Heavy lifting stays in the trainer and inference modules.
"""

from __future__ import annotations

import tempfile

import numpy as np
import torch
from sklearn.base import BaseEstimator

from inclg import validation as V
from inclg.config import TrainingConfig
from inclg.data import EvalLoader, TrainStream
from inclg.inference import InpaintingModel
from inclg.trainer import Trainer, validate


class MultiTaskInpainter(BaseEstimator):
    """Joint face inpainting and 68-point landmark prediction.

    Parameters mirror the training configuration; see TrainingConfig for
    semantics. ``fit`` consumes aligned sequences of image and landmark file
    paths plus a pool of mask file paths; ``predict`` consumes in-memory
    arrays at the model resolution.
    """

    def __init__(self, image_size=256, base_width=64, dilated_blocks=8,
                 batch_size=4, max_iterations=1000, lr=1e-4,
                 w_pixel=1.0, w_landmark=0.1, w_tv=0.1, w_style=250.0,
                 w_perceptual=0.1, w_adversarial=0.1,
                 extractor_weights="auto", seed=0, out_dir=None):
        self.image_size = image_size
        self.base_width = base_width
        self.dilated_blocks = dilated_blocks
        self.batch_size = batch_size
        self.max_iterations = max_iterations
        self.lr = lr
        self.w_pixel = w_pixel
        self.w_landmark = w_landmark
        self.w_tv = w_tv
        self.w_style = w_style
        self.w_perceptual = w_perceptual
        self.w_adversarial = w_adversarial
        self.extractor_weights = extractor_weights
        self.seed = seed
        self.out_dir = out_dir

    def _config(self) -> TrainingConfig:
        return TrainingConfig(
            image_size=self.image_size, base_width=self.base_width,
            dilated_blocks=self.dilated_blocks, disc_width=max(self.base_width // 4, 8),
            extractor_width=max(self.base_width // 4, 8),
            batch_size=self.batch_size, max_iterations=self.max_iterations,
            lr=self.lr, w_pixel=self.w_pixel, w_landmark=self.w_landmark,
            w_tv=self.w_tv, w_style=self.w_style, w_perceptual=self.w_perceptual,
            w_adversarial=self.w_adversarial, extractor_weights=self.extractor_weights,
            seed=self.seed,
            checkpoint_interval=self.max_iterations,
            validation_interval=self.max_iterations,
            out_dir=self.out_dir or tempfile.mkdtemp(prefix="inclg_fit_"))

    def fit(self, image_paths, landmark_paths, mask_paths):
        """Train on aligned image/landmark path sequences and a mask pool."""
        cfg = self._config()
        trainer = Trainer(cfg)
        stream = TrainStream(list(image_paths), list(landmark_paths), list(mask_paths),
                             batch_size=cfg.batch_size, seed=cfg.seed,
                             image_size=cfg.image_size)
        trainer.fit(stream)
        self.trainer_ = trainer
        self.generator_ = trainer.generator
        return self

    def _forward(self, images, masks):
        if not hasattr(self, "generator_"):
            raise RuntimeError("this MultiTaskInpainter instance is not fitted yet")
        images = np.asarray(images, dtype=np.float32)
        masks = np.asarray(masks, dtype=np.float32)
        single = images.ndim == 3
        if single:
            images, masks = images[None], masks[None]
        outs, lms = [], []
        self.generator_.eval()
        with torch.inference_mode():
            for image, mask in zip(images, masks):
                img_t = V.image_to_tensor(V.check_image(image, self.image_size))
                mask_t = V.mask_to_tensor(V.check_mask(mask, self.image_size))
                out, lm = self.generator_(img_t, mask_t)
                outs.append(V.tensor_to_image(out))
                lms.append(lm.reshape(68, 2).clamp(0, 1).numpy())
        out_imgs = np.stack(outs)
        out_lms = np.stack(lms)
        return (out_imgs[0], out_lms[0]) if single else (out_imgs, out_lms)

    def predict(self, images, masks):
        """Inpaint; returns images shaped like the input batch."""
        return self._forward(images, masks)[0]

    def predict_landmarks(self, images, masks):
        """Predicted landmarks, (..., 68, 2) in normalized coordinates."""
        return self._forward(images, masks)[1]

    def score(self, image_paths, landmark_paths, mask_paths):
        """Negative (pixel loss + landmark error) over a held-out set."""
        loader = EvalLoader(list(image_paths), list(landmark_paths), list(mask_paths),
                            batch_size=self.batch_size, image_size=self.image_size)
        metrics = validate(self.generator_, loader)
        return -(metrics["pixel_loss"] + metrics["landmark_error"])

    def save(self, path):
        if not hasattr(self, "trainer_"):
            raise RuntimeError("this MultiTaskInpainter instance is not fitted yet")
        self.trainer_.save(path)
        return path

    @classmethod
    def load(cls, path) -> InpaintingModel:
        """Load a served-model view of a saved checkpoint."""
        return InpaintingModel.from_checkpoint(path)
