"""Alternating adversarial training loop.

Each iteration performs two sub-updates in order: the discriminator steps on
the hinge loss with the generator frozen (its outputs detached), then the
generator steps on the weighted multi-task objective with the discriminator
frozen. Learning rates decay multiplicatively on a fixed schedule, and all
data sampling is a pure function of (seed, iteration) so an interrupted run
resumed from a checkpoint reproduces the uninterrupted one.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from pathlib import Path

import torch
from torch.optim import Adam

from inclg import losses as L
from inclg.checkpoint import load_checkpoint, load_state_into, save_checkpoint
from inclg.config import TrainingConfig
from inclg.data import Batch, EvalLoader, TrainStream, read_flist
from inclg.losses import FeatureExtractor, LossBundle, LossWeights, aggregate_generator_loss
from inclg.networks import build_discriminator, build_generator

logger = logging.getLogger(__name__)

ADAM_BETAS = (0.0, 0.9)


class TrainingDivergedError(RuntimeError):
    def __init__(self, term: str, value: float):
        super().__init__(f"non-finite loss term {term!r} ({value}); stopping")
        self.term = term


def _set_requires_grad(module, flag: bool):
    for p in module.parameters():
        p.requires_grad_(flag)


def _check_finite(term: str, value: torch.Tensor):
    if not torch.isfinite(value):
        raise TrainingDivergedError(term, float(value.detach()))


class Trainer:
    """Owns the models, optimizers and iteration counter for one run."""

    def __init__(self, config: TrainingConfig):
        self.cfg = config
        torch.manual_seed(config.seed)
        self.generator = build_generator(config).to(config.device)
        self.discriminator = build_discriminator(config).to(config.device)
        self.extractor = FeatureExtractor.create(
            layers=config.extractor_layers, weights=config.extractor_weights,
            base_width=config.extractor_width, seed=config.seed).to(config.device)
        self.weights = LossWeights(
            pixel=config.w_pixel, landmark=config.w_landmark, tv=config.w_tv,
            style=config.w_style, perceptual=config.w_perceptual,
            adversarial=config.w_adversarial)
        self.opt_g = Adam(self.generator.parameters(), lr=config.lr, betas=ADAM_BETAS)
        self.opt_d = Adam(self.discriminator.parameters(),
                          lr=config.lr * config.d_lr_ratio, betas=ADAM_BETAS)
        self.iteration = 0
        self.best_val: float | None = None

    # -- checkpointing ----------------------------------------------------

    @classmethod
    def from_checkpoint(cls, path, config: TrainingConfig | None = None) -> "Trainer":
        payload = load_checkpoint(path)
        cfg = config or TrainingConfig.from_dict(payload["config"])
        trainer = cls(cfg)
        trainer.restore(payload, source=str(path))
        return trainer

    def restore(self, payload: dict, source: str = "checkpoint") -> None:
        load_state_into(self.generator, payload["generator"], f"{source} generator")
        load_state_into(self.discriminator, payload["discriminator"], f"{source} discriminator")
        self.opt_g.load_state_dict(payload["opt_g"])
        self.opt_d.load_state_dict(payload["opt_d"])
        self.iteration = int(payload["iteration"])
        self.best_val = payload["best_val"]

    def save(self, path) -> None:
        save_checkpoint(
            path, iteration=self.iteration, generator=self.generator,
            discriminator=self.discriminator, opt_g=self.opt_g, opt_d=self.opt_d,
            config=self.cfg, best_val=self.best_val)

    # -- one iteration -----------------------------------------------------

    def current_lr(self, iteration: int | None = None) -> float:
        t = self.iteration if iteration is None else iteration
        return self.cfg.lr * self.cfg.lr_decay_factor ** (t // self.cfg.lr_decay_interval)

    def _apply_lr(self):
        lr = self.current_lr()
        for group in self.opt_g.param_groups:
            group["lr"] = lr
        for group in self.opt_d.param_groups:
            group["lr"] = lr * self.cfg.d_lr_ratio

    def discriminator_substep(self, real: torch.Tensor, fake_detached: torch.Tensor) -> torch.Tensor:
        """Update the discriminator on hinge loss; generator parameters untouched."""
        _set_requires_grad(self.discriminator, True)
        _, loss_d = L.adversarial_losses(
            self.discriminator(real), self.discriminator(fake_detached))
        _check_finite("adv_d", loss_d)
        self.opt_d.zero_grad()
        loss_d.backward()
        self.opt_d.step()
        return loss_d.detach()

    def generator_substep(self, batch: Batch, fake: torch.Tensor,
                          landmarks: torch.Tensor, adv_d: torch.Tensor) -> LossBundle:
        """Update the generator on the aggregated loss; discriminator frozen."""
        _set_requires_grad(self.discriminator, False)
        try:
            bundle = LossBundle(
                pixel=L.pixel_loss(fake, batch.images, batch.masks, self.cfg.pixel_hole_weight),
                landmark=L.landmark_loss(landmarks, batch.landmarks),
                tv=L.total_variation_loss(fake),
                style=L.style_loss(fake, batch.images, self.extractor),
                perceptual=L.perceptual_loss(fake, batch.images, self.extractor),
                adv_g=-self.discriminator(fake).mean(),
                adv_d=adv_d,
            )
            for term, value in bundle.generator_terms().items():
                _check_finite(term, value)
            total = aggregate_generator_loss(bundle, self.weights)
            _check_finite("total", total)
            self.opt_g.zero_grad()
            total.backward()
            self.opt_g.step()
        finally:
            _set_requires_grad(self.discriminator, True)
        return bundle

    def train_step(self, batch: Batch) -> dict:
        """One Algorithm-style iteration: D sub-update, then G sub-update."""
        self._apply_lr()
        fake, landmarks = self.generator(batch.images, batch.masks)
        adv_d = self.discriminator_substep(batch.images, fake.detach())
        bundle = self.generator_substep(batch, fake, landmarks, adv_d)
        self.iteration += 1
        scalars = bundle.scalars()
        scalars["total"] = sum(
            getattr(self.weights, k) * v for k, v in scalars.items() if k != "adv_d")
        scalars["lr"] = self.current_lr(self.iteration - 1)
        return scalars

    # -- full loop ----------------------------------------------------------

    def fit(self, stream: TrainStream, val_loader: EvalLoader | None = None) -> dict:
        cfg = self.cfg
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / "train_log.csv"
        last = {}
        with open(log_path, "a", newline="") as log_file:
            writer = csv.writer(log_file)
            if log_file.tell() == 0:
                writer.writerow(["iteration", "pixel", "landmark", "tv", "style",
                                 "perceptual", "adversarial", "adv_d", "total", "lr"])
            while self.iteration < cfg.max_iterations:
                batch = stream.batch_at(self.iteration)
                last = self.train_step(batch)
                t = self.iteration
                writer.writerow([t] + [f"{last[k]:.6g}" for k in
                                       ("pixel", "landmark", "tv", "style", "perceptual",
                                        "adversarial", "adv_d", "total", "lr")])
                if t % 50 == 0 or t == cfg.max_iterations:
                    logger.info("iter %d/%d total=%.4f pixel=%.4f landmark=%.4f",
                                t, cfg.max_iterations, last["total"], last["pixel"],
                                last["landmark"])
                if t % cfg.checkpoint_interval == 0:
                    self.save(out_dir / f"checkpoint_{t:06d}.pt")
                if val_loader is not None and t % cfg.validation_interval == 0:
                    metrics = validate(self.generator, val_loader)
                    score = metrics["pixel_loss"] + metrics["landmark_error"]
                    if self.best_val is None or score < self.best_val:
                        self.best_val = score
                    logger.info("validation @%d: %s", t, metrics)
        self.save(out_dir / "checkpoint_final.pt")
        return last


def validate(generator, loader: EvalLoader) -> dict:
    """Deterministic metrics over a validation set; parameters untouched.

    Returns mean pixel loss, mean landmark error (MSE over the 136 scalars)
    and PSNR over hole pixels (capped when there is nothing to score).
    """
    was_training = generator.training
    generator.eval()
    n_batches = 0
    pixel_sum = 0.0
    lm_sum = 0.0
    sq_err_sum = 0.0
    hole_count = 0.0
    with torch.no_grad():
        for batch in loader:
            fake, landmarks = generator(batch.images, batch.masks)
            pixel_sum += float(L.pixel_loss(fake, batch.images))
            lm_sum += float(L.landmark_loss(landmarks, batch.landmarks))
            weight = batch.masks.expand_as(fake)
            sq_err_sum += float(((fake - batch.images) ** 2 * weight).sum())
            hole_count += float(weight.sum())
            n_batches += 1
    if was_training:
        generator.train()
    if n_batches == 0:
        raise ValueError("validation set is empty")
    if hole_count == 0 or sq_err_sum / max(hole_count, 1.0) <= 10 ** (-L.PSNR_CAP / 10):
        psnr = L.PSNR_CAP
    else:
        psnr = 10.0 * math.log10(hole_count / sq_err_sum)
    return {
        "pixel_loss": pixel_sum / n_batches,
        "landmark_error": lm_sum / n_batches,
        "masked_psnr": psnr,
    }


def streams_from_config(cfg: TrainingConfig):
    """Build the train stream (and optional validation loader) from flists."""
    stream = TrainStream(
        read_flist(cfg.train_image_flist),
        read_flist(cfg.train_landmark_flist),
        read_flist(cfg.train_mask_flist),
        batch_size=cfg.batch_size, seed=cfg.seed, image_size=cfg.image_size)
    val_loader = None
    if cfg.val_image_flist:
        val_loader = EvalLoader(
            read_flist(cfg.val_image_flist),
            read_flist(cfg.val_landmark_flist),
            read_flist(cfg.val_mask_flist),
            batch_size=cfg.batch_size, image_size=cfg.image_size)
    return stream, val_loader


def train_from_config(cfg: TrainingConfig, resume: str | None = None) -> Trainer:
    start = time.time()
    if resume:
        trainer = Trainer.from_checkpoint(resume, cfg)
        logger.info("resumed from %s at iteration %d", resume, trainer.iteration)
    else:
        trainer = Trainer(cfg)
    stream, val_loader = streams_from_config(cfg)
    trainer.fit(stream, val_loader)
    logger.info("training finished in %.1fs at iteration %d",
                time.time() - start, trainer.iteration)
    return trainer
