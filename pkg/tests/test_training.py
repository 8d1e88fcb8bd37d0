import math

import numpy as np
import pytest
import torch
from torch.optim import Adam

from inclg.checkpoint import CheckpointError, load_checkpoint
from inclg.data import EvalLoader, TrainStream, read_flist
from inclg.losses import PSNR_CAP, pixel_loss
from inclg.trainer import (
    ADAM_BETAS,
    Trainer,
    TrainingDivergedError,
    streams_from_config,
    validate,
)
from tests.conftest import build_synthetic_dataset, tiny_config


def make_stream(tmp_path, cfg, n_images=8, n_masks=4, seed=3):
    flists = build_synthetic_dataset(tmp_path / "data", n_images=n_images,
                                     n_masks=n_masks, size=cfg.image_size, seed=seed)
    return TrainStream(read_flist(flists["images"]), read_flist(flists["landmarks"]),
                       read_flist(flists["masks"]), batch_size=cfg.batch_size,
                       seed=cfg.seed, image_size=cfg.image_size), flists


def param_bytes(module):
    return [p.detach().numpy().tobytes() for p in module.parameters()]


class TestFreezeDiscipline:
    def test_sub_updates_leave_other_network_untouched(self, tmp_path):
        cfg = tiny_config(tmp_path)
        trainer = Trainer(cfg)
        stream, _ = make_stream(tmp_path, cfg)
        for t in range(3):
            batch = stream.batch_at(t)
            fake, landmarks = trainer.generator(batch.images, batch.masks)

            g_before = param_bytes(trainer.generator)
            adv_d = trainer.discriminator_substep(batch.images, fake.detach())
            assert param_bytes(trainer.generator) == g_before

            d_before = param_bytes(trainer.discriminator)
            trainer.generator_substep(batch, fake, landmarks, adv_d)
            assert param_bytes(trainer.discriminator) == d_before
            trainer.iteration += 1

    def test_discriminator_grads_not_built_during_generator_substep(self, tmp_path):
        cfg = tiny_config(tmp_path)
        trainer = Trainer(cfg)
        stream, _ = make_stream(tmp_path, cfg)
        batch = stream.batch_at(0)
        fake, landmarks = trainer.generator(batch.images, batch.masks)
        adv_d = trainer.discriminator_substep(batch.images, fake.detach())
        trainer.opt_d.zero_grad()
        trainer.generator_substep(batch, fake, landmarks, adv_d)
        assert all(p.grad is None or not p.grad.any()
                   for p in trainer.discriminator.parameters())


class TestScalarOptimizationOracle:
    def test_single_parameter_moves_against_pixel_gradient(self):
        """Hand-computed first Adam step on a one-parameter linear generator."""

        class OneParam(torch.nn.Module):
            def __init__(self):
                super().__init__()
                self.w = torch.nn.Parameter(torch.tensor(0.2))

            def forward(self):
                return self.w * torch.ones(1, 3, 4, 4)

        model = OneParam()
        lr = 1e-3
        opt = Adam(model.parameters(), lr=lr, betas=ADAM_BETAS)
        target = torch.full((1, 3, 4, 4), 0.8)
        loss = pixel_loss(model(), target)
        opt.zero_grad()
        loss.backward()
        grad = model.w.grad.item()
        assert grad == pytest.approx(-1.0)  # d/dw mean|w - 0.8| at w=0.2
        opt.step()
        # first Adam step: m_hat = g, v_hat = g^2 -> delta = lr * g / (|g| + eps)
        eps = 1e-8
        expected = 0.2 - lr * grad / (abs(grad) + eps)
        assert model.w.item() == pytest.approx(expected, rel=1e-6)
        assert model.w.item() > 0.2  # moved opposite the (negative) gradient


class TestTrainLoop:
    def test_checkpoint_files_counted(self, tmp_path):
        cfg = tiny_config(tmp_path, max_iterations=2, checkpoint_interval=1)
        trainer = Trainer(cfg)
        stream, _ = make_stream(tmp_path, cfg)
        trainer.fit(stream)
        files = sorted(p.name for p in (tmp_path / "run").glob("checkpoint_*.pt"))
        assert files == ["checkpoint_000001.pt", "checkpoint_000002.pt",
                         "checkpoint_final.pt"]

    def test_loss_log_csv_written(self, tmp_path):
        cfg = tiny_config(tmp_path, max_iterations=2)
        trainer = Trainer(cfg)
        stream, _ = make_stream(tmp_path, cfg)
        trainer.fit(stream)
        lines = (tmp_path / "run" / "train_log.csv").read_text().strip().splitlines()
        assert lines[0].startswith("iteration,pixel,landmark")
        assert len(lines) == 3

    def test_resume_matches_uninterrupted_run(self, tmp_path):
        cfg_a = tiny_config(tmp_path, out_dir=str(tmp_path / "a"),
                            max_iterations=6, checkpoint_interval=3)
        trainer_a = Trainer(cfg_a)
        stream_a, _ = make_stream(tmp_path, cfg_a)
        trainer_a.fit(stream_a)

        cfg_b = cfg_a.with_overrides(out_dir=str(tmp_path / "b"), max_iterations=3)
        trainer_b = Trainer(cfg_b)
        stream_b = TrainStream(stream_a.image_paths, stream_a.landmark_paths,
                               stream_a.mask_paths, batch_size=cfg_b.batch_size,
                               seed=cfg_b.seed, image_size=cfg_b.image_size)
        trainer_b.fit(stream_b)
        cfg_b2 = cfg_b.with_overrides(max_iterations=6)
        resumed = Trainer.from_checkpoint(tmp_path / "b" / "checkpoint_final.pt", cfg_b2)
        assert resumed.iteration == 3
        resumed.fit(stream_b)

        for (na, pa), (nb, pb) in zip(trainer_a.generator.named_parameters(),
                                      resumed.generator.named_parameters()):
            assert na == nb
            assert torch.allclose(pa, pb, atol=1e-6), f"parameter {na} diverged"
        for pa, pb in zip(trainer_a.discriminator.parameters(),
                          resumed.discriminator.parameters()):
            assert torch.allclose(pa, pb, atol=1e-6)

    def test_lr_decay_schedule_non_increasing(self, tmp_path):
        cfg = tiny_config(tmp_path, lr=1e-3, lr_decay_factor=0.5, lr_decay_interval=2)
        trainer = Trainer(cfg)
        lrs = [trainer.current_lr(t) for t in range(8)]
        assert lrs == sorted(lrs, reverse=True)
        assert lrs[0] == pytest.approx(1e-3)
        assert lrs[2] == pytest.approx(5e-4)
        assert lrs[4] == pytest.approx(2.5e-4)
        # discriminator lr tracks the generator schedule
        trainer.iteration = 4
        trainer._apply_lr()
        assert trainer.opt_d.param_groups[0]["lr"] == pytest.approx(2.5e-4 * cfg.d_lr_ratio)

    def test_non_finite_loss_aborts_with_term_name(self, tmp_path):
        cfg = tiny_config(tmp_path)
        trainer = Trainer(cfg)
        stream, _ = make_stream(tmp_path, cfg)
        with torch.no_grad():
            next(trainer.generator.parameters()).fill_(float("nan"))
        with pytest.raises(TrainingDivergedError) as err:
            trainer.train_step(stream.batch_at(0))
        assert err.value.term in ("pixel", "landmark", "tv", "style",
                                  "perceptual", "adversarial", "adv_d", "total")


class TestValidate:
    def _loader(self, tmp_path, cfg, zero_masks=False):
        flists = build_synthetic_dataset(tmp_path / "val", n_images=4, n_masks=2,
                                         size=cfg.image_size, seed=9)
        masks = read_flist(flists["masks"])
        if zero_masks:
            from tests.conftest import save_mask_png

            zero = tmp_path / "val" / "zero_mask.png"
            save_mask_png(zero, np.zeros((cfg.image_size, cfg.image_size), dtype=np.float32))
            masks = [str(zero)]
        return EvalLoader(read_flist(flists["images"]), read_flist(flists["landmarks"]),
                          masks, batch_size=2, image_size=cfg.image_size)

    def test_zero_area_masks_cap_psnr_and_zero_pixel_loss(self, tmp_path):
        cfg = tiny_config(tmp_path)
        trainer = Trainer(cfg)
        metrics = validate(trainer.generator, self._loader(tmp_path, cfg, zero_masks=True))
        assert metrics["masked_psnr"] == PSNR_CAP
        assert metrics["pixel_loss"] == 0.0  # composite keeps everything

    def test_constant_gray_generator_matches_closed_form_psnr(self, tmp_path):
        cfg = tiny_config(tmp_path)

        class ConstantGray(torch.nn.Module):
            def forward(self, images, masks):
                fake = torch.full_like(images, 0.5)
                out = fake * masks + images * (1 - masks)
                return out, torch.zeros(images.shape[0], 136)

        loader = self._loader(tmp_path, cfg)
        metrics = validate(ConstantGray(), loader)

        sq_sum, count = 0.0, 0.0
        for batch in loader:
            weight = batch.masks.expand(-1, 3, -1, -1)
            sq_sum += float((((0.5 - batch.images) ** 2) * weight).sum())
            count += float(weight.sum())
        expected = 10 * math.log10(count / sq_sum)
        assert metrics["masked_psnr"] == pytest.approx(expected, rel=1e-6)

    def test_validate_is_deterministic_and_pure(self, tmp_path):
        cfg = tiny_config(tmp_path)
        trainer = Trainer(cfg)
        loader = self._loader(tmp_path, cfg)
        before = param_bytes(trainer.generator)
        m1 = validate(trainer.generator, loader)
        m2 = validate(trainer.generator, loader)
        assert m1 == m2
        assert param_bytes(trainer.generator) == before

    def test_empty_validation_set_raises(self, tmp_path):
        cfg = tiny_config(tmp_path)
        trainer = Trainer(cfg)

        class Empty:
            def __iter__(self):
                return iter(())

        with pytest.raises(ValueError, match="empty"):
            validate(trainer.generator, Empty())


class TestCheckpointRoundTrip:
    def test_save_load_bit_exact(self, tmp_path):
        cfg = tiny_config(tmp_path)
        trainer = Trainer(cfg)
        stream, _ = make_stream(tmp_path, cfg)
        trainer.train_step(stream.batch_at(0))
        path = tmp_path / "ckpt.pt"
        trainer.save(path)
        restored = Trainer.from_checkpoint(path)
        assert restored.iteration == trainer.iteration
        assert param_bytes(restored.generator) == param_bytes(trainer.generator)
        assert param_bytes(restored.discriminator) == param_bytes(trainer.discriminator)

    def test_truncated_file_fails_cleanly(self, tmp_path):
        cfg = tiny_config(tmp_path)
        trainer = Trainer(cfg)
        path = tmp_path / "ckpt.pt"
        trainer.save(path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(CheckpointError, match="cannot read"):
            load_checkpoint(path)

    def test_scale_mismatch_names_offending_layer(self, tmp_path):
        reduced = tiny_config(tmp_path, base_width=8)
        trainer = Trainer(reduced)
        path = tmp_path / "reduced.pt"
        trainer.save(path)
        full = tiny_config(tmp_path, base_width=16)
        with pytest.raises(CheckpointError, match=r"shape"):
            Trainer.from_checkpoint(path, full)

    def test_missing_keys_listed(self, tmp_path):
        cfg = tiny_config(tmp_path)
        trainer = Trainer(cfg)
        path = tmp_path / "ckpt.pt"
        trainer.save(path)
        payload = torch.load(path, weights_only=True)
        del payload["generator"]
        broken = tmp_path / "broken.pt"
        torch.save(payload, broken)
        with pytest.raises(CheckpointError, match="generator"):
            load_checkpoint(broken)


class TestSeededReproducibility:
    def test_identical_config_identical_losses(self, tmp_path):
        cfg1 = tiny_config(tmp_path, out_dir=str(tmp_path / "r1"), max_iterations=3)
        stream1, _ = make_stream(tmp_path, cfg1)
        t1 = Trainer(cfg1)
        losses1 = [t1.train_step(stream1.batch_at(t))["total"] for t in range(3)]

        cfg2 = cfg1.with_overrides(out_dir=str(tmp_path / "r2"))
        stream2 = TrainStream(stream1.image_paths, stream1.landmark_paths,
                              stream1.mask_paths, batch_size=cfg2.batch_size,
                              seed=cfg2.seed, image_size=cfg2.image_size)
        t2 = Trainer(cfg2)
        losses2 = [t2.train_step(stream2.batch_at(t))["total"] for t in range(3)]
        np.testing.assert_allclose(losses1, losses2, atol=1e-6)


class TestStreamsFromConfig:
    def test_builds_train_and_val(self, tmp_path):
        flists = build_synthetic_dataset(tmp_path / "d", n_images=4, n_masks=2, size=32)
        cfg = tiny_config(
            tmp_path, batch_size=2,
            train_image_flist=flists["images"], train_landmark_flist=flists["landmarks"],
            train_mask_flist=flists["masks"], val_image_flist=flists["images"],
            val_landmark_flist=flists["landmarks"], val_mask_flist=flists["masks"])
        stream, val_loader = streams_from_config(cfg)
        assert stream.batches_per_epoch == 2
        assert val_loader is not None
        assert sum(1 for _ in val_loader) == 2
