import numpy as np
import pytest
import torch
from PIL import Image

from inclg.config import TrainingConfig
from inclg.data import save_landmarks, write_flist


def make_image(rng, size):
    """Smooth synthetic face-like image: blended gradients plus a blob."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32) / max(size - 1, 1)
    base = np.stack([
        0.25 + 0.5 * xx,
        0.25 + 0.5 * yy,
        0.5 + 0.3 * np.sin(2 * np.pi * (xx * rng.uniform(0.5, 2) + rng.uniform())),
    ], axis=-1)
    cx, cy = rng.uniform(0.3, 0.7, size=2)
    blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / 0.02)[..., None]
    return np.clip(base + 0.3 * blob * rng.uniform(-1, 1, size=3), 0.0, 1.0)


def make_rect_mask(rng, size, frac=0.2):
    """Rectangle mask with roughly the requested hole fraction."""
    mask = np.zeros((size, size), dtype=np.float32)
    h = max(2, int(size * np.sqrt(frac) * rng.uniform(0.8, 1.2)))
    w = max(2, int(size * np.sqrt(frac)))
    y = rng.integers(0, size - h + 1)
    x = rng.integers(0, size - w + 1)
    mask[y:y + h, x:x + w] = 1.0
    return mask


def save_image_png(path, image):
    Image.fromarray((image * 255.0).round().astype(np.uint8)).save(path)


def save_mask_png(path, mask):
    Image.fromarray((mask * 255.0).astype(np.uint8), mode="L").save(path)


def build_synthetic_dataset(root, n_images=8, n_masks=6, size=64, seed=0):
    """Write images, masks and landmark files plus flists; returns flist paths."""
    rng = np.random.default_rng(seed)
    img_dir = root / "images"
    mask_dir = root / "masks"
    lm_dir = root / "landmarks"
    for d in (img_dir, mask_dir, lm_dir):
        d.mkdir(parents=True, exist_ok=True)
    image_paths, lm_paths, mask_paths = [], [], []
    for i in range(n_images):
        img = make_image(rng, size)
        p = img_dir / f"face_{i:03d}.png"
        save_image_png(p, img)
        image_paths.append(str(p))
        pts = rng.uniform(0.2, 0.8, size=(68, 2))
        lp = lm_dir / f"face_{i:03d}.txt"
        save_landmarks(lp, pts, size, size)
        lm_paths.append(str(lp))
    for i in range(n_masks):
        mask = make_rect_mask(rng, size, frac=rng.uniform(0.1, 0.3))
        p = mask_dir / f"mask_{i:03d}.png"
        save_mask_png(p, mask)
        mask_paths.append(str(p))
    flists = {}
    for name, paths in (("images", image_paths), ("landmarks", lm_paths), ("masks", mask_paths)):
        flist = root / f"{name}.flist"
        write_flist(paths, flist)
        flists[name] = str(flist)
    return flists


@pytest.fixture
def synthetic_dataset(tmp_path):
    return build_synthetic_dataset(tmp_path, n_images=8, n_masks=6, size=32, seed=7)


def tiny_config(tmp_path, **overrides) -> TrainingConfig:
    """A fast quarter-width configuration for unit tests."""
    defaults = dict(
        image_size=32, base_width=8, dilated_blocks=2, disc_width=8,
        extractor_width=8, extractor_weights="random", extractor_layers=(1, 2),
        lm_branch_factors=(1, 2, 4), lm_map_size=16,
        batch_size=2, max_iterations=4, checkpoint_interval=2,
        validation_interval=2, lr=1e-3, seed=0,
        w_pixel=1.0, w_landmark=0.1, w_tv=0.01, w_style=1.0,
        w_perceptual=0.05, w_adversarial=0.01,
        out_dir=str(tmp_path / "run"))
    defaults.update(overrides)
    return TrainingConfig(**defaults)


@pytest.fixture(autouse=True)
def _fixed_torch_seed():
    torch.manual_seed(1234)
