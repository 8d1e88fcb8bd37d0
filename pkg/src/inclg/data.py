"""Dataset ingestion: file lists, image/mask/landmark loading, mask-ratio
grouping and deterministic batch iteration."""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

logger = logging.getLogger(__name__)

MASK_GROUPS = ("G1", "G2", "G3")


class DecodeError(RuntimeError):
    """Raised when an image, mask or landmark file cannot be parsed."""


def build_flist(root, pattern: str = "*.png") -> list[str]:
    """Recursively collect files matching ``pattern`` under ``root``, sorted
    lexicographically. Empty results are legal but logged."""
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(f"not a readable directory: {root}")
    paths = sorted(str(p) for p in root.rglob(pattern) if p.is_file())
    if not paths:
        logger.warning("no files matching %r under %s", pattern, root)
    return paths


def write_flist(paths, out_path) -> None:
    """One path per line, LF-terminated, UTF-8."""
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        for p in paths:
            fh.write(f"{p}\n")


def read_flist(path) -> list[str]:
    """Load a file list; every referenced path must exist and be unique."""
    with open(path, encoding="utf-8") as fh:
        paths = [line.strip() for line in fh if line.strip()]
    missing = [p for p in paths if not Path(p).exists()]
    if missing:
        raise FileNotFoundError(f"flist {path} references missing files, e.g. {missing[0]}")
    if len(set(paths)) != len(paths):
        raise ValueError(f"flist {path} contains duplicate entries")
    return paths


def load_image(path, size: int = 256) -> np.ndarray:
    """Decode an RGB image, resize bilinearly to size x size (skipped when the
    file already matches) and scale to [0, 1] float32."""
    try:
        with Image.open(path) as img:
            img = img.convert("RGB")
            if img.size != (size, size):
                img = img.resize((size, size), Image.Resampling.BILINEAR)
            arr = np.asarray(img, dtype=np.float32) / 255.0
    except OSError as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc
    return arr


def load_mask(path, size: int = 256) -> np.ndarray:
    """Decode a grayscale mask, nearest-resize to size x size and threshold at
    0.5. Convention: 1 = hole (white), 0 = known."""
    try:
        with Image.open(path) as img:
            img = img.convert("L")
            if img.size != (size, size):
                img = img.resize((size, size), Image.Resampling.NEAREST)
            arr = np.asarray(img, dtype=np.float32) / 255.0
    except OSError as exc:
        raise DecodeError(f"cannot decode mask {path}: {exc}") from exc
    return (arr >= 0.5).astype(np.float32)


def mask_ratio(mask: np.ndarray) -> float:
    """Fraction of pixels marked as hole."""
    return float(np.count_nonzero(mask)) / mask.size


def assign_group(ratio: float) -> str | None:
    """Map a mask ratio to its group, or None when the mask is discarded.

    Boundary rule: G1 = (0, 0.2), G2 = [0.2, 0.4), G3 = [0.4, 0.6];
    empty masks and ratios above 0.6 are discarded.
    """
    if ratio <= 0.0 or ratio > 0.6:
        return None
    if ratio < 0.2:
        return "G1"
    if ratio < 0.4:
        return "G2"
    return "G3"


def group_and_sample_masks(mask_paths, n_train_per_group: int, n_val_per_group: int,
                           seed: int = 0, size: int = 256):
    """Split masks into ratio groups and draw seeded train/val samples.

    Per group, n_train + n_val masks are sampled without replacement and
    split disjointly. Raises when a group is too small, naming the group.
    Returns (train_paths, val_paths) concatenated over G1, G2, G3.
    """
    groups: dict[str, list[str]] = {g: [] for g in MASK_GROUPS}
    for path in mask_paths:
        group = assign_group(mask_ratio(load_mask(path, size=size)))
        if group is not None:
            groups[group].append(path)
    need = n_train_per_group + n_val_per_group
    rng = np.random.default_rng(seed)
    train, val = [], []
    for name in MASK_GROUPS:
        members = groups[name]
        if len(members) < need:
            raise ValueError(
                f"mask group {name} has {len(members)} usable masks but "
                f"{need} were requested ({n_train_per_group} train + {n_val_per_group} val)")
        picked = rng.choice(len(members), size=need, replace=False)
        train.extend(members[i] for i in picked[:n_train_per_group])
        val.extend(members[i] for i in picked[n_train_per_group:])
    return train, val


def load_landmarks(path) -> np.ndarray:
    """Parse a landmark file into 68 (x, y) points normalized to [0, 1].

    Format: line 1 holds the source "W H", line 2 holds 136 numbers in
    source pixel coordinates.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            values = fh.readline().split()
    except OSError as exc:
        raise DecodeError(f"cannot read landmark file {path}: {exc}") from exc
    if len(header) != 2:
        raise DecodeError(f"landmark file {path}: header must be 'W H', got {header!r}")
    width, height = float(header[0]), float(header[1])
    if width <= 0 or height <= 0:
        raise DecodeError(f"landmark file {path}: non-positive source size {width}x{height}")
    if len(values) != 136:
        raise DecodeError(f"landmark file {path}: expected 136 values, got {len(values)}")
    pts = np.asarray([float(v) for v in values], dtype=np.float32).reshape(68, 2)
    pts[:, 0] /= width
    pts[:, 1] /= height
    return np.clip(pts, 0.0, 1.0)


def save_landmarks(path, points: np.ndarray, width: int, height: int) -> None:
    """Inverse of load_landmarks: write source size and pixel coordinates."""
    pts = np.asarray(points, dtype=np.float64).reshape(68, 2).copy()
    pts[:, 0] *= width
    pts[:, 1] *= height
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{width} {height}\n")
        fh.write(" ".join(f"{v:.4f}" for v in pts.reshape(-1)))
        fh.write("\n")


@dataclass
class Batch:
    """A training batch: images (B,3,S,S), masks (B,1,S,S), landmarks (B,68,2)."""

    images: torch.Tensor
    masks: torch.Tensor
    landmarks: torch.Tensor


class InpaintingDataset:
    """Aligned image/landmark records plus an independent mask pool."""

    def __init__(self, image_paths, landmark_paths, mask_paths, image_size: int = 256,
                 cache_size: int = 256):
        if len(image_paths) != len(landmark_paths):
            raise ValueError(
                f"image flist ({len(image_paths)}) and landmark flist "
                f"({len(landmark_paths)}) are misaligned")
        if not mask_paths:
            raise ValueError("mask flist is empty")
        if not image_paths:
            raise ValueError("image flist is empty")
        self.image_paths = list(image_paths)
        self.landmark_paths = list(landmark_paths)
        self.mask_paths = list(mask_paths)
        self.image_size = image_size
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size

    def __len__(self):
        return len(self.image_paths)

    def _cached(self, kind, path, loader):
        key = (kind, path)
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        value = loader(path, size=self.image_size) if kind != "lm" else loader(path)
        self._cache[key] = value
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return value

    def record(self, index: int, mask_index: int):
        """Load one (image, mask, landmark) triple as torch tensors."""
        image = self._cached("img", self.image_paths[index], load_image)
        landmarks = self._cached("lm", self.landmark_paths[index], load_landmarks)
        mask = self._cached("mask", self.mask_paths[mask_index % len(self.mask_paths)], load_mask)
        return (
            torch.from_numpy(image.transpose(2, 0, 1).copy()),
            torch.from_numpy(mask.copy())[None],
            torch.from_numpy(landmarks.copy()),
        )


class TrainStream(InpaintingDataset):
    """Epoch-aware, seeded batch source.

    Batch composition is a pure function of (seed, iteration): each epoch
    draws a fresh record permutation and independent mask indices from an rng
    keyed by (seed, epoch), so any iteration can be recomputed exactly, which
    makes resumed runs identical to uninterrupted ones.
    """

    def __init__(self, image_paths, landmark_paths, mask_paths, batch_size: int = 4,
                 seed: int = 0, image_size: int = 256, cache_size: int = 256):
        super().__init__(image_paths, landmark_paths, mask_paths, image_size, cache_size)
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if len(self.image_paths) < batch_size:
            raise ValueError(
                f"need at least batch_size={batch_size} records, have {len(self.image_paths)}")
        self.batch_size = batch_size
        self.seed = seed
        self._epoch_plan_cache: tuple | None = None

    @property
    def batches_per_epoch(self) -> int:
        return len(self.image_paths) // self.batch_size

    def _epoch_plan(self, epoch: int):
        if self._epoch_plan_cache is not None and self._epoch_plan_cache[0] == epoch:
            return self._epoch_plan_cache[1], self._epoch_plan_cache[2]
        rng = np.random.default_rng((self.seed, epoch))
        perm = rng.permutation(len(self.image_paths))
        mask_idx = rng.integers(0, len(self.mask_paths), size=len(self.image_paths))
        self._epoch_plan_cache = (epoch, perm, mask_idx)
        return perm, mask_idx

    def batch_at(self, iteration: int) -> Batch:
        epoch = iteration // self.batches_per_epoch
        slot = iteration % self.batches_per_epoch
        perm, mask_idx = self._epoch_plan(epoch)
        images, masks, landmarks = [], [], []
        for k in range(self.batch_size):
            i = int(perm[slot * self.batch_size + k])
            record = self._load_with_fallback(i, int(mask_idx[i]))
            images.append(record[0])
            masks.append(record[1])
            landmarks.append(record[2])
        return Batch(torch.stack(images), torch.stack(masks), torch.stack(landmarks))

    def _load_with_fallback(self, index, mask_index):
        # a corrupt record is skipped deterministically in favor of the next one
        for offset in range(len(self.image_paths)):
            try:
                return self.record((index + offset) % len(self.image_paths), mask_index)
            except DecodeError as exc:
                logger.error("skipping record %d: %s", index + offset, exc)
        raise DecodeError("no decodable records in dataset")


class EvalLoader(InpaintingDataset):
    """Sequential, deterministic batches for validation: record i is paired
    with mask i mod n_masks, in flist order."""

    def __init__(self, image_paths, landmark_paths, mask_paths, batch_size: int = 4,
                 image_size: int = 256):
        super().__init__(image_paths, landmark_paths, mask_paths, image_size)
        self.batch_size = batch_size

    def __iter__(self):
        for start in range(0, len(self.image_paths), self.batch_size):
            rows = range(start, min(start + self.batch_size, len(self.image_paths)))
            records = [self.record(i, i) for i in rows]
            yield Batch(
                torch.stack([r[0] for r in records]),
                torch.stack([r[1] for r in records]),
                torch.stack([r[2] for r in records]),
            )
