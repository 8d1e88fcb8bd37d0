"""Input validation helpers shared by the estimator, service and CLI."""

from __future__ import annotations

import numpy as np
import torch


def check_image(image, size: int | None = None) -> np.ndarray:
    """Validate an H x W x 3 image with float values in [0, 1].

    Returns a float32 copy. ``size`` additionally pins the spatial extent.
    """
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    if size is not None and arr.shape[:2] != (size, size):
        raise ValueError(f"expected a {size}x{size} image, got {arr.shape[0]}x{arr.shape[1]}")
    return arr


def check_mask(mask, size: int | None = None) -> np.ndarray:
    """Validate an H x W binary mask (1 = hole). Returns a float32 copy."""
    arr = np.asarray(mask, dtype=np.float32)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValueError(f"expected an HxW mask, got shape {arr.shape}")
    values = np.unique(arr)
    if not np.isin(values, (0.0, 1.0)).all():
        raise ValueError("mask must be strictly binary (values 0 and 1)")
    if size is not None and arr.shape != (size, size):
        raise ValueError(f"expected a {size}x{size} mask, got {arr.shape[0]}x{arr.shape[1]}")
    return arr


def check_landmarks(points) -> np.ndarray:
    """Validate a 68-point landmark set. Accepts (136,) or (68, 2); returns (68, 2)."""
    arr = np.asarray(points, dtype=np.float32)
    if arr.size != 136:
        raise ValueError(f"expected 136 landmark scalars, got {arr.size}")
    arr = arr.reshape(68, 2)
    if not np.isfinite(arr).all():
        raise ValueError("landmarks contain non-finite values")
    return arr


def image_to_tensor(image: np.ndarray) -> torch.Tensor:
    """HxWx3 [0,1] array -> (1, 3, H, W) float tensor."""
    return torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1)))[None]


def mask_to_tensor(mask: np.ndarray) -> torch.Tensor:
    """HxW binary array -> (1, 1, H, W) float tensor."""
    return torch.from_numpy(np.ascontiguousarray(mask))[None, None]


def tensor_to_image(t: torch.Tensor) -> np.ndarray:
    """(1, 3, H, W) tensor -> HxWx3 float32 array."""
    return t.detach().squeeze(0).permute(1, 2, 0).cpu().numpy()
