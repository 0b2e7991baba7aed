"""Image data for the toy training runs.

Default is a deterministic synthetic 32x32 shapes set (no downloads, no
network); a local CIFAR-10 directory is used instead when supplied.
"""

from __future__ import annotations

import numpy as np
import torch
from torch.utils.data import DataLoader, TensorDataset

CLASS_NAMES = ("circle", "square", "cross", "hstripes", "vstripes", "checker")
NUM_CLASSES = len(CLASS_NAMES)
IMAGE_SIDE = 32


def _draw(rng: np.random.Generator, label: int) -> np.ndarray:
    img = rng.normal(0.12, 0.05, size=(3, IMAGE_SIDE, IMAGE_SIDE)).astype(np.float32)
    color = rng.uniform(0.7, 1.0, size=3).astype(np.float32)
    cx, cy = rng.integers(10, 22, size=2)
    r = int(rng.integers(5, 10))
    yy, xx = np.mgrid[0:IMAGE_SIDE, 0:IMAGE_SIDE]
    if label == 0:  # circle
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    elif label == 1:  # square
        mask = (np.abs(yy - cy) <= r) & (np.abs(xx - cx) <= r)
    elif label == 2:  # cross
        w = max(1, r // 3)
        mask = ((np.abs(yy - cy) <= w) | (np.abs(xx - cx) <= w)) & \
               (np.abs(yy - cy) <= r) & (np.abs(xx - cx) <= r)
    elif label == 3:  # horizontal stripes
        period = int(rng.integers(3, 6))
        mask = (yy // period) % 2 == 0
    elif label == 4:  # vertical stripes
        period = int(rng.integers(3, 6))
        mask = (xx // period) % 2 == 0
    else:  # checkerboard
        period = int(rng.integers(3, 6))
        mask = ((yy // period) + (xx // period)) % 2 == 0
    for c in range(3):
        img[c][mask] = color[c] + rng.normal(0.0, 0.03, size=int(mask.sum()))
    return np.clip(img, 0.0, 1.0)


def synthetic_shapes(count: int, seed: int) -> TensorDataset:
    """Deterministic shapes dataset; sample i is fully determined by (seed, i)."""
    images = np.empty((count, 3, IMAGE_SIDE, IMAGE_SIDE), dtype=np.float32)
    labels = np.empty(count, dtype=np.int64)
    for i in range(count):
        label = i % NUM_CLASSES
        rng = np.random.default_rng([seed, i])
        images[i] = _draw(rng, label)
        labels[i] = label
    return TensorDataset(torch.from_numpy(images), torch.from_numpy(labels))


def load_cifar10(root: str, train: bool) -> TensorDataset:
    """Local CIFAR-10 (no download). Missing files raise with instructions."""
    try:
        from torchvision.datasets import CIFAR10
    except ImportError as exc:  # pragma: no cover
        raise RuntimeError("torchvision is required for --dataset-dir") from exc
    try:
        ds = CIFAR10(root=root, train=train, download=False)
    except RuntimeError as exc:
        raise RuntimeError(
            f"CIFAR-10 not found under {root}; place the extracted "
            "'cifar-10-batches-py' directory there (this tool never downloads)"
        ) from exc
    images = torch.from_numpy(ds.data).permute(0, 3, 1, 2).float() / 255.0
    return TensorDataset(images, torch.tensor(ds.targets, dtype=torch.int64))


def make_loaders(dataset_dir: str | None, seed: int, train_size: int = 2688,
                 test_size: int = 576, batch_size: int = 128,
                 ) -> tuple[DataLoader, DataLoader, int]:
    """(train loader, held-out loader, class count)."""
    if dataset_dir:
        train, test = load_cifar10(dataset_dir, True), load_cifar10(dataset_dir, False)
        classes = 10
    else:
        train = synthetic_shapes(train_size, seed=seed)
        test = synthetic_shapes(test_size, seed=seed + 10_000)
        classes = NUM_CLASSES
    return (
        DataLoader(train, batch_size=batch_size, shuffle=False),
        DataLoader(test, batch_size=batch_size, shuffle=False),
        classes,
    )
