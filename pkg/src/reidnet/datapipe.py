"""Synthetic identity-retrieval dataset, PK batch sampling, and augmentation.

Each identity is a seeded color/stripe template; an image is the template
under a camera-specific affine color shift plus Gaussian pixel noise.
Templates are spread around the color wheel so identities stay linearly
separable at zero noise, while camera shifts are small enough that the
same-camera exclusion rule of the evaluator is exercised without breaking
nearest-template classification.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import DatasetConfig
from .network import SampleBatch
from .rng import Rng
from .serialize import read_tensor, write_tensor


@dataclass
class AugmentParams:
    flip_probability: float = 0.5
    erase_probability: float = 0.5
    erase_area_range: tuple[float, float] = (0.02, 0.4)
    erase_aspect_range: tuple[float, float] = (0.3, 3.3)
    erase_fill: float = 0.5


@dataclass
class SyntheticDataset:
    images: np.ndarray  # (N, 3, H, W)
    identity_labels: np.ndarray
    camera_labels: np.ndarray
    num_identities: int

    def __len__(self) -> int:
        return self.images.shape[0]


def _identity_template(rng: Rng, index: int, total: int, h: int, w: int) -> np.ndarray:
    hue = (index + 0.25 * rng.uniform()) / total
    base = 0.5 + 0.35 * np.cos(2.0 * math.pi * (hue + np.array([0.0, 1 / 3, 2 / 3])))
    period = 3 + rng.randbelow(6)
    phase = rng.uniform()
    rows = 0.5 + 0.5 * np.cos(2.0 * math.pi * (np.arange(h) / period + phase))
    ramp = rng.uniform(low=-1.0, high=1.0) * (np.arange(w) / max(w - 1, 1) - 0.5)
    template = base[:, None, None] * (0.7 + 0.3 * rows[None, :, None])
    return template + 0.08 * ramp[None, None, :]


def generate_dataset(spec: DatasetConfig) -> SyntheticDataset:
    if spec.cameras < 1:
        raise ValueError(f"cameras must be >= 1, got {spec.cameras}")
    if spec.cameras >= 2 and spec.images_per_identity < 2:
        raise ValueError("every identity needs images under at least two cameras")
    if spec.noise_level < 0:
        raise ValueError(f"noise_level must be nonnegative, got {spec.noise_level}")
    h, w = spec.image_height, spec.image_width
    rng = Rng(spec.seed)

    cam_scale = rng.uniform(size=(spec.cameras, 3), low=0.93, high=1.07)
    cam_offset = rng.uniform(size=(spec.cameras, 3), low=-0.05, high=0.05)
    templates = [_identity_template(rng, i, spec.num_identities, h, w)
                 for i in range(spec.num_identities)]

    images, ids, cams = [], [], []
    for i in range(spec.num_identities):
        for j in range(spec.images_per_identity):
            cam = j % spec.cameras
            img = templates[i] * cam_scale[cam][:, None, None] + cam_offset[cam][:, None, None]
            img = img + spec.noise_level * rng.normal(size=(3, h, w))
            images.append(img)
            ids.append(i)
            cams.append(cam)
    return SyntheticDataset(
        images=np.stack(images),
        identity_labels=np.array(ids, dtype=np.int64),
        camera_labels=np.array(cams, dtype=np.int64),
        num_identities=spec.num_identities,
    )


def pk_sample(dataset: SyntheticDataset, p: int, k: int, rng: Rng) -> SampleBatch:
    """P identities x K images, both drawn uniformly without replacement."""
    labels = dataset.identity_labels
    identities = np.unique(labels)
    per_identity = [np.flatnonzero(labels == i) for i in identities]
    eligible = [idx for idx in per_identity if idx.size >= k]
    if len(eligible) < p:
        raise ValueError(f"pk_sample needs {p} identities with >= {k} images, "
                         f"found {len(eligible)}")
    chosen = rng.choice(len(eligible), p)
    picks = []
    for c in sorted(int(c) for c in chosen):
        pool = eligible[c]
        picks.extend(pool[rng.choice(pool.size, k)])
    picks = np.array(picks)
    return SampleBatch(
        images=dataset.images[picks].copy(),
        identity_labels=labels[picks].copy(),
        camera_labels=dataset.camera_labels[picks].copy(),
    )


def augment(image: np.ndarray, params: AugmentParams, rng: Rng) -> np.ndarray:
    """Horizontal flip, then random erasing of one rectangle, label- and shape-preserving."""
    img = np.asarray(image, dtype=np.float64).copy()
    _, h, w = img.shape
    if rng.uniform() < params.flip_probability:
        img = img[:, :, ::-1].copy()
    if rng.uniform() < params.erase_probability:
        for _ in range(10):  # skip the erase if no proposal fits
            area = rng.uniform(low=params.erase_area_range[0], high=params.erase_area_range[1]) * h * w
            aspect = rng.uniform(low=params.erase_aspect_range[0], high=params.erase_aspect_range[1])
            eh = int(round(math.sqrt(area * aspect)))
            ew = int(round(math.sqrt(area / aspect)))
            if 1 <= eh <= h and 1 <= ew <= w:
                y = rng.randbelow(h - eh + 1)
                x = rng.randbelow(w - ew + 1)
                img[:, y:y + eh, x:x + ew] = params.erase_fill
                break
    return img


def split_query_gallery(dataset: SyntheticDataset, queries_per_identity: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic split: the first images of each identity become queries."""
    labels = dataset.identity_labels
    query, gallery = [], []
    for ident in np.unique(labels):
        idx = np.flatnonzero(labels == ident)
        if not 1 <= queries_per_identity < idx.size:
            raise ValueError(f"queries_per_identity={queries_per_identity} must leave "
                             f"gallery images for identity {ident} ({idx.size} total)")
        query.extend(idx[:queries_per_identity])
        gallery.extend(idx[queries_per_identity:])
    return np.array(query), np.array(gallery)


def export_dataset(dataset: SyntheticDataset, directory, queries_per_identity: int | None = None) -> None:
    """Write per-image tensor files plus a CSV manifest (file, identity, camera, split)."""
    directory = Path(directory)
    (directory / "images").mkdir(parents=True, exist_ok=True)
    split = np.full(len(dataset), "train", dtype=object)
    if queries_per_identity is not None:
        q_idx, g_idx = split_query_gallery(dataset, queries_per_identity)
        split[q_idx] = "query"
        split[g_idx] = "gallery"
    with open(directory / "manifest.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file", "identity", "camera", "split"])
        for i in range(len(dataset)):
            fname = f"images/img_{i:05d}.tnsr"
            write_tensor(directory / fname, dataset.images[i])
            writer.writerow([fname, int(dataset.identity_labels[i]),
                             int(dataset.camera_labels[i]), split[i]])


def import_dataset(directory) -> tuple[SyntheticDataset, np.ndarray]:
    """Inverse of export_dataset; returns the dataset and the split column."""
    directory = Path(directory)
    images, ids, cams, split = [], [], [], []
    with open(directory / "manifest.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            images.append(read_tensor(directory / row["file"]))
            ids.append(int(row["identity"]))
            cams.append(int(row["camera"]))
            split.append(row["split"])
    ids = np.array(ids, dtype=np.int64)
    return SyntheticDataset(
        images=np.stack(images),
        identity_labels=ids,
        camera_labels=np.array(cams, dtype=np.int64),
        num_identities=int(ids.max()) + 1 if ids.size else 0,
    ), np.array(split, dtype=object)
