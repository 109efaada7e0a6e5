"""Synthetic blobs, quantity-skew partitioning and Gaussian dummy inputs."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InputError
from .nn import LabeledBatch

CENTER_DISTANCE = 4.0


@dataclass(frozen=True, eq=False)
class Dataset:
    train: LabeledBatch
    test: LabeledBatch
    num_classes: int

    @property
    def input_dim(self) -> int:
        return self.train.inputs.shape[1]


@dataclass(frozen=True)
class PartitionSpec:
    num_devices: int
    alpha: float
    seed: int

    def __post_init__(self):
        if self.num_devices < 3:
            raise ConfigurationError(f"need at least 3 devices, got {self.num_devices}")
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")


def simplex_centers(num_classes: int, input_dim: int, distance: float = CENTER_DISTANCE) -> np.ndarray:
    """Vertices of a regular simplex with the given edge length, centred at 0.

    The vertices span ``num_classes - 1`` dimensions and occupy the leading
    coordinates; the remaining coordinates are zero.
    """
    if num_classes == 1:
        return np.zeros((1, input_dim))
    if input_dim < num_classes - 1:
        raise ConfigurationError(
            f"{num_classes} equidistant centres need input_dim >= {num_classes - 1}"
        )
    vertices = np.eye(num_classes) * (distance / np.sqrt(2.0))
    vertices -= vertices.mean(axis=0)
    # rotate the (num_classes-1)-dim affine span onto the leading axes
    _, _, vt = np.linalg.svd(vertices)
    coords = vertices @ vt[: num_classes - 1].T
    centers = np.zeros((num_classes, input_dim))
    centers[:, : num_classes - 1] = coords
    return centers


def sample_blobs(num_classes: int, per_class: int, input_dim: int, rng: np.random.Generator) -> LabeledBatch:
    centers = simplex_centers(num_classes, input_dim)
    labels = np.repeat(np.arange(num_classes), per_class)
    inputs = centers[labels] + rng.standard_normal((labels.size, input_dim))
    return LabeledBatch(inputs, labels)


def generate_synthetic(num_classes: int, per_class: int, input_dim: int, seed: int) -> Dataset:
    """Unit-variance Gaussian blobs with a stratified 80/20 train/test split."""
    if min(num_classes, per_class, input_dim) < 1:
        raise InputError("num_classes, per_class and input_dim must all be >= 1")
    n_test = max(1, int(round(0.2 * per_class)))
    n_train = per_class - n_test
    if n_train < 1:
        raise InputError(f"per_class={per_class} leaves no training examples after the 80/20 split")
    rng = np.random.default_rng(seed)
    blobs = sample_blobs(num_classes, per_class, input_dim, rng)

    train_idx, test_idx = [], []
    for c in range(num_classes):
        idx = rng.permutation(np.flatnonzero(blobs.labels == c))
        test_idx.append(idx[:n_test])
        train_idx.append(idx[n_test:])
    train_idx = rng.permutation(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return Dataset(blobs.subset(train_idx), blobs.subset(test_idx), num_classes)


def shard_sizes(total: int, proportions: np.ndarray) -> np.ndarray:
    """Integer counts summing to ``total`` (largest remainder), each >= 1."""
    raw = proportions * total
    sizes = np.floor(raw).astype(np.int64)
    short = total - sizes.sum()
    order = np.argsort(-(raw - sizes), kind="stable")
    sizes[order[:short]] += 1
    while sizes.min() < 1:
        sizes[np.argmin(sizes)] += 1
        sizes[np.argmax(sizes)] -= 1
    return sizes


def quantity_skew_partition(train: LabeledBatch, spec: PartitionSpec) -> list[np.ndarray]:
    """Split example indices into ``M`` disjoint shards with Dirichlet sizes.

    Only shard sizes are skewed; which examples land in a shard is a uniform
    random permutation, so the label mix of each shard is not targeted.
    """
    n = len(train)
    if n < spec.num_devices:
        raise InputError(f"{n} examples cannot cover {spec.num_devices} devices")
    rng = np.random.default_rng(spec.seed)
    gammas = rng.standard_gamma(spec.alpha, size=spec.num_devices)
    if gammas.sum() > 0:
        proportions = gammas / gammas.sum()
    else:
        # every draw underflowed (tiny alpha): fall back to a single dominant shard
        proportions = np.zeros(spec.num_devices)
        proportions[rng.integers(spec.num_devices)] = 1.0
    sizes = shard_sizes(n, proportions)
    perm = rng.permutation(n)
    return np.split(perm, np.cumsum(sizes)[:-1])


def generate_dummies(dummy_count: int, input_dim: int, seed) -> np.ndarray:
    """i.i.d. N(0, 1) inputs shaped like real examples."""
    if dummy_count < 1 or input_dim < 1:
        raise InputError("dummy_count and input_dim must be >= 1")
    return np.random.default_rng(seed).standard_normal((dummy_count, input_dim))


def dump_csv(dataset: Dataset, path) -> None:
    """One row per example: features..., label, split."""
    dim = dataset.input_dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(dim)] + ["label", "split"])
        for split, batch in (("train", dataset.train), ("test", dataset.test)):
            for x, y in zip(batch.inputs, batch.labels):
                w.writerow([repr(float(v)) for v in x] + [int(y), split])


def load_csv(path, num_classes: int | None = None) -> Dataset:
    rows = {"train": ([], []), "test": ([], [])}
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        dim = len(header) - 2
        for row in reader:
            if row[-1] not in rows:
                raise InputError(f"unknown split tag {row[-1]!r}")
            xs, ys = rows[row[-1]]
            xs.append([float(v) for v in row[:dim]])
            ys.append(int(row[dim]))

    def batch(split):
        xs, ys = rows[split]
        return LabeledBatch(np.asarray(xs, dtype=np.float64).reshape(-1, dim), np.asarray(ys, dtype=np.int64))

    train, test = batch("train"), batch("test")
    if num_classes is None:
        num_classes = int(max(train.labels.max(initial=-1), test.labels.max(initial=-1))) + 1
    return Dataset(train, test, num_classes)
