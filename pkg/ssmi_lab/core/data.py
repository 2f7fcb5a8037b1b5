"""Synthetic captioning data with a known visual-to-token mapping.

Each sample draws ``raw ~ N(0, I)`` of width d_raw. Position t of its caption
is the bucket of ``<w_t, raw>`` for a fixed unit direction ``w_t``; the
buckets split the standard normal into ``vocab`` equal-probability intervals,
so every position is uniform over the vocabulary by construction.
"""

import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .checkpoint import encode_container, read_container, write_atomic
from .constants import TRAIN_FRACTION
from .errors import CheckpointFormatError, ContractError
from .models import DatasetSpec
from .rng import SplitMix64, derive_seed

logger = logging.getLogger(__name__)

# sub-stream tags
_RAW_STREAM = 1
_DIRECTION_STREAM = 2


class Split(str, Enum):
    TRAIN = "train"
    HELD_OUT = "held_out"


@dataclass(frozen=True)
class SyntheticSample:
    """Raw visual features and the caption they determine."""

    raw_visual: np.ndarray
    tokens: tuple[int, ...]
    split: Split


@dataclass
class Dataset:
    spec: DatasetSpec
    directions: np.ndarray
    samples: list[SyntheticSample]

    def split(self, which: Split) -> list[SyntheticSample]:
        return [s for s in self.samples if s.split is which]

    @property
    def train(self) -> list[SyntheticSample]:
        return self.split(Split.TRAIN)

    @property
    def held_out(self) -> list[SyntheticSample]:
        return self.split(Split.HELD_OUT)


def bucket_boundaries(vocab: int) -> np.ndarray:
    """Standard normal quantiles at k / vocab for k = 1 .. vocab - 1."""
    return np.asarray(ndtri(np.arange(1, vocab) / vocab), dtype=np.float64)


def tokenize(raw: np.ndarray, directions: np.ndarray, vocab: int) -> np.ndarray:
    """Caption ids for one raw vector (or a batch of them along axis 0)."""
    return np.searchsorted(bucket_boundaries(vocab), raw @ directions.T, side="right")


def train_count(size: int) -> int:
    """Number of leading samples in the train split; both splits stay nonempty."""
    return min(max(int(size * TRAIN_FRACTION), 1), size - 1)


def generate(spec: DatasetSpec) -> Dataset:
    """Build the dataset a spec describes; identical specs give identical data."""
    spec.validate()
    raw = SplitMix64(derive_seed(spec.seed, _RAW_STREAM)).normal((spec.size, spec.d_raw))
    directions = SplitMix64(derive_seed(spec.seed, _DIRECTION_STREAM)).normal((spec.T, spec.d_raw))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    tokens = tokenize(raw, directions, spec.vocab)
    cut = train_count(spec.size)
    samples = [
        SyntheticSample(
            raw_visual=raw[i].copy(),
            tokens=tuple(int(t) for t in tokens[i]),
            split=Split.TRAIN if i < cut else Split.HELD_OUT,
        )
        for i in range(spec.size)
    ]
    logger.debug(f"Generated {spec.size} samples ({cut} train) with seed {spec.seed}")
    return Dataset(spec=spec, directions=directions, samples=samples)


def add_noise(sample: SyntheticSample, sigma: float, seed: int) -> SyntheticSample:
    """Perturb the raw features with ``sigma`` times seeded standard normal noise.

    Tokens are never changed.
    """
    if sigma < 0:
        raise ContractError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return sample
    noise = SplitMix64(seed).normal(sample.raw_visual.shape[0])
    return replace(sample, raw_visual=sample.raw_visual + sigma * noise)


def add_noise_all(
    samples: Sequence[SyntheticSample], sigma: float, seed: int
) -> list[SyntheticSample]:
    """``add_noise`` with an independent sub-stream per sample index."""
    return [add_noise(s, sigma, derive_seed(seed, i)) for i, s in enumerate(samples)]


def batches(
    samples: Sequence[SyntheticSample], batch_size: int, seed: int, epoch: int = 0
) -> Iterator[list[SyntheticSample]]:
    """Shuffled batches for one epoch; the order depends only on (seed, epoch)."""
    if batch_size < 1:
        raise ContractError(f"batch_size must be >= 1, got {batch_size}")
    order = SplitMix64(derive_seed(seed, epoch)).permutation(len(samples))
    for start in range(0, len(order), batch_size):
        yield [samples[i] for i in order[start : start + batch_size]]


def endless_batches(
    samples: Sequence[SyntheticSample], batch_size: int, seed: int
) -> Iterator[list[SyntheticSample]]:
    epoch = 0
    while True:
        yield from batches(samples, batch_size, seed, epoch)
        epoch += 1


def chance_level(samples: Sequence[SyntheticSample]) -> float:
    """Accuracy of the best visual-blind constant predictor on next-token targets."""
    targets = np.concatenate([np.asarray(s.tokens[1:]) for s in samples])
    return float(np.bincount(targets).max() / targets.size)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Export through the checkpoint container (ids stored as f64)."""
    spec = dataset.spec
    metadata = {
        "kind": "dataset",
        "spec": {
            "size": spec.size,
            "d_raw": spec.d_raw,
            "T": spec.T,
            "vocab": spec.vocab,
            "seed": spec.seed,
            "noise_sigma": spec.noise_sigma,
        },
    }
    tensors = {
        "raw_visual": np.stack([s.raw_visual for s in dataset.samples]),
        "tokens": np.asarray([s.tokens for s in dataset.samples], dtype=np.float64),
        "split": np.asarray([s.split is Split.HELD_OUT for s in dataset.samples], dtype=np.float64),
        "directions": dataset.directions,
    }
    write_atomic(path, encode_container(metadata, tensors))


def load_dataset(path: str | Path) -> Dataset:
    container = read_container(path)
    if container.metadata.get("kind") != "dataset":
        raise CheckpointFormatError("not a dataset archive")
    try:
        spec = DatasetSpec(**container.metadata["spec"])
        raw = container.tensors["raw_visual"]
        tokens = container.tensors["tokens"].astype(np.int64)
        split = container.tensors["split"]
        directions = container.tensors["directions"]
    except (KeyError, TypeError) as exc:
        raise CheckpointFormatError(f"dataset archive incomplete: {exc}") from exc
    samples = [
        SyntheticSample(
            raw_visual=raw[i].copy(),
            tokens=tuple(int(t) for t in tokens[i]),
            split=Split.HELD_OUT if split[i] else Split.TRAIN,
        )
        for i in range(raw.shape[0])
    ]
    return Dataset(spec=spec, directions=directions, samples=samples)
