"""Glue between feature extraction, the codebook, and the network.

The fitted state of a pipeline is exactly three things: the k-means
dictionary, the z-score statistics, and the network parameters. The first
two must be fitted on training recordings only; this module keeps that
split explicit so evaluation code cannot leak test data into the fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features_low import FrameConfig, recording_low_features
from .features_mid import (
    Dictionary,
    NormStats,
    assemble_final,
    bow_encode,
    kmeans_fit,
    zscore_apply,
    zscore_fit,
)
from .ingest import Recording, stages_to_indices
from .network import NetSpec, Network


@dataclass(frozen=True)
class FittedPipeline:
    """Feature transform learned from a training split."""

    dictionary: Dictionary
    stats: NormStats

    def transform(self, low: np.ndarray) -> np.ndarray:
        """Low-level rows (T, d) to normalized final rows (T, d + K)."""
        final = assemble_final(low, bow_encode(low, self.dictionary))
        return zscore_apply(final, self.stats)

    @property
    def final_dim(self) -> int:
        return self.stats.mean.shape[0]


def fit_pipeline(train_lows: list[np.ndarray], num_words: int, seed: int) -> FittedPipeline:
    """Fit dictionary and normalization from training recordings' low features.

    The dictionary is clustered on raw low-level rows; z-score statistics
    are taken over the concatenated (low | distances) rows afterwards.
    """
    if not train_lows:
        raise ValueError("need at least one training recording")
    stacked = np.concatenate(train_lows, axis=0)
    dictionary = kmeans_fit(stacked, num_words, seed=seed)
    final = assemble_final(stacked, bow_encode(stacked, dictionary))
    stats = zscore_fit(final)
    return FittedPipeline(dictionary=dictionary, stats=stats)


def one_hot(indices: np.ndarray, num_classes: int) -> np.ndarray:
    return np.eye(num_classes)[np.asarray(indices, dtype=np.int64)]


def label_matrix(rec: Recording, num_classes: int) -> np.ndarray:
    return one_hot(stages_to_indices(rec.labels, num_classes), num_classes)


def make_sequences(
    lows: list[np.ndarray],
    labels: list[np.ndarray],
    pipeline: FittedPipeline,
    num_classes: int,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """(features, one-hot labels) pairs ready for the network."""
    return [
        (pipeline.transform(low), one_hot(y, num_classes))
        for low, y in zip(lows, labels)
    ]


@dataclass
class FittedModel:
    """Everything needed to score a new recording."""

    frame: FrameConfig
    num_classes: int
    pipeline: FittedPipeline
    net: Network

    def features_for(self, rec: Recording) -> np.ndarray:
        return self.pipeline.transform(recording_low_features(rec, self.frame))

    @property
    def spec(self) -> NetSpec:
        return self.net.spec
