# src/evaluation/clustering.py
"""Mini-batch k-means (per-center learning rate 1/count) and V-measure."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.cluster import kmeans_plusplus
from sklearn.metrics import v_measure_score

from src import config
from src.exceptions import EvaluationError
from src.logger import logger


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float


@dataclass
class ClusteringTask:
    """Embeddings and their true labels; k is the number of distinct labels."""

    embeddings: np.ndarray
    labels: list

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        if len(self.labels) != len(self.embeddings):
            raise EvaluationError(f"{len(self.embeddings)} embeddings but {len(self.labels)} labels")

    @property
    def k(self) -> int:
        return len(set(self.labels))


def _squared_distances(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (x * x).sum(axis=1)[:, None] - 2.0 * x @ centers.T + (centers * centers).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def minibatch_kmeans(embeddings: np.ndarray, k: int, batch_size: int = config.KMEANS_BATCH_SIZE,
                     seed: int = 0, n_epochs: int = config.KMEANS_EPOCHS) -> KMeansResult:
    """
    k-means++ seeding, then n_epochs x ceil(n / batch_size) mini-batch iterations;
    each sample moves its nearest center by 1/count of the way towards it.
    Returns nearest-center labels of every item.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise EvaluationError(f"k must be at least 1, got {k}")
    if k > n:
        raise EvaluationError(f"cannot form {k} clusters from {n} items")

    rng = np.random.default_rng(seed)
    centers, _ = kmeans_plusplus(x, n_clusters=k, random_state=int(rng.integers(2**31 - 1)))
    centers = centers.astype(np.float64, copy=True)
    counts = np.zeros(k)
    batch_size = min(batch_size, n)
    iterations = n_epochs * math.ceil(n / batch_size)
    for _ in range(iterations):
        batch = x[rng.choice(n, size=batch_size, replace=False)]
        nearest = np.argmin(_squared_distances(batch, centers), axis=1)
        for sample, c in zip(batch, nearest):
            counts[c] += 1
            eta = 1.0 / counts[c]
            centers[c] = (1.0 - eta) * centers[c] + eta * sample

    distances = _squared_distances(x, centers)
    labels = np.argmin(distances, axis=1)
    inertia = float(distances[np.arange(n), labels].sum())
    logger.info(f"Mini-batch k-means: k={k}, n={n}, {iterations} iterations, inertia {inertia:.4f}")
    return KMeansResult(labels=labels, centers=centers, inertia=inertia)


def v_measure(predicted: Sequence, truth: Sequence) -> float:
    """Harmonic mean of homogeneity and completeness; insensitive to label names."""
    if len(predicted) != len(truth):
        raise EvaluationError(f"{len(predicted)} predicted labels but {len(truth)} true labels")
    if len(truth) == 0:
        raise EvaluationError("v_measure of an empty labelling")
    return float(v_measure_score(list(truth), list(predicted)))


def evaluate_clustering(task: ClusteringTask, batch_size: int = config.KMEANS_BATCH_SIZE, seed: int = 0) -> float:
    result = minibatch_kmeans(task.embeddings, task.k, batch_size=batch_size, seed=seed)
    return v_measure(result.labels, task.labels)
