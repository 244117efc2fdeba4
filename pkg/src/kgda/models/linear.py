"""Multinomial logistic regression over sparse binary features.

Shared trainer for both baseline models: minibatch cross-entropy with Adagrad
steps, seeded shuffling, float64 throughout. Deterministic for a fixed seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class TrainSettings:
    seed: int = 0
    epochs: int = 10
    lr: float = 0.1
    l2: float = 1e-4
    batch_size: int = 64


class FeatureIndexer:
    """String feature -> column index; unknown features are dropped once frozen."""

    def __init__(self) -> None:
        self.vocab: dict[str, int] = {}
        self.frozen = False

    def __len__(self) -> int:
        return len(self.vocab)

    def encode(self, features: list[str]) -> list[int]:
        cols = []
        vocab = self.vocab
        for f in features:
            idx = vocab.get(f)
            if idx is None:
                if self.frozen:
                    continue
                idx = len(vocab)
                vocab[f] = idx
            cols.append(idx)
        return sorted(set(cols))


def rows_to_csr(rows: list[list[int]], n_features: int) -> sparse.csr_matrix:
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    for i, row in enumerate(rows):
        indptr[i + 1] = indptr[i] + len(row)
    indices = np.fromiter(
        (c for row in rows for c in row), dtype=np.int64, count=int(indptr[-1])
    )
    data = np.ones(len(indices), dtype=np.float64)
    return sparse.csr_matrix(
        (data, indices, indptr), shape=(len(rows), max(n_features, 1))
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class SoftmaxRegression:
    """Dense weight matrix (classes x features) fitted on CSR inputs."""

    def __init__(self, n_features: int, n_classes: int, settings: TrainSettings):
        self.settings = settings
        self.weights = np.zeros((n_classes, max(n_features, 1)), dtype=np.float64)
        self.bias = np.zeros(n_classes, dtype=np.float64)

    def fit(self, x: sparse.csr_matrix, y: np.ndarray) -> "SoftmaxRegression":
        s = self.settings
        n = x.shape[0]
        n_classes = self.weights.shape[0]
        onehot = np.zeros((n, n_classes), dtype=np.float64)
        onehot[np.arange(n), y] = 1.0
        gw = np.full_like(self.weights, 1e-8)
        gb = np.full_like(self.bias, 1e-8)
        rng = random.Random(s.seed)
        order = list(range(n))
        for _ in range(s.epochs):
            rng.shuffle(order)
            for start in range(0, n, s.batch_size):
                batch = order[start:start + s.batch_size]
                xb = x[batch]
                probs = _softmax(xb @ self.weights.T + self.bias)
                err = (probs - onehot[batch]) / len(batch)
                grad_w = (xb.T @ err).T + s.l2 * self.weights
                grad_b = err.sum(axis=0)
                gw += grad_w * grad_w
                gb += grad_b * grad_b
                self.weights -= s.lr * grad_w / np.sqrt(gw)
                self.bias -= s.lr * grad_b / np.sqrt(gb)
        return self

    def predict_proba(self, x: sparse.csr_matrix) -> np.ndarray:
        return _softmax(x @ self.weights.T + self.bias)
