"""Synthetic federated datasets and the per-client objectives they define.

Two client kinds exist:

* :class:`RegressionClient` holds a single pair ``(x, y)`` with the noiseless
  target ``y = <x, w*>``; its objective is ``(<x, w> - y)**2``.
* :class:`ClassificationClient` holds a labeled feature matrix; its objective
  is the mean softmax cross-entropy of a linear ``K x d`` model stored as a
  flattened ``K*d`` vector (row ``k`` holds class ``k``'s weights).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy.special import logsumexp, softmax

from .core import DimensionError


def rowdot(X: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Row-wise inner products ``<X[i], W[i]>``.

    Every regression prediction in the package goes through this kernel so
    that a row gives bit-identical results whether it is evaluated alone or
    inside a batch.
    """
    return (X * W).sum(axis=1)


@dataclass(frozen=True)
class RegressionClient:
    x: np.ndarray
    y: float

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    def _residual(self, w: np.ndarray) -> float:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != self.x.shape:
            raise DimensionError(f"model length {w.shape} does not match client dimension {self.dim}")
        return float(rowdot(self.x[None, :], w[None, :])[0]) - self.y

    def loss(self, w) -> float:
        return self._residual(w) ** 2

    def gradient(self, w) -> np.ndarray:
        return 2.0 * self._residual(w) * self.x


@dataclass(frozen=True)
class ClassificationClient:
    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,) ints in [0, num_classes)
    num_classes: int
    class_proportions: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError("a classification client needs at least one sample")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must align with feature rows")
        if np.any(self.labels < 0) or np.any(self.labels >= self.num_classes):
            raise ValueError("label index out of range")

    @property
    def dim(self) -> int:
        return self.features.shape[1] * self.num_classes

    def _logits(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.dim,):
            raise DimensionError(f"model length {w.shape} does not match K*d = {self.dim}")
        return self.features @ w.reshape(self.num_classes, -1).T

    def loss(self, w) -> float:
        z = self._logits(w)
        n = z.shape[0]
        return float(np.mean(logsumexp(z, axis=1) - z[np.arange(n), self.labels]))

    def gradient(self, w) -> np.ndarray:
        z = self._logits(w)
        n = z.shape[0]
        p = softmax(z, axis=1)
        p[np.arange(n), self.labels] -= 1.0
        return (p.T @ self.features).ravel() / n


Client = Union[RegressionClient, ClassificationClient]


@dataclass(frozen=True)
class FederatedDataset:
    clients: list
    d: int
    optimum: np.ndarray | None = None
    num_classes: int | None = None

    def __post_init__(self):
        if not self.clients:
            raise ValueError("a federated dataset needs at least one client")
        dims = {c.dim for c in self.clients}
        if dims != {self.model_dim}:
            raise DimensionError(f"clients disagree on model dimension: {sorted(dims)}")

    @property
    def M(self) -> int:
        return len(self.clients)

    @property
    def model_dim(self) -> int:
        return self.d if self.num_classes is None else self.d * self.num_classes

    @property
    def is_regression(self) -> bool:
        return self.num_classes is None

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """``(X, y)`` arrays for a regression dataset, one row per client."""
        if not self.is_regression:
            raise TypeError("only regression datasets stack into (X, y)")
        X = np.stack([c.x for c in self.clients])
        y = np.array([c.y for c in self.clients])
        return X, y

    def subset(self, M: int) -> "FederatedDataset":
        """The first ``M`` clients, sharing the same optimum."""
        return FederatedDataset(list(self.clients[:M]), self.d, self.optimum, self.num_classes)

    def mean_loss(self, w) -> float:
        if self.is_regression:
            X, y = self._cached_stack()
            w = np.asarray(w, dtype=np.float64)
            if w.shape != (self.d,):
                raise DimensionError(f"model length {w.shape} does not match d = {self.d}")
            r = rowdot(X, np.broadcast_to(w, X.shape)) - y
            return float(np.mean(r * r))
        return float(np.mean([c.loss(w) for c in self.clients]))

    def _cached_stack(self):
        cache = self.__dict__.get("_stack")
        if cache is None:
            cache = self.stacked()
            object.__setattr__(self, "_stack", cache)
        return cache


def loss(client: Client, w) -> float:
    return client.loss(w)


def gradient(client: Client, w) -> np.ndarray:
    return client.gradient(w)


def generate_synthetic_regression(M: int, d: int, rng: np.random.Generator) -> FederatedDataset:
    """Heterogeneous rank-one least-squares clients sharing the minimizer ``w*``.

    ``u_i ~ N(0, 0.1)`` and ``m_i ~ N(u_i, 1)`` use the second argument as a
    variance; ``x_i ~ N(m_i 1, I_d)`` and ``y_i = <x_i, w*>``.
    """
    if M < 1 or d < 1:
        raise ValueError("M and d must be positive")
    w_star = rng.standard_normal(d)
    u = rng.normal(0.0, math.sqrt(0.1), size=M)
    m = rng.normal(u, 1.0)
    X = m[:, None] + rng.standard_normal((M, d))
    y = rowdot(X, np.broadcast_to(w_star, X.shape))
    clients = [RegressionClient(X[i].copy(), float(y[i])) for i in range(M)]
    return FederatedDataset(clients, d, w_star)


def generate_synthetic_classification(
    M: int,
    d: int,
    K: int,
    samples_per_client: int,
    dirichlet_alpha: float,
    rng: np.random.Generator,
) -> FederatedDataset:
    """Gaussian class clusters split across clients with Dirichlet label skew."""
    if K < 2:
        raise ValueError("K must be at least 2")
    if M < 1 or d < 1 or samples_per_client < 1:
        raise ValueError("M, d and samples_per_client must be positive")
    if dirichlet_alpha <= 0:
        raise ValueError("dirichlet_alpha must be positive")
    means = rng.standard_normal((K, d))
    clients = []
    for _ in range(M):
        props = rng.dirichlet(np.full(K, dirichlet_alpha))
        labels = rng.choice(K, size=samples_per_client, p=props)
        feats = means[labels] + rng.standard_normal((samples_per_client, d))
        clients.append(ClassificationClient(feats, labels, K, props))
    return FederatedDataset(clients, d, None, K)


def dataset_to_dict(ds: FederatedDataset) -> dict:
    if ds.is_regression:
        clients = [{"x": c.x.tolist(), "y": c.y} for c in ds.clients]
    else:
        clients = [{"features": c.features.tolist(), "labels": c.labels.tolist()} for c in ds.clients]
    return {
        "d": ds.d,
        "M": ds.M,
        "num_classes": ds.num_classes,
        "clients": clients,
        "optimum": None if ds.optimum is None else ds.optimum.tolist(),
    }


def dataset_from_dict(obj: dict) -> FederatedDataset:
    K = obj.get("num_classes")
    if K is None:
        clients = [RegressionClient(np.asarray(c["x"], dtype=np.float64), float(c["y"])) for c in obj["clients"]]
    else:
        clients = [
            ClassificationClient(np.asarray(c["features"], dtype=np.float64), np.asarray(c["labels"], dtype=np.int64), K)
            for c in obj["clients"]
        ]
    if len(clients) != obj["M"]:
        raise ValueError(f"M = {obj['M']} but {len(clients)} clients listed")
    optimum = obj.get("optimum")
    return FederatedDataset(clients, int(obj["d"]), None if optimum is None else np.asarray(optimum, dtype=np.float64), K)


def save_dataset(ds: FederatedDataset, path) -> None:
    Path(path).write_text(json.dumps(dataset_to_dict(ds)))


def load_dataset(path) -> FederatedDataset:
    return dataset_from_dict(json.loads(Path(path).read_text()))
