"""Dense vector helpers, seeded randomness, and shared error types.

Model vectors are plain 1-D ``numpy.float64`` arrays. Every random draw in the
package comes from a generator built by :func:`make_rng`, keyed by a master
seed plus a stream id such as ``(round, CLIENT, i)``. Deriving one stream per
(round, client) keeps results independent of client order and worker count.
"""

from __future__ import annotations

import numpy as np

# Stream-id tags; the first element of a stream id after the round index.
CLIENT = 0
SERVER_NOISE = 1
SERVER_XI = 2
DATASET = 3
STUDY = 4


class DimensionError(ValueError):
    """Raised when two vectors (or a vector and a model) disagree on length."""


def as_vector(values, d: int | None = None) -> np.ndarray:
    """Return ``values`` as a finite float64 vector, optionally of length ``d``."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
    if d is not None and v.shape[0] != d:
        raise DimensionError(f"expected length {d}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite entries")
    return v


def _check_same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")


def dot(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_length(a, b)
    return float(np.dot(a, b))


def l2_norm(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    return float(np.sqrt(np.dot(a, a)))


def make_rng(seed: int, *stream_id: int) -> np.random.Generator:
    """Independent generator for ``(seed, stream_id)``.

    The stream id becomes the ``spawn_key`` of a :class:`numpy.random.SeedSequence`,
    so distinct ids give statistically independent streams and the same id
    always replays the same draws.
    """
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream_id))
    return np.random.Generator(np.random.PCG64(ss))


def sample_gaussian_vector(d: int, std: float, rng: np.random.Generator) -> np.ndarray:
    if std < 0:
        raise ValueError("std must be nonnegative")
    if std == 0:
        return np.zeros(d)
    return rng.normal(0.0, std, size=d)


def sample_unit_sphere(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the unit sphere in R^d (normalized Gaussian)."""
    if d < 1:
        raise ValueError("d must be positive")
    while True:
        g = rng.standard_normal(d)
        n = l2_norm(g)
        if n > 0:
            return g / n
