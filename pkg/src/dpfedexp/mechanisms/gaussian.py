"""Gaussian randomizers: per-client (local) noise and server-side (central) noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import sample_gaussian_vector


@dataclass(frozen=True)
class GaussianLocalConfig:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class CdpNoiseConfig:
    """``sigma`` sets the aggregate noise std ``sigma/sqrt(M)``; ``sigma_xi`` is the std of the scalar numerator noise."""

    sigma: float
    sigma_xi: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.sigma_xi > 0:
            raise ValueError("sigma_xi must be positive")


def default_sigma_xi(d: int, sigma: float, M: int) -> float:
    """``d sigma^2 / M``: matches the numerator bias to that of the aggregate noise."""
    return d * sigma * sigma / M


def gaussian_local_randomize(delta, cfg: GaussianLocalConfig, rng: np.random.Generator) -> np.ndarray:
    delta = np.asarray(delta, dtype=np.float64)
    return delta + sample_gaussian_vector(delta.shape[0], cfg.sigma, rng)


def central_gaussian_noise(d: int, cfg: CdpNoiseConfig, M: int, rng: np.random.Generator) -> np.ndarray:
    if M < 1:
        raise ValueError("M must be positive")
    return sample_gaussian_vector(d, cfg.sigma / math.sqrt(M), rng)


def sample_xi(cfg: CdpNoiseConfig, rng: np.random.Generator) -> float:
    return float(rng.normal(0.0, cfg.sigma_xi))
