"""Client-side work: deterministic local gradient descent and norm clipping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionError
from .data import RegressionClient, rowdot


class DivergenceError(RuntimeError):
    """A local step produced a non-finite gradient."""

    def __init__(self, client: int | None, step: int):
        self.client = client
        self.step = step
        who = "client" if client is None else f"client {client}"
        super().__init__(f"non-finite gradient on {who} at local step {step}")


@dataclass(frozen=True)
class LocalTrainConfig:
    tau: int
    eta_l: float
    clip_C: float

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if not self.eta_l > 0:
            raise ValueError("eta_l must be positive")
        if not self.clip_C > 0:
            raise ValueError("clip_C must be positive")


def clip(delta: np.ndarray, C: float) -> np.ndarray:
    """Scale ``delta`` onto the ball of radius ``C``; returns the input when already inside."""
    delta = np.asarray(delta, dtype=np.float64)
    return clip_rows(delta[None, :], C)[0]


def clip_rows(D: np.ndarray, C: float) -> np.ndarray:
    """Row-wise :func:`clip` for a stack of updates."""
    if not C > 0:
        raise ValueError("C must be positive")
    norms = np.sqrt(rowdot(D, D))
    out = D.copy()
    big = norms > C
    out[big] *= (C / norms[big])[:, None]
    return out


def local_update_rows(
    w_global: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    cfg: LocalTrainConfig,
    client_ids=None,
) -> np.ndarray:
    """Unclipped updates of many regression clients at once, one row each.

    Each row evolves independently, so a client's result does not depend on
    which other clients share the batch.
    """
    W = np.array(np.broadcast_to(w_global, X.shape), dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, cfg.tau + 1):
            r = rowdot(X, W) - y
            G = (2.0 * r)[:, None] * X
            bad = ~np.isfinite(G).all(axis=1)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise DivergenceError(None if client_ids is None else list(client_ids)[i], k)
            W -= cfg.eta_l * G
    return W - w_global


def local_update(w_global: np.ndarray, client, cfg: LocalTrainConfig, client_id: int | None = None) -> np.ndarray:
    """``tau`` full-gradient steps from ``w_global``; returns ``w_tau - w_global``."""
    w_global = np.asarray(w_global, dtype=np.float64)
    if w_global.shape != (client.dim,):
        raise DimensionError(f"model length {w_global.shape} does not match client dimension {client.dim}")
    if isinstance(client, RegressionClient):
        return local_update_rows(w_global, client.x[None, :], np.array([client.y]), cfg, [client_id])[0]
    w = w_global.copy()
    for k in range(1, cfg.tau + 1):
        g = client.gradient(w)
        if not np.all(np.isfinite(g)):
            raise DivergenceError(client_id, k)
        w -= cfg.eta_l * g
    return w - w_global
