"""Privacy accounting.

Gaussian mechanisms are tracked by their linear RDP curve ``eps(alpha) =
alpha * rho`` and converted to ``(eps, delta)`` with the standard bound
``alpha * rho + log(1/delta) / (alpha - 1)`` minimized over ``alpha``.
PrivUnit releases are pure DP with budget ``eps0 + eps1 + eps2``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

REGIMES = ("none", "ldp-gaussian", "ldp-privunit", "cdp")
DEFAULT_DELTA = 1e-5


def ldp_gaussian_rho(C: float, sigma: float) -> float:
    """Per-release RDP rate ``2 C^2 / sigma^2`` (replace-one sensitivity ``2C``)."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return 2.0 * C * C / (sigma * sigma)


def cdp_rho(C: float, sigma: float, sigma_xi: float, M: int, T: int) -> tuple[float, float]:
    """``(rho, rho_xi)`` for ``T`` rounds of the noisy aggregate and noisy step-size numerator."""
    if not (C > 0 and sigma > 0 and sigma_xi > 0 and M >= 1 and T >= 1):
        raise ValueError("C, sigma, sigma_xi must be positive and M, T >= 1")
    rho = 2.0 * C * C * T / (M * sigma * sigma)
    rho_xi = C**4 * T / (2.0 * M * M * sigma_xi * sigma_xi)
    return rho, rho_xi


def optimal_order(rho_total: float, delta: float) -> float:
    return 1.0 + math.sqrt(math.log(1.0 / delta) / rho_total)


def rdp_to_dp(rho_total: float, delta: float = DEFAULT_DELTA) -> float:
    """``min_alpha alpha*rho + log(1/delta)/(alpha-1) = rho + 2 sqrt(rho log(1/delta))``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if rho_total < 0:
        raise ValueError("rho_total must be nonnegative")
    if rho_total == 0:
        return 0.0
    return rho_total + 2.0 * math.sqrt(rho_total * math.log(1.0 / delta))


def rdp_to_dp_grid(rho_total: float, delta: float, alphas=None, refine: bool = True) -> float:
    """Grid minimization of the conversion bound; a cross-check for :func:`rdp_to_dp`.

    The default grid is ``alpha = 1.001, 1.002, ..., 200``. With ``refine`` the
    two cells around the coarse minimum are searched again at step ``1e-7``;
    at large ``rho`` the minimum is sharp enough that the coarse step alone
    misses it by up to ``1e-3``.
    """
    if alphas is None:
        alphas = np.arange(1.001, 200.0 + 1e-12, 1e-3)
    alphas = np.asarray(alphas, dtype=np.float64)
    L = math.log(1.0 / delta)

    def bound(a):
        return a * rho_total + L / (a - 1.0)

    vals = bound(alphas)
    i = int(np.argmin(vals))
    best = float(vals[i])
    if refine and alphas.size > 1:
        lo = alphas[max(i - 1, 0)]
        hi = alphas[min(i + 1, alphas.size - 1)]
        fine = np.linspace(lo, hi, int(round((hi - lo) / 1e-7)) + 1)
        best = min(best, float(np.min(bound(fine))))
    return best


def privunit_pure_eps(eps0: float, eps1: float, eps2: float) -> float:
    if min(eps0, eps1, eps2) <= 0:
        raise ValueError("budgets must be positive")
    return eps0 + eps1 + eps2


@dataclass(frozen=True)
class PrivacyLedger:
    """Privacy spent after ``rounds_composed`` rounds.

    For the LDP regimes the per-release figure (``per_round_eps``) is the
    guarantee each client gets from one round; ``eps`` composes it over the
    rounds run so far. For CDP, ``rho`` and ``rho_xi`` are already composed.
    """

    regime: str = "none"
    rho: float = 0.0
    rho_xi: float = 0.0
    pure_eps: float = 0.0
    rounds_composed: int = 0
    delta: float = DEFAULT_DELTA
    per_round_rho: float = 0.0
    per_round_eps: float = 0.0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if min(self.rho, self.rho_xi, self.pure_eps) < 0:
            raise ValueError("privacy rates must be nonnegative")
        if self.pure_eps and self.regime != "ldp-privunit":
            raise ValueError("pure_eps is only meaningful for the PrivUnit regime")

    @property
    def rho_total(self) -> float:
        return self.rho + self.rho_xi

    @property
    def eps(self) -> float | None:
        """Composed epsilon; ``None`` for a non-private run."""
        if self.regime == "none":
            return None
        if self.regime == "ldp-privunit":
            return self.pure_eps
        return rdp_to_dp(self.rho_total, self.delta)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["eps"] = self.eps
        return out


def ledger_after(
    regime: str,
    rounds: int,
    *,
    C: float | None = None,
    sigma: float | None = None,
    sigma_xi: float | None = None,
    M: int | None = None,
    eps_split: tuple[float, float, float] | None = None,
    delta: float = DEFAULT_DELTA,
) -> PrivacyLedger:
    """Closed-form ledger after ``rounds`` rounds of a given regime."""
    if regime == "none" or rounds == 0:
        return PrivacyLedger(regime=regime, rounds_composed=rounds, delta=delta)
    if regime == "ldp-gaussian":
        r1 = ldp_gaussian_rho(C, sigma)
        return PrivacyLedger(
            regime, rho=rounds * r1, rounds_composed=rounds, delta=delta,
            per_round_rho=r1, per_round_eps=rdp_to_dp(r1, delta),
        )
    if regime == "ldp-privunit":
        e1 = privunit_pure_eps(*eps_split)
        return PrivacyLedger(regime, pure_eps=rounds * e1, rounds_composed=rounds, delta=delta, per_round_eps=e1)
    if regime == "cdp":
        # sigma_xi=None: the step-size numerator is never released (fixed rule)
        rho, rho_xi = cdp_rho(C, sigma, sigma_xi or 1.0, M, rounds)
        r1, x1 = cdp_rho(C, sigma, sigma_xi or 1.0, M, 1)
        if sigma_xi is None:
            rho_xi = x1 = 0.0
        return PrivacyLedger(
            regime, rho=rho, rho_xi=rho_xi, rounds_composed=rounds, delta=delta,
            per_round_rho=r1 + x1, per_round_eps=rdp_to_dp(r1 + x1, delta),
        )
    raise ValueError(f"unknown regime {regime!r}")
