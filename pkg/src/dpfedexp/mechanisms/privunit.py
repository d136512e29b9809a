"""PrivUnit direction randomizer, ScalarDP magnitude randomizer, and the
server-side norm estimator that inverts their product.

A clipped update ``delta`` is released as ``c = r_hat * Z`` where ``r_hat`` is
a randomized-response-debiased lattice rounding of ``||delta||`` and ``Z`` is a
cap-or-complement direction scaled by ``1/m``. Because ``||Z|| = 1/m`` is a
constant and ``r_hat`` lives on the lattice ``{a (j - b)}``, the server can
recover ``r_hat`` from ``c`` exactly and form a conservative estimate of
``||delta||**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from ..core import l2_norm, sample_unit_sphere
from .special import log_incomplete_beta

_GAMMA_CAP = 1.0 - 1e-9
_LATTICE_TOL = 1e-6


class PrivUnitConfigError(ValueError):
    """The privacy budgets leave PrivUnit/ScalarDP ill-defined for this dimension."""


class NormRecoveryError(ValueError):
    """A released vector is not consistent with the PrivUnit/ScalarDP lattice."""


@dataclass(frozen=True)
class PrivUnitConfig:
    d: int
    eps0: float
    eps1: float
    eps2: float
    clip_C: float
    p: float
    gamma: float
    m: float
    k: int
    a: float
    b: float
    c1: float
    c2: float
    c3: float

    @property
    def alpha_beta(self) -> float:
        return (self.d - 1) / 2

    @property
    def tau_beta(self) -> float:
        return (1 + self.gamma) / 2

    @property
    def r_max(self) -> float:
        return self.clip_C

    @property
    def keep_prob(self) -> float:
        """Probability that randomized response keeps the lattice index."""
        return math.exp(self.eps2) / (math.exp(self.eps2) + self.k)


def _log_sub(x: float, y: float) -> float:
    # log(e^x - e^y) for x > y
    return x + math.log1p(-math.exp(y - x))


def privunit_scale(d: int, p: float, gamma: float) -> float:
    """The normalizer ``m = E<V, u>`` of the cap-or-complement direction, in log space."""
    alpha = (d - 1) / 2
    log_pref = alpha * math.log1p(-gamma * gamma) - (d - 2) * math.log(2.0) - math.log(d - 1)
    # B(alpha, alpha) - B(tau; alpha, alpha) equals B(1 - tau; alpha, alpha) by symmetry.
    log_upper = log_incomplete_beta((1 - gamma) / 2, alpha, alpha)
    log_lower = log_incomplete_beta((1 + gamma) / 2, alpha, alpha)
    t_cap = math.log(p) - log_upper
    t_rest = math.log1p(-p) - log_lower
    if not t_cap > t_rest:
        return 0.0
    return math.exp(log_pref + _log_sub(t_cap, t_rest))


def make_privunit_config(d: int, eps0: float, eps1: float, eps2: float, clip_C: float) -> PrivUnitConfig:
    """Derive every PrivUnit/ScalarDP/norm-estimation constant for one budget split.

    ``gamma`` is set to the largest value allowed by the first selection rule,
    ``tanh(eps1/2) * sqrt(pi / (2(d-1)))``. ``k = ceil(exp(eps2/3))``.

    Raises :class:`PrivUnitConfigError` when ``m`` is not a finite positive
    number, or when ``2b`` is (numerically) an integer, in which case the sign
    of ``r_hat`` cannot be recovered from ``||c||``.
    """
    if d < 2:
        raise PrivUnitConfigError("PrivUnit needs d >= 2")
    if not (eps0 > 0 and eps2 > 0):
        raise PrivUnitConfigError("eps0 and eps2 must be positive")
    if not 0 < eps1 <= d:
        raise PrivUnitConfigError(f"eps1 must lie in (0, d], got {eps1}")
    if not clip_C > 0:
        raise PrivUnitConfigError("clip_C must be positive")

    p = math.exp(eps0) / (1 + math.exp(eps0))
    gamma = min(math.tanh(eps1 / 2) * math.sqrt(math.pi / (2 * (d - 1))), _GAMMA_CAP)
    m = privunit_scale(d, p, gamma)
    if not (m > 0 and math.isfinite(m)):
        raise PrivUnitConfigError(f"PrivUnit scale m = {m} is not positive and finite (d={d}, eps0={eps0}, eps1={eps1})")

    e2 = math.exp(eps2)
    em1 = math.expm1(eps2)
    k = math.ceil(math.exp(eps2 / 3))
    a = ((e2 + k) / em1) * clip_C / k
    b = k * (k + 1) / (2 * (e2 + k))
    two_b = 2 * b
    if abs(two_b - round(two_b)) < 1e-9:
        raise PrivUnitConfigError(f"2b = k(k+1)/(e^eps2 + k) = {two_b} is an integer; ScalarDP sign recovery is ill-posed")

    c1 = (k + 1) / em1
    c2 = -c1 * clip_C
    c3 = (c1 + 1) * clip_C**2 / (4 * k * k) + c1 * clip_C**2 * (
        (2 * k + 1) * (e2 + k) / (6 * k * em1) - (k + 1) / (4 * em1)
    )
    return PrivUnitConfig(d, eps0, eps1, eps2, clip_C, p, gamma, m, k, a, b, c1, c2, c3)


def sample_cap_component(gamma: float, d: int, above: bool, rng: np.random.Generator) -> float:
    """Draw ``t = <V, u>`` for ``V`` uniform on the cap ``t >= gamma`` (or its complement).

    The marginal of ``t`` has density proportional to ``(1 - t^2)^((d-3)/2)``,
    i.e. ``(t + 1)/2 ~ Beta((d-1)/2, (d-1)/2)``. Each branch is sampled by
    inverse CDF through the lower tail of that Beta law.
    """
    alpha = (d - 1) / 2
    u = rng.random()
    if above:
        s_tail = sc.betaincinv(alpha, alpha, u * sc.betainc(alpha, alpha, (1 - gamma) / 2))
        return max(1.0 - 2.0 * s_tail, gamma)
    s = sc.betaincinv(alpha, alpha, u * sc.betainc(alpha, alpha, (1 + gamma) / 2))
    t = 2.0 * s - 1.0
    return t if t < gamma else float(np.nextafter(gamma, -np.inf))


def _orthogonal_unit(u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    while True:
        g = rng.standard_normal(u.shape[0])
        g -= np.dot(g, u) * u
        n = l2_norm(g)
        if n > 1e-12:
            return g / n


def _privunit_draw(u: np.ndarray, cfg: PrivUnitConfig, rng: np.random.Generator):
    in_cap = bool(rng.random() < cfg.p)
    t = sample_cap_component(cfg.gamma, cfg.d, in_cap, rng)
    v = t * u + math.sqrt(max(0.0, 1.0 - t * t)) * _orthogonal_unit(u, rng)
    return v / cfg.m, in_cap


def privunit(u, cfg: PrivUnitConfig, rng: np.random.Generator) -> np.ndarray:
    """Randomize the unit vector ``u``; the result has norm ``1/m`` and mean ``u``."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (cfg.d,):
        raise ValueError(f"expected a length-{cfg.d} vector, got shape {u.shape}")
    if abs(l2_norm(u) - 1.0) > 1e-9:
        raise ValueError("privunit expects a unit-norm input")
    return _privunit_draw(u, cfg, rng)[0]


def _round_index(r: float, cfg: PrivUnitConfig, rng: np.random.Generator) -> int:
    """Unbiased stochastic rounding of ``k r / r_max`` to an integer in ``0..k``."""
    # r / r_max <= 1 exactly for r <= r_max; k * r / r_max can round above k
    x = min(cfg.k * (r / cfg.r_max), float(cfg.k))
    lo = math.floor(x)
    hi = math.ceil(x)
    if lo == hi:
        return lo
    return lo if rng.random() < hi - x else hi


def _randomized_response(j: int, cfg: PrivUnitConfig, rng: np.random.Generator) -> int:
    """Keep ``j`` w.p. ``e^eps2 / (e^eps2 + k)``, else report one of the other ``k`` values uniformly."""
    if rng.random() < cfg.keep_prob:
        return j
    other = int(rng.integers(cfg.k))
    return other + 1 if other >= j else other


def _lattice_index(r: float, cfg: PrivUnitConfig, rng: np.random.Generator) -> int:
    return _randomized_response(_round_index(r, cfg, rng), cfg, rng)


def scalardp(r: float, cfg: PrivUnitConfig, rng: np.random.Generator) -> float:
    """Unbiased pure-DP release of a magnitude ``r`` in ``[0, r_max]``."""
    if not 0.0 <= r <= cfg.r_max:
        raise ValueError(f"scalardp input {r} outside [0, {cfg.r_max}]")
    return cfg.a * (_lattice_index(r, cfg, rng) - cfg.b)


def scalardp_support(cfg: PrivUnitConfig) -> np.ndarray:
    return cfg.a * (np.arange(cfg.k + 1) - cfg.b)


def _randomize(delta, cfg: PrivUnitConfig, rng: np.random.Generator):
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (cfg.d,):
        raise ValueError(f"expected a length-{cfg.d} vector, got shape {delta.shape}")
    r = l2_norm(delta)
    if r > cfg.clip_C + 1e-9:
        raise ValueError(f"update norm {r} exceeds the clipping threshold {cfg.clip_C}; clip first")
    r = min(r, cfg.clip_C)
    r_hat = scalardp(r, cfg, rng)
    u = delta / r if r > 0 else sample_unit_sphere(cfg.d, rng)
    z = privunit(u / l2_norm(u), cfg, rng)
    return r_hat * z, r_hat


def privunit_randomize(delta, cfg: PrivUnitConfig, rng: np.random.Generator) -> np.ndarray:
    """Release ``scalardp(||delta||) * privunit(delta / ||delta||)``.

    A zero update gets a uniformly random direction; ``r_hat`` at ``r = 0``
    has mean zero so the release stays unbiased.
    """
    return _randomize(delta, cfg, rng)[0]


def recover_scalar(c, cfg: PrivUnitConfig) -> float:
    """Recover the ScalarDP output embedded in a released vector ``c``.

    ``m ||c||`` gives ``|r_hat|``; the sign is the one that lands on the
    integer lattice ``r_hat / a + b``. The value is re-derived from the
    lattice index so it matches the released ``r_hat`` bit for bit.
    """
    r_tilde = cfg.m * l2_norm(c)
    for sign in (1.0, -1.0):
        j = sign * r_tilde / cfg.a + cfg.b
        jr = round(j)
        if abs(j - jr) <= _LATTICE_TOL and 0 <= jr <= cfg.k:
            return cfg.a * (jr - cfg.b)
    raise NormRecoveryError(f"||c|| = {l2_norm(c)} does not correspond to any ScalarDP lattice point")


def estimate_norm_squared(c, cfg: PrivUnitConfig) -> float:
    """Estimate ``||delta||**2`` with ``E[s_hat] <= ||delta||**2``. May be negative."""
    r_hat = recover_scalar(c, cfg)
    return (r_hat * r_hat - cfg.c2 * r_hat - cfg.c3) / (1 + cfg.c1)
