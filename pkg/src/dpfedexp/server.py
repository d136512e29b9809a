"""Server-side aggregation and global step-size rules.

The rules differ only in the numerator they put over ``||c_bar||^2``:

==========================  ==================================================  =====
rule                        numerator                                           clamp
==========================  ==================================================  =====
``fixed``                   (constant ``eta_g``)                                --
``fedexp_clean``            mean of clean ``||Delta_i||^2``                     none
``naive_noisy``             mean of noisy ``||c_i||^2``                         none
``ldp_gaussian_corrected``  mean of ``||c_i||^2`` minus ``d sigma^2``           >= 1
``ldp_privunit``            mean of the PrivUnit norm estimates ``s_hat_i``     >= 1
``cdp_corrected``           mean of clean ``||Delta_i||^2`` plus scalar noise   >= 1
==========================  ==================================================  =====
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionError

VARIANTS = (
    "fixed",
    "fedexp_clean",
    "naive_noisy",
    "ldp_gaussian_corrected",
    "ldp_privunit",
    "cdp_corrected",
)
CLAMPED = frozenset({"ldp_gaussian_corrected", "ldp_privunit", "cdp_corrected"})


class DegenerateRoundError(ArithmeticError):
    """``||c_bar||^2 = 0`` under a ratio rule."""


@dataclass(frozen=True)
class StepSizeRule:
    variant: str
    eta_g: float = 1.0
    epsilon_fedexp: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown step-size rule {self.variant!r}; expected one of {VARIANTS}")
        if self.variant == "fixed" and not self.eta_g > 0:
            raise ValueError("fixed step size must be positive")
        if self.epsilon_fedexp < 0:
            raise ValueError("epsilon_fedexp must be nonnegative")

    @classmethod
    def fixed(cls, eta_g: float = 1.0) -> "StepSizeRule":
        return cls("fixed", eta_g=eta_g)


@dataclass(frozen=True)
class AggregateResult:
    c_bar: np.ndarray
    sum_sq_clean: float | None
    sum_sq_estimated: float | None
    eta_g: float
    eta_target: float | None


def aggregate_mean(updates) -> np.ndarray:
    if len(updates) == 0:
        raise ValueError("cannot aggregate an empty list of updates")
    U = np.asarray(updates, dtype=np.float64)
    if U.ndim != 2:
        raise DimensionError("updates must share one length")
    return U.mean(axis=0)


def numerator(
    rule: StepSizeRule,
    *,
    noisy_updates_sq_mean: float | None = None,
    d: int | None = None,
    sigma: float | None = None,
    privunit_s_mean: float | None = None,
    xi_noised_clean_sq_mean: float | None = None,
    clean_sq_mean: float | None = None,
) -> float:
    """The step-size numerator ``rule`` reads from the server-visible statistics."""
    v = rule.variant
    if v == "fedexp_clean":
        return _need(clean_sq_mean, "clean_sq_mean", v)
    if v == "naive_noisy":
        return _need(noisy_updates_sq_mean, "noisy_updates_sq_mean", v)
    if v == "ldp_gaussian_corrected":
        return _need(noisy_updates_sq_mean, "noisy_updates_sq_mean", v) - _need(d, "d", v) * _need(sigma, "sigma", v) ** 2
    if v == "ldp_privunit":
        return _need(privunit_s_mean, "privunit_s_mean", v)
    if v == "cdp_corrected":
        return _need(xi_noised_clean_sq_mean, "xi_noised_clean_sq_mean", v)
    raise ValueError(f"rule {v!r} has no numerator")


def _need(x, name, variant):
    if x is None:
        raise ValueError(f"rule {variant!r} needs {name}")
    return x


def step_size(rule: StepSizeRule, c_bar_norm_sq: float, **stats) -> float:
    """Global step size for one round.

    ``stats`` are the keyword arguments of :func:`numerator`; each rule reads
    only the one it needs. Raises :class:`DegenerateRoundError` when a ratio
    rule meets ``c_bar_norm_sq == 0``.
    """
    if rule.variant == "fixed":
        return rule.eta_g
    num = numerator(rule, **stats)
    den = c_bar_norm_sq + (rule.epsilon_fedexp if rule.variant == "fedexp_clean" else 0.0)
    if den <= 0:
        raise DegenerateRoundError(f"||c_bar||^2 = {c_bar_norm_sq} under rule {rule.variant!r}")
    eta = num / den
    if rule.variant in CLAMPED:
        eta = max(1.0, eta)
    if not np.isfinite(eta):
        raise DegenerateRoundError(f"non-finite step size {eta} under rule {rule.variant!r}")
    return float(eta)


def target_step_size(clean_sq_mean: float, c_bar_norm_sq: float) -> float | None:
    """Diagnostic ``eta_target``: clean numerator over the released ``||c_bar||^2``.

    Requires clean updates, so only a simulator can evaluate it.
    """
    if c_bar_norm_sq <= 0:
        return None
    return clean_sq_mean / c_bar_norm_sq


def apply_global_update(w: np.ndarray, c_bar: np.ndarray, eta_g: float) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    c_bar = np.asarray(c_bar, dtype=np.float64)
    if w.shape != c_bar.shape:
        raise DimensionError(f"length mismatch: {w.shape} vs {c_bar.shape}")
    return w + eta_g * c_bar


def average_last_k(iterates, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be positive")
    if k > len(iterates):
        raise ValueError(f"cannot average the last {k} of {len(iterates)} iterates")
    return np.mean(np.asarray(iterates[-k:], dtype=np.float64), axis=0)
