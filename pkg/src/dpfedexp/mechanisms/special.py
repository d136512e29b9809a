"""Beta-function numerics in log space.

``incomplete_beta`` is the *unregularized* ``B(x; a, b)``. For the parameter
sizes PrivUnit needs (``a = b = (d-1)/2`` with ``d`` in the thousands) the
value itself under- or overflows, so the working routine is
:func:`log_incomplete_beta`; the plain versions are thin ``exp`` wrappers.
"""

from __future__ import annotations

import math

_EPS = 1e-16
_FPMIN = 1e-300
_MAXIT = 100_000


def _check_ab(a: float, b: float) -> None:
    if not (a > 0 and b > 0) or math.isinf(a) or math.isinf(b):
        raise ValueError(f"beta parameters must be positive and finite, got a={a}, b={b}")


_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# Stirling-series coefficients of log Gamma(x) - [(x - 1/2) log x - x + log sqrt(2 pi)].
_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360, 1 / 156)


def _lgamma_correction(x: float) -> float:
    # Valid (to double precision) for x >= 10.
    inv = 1.0 / x
    inv2 = inv * inv
    acc = 0.0
    for c in reversed(_STIRLING):
        acc = acc * inv2 + c
    return acc * inv


def log_beta(a: float, b: float) -> float:
    """``log B(a, b)``, avoiding the cancellation in ``lgamma(a) + lgamma(b) - lgamma(a + b)``."""
    _check_ab(a, b)
    p, q = min(a, b), max(a, b)
    if p >= 10.0:
        corr = _lgamma_correction(p) + _lgamma_correction(q) - _lgamma_correction(p + q)
        return (
            -0.5 * math.log(q)
            + _LN_SQRT_2PI
            + corr
            + (p - 0.5) * math.log(p / (p + q))
            + q * math.log1p(-p / (p + q))
        )
    if q >= 10.0:
        corr = _lgamma_correction(q) - _lgamma_correction(p + q)
        return math.lgamma(p) + corr + p - p * math.log(p + q) + (q - 0.5) * math.log1p(-p / (p + q))
    return math.lgamma(p) + math.lgamma(q) - math.lgamma(p + q)


def _betacf(x: float, a: float, b: float) -> float:
    # Modified Lentz evaluation of the continued fraction for I_x(a, b).
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")


def _log_lower(x: float, a: float, b: float) -> float:
    # log B(x; a, b) from the continued fraction; accurate for x < (a+1)/(a+b+2).
    return a * math.log(x) + b * math.log1p(-x) - math.log(a) + math.log(_betacf(x, a, b))


def log_incomplete_beta(x: float, a: float, b: float) -> float:
    """``log B(x; a, b)``; ``-inf`` at ``x = 0``."""
    _check_ab(a, b)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return -math.inf
    lb = log_beta(a, b)
    if x == 1.0:
        return lb
    if x < (a + 1.0) / (a + b + 2.0):
        return _log_lower(x, a, b)
    # B(x; a, b) = B(a, b) - B(1 - x; b, a)
    tail = _log_lower(1.0 - x, b, a)
    return lb + math.log1p(-math.exp(tail - lb))


def incomplete_beta(x: float, a: float, b: float) -> float:
    return math.exp(log_incomplete_beta(x, a, b))


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """``I_x(a, b) = B(x; a, b) / B(a, b)``."""
    return math.exp(log_incomplete_beta(x, a, b) - log_beta(a, b))
