import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpfedexp.core import make_rng
from dpfedexp.server import (
    CLAMPED,
    DegenerateRoundError,
    StepSizeRule,
    aggregate_mean,
    apply_global_update,
    average_last_k,
    step_size,
    target_step_size,
)
from oracles import loop_mean

R = StepSizeRule


def test_aggregate_examples():
    np.testing.assert_array_equal(aggregate_mean([[1, 0], [0, 1]]), [0.5, 0.5])
    v = np.array([0.1, -3.0, 7.0])
    np.testing.assert_allclose(aggregate_mean([v] * 9), v, rtol=1e-15)
    U = make_rng(0).normal(size=(13, 7))
    np.testing.assert_allclose(aggregate_mean(U), loop_mean(U), rtol=1e-13)
    with pytest.raises(ValueError):
        aggregate_mean([])


def test_corrected_rule_examples():
    assert step_size(R("ldp_gaussian_corrected"), 2.0, noisy_updates_sq_mean=1.5, d=1, sigma=0.0) == 1.0
    assert step_size(R("ldp_gaussian_corrected"), 0.5, noisy_updates_sq_mean=5.0, d=3, sigma=1.0) == pytest.approx(4.0)
    # sigma = 0 reduces to max(1, clean ratio)
    clean = 3.0
    for den in (0.5, 2.0, 10.0):
        expected = max(1.0, step_size(R("fedexp_clean"), den, clean_sq_mean=clean))
        assert step_size(R("ldp_gaussian_corrected"), den, noisy_updates_sq_mean=clean, d=50, sigma=0.0) == pytest.approx(expected, rel=1e-12)
        assert step_size(R("cdp_corrected"), den, xi_noised_clean_sq_mean=clean) == pytest.approx(expected, rel=1e-12)


def test_other_rules():
    assert step_size(R.fixed(2.5), 123.0) == 2.5
    assert step_size(R("naive_noisy"), 0.5, noisy_updates_sq_mean=0.2) == pytest.approx(0.4)
    assert step_size(R("ldp_privunit"), 0.5, privunit_s_mean=-3.0) == 1.0
    assert step_size(R("fedexp_clean", epsilon_fedexp=1.0), 1.0, clean_sq_mean=3.0) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        step_size(R("ldp_privunit"), 1.0, noisy_updates_sq_mean=1.0)
    with pytest.raises(ValueError):
        R("unknown")
    with pytest.raises(ValueError):
        R.fixed(0.0)


def test_degenerate_denominator():
    with pytest.raises(DegenerateRoundError):
        step_size(R("fedexp_clean"), 0.0, clean_sq_mean=1.0)
    assert target_step_size(1.0, 0.0) is None


reals = st.floats(-1e6, 1e6, allow_nan=False)
pos = st.floats(1e-9, 1e6)


@settings(max_examples=500, deadline=None)
@given(reals, pos, st.integers(1, 10**4), st.floats(0, 10))
def test_clamp_invariance(num, den, d, sigma):
    stats = dict(noisy_updates_sq_mean=num, d=d, sigma=sigma, privunit_s_mean=num, xi_noised_clean_sq_mean=num)
    for v in CLAMPED:
        assert step_size(R(v), den, **stats) >= 1.0


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 2**31))
def test_scale_invariance(lam, seed):
    rng = make_rng(seed)
    deltas = rng.normal(size=(20, 6))
    noise = rng.normal(size=(20, 6)) * 0.3
    def ratio(s):
        D, Cn = s * deltas, s * (deltas + noise)
        clean = float(np.mean(np.sum(D**2, axis=1)))
        cb = Cn.mean(axis=0)
        return target_step_size(clean, float(cb @ cb))
    assert ratio(lam) == pytest.approx(ratio(1.0), rel=1e-10)


def test_gaussian_numerator_unbiased():
    rng = make_rng(1)
    d, M, sigma, N = 30, 10, 0.5, 4000
    deltas = rng.normal(size=(M, d)) * 0.2
    clean = float(np.mean(np.sum(deltas**2, axis=1)))
    est = []
    for _ in range(N):
        c = deltas + sigma * rng.standard_normal((M, d))
        est.append(float(np.mean(np.sum(c**2, axis=1))) - d * sigma**2)
    est = np.array(est)
    assert abs(est.mean() - clean) <= 4 * est.std() / np.sqrt(N)


def test_global_update_examples():
    np.testing.assert_array_equal(apply_global_update([1, 1], [-0.5, 0], 2.0), [0, 1])
    w = np.array([0.3, -0.2])
    np.testing.assert_array_equal(apply_global_update(w, [5, 5], 0.0), w)
    np.testing.assert_array_equal(apply_global_update(w, [1, 2], 1.0), w + np.array([1, 2]))


def test_average_last_k():
    its = [np.array([0.0, 0.0]), np.array([2.0, 2.0])]
    np.testing.assert_array_equal(average_last_k(its, 1), its[-1])
    np.testing.assert_array_equal(average_last_k(its, 2), [1, 1])
    many = list(make_rng(2).normal(size=(9, 4)))
    np.testing.assert_allclose(average_last_k(many, 9), loop_mean(many), rtol=1e-14)
    with pytest.raises(ValueError):
        average_last_k(its, 3)
