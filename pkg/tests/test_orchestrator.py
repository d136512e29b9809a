import logging

import numpy as np
import pytest

from dpfedexp.accountant import cdp_rho, ldp_gaussian_rho
from dpfedexp.config import ClientSpec, ConfigError, DatasetSpec, ExperimentConfig, MechanismSpec, RunSpec, ServerSpec
from dpfedexp.core import make_rng
from dpfedexp.data import FederatedDataset, RegressionClient, generate_synthetic_regression, save_dataset
from dpfedexp.client import LocalTrainConfig
from dpfedexp.orchestrator import RoundFailure, build_dataset, run_experiment, step_size_study
from oracles import clean_fedexp_reference


def small(alg, *, M=40, d=12, T=5, seed=3, kind="regression", **kw):
    c = dict(tau=5, eta_l=0.003, clip_C=0.3)
    c.update(kw.pop("client", {}))
    return ExperimentConfig(
        dataset=DatasetSpec(kind=kind, M=M, d=d, K=3, samples_per_client=6),
        client=ClientSpec(**c),
        mechanism=MechanismSpec(**kw.pop("mechanism", {})),
        server=ServerSpec(algorithm=alg, **kw.pop("server", {})),
        run=RunSpec(T=T, seed=seed, **kw.pop("run", {})),
    )


def trajectory(cfg, workers=1):
    w, reports = run_experiment(cfg, workers=workers)
    return w, reports


@pytest.mark.parametrize("fedexp,fedavg", [
    ("ldp_fedexp_gaussian", "ldp_fedavg_gaussian"),
    ("ldp_fedexp_privunit", "ldp_fedavg_privunit"),
    ("cdp_fedexp", "cdp_fedavg"),
    ("fedexp_clean", "dp_fedavg"),
])
def test_fixed_one_reproduces_fedavg_bit_exactly(fedexp, fedavg):
    a = small(fedexp, server=dict(step_rule="fixed"))
    b = small(fedavg)
    wa, ra = trajectory(a)
    wb, rb = trajectory(b)
    assert wa.tobytes() == wb.tobytes()
    assert [r.dist_to_optimum for r in ra] == [r.dist_to_optimum for r in rb]
    assert all(r.eta_g == 1.0 for r in ra)


@pytest.mark.parametrize("alg,mech", [
    ("ldp_fedexp_gaussian", dict(sigma=1e-15)),
    ("cdp_fedexp", dict(sigma=1e-15, sigma_xi=1e-15)),
])
def test_zero_noise_matches_clamped_clean_fedexp(alg, mech):
    cfg = small(alg, mechanism=mech, run=dict(last_k_average=1))
    ds = build_dataset(cfg)
    X, y = ds.stacked()
    ref = clean_fedexp_reference(list(X), list(y), np.zeros(cfg.dataset.d), cfg.client.tau, cfg.client.eta_l, cfg.client.clip_C, 5)
    w, reports = run_experiment(cfg, ds)
    np.testing.assert_allclose(w, ref[-1], atol=1e-6, rtol=0)
    for r, wr in zip(reports, ref):
        assert r.dist_to_optimum == pytest.approx(np.linalg.norm(wr - ds.optimum), abs=1e-6)


def test_single_client_round_decreases_loss():
    x = np.array([0.6, -0.8, 0.5])
    w_star = np.array([1.0, 2.0, -1.0])
    ds = FederatedDataset([RegressionClient(x, float(x @ w_star))], 3, w_star)
    L = 2 * float(x @ x)
    for alg in ("dp_fedavg", "fedexp_clean"):
        cfg = ExperimentConfig(
            dataset=DatasetSpec(M=1, d=3), client=ClientSpec(tau=1, eta_l=0.5 / L, clip_C=100.0),
            server=ServerSpec(algorithm=alg), run=RunSpec(T=1, last_k_average=1),
        )
        w, reports = run_experiment(cfg, ds)
        assert ds.mean_loss(w) < ds.mean_loss(np.zeros(3))


def test_T_zero_rejected():
    with pytest.raises(ConfigError):
        small("dp_fedavg", T=0)


@pytest.mark.parametrize("alg", ["ldp_fedexp_gaussian", "ldp_fedexp_privunit", "cdp_fedexp", "fedexp_clean"])
def test_same_seed_same_reports(alg):
    cfg = small(alg)
    a, ra = trajectory(cfg)
    b, rb = trajectory(cfg)
    assert a.tobytes() == b.tobytes() and ra == rb
    c, rc = trajectory(small(alg, seed=4))
    assert rc != ra


@pytest.mark.parametrize("alg,kind", [
    ("ldp_fedexp_gaussian", "regression"),
    ("ldp_fedexp_privunit", "regression"),
    ("cdp_fedexp", "regression"),
    ("ldp_fedexp_gaussian", "classification"),
])
def test_parallel_equals_sequential(alg, kind):
    cfg = small(alg, kind=kind, M=37, d=6, T=3)
    w1, r1 = trajectory(cfg, workers=1)
    for workers in (2, 5, 16):
        w, r = trajectory(cfg, workers=workers)
        assert w.tobytes() == w1.tobytes() and r == r1


def test_ledger_consistency():
    cfg = small("cdp_fedexp", T=4)
    _, reports = run_experiment(cfg)
    rho, rho_xi = cdp_rho(cfg.client.clip_C, cfg.resolved_sigma(), cfg.resolved_sigma_xi(), cfg.dataset.M, 4)
    assert (reports[-1].privacy.rho, reports[-1].privacy.rho_xi) == (rho, rho_xi)
    cfg = small("ldp_fedexp_gaussian", T=4)
    _, reports = run_experiment(cfg)
    assert reports[-1].privacy.per_round_rho == ldp_gaussian_rho(0.3, 0.21)
    assert reports[-1].privacy.rho_total == pytest.approx(4 * ldp_gaussian_rho(0.3, 0.21))
    assert [r.round for r in reports] == [1, 2, 3, 4]


def test_corrected_rules_clamped_and_reports_complete():
    for alg in ("ldp_fedexp_gaussian", "ldp_fedexp_privunit", "cdp_fedexp"):
        _, reports = run_experiment(small(alg))
        assert all(r.eta_g >= 1 for r in reports)
        assert all(r.dist_to_optimum is not None and r.eta_target is not None for r in reports)
    _, reports = run_experiment(small("ldp_fedexp_gaussian", kind="classification"))
    assert all(r.dist_to_optimum is None for r in reports)
    _, reports = run_experiment(small("ldp_fedexp_gaussian", run=dict(record_eta_target=False)))
    assert all(r.eta_target is None for r in reports)


def test_final_model_is_average_of_last_iterates():
    cfg = small("ldp_fedexp_gaussian", run=dict(last_k_average=2))
    w, reports = run_experiment(cfg)
    assert reports[-1].avg_dist_to_optimum == pytest.approx(np.linalg.norm(w - build_dataset(cfg).optimum), rel=1e-14)


def test_degenerate_round_falls_back(caplog):
    # all clients already at the optimum: every update is zero
    xs = make_rng(1).normal(size=(5, 4))
    ds = FederatedDataset([RegressionClient(x, 0.0) for x in xs], 4, np.zeros(4))
    cfg = ExperimentConfig(dataset=DatasetSpec(M=5, d=4), server=ServerSpec(algorithm="fedexp_clean"), run=RunSpec(T=2))
    with caplog.at_level(logging.WARNING):
        w, reports = run_experiment(cfg, ds)
    assert [r.eta_g for r in reports] == [1.0, 1.0]
    assert "falling back" in caplog.text


def test_divergence_aborts_with_round_index():
    cfg = small("ldp_fedavg_gaussian", client=dict(eta_l=100.0, tau=400))
    with pytest.raises(RoundFailure) as info:
        run_experiment(cfg)
    assert info.value.round_index == 1


def test_dataset_file(tmp_path):
    ds = generate_synthetic_regression(8, 5, make_rng(2))
    save_dataset(ds, tmp_path / "ds.json")
    cfg = ExperimentConfig(dataset=DatasetSpec(M=8, d=5, path=str(tmp_path / "ds.json")), run=RunSpec(T=2))
    _, r_file = run_experiment(cfg)
    _, r_mem = run_experiment(cfg, ds)
    assert r_file == r_mem
    with pytest.raises(ValueError):
        build_dataset(ExperimentConfig(dataset=DatasetSpec(M=9, d=5, path=str(tmp_path / "ds.json"))))


def test_step_size_study_rows():
    ds = generate_synthetic_regression(1000, 100, make_rng(0))
    local = LocalTrainConfig(20, 0.003, 0.3)
    rows = step_size_study(ds, [10, 100, 1000], local, 0.21, reps=3, seed=1)
    by_rule = {}
    for r in rows:
        by_rule.setdefault(r.rule, []).append(r)
    assert set(by_rule) == {"naive_noisy", "ldp_gaussian_corrected", "ldp_privunit"}
    assert all(len(v) == 3 for v in by_rule.values())
    for naive, corr in zip(by_rule["naive_noisy"], by_rule["ldp_gaussian_corrected"]):
        assert naive.mean > naive.eta_target and naive.mean > corr.mean
    with pytest.raises(ValueError):
        step_size_study(ds, [2000], local, 0.21)


def test_naive_numerator_inflation_arithmetic():
    # (1/M) sum ||Delta||^2 = 1 and d sigma^2 = 100: the naive numerator averages about 101
    rng = make_rng(5)
    d, M, N = 100, 50, 400
    deltas = rng.normal(size=(M, d))
    deltas /= np.linalg.norm(deltas, axis=1, keepdims=True)
    naive, corrected = [], []
    for _ in range(N):
        c = deltas + rng.standard_normal((M, d))
        s = float(np.mean(np.sum(c**2, axis=1)))
        naive.append(s)
        corrected.append(s - d)
    assert np.mean(naive) == pytest.approx(101, rel=0.01)
    assert np.mean(corrected) == pytest.approx(1, abs=0.15)


@pytest.mark.slow
def test_synthetic_cdp_configuration_makes_progress():
    cfg = ExperimentConfig(
        dataset=DatasetSpec(M=1000, d=500), client=ClientSpec(tau=20, eta_l=0.001, clip_C=0.3),
        server=ServerSpec(algorithm="cdp_fedexp"), run=RunSpec(T=50, seed=0),
    )
    ds = build_dataset(cfg)
    w, reports = run_experiment(cfg, ds)
    assert len(reports) == 50
    final, initial = float(np.linalg.norm(w - ds.optimum)), float(np.linalg.norm(ds.optimum))
    assert final < initial, f"final distance {final:.4f} vs initial {initial:.4f}"
