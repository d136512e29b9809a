"""Training loops for local-DP and central-DP FedAvg/FedEXP, plus the
initialization step-size study.

All clients take part in every round. Metrics (loss, distance to the
optimum, ``eta_target``) are computed from clean simulator state; they are
telemetry for the experimenter and are never charged to the privacy budget.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import accountant
from .client import DivergenceError, LocalTrainConfig, clip, clip_rows, local_update, local_update_rows
from .config import ExperimentConfig
from .core import CLIENT, DATASET, SERVER_NOISE, SERVER_XI, STUDY, l2_norm, make_rng
from .data import FederatedDataset, generate_synthetic_classification, generate_synthetic_regression, load_dataset, rowdot
from .mechanisms import (
    CdpNoiseConfig,
    GaussianLocalConfig,
    central_gaussian_noise,
    gaussian_local_randomize,
    make_privunit_config,
)
from .mechanisms.privunit import _randomize as _privunit_randomize
from .mechanisms.privunit import estimate_norm_squared
from .mechanisms.gaussian import sample_xi
from .server import (
    DegenerateRoundError,
    StepSizeRule,
    aggregate_mean,
    apply_global_update,
    average_last_k,
    step_size,
    target_step_size,
)

log = logging.getLogger(__name__)

_REGIME = {"none": "none", "gaussian": "ldp-gaussian", "privunit": "ldp-privunit", "cdp": "cdp"}


class RoundFailure(RuntimeError):
    """A round aborted; wraps the underlying error with the round index."""

    def __init__(self, round_index: int, cause: Exception):
        self.round_index = round_index
        self.cause = cause
        super().__init__(f"round {round_index}: {cause}")


@dataclass(frozen=True)
class RoundReport:
    round: int
    eta_g: float
    eta_target: float | None
    c_bar_norm: float
    train_loss: float
    dist_to_optimum: float | None
    privacy: accountant.PrivacyLedger
    avg_train_loss: float
    avg_dist_to_optimum: float | None


@dataclass
class RunState:
    w: np.ndarray
    t: int = 0
    iterates: list = field(default_factory=list)


@dataclass(frozen=True)
class Setup:
    """Everything a round needs besides the model: config, data, derived mechanism."""

    config: ExperimentConfig
    dataset: FederatedDataset
    rule: StepSizeRule
    mechanism: object
    sigma: float | None
    workers: int = 1


def build_dataset(config: ExperimentConfig) -> FederatedDataset:
    dspec = config.dataset
    if dspec.path:
        ds = load_dataset(dspec.path)
        if ds.M != dspec.M or ds.d != dspec.d:
            raise ValueError(f"dataset file has M={ds.M}, d={ds.d}; config says M={dspec.M}, d={dspec.d}")
        return ds
    rng = make_rng(config.run.seed, 0, DATASET)
    if dspec.kind == "regression":
        return generate_synthetic_regression(dspec.M, dspec.d, rng)
    return generate_synthetic_classification(dspec.M, dspec.d, dspec.K, dspec.samples_per_client, dspec.dirichlet_alpha, rng)


def prepare(config: ExperimentConfig, dataset: FederatedDataset | None = None, workers: int = 1) -> Setup:
    dataset = dataset if dataset is not None else build_dataset(config)
    if dataset.M != config.dataset.M:
        raise ValueError(f"dataset has {dataset.M} clients, config expects {config.dataset.M}")
    kind = config.mechanism_kind
    d = dataset.model_dim
    mech = config.mechanism
    sigma = config.resolved_sigma()
    if kind == "gaussian":
        mechanism = GaussianLocalConfig(sigma)
    elif kind == "privunit":
        mechanism = make_privunit_config(d, mech.eps0, mech.eps1, mech.eps2, config.client.clip_C)
    elif kind == "cdp":
        mechanism = CdpNoiseConfig(sigma, config.resolved_sigma_xi())
    else:
        mechanism = None
    rule = StepSizeRule(config.rule_variant, eta_g=config.server.eta_g, epsilon_fedexp=config.server.epsilon_fedexp)
    return Setup(config, dataset, rule, mechanism, sigma, max(1, int(workers)))


def initial_state(setup: Setup) -> RunState:
    w0 = np.zeros(setup.dataset.model_dim)
    return RunState(w0, 0, [w0])


# ---------------------------------------------------------------- client phase


def _client_chunk(setup: Setup, w: np.ndarray, t: int, lo: int, hi: int):
    """Local update, clipping and (LDP) randomization for clients ``lo..hi-1``."""
    cfg = setup.config
    local = cfg.local
    ds = setup.dataset
    if ds.is_regression:
        X, y = ds._cached_stack()
        deltas = clip_rows(local_update_rows(w, X[lo:hi], y[lo:hi], local, range(lo, hi)), local.clip_C)
    else:
        deltas = np.stack([clip(local_update(w, ds.clients[i], local, i), local.clip_C) for i in range(lo, hi)])
    kind = cfg.mechanism_kind
    if kind not in ("gaussian", "privunit"):
        return deltas, None, None
    released = np.empty_like(deltas)
    s_hat = np.empty(hi - lo) if kind == "privunit" else None
    for j, i in enumerate(range(lo, hi)):
        rng = make_rng(cfg.run.seed, t, CLIENT, i)
        if kind == "gaussian":
            released[j] = gaussian_local_randomize(deltas[j], setup.mechanism, rng)
        else:
            released[j] = _privunit_randomize(deltas[j], setup.mechanism, rng)[0]
            s_hat[j] = estimate_norm_squared(released[j], setup.mechanism)
    return deltas, released, s_hat


def _chunks(M: int, workers: int):
    n = min(M, workers * 4) if workers > 1 else 1
    edges = np.linspace(0, M, n + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _client_phase(setup: Setup, w: np.ndarray, t: int):
    parts = _chunks(setup.dataset.M, setup.workers)
    if setup.workers == 1:
        results = [_client_chunk(setup, w, t, lo, hi) for lo, hi in parts]
    else:
        with ThreadPoolExecutor(max_workers=setup.workers) as pool:
            results = list(pool.map(lambda p: _client_chunk(setup, w, t, *p), parts))
    deltas = np.concatenate([r[0] for r in results])
    released = None if results[0][1] is None else np.concatenate([r[1] for r in results])
    s_hat = None if results[0][2] is None else np.concatenate([r[2] for r in results])
    return deltas, released, s_hat


# ---------------------------------------------------------------- server phase


def _finish_round(setup: Setup, state: RunState, t: int, c_bar: np.ndarray, clean_sq_mean: float, stats: dict):
    cfg = setup.config
    c_bar_sq = float(np.dot(c_bar, c_bar))
    try:
        eta = step_size(setup.rule, c_bar_sq, **stats)
    except DegenerateRoundError as exc:
        log.warning("round %d: %s; falling back to eta_g = 1", t, exc)
        eta = 1.0
    eta_target = target_step_size(clean_sq_mean, c_bar_sq) if cfg.run.record_eta_target else None
    w_new = apply_global_update(state.w, c_bar, eta)
    if not np.all(np.isfinite(w_new)):
        raise RoundFailure(t, FloatingPointError("global model became non-finite"))

    iterates = state.iterates + [w_new]
    ds = setup.dataset
    w_avg = average_last_k(iterates, min(cfg.run.last_k_average, len(iterates)))
    dist = avg_dist = None
    if ds.optimum is not None:
        dist = l2_norm(w_new - ds.optimum)
        avg_dist = l2_norm(w_avg - ds.optimum)
    report = RoundReport(
        round=t,
        eta_g=eta,
        eta_target=eta_target,
        c_bar_norm=float(np.sqrt(c_bar_sq)),
        train_loss=ds.mean_loss(w_new),
        dist_to_optimum=dist,
        privacy=ledger_for(cfg, t),
        avg_train_loss=ds.mean_loss(w_avg),
        avg_dist_to_optimum=avg_dist,
    )
    return RunState(w_new, t, iterates), report


def ledger_for(cfg: ExperimentConfig, rounds: int) -> accountant.PrivacyLedger:
    """Closed-form privacy spent by ``rounds`` rounds of ``cfg``."""
    kind = cfg.mechanism_kind
    m = cfg.mechanism
    sigma_xi = cfg.resolved_sigma_xi() if cfg.rule_variant == "cdp_corrected" else None
    return accountant.ledger_after(
        _REGIME[kind],
        rounds,
        C=cfg.client.clip_C,
        sigma=cfg.resolved_sigma(),
        sigma_xi=sigma_xi,
        M=cfg.dataset.M,
        eps_split=(m.eps0, m.eps1, m.eps2),
        delta=m.delta,
    )


def run_ldp_round(state: RunState, setup: Setup):
    """One round of local-DP training (or the clean ``none`` degeneration)."""
    t = state.t + 1
    try:
        deltas, released, s_hat = _client_phase(setup, state.w, t)
        clean_sq_mean = float(np.mean(rowdot(deltas, deltas)))
        if released is None:
            c_bar = aggregate_mean(deltas)
            stats = {"clean_sq_mean": clean_sq_mean}
        else:
            c_bar = aggregate_mean(released)
            stats = {
                "noisy_updates_sq_mean": float(np.mean(rowdot(released, released))),
                "d": setup.dataset.model_dim,
                "sigma": setup.sigma,
                "privunit_s_mean": None if s_hat is None else float(np.mean(s_hat)),
            }
        return _finish_round(setup, state, t, c_bar, clean_sq_mean, stats)
    except RoundFailure:
        raise
    except (ArithmeticError, ValueError, DivergenceError) as exc:
        raise RoundFailure(t, exc) from exc


def run_cdp_round(state: RunState, setup: Setup):
    """One round of central-DP training: clean updates, noisy aggregate and numerator."""
    cfg = setup.config
    t = state.t + 1
    try:
        deltas, _, _ = _client_phase(setup, state.w, t)
        M, d = deltas.shape
        clean_sq_mean = float(np.mean(rowdot(deltas, deltas)))
        c_bar = aggregate_mean(deltas) + central_gaussian_noise(d, setup.mechanism, M, make_rng(cfg.run.seed, t, SERVER_NOISE))
        stats = {}
        if setup.rule.variant == "cdp_corrected":
            xi = sample_xi(setup.mechanism, make_rng(cfg.run.seed, t, SERVER_XI))
            stats["xi_noised_clean_sq_mean"] = clean_sq_mean + xi
        return _finish_round(setup, state, t, c_bar, clean_sq_mean, stats)
    except RoundFailure:
        raise
    except (ArithmeticError, ValueError, DivergenceError) as exc:
        raise RoundFailure(t, exc) from exc


def run_experiment(config: ExperimentConfig, dataset: FederatedDataset | None = None, workers: int = 1):
    """Run all ``T`` rounds; returns ``(final_model, reports)``.

    The final model is the mean of the last ``last_k_average`` iterates
    (the initial model counts as an iterate).
    """
    setup = prepare(config, dataset, workers)
    state = initial_state(setup)
    step = run_cdp_round if config.mechanism_kind == "cdp" else run_ldp_round
    reports = []
    for _ in range(config.run.T):
        state, report = step(state, setup)
        reports.append(report)
    return average_last_k(state.iterates, config.run.last_k_average), reports


# ------------------------------------------------------------ step-size study


@dataclass(frozen=True)
class StudyRow:
    M: int
    rule: str
    mean: float
    std: float
    eta_target: float
    eta_target_std: float


def step_size_study(
    dataset: FederatedDataset,
    M_grid,
    local: LocalTrainConfig,
    sigma: float,
    eps: tuple[float, float, float] = (2.0, 2.0, 2.0),
    reps: int = 20,
    seed: int = 0,
    mechanisms=("gaussian", "privunit"),
):
    """Step sizes at initialization (``w = 0``) over a grid of client counts.

    For each ``M`` the first ``M`` clients of ``dataset`` compute their clean
    clipped updates once; the randomizers are then redrawn ``reps`` times.
    Gaussian draws feed both the naive and the bias-corrected rule, PrivUnit
    draws feed the PrivUnit rule. Each row carries the mean/std of the rule
    and of ``eta_target`` over the same draws.
    """
    if not dataset.is_regression or dataset.optimum is None:
        raise ValueError("the step-size study needs a regression dataset with a known optimum")
    d = dataset.model_dim
    w0 = np.zeros(d)
    X, y = dataset.stacked()
    gauss = GaussianLocalConfig(sigma)
    rows = []
    for M in M_grid:
        if M > dataset.M:
            raise ValueError(f"grid value M={M} exceeds the dataset's {dataset.M} clients")
        deltas = clip_rows(local_update_rows(w0, X[:M], y[:M], local, range(M)), local.clip_C)
        clean = float(np.mean(rowdot(deltas, deltas)))
        cells: dict[str, list] = {}
        if "gaussian" in mechanisms:
            naive, corrected, target = [], [], []
            for r in range(reps):
                c = np.stack([gaussian_local_randomize(deltas[i], gauss, make_rng(seed, r, STUDY, 0, M, i)) for i in range(M)])
                c_bar = c.mean(axis=0)
                den = float(np.dot(c_bar, c_bar))
                noisy = float(np.mean(rowdot(c, c)))
                naive.append(step_size(StepSizeRule("naive_noisy"), den, noisy_updates_sq_mean=noisy))
                corrected.append(
                    step_size(StepSizeRule("ldp_gaussian_corrected"), den, noisy_updates_sq_mean=noisy, d=d, sigma=sigma)
                )
                target.append(target_step_size(clean, den))
            cells["naive_noisy"] = [naive, target]
            cells["ldp_gaussian_corrected"] = [corrected, target]
        if "privunit" in mechanisms:
            pu = make_privunit_config(d, *eps, local.clip_C)
            vals, target = [], []
            for r in range(reps):
                c = np.stack([_privunit_randomize(deltas[i], pu, make_rng(seed, r, STUDY, 1, M, i))[0] for i in range(M)])
                c_bar = c.mean(axis=0)
                den = float(np.dot(c_bar, c_bar))
                s_mean = float(np.mean([estimate_norm_squared(ci, pu) for ci in c]))
                vals.append(step_size(StepSizeRule("ldp_privunit"), den, privunit_s_mean=s_mean))
                target.append(target_step_size(clean, den))
            cells["ldp_privunit"] = [vals, target]
        for rule, (vals, target) in cells.items():
            rows.append(StudyRow(M, rule, float(np.mean(vals)), float(np.std(vals)), float(np.mean(target)), float(np.std(target))))
    return rows
