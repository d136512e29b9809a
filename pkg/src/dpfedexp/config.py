"""Experiment configuration: dataclasses, defaults, validation, TOML loading.

Defaults follow the synthetic LDP-Gaussian FedEXP setting: M = 1000, d = 100,
tau = 20, eta_l = 0.003, C = 0.3, T = 50, sigma = 0.7 C, and a final model
averaged over the last 2 iterates.

Noise scales left unset are derived from ``C`` per regime: ``sigma = 0.7 C``
for local Gaussian noise, ``sigma = 5 C / sqrt(M)`` for central noise, and
``sigma_xi = d sigma^2 / M``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .client import LocalTrainConfig

ALGORITHMS = {
    # name: (mechanism, default step-size rule)
    "dp_fedavg": ("none", "fixed"),
    "fedexp_clean": ("none", "fedexp_clean"),
    "ldp_fedexp_gaussian": ("gaussian", "ldp_gaussian_corrected"),
    "ldp_fedavg_gaussian": ("gaussian", "fixed"),
    "ldp_fedexp_privunit": ("privunit", "ldp_privunit"),
    "ldp_fedavg_privunit": ("privunit", "fixed"),
    "cdp_fedexp": ("cdp", "cdp_corrected"),
    "cdp_fedavg": ("cdp", "fixed"),
}

# Which rules a mechanism's server can evaluate.
_RULES_FOR = {
    "none": {"fixed", "fedexp_clean"},
    "gaussian": {"fixed", "naive_noisy", "ldp_gaussian_corrected"},
    "privunit": {"fixed", "naive_noisy", "ldp_privunit"},
    "cdp": {"fixed", "cdp_corrected"},
}

LDP_GAUSSIAN_SIGMA_PER_C = 0.7
CDP_SIGMA_PER_C_SQRT_M = 5.0


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "regression"
    M: int = 1000
    d: int = 100
    K: int = 10
    samples_per_client: int = 20
    dirichlet_alpha: float = 0.3
    path: str | None = None


@dataclass(frozen=True)
class ClientSpec:
    tau: int = 20
    eta_l: float = 0.003
    clip_C: float = 0.3


@dataclass(frozen=True)
class MechanismSpec:
    sigma: float | None = None
    sigma_xi: float | None = None
    eps0: float = 2.0
    eps1: float = 2.0
    eps2: float = 2.0
    delta: float = 1e-5


@dataclass(frozen=True)
class ServerSpec:
    algorithm: str = "ldp_fedexp_gaussian"
    step_rule: str | None = None
    eta_g: float = 1.0
    epsilon_fedexp: float = 0.0


@dataclass(frozen=True)
class RunSpec:
    T: int = 50
    seed: int = 0
    last_k_average: int = 2
    record_eta_target: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    client: ClientSpec = field(default_factory=ClientSpec)
    mechanism: MechanismSpec = field(default_factory=MechanismSpec)
    server: ServerSpec = field(default_factory=ServerSpec)
    run: RunSpec = field(default_factory=RunSpec)

    def __post_init__(self):
        validate(self)

    @property
    def mechanism_kind(self) -> str:
        return ALGORITHMS[self.server.algorithm][0]

    @property
    def rule_variant(self) -> str:
        return self.server.step_rule or ALGORITHMS[self.server.algorithm][1]

    @property
    def local(self) -> LocalTrainConfig:
        c = self.client
        return LocalTrainConfig(c.tau, c.eta_l, c.clip_C)

    @property
    def model_dim(self) -> int:
        ds = self.dataset
        return ds.d if ds.kind == "regression" else ds.d * ds.K

    def resolved_sigma(self) -> float | None:
        kind = self.mechanism_kind
        if kind in ("none", "privunit"):
            return None
        if self.mechanism.sigma is not None:
            return self.mechanism.sigma
        C = self.client.clip_C
        if kind == "gaussian":
            return LDP_GAUSSIAN_SIGMA_PER_C * C
        return CDP_SIGMA_PER_C_SQRT_M * C / math.sqrt(self.dataset.M)

    def resolved_sigma_xi(self) -> float | None:
        if self.mechanism_kind != "cdp":
            return None
        if self.mechanism.sigma_xi is not None:
            return self.mechanism.sigma_xi
        s = self.resolved_sigma()
        return self.model_dim * s * s / self.dataset.M

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        sections = {
            "dataset": DatasetSpec,
            "client": ClientSpec,
            "mechanism": MechanismSpec,
            "server": ServerSpec,
            "run": RunSpec,
        }
        unknown = set(obj) - set(sections) - {"sweep", "study"}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown section")
        kwargs = {}
        for name, klass in sections.items():
            raw = dict(obj.get(name, {}))
            names = {f.name: f for f in dataclasses.fields(klass)}
            for key in raw:
                if key not in names:
                    raise ConfigError(f"{name}.{key}", "unknown field")
            kwargs[name] = klass(**{k: _coerce(f"{name}.{k}", v, names[k].type) for k, v in raw.items()})
        return cls(**kwargs)


def _coerce(name: str, value, type_str):
    t = str(type_str)
    if value is None:
        if "None" in t:
            return None
        raise ConfigError(name, "must not be empty")
    if t.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return value
    if t.startswith("float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    if t.startswith("bool"):
        if not isinstance(value, bool):
            raise ConfigError(name, f"expected true/false, got {value!r}")
        return value
    if t.startswith("str"):
        if not isinstance(value, str):
            raise ConfigError(name, f"expected a string, got {value!r}")
        return value
    return value


def validate(cfg: ExperimentConfig) -> None:
    ds, cl, mech, srv, run = cfg.dataset, cfg.client, cfg.mechanism, cfg.server, cfg.run
    if ds.kind not in ("regression", "classification"):
        raise ConfigError("dataset.kind", f"expected 'regression' or 'classification', got {ds.kind!r}")
    for name in ("M", "d", "samples_per_client"):
        if getattr(ds, name) < 1:
            raise ConfigError(f"dataset.{name}", "must be >= 1")
    if ds.kind == "classification" and ds.K < 2:
        raise ConfigError("dataset.K", "must be >= 2")
    if not ds.dirichlet_alpha > 0:
        raise ConfigError("dataset.dirichlet_alpha", "must be positive")
    if cl.tau < 1:
        raise ConfigError("client.tau", "must be >= 1")
    if not cl.eta_l > 0:
        raise ConfigError("client.eta_l", "must be positive")
    if not cl.clip_C > 0:
        raise ConfigError("client.clip_C", "must be positive")
    if srv.algorithm not in ALGORITHMS:
        raise ConfigError("server.algorithm", f"unknown algorithm {srv.algorithm!r}; expected one of {sorted(ALGORITHMS)}")
    kind = ALGORITHMS[srv.algorithm][0]
    rule = cfg.rule_variant
    if rule not in _RULES_FOR[kind]:
        raise ConfigError("server.step_rule", f"rule {rule!r} is not available to a {kind!r} server")
    if not srv.eta_g > 0:
        raise ConfigError("server.eta_g", "must be positive")
    if srv.epsilon_fedexp < 0:
        raise ConfigError("server.epsilon_fedexp", "must be nonnegative")
    for name in ("sigma", "sigma_xi"):
        v = getattr(mech, name)
        if v is not None and not v > 0:
            raise ConfigError(f"mechanism.{name}", "must be positive")
    for name in ("eps0", "eps1", "eps2"):
        if not getattr(mech, name) > 0:
            raise ConfigError(f"mechanism.{name}", "must be positive")
    if not 0 < mech.delta < 1:
        raise ConfigError("mechanism.delta", "must lie in (0, 1)")
    if kind == "privunit" and ds.kind == "regression" and ds.d < 2:
        raise ConfigError("dataset.d", "PrivUnit needs a model dimension >= 2")
    if run.T < 1:
        raise ConfigError("run.T", "must be >= 1")
    if run.seed < 0:
        raise ConfigError("run.seed", "must be nonnegative")
    if run.last_k_average < 1:
        raise ConfigError("run.last_k_average", "must be >= 1")
    if run.last_k_average > run.T + 1:
        raise ConfigError("run.last_k_average", "cannot exceed T + 1 iterates")


def parse_override(text: str) -> tuple[str, object]:
    """Split ``section.key=value``; the value is read as a TOML literal, else kept as a string."""
    if "=" not in text:
        raise ConfigError(text, "override must look like section.key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    raw = raw.strip()
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def apply_overrides(raw: dict, overrides) -> dict:
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in raw.items()}
    for text in overrides:
        key, value = parse_override(text)
        parts = key.split(".")
        if len(parts) != 2:
            raise ConfigError(key, "override key must be section.field")
        out.setdefault(parts[0], {})[parts[1]] = value
    return out


def load_raw(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        return tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc


def load_config(path, overrides=()) -> ExperimentConfig:
    return ExperimentConfig.from_dict(apply_overrides(load_raw(path), overrides))
