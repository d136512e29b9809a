"""Local and central randomizers plus the numerics they rely on."""

from .gaussian import (
    CdpNoiseConfig,
    GaussianLocalConfig,
    central_gaussian_noise,
    default_sigma_xi,
    gaussian_local_randomize,
    sample_xi,
)
from .privunit import (
    NormRecoveryError,
    PrivUnitConfig,
    PrivUnitConfigError,
    estimate_norm_squared,
    make_privunit_config,
    privunit,
    privunit_randomize,
    privunit_scale,
    recover_scalar,
    sample_cap_component,
    scalardp,
    scalardp_support,
)
from .special import incomplete_beta, log_beta, log_incomplete_beta, regularized_incomplete_beta

__all__ = [
    "CdpNoiseConfig",
    "GaussianLocalConfig",
    "NormRecoveryError",
    "PrivUnitConfig",
    "PrivUnitConfigError",
    "central_gaussian_noise",
    "default_sigma_xi",
    "estimate_norm_squared",
    "gaussian_local_randomize",
    "incomplete_beta",
    "log_beta",
    "log_incomplete_beta",
    "make_privunit_config",
    "privunit",
    "privunit_randomize",
    "privunit_scale",
    "recover_scalar",
    "regularized_incomplete_beta",
    "sample_cap_component",
    "sample_xi",
    "scalardp",
    "scalardp_support",
]
