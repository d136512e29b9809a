"""
Inside the PrivUnit + ScalarDP randomizer
=========================================

A clipped update is split into a direction (PrivUnit) and a magnitude
(ScalarDP). The released vector has a deterministic norm per lattice point,
which is how the server recovers the scalar and estimates ||delta||^2 for
free.
"""

import numpy as np

from dpfedexp.core import make_rng, sample_unit_sphere
from dpfedexp.mechanisms import (
    estimate_norm_squared,
    make_privunit_config,
    privunit_randomize,
    recover_scalar,
    scalardp_support,
)

cfg = make_privunit_config(d=50, eps0=2.0, eps1=2.0, eps2=2.0, clip_C=1.0)
print(f"p = {cfg.p:.6f}, gamma = {cfg.gamma:.6f}, m = {cfg.m:.6f}")
print(f"k = {cfg.k}, a = {cfg.a:.6f}, b = {cfg.b:.6f}")
print(f"norm-estimation constants: c1 = {cfg.c1:.6f}, c2 = {cfg.c2:.6f}, c3 = {cfg.c3:.6f}")

# every output lies on one of k+1 spheres
print("\npossible scalar outputs:", np.round(scalardp_support(cfg), 4))
print("possible output norms:  ", np.round(np.abs(scalardp_support(cfg)) / cfg.m, 4))

rng = make_rng(7)
delta = 0.6 * sample_unit_sphere(50, rng)

# Monte-Carlo: the release is unbiased but very noisy
N = 50_000
Z = np.array([privunit_randomize(delta, cfg, rng) for _ in range(N)])
err = np.linalg.norm(Z.mean(axis=0) - delta)
print(f"\n||mean of {N} releases - delta|| = {err:.4f}   (single-release norm about {np.linalg.norm(Z[0]):.2f})")

# the server recovers r_hat from ||c|| and forms a conservative norm estimate
s_hat = np.array([estimate_norm_squared(c, cfg) for c in Z])
print(f"E[s_hat] = {s_hat.mean():.4f} against ||delta||^2 = {delta @ delta:.4f}")
print(f"first few recovered scalars: {[round(recover_scalar(c, cfg), 4) for c in Z[:5]]}")
