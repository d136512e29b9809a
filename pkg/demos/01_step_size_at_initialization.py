"""
Why the naive extrapolated step size breaks under local noise
=============================================================

Each client adds N(0, sigma^2 I) to its clipped update. The server only sees
the noisy updates c_i, so plugging them straight into the FedEXP ratio
inflates the numerator by d sigma^2. Subtracting that known bias fixes it,
and the PrivUnit rule gets a low-variance numerator from the scalar channel.
"""

from dpfedexp.client import LocalTrainConfig
from dpfedexp.core import make_rng
from dpfedexp.data import generate_synthetic_regression
from dpfedexp.orchestrator import step_size_study

# synthetic least squares with one sample per client and a shared minimizer
d, C = 100, 0.3
sigma = 0.7 * C
ds = generate_synthetic_regression(10_000, d, make_rng(0))
local = LocalTrainConfig(tau=20, eta_l=0.003, clip_C=C)
print(f"d sigma^2 = {d * sigma**2:.3f}, and every clipped update has norm^2 <= C^2 = {C * C:.3f}")

# at w = 0, redraw the noise 20 times per client count and compare the rules
rows = step_size_study(ds, [10, 100, 1000, 10_000], local, sigma, reps=20, seed=1)

print(f"\n{'M':>6}  {'rule':<24}{'mean':>10}{'std':>10}{'eta_target':>12}")
for r in rows:
    print(f"{r.M:>6}  {r.rule:<24}{r.mean:>10.3f}{r.std:>10.3f}{r.eta_target:>12.3f}")

# the corrected rule approaches eta_target as M grows
print("\nrelative error of the corrected Gaussian rule:")
for r in rows:
    if r.rule == "ldp_gaussian_corrected":
        print(f"  M = {r.M:>6}: {abs(r.mean - r.eta_target) / r.eta_target:.3f}")
