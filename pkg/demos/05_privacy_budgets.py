"""
Privacy budgets of the private step sizes
=========================================

LDP rules reuse quantities the clients already released, so they cost
nothing extra. The CDP rule pays for one scalar per round, which is small
when T d^2 is large compared to M^2.
"""

import math

from dpfedexp.accountant import cdp_rho, ldp_gaussian_rho, privunit_pure_eps, rdp_to_dp

delta = 1e-5

rho = ldp_gaussian_rho(C=1.0, sigma=0.7)
print(f"LDP Gaussian (sigma = 0.7 C): rho = {rho:.4f}, eps per round = {rdp_to_dp(rho, delta):.3f}")
print(f"LDP PrivUnit (2, 2, 2): eps per round = {privunit_pure_eps(2, 2, 2)}")

M, T, C = 1000, 50, 1.0
sigma = 5 * C / math.sqrt(M)
for d in (500, 5046, 10**6):
    rho, rho_xi = cdp_rho(C, sigma, d * sigma**2 / M, M, T)
    print(
        f"CDP d={d:>7}: rho = {rho:.3f}, rho_xi = {rho_xi:.2e} ({rho_xi / rho:.2%} of rho), "
        f"eps FedAvg {rdp_to_dp(rho, delta):.3f}, FedEXP {rdp_to_dp(rho + rho_xi, delta):.3f}"
    )
