"""
Central-DP training and the local step size
===========================================

Under central DP the server adds N(0, sigma^2/M) to the mean update and
privatizes the step-size numerator with a scalar Gaussian xi. With d = 500
the rank-one client objectives have curvature 2||x_i||^2 near 2000, so local
gradient descent is only stable for eta_l below about 1/||x_i||^2. This demo
prints the fraction of unstable clients and the outcome for a few eta_l.
"""

import numpy as np

from dpfedexp.config import ClientSpec, DatasetSpec, ExperimentConfig, RunSpec, ServerSpec
from dpfedexp.orchestrator import build_dataset, run_experiment

for eta_l in (0.0003, 0.0005, 0.001):
    for alg in ("cdp_fedexp", "cdp_fedavg"):
        cfg = ExperimentConfig(
            dataset=DatasetSpec(M=1000, d=500),
            client=ClientSpec(tau=20, eta_l=eta_l, clip_C=0.3),
            server=ServerSpec(algorithm=alg),
            run=RunSpec(T=50, seed=0),
        )
        ds = build_dataset(cfg)
        X, _ = ds.stacked()
        unstable = np.mean(np.abs(1 - 2 * eta_l * np.sum(X**2, axis=1)) > 1)
        w, reports = run_experiment(cfg, ds, workers=4)
        led = reports[-1].privacy
        print(
            f"eta_l={eta_l:<7} {alg:<11} unstable clients {unstable:5.1%}  "
            f"distance {np.linalg.norm(ds.optimum):6.2f} -> {np.linalg.norm(w - ds.optimum):6.2f}  "
            f"rho={led.rho:.3f} rho_xi={led.rho_xi:.4f} eps={led.eps:.3f}"
        )
