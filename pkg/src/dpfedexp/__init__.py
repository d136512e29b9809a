"""Differentially private federated averaging with adaptive extrapolated server steps.

Modules:

* :mod:`dpfedexp.core` -- vectors, seeded random streams
* :mod:`dpfedexp.data` -- synthetic heterogeneous datasets and client objectives
* :mod:`dpfedexp.client` -- local gradient descent and clipping
* :mod:`dpfedexp.mechanisms` -- Gaussian, PrivUnit and ScalarDP randomizers
* :mod:`dpfedexp.server` -- aggregation and global step-size rules
* :mod:`dpfedexp.accountant` -- RDP / pure-DP privacy accounting
* :mod:`dpfedexp.orchestrator` -- training loops and the step-size study
* :mod:`dpfedexp.cli` -- ``dpfedexp run | sweep | stepsize-study``
"""

__version__ = "0.1.0"
