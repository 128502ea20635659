"""Constrained auto-bidding sandbox.

Simulator, offline solvers, hindsight data collection, a dual B-spline
bidding policy, the online ROI-correcting controller, rule-based baselines,
and an evaluation harness.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
