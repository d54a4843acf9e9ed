"""Divergence estimation between discrete distributions from sampled counts.

Submodules:
    approx      best uniform polynomial approximation, special constructions
    unbiased    falling-factorial estimators of Poisson rate polynomials
    divergence  the KL / Hellinger / chi-square estimators and plug-in baselines
    sampling    synthetic distributions, Poissonized sampling, splitting
    harness     Monte Carlo risk experiments and rate diagnostics
    cli         command-line entry points
"""

from .divergence import (DivergenceEstimate, EstimatorConfig, Histogram,
                         SplitSamples, chi2_plugin, estimate_chi2,
                         estimate_hellinger, estimate_kl_adaptive,
                         estimate_kl_plugin, hellinger_plugin)
from .sampling import (DiscreteDistribution, DistributionPair,
                       make_two_point_pair, make_worst_case_pair,
                       sample_poisson_histogram, split3)

__all__ = [
    "DivergenceEstimate",
    "EstimatorConfig",
    "Histogram",
    "SplitSamples",
    "DiscreteDistribution",
    "DistributionPair",
    "estimate_kl_adaptive",
    "estimate_kl_plugin",
    "estimate_hellinger",
    "hellinger_plugin",
    "estimate_chi2",
    "chi2_plugin",
    "make_worst_case_pair",
    "make_two_point_pair",
    "sample_poisson_histogram",
    "split3",
]

__version__ = "0.1.0"
