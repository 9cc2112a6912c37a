"""Spike-and-slab empirical Bayes multiple testing for sparse Gaussian means."""

__version__ = "0.1.0"

from slabtest.exceptions import ConfigError, DomainError  # noqa: E402
from slabtest.priors import LaplacePrior, QuadraturePrior, QuasiCauchyPrior, parse_prior  # noqa: E402
from slabtest.thresholds import ThresholdContext, mixing_ratio  # noqa: E402
from slabtest.mmle import ObservationBatch, WeightEstimate, estimate_weight  # noqa: E402
from slabtest.procedures import (  # noqa: E402
    BatchAnalysis,
    TestOutcome,
    bh_procedure,
    ebayes_hybrid,
    ebayes_l,
    ebayes_q,
    ebayes_q0,
    l_values,
    m_values,
    mci_procedure,
    q_values,
    sc_procedure,
)
from slabtest.estimator import SpikeSlabTester  # noqa: E402

__all__ = [
    "BatchAnalysis",
    "ConfigError",
    "DomainError",
    "LaplacePrior",
    "ObservationBatch",
    "QuadraturePrior",
    "QuasiCauchyPrior",
    "SpikeSlabTester",
    "TestOutcome",
    "ThresholdContext",
    "WeightEstimate",
    "bh_procedure",
    "ebayes_hybrid",
    "ebayes_l",
    "ebayes_q",
    "ebayes_q0",
    "estimate_weight",
    "l_values",
    "m_values",
    "mci_procedure",
    "mixing_ratio",
    "parse_prior",
    "q_values",
    "sc_procedure",
]
