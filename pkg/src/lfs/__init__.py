"""Likelihood-free sampling suite: rejection, MCMC and SMC over S >= 1 simulated datasets."""

__version__ = "0.1.0"

from .errors import (BudgetExhaustedError, CapabilityError, ConfigurationError,
                     DomainError, ParticleCollapseError)
from .kernels import SmoothingKernel, SummaryDistance
from .models import (AnalyticOracle, BernoulliCountModel, CountingModel, Model,
                     NormalMeanModel, make_model, oracle_density)
from .target import AugmentedState, joint_logdensity_unnorm, marginal_logestimate
from .rejection import RejectionOutput, run_rejection
from .mcmc import (CARRIED_BUNDLE, FRESH_DENOMINATOR, ChainState, McmcOutput,
                   ProposalSpec, acceptance_logratio, run_mcmc)
from .smc import (BACKWARD_KERNEL, JOINT_MCMC_MOVE, BandwidthSchedule, Particle,
                  ParticleSystem, SmcOutput, SmcVariantSpec, ess,
                  incremental_weight_backward, incremental_weight_joint,
                  incremental_weight_joint_general, resample_systematic, run_smc)
from .diagnostics import ks_statistic, weighted_moments
from .config import RunConfig
from .rng import substream

__all__ = [
    "AnalyticOracle", "AugmentedState", "BACKWARD_KERNEL", "BandwidthSchedule",
    "BernoulliCountModel", "BudgetExhaustedError", "CapabilityError", "CARRIED_BUNDLE",
    "ChainState", "ConfigurationError", "CountingModel", "DomainError",
    "FRESH_DENOMINATOR", "JOINT_MCMC_MOVE", "McmcOutput", "Model", "NormalMeanModel",
    "Particle", "ParticleCollapseError", "ParticleSystem", "ProposalSpec",
    "RejectionOutput", "RunConfig", "SmcOutput", "SmcVariantSpec", "SmoothingKernel",
    "SummaryDistance", "acceptance_logratio", "ess", "incremental_weight_backward",
    "incremental_weight_joint", "incremental_weight_joint_general",
    "joint_logdensity_unnorm", "ks_statistic", "make_model", "marginal_logestimate",
    "oracle_density", "resample_systematic", "run_mcmc", "run_rejection", "run_smc",
    "substream", "weighted_moments",
]
