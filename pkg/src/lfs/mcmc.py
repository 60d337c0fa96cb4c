"""Generalized likelihood-free MCMC for any S >= 1, in two variants.

``carried`` (the exact sampler): the simulated bundle travels with the chain
state and its cached pooled-kernel value is reused in the acceptance
denominator.  This is a pseudo-marginal scheme — it targets the augmented
joint posterior over (theta, bundle) by construction, so discarding bundles
yields exact smoothed-marginal draws for every S.

``fresh`` (the biased reference variant): the denominator is re-estimated
from a brand-new bundle at the current state on every iteration ("Monte Carlo
within Metropolis").  The acceptance probability is then a ratio of two
independent unbiased estimates, which is itself biased for finite S; the
chain's stationary distribution only approaches the smoothed marginal as S
grows.  It exists to make that bias observable and is labeled as biased in
all emitted metadata.

Both variants share one acceptance computation: the marginal-estimate reading
and the joint-density reading of the ratio are the same expression, so there
is exactly one code path for it.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BudgetExhaustedError, ConfigurationError, DomainError
from .rng import substream
from .target import joint_logdensity_unnorm

CARRIED_BUNDLE = "carried"
FRESH_DENOMINATOR = "fresh"
MCMC_VARIANTS = (CARRIED_BUNDLE, FRESH_DENOMINATOR)

PROPOSAL_KINDS = ("random-walk", "prior")

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class ProposalSpec:
    """Parameter-space proposal q(theta_curr, .).

    ``random-walk``: Gaussian with per-dimension step sd (symmetric).
    ``prior``: independence proposal from the model's prior.

    A ``None`` step sd resolves to half the prior sd per dimension — a
    documented default so experiments stay reproducible.
    """

    kind: str = "random-walk"
    step_sd: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in PROPOSAL_KINDS:
            raise ConfigurationError(
                f"unknown proposal kind {self.kind!r}; expected one of {PROPOSAL_KINDS}")
        if self.step_sd is not None:
            self.step_sd = np.atleast_1d(np.asarray(self.step_sd, dtype=float))
            if np.any(self.step_sd <= 0):
                raise ConfigurationError("proposal step sd must be positive")

    def resolved(self, model):
        if self.kind == "random-walk" and self.step_sd is None:
            return ProposalSpec(self.kind, model.prior_sd() / 2.0)
        return self

    def sample(self, theta, model, rng):
        if self.kind == "prior":
            return model.prior_sample(rng)
        step = self.step_sd if self.step_sd is not None else model.prior_sd() / 2.0
        return theta + rng.normal(0.0, step)

    def logdensity(self, frm, to, model):
        """log q(frm -> to); pointwise evaluable for both kinds."""
        if self.kind == "prior":
            return float(model.prior_logdensity(to))
        step = self.step_sd if self.step_sd is not None else model.prior_sd() / 2.0
        z = (np.asarray(to, dtype=float) - np.asarray(frm, dtype=float)) / step
        return float(np.sum(-0.5 * z * z - np.log(step) - _LOG_SQRT_2PI))


@dataclass
class ChainState:
    theta: np.ndarray
    bundle: np.ndarray
    log_num: float


@dataclass
class IterationRecord:
    """Per-iteration quantities handed to instrumentation callbacks."""

    iteration: int
    theta_prop: np.ndarray
    bundle_prop: np.ndarray
    log_num_prop: float
    theta_curr: np.ndarray
    bundle_curr: np.ndarray
    log_num_curr: float
    log_ratio: float
    accepted: bool


@dataclass
class McmcOutput:
    iterations: np.ndarray       # kept iteration indices, 1-based
    thetas: np.ndarray           # (n_kept, param_dim)
    accepted: np.ndarray         # bool flags for the kept iterations
    log_nums: np.ndarray
    acceptance_rate: float
    variant: str
    n_iter: int
    burn_in: int
    thin: int
    seed: int
    extras: dict = field(default_factory=dict)


def acceptance_logratio(log_num_prop, log_num_curr, theta_prop, theta_curr,
                        proposal, model):
    """Log acceptance ratio; acceptance probability is min(1, exp(.)).

    The identical expression serves both the marginal-estimate reading and
    the joint-density reading of the ratio — this function is the single
    implementation both interpretations share.

    When both cached values are -inf the ratio is undefined; the move is
    rejected to keep the chain well defined on the kernel's support (the
    initializer guarantees the chain starts inside it).
    """
    if log_num_prop == -np.inf and log_num_curr == -np.inf:
        return -np.inf
    log_q_fwd = proposal.logdensity(theta_curr, theta_prop, model)
    log_q_back = proposal.logdensity(theta_prop, theta_curr, model)
    return (log_num_prop - log_num_curr) + (log_q_back - log_q_fwd)


def initialize_chain(model, kernel, t_y, S, rng, init=None, init_budget=100_000):
    """Draw a starting state with nonzero pooled kernel (budgeted)."""
    if init is not None:
        theta = np.atleast_1d(np.asarray(init, dtype=float))
        if model.prior_logdensity(theta) == -np.inf:
            raise DomainError(f"init theta={theta} outside the prior's support")
        for _ in range(init_budget):
            bundle = model.simulate(theta, S, rng)
            log_num = joint_logdensity_unnorm(theta, bundle, t_y, kernel, model)
            if log_num > -np.inf:
                return ChainState(theta, bundle, log_num)
        raise BudgetExhaustedError(
            f"no bundle with nonzero kernel at init theta after {init_budget} tries",
            proposals_used=init_budget)
    for _ in range(init_budget):
        theta = model.prior_sample(rng)
        bundle = model.simulate(theta, S, rng)
        log_num = joint_logdensity_unnorm(theta, bundle, t_y, kernel, model)
        if log_num > -np.inf:
            return ChainState(theta, bundle, log_num)
    raise BudgetExhaustedError(
        f"chain initialization found no state with nonzero kernel in {init_budget} draws",
        proposals_used=init_budget)


def run_mcmc(model, kernel, t_y, S, variant, proposal, n_iter, burn_in, seed, *,
             init=None, thin=1, chain_id=0, init_budget=100_000,
             on_iteration: Optional[Callable[[IterationRecord], None]] = None):
    """Run one chain; returns the post-burn-in, thinned trajectory.

    The whole chain lives on the substream (seed, "mcmc", "chain", chain_id),
    so independent chains on distinct ids are reproducible regardless of
    scheduling.
    """
    if variant not in MCMC_VARIANTS:
        raise ConfigurationError(f"unknown MCMC variant {variant!r}")
    if not (n_iter > burn_in >= 0):
        raise ConfigurationError("need n_iter > burn_in >= 0")
    if thin < 1:
        raise ConfigurationError("thin must be >= 1")
    proposal = proposal.resolved(model)

    rng = substream(seed, "mcmc", "chain", chain_id)
    state = initialize_chain(model, kernel, t_y, S, rng, init=init, init_budget=init_budget)

    kept_iters, kept_thetas, kept_flags, kept_lognums = [], [], [], []
    n_accepted = 0

    for n in range(1, n_iter + 1):
        theta_prop = proposal.sample(state.theta, model, rng)
        accepted = False
        if model.prior_logdensity(theta_prop) > -np.inf:
            bundle_prop = model.simulate(theta_prop, S, rng)
            log_num_prop = joint_logdensity_unnorm(theta_prop, bundle_prop, t_y, kernel, model)
            if variant == FRESH_DENOMINATOR:
                bundle_curr = model.simulate(state.theta, S, rng)
                log_num_curr = joint_logdensity_unnorm(
                    state.theta, bundle_curr, t_y, kernel, model)
            else:
                bundle_curr = state.bundle
                log_num_curr = state.log_num
            log_ratio = acceptance_logratio(
                log_num_prop, log_num_curr, theta_prop, state.theta, proposal, model)
            u = rng.uniform()
            accepted = log_ratio >= 0.0 or u < math.exp(log_ratio)
            if on_iteration is not None:
                on_iteration(IterationRecord(
                    iteration=n, theta_prop=theta_prop, bundle_prop=bundle_prop,
                    log_num_prop=log_num_prop, theta_curr=state.theta,
                    bundle_curr=bundle_curr, log_num_curr=log_num_curr,
                    log_ratio=log_ratio, accepted=accepted))
            if accepted:
                state = ChainState(theta_prop, bundle_prop, log_num_prop)
                n_accepted += 1
            elif variant == FRESH_DENOMINATOR:
                # latest estimate at the (unchanged) current parameter
                state = ChainState(state.theta, bundle_curr, log_num_curr)
        if n > burn_in and (n - burn_in - 1) % thin == 0:
            kept_iters.append(n)
            kept_thetas.append(state.theta.copy())
            kept_flags.append(accepted)
            kept_lognums.append(state.log_num)

    return McmcOutput(
        iterations=np.asarray(kept_iters, dtype=np.int64),
        thetas=np.asarray(kept_thetas, dtype=float),
        accepted=np.asarray(kept_flags, dtype=bool),
        log_nums=np.asarray(kept_lognums, dtype=float),
        acceptance_rate=n_accepted / n_iter,
        variant=variant, n_iter=n_iter, burn_in=burn_in, thin=thin, seed=seed,
    )
