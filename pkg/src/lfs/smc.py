"""Likelihood-free SMC sampler over a decreasing-bandwidth sequence.

The particle population is pushed through the sequence of smoothed posteriors
indexed by bandwidths h_1 > h_2 > ... > h_n, with two weight formulations:

``joint-move``
    The augmented-space construction: the incremental weight for a mutation
    kernel that leaves the new distribution invariant, paired with its
    time-reversal backward kernel, reduces to the pooled-kernel ratio at the
    two bandwidths evaluated on the *pre-move* particle (reweight-then-move).
    Mutation is one carried-bundle MCMC step per particle.

``backward``
    The population-sampler construction: particles are mutated by a pointwise
    evaluable kernel, receive a fresh bundle, and are weighted by the ratio of
    the fresh marginal estimate to the weighted mutation mixture over the
    previous population.  No estimate of the *previous* step's marginal
    appears anywhere in this weight, which is what makes it unbiased for
    every S >= 1.  Optional probabilistic particle rejection drops low-weight
    particles while preserving expected weight.

Each step's randomness comes from substreams keyed by (seed, "smc", "step",
k, phase); phases execute in a fixed order over particles, so a run is a
deterministic function of the seed.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, ParticleCollapseError
from .rng import substream

JOINT_MCMC_MOVE = "joint-move"
BACKWARD_KERNEL = "backward"
SMC_VARIANTS = (JOINT_MCMC_MOVE, BACKWARD_KERNEL)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class BandwidthSchedule:
    """Strictly decreasing, positive bandwidths h_1 > ... > h_n."""

    values: np.ndarray
    kind: str = "explicit"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 1:
            raise ConfigurationError("schedule needs at least one bandwidth")
        if np.any(self.values <= 0) or not np.all(np.isfinite(self.values)):
            raise ConfigurationError("bandwidths must be positive reals")
        if np.any(np.diff(self.values) >= 0):
            raise ConfigurationError("bandwidths must be strictly decreasing")

    @classmethod
    def geometric(cls, h_start, h_end, n_steps):
        if n_steps < 1:
            raise ConfigurationError("n_steps must be >= 1")
        if n_steps == 1:
            return cls(np.array([float(h_end)]), kind="geometric")
        if not h_start > h_end > 0:
            raise ConfigurationError("need h_start > h_end > 0")
        return cls(np.geomspace(h_start, h_end, n_steps), kind="geometric")

    @classmethod
    def explicit(cls, values):
        return cls(np.asarray(values, dtype=float), kind="explicit")

    @property
    def n_steps(self):
        return self.values.size


@dataclass
class Particle:
    """Per-particle view: parameter, bundle, and cached values at the current h."""

    theta: np.ndarray
    bundle: np.ndarray
    log_weight: float
    log_num: float


@dataclass
class SmcVariantSpec:
    kind: str
    rejection_threshold: Optional[float] = None

    def __post_init__(self):
        if self.kind not in SMC_VARIANTS:
            raise ConfigurationError(f"unknown SMC variant {self.kind!r}")
        if self.rejection_threshold is not None:
            if self.kind != BACKWARD_KERNEL:
                raise ConfigurationError(
                    "rejection_threshold is only valid for the backward variant")
            if not 0.0 < self.rejection_threshold < 1.0:
                raise ConfigurationError("rejection_threshold must lie in (0, 1)")


@dataclass
class MutationRecord:
    """Realized mutation move, for instrumentation of the weight bookkeepings."""

    step: int
    index: int
    h_new: float
    h_prev: float
    theta_curr: np.ndarray
    bundle_curr: np.ndarray
    log_pooled_curr_new: float     # pooled kernel of the pre-move bundle at h_new
    log_pooled_curr_prev: float    # ... and at h_prev
    theta_prop: np.ndarray
    bundle_prop: np.ndarray
    log_pooled_prop_new: float
    log_ratio: float
    accepted: bool


@dataclass
class SmcOutput:
    thetas: np.ndarray             # (N, param_dim)
    weights: np.ndarray            # normalized
    log_weights: np.ndarray        # normalized, log scale
    ess_trace: np.ndarray          # per step, length n_steps
    acceptance_trace: np.ndarray   # joint-move mutation acceptance per step (k >= 2)
    resampled_steps: np.ndarray
    schedule: BandwidthSchedule
    variant: str
    seed: int
    extras: dict = field(default_factory=dict)


def ess(weights):
    """Effective sample size 1 / sum(w^2) of normalized weights."""
    w = np.asarray(weights, dtype=float)
    return 1.0 / float(np.sum(w * w))


def normalize_log_weights(log_w, step=None):
    """Normalized linear weights from log weights; fails loudly on collapse."""
    m = float(np.max(log_w))
    if m == -np.inf:
        raise ParticleCollapseError("all particle weights are zero", step=step)
    w = np.exp(log_w - m)
    return w / np.sum(w)


def systematic_indices(weights, rng):
    """Systematic resampling: offspring indices with E[count_i] = N * w_i.

    One uniform positions an equally spaced comb over the cumulative weights;
    with exactly uniform weights every particle gets exactly one offspring.
    """
    w = np.asarray(weights, dtype=float)
    n = w.size
    positions = (rng.uniform() + np.arange(n)) / n
    cum = np.cumsum(w)
    cum[-1] = 1.0  # guard against roundoff at the top
    return np.searchsorted(cum, positions)


def incremental_weight_joint(particle_bundle, h_new, h_prev, kernel, t_y):
    """Reduced joint-space incremental weight: pooled-kernel ratio on the pre-move bundle.

    With a mutation kernel invariant for the new distribution and its
    time-reversal as backward kernel, everything else in the general form
    cancels and the weight is the bandwidth-tightening factor alone,
    evaluated before the move.  -inf when the tightened kernel kills the
    particle.
    """
    bundle = particle_bundle.bundle if hasattr(particle_bundle, "bundle") else particle_bundle
    log_new = float(kernel.with_bandwidth(h_new).log_pooled(t_y, bundle))
    if log_new == -np.inf:
        return -np.inf
    log_prev = float(kernel.with_bandwidth(h_prev).log_pooled(t_y, bundle))
    return log_new - log_prev


def incremental_weight_joint_general(log_pooled_new, log_prior_new, log_backward,
                                     log_pooled_prev, log_prior_prev, log_forward):
    """General augmented-space incremental weight, log scale.

    numerator   = pooled(h_new) * prior(theta_new) * L(theta_new -> theta_prev)
    denominator = pooled(h_prev) * prior(theta_prev) * M(theta_prev -> theta_new)

    This single expression is what both the marginal-estimate bookkeeping and
    the joint-density bookkeeping assemble; the simulator factors cancel
    between target and factorized mutation kernel and never appear.
    """
    num = (log_pooled_new + log_prior_new) + log_backward
    den = (log_pooled_prev + log_prior_prev) + log_forward
    if num == -np.inf and den == -np.inf:
        return -np.inf
    return num - den


def mixture_logdensity(prev_thetas, prev_log_weights, new_thetas, mutation, model):
    """log sum_j W_j M(theta_j -> theta'), vectorized over the new points.

    ``prev_log_weights`` are normalized log weights.  For the prior-independence
    mutation the mixture collapses to the prior density.
    """
    new_thetas = np.atleast_2d(np.asarray(new_thetas, dtype=float))
    if mutation.kind == "prior":
        return model.prior_logdensity_batch(new_thetas)
    prev_thetas = np.atleast_2d(np.asarray(prev_thetas, dtype=float))
    step = mutation.step_sd if mutation.step_sd is not None else model.prior_sd() / 2.0
    z = (new_thetas[np.newaxis, :, :] - prev_thetas[:, np.newaxis, :]) / step
    log_m = np.sum(-0.5 * z * z - np.log(step) - _LOG_SQRT_2PI, axis=-1)  # (N_prev, M)
    terms = prev_log_weights[:, np.newaxis] + log_m
    m = np.max(terms, axis=0)
    with np.errstate(invalid="ignore"):
        out = m + np.log(np.sum(np.exp(terms - m[np.newaxis, :]), axis=0))
    return np.where(np.isneginf(m), -np.inf, out)


def incremental_weight_backward(theta_new, log_num_new, prev_thetas, prev_weights,
                                mutation, model):
    """Backward-kernel (mixture-denominator) incremental weight, log scale.

    ``log_num_new`` is the fresh marginal estimate at theta_new (its bundle's
    pooled kernel times the prior).  The denominator is the weighted mutation
    mixture over the previous population — no simulator call and no estimate
    of the previous step's marginal is involved.
    """
    if log_num_new == -np.inf:
        return -np.inf
    prev_weights = np.asarray(prev_weights, dtype=float)
    with np.errstate(divide="ignore"):
        prev_logw = np.log(prev_weights)
    mix = float(mixture_logdensity(prev_thetas, prev_logw, theta_new, mutation, model)[0])
    assert mix > -np.inf, "mutation mixture vanished at an in-support point"
    return log_num_new - mix


class ParticleSystem:
    """Weighted particle population with its bandwidth-schedule position."""

    def __init__(self, thetas, bundles, log_weights, log_pooled, log_prior, k, schedule):
        self.thetas = thetas
        self.bundles = bundles
        self.log_weights = log_weights
        self.log_pooled = log_pooled
        self.log_prior = log_prior
        self.k = k
        self.schedule = schedule

    @property
    def n(self):
        return self.thetas.shape[0]

    def normalized_weights(self):
        return normalize_log_weights(self.log_weights, step=self.k)

    @property
    def ess(self):
        return ess(self.normalized_weights())

    def particles(self):
        log_num = self.log_pooled + self.log_prior
        return [Particle(self.thetas[i], self.bundles[i],
                         float(self.log_weights[i]), float(log_num[i]))
                for i in range(self.n)]

    def resample(self, indices):
        self.thetas = self.thetas[indices]
        self.bundles = self.bundles[indices]
        self.log_pooled = self.log_pooled[indices]
        self.log_prior = self.log_prior[indices]
        self.log_weights = np.full(self.n, -math.log(self.n))


def resample_systematic(system, rng):
    """Replace the population by N systematic offspring with uniform weights."""
    weights = system.normalized_weights()
    system.resample(systematic_indices(weights, rng))
    return system


def apply_particle_rejection(weights, threshold, rng):
    """Probabilistic rejection of low-weight particles, unbiased in expectation.

    Normalized weight w below c/N survives with probability w*N/c and is
    boosted to c/N; otherwise it becomes exactly zero (the particle is dead
    until the next resample replaces it).  E[new weight] = w either way.
    """
    w = np.asarray(weights, dtype=float)
    n = w.size
    cutoff = threshold / n
    u = rng.uniform(size=n)
    below = w < cutoff
    survive = u * cutoff < w
    return np.where(below, np.where(survive, cutoff, 0.0), w)


def run_smc(model, kernel, schedule, S, N, variant, mutation, seed, t_y, *,
            ess_threshold=0.5,
            on_mutation: Optional[Callable[[MutationRecord], None]] = None):
    """Run the SMC sampler; returns the final weighted population at h_n.

    Parameters
    ----------
    kernel : SmoothingKernel
        Supplies the kind and summary distance; its bandwidth is overridden
        by the schedule at every step.
    variant : SmcVariantSpec or str
        "joint-move" or "backward" (optionally with a rejection threshold).
    mutation : ProposalSpec
        MCMC proposal (joint-move) / mutation kernel (backward).
    ess_threshold : float in (0, 1]
        Resample whenever ESS < ess_threshold * N.
    """
    if isinstance(variant, str):
        variant = SmcVariantSpec(variant)
    if N < 2:
        raise ConfigurationError("need at least two particles")
    if S < 1:
        raise ConfigurationError("S must be >= 1")
    if not 0.0 < ess_threshold <= 1.0:
        raise ConfigurationError("ess_threshold must lie in (0, 1]")
    mutation = mutation.resolved(model)
    hs = schedule.values

    # step 1: prior draws, bundles, weights proportional to the pooled kernel
    rng_init = substream(seed, "smc", "init")
    thetas = model.prior_sample_batch(N, rng_init)
    bundles = model.simulate_batch(thetas, S, rng_init)
    kern = kernel.with_bandwidth(hs[0])
    log_pooled = np.asarray(kern.log_pooled(t_y, bundles), dtype=float)
    log_prior = np.asarray(model.prior_logdensity_batch(thetas), dtype=float)
    system = ParticleSystem(thetas, bundles, log_pooled.copy(), log_pooled, log_prior,
                            k=1, schedule=schedule)

    norm_w = system.normalized_weights()
    ess_trace = [ess(norm_w)]
    acceptance_trace = []
    resampled_steps = []

    for k in range(2, schedule.n_steps + 1):
        system.k = k
        h_new, h_prev = hs[k - 1], hs[k - 2]
        kern_new = kernel.with_bandwidth(h_new)

        if variant.kind == JOINT_MCMC_MOVE:
            norm_w = _joint_move_step(model, kern_new, t_y, S, seed, system, mutation,
                                      ess_threshold, k, h_new, h_prev,
                                      resampled_steps, acceptance_trace, on_mutation)
        else:
            norm_w = _backward_step(model, kern_new, t_y, S, seed, system, norm_w,
                                    mutation, ess_threshold, variant.rejection_threshold,
                                    k, resampled_steps)
        ess_trace.append(ess(norm_w))

    with np.errstate(divide="ignore"):
        log_norm = np.log(norm_w)
    return SmcOutput(
        thetas=system.thetas, weights=norm_w, log_weights=log_norm,
        ess_trace=np.asarray(ess_trace), acceptance_trace=np.asarray(acceptance_trace),
        resampled_steps=np.asarray(resampled_steps, dtype=np.int64),
        schedule=schedule, variant=variant.kind, seed=seed,
    )


def _propose_batch(mutation, thetas, model, rng):
    if mutation.kind == "prior":
        return model.prior_sample_batch(thetas.shape[0], rng)
    step = mutation.step_sd if mutation.step_sd is not None else model.prior_sd() / 2.0
    return thetas + rng.normal(0.0, step, size=thetas.shape)


def _log_q_batch(mutation, frm, to, model):
    """log q(frm_i -> to_i) per particle, matching ProposalSpec.logdensity exactly."""
    if mutation.kind == "prior":
        return np.asarray(model.prior_logdensity_batch(to), dtype=float)
    step = mutation.step_sd if mutation.step_sd is not None else model.prior_sd() / 2.0
    z = (np.asarray(to, dtype=float) - np.asarray(frm, dtype=float)) / step
    return np.sum(-0.5 * z * z - np.log(step) - _LOG_SQRT_2PI, axis=-1)


def _simulate_masked(model, thetas, mask, S, bundles, rng):
    """Fresh bundles for the in-support rows, written in place into ``bundles``."""
    if np.all(mask):
        bundles[:] = model.simulate_batch(thetas, S, rng)
    elif np.any(mask):
        bundles[mask] = model.simulate_batch(thetas[mask], S, rng)


def _joint_move_step(model, kern_new, t_y, S, seed, system, mutation,
                     ess_threshold, k, h_new, h_prev, resampled_steps,
                     acceptance_trace, on_mutation):
    n = system.n
    # reweight with the bandwidth-tightening factor on the pre-move bundles
    log_pooled_prev = system.log_pooled
    log_pooled_new = np.asarray(kern_new.log_pooled(t_y, system.bundles), dtype=float)
    with np.errstate(invalid="ignore"):
        system.log_weights = np.where(
            np.isneginf(log_pooled_new), -np.inf,
            system.log_weights + (log_pooled_new - log_pooled_prev))
    system.log_pooled = log_pooled_new
    norm_w = system.normalized_weights()

    if ess(norm_w) < ess_threshold * n:
        idx = systematic_indices(norm_w, substream(seed, "smc", "step", k, "resample"))
        system.resample(idx)
        log_pooled_prev = log_pooled_prev[idx]  # keep h_prev values aligned for records
        norm_w = np.full(n, 1.0 / n)
        resampled_steps.append(k)

    # mutate: one carried-bundle MH step per particle, invariant for the new target
    rng = substream(seed, "smc", "step", k, "mutate")
    log_num = system.log_pooled + system.log_prior
    theta_prop = _propose_batch(mutation, system.thetas, model, rng)
    lp_prior = np.asarray(model.prior_logdensity_batch(theta_prop), dtype=float)
    in_support = lp_prior > -np.inf
    bundles_prop = np.empty_like(system.bundles)
    _simulate_masked(model, theta_prop, in_support, S, bundles_prop, rng)
    log_pooled_prop = np.asarray(kern_new.log_pooled(t_y, bundles_prop), dtype=float)
    log_pooled_prop = np.where(in_support, log_pooled_prop, -np.inf)
    log_num_prop = log_pooled_prop + lp_prior

    log_q_fwd = _log_q_batch(mutation, system.thetas, theta_prop, model)
    log_q_back = _log_q_batch(mutation, theta_prop, system.thetas, model)
    with np.errstate(invalid="ignore"):
        log_ratio = (log_num_prop - log_num) + (log_q_back - log_q_fwd)
    log_ratio = np.where(np.isneginf(log_num_prop) & np.isneginf(log_num),
                         -np.inf, log_ratio)
    u = rng.uniform(size=n)
    with np.errstate(over="ignore"):
        accept = in_support & ((log_ratio >= 0.0) | (u < np.exp(log_ratio)))

    if on_mutation is not None:
        for i in range(n):
            if not in_support[i]:
                continue
            on_mutation(MutationRecord(
                step=k, index=i, h_new=h_new, h_prev=h_prev,
                theta_curr=system.thetas[i].copy(), bundle_curr=system.bundles[i].copy(),
                log_pooled_curr_new=float(system.log_pooled[i]),
                log_pooled_curr_prev=float(log_pooled_prev[i]),
                theta_prop=theta_prop[i].copy(), bundle_prop=bundles_prop[i].copy(),
                log_pooled_prop_new=float(log_pooled_prop[i]),
                log_ratio=float(log_ratio[i]), accepted=bool(accept[i])))

    system.thetas[accept] = theta_prop[accept]
    system.bundles[accept] = bundles_prop[accept]
    system.log_pooled[accept] = log_pooled_prop[accept]
    system.log_prior[accept] = lp_prior[accept]
    acceptance_trace.append(float(np.mean(accept)))
    return norm_w


def _backward_step(model, kern_new, t_y, S, seed, system, norm_w, mutation,
                   ess_threshold, rejection_threshold, k, resampled_steps):
    n = system.n
    # the pre-resample weighted population is the mixture reference
    prev_thetas = system.thetas.copy()
    with np.errstate(divide="ignore"):
        prev_logw = np.log(norm_w)

    if ess(norm_w) < ess_threshold * n:
        idx = systematic_indices(norm_w, substream(seed, "smc", "step", k, "resample"))
        system.resample(idx)
        resampled_steps.append(k)

    rng = substream(seed, "smc", "step", k, "mutate")
    new_thetas = _propose_batch(mutation, system.thetas, model, rng)
    log_prior_new = np.asarray(model.prior_logdensity_batch(new_thetas), dtype=float)
    in_support = log_prior_new > -np.inf
    _simulate_masked(model, new_thetas, in_support, S, system.bundles, rng)
    log_pooled_new = np.asarray(kern_new.log_pooled(t_y, system.bundles), dtype=float)
    log_pooled_new = np.where(in_support, log_pooled_new, -np.inf)

    log_num_new = log_pooled_new + log_prior_new
    log_mix = mixture_logdensity(prev_thetas, prev_logw, new_thetas, mutation, model)
    with np.errstate(invalid="ignore"):
        incr = np.where(np.isneginf(log_num_new), -np.inf, log_num_new - log_mix)
    system.thetas = new_thetas
    system.log_prior = log_prior_new
    system.log_pooled = log_pooled_new
    system.log_weights = system.log_weights + incr
    norm_w = system.normalized_weights()

    if rejection_threshold is not None:
        thresholded = apply_particle_rejection(
            norm_w, rejection_threshold, substream(seed, "smc", "step", k, "threshold"))
        with np.errstate(divide="ignore"):
            system.log_weights = np.log(thresholded)
        norm_w = system.normalized_weights()
    return norm_w
