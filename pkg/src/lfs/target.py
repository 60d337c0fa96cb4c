"""Unnormalized target-density computations shared by every sampler.

Two readings of the same quantity live here.  The joint reading is the
augmented density over (theta, bundle) with the simulator factor deliberately
omitted: every implemented algorithm proposes bundles from the simulator
itself, so the intractable product of data densities cancels between target
and proposal, and what survives in every acceptance ratio and importance
weight is exactly ``log(pooled kernel) + log(prior)``.  The marginal reading
is the Monte Carlo estimate of the smoothed marginal posterior built from a
fresh bundle — the same expression evaluated on a bundle the caller did not
choose.  Having one implementation for both is what makes the joint-target
and marginal-target bookkeepings of the samplers bit-identical.

All density work is in log space with -inf for exact zeros: compactly
supported kernels produce genuine zeros, and products of many densities
underflow in linear space.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass
class AugmentedState:
    """A parameter with its simulated bundle and cached log[pooled kernel x prior].

    ``log_num`` is only meaningful at the bandwidth it was computed at;
    holders (chains, particle systems) refresh it whenever their bandwidth
    changes.  -inf means every summary in the bundle missed the kernel's
    support.
    """

    theta: np.ndarray
    bundle: np.ndarray
    log_num: float


def joint_logdensity_unnorm(theta, bundle, t_y, kernel, model):
    """log[pooled kernel x prior] at (theta, bundle); -inf signals zero mass."""
    return float(kernel.log_pooled(t_y, bundle)) + float(model.prior_logdensity(theta))


def marginal_logestimate(theta, S, t_y, kernel, model, rng):
    """Unbiased Monte Carlo estimate of the unnormalized smoothed marginal.

    Simulates a fresh bundle of S summaries at theta and returns
    ``(log estimate, bundle)``; the bundle is returned so samplers can keep it
    as state.  The estimate is unbiased for every S >= 1; its variance falls
    as S grows.
    """
    if model.prior_logdensity(theta) == -np.inf:
        raise DomainError(f"theta={np.asarray(theta)} outside the prior's support")
    bundle = model.simulate(theta, S, rng)
    return joint_logdensity_unnorm(theta, bundle, t_y, kernel, model), bundle
