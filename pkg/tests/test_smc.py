import math

import numpy as np
import pytest

from lfs.diagnostics import ks_2sample_permutation, weighted_moments
from lfs.errors import ConfigurationError, ParticleCollapseError
from lfs.kernels import SmoothingKernel
from lfs.mcmc import ProposalSpec
from lfs.models import CountingModel, NormalMeanModel
from lfs.rejection import run_rejection
from lfs.rng import substream
from lfs.smc import (BACKWARD_KERNEL, JOINT_MCMC_MOVE, BandwidthSchedule,
                     SmcVariantSpec, apply_particle_rejection, ess,
                     incremental_weight_backward, incremental_weight_joint,
                     incremental_weight_joint_general, mixture_logdensity,
                     run_smc, systematic_indices)


@pytest.fixture
def model():
    return NormalMeanModel()


@pytest.fixture
def kernel():
    return SmoothingKernel("gaussian", 1.0)


# -- schedules ---------------------------------------------------------------


def test_schedule_validation():
    BandwidthSchedule.geometric(2.0, 0.5, 6)
    BandwidthSchedule.explicit([3.0, 1.0, 0.2])
    with pytest.raises(ConfigurationError):
        BandwidthSchedule.explicit([1.0, 1.0])
    with pytest.raises(ConfigurationError):
        BandwidthSchedule.explicit([1.0, 2.0])
    with pytest.raises(ConfigurationError):
        BandwidthSchedule.explicit([1.0, -0.5])
    with pytest.raises(ConfigurationError):
        BandwidthSchedule.geometric(0.5, 2.0, 4)
    single = BandwidthSchedule.geometric(2.0, 0.4, 1)
    assert list(single.values) == [0.4]


def test_variant_spec_validation():
    SmcVariantSpec(BACKWARD_KERNEL, rejection_threshold=0.3)
    with pytest.raises(ConfigurationError):
        SmcVariantSpec(JOINT_MCMC_MOVE, rejection_threshold=0.3)
    with pytest.raises(ConfigurationError):
        SmcVariantSpec(BACKWARD_KERNEL, rejection_threshold=1.5)
    with pytest.raises(ConfigurationError):
        SmcVariantSpec("bogus")


# -- effective sample size and resampling ------------------------------------


def test_ess_values():
    assert ess(np.full(100, 0.01)) == pytest.approx(100.0)
    w = np.zeros(8)
    w[3] = 1.0
    assert ess(w) == pytest.approx(1.0)
    assert ess(np.array([0.5, 0.5, 0.0, 0.0])) == pytest.approx(2.0)


def test_systematic_equal_weights_identity():
    rng = substream(1, "resample")
    idx = systematic_indices(np.full(64, 1.0 / 64), rng)
    assert np.array_equal(idx, np.arange(64))


def test_systematic_degenerate():
    rng = substream(2, "resample")
    w = np.zeros(10)
    w[4] = 1.0
    assert np.all(systematic_indices(w, rng) == 4)


def test_systematic_unbiased_offspring_counts():
    rng = substream(3, "resample")
    w = rng.dirichlet(np.ones(12))
    n = w.size
    counts = np.zeros((10_000, n))
    for r in range(counts.shape[0]):
        idx = systematic_indices(w, rng)
        counts[r] = np.bincount(idx, minlength=n)
    mean_counts = counts.mean(axis=0)
    se = counts.std(axis=0, ddof=1) / math.sqrt(counts.shape[0])
    assert np.all(np.abs(mean_counts - n * w) <= 3.0 * np.maximum(se, 1e-12))


# -- incremental weights ------------------------------------------------------


def test_joint_weight_zero_when_bandwidth_unchanged(kernel):
    bundle = np.array([[0.3], [1.1]])
    assert incremental_weight_joint(bundle, 0.8, 0.8, kernel, 0.0) == 0.0


def test_joint_weight_uniform_rescaling():
    kernel = SmoothingKernel("uniform", 1.0)
    bundle = np.array([[0.1], [-0.2]])  # inside both supports
    w = incremental_weight_joint(bundle, 0.5, 1.0, kernel, 0.0)
    assert w == pytest.approx(math.log(1.0 / 0.5), abs=1e-12)


def test_joint_weight_killed_by_tightening():
    kernel = SmoothingKernel("uniform", 1.0)
    bundle = np.array([[0.8], [0.9]])  # in (0.5, 1.0]
    assert incremental_weight_joint(bundle, 0.5, 1.0, kernel, 0.0) == -np.inf


def test_joint_general_double_neginf():
    assert incremental_weight_joint_general(-np.inf, 0.0, 0.0, -np.inf, 0.0, 0.0) == -np.inf
    got = incremental_weight_joint_general(-1.0, -2.0, -0.5, -1.5, -2.5, -0.25)
    assert got == pytest.approx(((-1.0 + -2.0) + -0.5) - ((-1.5 + -2.5) + -0.25))


def test_backward_weight_single_parent(model):
    mutation = ProposalSpec("random-walk", 0.5)
    theta_new = np.array([0.4])
    prev = np.array([[0.1]])
    m = mutation.logdensity(prev[0], theta_new, model)
    p = -1.7
    w = incremental_weight_backward(theta_new, p, prev, np.array([1.0]), mutation, model)
    assert w == pytest.approx(p - m, abs=1e-12)


def test_backward_weight_two_parent_mixture(model):
    mutation = ProposalSpec("random-walk", 0.7)
    theta_new = np.array([0.0])
    prev = np.array([[-0.3], [0.5]])
    m1 = math.exp(mutation.logdensity(prev[0], theta_new, model))
    m2 = math.exp(mutation.logdensity(prev[1], theta_new, model))
    p = -0.9
    w = incremental_weight_backward(theta_new, p, prev, np.array([0.5, 0.5]),
                                    mutation, model)
    assert w == pytest.approx(p - math.log(0.5 * m1 + 0.5 * m2), abs=1e-10)


def test_backward_weight_neginf_numerator(model):
    mutation = ProposalSpec("random-walk", 0.5)
    w = incremental_weight_backward(np.array([0.0]), -np.inf, np.array([[0.0]]),
                                    np.array([1.0]), mutation, model)
    assert w == -np.inf


def test_mixture_prior_mutation(model):
    mutation = ProposalSpec("prior")
    new = np.array([[0.3], [5.0]])
    got = mixture_logdensity(np.array([[0.0]]), np.array([0.0]), new, mutation, model)
    expected = model.prior_logdensity_batch(new)
    assert np.array_equal(got, expected)


# -- particle rejection thresholding -----------------------------------------


def test_particle_rejection_expected_weight():
    rng = substream(4, "thresh")
    n = 10
    w = np.array([0.30, 0.25, 0.20, 0.10, 0.05,
                  0.04, 0.03, 0.02, 0.006, 0.004])
    w = w / w.sum()
    c = 0.5
    cutoff = c / n
    acc = np.zeros(n)
    reps = 20_000
    for _ in range(reps):
        acc += apply_particle_rejection(w, c, rng)
    mean_w = acc / reps
    below = w < cutoff
    # unbiasedness in expectation, and untouched above the threshold
    assert np.allclose(mean_w[~below], w[~below])
    se = np.sqrt(w[below] * cutoff / reps)  # Bernoulli(w/cutoff) * cutoff scale
    assert np.all(np.abs(mean_w[below] - w[below]) < 4.0 * se + 1e-12)


def test_particle_rejection_values():
    rng = substream(5, "thresh")
    w = np.array([0.5, 0.3, 0.15, 0.04, 0.01])
    out = apply_particle_rejection(w, 0.5, rng)
    cutoff = 0.5 / w.size
    for orig, new in zip(w, out):
        if orig >= cutoff:
            assert new == orig
        else:
            assert new in (0.0, cutoff)


# -- full runs ----------------------------------------------------------------


def test_joint_move_reference_run(model, kernel):
    schedule = BandwidthSchedule.geometric(2.0, 0.25, 15)
    out = run_smc(model, kernel, schedule, 1, 2000, JOINT_MCMC_MOVE, ProposalSpec(),
                  seed=3, t_y=0.0)
    mean, var = weighted_moments(out.thetas, out.weights)
    oracle_var = 1.0 / (1.0 + 1.0 / (1.0 + 0.25**2))  # 0.51515...
    se = math.sqrt(var[0] / out.ess_trace[-1])
    assert abs(mean[0]) < 3.0 * se
    assert var[0] == pytest.approx(oracle_var, rel=0.07)
    assert np.all(out.ess_trace >= 1.0) and np.all(out.ess_trace <= 2000.0)
    assert out.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_single_step_schedule_matches_rejection_target(model, kernel):
    # a one-step run is a prior-weighted importance sample with weights
    # proportional to the pooled kernel; resampling it must be
    # indistinguishable from the rejection sampler's output
    schedule = BandwidthSchedule.geometric(2.0, 1.0, 1)
    out = run_smc(model, kernel, schedule, 1, 10_000, JOINT_MCMC_MOVE, ProposalSpec(),
                  seed=6, t_y=0.0)
    idx = systematic_indices(out.weights, substream(7, "resample"))
    smc_draws = out.thetas[idx, 0]
    rej = run_rejection(model, kernel, 0.0, 1, 10_000, seed=8)
    stat, pval = ks_2sample_permutation(smc_draws, rej.thetas[:, 0],
                                        substream(9, "perm"), n_perm=499)
    assert pval > 0.01


def test_backward_agrees_with_joint(model, kernel):
    schedule = BandwidthSchedule.geometric(2.0, 0.5, 10)
    stats = {}
    for variant in (JOINT_MCMC_MOVE, BACKWARD_KERNEL):
        means = []
        for rep in range(5):
            out = run_smc(model, kernel, schedule, 1, 1000, variant, ProposalSpec(),
                          seed=100 + rep, t_y=0.0)
            means.append(weighted_moments(out.thetas, out.weights)[0][0])
        means = np.array(means)
        stats[variant] = (means.mean(), means.std(ddof=1) / math.sqrt(means.size))
    gap = abs(stats[JOINT_MCMC_MOVE][0] - stats[BACKWARD_KERNEL][0])
    tol = 3.0 * math.hypot(stats[JOINT_MCMC_MOVE][1], stats[BACKWARD_KERNEL][1])
    assert gap < tol


def test_backward_simulator_call_counts(model, kernel):
    counting = CountingModel(model)
    schedule = BandwidthSchedule.geometric(2.0, 0.5, 6)
    n, s = 200, 3
    run_smc(counting, kernel, schedule, s, n, BACKWARD_KERNEL, ProposalSpec(),
            seed=10, t_y=0.0)
    # exactly S summaries per particle per step (including initialization),
    # nothing else — the mixture denominator never touches the simulator
    assert counting.n_summaries == n * s * schedule.n_steps
    assert counting.n_calls == n * schedule.n_steps
    before = counting.n_summaries
    incremental_weight_backward(np.array([0.1]), -1.0, np.array([[0.0]]),
                                np.array([1.0]), ProposalSpec("random-walk", 0.5),
                                counting)
    assert counting.n_summaries == before


def test_bandwidth_tightening_shrinks_support_sets(model):
    kernel = SmoothingKernel("uniform", 1.0)
    rng = substream(11, "fixed")
    bundles = model.simulate_batch(model.prior_sample_batch(400, rng), 2, rng)
    alive_prev = None
    for h in (2.0, 1.4, 0.9, 0.5, 0.2):
        log_pooled = kernel.with_bandwidth(h).log_pooled(0.0, bundles)
        alive = set(np.flatnonzero(log_pooled > -np.inf))
        if alive_prev is not None:
            assert alive.issubset(alive_prev)
        alive_prev = alive


def test_total_collapse_raises(model):
    kernel = SmoothingKernel("uniform", 1.0)
    schedule = BandwidthSchedule.explicit([3.0, 1e-9])
    with pytest.raises(ParticleCollapseError) as err:
        run_smc(model, kernel, schedule, 1, 50, JOINT_MCMC_MOVE, ProposalSpec(),
                seed=12, t_y=0.0)
    assert err.value.step == 2


def test_backward_with_threshold_still_targets(model, kernel):
    schedule = BandwidthSchedule.geometric(2.0, 0.5, 8)
    out = run_smc(model, kernel, schedule, 1, 1500,
                  SmcVariantSpec(BACKWARD_KERNEL, rejection_threshold=0.2),
                  ProposalSpec(), seed=13, t_y=0.0)
    mean, var = weighted_moments(out.thetas, out.weights)
    oracle_var = 1.0 / (1.0 + 1.0 / (1.0 + 0.25))
    se = math.sqrt(var[0] / out.ess_trace[-1])
    assert abs(mean[0]) < 4.0 * se
    assert var[0] == pytest.approx(oracle_var, rel=0.12)


def test_particle_system_views_and_resample(model, kernel):
    from lfs.smc import ParticleSystem, resample_systematic

    rng = substream(20, "sys")
    thetas = model.prior_sample_batch(6, rng)
    bundles = model.simulate_batch(thetas, 2, rng)
    log_pooled = np.asarray(kernel.log_pooled(0.0, bundles))
    log_prior = model.prior_logdensity_batch(thetas)
    log_w = np.log(np.array([0.4, 0.3, 0.1, 0.1, 0.05, 0.05]))
    system = ParticleSystem(thetas, bundles, log_w, log_pooled, log_prior,
                            k=1, schedule=BandwidthSchedule.explicit([1.0]))
    parts = system.particles()
    assert len(parts) == 6
    assert parts[2].log_num == pytest.approx(log_pooled[2] + log_prior[2])
    assert 1.0 <= system.ess <= 6.0
    resample_systematic(system, substream(21, "sys"))
    assert np.allclose(system.normalized_weights(), 1.0 / 6.0)
    # offspring carry their donors' cached values
    recomputed = np.asarray(kernel.log_pooled(0.0, system.bundles))
    assert np.allclose(system.log_pooled, recomputed)


def test_run_validation(model, kernel):
    schedule = BandwidthSchedule.geometric(2.0, 0.5, 4)
    with pytest.raises(ConfigurationError):
        run_smc(model, kernel, schedule, 1, 1, JOINT_MCMC_MOVE, ProposalSpec(),
                seed=1, t_y=0.0)
    with pytest.raises(ConfigurationError):
        run_smc(model, kernel, schedule, 0, 10, JOINT_MCMC_MOVE, ProposalSpec(),
                seed=1, t_y=0.0)
    with pytest.raises(ConfigurationError):
        run_smc(model, kernel, schedule, 1, 10, JOINT_MCMC_MOVE, ProposalSpec(),
                seed=1, t_y=0.0, ess_threshold=1.5)
