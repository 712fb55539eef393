import math

import numpy as np
import pytest
from scipy.stats import norm

from lflab.analytic import GaussianLaw, bimodal_pair, gaussian_fi, lmc_gaussian_trajectory, moment_bounds, quad_divergences
from lflab.core import Constant, InitSpec, LabError, RunConfig
from lflab.diagnostics import (
    EnsembleSnapshot,
    empirical_moment,
    ensemble_run,
    gaussian_score,
    grad_second_moment,
    grid_divergences,
    kde_grid_density,
    mean_ci,
    page_bias,
    score_fi_estimate,
)
from lflab.potentials import builtin_potential
from lflab.samplers import run_chain


def _snap(x):
    x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
    return EnsembleSnapshot(0, 0.0, x)


def test_ensemble_single_chain_is_run_chain(quadratic):
    cfg = RunConfig(potential=quadratic, schedule=Constant(0.05), N=30, n_chains=1, seed=9, init=InitSpec("gaussian", 1.0, 2.0))
    snaps = ensemble_run(cfg, [0, 10, 30])
    traj = run_chain(cfg, [0, 10, 30])
    for s, t in zip(snaps, traj):
        np.testing.assert_array_equal(s.positions, t.x)


def test_ensemble_point_init_without_steps(quadratic):
    cfg = RunConfig(potential=quadratic, schedule=Constant(0.05), N=0, n_chains=7, init=InitSpec("point", -1.25))
    (snap,) = ensemble_run(cfg)
    np.testing.assert_array_equal(snap.positions, -1.25)


def test_ensemble_variance_matches_gaussian_chain(quadratic):
    n = 100_000
    cfg = RunConfig(potential=quadratic, schedule=Constant(0.05), N=100, n_chains=n, seed=11, init=InitSpec("gaussian", 0.0, 4.0))
    snap = ensemble_run(cfg, [100])[0]
    var = lmc_gaussian_trajectory(1.0, 0.05, 100, GaussianLaw(0.0, 4.0)).variances[100]
    assert abs(snap.positions.var() - var) <= 3 * var * math.sqrt(2 / n)


def test_ensemble_is_independent_of_worker_count():
    fs = builtin_potential("finite_sum_quadratic", d=2, centers=(1.0, -1.0, 0.0))
    cfg = RunConfig(potential=fs, variant="vr_lmc", p=0.3, schedule=Constant(0.02), N=20, n_chains=101, seed=2)
    a = ensemble_run(cfg, [5, 20], workers=1)
    b = ensemble_run(cfg, [5, 20], workers=3)
    for sa, sb in zip(a, b):
        np.testing.assert_array_equal(sa.positions, sb.positions)
        np.testing.assert_array_equal(sa.g, sb.g)
        np.testing.assert_array_equal(sa.evals, sb.evals)


# --- estimators ----------------------------------------------------------------


def test_mean_ci():
    ci = mean_ci([1.0, 1.0, 1.0])
    assert (ci.value, ci.std_error, ci.n_samples) == (1.0, 0.0, 3)
    assert ci.covers(1.0) and not ci.covers(1.1)
    with pytest.raises(ValueError):
        mean_ci([])


def test_empirical_moment_examples():
    zero = empirical_moment(_snap(np.zeros(5)), 2)
    assert (zero.value, zero.std_error) == (0.0, 0.0)
    pm = empirical_moment(_snap([1.0, -1.0]), 2)
    assert (pm.value, pm.std_error) == (1.0, 0.0)
    assert empirical_moment(_snap([2.0, -2.0]), 4).value == 16.0
    with pytest.raises(ValueError):
        empirical_moment(_snap([1.0]), 3)


def test_score_fi_examples():
    x = np.random.default_rng(0).standard_normal((1000, 1))
    s = gaussian_score(0.0, 1.0)
    assert score_fi_estimate(_snap(x), s, s).value == 0.0
    z = np.sqrt(2.0) * np.random.default_rng(1).standard_normal((1_000_000, 1))
    est = score_fi_estimate(_snap(z), gaussian_score(0.0, 2.0), gaussian_score(0.0, 1.0))
    assert est.covers(0.5)


def _sample_mixture(mix, n, rng):
    comp = rng.choice(len(mix.weights), size=n, p=mix.weights)
    return np.asarray(mix.means)[comp] + rng.standard_normal(n)


def test_score_fi_on_bimodal_pair_matches_quadrature():
    pi, mu = bimodal_pair(3.0)
    x = _sample_mixture(mu, 1_000_000, np.random.default_rng(4)).reshape(-1, 1)
    est = score_fi_estimate(
        _snap(x),
        lambda y: mu.logdensity_and_score(y[:, 0])[1],
        lambda y: pi.logdensity_and_score(y[:, 0])[1],
    )
    assert est.covers(quad_divergences(mu, pi).fi)


def test_grad_second_moment_and_lemma13(quadratic):
    flat = builtin_potential("quadratic", d=1, lam=1.0)
    assert grad_second_moment(_snap(np.zeros(10)), flat).value == 0.0
    z = np.sqrt(2.0) * np.random.default_rng(2).standard_normal((200_000, 1))
    est = grad_second_moment(_snap(z), quadratic)
    assert est.covers(2.0)
    assert 2.0 <= 0.5 + 2 * 1 * 1.0


def test_lemma13_on_bimodal_samples():
    pi, mu = bimodal_pair(3.0)
    x = _sample_mixture(mu, 500_000, np.random.default_rng(6)).reshape(-1, 1)
    lhs = grad_second_moment(_snap(x), pi)
    fi = score_fi_estimate(
        _snap(x),
        lambda y: mu.logdensity_and_score(y[:, 0])[1],
        lambda y: pi.logdensity_and_score(y[:, 0])[1],
    )
    L = 1 + 3.0**2
    assert lhs.value - 3 * lhs.std_error <= fi.value + 3 * fi.std_error + 2 * L


def test_page_bias_requires_running_gradient():
    fs = builtin_potential("finite_sum_quadratic", d=1)
    with pytest.raises(ValueError):
        page_bias(_snap([0.0]), fs)


def test_page_bias_is_zero_within_three_se():
    fs = builtin_potential("finite_sum_quadratic", d=1, centers=tuple(c - 4.5 for c in range(10)), curvatures=tuple(0.5 + 0.1 * i for i in range(10)))
    cfg = RunConfig(potential=fs, variant="vr_lmc", p=0.1, schedule=Constant(0.02), N=30, n_chains=50_000, seed=8)
    for snap in ensemble_run(cfg, [10, 30]):
        (ci,) = page_bias(snap, fs)
        assert ci.covers(0.0)


def test_moment_bounds_hold_at_every_pseudo_huber_snapshot():
    ph = builtin_potential("pseudo_huber", d=1)
    g = ph.growth
    h = min(g.a / (4 * g.m**2), 1.0) / 2
    steps = [int(round(t / h)) for t in (0.5, 1.0, 2.0)]
    cfg = RunConfig(potential=ph, schedule=Constant(h), N=max(steps), n_chains=50_000, seed=3, init=InitSpec("point", 0.0))
    for snap in ensemble_run(cfg, steps):
        second, fourth = moment_bounds(g.a, g.b, g.gamma, 1, 0.0, 0.0, snap.step, h, m=g.m)
        m2, m4 = empirical_moment(snap, 2), empirical_moment(snap, 4)
        assert m2.value <= second + 3 * m2.std_error
        assert m4.value <= fourth + 3 * m4.std_error


def test_score_fi_coverage_over_seeds(quadratic):
    """At every snapshot the 3 se interval brackets the exact FI for at least 99 of 100 seeds."""
    steps = [0, 10, 50, 100]
    traj = lmc_gaussian_trajectory(1.0, 0.05, 100, GaussianLaw(0.0, 4.0))
    hits = np.zeros(len(steps), dtype=int)
    for seed in range(100):
        cfg = RunConfig(potential=quadratic, schedule=Constant(0.05), N=100, n_chains=10_000, seed=seed, init=InitSpec("gaussian", 0.0, 4.0))
        for j, snap in enumerate(ensemble_run(cfg, steps)):
            law = traj.law(snap.step)
            est = score_fi_estimate(snap, gaussian_score(law.m, law.var), gaussian_score(0.0, 1.0))
            hits[j] += est.covers(gaussian_fi(law, 1.0))
    assert hits.min() >= 99, hits


# --- KDE diagnostics ------------------------------------------------------------


def test_kde_recovers_standard_normal():
    grid = np.linspace(-8, 8, 2001)
    x = np.random.default_rng(0).standard_normal(100_000)
    dens = kde_grid_density(x, grid)
    div = grid_divergences(dens, norm.pdf(grid), grid)
    assert div.approximate
    assert div.kl <= 0.01
    assert div.tv <= 0.05


def test_kde_needs_enough_samples():
    with pytest.raises(LabError):
        kde_grid_density(np.zeros(99), np.linspace(-1, 1, 5))


def test_grid_divergences_of_identical_densities():
    grid = np.linspace(-3, 3, 101)
    div = grid_divergences(np.ones_like(grid), np.ones_like(grid), grid)
    assert (div.fi, div.kl, div.tv) == (0.0, 0.0, 0.0)
