import math

import numpy as np
import pytest

from lflab.analytic import lmc_gaussian_trajectory, GaussianLaw
from lflab.core import Constant, ConfigError, DivergenceError, InitSpec, PowerDecay, RunConfig, schedule_elapsed
from lflab.oracles import ExactOracle, GaussianNoiseOracle
from lflab.potentials import Potential, builtin_potential
from lflab.samplers import (
    averaged_draw,
    initial_state,
    interpolate,
    lmc_step,
    lmc_update,
    run_block,
    run_chain,
    sg_lmc_step,
    vr_lmc_step,
)
from oracle_values import LMC_STEP_XI_ONE, STATIONARY_VAR_H005


class Flat(Potential):
    """grad V = 0 everywhere (pure Brownian motion)."""

    def value(self, x):
        return np.zeros(np.shape(x)[:-1])

    def grad(self, x):
        return np.zeros_like(np.asarray(x, dtype=np.float64))


FLAT = Flat(lipschitz_grad=1.0)


def test_lmc_update_examples():
    assert lmc_update(1.0, 1.0, 0.1, 0.0) == pytest.approx(0.9, rel=1e-15)
    assert lmc_update(1.0, 1.0, 0.1, 1.0) == pytest.approx(LMC_STEP_XI_ONE, rel=1e-15)


def test_lmc_step_increment_variance():
    state = initial_state(np.zeros((1_000_000, 1)), seed=4)
    h = 0.1
    new = lmc_step(state, FLAT, h)
    assert new.k == 1 and new.t == h
    assert new.x.var() == pytest.approx(2 * h, rel=0.01)


def test_lmc_step_reports_divergence():
    class Exploding(Potential):
        def grad(self, x):
            return np.full_like(x, np.inf)

    with pytest.raises(DivergenceError) as info:
        lmc_step(initial_state(np.zeros((3, 1))), Exploding(), 0.1)
    assert info.value.step == 0 and info.value.chain == 0


def test_interpolate_examples(quadratic):
    state = initial_state(np.array([[2.0]]), seed=1)
    np.testing.assert_array_equal(interpolate(state, quadratic, 0.1, 0.0), state.x)
    with pytest.raises(ValueError):
        interpolate(state, quadratic, 0.1, 0.2)
    # tau = h reproduces the full step exactly (same drift noise)
    np.testing.assert_array_equal(interpolate(state, quadratic, 0.1, 0.1), lmc_step(state, quadratic, 0.1).x)


def test_interpolate_drift_only(quadratic, monkeypatch):
    import lflab.samplers as sm

    monkeypatch.setattr(sm, "drift_noise", lambda state: np.zeros_like(state.x))
    state = initial_state(np.array([[2.0]]))
    assert interpolate(state, quadratic, 0.1, 0.05)[0, 0] == pytest.approx(1.9, rel=1e-15)


def test_interpolate_full_offset_matches_step_in_law(quadratic):
    n = 100_000
    x0 = np.random.default_rng(0).standard_normal((n, 1)) * 2
    state = initial_state(x0, seed=3)
    a = interpolate(state, quadratic, 0.05, 0.05)
    b = lmc_step(initial_state(x0, seed=99), quadratic, 0.05).x
    se = math.sqrt(2 * 4 / n)
    assert abs(a.mean() - b.mean()) <= 3 * se
    assert abs(a.var() - b.var()) <= 3 * math.sqrt(2 * 2 * 4.0**2 / n)


# --- averaged draws ----------------------------------------------------------


def test_averaged_draw_single_step_uses_step_zero(quadratic):
    cfg = RunConfig(potential=quadratic, schedule=Constant(0.05), N=1, n_chains=50, seed=1, init=InitSpec("point", 1.0))
    draw = averaged_draw(cfg)
    assert np.all(draw.k == 0)
    assert np.all((draw.tau >= 0) & (draw.tau <= 0.05))


def test_averaged_draw_flat_variance():
    N, h = 20, 0.05
    cfg = RunConfig(potential=FLAT, schedule=Constant(h), N=N, n_chains=1_000_000, seed=5)
    draw = averaged_draw(cfg)
    assert draw.points.var() == pytest.approx(N * h, rel=0.01)


def test_averaged_draw_rejects_decaying_schedule(quadratic):
    cfg = RunConfig(potential=quadratic, schedule=PowerDecay(0.1, 1.0), N=10)
    with pytest.raises(ConfigError):
        averaged_draw(cfg)


def test_averaged_draw_matches_run_chain_positions(quadratic):
    """A draw at time U equals the interpolation of that chain's own trajectory."""
    cfg = RunConfig(potential=quadratic, schedule=Constant(0.05), N=30, n_chains=8, seed=2, init=InitSpec("gaussian", 0.0, 4.0))
    draw = averaged_draw(cfg)
    for j in range(8):
        traj = run_chain(cfg, chain_index=j)
        st = traj[int(draw.k[j])]
        np.testing.assert_array_equal(draw.points[j], interpolate(st, quadratic, 0.05, draw.tau[j])[0])


# --- stochastic gradients ----------------------------------------------------


def test_sg_with_exact_oracle_is_lmc(quadratic):
    s0 = initial_state(np.linspace(-2, 2, 64).reshape(-1, 1), seed=7)
    a, b = s0, s0
    oracle = ExactOracle(quadratic)
    for _ in range(25):
        a = lmc_step(a, quadratic, 0.05)
        b = sg_lmc_step(b, oracle, 0.05)
    np.testing.assert_array_equal(a.x, b.x)


def test_sg_gaussian_oracle_variance_recursion(quadratic):
    h, v, N, n = 0.05, 0.5, 40, 100_000
    cfg = RunConfig(potential=quadratic, variant="sg_lmc", schedule=Constant(h), N=N, n_chains=n, seed=3, noise_var=v, bias=0.1, init=InitSpec("point", 2.0))
    x = run_block(cfg, np.arange(n))[0].x[:, 0]
    var = 0.0
    m = 2.0
    for _ in range(N):
        var = (1 - h) ** 2 * var + h * h * v + 2 * h
        m = (1 - h) * m - h * 0.1
    assert abs(x.var() - var) <= 3 * var * math.sqrt(2 / n)
    assert abs(x.mean() - m) <= 3 * math.sqrt(var / n)


# --- PAGE --------------------------------------------------------------------


def test_page_correction_example():
    fs = builtin_potential("finite_sum_quadratic", d=1, centers=(1.0, -1.0))
    # grad f_i(x') - grad f_i(x) with x = 2, x' = 1, i = 0 (component c = 1)
    g = 2.0 + fs.component_grad(0, np.array([1.0]))[0] - fs.component_grad(0, np.array([2.0]))[0]
    assert g == 1.0 == fs.grad(np.array([1.0]))[0]


def test_vr_with_p_one_is_lmc():
    fs = builtin_potential("finite_sum_quadratic", d=2, centers=(1.0, -1.0, 0.5), curvatures=(1.0, 2.0, 0.5))
    x0 = np.random.default_rng(1).standard_normal((32, 2))
    a = initial_state(x0, seed=9)
    b = initial_state(x0, seed=9, g=fs.grad(x0))
    for _ in range(30):
        a = lmc_step(a, fs, 0.05)
        b = vr_lmc_step(b, fs, 0.05, 1.0)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(b.g, fs.grad(b.x))


def test_vr_cost_accounting():
    fs = builtin_potential("finite_sum_quadratic", d=1, centers=tuple(np.arange(10.0)))
    n = 50_000
    cfg = RunConfig(potential=fs, variant="vr_lmc", p=0.1, schedule=Constant(0.05), N=20, n_chains=n, seed=4)
    st = run_block(cfg, np.arange(n))[0]
    per_step = (st.evals - 10) / 20
    expected = 0.1 * 10 + 0.9 * 2
    assert per_step.mean() == pytest.approx(expected, abs=4 * per_step.std() / math.sqrt(n))


def test_vr_requires_state_gradient():
    fs = builtin_potential("finite_sum_quadratic", d=1)
    with pytest.raises(ValueError):
        vr_lmc_step(initial_state(np.zeros((1, 1))), fs, 0.05, 0.5)


# --- degeneracy lattice and run_chain ----------------------------------------


@pytest.mark.parametrize("variant,extra", [("sg_lmc", {}), ("gs_lmc", {"eta": 0.0}), ("vr_lmc", {"p": 1.0})])
def test_degenerate_variants_replay_lmc(variant, extra):
    fs = builtin_potential("finite_sum_quadratic", d=1, centers=(0.5, -0.5))
    common = dict(potential=fs, schedule=Constant(0.05), N=50, n_chains=16, seed=21, init=InitSpec("gaussian", 1.0, 2.0))
    base = run_block(RunConfig(variant="lmc", **common), np.arange(16), range(51))
    other = run_block(RunConfig(variant=variant, **common, **extra), np.arange(16), range(51))
    for a, b in zip(base, other):
        np.testing.assert_array_equal(a.x, b.x)


def test_run_chain_zero_steps(quadratic):
    cfg = RunConfig(potential=quadratic, schedule=Constant(0.05), N=0, init=InitSpec("point", 1.5))
    traj = run_chain(cfg)
    assert len(traj) == 1 and traj[0].x[0, 0] == 1.5


def test_run_chain_is_deterministic(quadratic):
    cfg = RunConfig(potential=quadratic, schedule=PowerDecay(0.1, 0.75), N=40, seed=3, init=InitSpec("gaussian", 0.0, 1.0))
    a = run_chain(cfg)
    b = run_chain(cfg)
    for sa, sb in zip(a, b):
        np.testing.assert_array_equal(sa.x, sb.x)
    assert all(s.t == schedule_elapsed(cfg.schedule, s.k) for s in a)


def test_run_chain_row_matches_ensemble_row(quadratic):
    cfg = RunConfig(potential=quadratic, schedule=Constant(0.05), N=20, n_chains=10, seed=3, init=InitSpec("gaussian", 0.0, 1.0))
    ens = run_block(cfg, np.arange(10))[0]
    single = run_chain(cfg, [20], chain_index=6)[0]
    np.testing.assert_array_equal(ens.x[6], single.x[0])


def test_terminal_variance_reaches_fixed_point(quadratic):
    n = 100_000
    cfg = RunConfig(potential=quadratic, schedule=Constant(0.05), N=200, n_chains=n, seed=3, init=InitSpec("point", 3.0))
    x = run_block(cfg, np.arange(n))[0].x[:, 0]
    exact = lmc_gaussian_trajectory(1.0, 0.05, 200, GaussianLaw(3.0, 1e-300)).variances[-1]
    assert exact == pytest.approx(STATIONARY_VAR_H005, rel=1e-8)
    assert abs(x.var() - STATIONARY_VAR_H005) <= 3 * STATIONARY_VAR_H005 * math.sqrt(2 / n)


def test_vr_variance_recursion_heterogeneous():
    """sigma_{k+1}^2 <= (1-p) sigma_k^2 + (1-p) L^2 E|dx|^2 within 3 se at every step."""
    fs = builtin_potential(
        "finite_sum_quadratic", d=1, centers=tuple(c - 4.5 for c in range(10)), curvatures=tuple(0.5 + 0.1 * i for i in range(10))
    )
    p, h, N, n = 0.1, 0.02, 25, 100_000
    cfg = RunConfig(potential=fs, variant="vr_lmc", p=p, schedule=Constant(h), N=N, n_chains=n, seed=5, init=InitSpec("gaussian", 0.0, 4.0))
    states = run_block(cfg, np.arange(n), range(N + 1))
    L = fs.lipschitz_grad
    for a, b in zip(states[:-1], states[1:]):
        e0 = np.sum((a.g - fs.grad(a.x)) ** 2, axis=1)
        e1 = np.sum((b.g - fs.grad(b.x)) ** 2, axis=1)
        D = e1 - (1 - p) * e0 - (1 - p) * L**2 * np.sum((b.x - a.x) ** 2, axis=1)
        assert D.mean() <= 3 * D.std(ddof=1) / math.sqrt(n)
        bias = (b.g - fs.grad(b.x))[:, 0]
        assert abs(bias.mean()) <= 3 * bias.std(ddof=1) / math.sqrt(n)
    # the recursion is not vacuous: the estimate really is noisy
    assert e1.mean() > 1e-4


def test_gaussian_noise_oracle_independent_of_drift_noise(quadratic):
    """The oracle's noise lives in its own slots, so the Brownian part is shared with LMC."""
    oracle = GaussianNoiseOracle(quadratic, 1, 0.0, 0.5, audit=False)
    s = initial_state(np.zeros((4, 1)), seed=1)
    a = lmc_step(s, quadratic, 0.05)
    b = sg_lmc_step(s, oracle, 0.05)
    G = oracle.query(s.x, 1, s.chains, 0)
    np.testing.assert_allclose(b.x, a.x - 0.05 * G, rtol=0, atol=1e-15)
