import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lflab.analytic import bimodal_pair
from lflab.core import RngStream
from lflab.oracles import (
    GaussianNoiseOracle,
    OracleAuditError,
    SmoothedOracle,
    gaussian_abs_moment,
    smoothed_gradient,
    smoothed_mean_gradient,
)
from lflab.potentials import (
    AuditError,
    GaussianMixture1D,
    HolderPower,
    Quadratic,
    audit_potential,
    builtin_potential,
    mixture_logdensity_and_score,
)
from lflab.quadrature import simpson
from oracle_values import PSEUDO_HUBER_INNER_3

BUILTINS = [
    ("quadratic", 3, {"lam": 2.0}),
    ("pseudo_huber", 3, {}),
    ("holder_power", 2, {"s": 0.5}),
    ("holder_power", 2, {"s": 1.0}),
    ("mixture", 1, {"weights": (0.75, 0.25), "means": (-3.0, 3.0)}),
    ("finite_sum_quadratic", 2, {"centers": (1.0, -1.0, 0.5), "curvatures": (1.0, 2.0, 0.5)}),
]


def test_quadratic_gradient():
    pot = builtin_potential("quadratic", d=2, lam=1.0)
    np.testing.assert_array_equal(pot.grad(np.array([2.0, 0.0])), [2.0, 0.0])


def test_pseudo_huber_growth_example():
    pot = builtin_potential("pseudo_huber", d=1)
    inner = float(3.0 * pot.grad(np.array([3.0]))[0])
    assert inner == pytest.approx(PSEUDO_HUBER_INNER_3, rel=1e-14)
    g = pot.growth
    assert inner >= g.a * 3.0**g.gamma - g.b == 2.0


def test_symmetric_mixture_gradient_vanishes_at_origin():
    pot = builtin_potential("mixture", d=1, weights=(0.5, 0.5), means=(-3.0, 3.0))
    assert pot.grad(np.array([0.0]))[0] == 0.0


def test_mixture_scores():
    pi, mu = bimodal_pair(3.0)
    assert mixture_logdensity_and_score(pi, 0.0)[1] == 0.0
    single = GaussianMixture1D(weights=(1.0,), means=(0.0,))
    lp, s = mixture_logdensity_and_score(single, 2.0)
    assert s == pytest.approx(-2.0, rel=1e-15)
    assert lp == pytest.approx(-2.0 - 0.5 * math.log(2 * math.pi), rel=1e-15)
    # hand evaluation: -3 (3/4 - 1/4) / (3/4 + 1/4) = -1.5
    assert mixture_logdensity_and_score(mu, 0.0)[1] == pytest.approx(-1.5, rel=1e-14)


def test_mixture_score_survives_far_tails():
    pi, _ = bimodal_pair(3.0)
    lp, s = pi.logdensity_and_score(np.array([-400.0, 400.0]))
    assert np.all(np.isfinite(lp)) and np.all(np.isfinite(s))
    np.testing.assert_allclose(s, [397.0, -397.0], rtol=1e-12)


@pytest.mark.parametrize("m", [0.5, 1.0, 3.0, 6.0])
def test_mixture_density_integrates_to_one(m):
    _, mu = bimodal_pair(m)
    a, b = mu.domain()
    assert simpson(mu.pdf, a, b) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("name,d,params", BUILTINS)
def test_gradient_matches_finite_differences(name, d, params):
    pot = builtin_potential(name, d=d, **params)
    rng = np.random.default_rng(3)
    x = rng.standard_normal((1000, d))
    x *= (10 * rng.uniform(0.05, 1.0, 1000) / np.linalg.norm(x, axis=1))[:, None]
    eps = 1e-5
    fd = np.empty_like(x)
    for j in range(d):
        e = np.zeros(d)
        e[j] = eps
        fd[:, j] = (pot.value(x + e) - pot.value(x - e)) / (2 * eps)
    g = pot.grad(x)
    err = np.linalg.norm(fd - g, axis=1) / np.maximum(np.linalg.norm(g, axis=1), 1.0)
    assert err.max() <= 1e-6


@pytest.mark.parametrize("name,d,params", BUILTINS)
def test_builtins_pass_their_own_audit(name, d, params):
    audit_potential(builtin_potential(name, d=d, **params), d)


def test_audit_rejects_understated_constant():
    pot = Quadratic(lam=2.0, lipschitz_grad=1.0)
    with pytest.raises(AuditError, match="L\\|x-y\\|"):
        audit_potential(pot, 2)


def test_audit_rejects_wrong_holder_constant():
    pot = HolderPower(s=0.5, holder=(0.5, 1.0))
    with pytest.raises(AuditError, match="witness|x="):
        audit_potential(pot, 1)


def test_holder_gradient_at_origin_is_zero():
    pot = builtin_potential("holder_power", d=3, s=0.3)
    np.testing.assert_array_equal(pot.grad(np.zeros(3)), np.zeros(3))


def test_unknown_potential():
    with pytest.raises(ValueError):
        builtin_potential("rosenbrock")
    with pytest.raises(ValueError):
        builtin_potential("quadratic", lam=1.0, typo=3)


def test_gamma_zero_growth_is_unsupported():
    from lflab.potentials import Growth

    with pytest.raises(ValueError):
        Growth(a=1.0, b=1.0, gamma=0.0, xi=0.0, m=1.0)


# --- finite sums -------------------------------------------------------------


def test_finite_sum_gradient_is_the_component_average_bitwise():
    fs = builtin_potential("finite_sum_quadratic", d=2, centers=(0.3, -1.7, 2.2, 0.9), curvatures=(1.0, 0.5, 2.0, 1.5))
    x = np.random.default_rng(0).standard_normal((500, 2))
    total = fs.component_grad(0, x)
    for i in range(1, fs.n_components):
        total = total + fs.component_grad(i, x)
    np.testing.assert_array_equal(total / fs.n_components, fs.grad(x))


def test_finite_sum_vectorized_component_index():
    fs = builtin_potential("finite_sum_quadratic", d=1, centers=(1.0, -1.0))
    x = np.array([[2.0], [2.0]])
    np.testing.assert_array_equal(fs.component_grad(np.array([0, 1]), x), [[1.0], [3.0]])


# --- Gaussian smoothing ------------------------------------------------------


def test_smoothing_examples(quadratic):
    x = np.array([[1.0]])
    assert smoothed_mean_gradient(quadratic, x, 0.2, [[0.5]])[0, 0] == pytest.approx(1.1, rel=1e-15)
    np.testing.assert_array_equal(smoothed_mean_gradient(quadratic, x, 0.0, [[7.0]]), quadratic.grad(x))
    # antithetic pair cancels for a linear gradient
    assert smoothed_mean_gradient(quadratic, x, 0.37, [[1.0], [-1.0]])[0, 0] == pytest.approx(1.0, rel=1e-15)


def test_smoothed_gradient_with_zero_radius_is_exact():
    pot = builtin_potential("holder_power", d=2, s=1.0)
    oracle = SmoothedOracle(pot, 2, 0.0, 3)
    stream = RngStream(1, 0)
    x = np.array([0.3, -2.0])
    np.testing.assert_array_equal(smoothed_gradient(oracle, x, stream), pot.grad(x))
    assert stream.counter == 1


def test_smoothed_gradient_matches_explicit_draws():
    from lflab.core import SLOT_ORACLE, normals

    pot = builtin_potential("holder_power", d=1, s=0.5)
    oracle = SmoothedOracle(pot, 1, 0.1, 2)
    stream = RngStream(8, 3, 5)
    z = np.vstack([normals(8, [3], 5, SLOT_ORACLE + ell, 1) for ell in range(2)])
    expected = smoothed_mean_gradient(pot, np.array([[0.7]]), 0.1, z)[0]
    assert smoothed_gradient(oracle, np.array([0.7]), stream)[0] == pytest.approx(expected[0], rel=1e-15)


@pytest.mark.parametrize("s", [0.25, 0.5, 1.0])
def test_smoothing_bias_within_scaling_envelope(s):
    """|E G - grad V|^2 <= c L^2 d^(2+s) eta^(2s) with c <= 4, at a worst-case point x = eta."""
    pot = builtin_potential("holder_power", d=1, s=s)
    L = pot.holder[1]
    n = 1_000_000
    for eta in (0.1, 0.01):
        oracle = SmoothedOracle(pot, 1, eta, 1)
        x0 = np.array([eta])
        G = oracle.query(np.broadcast_to(x0, (n, 1)).copy(), 77, np.arange(n), 0)
        bias_sq = float(np.sum((G.mean(axis=0) - pot.grad(x0)) ** 2))
        assert bias_sq <= 4 * L**2 * 1 ** (2 + s) * eta ** (2 * s)


def test_gaussian_abs_moment():
    assert gaussian_abs_moment(1, 2) == pytest.approx(1.0, rel=1e-14)
    assert gaussian_abs_moment(3, 2) == pytest.approx(3.0, rel=1e-14)
    assert gaussian_abs_moment(1, 4) == pytest.approx(3.0, rel=1e-14)
    z = np.random.default_rng(5).standard_normal(2_000_000)
    assert np.mean(np.abs(z) ** 2.5) == pytest.approx(gaussian_abs_moment(1, 2.5), rel=5e-3)


def test_gaussian_noise_oracle_declarations_pass_audit(quadratic):
    oracle = GaussianNoiseOracle(quadratic, 1, bias=0.3, noise_var=0.5)
    assert oracle.delta_b == pytest.approx(0.09)
    assert oracle.delta_v == 0.5


def test_gaussian_noise_oracle_audit_catches_understatement(quadratic):
    oracle = GaussianNoiseOracle(quadratic, 1, bias=0.3, noise_var=0.5, audit=False)
    oracle.delta_v = 0.1
    with pytest.raises(OracleAuditError):
        oracle.audit(1)


@given(st.floats(0.05, 3.0), st.floats(-5, 5))
def test_mixture_value_is_minus_log_density(m, x):
    pi, _ = bimodal_pair(m)
    assert pi.value(np.array([x])) == pytest.approx(-pi.logpdf(x), rel=1e-12, abs=1e-12)
