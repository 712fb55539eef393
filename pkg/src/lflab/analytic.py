"""Exact oracles and bound calculators.

Closed-form laws of LMC on isotropic quadratics, 1D quadrature divergences
for Gaussian mixtures, and one calculator per guarantee.  Calculators return
a :class:`BoundReport`; bounds whose constants are hidden behind ``<~`` are
evaluated with unit constants and flagged ``scaling_only``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf

from .core import Constant, ConfigError, PowerDecay, StepSchedule, schedule_steps
from .oracles import gaussian_abs_moment, gs_params  # noqa: F401  (re-exported)
from .potentials import GaussianMixture1D
from .quadrature import gl_nodes, simpson

DENSITY_FLOOR = 1e-290
_LOG_FLOOR = math.log(DENSITY_FLOOR)


# ---------------------------------------------------------------------------
# Gaussian laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianLaw:
    """N(m e_1, var I_d): mean displaced along the first axis only."""

    m: float
    var: float
    d: int = 1

    def __post_init__(self):
        if not self.var > 0:
            raise ValueError(f"variance must be positive, got {self.var}")


def _fi(m, var, lam, d):
    return lam**2 * m**2 + d * (lam * var - 1.0) ** 2 / var


def _kl(m, var, lam, d):
    return 0.5 * d * (lam * var - 1.0 - np.log(lam * var)) + 0.5 * lam * m**2


def gaussian_fi(mu: GaussianLaw, lam: float) -> float:
    """FI(mu || N(0, I/lam)); the relative score is lam x - (x - m)/var."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return float(_fi(mu.m, mu.var, lam, mu.d))


def gaussian_kl(mu: GaussianLaw, lam: float) -> float:
    """KL(mu || N(0, I/lam))."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return float(_kl(mu.m, mu.var, lam, mu.d))


def gaussian_grad_sq(mu: GaussianLaw, lam: float) -> float:
    """E_mu |grad V|^2 for V = lam |x|^2 / 2."""
    return lam**2 * (mu.m**2 + mu.d * mu.var)


@dataclass(frozen=True)
class GaussianTrajectory:
    """Exact laws of LMC (or a linear-Gaussian SG-LMC) on V = lam |x|^2/2.

    ``means[k]`` and ``variances[k]`` describe the law after k steps; within
    step k the interpolated law at offset tau has mean (1 - tau lam) m_k - tau beta
    and variance (1 - tau lam)^2 var_k + tau^2 v + 2 tau.
    """

    lam: float
    h: float
    N: int
    d: int
    bias: float
    noise_var: float
    means: np.ndarray
    variances: np.ndarray
    time_avg_fi: float
    step_fi_integrals: np.ndarray = field(repr=False)

    def law(self, k: int) -> GaussianLaw:
        return GaussianLaw(float(self.means[k]), float(self.variances[k]), self.d)

    def laws(self) -> list[GaussianLaw]:
        return [self.law(k) for k in range(self.N + 1)]

    def interpolated(self, t):
        """(mean, var) arrays of the interpolated law at times t in [0, Nh]."""
        t = np.asarray(t, dtype=np.float64)
        k = np.minimum(np.floor(t / self.h).astype(np.int64), max(self.N - 1, 0))
        tau = np.clip(t - k * self.h, 0.0, self.h)
        return self._at(k, tau)

    def _at(self, k, tau):
        a = 1.0 - tau * self.lam
        mean = a * self.means[k] - tau * self.bias
        var = a * a * self.variances[k] + tau * tau * self.noise_var + 2.0 * tau
        return mean, var


def gaussian_chain_moments(lam, steps, m0, var0, bias=0.0, noise_var=0.0):
    """Mean (first axis) and per-coordinate variance after each step h_1, h_2, ...

    ``var0 = 0`` is a point-mass start; the returned arrays have length len(steps) + 1.
    """
    steps = np.asarray(steps, dtype=np.float64)
    means = np.empty(steps.size + 1)
    variances = np.empty(steps.size + 1)
    means[0], variances[0] = m0, var0
    for k, h in enumerate(steps):
        a = 1.0 - h * lam
        means[k + 1] = a * means[k] - h * bias
        variances[k + 1] = a * a * variances[k] + h * h * noise_var + 2.0 * h
    return means, variances


def lmc_gaussian_trajectory(
    lam: float,
    h: float,
    N: int,
    init: GaussianLaw,
    bias: float = 0.0,
    noise_var: float = 0.0,
    order: int = 32,
) -> GaussianTrajectory:
    """Per-step laws and the time-averaged FI (1/(Nh)) int_0^{Nh} FI(mu_t || pi) dt.

    The time integral is Gauss-Legendre of the given order on every step.
    With ``bias``/``noise_var`` the drift is grad V + beta e_1 + sqrt(v) zeta.
    """
    exact = bias == 0 and noise_var == 0
    limit = 1 / (6 * lam) if exact else 1 / (14 * lam)
    if not 0 < h < limit:
        raise ConfigError(f"step size h={h} outside (0, {limit:.6g})")
    if N < 0:
        raise ValueError("N must be >= 0")
    means, variances = gaussian_chain_moments(lam, np.full(N, h), init.m, init.var, bias, noise_var)
    traj = GaussianTrajectory(lam, h, N, init.d, bias, noise_var, means, variances, math.nan, np.empty(0))
    if N == 0:
        return traj
    tau, w = gl_nodes(0.0, h, order)
    k = np.arange(N)[:, None]
    mean, var = traj._at(k, tau[None, :])
    per_step = (_fi(mean, var, lam, init.d) * w).sum(axis=1)
    avg = float(per_step.sum() / (N * h))
    return GaussianTrajectory(lam, h, N, init.d, bias, noise_var, means, variances, avg, per_step)


# ---------------------------------------------------------------------------
# 1D quadrature divergences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Divergences:
    fi: float
    kl: float
    tv: float
    approximate: bool = False


def _union_domain(mu, pi):
    a1, b1 = mu.domain()
    a2, b2 = pi.domain()
    return min(a1, a2), max(b1, b2)


def _crossings(diff, a, b, grid=4001):
    x = np.linspace(a, b, grid)
    v = diff(x)
    roots = []
    for j in np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]:
        roots.append(brentq(diff, x[j], x[j + 1], xtol=1e-15, rtol=1e-15))
    for j in np.nonzero(v[1:-1] == 0)[0]:
        roots.append(float(x[j + 1]))
    return sorted(roots)


def quad_divergences(mu: GaussianMixture1D, pi: GaussianMixture1D, domain=None) -> Divergences:
    """FI(mu||pi), KL(mu||pi) and TV(mu, pi) by adaptive Simpson quadrature.

    Integrands are evaluated in log space; points where the density of mu
    is below 1e-290 contribute zero.  The TV integral is split at the
    crossings of the two densities so every piece is smooth.
    """
    a, b = domain if domain is not None else _union_domain(mu, pi)

    def fi_integrand(x):
        lm, sm = mu.logdensity_and_score(x)
        _, sp = pi.logdensity_and_score(x)
        live = lm > _LOG_FLOOR
        return np.where(live, (sm - sp) ** 2 * np.exp(np.where(live, lm, 0.0)), 0.0)

    def kl_integrand(x):
        lm = mu.logpdf(x)
        lp = pi.logpdf(x)
        live = lm > _LOG_FLOOR
        return np.where(live, np.exp(np.where(live, lm, 0.0)) * (lm - lp), 0.0)

    def diff(x):
        return mu.pdf(x) - pi.pdf(x)

    def tv_integrand(x):
        return 0.5 * np.abs(diff(x))

    fi = simpson(fi_integrand, a, b)
    kl = simpson(kl_integrand, a, b)
    cuts = [a, *(r for r in _crossings(diff, a, b) if a < r < b), b]
    tv = sum(simpson(tv_integrand, lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:]))
    return Divergences(fi=fi, kl=kl, tv=tv)


def gaussian_tv_same_mean(var1: float, var2: float) -> float:
    """TV(N(0, var1), N(0, var2)) from the Gaussian CDF at the density crossings."""
    if var1 == var2:
        return 0.0
    s1, s2 = sorted((math.sqrt(var1), math.sqrt(var2)))
    c = math.sqrt(2 * math.log(s2 / s1) / (1 / s1**2 - 1 / s2**2))
    return math.erf(c / (s1 * math.sqrt(2))) - math.erf(c / (s2 * math.sqrt(2)))


def gaussian_tv_shifted(delta: float, var: float = 1.0) -> float:
    """TV(N(0, var), N(delta, var)) = erf(|delta| / (2 sqrt(2 var)))."""
    return math.erf(abs(delta) / (2 * math.sqrt(2 * var)))


def bimodal_pair(m: float):
    """(pi, mu): pi = N(-m,1)/2 + N(m,1)/2 and mu = 3/4 N(-m,1) + 1/4 N(m,1)."""
    pi = GaussianMixture1D(weights=(0.5, 0.5), means=(-m, m), dim=1)
    mu = GaussianMixture1D(weights=(0.75, 0.25), means=(-m, m), dim=1)
    return pi, mu


def bimodal_fi_bound(m: float) -> float:
    """4 m^2 exp(-m^2/2)."""
    return 4 * m * m * math.exp(-m * m / 2)


def bimodal_tv_exact(m: float) -> float:
    """TV(mu, pi) = |pi_+ - pi_-|_TV / 4 = erf(m / sqrt 2) / 4."""
    return 0.25 * float(erf(m / math.sqrt(2)))


BIMODAL_TV_FLOOR = 1 / 800


# ---------------------------------------------------------------------------
# Bound calculators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    theorem_id: str
    inputs: dict
    value: float
    admissible: bool
    scaling_only: bool = False
    h: float | None = None

    CSV_HEADER = ("theorem_id", "inputs", "h", "value", "admissible", "scaling_only")

    def row(self) -> list[str]:
        from .fmt import fmt_float

        inputs = ";".join(f"{k}={_fmt_input(v)}" for k, v in self.inputs.items())
        return [
            self.theorem_id,
            inputs,
            "" if self.h is None else fmt_float(self.h),
            fmt_float(self.value),
            "true" if self.admissible else "false",
            "true" if self.scaling_only else "false",
        ]


def _fmt_input(v):
    from .fmt import fmt_float

    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return fmt_float(float(v))


def _is_optimal(h):
    return isinstance(h, str) and h == "optimal"


def theorem1_bound(K0: float, L: float, d: int, N: int, h="optimal") -> BoundReport:
    """2 K0/(N h) + 8 L^2 d h for h in (0, 1/(6L)); optimal h = sqrt(K0)/(2L sqrt(dN))."""
    inputs = dict(K0=K0, L=L, d=d, N=N, h=h)
    if _is_optimal(h):
        hs = math.sqrt(K0) / (2 * L * math.sqrt(d * N))
        value = 8 * L * math.sqrt(d * K0) / math.sqrt(N)
        ok = N >= 9 * K0 / d and 0 < hs < 1 / (6 * L)
        return BoundReport("thm1", inputs, value, ok, h=hs)
    h = float(h)
    value = 2 * K0 / (N * h) + 8 * L**2 * d * h
    ok = 0 < h < 1 / (6 * L) and N >= 1
    return BoundReport("thm1", inputs, value, ok, h=h)


def theorem2_averaged_curve(K0: float, L: float, d: int, schedule: StepSchedule, ns) -> np.ndarray:
    """2 K0/tau_n + 8 L^2 d S_n/tau_n at each n in ``ns`` (S_n = sum_{k<=n} h_k^2)."""
    if isinstance(schedule, Constant):
        raise ConfigError("the averaged bound for vanishing steps requires a decaying schedule")
    if not isinstance(schedule, PowerDecay):
        raise ConfigError(f"unsupported schedule {schedule!r}")
    if not schedule.h0 < 1 / (6 * L):
        raise ConfigError(f"h0={schedule.h0} outside (0, 1/(6L)) = (0, {1 / (6 * L):.6g})")
    ns = np.asarray(ns, dtype=np.int64)
    hk = schedule_steps(schedule, int(ns.max()))
    tau = np.cumsum(hk)[ns - 1]
    S = np.cumsum(hk * hk)[ns - 1]
    return 2 * K0 / tau + 8 * L**2 * d * S / tau


def theorem2_averaged_bound(K0: float, L: float, d: int, schedule: StepSchedule, n: int) -> float:
    return float(theorem2_averaged_curve(K0, L, d, schedule, [n])[0])


def poincare_tv_bound(C_PI: float, fi: float) -> float:
    """Bound on TV^2 from a Poincare constant: min(4 C_PI FI, 1)."""
    if not C_PI > 0:
        raise ValueError("Poincare constant must be positive")
    return min(4 * C_PI * fi, 1.0)


def corollary4_bound(C_PI: float, L: float, d: int, K0: float, N: int) -> BoundReport:
    """TV^2 of the averaged law <= 32 C_PI L sqrt(d K0)/sqrt(N) at the optimal step."""
    value = 32 * C_PI * L * math.sqrt(d * K0) / math.sqrt(N)
    ok = C_PI > 0 and N >= 9 * K0 / d
    hs = math.sqrt(K0) / (2 * L * math.sqrt(d * N))
    return BoundReport("cor4", dict(C_PI=C_PI, L=L, d=d, K0=K0, N=N), value, ok, h=hs)


def theorem5_bound(K0, L, M, m, b, sigma, d, N, h="optimal", a=1.0) -> BoundReport:
    """Hessian-smooth rate with unit constants (scaling only).

    kappa = max(1, L, M^(2/3), M^(1/3) m^(2/3)); generic value
    K0/(Nh) + kappa^3 d^2 h^2 + kappa^6 (b + sigma d)^3 N h^5.
    """
    kappa = max(1.0, L, M ** (2 / 3), M ** (1 / 3) * m ** (2 / 3))
    c = b + sigma * d
    inputs = dict(K0=K0, L=L, M=M, m=m, a=a, b=b, sigma=sigma, d=d, N=N, h=h, kappa=kappa)
    base_ok = a == 1 and sigma >= 3
    h_max = min(1 / L, 1 / m**2, 1.0)
    if _is_optimal(h):
        hs = K0 ** (1 / 3) / (kappa * c ** (2 / 3) * N ** (1 / 3))
        value = (c ** (2 / 3) * K0 ** (2 / 3) + K0 ** (5 / 3) / c ** (1 / 3)) * kappa / N ** (2 / 3)
        n_min = K0 * max(L**3, m**6) / (kappa**3 * c**2)
        ok = base_ok and 0 < hs <= h_max and N >= n_min
        return BoundReport("thm5", inputs, value, ok, scaling_only=True, h=hs)
    h = float(h)
    value = K0 / (N * h) + kappa**3 * d**2 * h**2 + kappa**6 * c**3 * N * h**5
    ok = base_ok and 0 < h <= h_max
    return BoundReport("thm5", inputs, value, ok, scaling_only=True, h=h)


def moment_bounds(a, b, gamma, d, E_x0_sq, E_x0_4, k, h, m=None):
    """Second and fourth moment bounds for LMC iterates under the growth condition.

    second = E|x0|^2 + 3(a+b+d) kh
    fourth = E|x0|^4 + 6 (3(a+b+d)/(1 ^ a))^max((2+gamma)/gamma, 2) kh
    Raises ConfigError when h > a/(4 m^2) ^ 1 (only checked if m is given).
    """
    if not gamma > 0:
        raise ValueError("moment bounds need gamma > 0")
    if m is not None and h > min(a / (4 * m * m), 1.0):
        raise ConfigError(f"h={h} exceeds a/(4m^2) ^ 1 = {min(a / (4 * m * m), 1.0):.6g}")
    kh = k * h
    second = E_x0_sq + 3 * (a + b + d) * kh
    expo = max((2 + gamma) / gamma, 2.0)
    fourth = E_x0_4 + 6 * (3 * (a + b + d) / min(1.0, a)) ** expo * kh
    return second, fourth


def theorem6_bound(K0, L_hat, d, N, delta_b, delta_v, h="optimal") -> BoundReport:
    """2K0/(Nh) + 16 L_hat^2 d h + 8(delta_b + delta_v) for h in (0, 1/(14 L_hat))."""
    inputs = dict(K0=K0, L_hat=L_hat, d=d, N=N, delta_b=delta_b, delta_v=delta_v, h=h)
    floor = 8 * (delta_b + delta_v)
    if _is_optimal(h):
        hs = math.sqrt(K0) / (L_hat * math.sqrt(8 * d * N))
        value = 16 * L_hat * math.sqrt(2 * d * K0) / math.sqrt(N) + floor
        ok = N >= 25 * K0 / d and 0 < hs < 1 / (14 * L_hat)
        return BoundReport("thm6", inputs, value, ok, h=hs)
    h = float(h)
    value = 2 * K0 / (N * h) + 16 * L_hat**2 * d * h + floor
    ok = 0 < h < 1 / (14 * L_hat)
    return BoundReport("thm6", inputs, value, ok, h=h)


def gs_eta_choice(L: float, s: float, d: int, eps: float) -> float:
    """Smoothing radius eps^(1/(2s)) / (L^(1/s) d^((2+s)/(2s))) (unit constant)."""
    _check_smoothing_args(s, eps)
    return eps ** (1 / (2 * s)) / (L ** (1 / s) * d ** ((2 + s) / (2 * s)))


def gs_eta_batch(L: float, s: float, d: int, eps: float, B: float, C_PI: float) -> float:
    """Smoothing radius for the mini-batched variant (unit constant)."""
    _check_smoothing_args(s, eps)
    first = (eps / L) ** (1 / (1 + s))
    second = B ** (1 / (2 * s)) * eps ** (1 / (2 * s)) / (C_PI ** (1 / (2 * s)) * L ** (1 / s))
    return min(first, second) / math.sqrt(d)


def corollary8_iterations(K0: float, L: float, s: float, d: int, eps: float) -> BoundReport:
    """Iterations K0 L^(2/s) d^((2+s-2s^2)/s) / eps^((1+s)/s) (scaling only)."""
    _check_smoothing_args(s, eps)
    value = K0 * L ** (2 / s) * d ** ((2 + s - 2 * s * s) / s) / eps ** ((1 + s) / s)
    return BoundReport("cor8", dict(K0=K0, L=L, s=s, d=d, eps=eps), value, True, scaling_only=True)


def cor9_complexity(C_PI: float, K0: float, L: float, s: float, d: int, eps: float):
    """(B, N, B*N) for mini-batched smoothing under a Poincare inequality (scaling only)."""
    _check_smoothing_args(s, eps)
    if s >= 0.5:
        B = 1.0
        BN = C_PI ** ((1 + s) / s) * K0 * L ** (2 / s) * d ** (3 - 2 * s) / eps ** ((1 + s) / s)
    else:
        B = max(1.0, C_PI * L ** (2 / (1 + s)) / eps ** ((1 - s) / (1 + s)))
        BN = C_PI**3 * K0 * L ** (6 / (1 + s)) * d ** (3 - 2 * s) / eps ** ((5 - s) / (1 + s))
    return B, BN / B, BN


def corollary9_report(C_PI, K0, L, s, d, eps) -> BoundReport:
    B, N, BN = cor9_complexity(C_PI, K0, L, s, d, eps)
    inputs = dict(C_PI=C_PI, K0=K0, L=L, s=s, d=d, eps=eps, B=B, N=N)
    return BoundReport("cor9", inputs, BN, True, scaling_only=True)


def _check_smoothing_args(s, eps):
    if not 0 < s <= 1:
        raise ValueError(f"s must lie in (0, 1], got {s}")
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")


def theorem10_bound(KL0, g0_err, L, d, N, p, h="optimal") -> BoundReport:
    """VR-LMC: 2C/(Nh) + 18 L^2 d h / p with C = KL0 + (3h/p) E|g0 - grad V(x0)|^2.

    In the optimal form h = sqrt(pC)/(3L sqrt(Nd)) depends on C, which depends
    on h; the pair is solved in closed form (a quadratic in sqrt(C)).
    """
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    inputs = dict(KL0=KL0, g0_err=g0_err, L=L, d=d, N=N, p=p, h=h)
    limit = math.sqrt(p) / (5 * L)
    if _is_optimal(h):
        beta = g0_err / (L * math.sqrt(p * N * d))
        root_c = 0.5 * (beta + math.sqrt(beta * beta + 4 * KL0))
        C = root_c**2
        hs = math.sqrt(p * C) / (3 * L * math.sqrt(N * d))
        value = 12 * L * math.sqrt(C * d / (N * p))
        ok = N >= 2 * C / d and 0 < hs < limit
        return BoundReport("thm10", {**inputs, "C": C}, value, ok, h=hs)
    h = float(h)
    C = KL0 + 3 * h / p * g0_err
    value = 2 * C / (N * h) + 18 * L**2 * d * h / p
    ok = 0 < h < limit
    return BoundReport("thm10", {**inputs, "C": C}, value, ok, h=h)


def page_expected_cost(n: int, p: float, fresh_only: bool = False) -> float:
    """Expected component-gradient evaluations per VR-LMC step.

    A refresh costs n; a correction costs 2 (both endpoints of the selected
    component), or 1 with ``fresh_only`` when the old value is cached.
    """
    return p * n + (1 - p) * (1 if fresh_only else 2)
