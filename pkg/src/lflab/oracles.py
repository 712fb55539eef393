"""Stochastic gradient oracles G(x, zeta) with declared smoothness, bias and variance.

An oracle is queried for a whole ensemble at once: ``query(x, seed, chains, k)``
returns one estimate per row of ``x``, drawing its noise from the counter
blocks ``(k, SLOT_ORACLE + l)`` of each chain.  Those slots never overlap the
drift-noise slot, so replacing an oracle never perturbs the Brownian path.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .core import SLOT_ORACLE, LabError, RngStream, normals
from .potentials import Potential

AUDIT_POINTS = (-2.0, -0.5, 0.0, 0.7, 3.0)
AUDIT_DRAWS = 4000
AUDIT_SEED = 7


class OracleAuditError(LabError):
    """Empirical bias or variance exceeds the declared bound."""


class StochasticGradientOracle:
    """Base class: expected-gradient smoothness ``L_hat``, bias bound, variance bound."""

    L_hat: float
    delta_b: float
    delta_v: float

    def __init__(self, potential: Potential, L_hat, delta_b, delta_v):
        self.potential = potential
        self.L_hat = float(L_hat)
        self.delta_b = float(delta_b)
        self.delta_v = float(delta_v)

    def query(self, x, seed, chains, k):
        raise NotImplementedError

    def audit(self, d: int) -> None:
        """Check declared bias/variance at a fixed grid of points, 3 sigma slack."""
        for c in AUDIT_POINTS:
            x0 = np.zeros(d)
            x0[0] = c
            x = np.broadcast_to(x0, (AUDIT_DRAWS, d)).copy()
            chains = np.arange(AUDIT_DRAWS)
            G = self.query(x, AUDIT_SEED, chains, 0)
            true = self.potential.grad(x0)
            mean = G.mean(axis=0)
            dev = G - mean
            sq = np.sum(dev * dev, axis=1)
            var_hat = sq.mean()
            se_mean = math.sqrt(var_hat / AUDIT_DRAWS)
            bias = float(np.linalg.norm(mean - true))
            if bias > math.sqrt(self.delta_b) + 3 * se_mean + 1e-12:
                raise OracleAuditError(
                    f"bias |E G - grad V| = {bias:.4g} exceeds sqrt(delta_b) = {math.sqrt(self.delta_b):.4g} at x={x0.tolist()}"
                )
            se_var = sq.std(ddof=1) / math.sqrt(AUDIT_DRAWS) if AUDIT_DRAWS > 1 else 0.0
            if var_hat > self.delta_v + 3 * se_var + 1e-12:
                raise OracleAuditError(
                    f"variance E|G - E G|^2 = {var_hat:.4g} exceeds delta_v = {self.delta_v:.4g} at x={x0.tolist()}"
                )


class ExactOracle(StochasticGradientOracle):
    """G(x, zeta) = grad V(x)."""

    def __init__(self, potential: Potential):
        L = potential.lipschitz_grad
        super().__init__(potential, L if L is not None else math.inf, 0.0, 0.0)

    def query(self, x, seed, chains, k):
        return self.potential.grad(x)


class GaussianNoiseOracle(StochasticGradientOracle):
    """G(x, zeta) = grad V(x) + beta + sqrt(v) zeta: constant bias, isotropic noise.

    Declares delta_b = |beta|^2 and delta_v = v d and audits both.
    """

    def __init__(self, potential: Potential, d: int, bias=0.0, noise_var=0.0, audit=True):
        if noise_var < 0:
            raise ValueError(f"noise variance must be >= 0, got {noise_var}")
        beta = np.zeros(d)
        if np.ndim(bias) == 0:
            beta[0] = float(bias)
        else:
            beta[:] = np.asarray(bias, dtype=np.float64)
        self.beta = beta
        self.noise_var = float(noise_var)
        self.d = d
        super().__init__(potential, potential.lipschitz_grad, float(beta @ beta), self.noise_var * d)
        if audit:
            self.audit(d)

    def query(self, x, seed, chains, k):
        G = self.potential.grad(x) + self.beta
        if self.noise_var > 0:
            G = G + math.sqrt(self.noise_var) * normals(seed, chains, k, SLOT_ORACLE, x.shape[-1])
        return G


def gaussian_abs_moment(d: int, r: float) -> float:
    """E|zeta|^r for zeta ~ N(0, I_d): 2^(r/2) Gamma((d+r)/2) / Gamma(d/2)."""
    return math.exp(0.5 * r * math.log(2) + gammaln((d + r) / 2) - gammaln(d / 2))


def smoothed_mean_gradient(potential: Potential, x, eta: float, zetas) -> np.ndarray:
    """(1/B) sum_l grad V(x + eta zeta_l) for explicit perturbations ``zetas`` of shape (B, d)."""
    x = np.asarray(x, dtype=np.float64)
    zetas = np.atleast_2d(np.asarray(zetas, dtype=np.float64))
    if eta == 0:
        return potential.grad(x)
    total = potential.grad(x + eta * zetas[0])
    for z in zetas[1:]:
        total = total + potential.grad(x + eta * z)
    return total / len(zetas)


class SmoothedOracle(StochasticGradientOracle):
    """Mini-batched Gaussian smoothing: (1/B) sum_l grad V(x + eta zeta_l).

    The potential must declare a Hoelder pair (s, L).  Declared constants:
    L_hat = L d^((1-s)/2) / eta^(1-s), delta_v = 4 L^2 d^s eta^(2s) / B and
    delta_b = (L eta^s E|zeta|^(2+s))^2.
    """

    def __init__(self, potential: Potential, d: int, eta: float, batch: int = 1, audit=False):
        if eta < 0:
            raise ValueError(f"smoothing radius must be >= 0, got {eta}")
        if batch < 1:
            raise ValueError(f"batch must be >= 1, got {batch}")
        if potential.holder is None:
            raise ValueError("Gaussian smoothing needs a potential with a Hoelder constant")
        s, L = potential.holder
        self.eta = float(eta)
        self.batch = int(batch)
        self.d = d
        if eta == 0:
            L_hat, dv, db = L if s == 1 else math.inf, 0.0, 0.0
        else:
            L_hat, dv, db = gs_params(L, s, d, eta, batch)
        super().__init__(potential, L_hat, db, dv)
        if audit:
            self.audit(d)

    def query(self, x, seed, chains, k):
        if self.eta == 0:
            return self.potential.grad(x)
        d = x.shape[-1]
        total = self.potential.grad(x + self.eta * normals(seed, chains, k, SLOT_ORACLE, d))
        for ell in range(1, self.batch):
            total = total + self.potential.grad(x + self.eta * normals(seed, chains, k, SLOT_ORACLE + ell, d))
        return total / self.batch


def gs_params(L: float, s: float, d: int, eta: float, B: int = 1):
    """(L_hat, delta_v, delta_b) for Gaussian smoothing of an (s, L)-Hoelder gradient."""
    if not 0 < s <= 1:
        raise ValueError(f"s must lie in (0, 1], got {s}")
    if not eta > 0 or B < 1:
        raise ValueError("need eta > 0 and B >= 1")
    L_hat = L * d ** ((1 - s) / 2) / eta ** (1 - s)
    delta_v = 4 * L**2 * d**s * eta ** (2 * s) / B
    delta_b = (L * eta**s * gaussian_abs_moment(d, 2 + s)) ** 2
    return L_hat, delta_v, delta_b


def smoothed_gradient(oracle: SmoothedOracle, x, stream: RngStream) -> np.ndarray:
    """One oracle query for a single chain; consumes one counter block of ``stream``."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    G = oracle.query(x, stream.master_seed, [stream.chain_index], stream.counter)[0]
    stream.counter += 1
    return G
