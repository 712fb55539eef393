"""Analytic target potentials with declared regularity constants.

Every potential is vectorized: ``value`` maps ``(..., d)`` to ``(...)`` and
``grad`` maps ``(..., d)`` to ``(..., d)``.  Declared constants are checked by
randomized audits when the potential is built (see :func:`audit_potential`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import LabError

AUDIT_SAMPLES = 1000
AUDIT_SCALE = 5.0
AUDIT_SEED = 20220212
_REL_SLACK = 1e-9


class AuditError(LabError):
    """A declared regularity constant is violated at a witness point."""


@dataclass(frozen=True)
class Growth:
    """<x, grad V(x)> >= a|x|^gamma - b  and  |grad V(x)| <= m (1 + |x|^xi)."""

    a: float
    b: float
    gamma: float
    xi: float
    m: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.m > 0):
            raise ValueError("growth constants a, b, m must be positive")
        if not 0 < self.gamma <= 2:
            # gamma = 0 is allowed by the growth assumption but not by the moment bounds
            raise ValueError(f"growth exponent gamma must lie in (0, 2], got {self.gamma}")
        if not 0 <= self.xi <= self.gamma / 2:
            raise ValueError(f"xi must lie in [0, gamma/2], got {self.xi}")


@dataclass(frozen=True)
class Potential:
    """Base class.  Subclasses implement ``value`` and ``grad``."""

    dim: int | None = field(default=None, kw_only=True)
    lipschitz_grad: float | None = field(default=None, kw_only=True)
    lipschitz_hess: float | None = field(default=None, kw_only=True)
    holder: tuple[float, float] | None = field(default=None, kw_only=True)
    growth: Growth | None = field(default=None, kw_only=True)

    name = "potential"

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    @property
    def n_components(self) -> int:
        return 1


def _norm(x):
    return np.sqrt(np.sum(np.square(x), axis=-1))


@dataclass(frozen=True)
class Quadratic(Potential):
    """V(x) = lam |x|^2 / 2."""

    lam: float = 1.0
    name = "quadratic"

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * self.lam * np.sum(x * x, axis=-1)

    def grad(self, x):
        return self.lam * np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class PseudoHuber(Potential):
    """V(x) = sqrt(1 + |x|^2)."""

    name = "pseudo_huber"

    def value(self, x):
        return np.sqrt(1.0 + np.sum(np.square(x), axis=-1))

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x / self.value(x)[..., None]


@dataclass(frozen=True)
class HolderPower(Potential):
    """V(x) = |x|^(1+s) / (1+s); grad V(x) = |x|^(s-1) x, defined as 0 at the origin."""

    s: float = 0.5
    name = "holder_power"

    def value(self, x):
        return _norm(x) ** (1 + self.s) / (1 + self.s)

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        r = _norm(x)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 0, r ** (self.s - 1), 0.0)
        return scale * x


@dataclass(frozen=True)
class GaussianMixture1D(Potential):
    """Density sum_j w_j N(mean_j, var_j) on the line; V = -ln(density).

    Component normalizers are exact, so the density integrates to one.
    Component variances default to 1.
    """

    weights: tuple[float, ...] = (0.5, 0.5)
    means: tuple[float, ...] = (-3.0, 3.0)
    variances: tuple[float, ...] | None = None
    name = "mixture"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or len(w) != len(self.means) or len(w) == 0:
            raise ValueError("weights and means must be non-empty and of equal length")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must be positive and sum to 1, got {self.weights}")
        if self.variances is not None and (
            len(self.variances) != len(w) or min(self.variances) <= 0
        ):
            raise ValueError("variances must be positive, one per component")

    @property
    def _var(self):
        if self.variances is None:
            return np.ones(len(self.weights))
        return np.asarray(self.variances, dtype=np.float64)

    def _component_terms(self, x):
        """log(w_j N(x; mean_j, var_j)) and d/dx of the inner log, shape (..., J)."""
        x = np.asarray(x, dtype=np.float64)[..., None]
        mu = np.asarray(self.means, dtype=np.float64)
        var = self._var
        logc = (
            np.log(np.asarray(self.weights))
            - 0.5 * np.log(2 * math.pi * var)
            - 0.5 * (x - mu) ** 2 / var
        )
        return logc, -(x - mu) / var

    def logpdf(self, x):
        logc, _ = self._component_terms(x)
        return logsumexp(logc, axis=-1)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def score(self, x):
        logc, dlog = self._component_terms(x)
        m = np.max(logc, axis=-1, keepdims=True)
        w = np.exp(logc - m)
        return np.sum(w * dlog, axis=-1) / np.sum(w, axis=-1)

    def logdensity_and_score(self, x):
        return self.logpdf(x), self.score(x)

    def value(self, x):
        return -self.logpdf(np.asarray(x, dtype=np.float64)[..., 0])

    def grad(self, x):
        return -self.score(np.asarray(x, dtype=np.float64)[..., 0])[..., None]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Exact draws: pick a component, then a Gaussian."""
        comp = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights))
        sd = np.sqrt(self._var)
        return np.asarray(self.means)[comp] + sd[comp] * rng.standard_normal(n)

    def domain(self, pad: float = 12.0) -> tuple[float, float]:
        sd = float(np.sqrt(self._var.max()))
        return min(self.means) - pad * sd, max(self.means) + pad * sd


def mixture_logdensity_and_score(mix: GaussianMixture1D, x):
    """(ln rho(x), rho'(x)/rho(x)) for a 1D Gaussian mixture, evaluated in log space."""
    return mix.logdensity_and_score(x)


@dataclass(frozen=True)
class FiniteSumQuadratic(Potential):
    """V(x) = (1/n) sum_i f_i(x) with f_i(x) = lam_i |x - c_i|^2 / 2.

    ``centers`` has shape (n,) (first axis) or (n, d).  ``curvatures`` default
    to 1; the shared component constant L is max(lam_i).
    """

    centers: tuple = (1.0, -1.0)
    curvatures: tuple[float, ...] | None = None
    name = "finite_sum_quadratic"

    def _c(self, d):
        c = np.asarray(self.centers, dtype=np.float64)
        if c.ndim == 1:
            out = np.zeros((c.shape[0], d))
            out[:, 0] = c
            return out
        return c

    @property
    def _lam(self):
        if self.curvatures is None:
            return np.ones(len(self.centers))
        return np.asarray(self.curvatures, dtype=np.float64)

    @property
    def n_components(self) -> int:
        return len(self.centers)

    def component_value(self, i, x):
        x = np.asarray(x, dtype=np.float64)
        c = self._c(x.shape[-1])[i]
        return 0.5 * self._lam[i] * np.sum((x - c) ** 2, axis=-1)

    def component_grad(self, i, x):
        """grad f_i(x); ``i`` may be an index array aligned with the rows of x."""
        x = np.asarray(x, dtype=np.float64)
        i = np.asarray(i)
        c = self._c(x.shape[-1])[i]
        lam = self._lam[i]
        if lam.ndim:
            lam = lam[..., None]
        return lam * (x - c)

    def value(self, x):
        total = self.component_value(0, x)
        for i in range(1, self.n_components):
            total = total + self.component_value(i, x)
        return total / self.n_components

    def grad(self, x):
        total = self.component_grad(0, x)
        for i in range(1, self.n_components):
            total = total + self.component_grad(i, x)
        return total / self.n_components

    def minimizer(self, d):
        lam = self._lam
        return (lam[:, None] * self._c(d)).sum(axis=0) / lam.sum()

    def mean_curvature(self) -> float:
        return float(self._lam.mean())


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _audit_points(d, rng, n=AUDIT_SAMPLES):
    return AUDIT_SCALE * rng.standard_normal((n, d))


def audit_potential(pot: Potential, d: int) -> None:
    """Randomized check of the declared constants; raises AuditError with a witness."""
    rng = np.random.default_rng(AUDIT_SEED)
    x = _audit_points(d, rng)
    y = _audit_points(d, rng)
    gx, gy = pot.grad(x), pot.grad(y)
    lhs = _norm(gx - gy)
    dist = _norm(x - y)
    if pot.lipschitz_grad is not None:
        rhs = pot.lipschitz_grad * dist
        _raise_if(lhs > rhs * (1 + _REL_SLACK) + 1e-12, lhs, rhs, x, y, "|grad V(x)-grad V(y)| <= L|x-y|")
    if pot.holder is not None:
        s, L = pot.holder
        rhs = L * dist**s
        _raise_if(lhs > rhs * (1 + _REL_SLACK) + 1e-12, lhs, rhs, x, y, "|grad V(x)-grad V(y)| <= L|x-y|^s")
    if pot.growth is not None:
        g = pot.growth
        r = _norm(x)
        inner = np.sum(x * gx, axis=-1)
        rhs = g.a * r**g.gamma - g.b
        _raise_if(inner < rhs - _REL_SLACK * np.abs(rhs) - 1e-12, inner, rhs, x, None, "<x, grad V(x)> >= a|x|^gamma - b")
        gn = _norm(gx)
        rhs2 = g.m * (1 + r**g.xi)
        _raise_if(gn > rhs2 * (1 + _REL_SLACK) + 1e-12, gn, rhs2, x, None, "|grad V(x)| <= m(1 + |x|^xi)")


def _raise_if(bad, lhs, rhs, x, y, label):
    if np.any(bad):
        j = int(np.argmax(bad))
        where = f"x={x[j].tolist()}" + ("" if y is None else f", y={y[j].tolist()}")
        raise AuditError(f"declared constant violated: {label}; lhs={lhs[j]:.6g} rhs={rhs[j]:.6g} at {where}")


def _audited(pot: Potential, d: int) -> Potential:
    audit_potential(pot, d)
    return pot


POTENTIAL_IDS = ("quadratic", "mixture", "pseudo_huber", "holder_power", "finite_sum_quadratic")


def builtin_potential(name: str, d: int = 1, **params) -> Potential:
    """Build a named potential with its declared constants and audit them.

    ``quadratic`` (lam), ``mixture`` (weights, means), ``pseudo_huber``,
    ``holder_power`` (s), ``finite_sum_quadratic`` (centers, curvatures).
    """
    if name == "quadratic":
        lam = float(params.pop("lam", 1.0))
        _no_extra(name, params)
        pot = Quadratic(lam=lam, lipschitz_grad=lam, holder=(1.0, lam))
    elif name == "pseudo_huber":
        _no_extra(name, params)
        # third derivative of sqrt(1+r^2) is bounded by 0.86 in 1D
        pot = PseudoHuber(
            lipschitz_grad=1.0,
            lipschitz_hess=1.0,
            holder=(1.0, 1.0),
            growth=Growth(a=1.0, b=1.0, gamma=1.0, xi=0.0, m=1.0),
        )
    elif name == "holder_power":
        s = float(params.pop("s", 0.5))
        _no_extra(name, params)
        if not 0 < s <= 1:
            raise ValueError(f"Hoelder exponent must lie in (0, 1], got {s}")
        pot = HolderPower(
            s=s,
            lipschitz_grad=1.0 if s == 1 else None,
            holder=(s, 2 ** (1 - s)),
            growth=Growth(a=1.0, b=1.0, gamma=1 + s, xi=s, m=1.0),
        )
    elif name == "mixture":
        weights = tuple(float(w) for w in params.pop("weights", (0.5, 0.5)))
        means = tuple(float(m) for m in params.pop("means", (-3.0, 3.0)))
        _no_extra(name, params)
        if d != 1:
            raise ValueError("mixture potentials are one-dimensional")
        spread = max(means) - min(means)
        # V'' = 1 - Var(component mean | x) lies in [1 - spread^2/4, 1]
        pot = GaussianMixture1D(
            weights=weights,
            means=means,
            dim=1,
            lipschitz_grad=1.0 + spread**2 / 4,
        )
    elif name == "finite_sum_quadratic":
        centers = params.pop("centers", (1.0, -1.0))
        curv = params.pop("curvatures", None)
        _no_extra(name, params)
        centers = tuple(float(c) for c in centers) if np.ndim(centers) == 1 else tuple(map(tuple, centers))
        curv = None if curv is None else tuple(float(c) for c in curv)
        L = 1.0 if curv is None else max(curv)
        pot = FiniteSumQuadratic(centers=centers, curvatures=curv, lipschitz_grad=L, holder=(1.0, L))
    else:
        raise ValueError(f"unknown potential {name!r}; expected one of {POTENTIAL_IDS}")
    return _audited(pot, d)


def _no_extra(name, params):
    if params:
        raise ValueError(f"unknown parameters for {name}: {sorted(params)}")
