"""Shared types: step-size schedules, counter-based Gaussian streams, run configs.

All randomness in the package is drawn from Philox4x64-10 keyed by
``(master_seed, chain_index)``.  A draw is addressed by a counter block
``(counter, slot)``: ``counter`` is the chain's step index and ``slot`` names
the purpose of the draw within that step (drift noise, oracle noise, PAGE
coin, ...).  Because the output is a pure function of the address, ensembles
can be split across any number of workers without changing a single bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np
from scipy.special import ndtri


class LabError(Exception):
    """Base class for errors raised by the package."""


class ConfigError(LabError):
    """Invalid run configuration or inadmissible parameters."""


class DivergenceError(LabError):
    """A chain produced a non-finite state."""

    def __init__(self, message, step=None, chain=None, position=None):
        super().__init__(message)
        self.step = step
        self.chain = chain
        self.position = position


class QuadratureError(LabError):
    """Adaptive quadrature failed to converge."""

    def __init__(self, message, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


# ---------------------------------------------------------------------------
# Step-size schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    h: float

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0):
            raise ConfigError(f"constant step size must be positive, got h={self.h}")

    @property
    def max_step(self) -> float:
        return self.h


@dataclass(frozen=True)
class PowerDecay:
    """h_k = h0 / k**alpha, with alpha in (1/2, 1] so that sum h_k = inf, sum h_k^2 < inf."""

    h0: float
    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.h0) and self.h0 > 0):
            raise ConfigError(f"h0 must be positive, got {self.h0}")
        if not (0.5 < self.alpha <= 1.0):
            raise ConfigError(f"decay exponent must lie in (1/2, 1], got alpha={self.alpha}")

    @property
    def max_step(self) -> float:
        return self.h0


StepSchedule = Constant | PowerDecay


def schedule_step(s: StepSchedule, k: int) -> float:
    """Step size h_k used for the transition from step k-1 to step k (k >= 1)."""
    if k < 1:
        raise ValueError(f"step index must be >= 1, got {k}")
    if isinstance(s, Constant):
        return s.h
    # same ufunc as schedule_steps, so scalar and vector step sizes agree bitwise
    return float(s.h0 / np.power(np.array([k], dtype=np.float64), s.alpha)[0])


def schedule_steps(s: StepSchedule, n: int) -> np.ndarray:
    """Vector (h_1, ..., h_n)."""
    if isinstance(s, Constant):
        return np.full(n, s.h)
    k = np.arange(1, n + 1, dtype=np.float64)
    return s.h0 / k**s.alpha


def schedule_elapsed(s: StepSchedule, n: int) -> float:
    """tau_n = h_1 + ... + h_n, accumulated left to right (tau_0 = 0)."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    t = 0.0
    for k in range(1, n + 1):
        t += schedule_step(s, k)
    return t


def schedule_elapsed_all(s: StepSchedule, n: int) -> np.ndarray:
    """(tau_0, ..., tau_n) with the same left-to-right accumulation as ``schedule_elapsed``."""
    out = np.empty(n + 1)
    out[0] = 0.0
    t = 0.0
    for k, hk in enumerate(schedule_steps(s, n), start=1):
        t += float(hk)
        out[k] = t
    return out


# ---------------------------------------------------------------------------
# Philox4x64-10
# ---------------------------------------------------------------------------

_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_PHILOX_M0 = np.uint64(0xD2E7470EE14C6C93)
_PHILOX_M1 = np.uint64(0xCA5A826395121157)
_PHILOX_W0 = np.uint64(0x9E3779B97F4A7C15)
_PHILOX_W1 = np.uint64(0xBB67AE8584CAA73B)
_U53 = 2.0**-53

# Counter slots within one step.  Oracle draws use ORACLE + l for l = 0..B-1.
SLOT_XI = 0
SLOT_PAGE = 1
SLOT_INIT = 2
SLOT_TIME = 3
SLOT_ORACLE = 16


def _mulhilo(a, b):
    lo = a * b
    a_lo, a_hi = a & _M32, a >> _S32
    b_lo, b_hi = b & _M32, b >> _S32
    p0 = a_lo * b_lo
    p1 = a_hi * b_lo
    p2 = a_lo * b_hi
    p3 = a_hi * b_hi
    carry = ((p0 >> _S32) + (p1 & _M32) + (p2 & _M32)) >> _S32
    hi = p3 + (p1 >> _S32) + (p2 >> _S32) + carry
    return hi, lo


def philox4x64(counter, key):
    """Philox4x64-10 block function, vectorized over broadcastable uint64 inputs.

    ``counter`` is a 4-tuple and ``key`` a 2-tuple of integer arrays.  Returns
    the four output words.  Matches ``numpy.random.Philox`` (which increments
    its counter before each block).
    """
    c0, c1, c2, c3 = np.broadcast_arrays(*(np.asarray(c, dtype=np.uint64) for c in counter))
    k0, k1 = (np.asarray(k, dtype=np.uint64) for k in key)
    with np.errstate(over="ignore"):
        for r in range(10):
            if r:
                k0 = k0 + _PHILOX_W0
                k1 = k1 + _PHILOX_W1
            hi0, lo0 = _mulhilo(_PHILOX_M0, c0)
            hi1, lo1 = _mulhilo(_PHILOX_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def _seed_word(seed: int) -> np.uint64:
    return np.uint64(int(seed) % 2**64)


@numba.njit(cache=True, inline="always")
def _mulhilo_scalar(a, b):
    m32 = np.uint64(0xFFFFFFFF)
    s32 = np.uint64(32)
    lo = a * b
    a_lo, a_hi = a & m32, a >> s32
    b_lo, b_hi = b & m32, b >> s32
    p0 = a_lo * b_lo
    p1 = a_hi * b_lo
    p2 = a_lo * b_hi
    p3 = a_hi * b_hi
    carry = ((p0 >> s32) + (p1 & m32) + (p2 & m32)) >> s32
    return p3 + (p1 >> s32) + (p2 >> s32) + carry, lo


@numba.njit(cache=True)
def _philox_rows(seed, chains, counter, slot, width):
    n = chains.shape[0]
    lanes = (width + 3) // 4
    out = np.empty((n, lanes * 4), dtype=np.uint64)
    for j in range(n):
        for lane in range(lanes):
            c0 = np.uint64(lane)
            c1 = counter
            c2 = slot
            c3 = np.uint64(0)
            k0 = seed
            k1 = chains[j]
            for r in range(10):
                if r > 0:
                    k0 = k0 + np.uint64(0x9E3779B97F4A7C15)
                    k1 = k1 + np.uint64(0xBB67AE8584CAA73B)
                hi0, lo0 = _mulhilo_scalar(np.uint64(0xD2E7470EE14C6C93), c0)
                hi1, lo1 = _mulhilo_scalar(np.uint64(0xCA5A826395121157), c2)
                c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
            out[j, 4 * lane] = c0
            out[j, 4 * lane + 1] = c1
            out[j, 4 * lane + 2] = c2
            out[j, 4 * lane + 3] = c3
    return out[:, :width]


def _raw_words(seed, chains, counter, slot, width):
    """(n_chains, width) uint64 words for the block (counter, slot) of each chain.

    Word 4*l + i of a row is output i of the Philox block with counter
    (l, counter, slot, 0) and key (seed, chain).
    """
    chains = np.ascontiguousarray(np.asarray(chains).reshape(-1).astype(np.uint64))
    return _philox_rows(
        _seed_word(seed), chains, np.uint64(int(counter) % 2**64), np.uint64(slot), int(width)
    )


def _raw_words_reference(seed, chains, counter, slot, width):
    """Pure-numpy twin of ``_raw_words`` built on :func:`philox4x64`."""
    chains = np.asarray(chains, dtype=np.uint64).reshape(-1, 1)
    lanes = np.arange((width + 3) // 4, dtype=np.uint64).reshape(1, -1)
    ctr = np.uint64(int(counter) % 2**64)
    words = philox4x64((lanes, ctr, np.uint64(slot), np.uint64(0)), (_seed_word(seed), chains))
    out = np.stack(words, axis=-1).reshape(chains.shape[0], -1)
    return out[:, :width]


def uniforms(seed: int, chains, counter: int, slot: int, width: int) -> np.ndarray:
    """Uniforms in the open interval (0, 1), shape (n_chains, width)."""
    w = _raw_words(seed, chains, counter, slot, width)
    return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def normals(seed: int, chains, counter: int, slot: int, d: int) -> np.ndarray:
    """Standard Gaussian vectors by inverse CDF, shape (n_chains, d)."""
    return ndtri(uniforms(seed, chains, counter, slot, d))


@dataclass
class RngStream:
    """Per-chain Gaussian stream; the only mutable core type.

    Each call to :meth:`gaussian` consumes exactly one counter block.
    """

    master_seed: int
    chain_index: int
    counter: int = 0

    def gaussian(self, d: int, slot: int = SLOT_XI) -> np.ndarray:
        z = normals(self.master_seed, [self.chain_index], self.counter, slot, d)[0]
        self.counter += 1
        return z

    def uniform(self, width: int = 1, slot: int = SLOT_XI) -> np.ndarray:
        u = uniforms(self.master_seed, [self.chain_index], self.counter, slot, width)[0]
        self.counter += 1
        return u


def gaussian_draw(stream: RngStream, d: int) -> np.ndarray:
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return stream.gaussian(d)


def as_point(coords: Sequence[float] | np.ndarray, d: int | None = None) -> np.ndarray:
    """Validate a point: finite float64 vector, optionally of dimension d."""
    x = np.asarray(coords, dtype=np.float64).reshape(-1)
    if d is not None and x.shape[0] != d:
        raise ValueError(f"expected a point in R^{d}, got length {x.shape[0]}")
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise ValueError(f"point must be non-empty and finite, got {x}")
    return x


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InitSpec:
    """Initial law: point mass at ``mean`` or Gaussian N(mean, var I).

    ``mean`` is either a scalar placed on the first axis or a full vector.
    """

    kind: str = "point"
    mean: float | tuple[float, ...] = 0.0
    var: float = 0.0

    def __post_init__(self):
        if self.kind not in ("point", "gaussian"):
            raise ConfigError(f"init kind must be 'point' or 'gaussian', got {self.kind!r}")
        if self.kind == "gaussian" and not self.var > 0:
            raise ConfigError(f"gaussian init needs var > 0, got {self.var}")

    def mean_vector(self, d: int) -> np.ndarray:
        if np.ndim(self.mean) == 0:
            m = np.zeros(d)
            m[0] = float(self.mean)
            return m
        m = np.asarray(self.mean, dtype=np.float64)
        if m.shape != (d,):
            raise ConfigError(f"init mean has length {m.size}, dimension is {d}")
        return m

    def sample(self, d: int, seed: int, chains: np.ndarray) -> np.ndarray:
        m = self.mean_vector(d)
        x = np.broadcast_to(m, (len(chains), d)).copy()
        if self.kind == "gaussian":
            x += math.sqrt(self.var) * normals(seed, chains, 0, SLOT_INIT, d)
        return x


VARIANTS = ("lmc", "sg_lmc", "gs_lmc", "vr_lmc")


@dataclass(frozen=True)
class RunConfig:
    """Fully deterministic description of an ensemble run.

    The potential must be picklable (all built-ins are) so ensembles can be
    shipped to worker processes.  Variant parameters:

    * ``sg_lmc``: ``bias`` (scalar on the first axis, or vector) and ``noise_var``
      for the injected Gaussian oracle ``G = grad V + bias + sqrt(noise_var) * zeta``;
    * ``gs_lmc``: ``eta`` and ``batch`` for Gaussian smoothing;
    * ``vr_lmc``: ``p`` for the PAGE estimator (potential must be a finite sum).
    """

    potential: object
    variant: str = "lmc"
    schedule: StepSchedule = field(default_factory=lambda: Constant(0.01))
    N: int = 100
    d: int = 1
    n_chains: int = 1
    seed: int = 0
    init: InitSpec = field(default_factory=InitSpec)
    p: float = 1.0
    eta: float = 0.0
    batch: int = 1
    bias: float | tuple[float, ...] = 0.0
    noise_var: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown sampler variant {self.variant!r}; expected one of {VARIANTS}")
        if self.N < 0:
            raise ConfigError(f"N must be >= 0, got {self.N}")
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if self.n_chains < 1:
            raise ConfigError(f"n_chains must be >= 1, got {self.n_chains}")
        pot_dim = getattr(self.potential, "dim", None)
        if pot_dim is not None and pot_dim != self.d:
            raise ConfigError(f"potential is defined on R^{pot_dim}, run dimension is {self.d}")
        self.init.mean_vector(self.d)
        h = self.schedule.max_step
        check_admissible(self.variant, h, self.potential, self.d, self.p, self.eta, self.batch)

    @property
    def needs_oracle(self) -> bool:
        return self.variant in ("sg_lmc", "gs_lmc")


def check_admissible(variant, h, potential, d, p=1.0, eta=0.0, batch=1):
    """Raise ConfigError unless h lies in the open step range of the variant's guarantee."""
    if variant == "vr_lmc":
        if not 0 < p <= 1:
            raise ConfigError(f"PAGE probability must lie in (0, 1], got p={p}")
        if not hasattr(potential, "component_grad"):
            raise ConfigError("vr_lmc requires a finite-sum potential")
        L = potential.lipschitz_grad
        limit = math.sqrt(p) / (5 * L)
        if not h < limit:
            raise ConfigError(
                f"step size h={h} outside the VR-LMC range h < sqrt(p)/(5L) = {limit:.6g} (thm10)"
            )
        return
    if variant == "gs_lmc":
        if batch < 1:
            raise ConfigError(f"batch must be >= 1, got {batch}")
        if eta < 0:
            raise ConfigError(f"smoothing radius must be >= 0, got eta={eta}")
        holder = potential.holder
        if holder is None:
            raise ConfigError("gs_lmc requires a potential with a declared Hoelder constant")
        s, L = holder
        if eta == 0:
            if s < 1:
                raise ConfigError("eta = 0 is only admissible for Lipschitz gradients (s = 1)")
            L_hat = L
        else:
            L_hat = L * d ** ((1 - s) / 2) / eta ** (1 - s)
        limit = 1 / (14 * L_hat)
        if not h < limit:
            raise ConfigError(
                f"step size h={h} outside the SG-LMC range h < 1/(14 L_hat) = {limit:.6g} (thm6)"
            )
        return
    L = potential.lipschitz_grad
    if L is None:
        raise ConfigError(f"{variant} requires a potential with a declared gradient Lipschitz constant")
    if variant == "sg_lmc":
        limit = 1 / (14 * L)
        if not h < limit:
            raise ConfigError(
                f"step size h={h} outside the SG-LMC range h < 1/(14 L_hat) = {limit:.6g} (thm6)"
            )
        return
    limit = 1 / (6 * L)
    if not h < limit:
        raise ConfigError(f"step size h={h} outside the LMC range h < 1/(6L) = {limit:.6g} (thm1)")
