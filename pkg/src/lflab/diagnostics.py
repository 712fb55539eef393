"""Monte Carlo estimators over chain ensembles.

Quantitative checks use only estimators whose expectation is known
analytically (moments, gradient norms, Fisher information with a known score
of the chain law).  The KDE helpers at the bottom are visual diagnostics and
always tagged approximate.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import gaussian_kde

from .analytic import Divergences
from .core import LabError, RunConfig
from .samplers import ChainState, run_block


@dataclass(frozen=True)
class EnsembleSnapshot:
    step: int
    time: float
    positions: np.ndarray
    g: np.ndarray | None = None
    evals: np.ndarray | None = None

    @property
    def n_chains(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def from_state(cls, state: ChainState) -> EnsembleSnapshot:
        return cls(step=state.k, time=state.t, positions=state.x, g=state.g, evals=state.evals)


@dataclass(frozen=True)
class EstimateCI:
    value: float
    std_error: float
    n_samples: int

    def interval(self, z: float = 3.0) -> tuple[float, float]:
        return self.value - z * self.std_error, self.value + z * self.std_error

    def covers(self, target: float, z: float = 3.0) -> bool:
        lo, hi = self.interval(z)
        return lo <= target <= hi


def mean_ci(values) -> EstimateCI:
    """Sample mean with the CLT standard error (0 for a single sample)."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    n = v.size
    if n == 0:
        raise ValueError("no samples")
    se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimateCI(float(v.mean()), se, n)


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------


def _run_chunk(args):
    config, chains, steps = args
    return run_block(config, chains, steps)


def ensemble_run(config: RunConfig, snapshot_steps=None, workers: int = 1) -> list[EnsembleSnapshot]:
    """Run ``config.n_chains`` chains, optionally split over worker processes.

    Chain j always uses stream (seed, j), and all per-chain arithmetic is
    row-wise, so the output does not depend on ``workers``.
    """
    if workers is None or workers < 1:
        workers = os.cpu_count() or 1
    chunks = [c for c in np.array_split(np.arange(config.n_chains), workers) if len(c)]
    steps = None if snapshot_steps is None else sorted(set(int(s) for s in snapshot_steps))
    if len(chunks) == 1:
        parts = [run_block(config, chunks[0], steps)]
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(_run_chunk, [(config, c, steps) for c in chunks]))
    out = []
    for states in zip(*parts):
        first = states[0]
        out.append(
            EnsembleSnapshot(
                step=first.k,
                time=first.t,
                positions=np.concatenate([s.x for s in states]),
                g=None if first.g is None else np.concatenate([s.g for s in states]),
                evals=np.concatenate([s.evals for s in states]),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def _positions(snapshot):
    if isinstance(snapshot, EnsembleSnapshot):
        return snapshot.positions
    return np.atleast_2d(np.asarray(snapshot, dtype=np.float64))


def empirical_moment(snapshot, order: int) -> EstimateCI:
    """Mean of |x|^order (order 2 or 4) across chains."""
    if order not in (2, 4):
        raise ValueError(f"order must be 2 or 4, got {order}")
    x = _positions(snapshot)
    sq = np.sum(x * x, axis=1)
    return mean_ci(sq if order == 2 else sq * sq)


def score_fi_estimate(snapshot, mu_score, pi_score) -> EstimateCI:
    """Mean of |s_mu(x) - s_pi(x)|^2 with both scores supplied by the caller."""
    x = _positions(snapshot)
    diff = np.asarray(mu_score(x)) - np.asarray(pi_score(x))
    return mean_ci(np.sum(np.atleast_2d(diff.reshape(x.shape[0], -1)) ** 2, axis=1))


def grad_second_moment(snapshot, potential) -> EstimateCI:
    """Mean of |grad V(x)|^2."""
    g = potential.grad(_positions(snapshot))
    return mean_ci(np.sum(g * g, axis=1))


def page_bias(snapshot: EnsembleSnapshot, potential) -> list[EstimateCI]:
    """Per-coordinate mean of g - grad V(x); zero in expectation for PAGE."""
    if snapshot.g is None:
        raise ValueError("snapshot carries no running gradient estimate")
    err = snapshot.g - potential.grad(snapshot.positions)
    return [mean_ci(err[:, j]) for j in range(err.shape[1])]


def gaussian_score(mean, var):
    """Score of N(mean e_1, var I); mean and var may be per-sample arrays."""
    mean = np.asarray(mean, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)

    def score(x):
        shift = np.zeros_like(x)
        shift[:, 0] = mean
        v = var.reshape(-1, 1) if var.ndim else var
        return -(x - shift) / v

    return score


# ---------------------------------------------------------------------------
# KDE diagnostics (approximate, 1D only)
# ---------------------------------------------------------------------------

KDE_MIN_SAMPLES = 100


def silverman_bandwidth(samples) -> float:
    s = np.asarray(samples, dtype=np.float64).reshape(-1)
    return 1.06 * s.std(ddof=1) * s.size ** (-1 / 5)


def kde_grid_density(samples, grid) -> np.ndarray:
    """Gaussian KDE with bandwidth 1.06 std n^(-1/5), evaluated on ``grid``."""
    s = np.asarray(samples, dtype=np.float64).reshape(-1)
    if s.size < KDE_MIN_SAMPLES:
        raise LabError(f"KDE needs at least {KDE_MIN_SAMPLES} samples, got {s.size}")
    kde = gaussian_kde(s, bw_method=1.06 * s.size ** (-1 / 5))
    return kde(np.asarray(grid, dtype=np.float64))


def grid_divergences(density, pi_density, grid) -> Divergences:
    """Trapezoid-rule (FI, KL, TV) between two densities tabulated on a grid.

    Always flagged approximate: plug-in derivatives of a KDE are biased.
    """
    grid = np.asarray(grid, dtype=np.float64)
    mu = np.asarray(density, dtype=np.float64)
    pi = np.asarray(pi_density, dtype=np.float64)
    live = (mu > 0) & (pi > 0)
    log_ratio = np.where(live, np.log(np.where(live, mu, 1.0)) - np.log(np.where(live, pi, 1.0)), 0.0)
    dlog = np.gradient(log_ratio, grid)
    fi = trapezoid(np.where(live, dlog**2 * mu, 0.0), grid)
    kl = trapezoid(np.where(live, mu * log_ratio, 0.0), grid)
    tv = 0.5 * trapezoid(np.abs(mu - pi), grid)
    return Divergences(fi=float(fi), kl=float(kl), tv=float(tv), approximate=True)
