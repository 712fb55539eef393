"""Discrete-time Langevin chains: LMC, SG-LMC, Gaussian-smoothed LMC and VR-LMC.

States are ensembles: ``ChainState.x`` has shape ``(n_chains, d)`` and every
row is driven by its own counter-based stream.  A single chain is simply an
ensemble with one row.  Drift noise for step k always comes from block
``(k, SLOT_XI)``, so variants that degenerate to LMC (exact oracle, p = 1,
eta = 0) replay exactly the same Brownian increments and trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    SLOT_PAGE,
    SLOT_TIME,
    SLOT_XI,
    Constant,
    ConfigError,
    DivergenceError,
    RngStream,
    RunConfig,
    check_admissible,
    normals,
    schedule_step,
    uniforms,
)
from .oracles import GaussianNoiseOracle, SmoothedOracle, StochasticGradientOracle
from .potentials import FiniteSumQuadratic, Potential


@dataclass(frozen=True)
class ChainState:
    """Ensemble state after ``k`` steps (elapsed time ``t``).

    Row j belongs to chain ``chains[j]``; its stream is
    ``RngStream(seed, chains[j], counter=k)``.  ``g`` is the PAGE running
    gradient estimate (VR-LMC only) and ``evals`` the cumulative number of
    component-gradient evaluations per chain.
    """

    x: np.ndarray
    k: int
    t: float
    seed: int
    chains: np.ndarray
    g: np.ndarray | None = None
    evals: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def stream(self, j: int = 0) -> RngStream:
        return RngStream(self.seed, int(self.chains[j]), self.k)

    def subset(self, mask) -> ChainState:
        return replace(
            self,
            x=self.x[mask],
            chains=self.chains[mask],
            g=None if self.g is None else self.g[mask],
            evals=None if self.evals is None else self.evals[mask],
        )


def initial_state(x0, seed: int = 0, chains=None, g=None, evals=None) -> ChainState:
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    if chains is None:
        chains = np.arange(x0.shape[0])
    chains = np.asarray(chains, dtype=np.int64)
    if evals is None:
        evals = np.zeros(x0.shape[0], dtype=np.int64)
    return ChainState(x=x0, k=0, t=0.0, seed=seed, chains=chains, g=g, evals=evals)


def lmc_update(x, grad, h: float, xi):
    """x - h grad + sqrt(2h) xi, the deterministic core of one step."""
    return x - h * grad + math.sqrt(2 * h) * xi


def drift_noise(state: ChainState) -> np.ndarray:
    return normals(state.seed, state.chains, state.k, SLOT_XI, state.d)


def _check_finite(arr, state: ChainState, what: str):
    ok = np.all(np.isfinite(arr), axis=1)
    if not np.all(ok):
        j = int(np.argmin(ok))
        raise DivergenceError(
            f"non-finite {what} at step {state.k} in chain {int(state.chains[j])}: x={state.x[j].tolist()}",
            step=state.k,
            chain=int(state.chains[j]),
            position=state.x[j].copy(),
        )


def _advance(state: ChainState, G, h: float, cost) -> ChainState:
    _check_finite(G, state, "gradient")
    x_new = lmc_update(state.x, G, h, drift_noise(state))
    new = replace(state, x=x_new, k=state.k + 1, t=state.t + h, evals=state.evals + cost)
    _check_finite(x_new, new, "position")
    return new


def lmc_step(state: ChainState, potential: Potential, h: float) -> ChainState:
    return _advance(state, potential.grad(state.x), h, potential.n_components)


def sg_lmc_step(state: ChainState, oracle: StochasticGradientOracle, h: float) -> ChainState:
    G = oracle.query(state.x, state.seed, state.chains, state.k)
    return _advance(state, G, h, getattr(oracle, "batch", 1))


def _page_refresh(state_before: ChainState, state_after: ChainState, fs, p: float) -> ChainState:
    u = uniforms(state_before.seed, state_before.chains, state_before.k, SLOT_PAGE, 2)
    n = fs.n_components
    full = u[:, 0] < p
    i = np.minimum((u[:, 1] * n).astype(np.int64), n - 1)
    x_old, x_new = state_before.x, state_after.x
    g = np.empty_like(state_before.g)
    if np.any(full):
        g[full] = fs.grad(x_new[full])
    part = ~full
    if np.any(part):
        ip = i[part]
        g[part] = state_before.g[part] + fs.component_grad(ip, x_new[part]) - fs.component_grad(ip, x_old[part])
    cost = np.where(full, n, 2)
    return replace(state_after, g=g, evals=state_after.evals + cost)


def vr_lmc_step(state: ChainState, fs: FiniteSumQuadratic, h: float, p: float) -> ChainState:
    """x' = x - h g + sqrt(2h) xi, then the PAGE update of g.

    With probability p the estimate is refreshed to grad V(x') (n component
    gradients); otherwise a uniformly drawn component i contributes the
    correction grad f_i(x') - grad f_i(x) (2 component gradients).
    """
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if state.g is None:
        raise ValueError("VR-LMC state needs a running gradient estimate g")
    moved = _advance(state, state.g, h, 0)
    return _page_refresh(state, moved, fs, p)


def interpolate(state: ChainState, potential: Potential, h: float, tau) -> np.ndarray:
    """Point on the interpolated path at offset tau in [0, h] past step k.

    Uses the same drift noise as the next full step would, so ``tau = h``
    reproduces ``lmc_step`` exactly.  The chain is not advanced.
    """
    return _partial(state, potential.grad(state.x), h, tau)


def _partial(state: ChainState, G, h: float, tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=np.float64)
    if np.any(tau < 0) or np.any(tau > h):
        raise ValueError(f"interpolation offset must lie in [0, h={h}], got {tau}")
    tau_col = tau.reshape(-1, 1) if tau.ndim else tau
    return state.x - tau_col * G + np.sqrt(2 * tau_col) * drift_noise(state)


# ---------------------------------------------------------------------------
# Config-driven runs
# ---------------------------------------------------------------------------


class Sampler:
    """Binds a RunConfig to its step rule: drift estimate, then advance."""

    def __init__(self, config: RunConfig):
        self.config = config
        pot = config.potential
        self.potential = pot
        if config.variant == "sg_lmc":
            self.oracle = GaussianNoiseOracle(pot, config.d, config.bias, config.noise_var)
        elif config.variant == "gs_lmc":
            self.oracle = SmoothedOracle(pot, config.d, config.eta, config.batch)
        else:
            self.oracle = None

    def init(self, chains) -> ChainState:
        cfg = self.config
        chains = np.asarray(chains, dtype=np.int64)
        x0 = cfg.init.sample(cfg.d, cfg.seed, chains)
        evals = np.zeros(len(chains), dtype=np.int64)
        g = None
        if cfg.variant == "vr_lmc":
            g = self.potential.grad(x0)
            evals = evals + self.potential.n_components
        return initial_state(x0, cfg.seed, chains, g=g, evals=evals)

    def drift(self, state: ChainState) -> np.ndarray:
        if self.config.variant == "vr_lmc":
            return state.g
        if self.config.variant == "lmc":
            return self.potential.grad(state.x)
        return self.oracle.query(state.x, state.seed, state.chains, state.k)

    def step(self, state: ChainState, h: float, G=None) -> ChainState:
        cfg = self.config
        if G is None:
            G = self.drift(state)
        if cfg.variant == "vr_lmc":
            moved = _advance(state, G, h, 0)
            return _page_refresh(state, moved, self.potential, cfg.p)
        cost = self.potential.n_components if cfg.variant == "lmc" else cfg.batch
        return _advance(state, G, h, cost)


def run_block(config: RunConfig, chains, snapshot_steps=None) -> list[ChainState]:
    """Run the given chains for N steps and return states at ``snapshot_steps``."""
    steps = _snapshot_steps(config.N, snapshot_steps)
    sampler = Sampler(config)
    state = sampler.init(chains)
    out = []
    if steps and steps[0] == 0:
        out.append(state)
    wanted = set(steps)
    for k in range(1, config.N + 1):
        h = schedule_step(config.schedule, k)
        state = sampler.step(state, h)
        if k in wanted:
            out.append(state)
    return out


def run_chain(config: RunConfig, snapshot_steps=None, chain_index: int = 0) -> list[ChainState]:
    """Trajectory of one chain; by default every step 0..N is recorded."""
    if snapshot_steps is None:
        snapshot_steps = range(config.N + 1)
    return run_block(config, [chain_index], snapshot_steps)


def _snapshot_steps(N, snapshot_steps):
    if snapshot_steps is None:
        return [N]
    steps = sorted(set(int(s) for s in snapshot_steps))
    if steps and (steps[0] < 0 or steps[-1] > N):
        raise ConfigError(f"snapshot steps must lie in [0, {N}], got {steps}")
    return steps


@dataclass(frozen=True)
class AveragedDraw:
    """Draws from the time-averaged law together with their sampled times."""

    points: np.ndarray
    times: np.ndarray
    k: np.ndarray
    tau: np.ndarray
    chains: np.ndarray


def averaged_draw(config: RunConfig, chains=None) -> AveragedDraw:
    """One draw per chain from the average of the interpolated laws over [0, Nh].

    Each chain picks U uniform on [0, Nh], runs k = floor(U/h) full steps
    (capped at N-1) and returns the partial step of length U - kh.
    """
    if not isinstance(config.schedule, Constant):
        raise ConfigError("averaged draws need a constant step size")
    if config.N < 1:
        raise ConfigError("averaged draws need N >= 1")
    h = config.schedule.h
    if chains is None:
        chains = np.arange(config.n_chains)
    chains = np.asarray(chains, dtype=np.int64)
    total = config.N * h
    U = total * uniforms(config.seed, chains, 0, SLOT_TIME, 1)[:, 0]
    k = np.minimum(np.floor(U / h).astype(np.int64), config.N - 1)
    tau = np.clip(U - k * h, 0.0, h)
    # U == Nh lands in the last step with a full partial step
    points = np.empty((len(chains), config.d))
    sampler = Sampler(config)
    state = sampler.init(chains)
    rows = np.arange(len(chains))
    for s in range(int(k.max()) + 1):
        G = sampler.drift(state)
        here = k[rows] == s
        if np.any(here):
            sub = state.subset(here)
            points[rows[here]] = _partial(sub, G[here], h, tau[rows[here]])
        keep = ~here
        if not np.any(keep):
            break
        state = sampler.step(state.subset(keep), h, G[keep])
        rows = rows[keep]
    return AveragedDraw(points=points, times=U, k=k, tau=tau, chains=chains)


def validate_step(variant: str, h: float, potential, d: int = 1, p: float = 1.0, eta: float = 0.0, batch: int = 1):
    """Raise ConfigError when h is outside the variant's admissible open interval."""
    check_admissible(variant, h, potential, d, p, eta, batch)
