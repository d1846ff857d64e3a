"""Brownian paths, seeded random streams, and Gaussian expectations.

Everything downstream (trajectory integration, the time-substitution recipe,
ensemble averaging) consumes Brownian increments or the law of W_t from this
module, so the Ito identities are pinned down here once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericFailure

_MASK64 = (1 << 64) - 1
DEFAULT_QUADRATURE_ORDER = 64


@dataclass(frozen=True)
class RngPolicy:
    """Pure mapping (master_seed, stream_index) -> independent random stream.

    Streams are split by counter jump-ahead on Philox, so selecting stream j
    is O(1) and the draw sequence never depends on how many workers run or
    which of them handles the trajectory.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= _MASK64:
            raise ValueError("master_seed must fit in 64 bits")
        if int(self.stream_index) < 0:
            raise ValueError("stream_index must be non-negative")

    def stream(self, index: int) -> "RngPolicy":
        return RngPolicy(self.master_seed, index)

    def generator(self) -> np.random.Generator:
        bitgen = np.random.Philox(key=self.master_seed).jumped(self.stream_index)
        return np.random.Generator(bitgen)

    def token(self) -> int:
        """64-bit label identifying this (master_seed, stream_index) pair."""
        mix = (self.stream_index * 0x9E3779B97F4A7C15) & _MASK64
        return (self.master_seed ^ mix) & _MASK64


@dataclass(frozen=True)
class BrownianPath:
    """One Wiener realization W(t_k) on a uniform grid starting at t=0."""

    grid: np.ndarray
    values: np.ndarray
    seed: int

    def __post_init__(self):
        grid = np.asarray(self.grid, float)
        values = np.asarray(self.values, float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 1:
            raise ValueError("grid and values must be matching 1-d arrays")
        if grid[0] != 0.0:
            raise ValueError("path must start at t=0")
        if values[0] != 0.0:
            raise ValueError("W(0) must be 0")
        if grid.size > 1:
            steps = np.diff(grid)
            if np.any(steps <= 0):
                raise ValueError("grid must be strictly increasing")
            if np.max(np.abs(steps - steps[0])) > 1e-12 * max(steps[0], 1.0):
                raise ValueError("grid must be uniform")

    @property
    def dt(self) -> float:
        if self.grid.size < 2:
            raise ValueError("path has no increments")
        return float(self.grid[1] - self.grid[0])

    @property
    def n_steps(self) -> int:
        return self.grid.size - 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def value_at(self, t: float) -> float:
        """W at a grid time; raises if t is not on the grid."""
        return float(self.values[self.index_at(t)])

    def index_at(self, t: float) -> int:
        step = self.dt if self.grid.size > 1 else 1.0
        idx = int(round(t / step)) if self.grid.size > 1 else 0
        if idx < 0 or idx >= self.grid.size or abs(self.grid[idx] - t) > 1e-9 * max(
            1.0, abs(t)
        ):
            raise ValueError(f"time {t} is not on the path grid")
        return idx


def sample_path(dt: float, n_steps: int, rng: RngPolicy) -> BrownianPath:
    """Draw a Brownian path on the uniform grid {0, dt, ..., n_steps*dt}."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    gen = rng.generator()
    increments = gen.normal(0.0, np.sqrt(dt), n_steps)
    values = np.concatenate([[0.0], np.cumsum(increments)])
    grid = np.linspace(0.0, n_steps * dt, n_steps + 1)
    return BrownianPath(grid=grid, values=values, seed=rng.token())


def sample_increment_batch(
    dt: float, n_steps: int, n_paths: int, rng: RngPolicy
) -> np.ndarray:
    """(n_paths, n_steps) iid increments from a single stream.

    Statistically identical to n_paths separate paths; used where per-path
    stream bookkeeping is unnecessary (bulk identity checks).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_steps < 1 or n_paths < 1:
        raise ValueError("n_steps and n_paths must be at least 1")
    gen = rng.generator()
    return gen.normal(0.0, np.sqrt(dt), (n_paths, n_steps))


def ito_exponential_expectation(alpha, t, n_paths, rng):
    """Monte Carlo estimate of E[exp(alpha W_t)], target exp(alpha^2 t / 2).

    Parameters
    ----------
    alpha : float
    t : float
        Time at which W is evaluated; W_t ~ Normal(0, t).
    n_paths : int
        Sample count, at least 2 so the standard error is defined.
    rng : RngPolicy

    Returns
    -------
    EnsembleEstimate
    """
    from .ensemble import EnsembleEstimate

    if t < 0:
        raise ValueError("t must be non-negative")
    if n_paths < 2:
        raise ValueError("need at least 2 paths for a standard error")
    gen = rng.generator()
    wt = gen.normal(0.0, np.sqrt(t), n_paths)
    samples = np.exp(alpha * wt)
    mean = float(samples.mean())
    std_error = float(samples.std(ddof=1) / np.sqrt(n_paths))
    return EnsembleEstimate(mean=mean, std_error=std_error, n=n_paths)


def gauss_hermite_nodes(t: float, sigma: float, order: int):
    """Nodes u_i and normalized weights for E[f(t - sigma W_t / 2)].

    With W_t ~ Normal(0, t) the substitution W = sqrt(2 t) x maps the
    expectation onto the Gauss-Hermite weight exp(-x^2), so
    u_i = t - (sigma/2) sqrt(2 t) x_i and the weights sum to 1.
    """
    if order < 1:
        raise ValueError("quadrature_order must be at least 1")
    x, w = np.polynomial.hermite.hermgauss(order)
    u = t - 0.5 * sigma * np.sqrt(2.0 * max(t, 0.0)) * x
    return u, w / np.sqrt(np.pi)


def gaussian_expectation(
    f, t: float, sigma: float, quadrature_order: int = DEFAULT_QUADRATURE_ORDER
) -> float:
    """E[f(t - sigma W_t / 2)] by Gauss-Hermite quadrature.

    Exact to machine precision when f is a polynomial of degree at most
    2*quadrature_order - 1.  For sigma = 0 or t = 0 the expectation collapses
    to f(t) exactly.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if sigma == 0.0 or t == 0.0:
        value = f(t)
        if not np.all(np.isfinite(value)):
            raise NumericFailure(f"f({t}) is not finite")
        return float(np.real(value))
    u, w = gauss_hermite_nodes(t, sigma, quadrature_order)
    vals = np.asarray([f(ui) for ui in u], dtype=float)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise NumericFailure(
            f"f not finite at quadrature node u={u[bad][0]!r}"
        )
    return float(np.dot(w, vals))
