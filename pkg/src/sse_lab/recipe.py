"""Time-substitution recipe: the noise average of any deterministic
probability-vs-time function is that function evaluated at the shifted time
t - sigma W_t / 2 and averaged over the Gaussian law of W_t.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import special

from .stochastic import DEFAULT_QUADRATURE_ORDER, gaussian_expectation


def recipe_transform(
    f: Callable[[float], float],
    sigma: float,
    t: float,
    quadrature_order: int = DEFAULT_QUADRATURE_ORDER,
) -> float:
    """E[f(t - sigma W_t / 2)] with W_t ~ N(0, t), by Gauss-Hermite."""
    return gaussian_expectation(f, t, sigma, quadrature_order)


def wt_moments(k: int, t: float) -> float:
    """E[W_t^k] for Brownian motion: 0 for odd k, (k-1)!! t^{k/2} for even."""
    if k < 0 or k != int(k):
        raise ValueError("k must be a nonnegative integer")
    if t < 0:
        raise ValueError("t must be nonnegative")
    k = int(k)
    if k % 2 == 1:
        return 0.0
    return float(special.factorial2(k - 1, exact=True) * t ** (k // 2)) if k else 1.0


def corrected_decay_rate(gamma: float, sigma: float) -> float:
    """Survival rate with its noise correction; see the analytic module."""
    from .analytic import corrected_decay_rate as _impl

    return _impl(gamma, sigma)


def negative_argument_mass(sigma: float, t: float) -> float:
    """P[t - sigma W_t / 2 < 0], the weight the recipe places on negative
    shifted times.

    The substituted function is only defined for nonnegative arguments in
    decay applications; this diagnostic quantifies how much probability the
    Gaussian average assigns outside that domain.  Equals
    Phi(-2 sqrt(t) / sigma), which is exponentially small for t >> sigma^2.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0 or t == 0.0:
        return 0.0
    return float(0.5 * special.erfc(np.sqrt(2.0 * t) / sigma))
