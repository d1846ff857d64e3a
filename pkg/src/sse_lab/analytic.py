"""Closed-form decay observables for a single unstable level coupled to a
quasi-continuum: survival probability, per-channel transition probability,
the long-time Lorentzian line shape, and the golden-rule spectral function
with its noise-correction bound.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .errors import DomainWarning, NumericFailure
from .system import WWParams


@dataclass(frozen=True)
class DecayChannel:
    """One final level: its energy and the matrix element <m|V|s>."""

    e_m: float
    v_ms: complex

    def __post_init__(self):
        if not (np.isfinite(self.e_m) and np.isfinite(complex(self.v_ms))):
            raise ValueError("channel entries must be finite")


def corrected_decay_rate(gamma: float, sigma: float) -> float:
    """Effective survival decay rate Gamma (1 - sigma^2 Gamma / 8).

    Warns when the correction reaches 1, where the perturbative rate stops
    being meaningful (it would turn the decay into growth).
    """
    frac = sigma**2 * gamma / 8.0
    if frac >= 1.0:
        warnings.warn(
            f"sigma^2 Gamma / 8 = {frac:.3g} >= 1: corrected rate outside "
            "its validity range",
            DomainWarning,
            stacklevel=2,
        )
    return float(gamma * (1.0 - frac))


def survival_expectation(ww: WWParams, sigma: float, t: float) -> float:
    """E[|C_s(t)|^2] = exp[-Gamma (1 - sigma^2 Gamma / 8) t] for D=1."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return float(np.exp(-corrected_decay_rate(ww.gamma_scalar, sigma) * t))


def survival_expectation_degenerate(ww: WWParams, t: float) -> np.ndarray:
    """Averaged-coefficient propagator exp[(-iM - Gamma/2) t] for a
    degenerate D-level manifold; column A is E[C_{s_a}(t)] for initial
    state s_A.  Independent of the noise strength.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    gen = -1j * np.asarray(ww.m) - 0.5 * np.asarray(ww.gamma)
    return linalg.expm(gen * t)


def transition_expectation(
    ww: WWParams,
    channel: DecayChannel,
    sigma: float,
    t: float,
    mode: str = "exact",
) -> float:
    """E[|C_m(t)|^2] for one final channel of a D=1 decay.

    mode "exact" keeps every noise correction: decay exponent
    Gamma (1 - sigma^2 Gamma/8), cross-term envelope
    exp[-(Gamma/2)(1 - sigma^2 Gamma/16) t - sigma^2 D^2 t / 8] and
    oscillation frequency D (1 - sigma^2 Gamma/8), with D = E_s - E_m + M.
    mode "leading" drops the relative O(sigma^2 Gamma) pieces and uses the
    bare detuning in the Gaussian envelope.

    Negative t is evaluated as-is (analytic continuation): the Gaussian
    time-smear that generates the noisy law samples u = t - sigma W/2 on
    the whole line, so the closed form must stay callable there.
    """
    gamma = ww.gamma_scalar
    m = ww.m_scalar
    de = channel.e_m - ww.e_s
    dd = -de + m  # E_s - E_m + M
    lor = abs(channel.v_ms) ** 2 / (dd**2 + gamma**2 / 4.0)
    if mode == "exact":
        gamma_s = corrected_decay_rate(gamma, sigma)
        half = 0.5 * gamma * (1.0 - sigma**2 * gamma / 16.0)
        cross = np.exp(-half * t - 0.125 * sigma**2 * dd**2 * t)
        osc = np.cos(dd * (1.0 - sigma**2 * gamma / 8.0) * t)
        return float(lor * (np.exp(-gamma_s * t) + 1.0 - 2.0 * cross * osc))
    if mode == "leading":
        cross = np.exp(-0.125 * sigma**2 * de**2 * t - 0.5 * gamma * t)
        return float(lor * (np.exp(-gamma * t) + 1.0 - 2.0 * cross * np.cos(dd * t)))
    raise ValueError(f"unknown mode {mode!r}")


def lorentzian_profile(ww: WWParams, channel: DecayChannel) -> float:
    """Long-time line shape |V_ms|^2 / [(E_s - E_m + M)^2 + Gamma^2/4]."""
    gamma = ww.gamma_scalar
    dd = -(channel.e_m - ww.e_s) + ww.m_scalar
    if gamma == 0.0 and dd == 0.0:
        raise ZeroDivisionError("profile diverges at resonance when Gamma = 0")
    return float(abs(channel.v_ms) ** 2 / (dd**2 + gamma**2 / 4.0))


def _quad(f, lo, hi, tol, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, lo, hi, epsabs=tol, epsrel=tol,
                                      limit=400, **kw)
        except integrate.IntegrationWarning as exc:
            raise NumericFailure(f"quadrature did not converge: {exc}") from exc
    if not np.isfinite(val):
        raise NumericFailure("quadrature returned a non-finite value")
    return val


def golden_rule_F(
    a: float, t: float, gamma: float, quadrature_tol: float = 1e-10
) -> float:
    """Golden-rule spectral function, by adaptive quadrature.

    F[A, t] = int_-inf^inf du
        [e^{-Gamma t} + 1
         - 2 e^{-A (u^2 + Gamma^2 t^2 / 4) - Gamma t / 2} cos u]
        / (u^2 + Gamma^2 t^2 / 4)

    so that the total decay probability over a flat quasi-continuum is
    (Gamma t / 2 pi) F[sigma^2/(8t), t].  At A = 0 this reduces to
    (2 pi / Gamma t)(1 - e^{-Gamma t}).

    The cosine tail converges slowly, so the integral is split at
    u = 10 max(1, Gamma t, 1/sqrt(A)): the head is integrated adaptively,
    the tail of the A-independent part is added analytically, and the
    Gaussian-damped cross tail (suppressed by at least e^{-100}) is
    dropped.  A = 0 keeps the full cross term via Fourier-weighted
    quadrature instead.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if a < 0:
        raise ValueError("A must be nonnegative")
    c = 0.5 * gamma * t
    flat = np.exp(-2.0 * c) + 1.0
    base = flat * np.pi / c  # int of the A-independent part over the whole line
    if a == 0.0:
        cross = _quad(lambda u: 1.0 / (u * u + c * c), 0.0, np.inf,
                      quadrature_tol, weight="cos", wvar=1.0)
        return float(base - 4.0 * np.exp(-c) * cross)

    cut = 10.0 * max(1.0, 2.0 * c, 1.0 / np.sqrt(a))

    def head(u):
        u2 = u * u + c * c
        return (flat - 2.0 * np.exp(-a * u2 - c) * np.cos(u)) / u2

    core = 2.0 * _quad(head, 0.0, cut, quadrature_tol)
    tail = flat * (np.pi - 2.0 * np.arctan(cut / c)) / c
    return float(core + tail)


def golden_rule_F_delta(
    a: float, t: float, gamma: float, quadrature_tol: float = 1e-12
) -> float:
    """Exact noise correction C[A, t] = F[A, t] - F[0, t].

    Integrating dF/dA = 2 sqrt(pi/A) exp[-Gamma t/2 - A Gamma^2 t^2/4
    - 1/(4A)] in A and substituting v = sqrt(A') gives the single integral

      C[A, t] = 4 sqrt(pi) e^{-Gamma t / 2}
                int_0^sqrt(A) dv exp[-(v^2 Gamma^2 t^2 + 1/v^2) / 4]

    which stays accurate when the correction is exponentially small and
    direct subtraction of two F evaluations would drown in roundoff.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if a < 0:
        raise ValueError("A must be nonnegative")
    if a == 0.0:
        return 0.0
    g2t2 = (gamma * t) ** 2

    def integrand(v):
        return np.exp(-0.25 * (v * v * g2t2 + 1.0 / (v * v)))

    val = _quad(integrand, 0.0, np.sqrt(a), quadrature_tol)
    return float(4.0 * np.sqrt(np.pi) * np.exp(-0.5 * gamma * t) * val)


def golden_rule_correction_bound(sigma: float, t: float) -> float:
    """Bound 2 sigma sqrt(pi / 2t) exp(-2t / sigma^2) on |F[A,t] - F[0,t]|
    at the physical parameter A = sigma^2 / (8t)."""
    if t <= 0:
        raise ValueError("t must be positive")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0:
        return 0.0
    return float(2.0 * sigma * np.sqrt(np.pi / (2.0 * t)) * np.exp(-2.0 * t / sigma**2))
