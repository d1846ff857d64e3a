"""Small-time (Zeno) survival analysis, the spontaneous reduction rate with
its experimental bounds, and damped Rabi precession of a driven two-level
system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .system import SystemSpec

HBAR_GEV_S = 6.582119e-25  # GeV s, CODATA, 7 significant figures

# Published lower limits on the reduction-rate mass parameter from observed
# coherent particle oscillations (GeV).
OSCILLATION_BOUNDS = {
    "neutrino": 1e-20,
    "k-meson": 2e-15,
    "b-meson": 2e-13,
}


@dataclass(frozen=True)
class BlochState:
    """Polarization 3-vector of a two-level density matrix at time t."""

    r: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.r, float)
        if r.shape != (3,):
            raise ValueError("R must be a real 3-vector")
        if np.linalg.norm(r) > 1.0 + 1e-9:
            raise ValueError("|R| must not exceed 1")
        object.__setattr__(self, "r", r)

    @property
    def r3(self) -> float:
        return float(self.r[2])


def zeno_survival_expansion(variance: float, sigma: float, t: float) -> float:
    """Small-time survival 1 - <(H - <H>)^2> (sigma^2 t / 4 + t^2).

    The noise contributes the linear-in-t term, so for t below the
    crossover sigma^2/4 the stochastic loss dominates the quadratic Zeno
    loss.  Valid only for small t; see zeno_neglected_scale.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    return float(1.0 - variance * (sigma**2 * t / 4.0 + t * t))


def zeno_neglected_scale(sigma: float, t: float) -> float:
    """Scale sigma^4 t^2 + t^3 of the first terms dropped by the expansion."""
    return float(sigma**4 * t**2 + t**3)


def energy_variance(spec: SystemSpec) -> float:
    """Initial-state energy variance <H^2> - <H>^2 with H = H0 + V.

    Under the selection rule this equals (V^2)_ss; without it the diagonal
    coupling shifts the mean and the variance picks up -V_ss^2.
    """
    h = spec.hamiltonian
    s = spec.initial
    mean = h[s, s].real
    second = (h @ h)[s, s].real
    return float(second - mean**2)


def reduction_rate(variance: float, sigma: float) -> float:
    """Noise-induced transition rate sigma^2 variance / 4 out of the state."""
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    return float(sigma**2 * variance / 4.0)


def decay_bound_m_sigma(e_d: float) -> float:
    """Lower bound E_D / (8 pi) on M_sigma = 1/sigma^2 from an observed
    decay with characteristic energy release E_D."""
    if e_d < 0:
        raise ValueError("e_d must be nonnegative")
    return float(e_d / (8.0 * np.pi))


def rabi_evolve(
    r0: BlochState, omega_vec, sigma: float, t: float
) -> BlochState:
    """Expected polarization under noisy precession about omega_vec.

    The mean polarization precesses classically (Rodrigues rotation about
    the unit drive axis by angle Omega t) and shrinks isotropically by
    exp(-Omega^2 sigma^2 t / 8).  The damping factor is exact for the
    component transverse to the drive axis, which is the geometry of a
    resonant Rabi experiment started in an energy eigenstate; a polarization
    component along the drive axis is actually conserved, so treat results
    for tilted initial states as an upper bound on the decay.
    """
    omega_vec = np.asarray(omega_vec, float)
    if omega_vec.shape != (3,):
        raise ValueError("omega_vec must be a real 3-vector")
    omega = np.linalg.norm(omega_vec)
    if omega == 0.0:
        raise ValueError("omega_vec must be nonzero")
    if t < 0:
        raise ValueError("t must be nonnegative")
    axis = omega_vec / omega
    angle = omega * t
    r = r0.r
    rotated = (
        r * np.cos(angle)
        + np.cross(axis, r) * np.sin(angle)
        + axis * np.dot(axis, r) * (1.0 - np.cos(angle))
    )
    damping = np.exp(-(omega**2) * sigma**2 * t / 8.0)
    return BlochState(r=damping * rotated, time=r0.time + t)


def rabi_probabilities(r3_expect: float) -> tuple[float, float]:
    """Up/down occupation probabilities (1 +- R3)/2 from the polarization."""
    if abs(r3_expect) > 1.0 + 1e-12:
        raise ValueError("|R3| must not exceed 1")
    r3 = min(1.0, max(-1.0, float(r3_expect)))
    return (0.5 * (1.0 + r3), 0.5 * (1.0 - r3))


def itano_bound(omega_mhz: float, probability_accuracy: float) -> float:
    """Lower bound on M_sigma = 1/sigma^2 (GeV) from a driven two-level
    transition showing full Rabi flips.

    An undetected damping of the half-period flip probability requires
    (1/2)(1 - exp(-pi Omega sigma^2 / 8)) <= accuracy; solving at equality
    gives M_sigma = pi Omega / (-8 ln(1 - 2 accuracy)), with the drive
    frequency converted from MHz to GeV through hbar.
    """
    if not 0.0 < probability_accuracy < 0.5:
        raise ValueError("probability_accuracy must lie in (0, 1/2)")
    if omega_mhz <= 0:
        raise ValueError("omega_mhz must be positive")
    omega_gev = omega_mhz * 1e6 * HBAR_GEV_S
    sigma_sq = -8.0 * np.log(1.0 - 2.0 * probability_accuracy) / (np.pi * omega_gev)
    return float(1.0 / sigma_sq)


def bound_record(kind: str, value: float, bound_gev: float, formula: str) -> dict:
    """JSON-ready record for one computed bound."""
    return {"kind": kind, "input": value, "bound_GeV": bound_gev, "formula": formula}
