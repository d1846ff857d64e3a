"""Decay-problem definitions: spectra, perturbations, and on-shell data.

A system is an unperturbed spectrum {E_n}, a Hermitian perturbation V, a
degenerate manifold of initial states, and the index actually occupied at
t=0.  From these the on-shell mass shift M and width Gamma are computed,
which feed every closed-form expression downstream.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationWarning, NumericFailure

_HERM_RTOL = 1e-12
_DEGEN_RTOL = 1e-12


@dataclass(frozen=True)
class SystemSpec:
    """Spectrum, perturbation, degenerate manifold, and initial state.

    Parameters
    ----------
    energies : (d,) real array
        Unperturbed eigenvalues E_n.
    v : (d, d) complex Hermitian array
        Perturbation matrix elements V_mn.
    manifold : tuple of int
        Indices of the degenerate manifold {s_a}; their energies must agree
        to 1e-12 relative.
    initial : int
        Index s_A occupied at t=0; must lie in the manifold.
    selection_rule : bool
        When asserted, V must vanish within the manifold (checked here);
        the linearized machinery requires it.
    """

    energies: np.ndarray
    v: np.ndarray
    manifold: tuple
    initial: int
    selection_rule: bool = True

    def __post_init__(self):
        energies = np.atleast_1d(np.asarray(self.energies, float))
        v = np.asarray(self.v, complex)
        manifold = tuple(int(i) for i in self.manifold)
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "manifold", manifold)
        object.__setattr__(self, "initial", int(self.initial))
        d = energies.size
        if v.shape != (d, d):
            raise ValueError(f"V must be {d}x{d}, got {v.shape}")
        scale = max(np.linalg.norm(v), 1.0)
        if np.linalg.norm(v - v.conj().T) > _HERM_RTOL * scale:
            raise ValueError("V must be Hermitian to 1e-12 relative")
        if not manifold:
            raise ValueError("manifold must contain at least one index")
        if len(set(manifold)) != len(manifold):
            raise ValueError("manifold indices must be distinct")
        if any(i < 0 or i >= d for i in manifold):
            raise ValueError("manifold index out of range")
        if self.initial not in manifold:
            raise ValueError("initial state must belong to the manifold")
        es = energies[list(manifold)]
        e_scale = max(np.max(np.abs(es)), 1.0)
        if np.max(np.abs(es - es[0])) > _DEGEN_RTOL * e_scale:
            raise ValueError("manifold energies must be degenerate")
        if self.selection_rule:
            block = v[np.ix_(list(manifold), list(manifold))]
            if np.max(np.abs(block)) > _HERM_RTOL * scale:
                raise ValueError(
                    "selection rule asserted but V has nonzero manifold block"
                )

    @property
    def dim(self) -> int:
        return self.energies.size

    @property
    def e_s(self) -> float:
        return float(self.energies[self.manifold[0]])

    @property
    def bath_indices(self) -> np.ndarray:
        mask = np.ones(self.dim, bool)
        mask[list(self.manifold)] = False
        return np.flatnonzero(mask)

    @property
    def hamiltonian(self) -> np.ndarray:
        return np.diag(self.energies).astype(complex) + self.v


@dataclass(frozen=True)
class NoiseParams:
    """Noise strength sigma (units energy^{-1/2}); m_sigma = 1/sigma^2."""

    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    @property
    def m_sigma(self) -> float:
        return np.inf if self.sigma == 0 else 1.0 / self.sigma**2


@dataclass(frozen=True)
class WWParams:
    """On-shell data: reference energy E_s, mass shift M, width Gamma.

    M and Gamma are stored as (D, D) arrays; the scalar accessors are the
    D=1 convenience used by the single-channel closed forms.
    """

    e_s: float
    m: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.m, complex))
        g = np.atleast_2d(np.asarray(self.gamma, complex))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "gamma", g)
        if m.shape != g.shape or m.shape[0] != m.shape[1]:
            raise ValueError("M and Gamma must be square matrices of equal size")
        scale_m = max(np.linalg.norm(m), 1.0)
        scale_g = max(np.linalg.norm(g), 1.0)
        if np.linalg.norm(m - m.conj().T) > 1e-10 * scale_m:
            raise ValueError("M must be Hermitian")
        if np.linalg.norm(g - g.conj().T) > 1e-10 * scale_g:
            raise ValueError("Gamma must be Hermitian")
        evals = np.linalg.eigvalsh(g)
        if evals.min() < -1e-12 * max(np.abs(evals).max(), 1.0):
            raise ValueError("Gamma must be positive semidefinite")

    @classmethod
    def scalar(cls, e_s: float, m: float, gamma: float) -> "WWParams":
        return cls(e_s=e_s, m=np.array([[m]]), gamma=np.array([[gamma]]))

    @property
    def size(self) -> int:
        return self.m.shape[0]

    def _scalar(self, mat: np.ndarray) -> float:
        if self.size != 1:
            raise ValueError("scalar accessor requires a D=1 manifold")
        return float(mat[0, 0].real)

    @property
    def m_scalar(self) -> float:
        return self._scalar(self.m)

    @property
    def gamma_scalar(self) -> float:
        return self._scalar(self.gamma)


def build_flat_bath(
    gamma_target: float, level_count: int, spacing: float, e_s: float
) -> SystemSpec:
    """One discrete state coupled uniformly to an odd flat band.

    The band holds level_count states at E_s + k*spacing for
    k = -(N-1)/2 .. (N-1)/2, each coupled with real strength
    v = sqrt(gamma_target*spacing/(2 pi)), so the golden-rule width of the
    discrete state is exactly gamma_target.

    Warns (ConfigurationWarning) when gamma_target is within a factor 5 of
    the band half-width: decay-rate corrections scale like Gamma/(pi W) and
    are no longer small there.
    """
    if gamma_target < 0:
        raise ValueError("gamma_target must be non-negative")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if level_count < 3 or level_count % 2 == 0:
        raise ValueError("level_count must be an odd integer >= 3")
    half_width = spacing * (level_count - 1) / 2
    if gamma_target * 5 > half_width:
        warnings.warn(
            f"target width {gamma_target} is within a factor 5 of the band "
            f"half-width {half_width}; flat-band corrections are not small",
            ConfigurationWarning,
            stacklevel=2,
        )
    coupling = np.sqrt(gamma_target * spacing / (2 * np.pi))
    ks = np.arange(level_count) - (level_count - 1) // 2
    energies = np.concatenate([[e_s], e_s + ks * spacing])
    d = level_count + 1
    v = np.zeros((d, d))
    v[0, 1:] = coupling
    v[1:, 0] = coupling
    return SystemSpec(
        energies=energies, v=v, manifold=(0,), initial=0, selection_rule=True
    )


def _uniform_bath_spacing(offsets: np.ndarray) -> float | None:
    """Spacing if the off-manifold energies form a uniform grid, else None."""
    if offsets.size < 2:
        return None
    s = np.sort(offsets)
    steps = np.diff(s)
    step = np.median(steps)
    if step <= 0:
        return None
    if np.max(np.abs(steps - step)) > 1e-9 * step:
        return None
    return float(step)


def compute_ww_params(
    spec: SystemSpec, delta_tolerance: float | None = None
) -> WWParams:
    """Mass-shift matrix M and width matrix Gamma from the spectrum.

    Gamma_ab replaces the on-shell delta function by a window of half-width
    delta_tolerance: 2 pi * sum_{|E_m - E_s| < tol} V_sm V_ms / (2 tol).
    When the off-manifold spectrum is uniformly spaced the window defaults to
    spacing/2, which reduces the sum to the exact density-of-states rule
    2 pi v^2 / spacing.  Non-uniform spectra must supply delta_tolerance.

    M_ab is the principal-value sum over off-shell states; terms are
    accumulated in order of |E_m - E_s| so symmetric pairs cancel exactly and
    an exactly on-shell state contributes zero.
    """
    bath = spec.bath_indices
    if bath.size == 0:
        raise ValueError("no off-manifold states to integrate out")
    s = list(spec.manifold)
    e_s = spec.e_s
    offsets = spec.energies[bath] - e_s
    scale = max(np.max(np.abs(spec.energies)) - np.min(spec.energies), 1.0)
    if delta_tolerance is None:
        spacing = _uniform_bath_spacing(offsets)
        if spacing is None:
            raise ValueError(
                "off-manifold spectrum is not uniformly spaced; "
                "supply delta_tolerance explicitly"
            )
        delta_tolerance = spacing / 2
    if delta_tolerance <= 0:
        raise ValueError("delta_tolerance must be positive")

    v_sm = spec.v[np.ix_(s, bath.tolist())]  # (D, n_bath)
    # Gamma: on-shell window rule.
    on_shell = np.abs(offsets) < delta_tolerance
    gamma = (
        2
        * np.pi
        * (v_sm[:, on_shell] @ v_sm[:, on_shell].conj().T)
        / (2 * delta_tolerance)
    )
    # M: principal value, summed in order of |offset| for pairwise
    # cancellation on symmetric grids; exactly on-shell terms are skipped.
    off_shell = np.abs(offsets) > 1e-12 * scale
    order = np.argsort(np.abs(offsets[off_shell]), kind="stable")
    vo = v_sm[:, off_shell][:, order]
    do = offsets[off_shell][order]
    D = len(s)
    m = np.zeros((D, D), complex)
    for k in range(do.size):
        m += np.outer(vo[:, k], vo[:, k].conj()) / (-do[k])
    m = 0.5 * (m + m.conj().T)
    gamma = 0.5 * (gamma + gamma.conj().T)
    return WWParams(e_s=e_s, m=m, gamma=gamma)


def ww_kernel(
    spec: SystemSpec,
    ww: WWParams,
    energy: complex,
    mode: str = "ww",
    sigma: float = 0.0,
) -> np.ndarray:
    """Laplace-domain kernel K_ab(E) of the manifold coefficients.

    mode "ww" returns the on-shell linear kernel
    (-iE + iE_s) delta_ab + i M_ab + Gamma_ab / 2, which is independent of
    sigma by construction.  mode "full" keeps the pre-approximation energy
    dependence, with the complex factors f_m = 1 - (i/8) sigma^2 (E_m - E_s)
    attached to each bath denominator plus the (sigma^2/8)(V^2) manifold
    drift.
    """
    D = ww.size
    if mode == "ww":
        return (-1j * energy + 1j * ww.e_s) * np.eye(D) + 1j * ww.m + ww.gamma / 2
    if mode != "full":
        raise ValueError(f"unknown kernel mode {mode!r}")
    s = list(spec.manifold)
    bath = spec.bath_indices
    e_s = spec.e_s
    offsets = spec.energies[bath] - e_s
    f = 1.0 - 0.125j * sigma**2 * offsets
    v_sm = spec.v[np.ix_(s, bath.tolist())]
    denom = -1j * energy + 1j * e_s + 1j * offsets * f
    if np.any(np.abs(denom) == 0.0):
        raise NumericFailure(
            "kernel evaluated exactly on a bath pole; move E off the real axis"
        )
    k = (-1j * energy + 1j * e_s) * np.eye(len(s), dtype=complex)
    v2 = spec.v @ spec.v
    k = k + 0.125 * sigma**2 * v2[np.ix_(s, s)]
    k = k + (v_sm * (f**2 / denom)) @ v_sm.conj().T
    return k
