"""Deterministic evolution of noise-averaged quantities: the dissipative
density-matrix equation, the averaged coefficient ODEs, and the occupation
expectations built from them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, NumericFailure
from .system import SystemSpec

_STEP_SAFETY = 0.05


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix at time t."""

    rho: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        rho = np.asarray(self.rho, complex)
        object.__setattr__(self, "rho", rho)
        scale = max(np.linalg.norm(rho), 1.0)
        if np.linalg.norm(rho - rho.conj().T) > 1e-12 * scale:
            raise ValueError("rho must be Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-9:
            raise ValueError("rho must have unit trace")
        if np.linalg.eigvalsh(rho).min() < -1e-9:
            raise ValueError("rho must be positive semidefinite")

    @classmethod
    def pure(cls, psi, time: float = 0.0) -> "DensityMatrix":
        psi = np.asarray(psi, complex)
        psi = psi / np.linalg.norm(psi)
        return cls(rho=np.outer(psi, psi.conj()), time=time)

    def populations(self) -> np.ndarray:
        return np.diag(self.rho).real.copy()


def _max_rate_scale(h: np.ndarray, sigma: float) -> float:
    evals = np.linalg.eigvalsh(h)
    gap = float(evals.max() - evals.min())
    return max(gap, sigma**2 * gap**2 / 8.0, 1e-30)


def _rk4(f, y0, t_grid, max_step):
    """Classical RK4 with uniform substepping between output times."""
    out = np.empty((len(t_grid),) + y0.shape, dtype=y0.dtype)
    out[0] = y0
    y = y0
    for i in range(len(t_grid) - 1):
        t0, t1 = t_grid[i], t_grid[i + 1]
        span = t1 - t0
        n_sub = max(1, int(np.ceil(span / max_step)))
        h = span / n_sub
        t = t0
        for _ in range(n_sub):
            k1 = f(t, y)
            k2 = f(t + h / 2, y + h / 2 * k1)
            k3 = f(t + h / 2, y + h / 2 * k2)
            k4 = f(t + h, y + h * k3)
            y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        if not np.all(np.isfinite(y)):
            raise NumericFailure(f"integration diverged near t={t1}")
        out[i + 1] = y
    return out


def lindblad_integrate(
    rho0: DensityMatrix, h: np.ndarray, sigma: float, t_grid
) -> list[DensityMatrix]:
    """Integrate d rho/dt = i[rho, H] - (sigma^2/8)[H, [H, rho]].

    RK4 with internal substeps bounded by 0.05 over the fastest rate
    (spectral span of H and its dephasing rate); output exactly on t_grid.
    """
    h = np.asarray(h, complex)
    t_grid = np.asarray(t_grid, float)
    if t_grid[0] != rho0.time:
        raise GridMismatchError("t_grid must start at the initial time")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    max_step = _STEP_SAFETY / _max_rate_scale(h, sigma)

    def rhs(_t, rho):
        comm = rho @ h - h @ rho
        double = h @ (h @ rho) - 2.0 * (h @ rho @ h) + (rho @ h) @ h
        return 1j * comm - (sigma**2 / 8.0) * double

    series = _rk4(rhs, rho0.rho, t_grid, max_step)
    # the first grid point is the initial state by definition; pass it
    # through untouched so zero-variance t=0 comparisons stay exact
    out = [rho0]
    for t, rho in zip(t_grid[1:], series[1:]):
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real
        out.append(DensityMatrix(rho=rho, time=float(t)))
    return out


def expectation_coefficients(spec: SystemSpec, sigma: float, t_grid) -> np.ndarray:
    """Noise-averaged coefficients E[C_n(t)] on t_grid, shape (n_t, dim).

    Closed linear ODE system for the averaged interaction-picture
    coefficients under the selection rule:

      d E[C_s] /dt = -(sigma^2/8) (V^2)_ss E[C_s]
                     - i sum_m e^{i(E_s-E_m)t} V_sm f_m E[C_m]
      d E[C_m] /dt = -(sigma^2/8) (E_m-E_s)^2 E[C_m]
                     - i e^{i(E_m-E_s)t} V_ms f_m E[C_s]

    with f_m = 1 - (i/8) sigma^2 (E_m - E_s).
    """
    if not spec.selection_rule:
        raise ValueError("averaged coefficient ODEs require the selection rule")
    t_grid = np.asarray(t_grid, float)
    if t_grid[0] != 0.0:
        raise GridMismatchError("t_grid must start at 0")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    s = list(spec.manifold)
    bath = spec.bath_indices
    de = spec.energies[bath] - spec.e_s
    f = 1.0 - 0.125j * sigma**2 * de
    v2ss = (spec.v @ spec.v)[np.ix_(s, s)]
    vsm = spec.v[np.ix_(s, bath.tolist())]
    vms = vsm.conj().T
    gap = float(np.abs(de).max(initial=0.0))
    scale = max(gap, sigma**2 * gap**2 / 8.0, np.linalg.norm(spec.v, 2), 1e-30)
    max_step = _STEP_SAFETY / scale

    D = len(s)

    def rhs(t, c):
        cs, cb = c[:D], c[D:]
        ph = np.exp(1j * de * t)
        dcs = -0.125 * sigma**2 * (v2ss @ cs) - 1j * (vsm @ (np.conj(ph) * f * cb))
        dcb = -0.125 * sigma**2 * de**2 * cb - 1j * ph * f * (vms @ cs)
        return np.concatenate([dcs, dcb])

    c0 = np.zeros(spec.dim, complex)
    perm = np.concatenate([np.asarray(s, int), bath])
    c0[list(perm).index(spec.initial)] = 1.0
    series = _rk4(rhs, c0, t_grid, max_step)
    inv = np.argsort(perm)
    return series[:, inv]


def occupation_expectations(
    spec: SystemSpec, sigma: float, e_cs: np.ndarray, t_grid
) -> np.ndarray:
    """Averaged occupations E[|C_n(t)|^2] on t_grid, shape (n_t, dim).

    Manifold occupations are |E[C_s]|^2 (dispersion in C_s enters at higher
    order).  Bath occupations integrate the rate

      g_m(t) = 2 Re[ i f_m E[C_m] V*_ms E[C_s]* e^{-i(E_m-E_s)t} ]
               + (sigma^2/4) | sum_a V_m s_a E[C_s_a] |^2

    by cumulative trapezoid on the supplied grid, which must be the grid
    e_cs was produced on.
    """
    t_grid = np.asarray(t_grid, float)
    e_cs = np.asarray(e_cs, complex)
    if e_cs.shape != (len(t_grid), spec.dim):
        raise GridMismatchError(
            f"coefficient table shape {e_cs.shape} does not match grid/state "
            f"({len(t_grid)}, {spec.dim})"
        )
    s = list(spec.manifold)
    bath = spec.bath_indices
    de = spec.energies[bath] - spec.e_s
    f = 1.0 - 0.125j * sigma**2 * de
    vms = spec.v[np.ix_(bath.tolist(), s)]
    cs = e_cs[:, s]
    cb = e_cs[:, bath]
    drive = cs @ vms.T  # (n_t, n_bath): sum_a V_{m s_a} E[C_{s_a}]
    phase = np.exp(-1j * np.outer(t_grid, de))
    rate = 2.0 * np.real(1j * f[None, :] * cb * drive.conj() * phase)
    rate += 0.25 * sigma**2 * np.abs(drive) ** 2
    occ = np.zeros((len(t_grid), spec.dim))
    occ[:, s] = np.abs(cs) ** 2
    dt_half = 0.5 * np.diff(t_grid)[:, None]
    occ[1:, bath] = np.cumsum(dt_half * (rate[1:] + rate[:-1]), axis=0)
    return occ


def occupations_csv(path, t_grid, occupations, header=None):
    """Write the occupation table as CSV: t, p_0 ... p_{d-1}."""
    occ = np.asarray(occupations, float)
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write("t," + ",".join(f"p_{n}" for n in range(occ.shape[1])) + "\n")
        for t, row in zip(np.asarray(t_grid, float), occ):
            fh.write(f"{t:.17g}," + ",".join(f"{x:.17g}" for x in row) + "\n")
