"""Single-trajectory integrators: nonlinear SSE, imaginary-noise propagation,
linearized coefficient SDEs, the pathwise closed form, and the general scalar
linear SDE with its exact solution.

The chunked drivers at the bottom evaluate many trajectories per call through
the kernels module; the single-step operations are the reference definitions
the kernels must agree with.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .errors import NumericFailure
from .stochastic import BrownianPath, RngPolicy
from .system import SystemSpec, WWParams

_HERM_RTOL = 1e-10


@dataclass(frozen=True)
class StateVector:
    """Unit-norm amplitude vector at time t.

    norm_defect carries the pre-renormalization defect |" psi" - 1| of the
    step that produced this state (0 for exact constructions).
    """

    amplitudes: np.ndarray
    time: float = 0.0
    norm_defect: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, complex)
        object.__setattr__(self, "amplitudes", amps)
        nrm = np.linalg.norm(amps)
        if abs(nrm - 1.0) > 1e-9:
            raise ValueError(f"state norm {nrm} deviates from 1 beyond 1e-9")

    @property
    def dim(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True)
class CoefficientState:
    """Interaction-picture coefficients C_n(t); not renormalized."""

    c: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "c", np.asarray(self.c, complex))


@dataclass(frozen=True)
class LinearSdeSpec:
    """Scalar linear SDE dC = (A_t C + P_t) dW + (B_t C + Q_t) dt.

    The general form takes callables of time.  The exponential-coefficient
    family (A, B constant, P_t = P e^{Kt}, Q_t = Q e^{Kt}) that admits a
    closed-form solution is built with `exponential`, which records the
    constants the exact solver needs.
    """

    a: Callable[[float], complex]
    b: Callable[[float], complex]
    p: Callable[[float], complex]
    q: Callable[[float], complex]
    c0: complex
    exp_params: tuple | None = None

    @classmethod
    def exponential(cls, a, b, p, q, k, c0) -> "LinearSdeSpec":
        a, b, p, q, k, c0 = complex(a), complex(b), complex(p), complex(q), complex(k), complex(c0)
        return cls(
            a=lambda t: a,
            b=lambda t: b,
            p=lambda t, _p=p, _k=k: _p * np.exp(_k * t),
            q=lambda t, _q=q, _k=k: _q * np.exp(_k * t),
            c0=c0,
            exp_params=(a, b, p, q, k),
        )


class ExactSolution(NamedTuple):
    """Closed-form value plus which solution branch produced it."""

    value: complex
    branch: str


def _check_hermitian(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, complex)
    scale = max(np.linalg.norm(h), 1.0)
    if np.linalg.norm(h - h.conj().T) > _HERM_RTOL * scale:
        raise ValueError("H must be Hermitian")
    return h


def sse_step(
    state: StateVector, h: np.ndarray, sigma: float, dw: float, dt: float
) -> StateVector:
    """One Euler-Maruyama step of the nonlinear SSE, renormalized.

    Drift -iH - (sigma^2/8)(H - <H>)^2 and diffusion (sigma/2)(H - <H>),
    with <H> evaluated in the pre-step state (Ito convention).  The
    pre-renormalization norm defect is recorded on the returned state.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    h = _check_hermitian(h)
    psi = state.amplitudes
    hpsi = h @ psi
    eh = np.vdot(psi, hpsi).real
    phi = hpsi - eh * psi
    hphi = h @ phi - eh * phi
    new = psi + (-1j * dt) * hpsi - 0.125 * sigma**2 * dt * hphi + 0.5 * sigma * dw * phi
    nrm = np.linalg.norm(new)
    if not np.isfinite(nrm) or nrm == 0.0:
        raise NumericFailure("SSE step produced a non-normalizable state")
    defect = abs(nrm - 1.0)
    return StateVector(amplitudes=new / nrm, time=state.time + dt, norm_defect=defect)


def imaginary_noise_propagate(
    psi0: StateVector, h: np.ndarray, sigma: float, t: float, w_t: float
) -> StateVector:
    """exp[-iH(t - sigma W_t / 2)] psi0 via eigendecomposition; exact in dt."""
    h = _check_hermitian(h)
    try:
        evals, vecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh rarely fails
        raise NumericFailure(f"eigendecomposition failed: {exc}") from exc
    u_eff = t - 0.5 * sigma * w_t
    phases = np.exp(-1j * evals * u_eff)
    amps = vecs @ (phases * (vecs.conj().T @ psi0.amplitudes))
    return StateVector(amplitudes=amps, time=psi0.time + t)


def _linearized_arrays(spec: SystemSpec, sigma: float):
    """Permutation and coefficient arrays for the linearized kernels."""
    if not spec.selection_rule:
        raise ValueError(
            "linearized equations require the selection rule; "
            "use sse_step for general V"
        )
    s = list(spec.manifold)
    bath = spec.bath_indices
    perm = np.concatenate([np.asarray(s, int), bath])
    de = spec.energies[bath] - spec.e_s
    v2 = spec.v @ spec.v
    v2ss = np.ascontiguousarray(v2[np.ix_(s, s)])
    vsm = np.ascontiguousarray(spec.v[np.ix_(s, bath.tolist())])
    vms = np.ascontiguousarray(vsm.conj().T)
    return perm, de, v2ss, vsm, vms


def linearized_step(
    coeffs: CoefficientState, spec: SystemSpec, sigma: float, dw: float, dt: float
) -> CoefficientState:
    """One Euler-Maruyama step of the split linearized coefficient SDEs.

    Manifold rows evolve with the -(sigma^2/8)(V^2)_ss drift plus bath
    feedback; bath rows with their own multiplicative noise plus manifold
    coupling through f_m = 1 - (i/8) sigma^2 (E_m - E_s).  No
    renormalization: the system is linear.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    perm, de, v2ss, vsm, vms = _linearized_arrays(spec, sigma)
    c = coeffs.c[perm]
    t = coeffs.time
    D = len(spec.manifold)
    f = 1.0 - 0.125j * sigma**2 * de
    ph = np.exp(1j * de * t)
    coupling = 0.5 * sigma * dw - 1j * dt * f
    cs, cb = c[:D], c[D:]
    dcs = -0.125 * sigma**2 * dt * (v2ss @ cs) + vsm @ (np.conj(ph) * coupling * cb)
    dcb = (0.5 * sigma * de * dw - 0.125 * sigma**2 * de**2 * dt) * cb + ph * coupling * (
        vms @ cs
    )
    out = np.empty_like(c)
    out[:D] = cs + dcs
    out[D:] = cb + dcb
    inv = np.argsort(perm)
    return CoefficientState(c=out[inv], time=t + dt)


def linearized_validity_scale(spec: SystemSpec, sigma: float, t: float) -> float:
    """Diagnostic sigma * ||V||^2 * t for the neglected higher-order terms.

    The linearization drops terms of relative order sigma V^2; no hard
    cutoff is asserted, callers judge the scale themselves.
    """
    return float(sigma * np.linalg.norm(spec.v, 2) ** 2 * t)


def pathwise_cm(
    spec: SystemSpec,
    ww: WWParams,
    sigma: float,
    m: int,
    path: BrownianPath,
    t: float,
) -> complex:
    """Closed-form bath coefficient C_m(t) along one noise realization.

    C_m(t) = V_ms / (E_s - E_m + M - i Gamma/2) *
             { exp[i(E_m - E_s - M) t - Gamma t / 2]
               - exp[sigma (E_m - E_s) W_t / 2 - sigma^2 (E_m - E_s)^2 t / 4] }
    """
    if len(spec.manifold) != 1:
        raise ValueError("pathwise closed form requires a D=1 manifold")
    if m in spec.manifold:
        raise ValueError("m must be a bath index")
    w_t = path.value_at(t)
    s = spec.manifold[0]
    v_ms = spec.v[m, s]
    de = spec.energies[m] - ww.e_s
    mm = ww.m_scalar
    gg = ww.gamma_scalar
    denom = -de + mm - 0.5j * gg
    osc = np.exp(1j * (de - mm) * t - 0.5 * gg * t)
    sto = np.exp(0.5 * sigma * de * w_t - 0.25 * sigma**2 * de**2 * t)
    return complex(v_ms / denom * (osc - sto))


def linear_sde_exact(
    sde: LinearSdeSpec, path: BrownianPath, t: float
) -> ExactSolution:
    """Closed-form solution of the exponential-coefficient linear SDE.

    For A != 0 the solution splits into boundary terms plus one residual
    time integral, evaluated here by trapezoidal quadrature along the path.
    For A = 0 that form degenerates (P/A), so the solver falls back to the
    direct quadrature of the general solution, reported in the branch field.
    """
    if sde.exp_params is None:
        raise ValueError(
            "exact solution requires a spec built with LinearSdeSpec.exponential"
        )
    a, b, p, q, k = sde.exp_params
    idx = path.index_at(t)
    ts = path.grid[: idx + 1]
    w = path.values[: idx + 1]
    w_t = w[-1]
    if a != 0:
        # C_t = X_t [ C0 - (P/A)(Y_t/X_t - 1) + ((P/A)(K-B) + Q) I_t ],
        # X_t = exp(A W_t + (B - A^2/2) t), Y_t = exp(K t),
        # I_t = int_0^t exp(-A W_u + (K - B + A^2/2) u) du.
        x_t = np.exp(a * w_t + (b - a * a / 2) * t)
        integrand = np.exp(-a * w + (k - b + a * a / 2) * ts)
        resid = np.trapezoid(integrand, ts) if idx > 0 else 0.0
        coeff = (p / a) * (k - b) + q
        value = x_t * (sde.c0 - (p / a) * (integrand[-1] - 1.0) + coeff * resid)
        return ExactSolution(value=complex(value), branch="a11")
    # A = 0: C_t = e^{Bt} [ C0 + int_0^t e^{(K-B)u} (P dW_u + Q du) ].
    decay = np.exp((k - b) * ts)
    ito = np.sum(decay[:-1] * p * np.diff(w)) if idx > 0 else 0.0
    drift = np.trapezoid(decay * q, ts) if idx > 0 else 0.0
    value = np.exp(b * t) * (sde.c0 + ito + drift)
    return ExactSolution(value=complex(value), branch="a8-quadrature")


def linear_sde_em(sde: LinearSdeSpec, path: BrownianPath) -> np.ndarray:
    """Euler-Maruyama series of the scalar linear SDE along the path."""
    ts = path.grid[:-1]
    a = np.asarray([sde.a(t) for t in ts], complex)
    b = np.asarray([sde.b(t) for t in ts], complex)
    p = np.asarray([sde.p(t) for t in ts], complex)
    q = np.asarray([sde.q(t) for t in ts], complex)
    for name, arr in (("A", a), ("B", b), ("P", p), ("Q", q)):
        if not np.all(np.isfinite(arr)):
            raise NumericFailure(f"coefficient {name} not finite on the grid")
    dws = path.increments[None, :]
    out = kernels.linear_sde_em_kernel(a, b, p, q, complex(sde.c0), dws, path.dt)
    return out[0]


def _coefficient_arrays(sde: LinearSdeSpec, t_left: np.ndarray):
    a = np.asarray([sde.a(t) for t in t_left], complex)
    b = np.asarray([sde.b(t) for t in t_left], complex)
    p = np.asarray([sde.p(t) for t in t_left], complex)
    q = np.asarray([sde.q(t) for t in t_left], complex)
    return a, b, p, q


def em_strong_errors(
    sde: LinearSdeSpec,
    t: float,
    levels,
    ref_level: int,
    n_paths: int,
    master_seed: int,
) -> np.ndarray:
    """RMS end-time Euler-Maruyama error against the closed form, per level.

    Each path is sampled once at ref_level steps; the exact solution is
    evaluated along that fine path, and the EM scheme runs on
    block-coarsened increments of the same path at each level.  Halving dt
    should shrink the returned errors by about sqrt(2) (strong order 1/2).
    """
    levels = [int(lv) for lv in levels]
    ref_level = int(ref_level)
    for lv in levels:
        if lv < 1 or ref_level % lv:
            raise ValueError("each level must divide ref_level")
    dt_ref = t / ref_level
    grid = np.arange(ref_level + 1) * dt_ref
    policy = RngPolicy(master_seed)
    fine = np.empty((n_paths, ref_level))
    exact = np.empty(n_paths, complex)
    for j in range(n_paths):
        rng = policy.stream(j).generator()
        fine[j] = rng.normal(0.0, np.sqrt(dt_ref), ref_level)
        path = BrownianPath(
            grid=grid,
            values=np.concatenate([[0.0], np.cumsum(fine[j])]),
            seed=policy.stream(j).token(),
        )
        exact[j] = linear_sde_exact(sde, path, t).value
    errors = np.empty(len(levels))
    for li, lv in enumerate(levels):
        dt = t / lv
        dws = fine.reshape(n_paths, lv, ref_level // lv).sum(axis=2)
        a, b, p, q = _coefficient_arrays(sde, np.arange(lv) * dt)
        series = kernels.linear_sde_em_kernel(a, b, p, q, complex(sde.c0), dws, dt)
        errors[li] = np.sqrt(np.mean(np.abs(series[:, -1] - exact) ** 2))
    return errors


# ---------------------------------------------------------------------------
# Chunked multi-trajectory drivers (consumed by the ensemble runner).
# ---------------------------------------------------------------------------


def sse_trajectories(
    psi0: np.ndarray,
    h: np.ndarray,
    sigma: float,
    dws: np.ndarray,
    dt: float,
    rec_idx: np.ndarray,
):
    """Amplitude record (n_traj, n_rec, d) for a chunk of SSE trajectories.

    Returns (amps, defects); defects is the per-trajectory max norm defect,
    NaN flagging a trajectory that lost normalizability.
    """
    h = _check_hermitian(h)
    amps, defects = kernels.sse_chunk(
        np.ascontiguousarray(psi0, dtype=complex),
        np.ascontiguousarray(h),
        float(sigma),
        np.ascontiguousarray(dws, dtype=float),
        float(dt),
        np.ascontiguousarray(rec_idx, dtype=np.int64),
    )
    return amps, defects


def linearized_trajectories(
    spec: SystemSpec,
    sigma: float,
    dws: np.ndarray,
    dt: float,
    rec_idx: np.ndarray,
):
    """Coefficient record (n_traj, n_rec, d) for a chunk of linearized runs."""
    perm, de, v2ss, vsm, vms = _linearized_arrays(spec, sigma)
    D = len(spec.manifold)
    c0 = np.zeros(spec.dim, complex)
    c0[list(perm).index(spec.initial)] = 1.0
    amps = kernels.linearized_chunk(
        c0,
        np.ascontiguousarray(de, dtype=float),
        np.ascontiguousarray(v2ss, dtype=complex),
        np.ascontiguousarray(vsm, dtype=complex),
        np.ascontiguousarray(vms, dtype=complex),
        float(sigma),
        np.ascontiguousarray(dws, dtype=float),
        float(dt),
        np.ascontiguousarray(rec_idx, dtype=np.int64),
    )
    inv = np.argsort(perm)
    return amps[:, :, inv]


def trajectory_series_csv(path, times, amplitudes, defects=None, header=None):
    """Write one trajectory as CSV: t, Re/Im of each amplitude, norm defect."""
    times = np.asarray(times, float)
    amps = np.asarray(amplitudes, complex)
    d = amps.shape[1]
    cols = ["t"]
    for n in range(d):
        cols += [f"re_c{n}", f"im_c{n}"]
    cols.append("norm_defect")
    defects = np.zeros(len(times)) if defects is None else np.asarray(defects, float)
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write(",".join(cols) + "\n")
        for i, t in enumerate(times):
            row = [f"{t:.17g}"]
            for n in range(d):
                row += [f"{amps[i, n].real:.17g}", f"{amps[i, n].imag:.17g}"]
            row.append(f"{defects[i]:.17g}")
            fh.write(",".join(row) + "\n")
