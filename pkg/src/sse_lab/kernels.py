"""Hot trajectory kernels with a numba backend and a pure-numpy fallback.

The numba path JIT-compiles per-trajectory Euler-Maruyama loops; the numpy
path vectorizes the same update across a chunk of trajectories so it stays
usable without a compiler.  Set ``SSE_LAB_DISABLE_NUMBA=1`` before import to
force the numpy path.  Both backends are always importable (``*_numba`` /
``*_numpy``) so they can be benchmarked and cross-checked directly; the
dispatching names (``sse_chunk`` etc.) are what the rest of the package uses.

All kernels take the Brownian increments as a prebuilt ``(n_traj, n_steps)``
array; random number generation stays outside the compiled code.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def _numba_disabled_by_env() -> bool:
    return os.environ.get("SSE_LAB_DISABLE_NUMBA", "").strip().lower() in {
        "1",
        "true",
        "yes",
        "on",
    }


NUMBA_ENABLED = HAVE_NUMBA and not _numba_disabled_by_env()


def active_backend() -> str:
    """Name of the backend the dispatching kernels use ('numba' or 'numpy')."""
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# Nonlinear SSE: dpsi = [-iH - (sigma^2/8)(H-<H>)^2] psi dt + (sigma/2)(H-<H>) psi dW
# with explicit renormalization after each step.  <H> uses the pre-step state.
# ---------------------------------------------------------------------------


def _sse_chunk_loops(psi0, H, sigma, dws, dt, rec_idx):
    n_traj, n_steps = dws.shape
    d = psi0.shape[0]
    n_rec = rec_idx.shape[0]
    amps = np.empty((n_traj, n_rec, d), np.complex128)
    defects = np.zeros(n_traj)
    quart = 0.125 * sigma * sigma * dt
    half_sigma = 0.5 * sigma
    for j in range(n_traj):
        psi = psi0.copy()
        r = 0
        if n_rec > 0 and rec_idx[0] == 0:
            amps[j, 0] = psi
            r = 1
        worst = 0.0
        ok = True
        for k in range(n_steps):
            hpsi = np.dot(H, psi)
            eh = np.vdot(psi, hpsi).real
            phi = hpsi - eh * psi
            hphi = np.dot(H, phi) - eh * phi
            psi = (
                psi
                + (-1j * dt) * hpsi
                - quart * hphi
                + (half_sigma * dws[j, k]) * phi
            )
            nrm = np.sqrt(np.vdot(psi, psi).real)
            if not np.isfinite(nrm) or nrm == 0.0:
                ok = False
                break
            defect = abs(nrm - 1.0)
            if defect > worst:
                worst = defect
            psi = psi / nrm
            if r < n_rec and rec_idx[r] == k + 1:
                amps[j, r] = psi
                r += 1
        if ok:
            defects[j] = worst
        else:
            defects[j] = np.nan
            while r < n_rec:
                amps[j, r] = np.complex128(np.nan)
                r += 1
    return amps, defects


def sse_chunk_numpy(psi0, H, sigma, dws, dt, rec_idx):
    """Vectorized-over-trajectories implementation of the SSE chunk."""
    n_traj, n_steps = dws.shape
    n_rec = rec_idx.shape[0]
    d = psi0.shape[0]
    amps = np.empty((n_traj, n_rec, d), np.complex128)
    defects = np.zeros(n_traj)
    Ht = np.ascontiguousarray(H.T)
    psi = np.broadcast_to(psi0, (n_traj, d)).copy()
    r = 0
    if n_rec > 0 and rec_idx[0] == 0:
        amps[:, 0] = psi
        r = 1
    quart = 0.125 * sigma * sigma * dt
    half_sigma = 0.5 * sigma
    for k in range(n_steps):
        hpsi = psi @ Ht
        eh = np.einsum("td,td->t", psi.conj(), hpsi).real
        phi = hpsi - eh[:, None] * psi
        hphi = phi @ Ht - eh[:, None] * phi
        psi = (
            psi
            + (-1j * dt) * hpsi
            - quart * hphi
            + (half_sigma * dws[:, k, None]) * phi
        )
        nrm = np.sqrt(np.einsum("td,td->t", psi.conj(), psi).real)
        np.maximum(defects, np.abs(nrm - 1.0), out=defects)
        psi = psi / nrm[:, None]
        if r < n_rec and rec_idx[r] == k + 1:
            amps[:, r] = psi
            r += 1
    bad = ~np.isfinite(nrm) if n_steps else np.zeros(n_traj, bool)
    defects[bad] = np.nan
    return amps, defects


# ---------------------------------------------------------------------------
# Linearized coefficient SDE, selection-rule form.  States are permuted so the
# degenerate manifold occupies the first D slots and the bath the rest:
#   dc_s = -(sigma^2/8)(V^2)_ss c_s dt
#          + V_sm . [conj(ph) (sigma/2 dW - i f dt) c_b]
#   dc_b = (a1 dW + a2 dt) c_b + ph (sigma/2 dW - i f dt) (V_ms . c_s)
# with ph = exp(i(E_b - e_s) t), f = 1 - (i/8) sigma^2 (E_b - e_s) evaluated
# at the pre-step time (Ito, non-anticipating).
# ---------------------------------------------------------------------------


def _linearized_chunk_loops(c0, de, v2ss, vsm, vms, sigma, dws, dt, rec_idx):
    n_traj, n_steps = dws.shape
    D = vsm.shape[0]
    d = c0.shape[0]
    n_rec = rec_idx.shape[0]
    amps = np.empty((n_traj, n_rec, d), np.complex128)
    f = 1.0 - 0.125j * sigma * sigma * de
    a1 = 0.5 * sigma * de
    a2 = -0.125 * sigma * sigma * de * de
    half_sigma = 0.5 * sigma
    drift_ss = -0.125 * sigma * sigma * dt
    for j in range(n_traj):
        c = c0.copy()
        r = 0
        if n_rec > 0 and rec_idx[0] == 0:
            amps[j, 0] = c
            r = 1
        for k in range(n_steps):
            dw = dws[j, k]
            t = k * dt
            ph = np.exp(1j * de * t)
            cs = c[:D].copy()
            cb = c[D:].copy()
            coupling = half_sigma * dw - 1j * dt * f
            dcs = drift_ss * np.dot(v2ss, cs) + np.dot(
                vsm, np.conj(ph) * coupling * cb
            )
            dcb = (a1 * dw + a2 * dt) * cb + ph * coupling * np.dot(vms, cs)
            c[:D] = cs + dcs
            c[D:] = cb + dcb
            if r < n_rec and rec_idx[r] == k + 1:
                amps[j, r] = c
                r += 1
    return amps


def linearized_chunk_numpy(c0, de, v2ss, vsm, vms, sigma, dws, dt, rec_idx):
    """Vectorized-over-trajectories implementation of the linearized chunk."""
    n_traj, n_steps = dws.shape
    D = vsm.shape[0]
    d = c0.shape[0]
    n_rec = rec_idx.shape[0]
    amps = np.empty((n_traj, n_rec, d), np.complex128)
    f = 1.0 - 0.125j * sigma * sigma * de
    a1 = 0.5 * sigma * de
    a2 = -0.125 * sigma * sigma * de * de
    half_sigma = 0.5 * sigma
    drift_ss = -0.125 * sigma * sigma * dt
    c = np.broadcast_to(c0, (n_traj, d)).copy()
    r = 0
    if n_rec > 0 and rec_idx[0] == 0:
        amps[:, 0] = c
        r = 1
    vsm_t = np.ascontiguousarray(vsm.T)
    vms_t = np.ascontiguousarray(vms.T)
    for k in range(n_steps):
        dw = dws[:, k, None]
        t = k * dt
        ph = np.exp(1j * de * t)
        cs = c[:, :D]
        cb = c[:, D:]
        coupling = half_sigma * dw - 1j * dt * f
        dcs = drift_ss * (cs @ v2ss.T) + (np.conj(ph) * coupling * cb) @ vsm_t
        dcb = (a1 * dw + a2 * dt) * cb + ph * coupling * (cs @ vms_t)
        c = np.concatenate([cs + dcs, cb + dcb], axis=1)
        if r < n_rec and rec_idx[r] == k + 1:
            amps[:, r] = c
            r += 1
    return amps


# ---------------------------------------------------------------------------
# Scalar linear SDE dC = (a_t C + p_t) dW + (b_t C + q_t) dt with coefficient
# arrays pre-evaluated at the left grid points.
# ---------------------------------------------------------------------------


def _linear_sde_em_loops(a, b, p, q, c0, dws, dt):
    n_paths, n_steps = dws.shape
    out = np.empty((n_paths, n_steps + 1), np.complex128)
    for j in range(n_paths):
        c = c0
        out[j, 0] = c
        for k in range(n_steps):
            c = c + (a[k] * c + p[k]) * dws[j, k] + (b[k] * c + q[k]) * dt
            out[j, k + 1] = c
    return out


def linear_sde_em_numpy(a, b, p, q, c0, dws, dt):
    """Vectorized-over-paths Euler-Maruyama for the scalar linear SDE."""
    n_paths, n_steps = dws.shape
    out = np.empty((n_paths, n_steps + 1), np.complex128)
    c = np.full(n_paths, c0, np.complex128)
    out[:, 0] = c
    for k in range(n_steps):
        c = c + (a[k] * c + p[k]) * dws[:, k] + (b[k] * c + q[k]) * dt
        out[:, k + 1] = c
    return out


if HAVE_NUMBA:
    sse_chunk_numba = njit(cache=True)(_sse_chunk_loops)
    linearized_chunk_numba = njit(cache=True)(_linearized_chunk_loops)
    linear_sde_em_numba = njit(cache=True)(_linear_sde_em_loops)
else:  # pragma: no cover
    sse_chunk_numba = _sse_chunk_loops
    linearized_chunk_numba = _linearized_chunk_loops
    linear_sde_em_numba = _linear_sde_em_loops

if NUMBA_ENABLED:
    sse_chunk = sse_chunk_numba
    linearized_chunk = linearized_chunk_numba
    linear_sde_em_kernel = linear_sde_em_numba
else:
    sse_chunk = sse_chunk_numpy
    linearized_chunk = linearized_chunk_numpy
    linear_sde_em_kernel = linear_sde_em_numpy
