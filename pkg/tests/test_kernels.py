"""Numba and numpy kernel backends must agree to rounding noise."""

import os
import subprocess
import sys

import numpy as np
import numpy.testing as npt
import pytest

from sse_lab import kernels
from sse_lab.stochastic import RngPolicy, sample_increment_batch
from sse_lab.trajectory import _linearized_arrays

needs_numba = pytest.mark.skipif(
    not kernels.NUMBA_ENABLED, reason="numba backend not active"
)


def _sse_inputs():
    rng = RngPolicy(31_337, 0).generator()
    d = 4
    h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = 0.5 * (h + h.conj().T)
    psi0 = rng.normal(size=d) + 1j * rng.normal(size=d)
    psi0 /= np.linalg.norm(psi0)
    dws = sample_increment_batch(0.01, 50, 8, RngPolicy(31_337, 1))
    rec = np.array([0, 10, 50], np.int64)
    return psi0, h, 0.7, dws, 0.01, rec


@needs_numba
class TestBackendAgreement:
    def test_sse_chunk(self):
        psi0, h, sigma, dws, dt, rec = _sse_inputs()
        amps_a, def_a = kernels.sse_chunk_numba(psi0, h, sigma, dws, dt, rec)
        amps_b, def_b = kernels.sse_chunk_numpy(psi0, h, sigma, dws, dt, rec)
        npt.assert_allclose(amps_a, amps_b, atol=1e-12)
        npt.assert_allclose(def_a, def_b, atol=1e-14)

    def test_linearized_chunk(self, qubit_spec):
        perm, de, v2ss, vsm, vms = _linearized_arrays(qubit_spec, 0.9)
        c0 = np.zeros(2, complex)
        c0[0] = 1.0
        dws = sample_increment_batch(0.01, 60, 8, RngPolicy(31_338, 0))
        rec = np.array([0, 30, 60], np.int64)
        args = (c0, de.astype(float), v2ss, vsm, vms, 0.9, dws, 0.01, rec)
        a = kernels.linearized_chunk_numba(*args)
        b = kernels.linearized_chunk_numpy(*args)
        npt.assert_allclose(a, b, atol=1e-12)

    def test_linear_sde_em(self):
        rng = RngPolicy(31_339, 0).generator()
        n = 40
        coeffs = [rng.normal(size=n) + 1j * rng.normal(size=n) for _ in range(4)]
        dws = sample_increment_batch(0.02, n, 6, RngPolicy(31_339, 1))
        a = kernels.linear_sde_em_numba(*coeffs, 1.0 + 0.0j, dws, 0.02)
        b = kernels.linear_sde_em_numpy(*coeffs, 1.0 + 0.0j, dws, 0.02)
        npt.assert_allclose(a, b, atol=1e-12)


class TestDispatch:
    def test_active_backend_consistent_with_flag(self):
        assert kernels.active_backend() in ("numba", "numpy")
        assert (kernels.active_backend() == "numba") == kernels.NUMBA_ENABLED
        if kernels.NUMBA_ENABLED:
            assert kernels.sse_chunk is kernels.sse_chunk_numba
        else:
            assert kernels.sse_chunk is kernels.sse_chunk_numpy

    def test_env_flag_selects_numpy_backend(self):
        env = dict(os.environ, SSE_LAB_DISABLE_NUMBA="1")
        out = subprocess.run(
            [sys.executable, "-c",
             "from sse_lab import kernels; print(kernels.active_backend())"],
            capture_output=True, text=True, env=env, check=True,
        )
        assert out.stdout.strip() == "numpy"

    def test_records_match_initial_condition(self):
        # rec_idx starting at 0 stores the untouched initial state
        psi0, h, sigma, dws, dt, rec = _sse_inputs()
        amps, _ = kernels.sse_chunk(psi0, h, sigma, dws, dt, rec)
        for i in range(dws.shape[0]):
            npt.assert_array_equal(amps[i, 0], psi0)
