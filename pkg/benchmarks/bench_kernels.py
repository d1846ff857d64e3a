"""Benchmark the numba-jitted trajectory kernels against the vectorized
numpy fallbacks on a decay-sized workload.

Run:  python benchmarks/bench_kernels.py [--n-traj 256] [--n-steps 2000]

Both backends are imported directly (kernels.*_numba / kernels.*_numpy), so
the comparison does not depend on the SSE_LAB_DISABLE_NUMBA env flag. Each
kernel pair is checked for agreement before timing; the numba variants get
one warm-up call so compilation time is excluded.
"""

import argparse
import time

import numpy as np

from sse_lab import kernels
from sse_lab.system import build_flat_bath


def timeit(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-traj", type=int, default=256)
    parser.add_argument("--n-steps", type=int, default=2000)
    parser.add_argument("--levels", type=int, default=51)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if not kernels.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return

    rng = np.random.default_rng(0)
    dt = 0.01
    dws = rng.normal(0.0, np.sqrt(dt), size=(args.n_traj, args.n_steps))
    rec = np.linspace(0, args.n_steps, 11).astype(np.int64)

    spec = build_flat_bath(
        gamma_target=0.1, level_count=args.levels, spacing=0.02, e_s=0.0
    )
    h = spec.hamiltonian
    psi0 = np.zeros(spec.dim, complex)
    psi0[spec.initial] = 1.0

    bath = spec.bath_indices
    de = spec.energies[bath] - spec.e_s
    vsm = spec.v[spec.manifold, :][:, bath].astype(complex)
    vms = vsm.conj().T.copy()
    v2ss = vsm @ vms
    c0 = np.zeros(spec.dim, complex)
    c0[0] = 1.0

    a = np.full(args.n_steps, 0.5 + 0j)
    b = np.full(args.n_steps, -0.125 + 0.1j)
    p = np.full(args.n_steps, 0.3 + 0j)
    q = np.full(args.n_steps, -0.4j)

    cases = [
        ("sse_chunk", kernels.sse_chunk_numba, kernels.sse_chunk_numpy,
         (psi0, h, 1.0, dws, dt, rec)),
        ("linearized_chunk", kernels.linearized_chunk_numba,
         kernels.linearized_chunk_numpy,
         (c0, de, v2ss, vsm, vms, 1.0, dws, dt, rec)),
        ("linear_sde_em", kernels.linear_sde_em_numba,
         kernels.linear_sde_em_numpy,
         (a, b, p, q, 1.0 + 0j, dws, dt)),
    ]

    print(f"n_traj={args.n_traj} n_steps={args.n_steps} dim={spec.dim}")
    print(f"{'kernel':<18} {'numba (s)':>10} {'numpy (s)':>10} {'speedup':>8}")
    for name, fn_nb, fn_np, fargs in cases:
        out_nb = fn_nb(*fargs)  # warm-up / compile
        out_np = fn_np(*fargs)
        first_nb = out_nb[0] if isinstance(out_nb, tuple) else out_nb
        first_np = out_np[0] if isinstance(out_np, tuple) else out_np
        worst = np.max(np.abs(first_nb - first_np))
        assert worst < 1e-9, f"{name}: backends disagree by {worst:.3g}"
        t_nb = timeit(fn_nb, fargs, args.repeats)
        t_np = timeit(fn_np, fargs, args.repeats)
        print(f"{name:<18} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>7.2f}x")


if __name__ == "__main__":
    main()
