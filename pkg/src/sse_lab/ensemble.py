"""Monte Carlo orchestration: run independent trajectory ensembles with
per-trajectory counter-based noise streams, aggregate observables with
statistical errors, and compare estimate tables against analytic oracles.

Determinism contract: trajectory j always consumes the noise stream with
index j derived from the master seed, chunk partial sums are accumulated in
fixed 256-trajectory blocks, and blocks are combined by a fixed-order
pairwise tree, so results are bit-identical for any worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import trajectory
from .errors import NumericFailure
from .stochastic import RngPolicy
from .system import NoiseParams, SystemSpec, compute_ww_params

CHUNK_SIZE = 256
ENGINES = ("nonlinear-sse", "imaginary-noise", "linearized", "pathwise-closed-form")
OBSERVABLES = ("occupations", "survival", "density_matrix", "bloch")

_COARSE_DT_LIMIT = 0.1


@dataclass(frozen=True)
class EnsembleEstimate:
    """Sample mean, standard error of the mean, and sample count.

    mean and std_error may be arrays (one entry per output time); std_error
    is NaN when n < 2.
    """

    mean: np.ndarray
    std_error: np.ndarray
    n: int


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything needed to reproduce one Monte Carlo experiment.

    initial_state optionally replaces the basis initial state from the
    system spec with an arbitrary normalized amplitude vector; only the
    state-vector engines accept it.
    """

    system: SystemSpec
    noise: NoiseParams
    dt: float
    horizon: float
    n_traj: int
    observables: tuple
    master_seed: int
    record_stride: int = 1
    allow_coarse_dt: bool = False
    initial_state: np.ndarray | None = None

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0:
            raise ValueError("dt and horizon must be positive")
        if self.n_traj < 1:
            raise ValueError("n_traj must be at least 1")
        if self.record_stride < 1:
            raise ValueError("record_stride must be at least 1")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("horizon must be an integer number of steps")
        if round(steps) % self.record_stride != 0:
            raise ValueError("record_stride must divide the step count")
        object.__setattr__(self, "observables", tuple(self.observables))
        for name in self.observables:
            if name not in OBSERVABLES:
                raise ValueError(f"unknown observable {name!r}")
        if "bloch" in self.observables and self.system.dim != 2:
            raise ValueError("bloch observable requires a two-level system")
        if self.initial_state is not None:
            psi = np.asarray(self.initial_state, complex)
            if psi.shape != (self.system.dim,):
                raise ValueError("initial_state must match the system dimension")
            nrm = np.linalg.norm(psi)
            if abs(nrm - 1.0) > 1e-9:
                raise ValueError("initial_state must be normalized")
            object.__setattr__(self, "initial_state", psi / nrm)
        RngPolicy(self.master_seed)  # validates the seed range
        gap = float(np.abs(self.system.energies - self.system.e_s).max())
        if self.dt * gap > _COARSE_DT_LIMIT and not self.allow_coarse_dt:
            raise ValueError(
                f"dt * max|E_n - E_s| = {self.dt * gap:.3g} exceeds "
                f"{_COARSE_DT_LIMIT}; refine dt or set allow_coarse_dt"
            )

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def rec_idx(self) -> np.ndarray:
        return np.arange(0, self.n_steps + 1, self.record_stride, dtype=np.int64)

    @property
    def times(self) -> np.ndarray:
        return self.rec_idx * self.dt


def observable_components(name: str, dim: int) -> list[str]:
    """Column names an observable expands to for a dim-level system."""
    if name == "occupations":
        return [f"p_{i}" for i in range(dim)]
    if name == "survival":
        return ["survival"]
    if name == "density_matrix":
        cols = []
        for i in range(dim):
            for j in range(dim):
                cols += [f"re_rho_{i}_{j}", f"im_rho_{i}_{j}"]
        return cols
    if name == "bloch":
        return ["r1", "r2", "r3"]
    raise ValueError(f"unknown observable {name!r}")


def _extract_components(name: str, amps: np.ndarray, spec: SystemSpec) -> np.ndarray:
    """Real component array (n_traj, n_rec, n_comp) from amplitude records."""
    if name == "occupations":
        return np.abs(amps) ** 2
    if name == "survival":
        occ = np.abs(amps[:, :, list(spec.manifold)]) ** 2
        return occ.sum(axis=2, keepdims=True)
    if name == "density_matrix":
        d = amps.shape[2]
        rho = amps[:, :, :, None] * amps.conj()[:, :, None, :]
        flat = rho.reshape(amps.shape[0], amps.shape[1], d * d)
        out = np.empty(flat.shape[:2] + (2 * d * d,))
        out[:, :, 0::2] = flat.real
        out[:, :, 1::2] = flat.imag
        return out
    if name == "bloch":
        cross = amps[:, :, 0].conj() * amps[:, :, 1]
        return np.stack(
            [
                2.0 * cross.real,
                2.0 * cross.imag,
                np.abs(amps[:, :, 0]) ** 2 - np.abs(amps[:, :, 1]) ** 2,
            ],
            axis=2,
        )
    raise ValueError(f"unknown observable {name!r}")


def _record_brownian(plan: ExperimentPlan, start: int, size: int) -> np.ndarray:
    """W at the output times, shape (size, n_rec), stream per trajectory."""
    n_rec = plan.rec_idx.size
    step = plan.record_stride * plan.dt
    w = np.zeros((size, n_rec))
    policy = RngPolicy(plan.master_seed)
    for i in range(size):
        rng = policy.stream(start + i).generator()
        w[i, 1:] = np.cumsum(rng.normal(0.0, np.sqrt(step), n_rec - 1))
    return w


def _step_increments(plan: ExperimentPlan, start: int, size: int) -> np.ndarray:
    """dW at full step resolution, shape (size, n_steps)."""
    dws = np.empty((size, plan.n_steps))
    policy = RngPolicy(plan.master_seed)
    sd = np.sqrt(plan.dt)
    for i in range(size):
        rng = policy.stream(start + i).generator()
        dws[i] = rng.normal(0.0, sd, plan.n_steps)
    return dws


def _fail_at(start: int, bad_local: int) -> NumericFailure:
    return NumericFailure(
        f"trajectory diverged (stream_index={start + bad_local})"
    )


def _chunk_amplitudes(
    plan: ExperimentPlan, engine: str, start: int, size: int
) -> np.ndarray:
    """Schroedinger-picture amplitude records (size, n_rec, dim) for one chunk."""
    spec = plan.system
    sigma = plan.noise.sigma
    times = plan.times
    psi0 = plan.initial_state
    if psi0 is None:
        psi0 = np.zeros(spec.dim, complex)
        psi0[spec.initial] = 1.0
    elif engine in ("linearized", "pathwise-closed-form"):
        raise ValueError(f"{engine} engine requires the basis initial state")
    if engine == "nonlinear-sse":
        dws = _step_increments(plan, start, size)
        amps, defects = trajectory.sse_trajectories(
            psi0, spec.hamiltonian, sigma, dws, plan.dt, plan.rec_idx
        )
        bad = np.nonzero(~np.isfinite(defects))[0]
        if bad.size:
            raise _fail_at(start, int(bad[0]))
        return amps

    if engine == "imaginary-noise":
        evals, vecs = _cached_eigh(spec)
        c0 = vecs.conj().T @ psi0
        w = _record_brownian(plan, start, size)
        u = times[None, :] - 0.5 * sigma * w
        coeff = np.exp(-1j * u[:, :, None] * evals[None, None, :]) * c0[None, None, :]
        amps = coeff @ vecs.T
        # the first record is u = 0 exactly; write psi0 instead of its
        # eigenbasis round trip so the zero-variance column stays bitwise
        # comparable across engines (zero std_error turns any deviation
        # into a hard fail)
        amps[:, 0, :] = psi0
        return amps

    if engine == "linearized":
        dws = _step_increments(plan, start, size)
        amps = trajectory.linearized_trajectories(
            spec, sigma, dws, plan.dt, plan.rec_idx
        )
        bad = np.nonzero(~np.isfinite(amps.reshape(size, -1)).all(axis=1))[0]
        if bad.size:
            raise _fail_at(start, int(bad[0]))
        amps = amps * np.exp(-1j * np.outer(times, spec.energies))[None, :, :]
        return amps

    if engine == "pathwise-closed-form":
        if len(spec.manifold) != 1:
            raise ValueError("pathwise-closed-form engine requires a D=1 manifold")
        if spec.initial != spec.manifold[0]:
            raise ValueError("initial state must be the manifold state")
        ww = compute_ww_params(spec)
        mm, gg = ww.m_scalar, ww.gamma_scalar
        s = spec.manifold[0]
        bath = spec.bath_indices
        de = spec.energies[bath] - spec.e_s
        v_ms = spec.v[bath, s]
        denom = -de + mm - 0.5j * gg
        w = _record_brownian(plan, start, size)
        osc = np.exp((1j * (de[None, :] - mm) - 0.5 * gg) * times[:, None])
        sto = np.exp(
            0.5 * sigma * de[None, None, :] * w[:, :, None]
            - 0.25 * sigma**2 * de[None, None, :] ** 2 * times[None, :, None]
        )
        amps = np.empty((size, times.size, spec.dim), complex)
        amps[:, :, s] = np.exp((-1j * mm - 0.5 * gg) * times)[None, :]
        amps[:, :, bath] = (v_ms / denom)[None, None, :] * (osc[None, :, :] - sto)
        amps = amps * np.exp(-1j * np.outer(times, spec.energies))[None, :, :]
        return amps

    raise ValueError(f"unknown engine {engine!r}; choose from {ENGINES}")


_EIGH_CACHE: dict = {}


def _cached_eigh(spec: SystemSpec):
    """Eigendecomposition of spec.hamiltonian, cached across chunks.

    Keyed by object identity with a strong reference held, so a live spec
    can never alias a stale entry; the cache is tiny (a few systems).
    """
    key = id(spec)
    hit = _EIGH_CACHE.get(key)
    if hit is not None and hit[0] is spec:
        return hit[1]
    val = np.linalg.eigh(spec.hamiltonian)
    if len(_EIGH_CACHE) > 4:
        _EIGH_CACHE.clear()
    _EIGH_CACHE[key] = (spec, val)
    return val


def _imaginary_noise_survival(plan: ExperimentPlan, start: int, size: int):
    """Survival components (size, n_rec, 1) without full amplitude arrays.

    The summed manifold occupation needs only the manifold rows of the
    propagator, <s_a|exp(-iHu)|psi0> = sum_n vecs[s_a,n] c0_n e^{-iE_n u},
    an O(dim) phase sum per record instead of the O(dim^2) basis transform.
    Same math as the generic path, so results agree to rounding.
    """
    spec = plan.system
    psi0 = plan.initial_state
    if psi0 is None:
        psi0 = np.zeros(spec.dim, complex)
        psi0[spec.initial] = 1.0
    evals, vecs = _cached_eigh(spec)
    c0 = vecs.conj().T @ psi0
    weights = vecs[list(spec.manifold), :] * c0[None, :]
    w = _record_brownian(plan, start, size)
    u = plan.times[None, :] - 0.5 * plan.noise.sigma * w
    phases = np.exp(-1j * u[:, :, None] * evals[None, None, :])
    amp = phases @ weights.T
    out = (np.abs(amp) ** 2).sum(axis=2, keepdims=True)
    # u = 0 exactly at the first record; see _chunk_amplitudes
    out[:, 0, 0] = np.sum(np.abs(psi0[list(spec.manifold)]) ** 2)
    return out


def _chunk_worker(args):
    plan, engine, start, size = args
    if engine == "imaginary-noise" and plan.observables == ("survival",):
        comps = _imaginary_noise_survival(plan, start, size)
        return {"survival": (comps.sum(axis=0), (comps * comps).sum(axis=0))}
    amps = _chunk_amplitudes(plan, engine, start, size)
    partial = {}
    for name in plan.observables:
        comps = _extract_components(name, amps, plan.system)
        partial[name] = (comps.sum(axis=0), (comps * comps).sum(axis=0))
    return partial


def _combine(a, b):
    return {k: (a[k][0] + b[k][0], a[k][1] + b[k][1]) for k in a}


def _tree_reduce(parts):
    """Fixed-shape pairwise reduction; independent of scheduling order."""
    while len(parts) > 1:
        nxt = []
        for i in range(0, len(parts) - 1, 2):
            nxt.append(_combine(parts[i], parts[i + 1]))
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


@dataclass(frozen=True)
class EstimateTable:
    """Per-time ensemble estimates, one column per observable component."""

    times: np.ndarray
    columns: dict
    groups: dict = field(default_factory=dict)

    def column(self, name: str) -> EnsembleEstimate:
        return self.columns[name]

    def write_csv(self, path, header: str | None = None):
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(f"# {header}\n")
            fh.write("t,column,mean,std_error,n\n")
            for name, est in self.columns.items():
                for k, t in enumerate(self.times):
                    se = est.std_error[k]
                    fh.write(
                        f"{t:.17g},{name},{est.mean[k]:.17g},"
                        f"{se:.17g},{est.n}\n"
                    )

    @classmethod
    def read_csv(cls, path) -> "EstimateTable":
        raw = {}
        times = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("t,"):
                    continue
                t_s, name, mean_s, se_s, n_s = line.split(",")
                raw.setdefault(name, []).append(
                    (float(t_s), float(mean_s), float(se_s), int(n_s))
                )
        columns = {}
        for name, rows in raw.items():
            times = np.asarray([r[0] for r in rows])
            columns[name] = EnsembleEstimate(
                mean=np.asarray([r[1] for r in rows]),
                std_error=np.asarray([r[2] for r in rows]),
                n=rows[0][3],
            )
        return cls(times=np.asarray(times), columns=columns)


def run_ensemble(plan: ExperimentPlan, engine: str, workers: int = 1) -> EstimateTable:
    """Run the plan's ensemble with the chosen engine.

    Aborts with a NumericFailure naming the offending stream_index if any
    trajectory diverges.  The result is bit-identical for any worker count.
    """
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; choose from {ENGINES}")
    jobs = [
        (plan, engine, start, min(CHUNK_SIZE, plan.n_traj - start))
        for start in range(0, plan.n_traj, CHUNK_SIZE)
    ]
    if workers <= 1 or len(jobs) == 1:
        parts = [_chunk_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_worker, jobs))
    total = _tree_reduce(parts)
    n = plan.n_traj
    columns = {}
    groups = {}
    for name in plan.observables:
        comp_names = observable_components(name, plan.system.dim)
        groups[name] = comp_names
        s, sq = total[name]
        mean = s / n
        if n >= 2:
            var = np.maximum(sq - n * mean**2, 0.0) / (n - 1)
            se = np.sqrt(var / n)
        else:
            se = np.full_like(mean, np.nan)
        for c, cname in enumerate(comp_names):
            columns[cname] = EnsembleEstimate(
                mean=mean[:, c].copy(), std_error=se[:, c].copy(), n=n
            )
    return EstimateTable(times=plan.times.copy(), columns=columns, groups=groups)


@dataclass(frozen=True)
class OracleReport:
    """z-score summary of an estimate column against a reference curve."""

    z: np.ndarray
    max_z: float
    frac_above_3: float
    passed: bool
    hard_fail: bool = False

    def to_dict(self) -> dict:
        return {
            "max_z": self.max_z,
            "frac_above_3": self.frac_above_3,
            "pass": bool(self.passed),
            "hard_fail": bool(self.hard_fail),
        }


def compare_to_oracle(estimate: EnsembleEstimate, oracle) -> OracleReport:
    """z-scores (mean - oracle)/std_error with the pass rule: fraction of
    |z| > 3 at most 1% and max |z| at most 5.

    A zero standard error with a nonzero deviation is a hard fail (the
    estimate claims certainty and disagrees); zero deviation with zero
    error counts as z = 0.
    """
    oracle = np.asarray(oracle, float)
    dev = np.asarray(estimate.mean, float) - oracle
    se = np.asarray(estimate.std_error, float)
    if oracle.shape != dev.shape:
        raise ValueError("oracle must match the estimate shape")
    z = np.zeros_like(dev)
    ok = se > 0
    z[ok] = dev[ok] / se[ok]
    hard = (~ok) & (dev != 0.0)
    if np.any(hard):
        z[hard] = np.inf
        return OracleReport(
            z=z, max_z=float("inf"), frac_above_3=1.0, passed=False, hard_fail=True
        )
    max_z = float(np.abs(z).max()) if z.size else 0.0
    frac = float(np.mean(np.abs(z) > 3.0)) if z.size else 0.0
    return OracleReport(
        z=z, max_z=max_z, frac_above_3=frac, passed=(frac <= 0.01 and max_z <= 5.0)
    )


def compare_estimates(a: EnsembleEstimate, b: EnsembleEstimate) -> OracleReport:
    """Two-sample z comparison with combined standard error, same pass rule."""
    dev = np.asarray(a.mean, float) - np.asarray(b.mean, float)
    se = np.sqrt(np.asarray(a.std_error, float) ** 2 + np.asarray(b.std_error, float) ** 2)
    proxy = EnsembleEstimate(mean=dev, std_error=se, n=min(a.n, b.n))
    return compare_to_oracle(proxy, np.zeros_like(dev))


def report_summary_json(path, reports: dict, extra: dict | None = None):
    """Write {column: report} plus overall pass/max_z as a JSON summary."""
    out = {name: rep.to_dict() for name, rep in reports.items()}
    finite = [r.max_z for r in reports.values() if np.isfinite(r.max_z)]
    summary = {
        "pass": bool(all(r.passed for r in reports.values())),
        "max_z": max(finite) if finite else float("inf"),
        "columns": out,
    }
    if any(not np.isfinite(r.max_z) for r in reports.values()):
        summary["max_z"] = float("inf")
    if extra:
        summary.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, default=float)
    return summary
