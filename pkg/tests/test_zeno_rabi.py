"""Short-time Zeno physics, driven two-level damping, and the mass bounds."""

import math

import numpy as np
import numpy.testing as npt
import pytest

from sse_lab.ensemble import ExperimentPlan, run_ensemble
from sse_lab.system import NoiseParams, SystemSpec
from sse_lab.zeno_rabi import (
    HBAR_GEV_S,
    OSCILLATION_BOUNDS,
    BlochState,
    bound_record,
    decay_bound_m_sigma,
    energy_variance,
    itano_bound,
    rabi_evolve,
    rabi_probabilities,
    reduction_rate,
    zeno_neglected_scale,
    zeno_survival_expansion,
)


class TestBlochState:
    def test_r3_and_validation(self):
        s = BlochState(np.array([0.0, 0.0, 1.0]))
        assert s.r3 == 1.0
        with pytest.raises(ValueError):
            BlochState(np.array([1.0, 1.0]))
        with pytest.raises(ValueError):
            BlochState(np.array([1.0, 1.0, 1.0]))  # norm sqrt(3)


class TestZenoExpansion:
    def test_linear_plus_quadratic(self):
        var, sigma, t = 0.03, 1.0, 0.05
        want = 1.0 - var * (sigma**2 * t / 4.0 + t**2)
        assert zeno_survival_expansion(var, sigma, t) == pytest.approx(want, rel=1e-14)

    def test_loss_linear_in_variance(self):
        loss = lambda v: 1.0 - zeno_survival_expansion(v, 1.0, 0.1)
        assert loss(0.06) == pytest.approx(2.0 * loss(0.03), rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            zeno_survival_expansion(0.1, 1.0, -0.1)
        with pytest.raises(ValueError):
            zeno_survival_expansion(-0.1, 1.0, 0.1)

    def test_neglected_scale(self):
        assert zeno_neglected_scale(2.0, 0.5) == pytest.approx(16.0 * 0.25 + 0.125)

    def test_crossover_against_trajectories(self, small_bath):
        # below t ~ 0.05 min(1/rate, 1/sqrt(var)) the expansion matches the
        # imaginary-noise ensemble loss to 5% of the loss itself
        var = energy_variance(small_bath)
        for sigma in (0.5, 1.0):
            scale = min(1.0 / max(reduction_rate(var, sigma), 1e-30), 1.0 / math.sqrt(var))
            horizon = 0.05 * scale
            plan = ExperimentPlan(
                system=small_bath,
                noise=NoiseParams(sigma=sigma),
                dt=horizon / 8.0,
                horizon=horizon,
                n_traj=8192,
                observables=("survival",),
                master_seed=71_000 + int(10 * sigma),
            )
            est = run_ensemble(plan, engine="imaginary-noise")
            surv = est.columns["survival"]
            for i, t in enumerate(plan.times):
                if t == 0.0:
                    continue
                loss = 1.0 - surv.mean[i]
                want = 1.0 - zeno_survival_expansion(var, sigma, t)
                assert abs(loss - want) < 0.05 * want + 3.0 * surv.std_error[i]


class TestEnergyVariance:
    def test_flat_bath_value(self, flat_bath):
        # (V^2)_ss = sum_m |v|^2 = 201 * Gamma Delta / 2 pi
        want = 201 * 0.1 * 0.01 / (2.0 * math.pi)
        got = energy_variance(flat_bath)
        assert got == pytest.approx(want, rel=1e-12)
        assert got == pytest.approx(0.03199, abs=5e-6)

    def test_diagonal_coupling_shifts_mean(self):
        e = np.array([0.0, 1.0])
        v = np.array([[0.2, 0.1], [0.1, 0.0]])
        spec = SystemSpec(e, v, (0,), 0, selection_rule=False)
        # <H> = 0.2, <H^2> = 0.2^2 + 0.1^2
        assert energy_variance(spec) == pytest.approx(0.01, rel=1e-12)

    def test_reduction_rate(self, flat_bath):
        var = energy_variance(flat_bath)
        assert reduction_rate(var, 1.0) == pytest.approx(var / 4.0, rel=1e-14)
        assert reduction_rate(var, 1.0) == pytest.approx(0.008, abs=2e-5)
        with pytest.raises(ValueError):
            reduction_rate(-1.0, 1.0)


class TestRabi:
    def test_half_period_damping(self):
        # drive about axis 1 from the north pole: at t = pi/Omega the
        # polarization points south, shrunk by exp(-pi Omega sigma^2 / 8)
        omega, sigma = 1.0, 1.0
        r0 = BlochState(np.array([0.0, 0.0, 1.0]))
        t = math.pi / omega
        out = rabi_evolve(r0, np.array([omega, 0.0, 0.0]), sigma, t)
        damp = math.exp(-(omega**2) * sigma**2 * t / 8.0)
        npt.assert_allclose(out.r, [0.0, 0.0, -damp], atol=1e-12)
        assert out.time == pytest.approx(t)

    def test_quarter_period_geometry(self):
        # right-hand precession about +x takes the north pole to -y
        r0 = BlochState(np.array([0.0, 0.0, 1.0]))
        out = rabi_evolve(r0, np.array([2.0, 0.0, 0.0]), 0.0, math.pi / 4.0)
        npt.assert_allclose(out.r, [0.0, -1.0, 0.0], atol=1e-12)

    def test_zero_noise_preserves_norm(self):
        r0 = BlochState(np.array([0.6, 0.0, 0.8]))
        out = rabi_evolve(r0, np.array([0.3, -1.1, 0.7]), 0.0, 2.37)
        assert np.linalg.norm(out.r) == pytest.approx(np.linalg.norm(r0.r), abs=1e-10)

    def test_damping_is_isotropic(self):
        r0 = BlochState(np.array([0.0, 0.6, 0.0]))
        axis = np.array([1.4, 0.0, 0.0])
        unitary = rabi_evolve(r0, axis, 0.0, 1.1)
        noisy = rabi_evolve(r0, axis, 0.8, 1.1)
        damp = math.exp(-(1.4**2) * 0.8**2 * 1.1 / 8.0)
        npt.assert_allclose(noisy.r, damp * unitary.r, atol=1e-12)

    def test_validation(self):
        r0 = BlochState(np.array([0.0, 0.0, 1.0]))
        with pytest.raises(ValueError):
            rabi_evolve(r0, np.array([0.0, 0.0]), 1.0, 1.0)
        with pytest.raises(ValueError):
            rabi_evolve(r0, np.zeros(3), 1.0, 1.0)
        with pytest.raises(ValueError):
            rabi_evolve(r0, np.array([1.0, 0.0, 0.0]), 1.0, -1.0)

    def test_probabilities(self):
        assert rabi_probabilities(0.0) == (0.5, 0.5)
        assert rabi_probabilities(1.0) == (1.0, 0.0)
        assert rabi_probabilities(-1.0) == (0.0, 1.0)
        # tiny float excursions are clamped, real ones rejected
        up, down = rabi_probabilities(1.0 + 5e-13)
        assert up == 1.0 and down == 0.0
        with pytest.raises(ValueError):
            rabi_probabilities(1.1)

    def test_mean_matches_sse_ensemble(self):
        # nonlinear SSE trajectories of a resonant drive reproduce the
        # closed-form damped precession of the mean polarization
        omega, sigma = 1.0, 1.0
        spec = SystemSpec(
            energies=np.zeros(2),
            v=0.5 * omega * np.array([[0.0, 1.0], [1.0, 0.0]]),
            manifold=(0,),
            initial=0,
        )
        n_steps = 512
        plan = ExperimentPlan(
            system=spec,
            noise=NoiseParams(sigma=sigma),
            dt=math.pi / n_steps,
            horizon=math.pi,
            n_traj=2048,
            observables=("bloch",),
            master_seed=83_101,
            record_stride=n_steps // 4,
        )
        est = run_ensemble(plan, engine="nonlinear-sse")
        r0 = BlochState(np.array([0.0, 0.0, 1.0]))
        for i, t in enumerate(plan.times):
            want = rabi_evolve(r0, np.array([omega, 0.0, 0.0]), sigma, t)
            for k, name in enumerate(("r1", "r2", "r3")):
                col = est.columns[name]
                se = col.std_error[i]
                slack = 3.0 * se if se > 0 else 1e-3
                assert abs(col.mean[i] - want.r[k]) < slack + 2e-3


class TestBounds:
    def test_decay_bound_values(self):
        assert decay_bound_m_sigma(140.0) == pytest.approx(140.0 / (8.0 * math.pi), rel=1e-12)
        assert decay_bound_m_sigma(140.0) == pytest.approx(5.570, abs=1e-3)
        assert decay_bound_m_sigma(2000.0) == pytest.approx(79.577, abs=1e-3)
        assert decay_bound_m_sigma(0.0) == 0.0
        with pytest.raises(ValueError):
            decay_bound_m_sigma(-1.0)

    def test_itano_bound_value(self):
        got = itano_bound(320.7, 0.02)
        omega_gev = 320.7e6 * 2.0 * math.pi / (2.0 * math.pi) * HBAR_GEV_S
        want = math.pi * omega_gev / (-8.0 * math.log(1.0 - 0.04))
        assert got == pytest.approx(want, rel=1e-12)
        assert got == pytest.approx(2.03e-15, rel=2e-3)
        # comparable to the published k-meson scale
        assert 0.3 < got / OSCILLATION_BOUNDS["k-meson"] < 3.0

    def test_itano_bound_validation(self):
        with pytest.raises(ValueError):
            itano_bound(320.7, 0.0)
        with pytest.raises(ValueError):
            itano_bound(320.7, 0.5)

    def test_oscillation_bounds_frozen(self):
        assert OSCILLATION_BOUNDS == {
            "neutrino": 1e-20,
            "k-meson": 2e-15,
            "b-meson": 2e-13,
        }

    def test_bound_record_shape(self):
        rec = bound_record("decay", 140.0, 5.57, "M > E/(8 pi)")
        assert rec == {
            "kind": "decay",
            "input": 140.0,
            "bound_GeV": 5.57,
            "formula": "M > E/(8 pi)",
        }
