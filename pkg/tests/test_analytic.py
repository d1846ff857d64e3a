"""Closed-form decay laws: survival, per-channel transition probabilities,
line shapes, and the golden-rule spectral function with its noise bound."""

import math

import numpy as np
import numpy.testing as npt
import pytest

from sse_lab.analytic import (
    DecayChannel,
    corrected_decay_rate,
    golden_rule_F,
    golden_rule_F_delta,
    golden_rule_correction_bound,
    lorentzian_profile,
    survival_expectation,
    survival_expectation_degenerate,
    transition_expectation,
)
from sse_lab.errors import DomainWarning
from sse_lab.expectation import expectation_coefficients
from sse_lab.stochastic import gaussian_expectation
from sse_lab.system import SystemSpec, WWParams, compute_ww_params


class TestCorrectedRate:
    def test_frozen_value(self):
        assert corrected_decay_rate(0.1, 1.0) == pytest.approx(0.09875, abs=1e-15)

    def test_zero_noise_is_identity(self):
        assert corrected_decay_rate(0.3, 0.0) == 0.3

    def test_domain_warning_at_unit_correction(self):
        with pytest.warns(DomainWarning):
            corrected_decay_rate(0.5, 4.0)


class TestSurvivalExpectation:
    def setup_method(self):
        self.ww = WWParams.scalar(e_s=0.0, m=0.0, gamma=0.1)

    def test_zero_noise(self):
        assert survival_expectation(self.ww, 0.0, 10.0) == pytest.approx(
            math.exp(-1.0), rel=1e-12
        )

    def test_frozen_noisy_value(self):
        got = survival_expectation(self.ww, 1.0, 10.0)
        assert got == pytest.approx(math.exp(-0.9875), rel=1e-12)
        assert got == pytest.approx(0.3725068, abs=5e-8)

    def test_monotone_decreasing(self):
        vals = [survival_expectation(self.ww, 1.0, t) for t in np.linspace(0, 40, 21)]
        assert np.all(np.diff(vals) < 0)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            survival_expectation(self.ww, 1.0, -0.1)

    def test_matches_gaussian_transform_of_deterministic_law(self):
        # E[e^{-Gamma u}] with u = t - sigma W/2 reproduces the corrected rate
        for sigma, t in [(0.5, 4.0), (1.0, 10.0), (2.0, 3.0)]:
            want = survival_expectation(self.ww, sigma, t)
            got = gaussian_expectation(lambda u: np.exp(-0.1 * u), t, sigma)
            assert got == pytest.approx(want, rel=1e-9)


class TestSurvivalDegenerate:
    def test_scalar_case_matches_amplitude_propagator(self):
        ww = WWParams.scalar(e_s=0.0, m=0.02, gamma=0.1)
        t = 7.0
        got = survival_expectation_degenerate(ww, t)
        assert got.shape == (1, 1)
        assert got[0, 0] == pytest.approx(np.exp((-0.02j - 0.05) * t), rel=1e-12)

    def test_identity_at_t_zero(self):
        ww = WWParams(0.0, np.zeros((2, 2)), np.diag([0.1, 0.2]))
        npt.assert_allclose(survival_expectation_degenerate(ww, 0.0), np.eye(2), atol=0)

    def test_diagonal_matrices_act_entrywise(self):
        ww = WWParams(0.0, np.diag([0.01, -0.02]), np.diag([0.1, 0.2]))
        got = survival_expectation_degenerate(ww, 5.0)
        want = np.diag(
            [np.exp((-0.01j - 0.05) * 5.0), np.exp((0.02j - 0.1) * 5.0)]
        )
        npt.assert_allclose(got, want, atol=1e-14)

    def test_against_coefficient_ode(self):
        # two degenerate manifold states fed by disjoint halves of a wide
        # dense band: |E[C_sa]| should track e^{-Gamma_aa t / 2} within 2%
        offs = np.arange(-200, 201) * 0.01
        nb = offs.size
        dim = 2 + 2 * nb
        energies = np.concatenate([[0.0, 0.0], offs, offs])
        v = np.zeros((dim, dim))
        v1 = math.sqrt(0.08 * 0.01 / (2.0 * math.pi))
        v2 = math.sqrt(0.04 * 0.01 / (2.0 * math.pi))
        v[0, 2 : 2 + nb] = v1
        v[2 : 2 + nb, 0] = v1
        v[1, 2 + nb :] = v2
        v[2 + nb :, 1] = v2
        spec = SystemSpec(energies, v, (0, 1), 0)
        ww = compute_ww_params(spec, delta_tolerance=0.005)
        npt.assert_allclose(np.diag(ww.gamma).real, [0.08, 0.04], rtol=1e-10)
        assert abs(ww.gamma[0, 1]) == 0.0

        grid = np.linspace(0.0, 25.0, 26)
        e_cs = expectation_coefficients(spec, 1.0, grid)
        prop = np.array([survival_expectation_degenerate(ww, t) for t in grid])
        rel = np.abs(np.abs(e_cs[:, 0]) - np.abs(prop[:, 0, 0])) / np.abs(prop[:, 0, 0])
        assert rel.max() < 0.02
        # the decoupled manifold partner stays empty
        assert np.abs(e_cs[:, 1]).max() < 1e-10


class TestTransitionExpectation:
    def setup_method(self):
        self.ww = WWParams.scalar(e_s=0.0, m=0.01, gamma=0.1)
        self.channel = DecayChannel(e_m=0.3, v_ms=0.05)

    def test_zero_at_t_zero(self):
        assert transition_expectation(self.ww, self.channel, 1.0, 0.0) == 0.0
        assert transition_expectation(self.ww, self.channel, 1.0, 0.0, mode="leading") == 0.0

    @pytest.mark.parametrize("sigma", [0.0, 1.0])
    def test_long_time_limit_is_lorentzian(self, sigma):
        got = transition_expectation(self.ww, self.channel, sigma, 400.0)
        assert got == pytest.approx(lorentzian_profile(self.ww, self.channel), rel=1e-8)

    def test_exact_equals_gaussian_transform(self):
        # the noisy law is the Gaussian time-smear of the zero-noise law
        base = lambda u: transition_expectation(self.ww, self.channel, 0.0, u)
        for sigma, t in [(0.5, 2.0), (1.0, 10.0), (1.5, 5.0)]:
            want = transition_expectation(self.ww, self.channel, sigma, t)
            got = gaussian_expectation(base, t, sigma)
            assert got == pytest.approx(want, abs=1e-10)

    def test_modes_agree_at_weak_coupling(self):
        # leading drops O(sigma^2 Gamma) pieces of the envelope and phase
        ww = WWParams.scalar(e_s=0.0, m=0.0, gamma=1e-4)
        exact = transition_expectation(ww, self.channel, 1.0, 8.0)
        lead = transition_expectation(ww, self.channel, 1.0, 8.0, mode="leading")
        assert exact == pytest.approx(lead, rel=1e-3)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            transition_expectation(self.ww, self.channel, 1.0, 1.0, mode="bogus")

    @pytest.mark.parametrize("sigma", [0.0, 1.0])
    def test_channel_sum_balances_decay(self, sigma, gold_bath):
        # golden-rule sum: leading-order channel probabilities over the band
        # total 1 - e^{-Gamma t} within 2% for Gamma t in [0.5, 3]
        ww = compute_ww_params(gold_bath)
        gamma = ww.gamma_scalar
        for t in (5.0, 15.0, 30.0):
            total = sum(
                transition_expectation(
                    ww,
                    DecayChannel(gold_bath.energies[m], gold_bath.v[0, m]),
                    sigma,
                    t,
                    mode="leading",
                )
                for m in range(1, gold_bath.dim)
            )
            want = 1.0 - math.exp(-gamma * t)
            assert abs(total - want) / want < 0.02


class TestLorentzianProfile:
    def test_resonant_peak(self):
        ww = WWParams.scalar(e_s=0.0, m=0.0, gamma=0.1)
        peak = lorentzian_profile(ww, DecayChannel(0.0, 0.05))
        assert peak == pytest.approx(4.0 * 0.05**2 / 0.1**2, rel=1e-12)
        # half maximum at detuning Gamma/2
        half = lorentzian_profile(ww, DecayChannel(0.05, 0.05))
        assert half == pytest.approx(0.5 * peak, rel=1e-12)

    def test_shift_moves_center(self):
        ww = WWParams.scalar(e_s=0.0, m=0.02, gamma=0.1)
        peak = lorentzian_profile(ww, DecayChannel(0.02, 0.05))
        assert peak == pytest.approx(4.0 * 0.05**2 / 0.1**2, rel=1e-12)

    def test_zero_width_resonance_raises(self):
        ww = WWParams.scalar(e_s=0.0, m=0.0, gamma=0.0)
        with pytest.raises(ZeroDivisionError):
            lorentzian_profile(ww, DecayChannel(0.0, 0.05))


class TestGoldenRuleF:
    def test_zero_noise_closed_form(self):
        # F[0, t] = (2 pi / Gamma t) (1 - e^{-Gamma t})
        for gt in (0.1, 1.0, 3.0):
            got = golden_rule_F(0.0, gt / 0.1, 0.1)
            want = (2.0 * math.pi / gt) * (1.0 - math.exp(-gt))
            assert got == pytest.approx(want, rel=1e-9)

    def test_frozen_value(self):
        assert golden_rule_F(0.0, 10.0, 0.1) == pytest.approx(
            2.0 * math.pi * (1.0 - math.exp(-1.0)), rel=1e-9
        )
        assert golden_rule_F(0.0, 10.0, 0.1) == pytest.approx(3.9717306, abs=5e-8)

    def test_continuous_at_small_a(self):
        # the A > 0 branch joins the A = 0 closed form: at A = 0.01 the
        # correction integral is bounded by e^{-1/(4A)} ~ 1e-11
        f0 = golden_rule_F(0.0, 10.0, 0.1)
        assert golden_rule_F(0.01, 10.0, 0.1) == pytest.approx(f0, rel=1e-6)

    def test_delta_matches_direct_difference(self):
        a, t, gamma = 0.05, 10.0, 0.1
        direct = golden_rule_F(a, t, gamma) - golden_rule_F(0.0, t, gamma)
        assert golden_rule_F_delta(a, t, gamma) == pytest.approx(direct, abs=1e-8)

    def test_delta_monotone_in_a(self):
        vals = [golden_rule_F_delta(a, 10.0, 0.1) for a in (0.01, 0.05, 0.2, 1.0)]
        assert vals[0] > 0.0
        assert np.all(np.diff(vals) > 0)

    def test_delta_zero_at_zero_a(self):
        assert golden_rule_F_delta(0.0, 10.0, 0.1) == 0.0

    @pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("t", [5.0, 10.0, 20.0])
    def test_noise_correction_bound(self, sigma, t):
        # physical parameter A = sigma^2 / (8 t)
        delta = golden_rule_F_delta(sigma**2 / (8.0 * t), t, 0.1)
        assert delta <= golden_rule_correction_bound(sigma, t)

    def test_bound_edge_cases(self):
        assert golden_rule_correction_bound(0.0, 5.0) == 0.0
        with pytest.raises(ValueError):
            golden_rule_correction_bound(1.0, 0.0)
        with pytest.raises(ValueError):
            golden_rule_correction_bound(-1.0, 5.0)

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            golden_rule_F(0.0, -1.0, 0.1)
        with pytest.raises(ValueError):
            golden_rule_F(0.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            golden_rule_F(-0.1, 1.0, 0.1)


def test_decay_channel_validation():
    with pytest.raises(ValueError):
        DecayChannel(math.inf, 0.1)
    with pytest.raises(ValueError):
        DecayChannel(1.0, complex("nan"))
