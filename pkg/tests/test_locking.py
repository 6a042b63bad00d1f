import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from coherent_ising import (
    NoiseModel,
    analyze,
    asymptotic_report,
    enumerate_spectrum,
    erf_window_mass,
    generate_hard,
    trial_plan,
)
from coherent_ising.locking import LockingAnalysis, PopulationModel

from conftest import brute_energies


def exact_success(p: float, tau: int) -> Fraction:
    """1 - (1 - p)**tau in exact rationals (p is a binary float, so exact)."""
    return 1 - (1 - Fraction(p)) ** tau


class TestAnalyze:
    def test_noiseless_only_locks_solutions(self, af_pair):
        a = analyze(af_pair, 0, NoiseModel())
        assert a.K_prime == 0 and a.size_Z == 0 and a.p_s == 1
        assert a.ratio == math.inf and a.z_empty

    def test_forced_window(self, af_pair):
        a = analyze(af_pair, 0, NoiseModel(), K_prime=2)
        assert a.p_s == 0.5 and a.ratio == 1.0

    def test_hard_n12_against_scan(self):
        d = generate_hard(12, 7)
        m = NoiseModel(0.05, 0.05)
        a = analyze(d.instance, d.K, m)
        es = brute_energies(d.instance).values()
        y = sum(e < d.K for e in es)
        z = sum(d.K <= e <= d.K + a.K_prime for e in es)
        assert a.p_s == y / (y + z)
        assert a.K_prime == pytest.approx(0.05 * (math.sqrt(12 * 11 / 3) + math.sqrt(8)))

    def test_no_instance_flagged(self, af_pair):
        a = analyze(af_pair, -1, NoiseModel(), K_prime=3)
        assert a.no_instance and a.p_s == 0

    def test_p_s_nonincreasing_in_window(self):
        d = generate_hard(10, 1)
        spec = enumerate_spectrum(d.instance)
        ps = [analyze(d.instance, d.K, NoiseModel(), K_prime=w / 4, spectrum=spec).p_s for w in range(40)]
        assert all(b <= a for a, b in zip(ps, ps[1:]))

    def test_exact_support_mode(self):
        d = generate_hard(8, 0)
        a = analyze(d.instance, d.K, NoiseModel(0.1, 0.1), support="exact")
        m_j, m_b = d.instance.num_couplings, d.instance.num_fields
        assert a.K_prime == pytest.approx(0.1 * (math.sqrt(m_j) + math.sqrt(m_b)))

    def test_scale_invariance(self):
        d = generate_hard(10, 3)
        a = analyze(d.instance, d.K, NoiseModel(0.3, 0.3))
        spec = enumerate_spectrum(d.instance)
        pop = PopulationModel.for_instance(d.instance)
        for scale in (1e-6, 1.0, 37.5):
            p = pop.initial_populations(spec, scale)
            py = sum(v for lam, v in p.items() if lam < d.K)
            pz = sum(v for lam, v in p.items() if d.K <= lam <= a.v)
            assert py / (py + pz) == pytest.approx(a.p_s, rel=1e-12)

    def test_gaussian_cross_check_is_reported(self):
        d = generate_hard(12, 2)
        a = analyze(d.instance, d.K, NoiseModel(0.3, 0.3))
        assert a.gaussian_PZ0 > 0
        assert a.z_fraction == a.size_Z / 2**12


class TestErfWindow:
    def test_zero_width(self):
        assert erf_window_mass(-3.0, 0.0, 2.0) == 0.0

    def test_total_mass(self):
        assert erf_window_mass(-12 * 3.0, 24 * 3.0, 3.0) == pytest.approx(1.0, abs=1e-9)

    def test_one_sigma_against_quadrature(self):
        sigma = 2.5
        pdf = lambda x: math.exp(-x * x / (2 * sigma**2)) / (sigma * math.sqrt(2 * math.pi))
        oracle, _ = quad(pdf, -sigma, sigma)
        assert erf_window_mass(-sigma, 2 * sigma, sigma) == pytest.approx(oracle, abs=1e-12)
        assert oracle == pytest.approx(0.6827, abs=1e-4)

    def test_deep_tail_precision(self):
        sigma = 1.0
        pdf = lambda x: math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
        oracle, _ = quad(pdf, 9, 10, epsabs=0, epsrel=1e-12)
        assert erf_window_mass(9, 1, sigma) == pytest.approx(oracle, rel=1e-9)

    @given(st.floats(-20, 20), st.floats(0, 10), st.floats(0, 10), st.floats(0.1, 10))
    def test_monotone_in_width(self, K, w1, w2, sigma):
        lo, hi = sorted((w1, w2))
        assert erf_window_mass(K, lo, sigma) <= erf_window_mass(K, hi, sigma) + 1e-15


class TestTrialPlan:
    def test_half(self):
        assert trial_plan(0.5, 0.75).tau == 2

    def test_certain(self):
        assert trial_plan(1.0, 0.999).tau == 1

    def test_zero_is_unbounded(self):
        assert trial_plan(0.0, 0.9).unbounded

    def test_small_p(self):
        p = 2.0**-10
        tau = trial_plan(p, 0.99).tau
        assert tau == 4714
        assert exact_success(p, 4714) >= Fraction(0.99)
        assert exact_success(p, 4713) < Fraction(0.99)

    def test_tiny_p_stable(self):
        p = 2.0**-40
        tau = trial_plan(p, 0.5).tau
        # ln 2 / p to first order; exact tau within one of it.
        assert abs(tau - math.log(2) * 2**40) < 2

    @given(st.floats(1e-4, 1.0), st.floats(0.01, 0.999))
    @settings(max_examples=60, deadline=None)
    def test_minimality(self, p, c):
        tau = trial_plan(p, c).tau
        assert exact_success(p, tau) >= Fraction(c)
        assert tau == 1 or exact_success(p, tau - 1) < Fraction(c)


def _fake(n, p):
    return LockingAnalysis(n, 0, 0.0, 0.0, 0.0, "paper-linear", 1, 0, 1.0, 0.0, p, 1.0, 0.0, 0.0, False)


class TestAsymptoticReport:
    def test_exact_exponential(self):
        rep = asymptotic_report([_fake(n, 2.0**-n) for n in range(4, 12)])
        assert rep.fit.slope == pytest.approx(-math.log(2), abs=1e-9)
        assert rep.table[0]["tau"] == trial_plan(2.0**-4, 0.99).tau

    def test_constant(self):
        rep = asymptotic_report([_fake(n, 0.3) for n in range(4, 12)])
        assert rep.fit.slope == pytest.approx(0, abs=1e-12)

    def test_all_one_flagged(self):
        rep = asymptotic_report([_fake(n, 1.0) for n in range(4, 12)])
        assert rep.degenerate and rep.fit is None

    def test_too_few_points(self):
        assert asymptotic_report([_fake(n, 0.5) for n in (4, 5, 6)]).degenerate

    def test_hard_sweep_slope_negative(self):
        analyses = []
        for n in (8, 10, 12, 14, 16, 18):
            for seed in range(6):
                d = generate_hard(n, seed)
                analyses.append(analyze(d.instance, d.K, NoiseModel(0.05, 0.05), K_prime=0.25 * n))
        rep = asymptotic_report(analyses)
        assert not rep.degenerate
        assert rep.fit.slope < 0
