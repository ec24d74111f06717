import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from oracles import left_first_derivative, left_second_derivative, root_below_one
from queuekit.errors import CertificationError, DomainError, ValidationError
from queuekit.pgf import (PGFSeries, extinction_fixed_point, pgf_compose, pgf_moments, ruin_root_theta,
                          ruin_time_moments, theta_derivatives_at_one)

GRID = np.linspace(0.0, 0.9, 10)

closed_forms = st.one_of(
    st.floats(0.0, 6.0).map(PGFSeries.poisson),
    st.floats(0.05, 1.0).map(PGFSeries.geometric),
    st.tuples(st.floats(0, 0.5), st.floats(0, 0.5)).map(lambda t: PGFSeries.bernoulli_quadratic(*t)),
    st.integers(0, 6).map(PGFSeries.degenerate),
)


class TestSeries:
    def test_table_mass_invariant(self):
        with pytest.raises(ValidationError):
            PGFSeries.table([0.5, 0.4])
        with pytest.raises(ValidationError):
            PGFSeries.table([0.5, -0.1, 0.6])
        assert PGFSeries.table([0.5, 0.4], tail_mass=0.1).tail_mass == 0.1

    def test_constructor_validation(self):
        with pytest.raises(ValidationError):
            PGFSeries.geometric(0.0)
        with pytest.raises(ValidationError):
            PGFSeries.bernoulli_quadratic(0.7, 0.7)
        with pytest.raises(ValidationError):
            PGFSeries.degenerate(1.5)

    @given(closed_forms)
    def test_closed_form_matches_coefficient_sum(self, G):
        c, tail = G.coefficients(400)
        assert c.sum() + tail == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(G.evaluate(GRID), np.polynomial.polynomial.polyval(GRID, c), atol=1e-12)

    @given(closed_forms)
    def test_abel_limit_of_derivatives(self, G):
        m = pgf_moments(G)
        c, _ = G.coefficients(800)
        k = np.arange(len(c))
        assert m.mean == pytest.approx(k @ c, rel=1e-9, abs=1e-12)
        assert m.variance == pytest.approx((k * k) @ c - (k @ c) ** 2, rel=1e-8, abs=1e-10)
        # one-sided derivative from below approaches the same value
        h = 1e-2 / (1 + m.mean)
        assert left_first_derivative(lambda s: float(G.evaluate(s)), 1.0, h) == pytest.approx(m.mean, rel=1e-6, abs=1e-9)

    def test_moment_examples(self):
        assert pgf_moments(PGFSeries.poisson(0.5)) == pytest.approx(
            pgf_moments(PGFSeries.table(stats.poisson.pmf(np.arange(60), 0.5) / stats.poisson.pmf(np.arange(60), 0.5).sum())))
        m = pgf_moments(PGFSeries.poisson(0.5))
        assert (m.mean, m.variance) == pytest.approx((0.5, 0.5))
        m = pgf_moments(PGFSeries.degenerate(1))
        assert (m.mean, m.variance) == (1.0, 0.0)
        m = pgf_moments(PGFSeries.geometric(0.5))
        assert (m.mean, m.variance) == pytest.approx((1.0, 2.0))

    def test_table_tail_certification(self):
        c = 0.5 ** (np.arange(40) + 1)
        G = PGFSeries.table(c, tail_mass=1 - c.sum())
        m = pgf_moments(G, precision=1e-6)
        assert abs(m.mean - 1.0) <= m.mean_error + 1e-12
        assert abs(m.variance - 2.0) <= m.variance_error + 1e-12

    def test_uncertifiable_tail(self):
        G = PGFSeries.table([0.5, 0.2], tail_mass=0.3)
        with pytest.raises(CertificationError):
            pgf_moments(G, precision=1e-6)

    def test_continuity_probe(self):
        # binomial(n, 2/n) coefficients approach poisson(2); PGFs converge on the grid
        target = PGFSeries.poisson(2.0).evaluate(GRID)
        gaps = []
        for n in (10, 100, 1000, 10000):
            G = PGFSeries.table(stats.binom.pmf(np.arange(n + 1), n, 2.0 / n))
            gaps.append(np.max(np.abs(G.evaluate(GRID) - target)))
        assert all(b < a for a, b in zip(gaps, gaps[1:])) and gaps[-1] < 1e-3

    def test_sampling_mean(self):
        rng = np.random.default_rng(1)
        for G in (PGFSeries.poisson(1.5), PGFSeries.geometric(0.4), PGFSeries.bernoulli_quadratic(0.2, 0.3),
                  PGFSeries.compound(PGFSeries.poisson(1.0), PGFSeries.geometric(0.5))):
            x = G.sample(rng, 40_000)
            m = pgf_moments(G)
            assert abs(x.mean() - m.mean) < 4 * math.sqrt(m.variance / len(x)) + 1e-12


class TestCompose:
    def test_identity_inner(self):
        A = PGFSeries.poisson(2.0)
        C = pgf_compose(A, PGFSeries.degenerate(1))
        c, _ = A.coefficients(len(C.coeffs) - 1)
        assert np.allclose(C.coeffs, c, atol=1e-15)

    def test_mean_chain_rule(self):
        C = pgf_compose(PGFSeries.poisson(2.0), PGFSeries.degenerate(3))
        assert pgf_moments(C).mean == pytest.approx(6.0, abs=1e-9)

    def test_first_coefficient(self):
        C = pgf_compose(PGFSeries.bernoulli_quadratic(0.5, 0.5), PGFSeries.geometric(0.5))
        assert C.coeffs[0] == pytest.approx(0.625, abs=1e-15)

    @given(closed_forms, closed_forms)
    def test_compose_matches_nested_evaluation(self, A, B):
        try:
            C = pgf_compose(A, B, tail_tol=1e-10)
        except CertificationError:
            return
        assert np.allclose(C.evaluate(GRID), A.evaluate(B.evaluate(GRID)), atol=1e-9)
        closed = PGFSeries.compound(A, B)
        assert np.allclose(closed.evaluate(GRID), C.evaluate(GRID), atol=1e-9)

    def test_compound_variance(self):
        A, B = PGFSeries.poisson(1.5), PGFSeries.geometric(0.4)
        m = pgf_moments(PGFSeries.compound(A, B))
        a, b = pgf_moments(A), pgf_moments(B)
        assert m.mean == pytest.approx(a.mean * b.mean)
        assert m.variance == pytest.approx(a.mean * b.variance + a.variance * b.mean ** 2)

    def test_uncertifiable_composition(self):
        with pytest.raises(CertificationError):
            pgf_compose(PGFSeries.poisson(40.0), PGFSeries.geometric(0.001), K=16)


class TestExtinction:
    def test_quadratic(self):
        assert abs(extinction_fixed_point(PGFSeries.bernoulli_quadratic(0.4, 0.6)) - 2 / 3) <= 1e-9

    def test_subcritical(self):
        assert extinction_fixed_point(PGFSeries.bernoulli_quadratic(0.6, 0.4)) is None
        assert extinction_fixed_point(PGFSeries.poisson(1.0)) is None

    def test_poisson_two(self):
        r = extinction_fixed_point(PGFSeries.poisson(2.0))
        assert r == pytest.approx(0.203188, abs=1e-6)
        assert r == pytest.approx(root_below_one(lambda s: math.exp(2 * (s - 1))), abs=1e-9)

    @given(st.floats(1.05, 8.0))
    def test_poisson_matches_bracketing(self, mu):
        G = PGFSeries.poisson(mu)
        r = extinction_fixed_point(G)
        assert r == pytest.approx(root_below_one(lambda s: float(G.evaluate(s))), abs=1e-9)

    @given(st.floats(0.0, 0.45), st.floats(0.55, 1.0))
    def test_quadratic_matches_roots(self, a0, a2):
        if a0 + a2 > 1:
            return
        G = PGFSeries.bernoulli_quadratic(a0, a2)
        r = extinction_fixed_point(G)
        if G.derivative(1.0) <= 1:
            assert r is None
        else:
            assert r == pytest.approx(a0 / a2, abs=1e-9)


class TestRuin:
    def test_theta_at_one(self):
        assert ruin_root_theta(PGFSeries.poisson(0.5), 1.0) == 1.0

    def test_theta_poisson(self):
        t = ruin_root_theta(PGFSeries.poisson(0.5), 0.5)
        assert t == pytest.approx(0.3637, abs=1e-3)
        assert t == pytest.approx(root_below_one(lambda x: 0.5 * math.exp(0.5 * (x - 1))), abs=1e-9)

    def test_theta_domain(self):
        with pytest.raises(DomainError):
            ruin_root_theta(PGFSeries.poisson(1.2), 0.5)
        with pytest.raises(DomainError):
            ruin_root_theta(PGFSeries.poisson(0.5), 0.0)

    @given(st.one_of(st.floats(0.05, 0.9).map(PGFSeries.poisson), st.floats(0.55, 0.95).map(PGFSeries.geometric)))
    def test_theta_derivatives_by_finite_differences(self, P):
        d1, d2 = theta_derivatives_at_one(P)
        h = 0.05 * (1 - pgf_moments(P).mean) ** 2
        theta = lambda w: ruin_root_theta(P, w)
        assert left_first_derivative(theta, 1.0, h) == pytest.approx(d1, rel=1e-3)
        assert left_second_derivative(theta, 1.0, h) == pytest.approx(d2, rel=1e-3)

    def test_ruin_moments(self):
        assert ruin_time_moments(PGFSeries.degenerate(1), PGFSeries.poisson(0.5)) == pytest.approx((2.0, 4.0))
        assert ruin_time_moments(PGFSeries.degenerate(0), PGFSeries.poisson(0.5)) == (0.0, 0.0)

    def test_no_arrivals(self):
        F = PGFSeries.geometric(1 / 3)
        ET, VT = ruin_time_moments(F, PGFSeries.degenerate(0))
        assert (ET, VT) == pytest.approx((2.0, pgf_moments(F).variance))

    def test_ruin_domain(self):
        with pytest.raises(DomainError):
            ruin_time_moments(PGFSeries.degenerate(1), PGFSeries.poisson(1.0))
