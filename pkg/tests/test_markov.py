import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import (eig_stationary, enumeration_classes, enumeration_classify, first_return_mass,
                     naive_power, return_time_period)
from queuekit.errors import ReducibleChainError, ValidationError
from queuekit.markov import (Distribution, TransitionMatrix, communication_classes, evolve_distribution,
                             is_ergodic, n_step_matrix, stationary_distribution, two_state_matrix)


def random_chain(rng, n, density=1.0):
    P = rng.random((n, n)) * (rng.random((n, n)) < density)
    for i in range(n):
        if P[i].sum() == 0:
            P[i, rng.integers(n)] = 1.0
    return P / P.sum(axis=1, keepdims=True)


@st.composite
def chains(draw, max_n=6, density=None):
    n = draw(st.integers(1, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    dens = draw(st.sampled_from([0.25, 0.4, 0.7, 1.0])) if density is None else density
    return random_chain(np.random.default_rng(seed), n, dens)


class TestTransitionMatrix:
    def test_rejects_bad_row_sum(self):
        with pytest.raises(ValidationError, match="row 1"):
            TransitionMatrix([[1.0, 0.0], [0.5, 0.4]])

    def test_rejects_negative(self):
        with pytest.raises(ValidationError, match="negative"):
            TransitionMatrix([[1.2, -0.2], [0.5, 0.5]])

    def test_rejects_non_square(self):
        with pytest.raises(ValidationError):
            TransitionMatrix([[1.0, 0.0]])

    def test_labels(self):
        P = TransitionMatrix([[0.0, 1.0], [1.0, 0.0]], states=("a", "b"))
        assert communication_classes(P).labelled_classes() == [("a", "b")]

    def test_distribution_validation(self):
        with pytest.raises(ValidationError):
            Distribution([0.5, 0.6])


class TestPowers:
    def test_zero_power_is_identity(self):
        P = two_state_matrix(0.2, 0.3)
        assert np.array_equal(n_step_matrix(P, 0).rows, np.eye(2))

    def test_negative_power_rejected(self):
        with pytest.raises(ValidationError):
            n_step_matrix(two_state_matrix(0.2, 0.3), -1)

    @given(chains(), st.integers(0, 12), st.integers(0, 12))
    def test_chapman_kolmogorov(self, P, m, n):
        lhs = n_step_matrix(P, m + n).rows
        rhs = n_step_matrix(P, m).rows @ n_step_matrix(P, n).rows
        assert np.max(np.abs(lhs - rhs)) <= 1e-10

    @given(chains(), st.integers(0, 30))
    def test_squaring_matches_naive_product(self, P, n):
        assert np.allclose(n_step_matrix(P, n).rows, naive_power(P, n), atol=1e-12)

    @given(chains(), st.integers(0, 50))
    def test_rows_remain_stochastic(self, P, n):
        assert np.allclose(n_step_matrix(P, n).rows.sum(axis=1), 1.0, atol=1e-12)

    def test_evolve_distribution(self):
        P = two_state_matrix(0.2, 0.3)
        d = evolve_distribution(P, [1.0, 0.0], 1)
        assert np.allclose(d.weights, [0.7, 0.3])

    def test_evolve_length_mismatch(self):
        with pytest.raises(ValidationError):
            evolve_distribution(two_state_matrix(0.2, 0.3), [1.0, 0.0, 0.0], 1)


class TestClassification:
    @given(chains())
    def test_matches_enumeration_oracle(self, P):
        cls = communication_classes(P)
        assert list(cls.kinds) == enumeration_classify(P)
        assert {frozenset(c) for c in cls.classes} == enumeration_classes(P)

    @given(chains())
    def test_periods_match_return_times(self, P):
        cls = communication_classes(P)
        for c, d in zip(cls.classes, cls.periods):
            g = return_time_period(P, c[0])
            assert d == (g if g else 1)

    @given(chains())
    def test_transient_states_leak_mass(self, P):
        cls = communication_classes(P)
        for s, kind in enumerate(cls.kinds):
            if kind == "transient":
                assert first_return_mass(P, s, 20) < 1.0 - 1e-12

    def test_absorbing(self):
        P = [[1.0, 0.0, 0.0], [0.5, 0.0, 0.5], [0.0, 0.0, 1.0]]
        cls = communication_classes(P)
        assert cls.kinds == ("absorbing", "transient", "absorbing")
        assert len(cls.classes) == 3

    def test_periodic_cycle(self):
        P = np.roll(np.eye(3), 1, axis=1)
        v = is_ergodic(P)
        assert v.kind == "periodic" and v.period == 3
        assert str(v) == "periodic(3)"

    def test_reducible_verdict(self):
        assert is_ergodic([[1.0, 0.0], [0.5, 0.5]]).kind == "reducible"

    def test_ergodic_two_state(self):
        assert is_ergodic(two_state_matrix(0.2, 0.3)).kind == "ergodic"


class TestStationary:
    def test_two_state_limit(self):
        pi = stationary_distribution(two_state_matrix(0.2, 0.3))
        assert np.max(np.abs(pi.weights - [0.4, 0.6])) <= 1e-10

    def test_two_state_power_limit(self):
        Pn = n_step_matrix(two_state_matrix(0.2, 0.3), 200).rows
        assert np.max(np.abs(Pn - [[0.4, 0.6], [0.4, 0.6]])) <= 1e-10

    def test_reducible_raises_with_classes(self):
        with pytest.raises(ReducibleChainError) as exc:
            stationary_distribution([[1.0, 0.0], [0.0, 1.0]])
        assert exc.value.classes == [(0,), (1,)]

    @given(chains(density=1.0))
    def test_dense_chain_matches_eigenvector(self, P):
        pi = stationary_distribution(P).weights
        assert np.allclose(pi, eig_stationary(P), atol=1e-9)
        assert np.max(np.abs(pi @ P - pi)) <= 1e-12

    @given(chains(density=1.0))
    def test_powers_converge_to_stationary(self, P):
        pi = stationary_distribution(P).weights
        Pn = n_step_matrix(P, 4096).rows
        assert np.allclose(Pn, np.tile(pi, (len(pi), 1)), atol=1e-8)

    def test_periodic_chain_has_stationary_but_no_limit(self):
        P = np.roll(np.eye(3), 1, axis=1)
        assert np.allclose(stationary_distribution(P).weights, 1 / 3)
