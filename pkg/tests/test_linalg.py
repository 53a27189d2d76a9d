"""Tests for GTH, (I - M) solves and support-graph analysis"""

import numpy as np
import pytest
import hypothesis.extra.numpy as nph
import hypothesis.strategies as st
from hypothesis import given, settings

from app.errors import DimensionMismatch, NotStochastic, Reducible, SingularSystem
from app.services.linalg import IMinusFactor, as_matrix, graph_analysis, gth_stationary, solve_i_minus


def random_stochastic(seed: int, n: int = 5) -> np.ndarray:
    rng = np.random.default_rng(seed)
    P = rng.random((n, n)) + 0.01
    return P / P.sum(axis=1, keepdims=True)


class TestGTH:
    """Stationary vectors by GTH elimination"""

    @pytest.mark.parametrize("P,expected", [
        ([[1.0]], [1.0]),
        ([[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5]),
        ([[0.9, 0.1], [0.2, 0.8]], [2 / 3, 1 / 3]),
    ])
    def test_known_vectors(self, P, expected):
        assert gth_stationary(np.array(P)) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("seed", range(100))
    def test_residual_random_5x5(self, seed):
        P = random_stochastic(seed)
        x = gth_stationary(P)
        assert np.max(np.abs(x @ P - x)) <= 1e-13
        assert np.all(x >= 0)
        assert abs(x.sum() - 1.0) <= 1e-12

    @settings(max_examples=50, deadline=None)
    @given(nph.arrays(np.float64, (4, 4), elements=st.floats(0.001, 1.0)))
    def test_residual_property(self, raw):
        P = raw / raw.sum(axis=1, keepdims=True)
        x = gth_stationary(P)
        assert np.max(np.abs(x @ P - x)) <= 1e-13

    def test_periodic_chain_is_fine(self):
        x = gth_stationary(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert x == pytest.approx([0.5, 0.5])

    def test_row_sum_violation(self):
        with pytest.raises(NotStochastic):
            gth_stationary(np.array([[0.5, 0.4], [0.5, 0.5]]))

    def test_negative_entry(self):
        with pytest.raises(NotStochastic):
            gth_stationary(np.array([[1.2, -0.2], [0.5, 0.5]]))

    def test_two_closed_classes(self):
        with pytest.raises(Reducible):
            gth_stationary(np.eye(2))

    def test_not_square(self):
        with pytest.raises(DimensionMismatch):
            gth_stationary(np.array([[0.5, 0.5]]).reshape(1, 2))


class TestSolveIMinus:
    """(I - M) X = rhs and X (I - M) = rhs"""

    def test_zero_matrix_is_identity(self):
        assert solve_i_minus(np.zeros((2, 2)), np.ones(2)) == pytest.approx([1.0, 1.0])

    def test_scalar(self):
        assert solve_i_minus(np.array([[0.4]]), np.array([1.0])) == pytest.approx([5 / 3])

    def test_nilpotent(self):
        M = np.array([[0.0, 0.5], [0.0, 0.0]])
        assert solve_i_minus(M, np.ones(2)) == pytest.approx([1.5, 1.0])

    def test_right_solve(self):
        M = np.array([[0.0, 0.5], [0.0, 0.0]])
        X = solve_i_minus(M, np.ones(2), side="right")
        # X (I - M) = e  =>  X = e (I + M) = [1, 1.5]
        assert X == pytest.approx([1.0, 1.5])

    def test_singular(self):
        with pytest.raises(SingularSystem):
            solve_i_minus(np.array([[1.0]]), np.array([1.0]))

    def test_stochastic_matrix_is_singular(self):
        with pytest.raises(SingularSystem):
            IMinusFactor(np.array([[0.5, 0.5], [0.5, 0.5]]))

    def test_bad_side(self):
        with pytest.raises(ValueError):
            solve_i_minus(np.zeros((1, 1)), np.ones(1), side="middle")

    @settings(max_examples=50, deadline=None)
    @given(
        nph.arrays(np.float64, (3, 3), elements=st.floats(-1.0, 1.0)),
        nph.arrays(np.float64, (3,), elements=st.floats(-10.0, 10.0)),
    )
    def test_agrees_with_neumann_series(self, raw, rhs):
        scale = max(1.0, 2.0 * float(np.max(np.abs(raw).sum(axis=1))))
        M = raw / scale
        expected = np.zeros(3)
        term = rhs.copy()
        for _ in range(51):
            expected += term
            term = M @ term
        assert np.max(np.abs(solve_i_minus(M, rhs) - expected)) <= 1e-8


class TestGraphAnalysis:
    """Communicating classes and periods of support digraphs"""

    def test_identity_has_two_classes(self):
        g = graph_analysis(np.eye(2))
        assert g.num_classes == 2
        assert g.is_strongly_connected is False
        assert g.period is None
        assert g.class_periods == [1, 1]
        assert len(g.closed_classes) == 2

    def test_two_cycle(self):
        g = graph_analysis(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert g.num_classes == 1
        assert g.period == 2

    def test_self_loops_aperiodic(self):
        g = graph_analysis(np.full((2, 2), 0.5))
        assert g.num_classes == 1
        assert g.period == 1

    def test_three_cycle(self):
        P = np.roll(np.eye(3), 1, axis=1)
        assert graph_analysis(P).period == 3

    def test_transient_state_and_closed_class(self):
        # state 0 leaks into the closed cycle {1, 2}
        P = np.array([[0.5, 0.5, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        g = graph_analysis(P)
        assert g.num_classes == 2
        assert g.closed_period == 2

    def test_support_tolerance(self):
        P = np.array([[1.0, 1e-16], [1e-16, 1.0]])
        assert graph_analysis(P).num_classes == 2
        assert graph_analysis(P, support_tol=1e-20).num_classes == 1

    @settings(max_examples=50, deadline=None)
    @given(
        nph.arrays(np.bool_, (4, 4)),
        nph.arrays(np.float64, (4, 4), elements=st.floats(1e-6, 1e3)),
    )
    def test_rescaling_invariance(self, pattern, scale):
        M = pattern.astype(np.float64)
        g1 = graph_analysis(M)
        g2 = graph_analysis(M * scale)
        assert g1.num_classes == g2.num_classes
        assert g1.period == g2.period
        assert g1.class_periods == g2.class_periods


class TestAsMatrix:

    def test_rejects_non_finite(self):
        with pytest.raises(DimensionMismatch):
            as_matrix([[np.nan]])

    def test_scalar_becomes_1x1(self):
        assert as_matrix(0.5).shape == (1, 1)
