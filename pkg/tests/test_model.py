"""Tests for block sequences, tail sums, drift and tail constants"""

import numpy as np
import pytest
from scipy.special import zeta

from app.errors import ExponentMismatch, GammaTooSmall, IndexOutOfDomain, InvalidSpec, ToleranceUnreachable
from app.services.model import (
    MG1Spec,
    PowerTailModel,
    assemble_A,
    assumption3_constants,
    block_at,
    drift_report,
    first_moment,
    hurwitz_tail,
    make_sequence,
    phase_permuted,
    power_tail_first_moment,
    tail_sum_bar,
    tail_sum_doublebar,
    validate_spec,
)
from app.services.tails import IntegratedTail
from tests.chains import scalar_chain


def heavy_scalar(gamma: float = 3.0) -> MG1Spec:
    """S2-shaped chain with tail exponent gamma"""
    return scalar_chain([0.7, 0.0], [0.7], 0.7, a_tail=(gamma, 1, 0.3), b_tail=(gamma, 1, 0.3))


def unit_tail(gamma: float = 3.0, k0: int = 1):
    return make_sequence("A", 1, 1, [], PowerTailModel(gamma=gamma, k0=k0, D=[[1.0]]))


class TestValidateSpec:
    """Structural and stochastic checks"""

    def test_s1_valid(self, s1_spec):
        assert validate_spec(s1_spec) == []

    def test_shipped_chains_valid(self, s2_spec, two_phase_spec):
        assert validate_spec(s2_spec) == []
        assert validate_spec(two_phase_spec) == []

    def test_row_sum_violation(self):
        spec = scalar_chain([0.6, 0.0, 0.5], [0.6, 0.4], 0.6)
        violations = validate_spec(spec)
        assert any(v.clause == "stochastic" and "levels >= 2" in v.message for v in violations)

    def test_gamma_range(self):
        spec = scalar_chain([0.7, 0.0], [0.7], 0.7, a_tail=(0.9, 1, 0.3), b_tail=(3.0, 1, 0.3))
        assert any(v.clause == "gamma" for v in validate_spec(spec))

    def test_negative_entry(self):
        spec = scalar_chain([0.7, 0.4, -0.1], [0.7, 0.3], 0.7)
        assert any(v.clause == "nonnegative" for v in validate_spec(spec))

    def test_wrong_boundary_shape(self, two_phase_spec):
        spec = MG1Spec(
            M0=1,
            M1=2,
            B_minus1=[[0.6, 0.6]],
            Bseq=two_phase_spec.Bseq,
            Aseq=two_phase_spec.Aseq,
        )
        assert any(v.clause == "dimensions" for v in validate_spec(spec))

    def test_explicit_overlaps_tail(self):
        spec = scalar_chain([0.7, 0.0, 0.1], [0.7], 0.7, a_tail=(3.0, 1, 0.2), b_tail=(3.0, 1, 0.3))
        assert any(v.clause == "tail_k0" for v in validate_spec(spec))

    def test_reducible_A(self):
        eye = [[1.0, 0.0], [0.0, 1.0]]
        zero = [[0.0, 0.0], [0.0, 0.0]]
        spec = MG1Spec(
            M0=1,
            M1=2,
            B_minus1=[[0.5], [0.5]],
            Bseq=make_sequence("B", 1, 2, [[[0.5]], [[0.25, 0.25]]]),
            Aseq=make_sequence("A", 1, 2, [[[0.5, 0.0], [0.0, 0.5]], zero, [[0.5, 0.0], [0.0, 0.5]]]),
        )
        assert np.allclose(assemble_A(spec), eye)
        assert any(v.clause == "irreducible_A" for v in validate_spec(spec))


class TestBlockAccess:
    """block_at and exact tail sums"""

    def test_explicit_block(self, s1_spec):
        np.testing.assert_allclose(block_at(s1_spec.Aseq, 1), [[0.4]], rtol=1e-9, atol=1e-12)

    def test_tail_block(self):
        seq = make_sequence("A", 1, 1, [], PowerTailModel(gamma=3, k0=1, D=[[0.3]]))
        assert block_at(seq, 2)[0, 0] == pytest.approx(0.3 * (1 / 8 - 1 / 27), rel=1e-15)

    def test_beyond_support_is_zero(self, s1_spec):
        assert np.all(block_at(s1_spec.Aseq, 7) == 0)

    def test_below_domain(self, s1_spec):
        with pytest.raises(IndexOutOfDomain):
            block_at(s1_spec.Aseq, -2)
        with pytest.raises(IndexOutOfDomain):
            block_at(s1_spec.Bseq, -1)

    def test_boundary_block_shape(self, two_phase_spec):
        assert block_at(two_phase_spec.Bseq, 0).shape == (1, 1)
        assert block_at(two_phase_spec.Bseq, 3).shape == (1, 2)

    def test_tail_sum_bar_finite(self, s1_spec):
        np.testing.assert_allclose(tail_sum_bar(s1_spec.Aseq, 0), [[0.4]], rtol=1e-9, atol=1e-12)
        assert np.all(tail_sum_bar(s1_spec.Aseq, 5) == 0)

    @pytest.mark.parametrize("N", [0, 1, 4, 99, 10_000])
    def test_tail_sum_bar_power(self, s2_spec, N):
        assert tail_sum_bar(s2_spec.Aseq, N)[0, 0] == pytest.approx(0.3 * (N + 1) ** -3, rel=1e-14)

    def test_telescoping_consistency(self, two_phase_spec):
        seq = two_phase_spec.Aseq
        for N in range(-1, 40):
            diff = tail_sum_bar(seq, N) - tail_sum_bar(seq, N + 1)
            assert np.allclose(diff, block_at(seq, N + 1), rtol=0, atol=1e-15)

    def test_doublebar_finite(self, s1_spec):
        assert np.all(tail_sum_doublebar(s1_spec.Aseq, 0) == 0)

    def test_doublebar_finite_explicit_weights(self):
        seq = make_sequence("A", 1, 1, [[[0.5]], [[0.0]], [[0.2]], [[0.3]]])
        # Abarbar(0) = sum_{j > 1} (j - 1) A(j) = 1 * 0.3
        assert tail_sum_doublebar(seq, 0)[0, 0] == pytest.approx(0.3)

    @pytest.mark.parametrize("N", [0, 3, 100, 5_000])
    def test_doublebar_matches_hurwitz_zeta(self, N):
        value = tail_sum_doublebar(unit_tail(), N)[0, 0]
        assert value == pytest.approx(zeta(3, N + 2), abs=1e-12)

    def test_doublebar_flat_region(self):
        # k0 = 5: Abar(l) = 5^-3 for l + 1 <= 5
        seq = unit_tail(k0=5)
        expected = 4 * 5.0 ** -3 + zeta(3, 6)
        assert tail_sum_doublebar(seq, 0)[0, 0] == pytest.approx(expected, abs=1e-12)

    def test_doublebar_asymptotics(self):
        N = 10_000
        assert tail_sum_doublebar(unit_tail(), N)[0, 0] * N ** 2 == pytest.approx(0.5, rel=1e-3)

    def test_doublebar_difference_identity(self, s2_spec):
        seq = s2_spec.Aseq
        for N in (1, 2, 10, 250):
            diff = tail_sum_doublebar(seq, N - 1) - tail_sum_doublebar(seq, N)
            assert np.allclose(diff, tail_sum_bar(seq, N), rtol=0, atol=2e-12)

    def test_doublebar_tolerance_floor(self, s2_spec):
        with pytest.raises(ToleranceUnreachable):
            tail_sum_doublebar(s2_spec.Aseq, 10, abs_tol=1e-16)


class TestSeries:
    """Bracketed Hurwitz-type sums"""

    @pytest.mark.parametrize("gamma,m", [(3.0, 1), (3.0, 102), (2.5, 7), (1.5, 1), (4.0, 1000)])
    def test_against_scipy_zeta(self, gamma, m):
        s = hurwitz_tail(gamma, m)
        assert s.value == pytest.approx(zeta(gamma, m), abs=1e-12)
        assert s.lower <= zeta(gamma, m) + 1e-15
        assert s.upper >= zeta(gamma, m) - 1e-15

    def test_bracket_width(self):
        s = hurwitz_tail(3.0, 102, abs_tol=1e-12)
        assert s.upper - s.lower <= 2e-12

    def test_gamma_too_small(self):
        with pytest.raises(GammaTooSmall):
            hurwitz_tail(1.0, 1)

    def test_tolerance_floor(self):
        with pytest.raises(ToleranceUnreachable):
            hurwitz_tail(3.0, 1, abs_tol=1e-16)

    def test_max_terms_exhausted(self):
        with pytest.raises(ToleranceUnreachable):
            hurwitz_tail(1.01, 1, abs_tol=1e-14, max_terms=1_000)

    @pytest.mark.parametrize("gamma", [2.5, 3.0, 4.0])
    def test_power_tail_first_moment(self, gamma):
        tail = PowerTailModel(gamma=gamma, k0=1, D=[[1.0]])
        assert power_tail_first_moment(tail) == pytest.approx(zeta(gamma), abs=1e-12)

    def test_first_moment_from_later_level(self):
        seq = unit_tail()
        # sum_{k >= 3} k (k^-3 - (k+1)^-3) = 3^-2 + zeta(3, 4)
        assert first_moment(seq, k_from=3)[0] == pytest.approx(3.0 ** -2 + zeta(3, 4), abs=1e-12)


class TestDriftReport:
    """varpi, mean increments and sigma"""

    def test_s1(self, s1_spec):
        report = drift_report(s1_spec)
        assert report.varpi == pytest.approx([1.0])
        assert report.mbar_A == pytest.approx([-0.2])
        assert report.sigma == pytest.approx(-0.2, abs=1e-15)
        assert report.assumption1_ok is True

    def test_s2(self, s2_spec):
        report = drift_report(s2_spec)
        assert report.sigma == pytest.approx(-0.7 + 0.3 * zeta(3), abs=1e-12)
        assert report.sigma == pytest.approx(-0.33938, abs=1e-5)
        assert report.mbar_B_e == pytest.approx([0.3 * zeta(3)], abs=1e-12)
        assert report.assumption1_ok is True

    def test_positive_drift(self):
        spec = scalar_chain([0.3, 0.0, 0.7], [0.3, 0.7], 0.3)
        report = drift_report(spec)
        assert report.sigma == pytest.approx(0.4)
        assert report.assumption1_ok is False
        assert report.flags["negative_drift"] is False

    def test_invalid_spec_raises(self):
        with pytest.raises(InvalidSpec):
            drift_report(scalar_chain([0.6, 0.0, 0.5], [0.6, 0.4], 0.6))

    def test_two_phase(self, two_phase_spec):
        report = drift_report(two_phase_spec)
        assert report.varpi == pytest.approx([31 / 59, 28 / 59], abs=1e-14)
        assert report.sigma == pytest.approx(-0.7 + 0.2 * zeta(3), abs=1e-12)
        assert report.sigma < 0
        assert report.flags["irreducible_P_sufficient"] is True

    def test_phase_relabeling_invariance(self, two_phase_spec):
        permuted = phase_permuted(two_phase_spec, [1, 0])
        assert validate_spec(permuted) == []
        assert drift_report(permuted).sigma == pytest.approx(drift_report(two_phase_spec).sigma, abs=1e-14)


class TestAssumption3Constants:
    """Limits of Abarbar(N) e / Fbar(N)"""

    def test_s2(self, s2_spec):
        c = assumption3_constants(s2_spec, IntegratedTail(3.0))
        assert c.c_A == pytest.approx([0.15])
        assert c.c_B == pytest.approx([0.15])
        assert c.c_A_star == pytest.approx([0.3])
        assert c.flags == []

    @pytest.mark.parametrize("gamma", [2.5, 3.0, 4.0])
    def test_ratios_converge(self, gamma):
        c = assumption3_constants(heavy_scalar(gamma), IntegratedTail(gamma))
        devs = [abs(c.ratios_A[N][0] - c.c_A[0]) for N in (100, 1_000, 10_000)]
        assert devs[0] >= devs[1] >= devs[2]
        assert c.ratios_A[10_000][0] == pytest.approx(c.c_A[0], rel=1e-2)

    def test_finite_support_boundary(self):
        spec = scalar_chain([0.7, 0.0], [0.6, 0.4], 0.7, a_tail=(3.0, 1, 0.3))
        c = assumption3_constants(spec, IntegratedTail(3.0))
        assert c.c_B == pytest.approx([0.0])
        assert c.c_A == pytest.approx([0.15])
        assert "B_finite_support" in c.flags

    def test_both_finite(self, s1_spec):
        with pytest.raises(ExponentMismatch):
            assumption3_constants(s1_spec, IntegratedTail(3.0))

    def test_heavier_tail_than_F(self):
        with pytest.raises(ExponentMismatch):
            assumption3_constants(heavy_scalar(2.5), IntegratedTail(3.0))

    def test_lighter_boundary_tail(self):
        spec = scalar_chain([0.7, 0.0], [0.7], 0.7, a_tail=(3.0, 1, 0.3), b_tail=(4.0, 1, 0.3))
        c = assumption3_constants(spec, IntegratedTail(3.0))
        assert "B_lighter_tail" in c.flags
        assert c.c_B == pytest.approx([0.0])

    def test_both_lighter(self):
        with pytest.raises(ExponentMismatch):
            assumption3_constants(heavy_scalar(4.0), IntegratedTail(3.0))
