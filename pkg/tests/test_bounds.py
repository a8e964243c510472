import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LN2, pmfs, random_pmf
from oracles import koshelev_constrained
from swsecond.bounds import (
    ExponentFn,
    comparison_table,
    diagonal,
    exponent,
    exponent_value,
    gaussian_tail_bound,
    koshelev_bound,
    koshelev_details,
    koshelev_terms,
    rect_grid,
    sum_line,
)
from swsecond.errors import OutOfRange, SignConstraintViolated, UnsupportedCase
from swsecond.region import BoundaryCase, CaseKind, RegionQuery, SecondOrderPoint, classify, resolve_anchor
from swsecond.source_model import compute_stats, make_joint_pmf

H = 1e-4
CORNER1 = BoundaryCase(CaseKind.CORNER, which=1)
NONCORNER = BoundaryCase(CaseKind.NON_CORNER, lam=0.5)
SIDE1 = BoundaryCase(CaseKind.FULL_SIDE, which=1)


def first_diff(which, pmf):
    return (exponent_value(which, pmf, H) - exponent_value(which, pmf, -H)) / (2 * H)


def second_diff(which, pmf):
    e = lambda s: exponent_value(which, pmf, s)  # noqa: E731
    return (e(H) - 2 * e(0.0) + e(-H)) / (H * H)


class TestExponent:
    @pytest.mark.parametrize("which", [1, 2, 3])
    def test_zero_at_origin(self, binary_pmf, which):
        assert abs(exponent(ExponentFn(which, binary_pmf), 0.0)) <= 1e-12

    @pytest.mark.parametrize("which", [1, 2, 3])
    def test_derivatives_match_stats(self, binary_pmf, stats_nats, which):
        ent = {1: stats_nats.h1_given_2, 2: stats_nats.h2_given_1, 3: stats_nats.h12}[which]
        assert first_diff(which, binary_pmf) == pytest.approx(ent, abs=1e-5)
        assert second_diff(which, binary_pmf) == pytest.approx(stats_nats.sigma[which - 1, which - 1], abs=1e-3)

    def test_e3_at_one_closed_form(self, binary_pmf):
        # (1+1) log sum sqrt(p)
        ref = 2 * math.log(sum(math.sqrt(x) for x in binary_pmf.p.ravel()))
        assert exponent(ExponentFn(3, binary_pmf), 1.0) == pytest.approx(ref, abs=1e-14)

    def test_e1_at_one_closed_form(self, binary_pmf):
        p = binary_pmf.p
        ref = math.log(sum(sum(math.sqrt(p[i, j]) for i in range(2)) ** 2 for j in range(2)))
        assert exponent(ExponentFn(1, binary_pmf), 1.0) == pytest.approx(ref, abs=1e-14)

    def test_transpose_swaps_e1_e2(self, binary_pmf):
        t = binary_pmf.transpose()
        for s in (0.2, 0.7):
            assert exponent_value(1, binary_pmf, s) == pytest.approx(exponent_value(2, t, s), abs=1e-14)

    def test_zero_cells(self):
        pmf = make_joint_pmf([[0.5, 0.0], [0.2, 0.3]])
        st_ = compute_stats(pmf)
        assert first_diff(3, pmf) == pytest.approx(st_.h12, abs=1e-5)

    @pytest.mark.parametrize("s", [-0.01, 1.01, math.nan])
    def test_range(self, binary_pmf, s):
        with pytest.raises(OutOfRange):
            exponent(ExponentFn(1, binary_pmf), s)

    def test_bad_index(self, binary_pmf):
        with pytest.raises(OutOfRange):
            ExponentFn(4, binary_pmf)

    def test_random_pmf_derivatives(self):
        rng = np.random.default_rng(3)
        for k in range(20):
            pmf = random_pmf(rng, 2 + k % 2, 2 + (k // 2) % 2)
            st_ = compute_stats(pmf)
            for which, ent in ((1, st_.h1_given_2), (2, st_.h2_given_1), (3, st_.h12)):
                assert first_diff(which, pmf) == pytest.approx(ent, abs=1e-5)
                assert second_diff(which, pmf) == pytest.approx(st_.sigma[which - 1, which - 1], abs=1e-3)


class TestKoshelev:
    def test_huge_rates(self, binary_pmf):
        d = koshelev_details(binary_pmf, 100.0, 100.0, 10)
        assert d.value <= 3 * math.exp(-10 * 90)
        assert all(t.s == 1.0 for t in d.terms)

    def test_zero_rates(self, binary_pmf):
        d = koshelev_details(binary_pmf, 0.0, 0.0, 50)
        assert all(t.s == 0.0 and t.exponent == 0.0 for t in d.terms)
        assert d.unclamped == 3.0
        assert d.value == 1.0 and d.clamped

    def test_large_n_matches_tail_form(self, binary_pmf, stats_nats):
        n = 1e4
        L = LN2  # one bit in each coordinate
        a1, a2 = resolve_anchor(stats_nats, "corner1")
        val = koshelev_bound(binary_pmf, a1 + L / math.sqrt(n), a2 + L / math.sqrt(n), n)
        tail = gaussian_tail_bound(stats_nats, CORNER1, SecondOrderPoint(L, L))
        assert abs(val - tail) <= 0.1 * tail
        # frozen from the golden-section optimum
        assert val == pytest.approx(0.39808, abs=5e-5)

    def test_terms_are_exponentials(self, binary_pmf):
        for t in koshelev_terms(binary_pmf, 0.7, 0.8, 30):
            assert t.value == pytest.approx(math.exp(-30 * t.exponent), rel=1e-15)
            assert 0.0 <= t.s <= 1.0

    def test_optimum_is_stationary(self, binary_pmf, stats_nats):
        # at an interior optimum the slope of E equals the rate
        t3 = koshelev_terms(binary_pmf, 0.4, 0.9, 10)[2]
        assert 0.0 < t3.s < 1.0
        slope = (exponent_value(3, binary_pmf, t3.s + 1e-5) - exponent_value(3, binary_pmf, t3.s - 1e-5)) / 2e-5
        assert slope == pytest.approx(1.3, abs=1e-5)

    def test_invalid(self, binary_pmf):
        with pytest.raises(OutOfRange):
            koshelev_bound(binary_pmf, 1.0, 1.0, 0.5)
        with pytest.raises(OutOfRange):
            koshelev_bound(binary_pmf, math.inf, 1.0, 10)

    def test_dominates_constrained_variant(self, binary_pmf):
        for R1, R2, n in [(0.6, 0.7, 50), (0.9, 0.5, 200), (0.57, 0.66, 1000), (1.0, 1.0, 20)]:
            free = koshelev_details(binary_pmf, R1, R2, n).unclamped
            tied = koshelev_constrained(binary_pmf.p, R1, R2, n)
            assert free <= tied * (1 + 1e-9)

    def test_strict_gain_over_constrained(self, binary_pmf):
        # a single shared parameter cannot sit at all three optima at once
        free = koshelev_details(binary_pmf, 0.9, 0.5, 200).unclamped
        tied = koshelev_constrained(binary_pmf.p, 0.9, 0.5, 200)
        assert free < tied


class TestTailForm:
    def test_side_at_zero(self, stats_bits):
        assert gaussian_tail_bound(stats_bits, SIDE1, SecondOrderPoint(0.0, -5.0)) == 1.0

    def test_noncorner_unit_sigma(self, stats_bits):
        sd = math.sqrt(stats_bits.sigma[2, 2])
        assert gaussian_tail_bound(stats_bits, NONCORNER, SecondOrderPoint(sd, 0.0)) == pytest.approx(
            math.exp(-0.5), abs=1e-15
        )

    def test_corner_value_in_bits(self, stats_bits):
        # exp(-1/(2*0.475)) + exp(-4/(2*0.690)) with the rounded entries
        assert gaussian_tail_bound(stats_bits, CORNER1, SecondOrderPoint(1.0, 1.0)) == pytest.approx(0.4040, abs=1e-3)

    def test_corner2_uses_second_variance(self, stats_bits):
        case = BoundaryCase(CaseKind.CORNER, which=2)
        s = stats_bits.sigma
        got = gaussian_tail_bound(stats_bits, case, SecondOrderPoint(0.5, 1.0))
        assert got == pytest.approx(math.exp(-1 / (2 * s[1, 1])) + math.exp(-2.25 / (2 * s[2, 2])), abs=1e-15)

    def test_double_corner_has_three_terms(self):
        s = compute_stats(make_joint_pmf(np.outer([0.3, 0.7], [0.6, 0.4])))
        case = classify(s, RegionQuery(s.h1, s.h2, 0.1))
        got = gaussian_tail_bound(s, case, SecondOrderPoint(0.0, 0.0))
        assert got == 3.0

    def test_sign_constraints(self, stats_bits):
        with pytest.raises(SignConstraintViolated):
            gaussian_tail_bound(stats_bits, CORNER1, SecondOrderPoint(-0.1, 1.0))
        with pytest.raises(SignConstraintViolated):
            gaussian_tail_bound(stats_bits, NONCORNER, SecondOrderPoint(1.0, -1.5))
        # only L1 matters on side 1
        gaussian_tail_bound(stats_bits, SIDE1, SecondOrderPoint(0.5, -9.0))

    def test_interior_rejected(self, stats_bits):
        with pytest.raises(UnsupportedCase):
            gaussian_tail_bound(stats_bits, BoundaryCase(CaseKind.INTERIOR), SecondOrderPoint(0, 0))


class TestComparison:
    def test_corner_grid_second_order_wins(self, stats_bits):
        rows = comparison_table(stats_bits, CORNER1, rect_grid([0.5, 1.0, 1.5], [0.5, 1.0, 1.5]))
        assert len(rows) == 9
        assert (rows[4].L1, rows[4].L2) == (1.0, 1.0)
        for r in rows:
            assert r.err_second_order < r.err_koshelev

    def test_noncorner_at_zero(self, stats_bits):
        (row,) = comparison_table(stats_bits, NONCORNER, sum_line([0.0]))
        assert row.err_second_order == 0.5
        assert row.err_koshelev == 1.0

    def test_side_diagonal_decreasing(self, stats_bits):
        rows = comparison_table(stats_bits, SIDE1, diagonal(np.linspace(0, 2, 9)))
        errs = [r.err_second_order for r in rows]
        assert all(a > b for a, b in zip(errs, errs[1:]))

    def test_nan_where_constraint_fails(self, stats_bits):
        (row,) = comparison_table(stats_bits, CORNER1, [(-1.0, 3.0)])
        assert math.isnan(row.err_koshelev)
        assert 0 < row.err_second_order < 1

    def test_grid_helpers(self):
        assert rect_grid([1, 2], [3, 4]) == [(1.0, 3.0), (1.0, 4.0), (2.0, 3.0), (2.0, 4.0)]
        assert sum_line([2.0]) == [(1.0, 1.0)]
        assert diagonal([0.5]) == [(0.5, 0.5)]


class TestProperties:
    @settings(max_examples=1000, deadline=None)
    @given(pmfs(), st.sampled_from([1, 2, 3]))
    def test_exponent_convex(self, pmf, which):
        grid = np.linspace(0, 1, 21)
        vals = np.array([exponent_value(which, pmf, float(s)) for s in grid])
        assert np.all(vals[:-2] - 2 * vals[1:-1] + vals[2:] >= -1e-9)
        assert abs(vals[0]) <= 1e-12

    @settings(max_examples=200, deadline=None)
    @given(pmfs(max_rows=2, max_cols=3), st.floats(0, 2), st.floats(0, 2), st.floats(0, 0.5), st.integers(1, 500))
    def test_monotone_in_rates(self, pmf, R1, R2, dR, n):
        base = koshelev_details(pmf, R1, R2, n).unclamped
        assert koshelev_details(pmf, R1 + dR, R2, n).unclamped <= base * (1 + 1e-9)
        assert koshelev_details(pmf, R1, R2 + dR, n).unclamped <= base * (1 + 1e-9)

    @settings(max_examples=200, deadline=None)
    @given(pmfs(max_rows=2, max_cols=3), st.floats(0.01, 0.5), st.integers(1, 500), st.integers(1, 500))
    def test_monotone_in_n_inside(self, pmf, margin, n, dn):
        s = compute_stats(pmf)
        R1, R2 = s.h1 + margin, s.h2 + margin
        assert koshelev_bound(pmf, R1, R2, n + dn) <= koshelev_bound(pmf, R1, R2, n) * (1 + 1e-9)

    @settings(max_examples=100, deadline=None)
    @given(pmfs(max_rows=2, max_cols=3), st.floats(0, 1.5), st.floats(0, 1.5), st.integers(1, 300))
    def test_dominance(self, pmf, R1, R2, n):
        free = koshelev_details(pmf, R1, R2, n).unclamped
        assert free <= koshelev_constrained(pmf.p, R1, R2, n, grid=201) * (1 + 1e-9)
