import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LN2, random_pmf
from oracles import fn_by_sequences
from swsecond.errors import BudgetExceeded, OutOfRange
from swsecond.gaussian import marginal, phi2
from swsecond.region import RegionQuery, SecondOrderPoint, resolve_anchor
from swsecond.source_model import compute_stats, make_joint_pmf
from swsecond.spectrum import (
    exact_event_probability,
    exact_Fn,
    fn_thresholds,
    lemma1_upper,
    lemma2_lower,
    mc_Fn,
    convergence_report,
    sample_pairs,
    spectrum_triples,
    type_classes,
)

INF = math.inf
# exact type sums, reference source at the first corner, one bit in each coordinate
CORNER_EXACT = {100: 0.0856227339, 400: 0.0822054855, 1600: 0.0791878881}


@pytest.fixture(scope="module")
def corner_q(stats_nats):
    a1, a2 = resolve_anchor(stats_nats, "corner1")
    return RegionQuery(a1, a2, 0.1)


@pytest.fixture(scope="module")
def uniform():
    return make_joint_pmf(np.full((2, 2), 0.25))


class TestExact:
    def test_sentinels(self, binary_pmf, corner_q):
        assert exact_Fn(binary_pmf, 50, corner_q, (INF, INF)) == 0.0
        assert exact_Fn(binary_pmf, 50, corner_q, (-INF, -INF)) == 1.0
        assert exact_Fn(binary_pmf, 50, corner_q, (-INF, INF)) == 1.0

    @pytest.mark.parametrize("n", [1, 3, 6])
    def test_matches_sequence_enumeration(self, binary_pmf, corner_q, n):
        for L1, L2 in [(0.0, 0.0), (0.3, -0.2), (LN2, LN2), (-0.5, 1.0)]:
            ref = fn_by_sequences(binary_pmf.p, n, corner_q.a1, corner_q.a2, L1, L2)
            assert exact_Fn(binary_pmf, n, corner_q, (L1, L2)) == pytest.approx(ref, abs=1e-13)

    def test_matches_sequence_enumeration_3x2(self):
        pmf = make_joint_pmf([[0.3, 0.1], [0.05, 0.25], [0.2, 0.1]])
        s = compute_stats(pmf)
        q = RegionQuery(s.h1_given_2, s.h2, 0.1)
        ref = fn_by_sequences(pmf.p, 4, q.a1, q.a2, 0.2, 0.1)
        assert exact_Fn(pmf, 4, q, (0.2, 0.1)) == pytest.approx(ref, abs=1e-13)

    def test_zero_cells(self):
        pmf = make_joint_pmf([[0.5, 0.0], [0.2, 0.3]])
        s = compute_stats(pmf)
        q = RegionQuery(s.h1_given_2, s.h2_given_1 + 0.1, 0.1)
        ref = fn_by_sequences(pmf.p, 5, q.a1, q.a2, 0.1, -0.1)
        assert exact_Fn(pmf, 5, q, (0.1, -0.1)) == pytest.approx(ref, abs=1e-13)

    @pytest.mark.parametrize("n", [100, 400])
    def test_frozen_corner_values(self, binary_pmf, corner_q, n):
        assert exact_Fn(binary_pmf, n, corner_q, (LN2, LN2)) == pytest.approx(CORNER_EXACT[n], abs=1e-10)

    def test_n400_against_limit_and_mc(self, binary_pmf, corner_q, stats_nats):
        ex = exact_Fn(binary_pmf, 400, corner_q, (LN2, LN2))
        limit = 1 - phi2(LN2, 2 * LN2, marginal(stats_nats.sigma, (1, 3)))
        assert abs(ex - limit) <= 0.05
        est, se = mc_Fn(binary_pmf, 400, corner_q, (LN2, LN2), samples=20000, seed=1)
        # 99% interval
        assert abs(est - ex) <= 2.576 * se

    def test_independent_uniform_is_degenerate(self, uniform):
        q = RegionQuery(LN2, LN2, 0.1)
        assert exact_Fn(uniform, 30, q, (0.1, 0.1)) == 0.0
        assert exact_Fn(uniform, 30, q, (-0.1, 5.0)) == pytest.approx(1.0, abs=1e-12)
        # the spectrum sits exactly on a zero threshold
        assert exact_Fn(uniform, 30, q, (0.0, 5.0)) == pytest.approx(1.0, abs=1e-12)

    def test_thresholds(self, corner_q):
        t = fn_thresholds(4, corner_q, SecondOrderPoint(1.0, 2.0))
        assert t == pytest.approx((4 * corner_q.a1 + 2, 4 * corner_q.a2 + 4, 4 * (corner_q.a1 + corner_q.a2) + 6))

    def test_type_classes_sum_to_one(self, binary_pmf):
        tc = type_classes(binary_pmf, 7)
        assert len(tc) == math.comb(10, 3)
        assert math.fsum(math.exp(t.log_prob) for t in tc) == pytest.approx(1.0, abs=1e-14)
        assert all(sum(t.counts) == 7 and t.log_prob <= 0 for t in tc)

    def test_budget_alphabet(self):
        pmf = make_joint_pmf(np.full((4, 4), 1 / 16))
        with pytest.raises(BudgetExceeded):
            exact_event_probability(pmf, 10**6, (1.0, 1.0, 1.0))
        with pytest.raises(BudgetExceeded):
            exact_event_probability(pmf, 10, (1.0, 1.0, 1.0))

    def test_budget_blocklength(self, binary_pmf):
        with pytest.raises(BudgetExceeded):
            exact_event_probability(binary_pmf, 2001, (1.0, 1.0, 1.0))

    def test_budget_type_count(self):
        pmf = make_joint_pmf(np.full((2, 4), 1 / 8))
        with pytest.raises(BudgetExceeded):
            exact_event_probability(pmf, 2000, (1.0, 1.0, 1.0))

    def test_blocklength_positive(self, binary_pmf):
        with pytest.raises(OutOfRange):
            exact_event_probability(binary_pmf, 0, (1.0, 1.0, 1.0))


class TestMonteCarlo:
    def test_reproducible(self, binary_pmf, corner_q):
        a = mc_Fn(binary_pmf, 50, corner_q, (0.2, 0.2), samples=3000, seed=9)
        b = mc_Fn(binary_pmf, 50, corner_q, (0.2, 0.2), samples=3000, seed=9)
        assert a == b

    def test_chunk_size_keeps_estimate_consistent(self, binary_pmf, corner_q):
        a = mc_Fn(binary_pmf, 20, corner_q, (0.2, 0.2), samples=1000, seed=2, chunk=1000)
        b = mc_Fn(binary_pmf, 20, corner_q, (0.2, 0.2), samples=1000, seed=2, chunk=100)
        assert abs(a[0] - b[0]) <= 5 * a[1] + 1e-12

    def test_single_sample(self, binary_pmf, corner_q):
        est, _ = mc_Fn(binary_pmf, 10, corner_q, (0.0, 0.0), samples=1, seed=5)
        assert est in (0.0, 1.0)

    def test_samples_positive(self, binary_pmf, corner_q):
        with pytest.raises(OutOfRange):
            mc_Fn(binary_pmf, 10, corner_q, (0.0, 0.0), samples=0, seed=5)

    def test_single_letter_expectation(self, binary_pmf, corner_q):
        exact = exact_Fn(binary_pmf, 1, corner_q, (0.1, -0.2))
        est, se = mc_Fn(binary_pmf, 1, corner_q, (0.1, -0.2), samples=40000, seed=3)
        assert abs(est - exact) <= 4 * se
        assert exact == pytest.approx(fn_by_sequences(binary_pmf.p, 1, corner_q.a1, corner_q.a2, 0.1, -0.2), abs=1e-15)

    def test_concentration_over_seeds(self, binary_pmf, corner_q):
        exact = CORNER_EXACT[100]
        inside = 0
        for seed in range(50):
            est, se = mc_Fn(binary_pmf, 100, corner_q, (LN2, LN2), samples=2000, seed=seed)
            inside += abs(est - exact) <= 3 * se
        assert inside >= 47

    def test_triples_are_consistent(self, binary_pmf, corner_q):
        rng = np.random.default_rng(4)
        x1, x2 = sample_pairs(binary_pmf, 12, 200, rng)
        tr = spectrum_triples(binary_pmf, corner_q, x1, x2)
        # joint information = conditional of X1 given X2 plus marginal of X2
        h2 = -np.log(binary_pmf.marginal2)[x2].sum(axis=1)
        lhs = tr.u3 * math.sqrt(12) + 12 * (corner_q.a1 + corner_q.a2)
        rhs = tr.u1 * math.sqrt(12) + 12 * corner_q.a1 + h2
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)
        v = tr.violates(SecondOrderPoint(0.0, 0.0))
        assert v.shape == (200,)


class TestThresholdBounds:
    def test_upper_huge_sizes(self, binary_pmf):
        n = 8
        big = math.exp(n * 2.4 + n**0.25 * 0.5 + 1)
        b = lemma1_upper(binary_pmf, n, big, big)
        assert b.event_probability == 0.0
        # 3z alone exceeds 1 at this blocklength
        assert b.unclamped == pytest.approx(3 * math.exp(-(n**0.25) * 0.5), rel=1e-15)
        assert b.clamped

    def test_upper_unit_sizes(self, binary_pmf):
        b = lemma1_upper(binary_pmf, 8, 1, 1)
        assert b.unclamped >= 1.0 and b.value == 1.0 and b.clamped

    def test_lower_huge_sizes(self, binary_pmf):
        b = lemma2_lower(binary_pmf, 8, 1e30, 1e30)
        assert b.value == 0.0

    def test_lower_unit_sizes(self, binary_pmf):
        b = lemma2_lower(binary_pmf, 100, 1, 1)
        assert b.value >= 0.97

    def test_sandwich_configuration(self, binary_pmf):
        up = lemma1_upper(binary_pmf, 8, 2**7, 2**7)
        lo = lemma2_lower(binary_pmf, 8, 2**7, 2**7)
        # both bounds are vacuous at this blocklength
        assert up.value == 1.0 and up.unclamped == pytest.approx(2.2588, abs=1e-4)
        assert lo.value == 0.0 and lo.unclamped < 0

    def test_gamma_positive(self, binary_pmf):
        with pytest.raises(OutOfRange):
            lemma1_upper(binary_pmf, 8, 2, 2, gamma=0.0)
        with pytest.raises(OutOfRange):
            lemma2_lower(binary_pmf, 8, 0, 2)

    def test_upper_decays_inside_region(self, binary_pmf, stats_nats):
        R1, R2 = stats_nats.h1 + 0.15, stats_nats.h2 + 0.15
        # integer sizes keep exp(n R) representable
        sizes = lambda n: (2 ** math.ceil(n * R1 / LN2), 2 ** math.ceil(n * R2 / LN2))  # noqa: E731
        vals = [lemma1_upper(binary_pmf, n, *sizes(n)).value for n in (50, 200, 800, 2000)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 0.15

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 40), st.floats(0.0, 1.5), st.floats(0.0, 1.5), st.floats(0.05, 2.0))
    def test_lower_below_upper(self, n, r1, r2, gamma):
        from swsecond.source_model import binary_example_pmf

        pmf = binary_example_pmf()
        M1, M2 = math.exp(n * r1), math.exp(n * r2)
        assert lemma2_lower(pmf, n, M1, M2, gamma).unclamped <= lemma1_upper(pmf, n, M1, M2, gamma).unclamped


class TestConvergence:
    def test_corner_report(self, binary_pmf, corner_q):
        rows = convergence_report(binary_pmf, corner_q, SecondOrderPoint(LN2, LN2), [1600, 100, 400])
        assert [r.n for r in rows] == [100, 400, 1600]
        assert [r.exact for r in rows] == pytest.approx([CORNER_EXACT[n] for n in (100, 400, 1600)], abs=1e-10)
        gaps = [r.gap for r in rows]
        assert gaps[0] > gaps[1] > gaps[2]
        assert rows[-1].gap < 0.05
        scaled = [g * math.sqrt(r.n) for g, r in zip(gaps, rows)]
        assert max(scaled) < 2 * min(scaled)

    def test_noncorner_median(self):
        # strongly correlated pair, so the side slacks grow fast enough with n
        pmf = make_joint_pmf([[0.45, 0.15], [0.05, 0.35]])
        s = compute_stats(pmf)
        a1, a2 = resolve_anchor(s, "caseII:0.5")
        rows = convergence_report(pmf, RegionQuery(a1, a2, 0.5), SecondOrderPoint(0.0, 0.0), [100, 400, 1600])
        assert all(r.gaussian == 0.5 for r in rows)
        assert rows[0].gap > rows[1].gap > rows[2].gap
        assert rows[-1].exact == pytest.approx(0.49691765205, abs=1e-9)

    def test_binary_noncorner_is_slow(self, binary_pmf, stats_nats):
        # the mutual information is 0.0018 nats, so n = 1600 is far from the limit
        a1, a2 = resolve_anchor(stats_nats, "caseII:0.5")
        (row,) = convergence_report(binary_pmf, RegionQuery(a1, a2, 0.5), SecondOrderPoint(0.0, 0.0), [400])
        assert row.exact > 0.6


class TestProperties:
    @settings(max_examples=1000, deadline=None)
    @given(st.integers(1, 25), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_and_union_bounds(self, binary_pmf, corner_q, n, L1, L2, d1, d2):
        base = exact_Fn(binary_pmf, n, corner_q, (L1, L2))
        assert exact_Fn(binary_pmf, n, corner_q, (L1 + d1, L2 + d2)) <= base + 1e-14
        t = fn_thresholds(n, corner_q, SecondOrderPoint(L1, L2))
        singles = [exact_event_probability(binary_pmf, n, [t[i] if j == i else INF for j in range(3)]) for i in range(3)]
        assert max(singles) <= base + 1e-14
        assert base <= math.fsum(singles) + 1e-14

    def test_mc_agrees_with_exact(self):
        # each case has a 0.27% chance of a 3-sigma miss; allow the binomial slack
        zs = []
        samples = 600

        @settings(max_examples=1000, deadline=None, database=None, derandomize=True)
        @given(st.integers(0, 2**32 - 1), st.integers(2, 20), st.floats(-1, 1), st.floats(-1, 1))
        def case(seed, n, L1, L2):
            rng = np.random.default_rng(seed)
            pmf = random_pmf(rng, 2, int(rng.integers(2, 4)), floor=0.05)
            s = compute_stats(pmf)
            q = RegionQuery(s.h1_given_2, s.h2, 0.1)
            p = exact_Fn(pmf, n, q, (L1, L2))
            est, _ = mc_Fn(pmf, n, q, (L1, L2), samples=samples, seed=seed)
            sd = math.sqrt(p * (1 - p) / samples)
            if sd == 0:
                assert est == p
                zs.append(0.0)
            else:
                zs.append((est - p) / sd)
                assert abs(est - p) <= 10 * sd + 1 / samples

        case()
        zs = np.array(zs)
        assert len(zs) >= 1000
        assert np.mean(np.abs(zs) <= 3) >= 0.99
