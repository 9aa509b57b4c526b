import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrlab.correlations import (
    QuadratureGrid,
    completed_correlation,
    correlation_report,
    iid_control,
    k_j_sum,
    kj_target,
    m_partition_restricted,
    moment_dual,
    moment_m,
    partition_moments,
    poissonian_target,
    rm_correlation,
    s_counting,
)
from corrlab.partitions import Partition, enumerate_partitions
from corrlab.seqcore import SequenceSpec
from corrlab.testfn import build_corr_kernel, f_moment, kcut_for_tolerance, make_bspline, make_bump

SQRT = SequenceSpec(1.0, 0.5)


def torus_dist(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def brute_rm(x, f, m, N):
    """Direct sum over ordered distinct m-tuples."""
    total = 0.0
    for tup in itertools.permutations(range(N), m):
        w = 1.0
        for i in range(m - 1):
            w *= f.f(N * torus_dist(x[tup[i]], x[tup[i + 1]]))
            if w == 0.0:
                break
        total += w
    return total / N


@pytest.fixture(scope="module")
def spline():
    return make_bspline(1.0)


class TestRmCorrelation:
    def test_lattice_pairs(self):
        """On the lattice n/N each point has two neighbours at every distance j."""
        f = make_bspline(3.5)
        N = 200
        y = np.arange(1, N + 1) / N
        expected = 2 * sum(f.f(j) for j in range(1, 4))
        assert rm_correlation(y, f, 2, N) == pytest.approx(expected, abs=1e-13)

    def test_lattice_zero_when_out_of_reach(self, spline):
        N = 50
        assert rm_correlation(np.arange(1, N + 1) / N, spline, 3, N) == 0.0

    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_against_brute_force(self, m):
        f = make_bspline(2.5)
        N = 24
        rng = np.random.default_rng(m)
        y = rng.random(N) * 5
        x = y % 1.0
        assert rm_correlation(y, f, m, N) == pytest.approx(brute_rm(x, f, m, N), rel=1e-12, abs=1e-14)

    def test_collisions_count_by_index(self):
        """Equal values at distinct indices still form tuples."""
        f = make_bspline(1.0)
        y = np.array([0.25, 0.25, 0.75, 0.5])
        assert rm_correlation(y, f, 2, 4) == pytest.approx(2 * f.f(0.0) / 4)

    def test_kernel_matches_product_for_m2(self, spline):
        """With m = 2 the kernel path and the 1-D path agree up to F versus f."""
        N = 500
        F = build_corr_kernel(spline, 2)
        y = np.random.default_rng(3).random(N)
        via_kernel = rm_correlation(y, F, 2, N)
        x = y % 1.0
        brute = 0.0
        for a in range(N):
            for b in range(N):
                if a != b:
                    d = N * torus_dist(x[a], x[b])
                    if d < 2:
                        brute += F([d])
        assert via_kernel == pytest.approx(brute / N, rel=1e-12)

    def test_workers_bit_identical(self, spline):
        a = rm_correlation(SQRT, spline, 3, 20000, workers=1)
        b = rm_correlation(SQRT, spline, 3, 20000, workers=3)
        assert a == b

    def test_support_guard(self):
        with pytest.raises(ValueError):
            rm_correlation(SQRT, make_bspline(10.0), 2, 15)

    def test_iid_control(self, spline):
        """iid uniform points, m = 2, N = 1e5: within 3 standard errors of E(f)."""
        ctl = iid_control(spline, 2, 100_000, replicates=8, seed=11)
        assert ctl["z"] < 3.0

    def test_report(self, spline):
        rep = correlation_report(SQRT, spline, 2, 1000)
        assert rep.abs_deviation == abs(rep.value - rep.target)
        assert rep.target == pytest.approx(0.75)


class TestCounting:
    def test_nonnegative(self, spline):
        s = np.linspace(0, 1, 257)
        assert np.all(s_counting(SQRT, spline, 37, s) >= 0)

    def test_first_moment(self, spline):
        M = 4096
        vals = s_counting(SQRT, spline, 25, np.arange(M) / M)
        assert float(vals.mean()) == pytest.approx(0.75, abs=1e-10)

    def test_single_point(self):
        f = make_bspline(1.5)
        s = 0.3
        direct = f.f(0.3) + f.f(-0.7) + f.f(1.3)
        assert s_counting(np.array([0.0]), f, 1, s) == pytest.approx(direct, abs=1e-15)


class TestMoments:
    def test_first_moment_exact(self, spline):
        for seq in (SQRT, SequenceSpec(2.3, 0.71)):
            assert moment_m(seq, spline, 1, 300) == pytest.approx(0.75, abs=1e-10)

    def test_first_moment_bump(self):
        f = make_bump(1.0)
        assert moment_m(SQRT, f, 1, 300) == pytest.approx(f_moment(f, 1), abs=1e-10)

    def test_third_moment_is_completed_sum(self, spline):
        assert moment_m(SQRT, spline, 3, 100) == pytest.approx(
            completed_correlation(SQRT, spline, 3, 100), abs=1e-6
        )

    def test_completed_two_points(self, spline):
        """m = 2, N = 2: four ordered pairs, each summed over integer shifts."""
        y = np.array([0.1, 0.35])
        F = build_corr_kernel(spline, 2)
        total = 0.0
        for a in y:
            for b in y:
                for k in range(-3, 4):
                    total += F([2 * (a - b + k)])
        assert completed_correlation(y, spline, 2, 2) == pytest.approx(total / 2, abs=1e-14)

    def test_grid_power_of_two(self):
        with pytest.raises(ValueError):
            QuadratureGrid(1000)
        assert QuadratureGrid(1024).refine().M == 2048

    def test_fixed_grid_close_to_adaptive(self, spline):
        a = moment_m(SQRT, spline, 2, 50, grid=QuadratureGrid(1 << 14))
        b = moment_m(SQRT, spline, 2, 50)
        assert a == pytest.approx(b, abs=1e-9)


class TestDual:
    def test_dual_equals_moment(self, spline):
        N, m = 50, 2
        K = kcut_for_tolerance(spline, N, 1e-12)
        res = moment_dual(SQRT, spline, m, N, K, info=True)
        assert res.value == pytest.approx(moment_m(SQRT, spline, m, N), abs=1e-8)
        assert res.tail_bound < 1e-8

    def test_dual_m3(self, spline):
        N = 40
        K = kcut_for_tolerance(spline, N, 1e-12)
        assert moment_dual(SQRT, spline, 3, N, K) == pytest.approx(moment_m(SQRT, spline, 3, N), abs=1e-7)

    def test_zero_frequency_term(self, spline):
        assert k_j_sum(SQRT, spline, 3, 0, 50, 10) == pytest.approx(0.75**3, abs=1e-15)

    def test_j_one_rejected(self, spline):
        with pytest.raises(ValueError):
            k_j_sum(SQRT, spline, 3, 1, 50, 10)

    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_decomposition(self, spline, m):
        N = 30
        K = kcut_for_tolerance(spline, N, 1e-12)
        parts = [k_j_sum(SQRT, spline, m, j, N, K) for j in [0] + list(range(2, m + 1))]
        assert sum(parts) == pytest.approx(moment_dual(SQRT, spline, m, N, K), abs=1e-12)

    def test_pair_orthogonality(self, spline):
        """m = 2 dual sum is sum_k |a(k)|^2 / N^2."""
        from corrlab.correlations import fourier_coefficients

        N, K = 20, 60
        a = fourier_coefficients(SQRT, spline, N, K)
        ref = (abs(a[0]) ** 2 + 2 * np.sum(np.abs(a[1:]) ** 2)) / N**2
        assert moment_dual(SQRT, spline, 2, N, K) == pytest.approx(ref, rel=1e-13)

    def test_kj_trend(self, spline):
        """K_3 approaches its limit as N grows (m = 3, theta = 0.3)."""
        seq = SequenceSpec(1.0, 0.3)
        errs = []
        for N in (100, 300, 1000):
            K = kcut_for_tolerance(spline, N, 1e-6)
            errs.append(abs(k_j_sum(seq, spline, 3, 3, N, K) - kj_target(spline, 3, 3)))
        assert errs[0] > errs[1] > errs[2]


class TestPartitionMoments:
    def test_sum_over_partitions(self, spline):
        grid = QuadratureGrid(1 << 14)
        res = partition_moments(SQRT, spline, 3, 50, grid)
        assert sum(res["parts"].values()) == pytest.approx(res["moment"], abs=1e-8)

    def test_restricted_matches_tabulated(self, spline):
        grid = QuadratureGrid(1 << 13)
        p = Partition.of([1, 2], [3])
        res = partition_moments(SQRT, spline, 3, 40, grid)
        assert m_partition_restricted(SQRT, spline, 3, 40, p, grid=grid) == pytest.approx(
            res["parts"][p], abs=1e-14
        )

    def test_impossible_pattern(self, spline):
        """One point cannot fill two distinct indices."""
        val = m_partition_restricted(np.array([0.3]), spline, 2, 1, Partition.of([1], [2]))
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_brute_force_restricted(self):
        """M_P on a grid against explicit enumeration of P-distinct vectors."""
        f = make_bspline(1.0)
        N, M = 5, 256
        y = np.array([0.1, 0.13, 0.5, 0.52, 0.9])
        s = np.arange(M) / M
        g = np.array([[sum(f.f(N * (yy + k + ss)) for k in range(-2, 3)) for ss in s] for yy in y])
        p = Partition.of([1, 3], [2])
        brute = np.zeros(M)
        for n in itertools.product(range(N), repeat=3):
            if n[0] == n[2] and n[0] != n[1]:
                brute += g[n[0]] * g[n[1]] * g[n[2]]
        val = m_partition_restricted(y, f, 3, N, p, grid=QuadratureGrid(M))
        assert val == pytest.approx(brute.mean(), abs=1e-13)

    def test_diagonal_pair_trend(self, spline):
        p = Partition.of([1, 2])
        vals = [m_partition_restricted(SQRT, spline, 2, N, p) for N in (20, 200)]
        target = f_moment(spline, 2)
        assert abs(vals[1] - target) <= abs(vals[0] - target) + 1e-12


class TestTargets:
    def test_unit_moments(self):
        assert poissonian_target(lambda j: 1.0, 3) == 5

    def test_triple_formula(self, spline):
        e1, e2, e3 = (f_moment(spline, j) for j in (1, 2, 3))
        assert poissonian_target(spline, 3) == pytest.approx(e1**3 + 3 * e1 * e2 + e3, rel=1e-14)

    def test_pair_formula(self, spline):
        assert poissonian_target(spline, 2) == pytest.approx(
            f_moment(spline, 1) ** 2 + f_moment(spline, 2), rel=1e-14
        )

    @given(st.integers(1, 7), st.floats(0.1, 2.0))
    @settings(max_examples=30, deadline=None)
    def test_geometric_moments(self, m, c):
        """With E(f^j) = c^j every partition contributes c^m."""
        assert poissonian_target(lambda j: c**j, m) == pytest.approx(
            len(enumerate_partitions(m)) * c**m, rel=1e-12
        )
