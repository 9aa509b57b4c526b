import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrlab.bprocess import derive_constants
from corrlab.oscillatory import (
    PhaseSpec,
    WindowLabels,
    falling_factorial,
    h_sum_holder_check,
    holder_slope,
    i_hr_bound,
    inv_norm_bound,
    is_diagonal,
    loglog_slope,
    offdiag_err_estimate,
    oscillatory_integral,
    phase_eval,
    phase_zeros,
    predicted_exponent,
    spectral_norm,
    total_variation,
    van_lower_bound,
    vandermonde_inverse,
    vandermonde_matrix,
)
from corrlab.testfn import make_bump


def single(s_theta=0.5, r=1, h=2, c=-1.0, sigma=1):
    return PhaseSpec(s_theta, c, (sigma,), (r,), (h,))


@pytest.fixture(scope="module")
def sampled_terms():
    """One draw per stratum at m = 3, theta = 0.05, N = 1e3 with |I| by quadrature."""
    return offdiag_err_estimate(3, 0.05, 1000, f=make_bump(1.0), samples_per_block=1, measure_samples=1)


class TestPhaseEval:
    def test_single_term(self):
        ps = single()
        for s in (0.0, 0.3, 0.9):
            assert phase_eval(ps, s) == pytest.approx(-((2 - s) ** 2), abs=1e-14)
            assert phase_eval(ps, s, 1) == pytest.approx(2 * (2 - s), abs=1e-14)
            assert phase_eval(ps, s, 2) == pytest.approx(-2.0, abs=1e-14)

    def test_diagonal_is_zero(self):
        ps = PhaseSpec(0.3, -1.0, (1, -1), (3, 3), (5, 5))
        for j in range(4):
            assert np.all(phase_eval(ps, np.linspace(0, 1, 11), j) == 0.0)

    def test_rejects_small_h(self):
        with pytest.raises(ValueError):
            phase_eval(single(h=1), 1.0)

    def test_falling_factorial(self):
        assert falling_factorial(2.5, 3) == pytest.approx(2.5 * 1.5 * 0.5)
        assert falling_factorial(2.0, 3) == 0.0

    @given(
        st.floats(0.15, 0.9),
        st.lists(st.tuples(st.sampled_from([-1, 1]), st.integers(1, 5), st.integers(2, 6)), min_size=1, max_size=4),
        st.floats(0.05, 0.95),
    )
    @settings(max_examples=100, deadline=None)
    def test_finite_differences(self, theta, terms, s):
        """Orders 1..4 against central differences of the order below."""
        ps = PhaseSpec(theta, -1.0, *map(tuple, zip(*terms)))
        eps = 1e-5
        for j in range(1, 5):
            fd = (phase_eval(ps, s + eps, j - 1) - phase_eval(ps, s - eps, j - 1)) / (2 * eps)
            exact = phase_eval(ps, s, j)
            scale = max(abs(exact), max(abs(phase_eval(ps, s, j - 1)), 1.0) * 1e-3)
            assert abs(fd - exact) <= 1e-6 * scale


class TestDiagonal:
    def test_pair(self):
        flag = is_diagonal((3, 3), (5, 5), (1, -1))
        assert flag
        assert [list(b) for b in flag.witness.blocks] == [[1, 2]]

    def test_triple(self):
        assert is_diagonal((1, 2, 3), (7, 7, 7), (1, 1, -1))

    def test_not_diagonal(self):
        flag = is_diagonal((3, 2), (5, 5), (1, -1))
        assert not flag
        assert flag.witness is None

    def test_isolated_index(self):
        assert not is_diagonal((3, 3, 1), (5, 5, 6), (1, -1, 1))

    def test_zero_r_rejected(self):
        with pytest.raises(ValueError):
            is_diagonal((0, 1), (2, 2), (1, -1))

    def test_against_numeric_phase(self):
        """10^4 random small instances: the flag matches max |phi| < 1e-10 on a 10^3 grid.

        theta = 0.3 keeps 1/theta off the integers, so distinct-h powers are independent.
        """
        rng = np.random.default_rng(7)
        s = np.linspace(0, 1, 1000, endpoint=False)
        agree = 0
        for _ in range(10_000):
            m = int(rng.integers(2, 5))
            r = tuple(int(x) for x in rng.integers(1, 4, m))
            h = tuple(int(x) for x in rng.integers(2, 5, m))
            sig = tuple(int(x) for x in rng.choice([-1, 1], m))
            numeric = np.max(np.abs(phase_eval(PhaseSpec(0.3, -1.0, sig, r, h), s))) < 1e-10
            agree += bool(is_diagonal(r, h, sig)) == numeric
        assert agree == 10_000

    def test_reduce_drops_cancelled_groups(self):
        red = PhaseSpec(0.3, -1.0, (1, -1, 1), (2, 2, 4), (3, 3, 5)).reduce()
        assert red.h == (5,)
        assert red.rho == (4,)
        assert red.L == 1 and red.l == 1


class TestVandermonde:
    def test_two_by_two(self):
        np.testing.assert_array_equal(vandermonde_matrix([1, 2]), [[1, 2], [1, 4]])
        np.testing.assert_allclose(vandermonde_inverse([1, 2]), [[2, -1], [-0.5, 0.5]], atol=1e-15)

    def test_one_by_one(self):
        np.testing.assert_allclose(vandermonde_inverse([0.4]), [[2.5]])

    def test_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            L = int(rng.integers(1, 6))
            tau = np.sort(rng.uniform(0.2, 1.0, L))
            if L > 1 and np.min(np.diff(tau)) < 0.05:
                tau = np.linspace(0.2, 1.0, L) + rng.uniform(0, 0.02, L)
            inv = vandermonde_inverse(tau)
            V = vandermonde_matrix(tau)
            np.testing.assert_allclose(V @ inv, np.eye(L), atol=1e-9)
            np.testing.assert_allclose(inv, np.linalg.inv(V), atol=1e-9)

    def test_errors(self):
        with pytest.raises(ValueError):
            vandermonde_inverse([1.0, 1.0])
        with pytest.raises(ValueError):
            vandermonde_inverse(np.linspace(0.1, 1, 9))

    def test_spectral_norm(self):
        A = np.random.default_rng(2).standard_normal((5, 5))
        assert spectral_norm(A) == pytest.approx(np.linalg.norm(A, 2), rel=1e-6)
        assert spectral_norm(np.zeros((3, 3))) == 0.0


class TestInvNormBound:
    def test_empirical_constant(self):
        """10^3 random instances, L <= 4: true ||M^-1|| <= 50 * bound."""
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(1000):
            L = int(rng.integers(2, 5))
            h = tuple(int(x) for x in rng.choice(np.arange(2, 40), L, replace=False))
            r = tuple(int(x) for x in rng.integers(1, 6, L))
            sig = tuple(int(x) for x in rng.choice([-1, 1], L))
            ps = PhaseSpec(0.3, -1.0, sig, r, h)
            worst = max(worst, inv_norm_bound(ps, float(rng.uniform(0, 1)))["ratio"])
        assert 0 < worst <= 50

    def test_two_point_separation(self):
        """L = 2 with labels held fixed: the bound scales like |h1 - h2|^-1."""
        q = [5.0, 5.0]
        b1 = inv_norm_bound(PhaseSpec(0.3, -1.0, (1, 1), (1, 1), (10, 20)), 0.0, q)["bound"]
        b2 = inv_norm_bound(PhaseSpec(0.3, -1.0, (1, 1), (1, 1), (10, 30)), 0.0, q)["bound"]
        assert b1 / b2 == pytest.approx(2.0, rel=1e-14)

    def test_difference_product_rescaling(self):
        """Doubling every h - s halves tau_1 - tau_2, quarters tau_1 tau_2 and divides det V by 8."""
        tau = 1 / np.array([3.0, 5.0])
        tau2 = 1 / np.array([6.0, 10.0])
        assert abs(tau2[0] - tau2[1]) == pytest.approx(abs(tau[0] - tau[1]) / 2)
        assert tau2.prod() == pytest.approx(tau.prod() / 4)
        det = np.linalg.det(vandermonde_matrix(tau))
        assert np.linalg.det(vandermonde_matrix(tau2)) == pytest.approx(det / 8)

    def test_needs_two_groups(self):
        with pytest.raises(ValueError):
            inv_norm_bound(single(0.3), 0.2)

    def test_integer_power_singular(self):
        ps = PhaseSpec(0.5, -1.0, (1, 1, 1), (1, 1, 1), (2, 3, 4))
        with pytest.raises(ZeroDivisionError):
            inv_norm_bound(ps, 0.1)


class TestVanLowerBound:
    def test_single_term(self):
        ps = single(0.3, r=2, h=3)
        res = van_lower_bound(ps, 0.4)
        assert res["van"] >= abs(phase_eval(ps, 0.4, 1))
        assert res["van"] >= res["bound"]

    @pytest.mark.parametrize("R,H", [(1, 2), (5, 10), (20, 30)])
    def test_near_cancellation(self, R, H):
        ps = PhaseSpec(0.3, -1.0, (1, 1), (R, -R), (H, H + 1))
        for s in np.linspace(0, 1, 21, endpoint=False):
            res = van_lower_bound(ps, float(s))
            assert res["van"] >= res["bound"] / math.sqrt(2)

    def test_diagonal_rejected(self):
        with pytest.raises(ValueError):
            van_lower_bound(PhaseSpec(0.3, -1.0, (1, -1), (3, 3), (5, 5)), 0.5)


class TestOscillatoryIntegral:
    @pytest.mark.parametrize("lam", [5.0, 40.0, 300.0])
    def test_linear_phase(self, lam):
        def g(s):
            s = np.asarray(s, dtype=np.float64)
            return np.sin(np.pi * s) ** 2

        res = oscillatory_integral(lambda s: lam * np.asarray(s), g, lam, 1)
        assert res["bound"] == pytest.approx(total_variation(g, 0, 1) / lam)
        assert res["ratio"] <= 1.0

    def test_linear_phase_closed_form(self):
        lam = 12.5
        res = oscillatory_integral(lambda s: lam * np.asarray(s), lambda s: np.ones_like(np.asarray(s)), lam, 1)
        exact = (np.exp(2j * np.pi * lam) - 1) / (2j * np.pi * lam)
        assert abs(res["value"] - exact) < 1e-12

    def test_zero_amplitude(self):
        res = oscillatory_integral(single(0.3, h=3), lambda s: np.zeros_like(np.asarray(s)), 1.0, 1)
        assert res["value"] == 0
        assert res["ratio"] == 0.0

    def test_bad_lambda(self):
        with pytest.raises(ValueError):
            oscillatory_integral(single(), lambda s: s, 0.0, 1)

    def test_sampled_family(self):
        """m = 3 phases, lambda the grid minimum of Van_L: empirical ratio <= 10."""
        rng = np.random.default_rng(5)
        c = derive_constants(1.0, 0.3, verify=False).c
        worst = 0.0
        for _ in range(30):
            h = tuple(int(x) for x in rng.integers(2, 6, 3))
            r = tuple(int(x) for x in rng.integers(1, 4, 3))
            sig = tuple(int(x) for x in rng.choice([-1, 1], 3))
            ps = PhaseSpec(0.3, c, sig, r, h)
            red = ps.reduce()
            if red.L == 0:
                continue
            grid = np.linspace(0, 1, 201)
            lam = min(van_lower_bound(red, float(s))["van"] for s in grid)
            res = oscillatory_integral(red, lambda s: 1 + np.asarray(s) / 2, lam, red.L)
            worst = max(worst, res["ratio"])
        assert 0 < worst <= 10

    def test_phase_zeros(self):
        z = phase_zeros(lambda x: np.cos(3 * np.pi * x), 0, 1)
        np.testing.assert_allclose(z, [1 / 6, 1 / 2, 5 / 6], atol=1e-12)


class TestIhrBound:
    def test_zero_weight_at_mu0(self):
        """Labels whose windows miss mu_0 give a zero bound."""
        c = derive_constants(1.0, 0.05, verify=False)
        ps = PhaseSpec(0.05, c.c, (1, 1, -1), (2, 2, 2), (1, 1, 1))
        res = i_hr_bound(ps, WindowLabels((0, 0, 0), (3, 3, 3)), 1000, consts=c, measure=False)
        assert res["weight_mu0"] == 0.0
        assert res["bound"] == 0.0

    def test_zero_amplitude(self):
        """A test function whose transform vanishes on the windows gives I = 0."""
        c = derive_constants(1.0, 0.05, verify=False)

        class Null:
            @staticmethod
            def fhat(xi):
                return np.zeros_like(np.asarray(xi, dtype=np.float64))

        ps = PhaseSpec(0.05, c.c, (1, -1, -1), (1, 1, 52), (1, 1, 1))
        res = i_hr_bound(ps, WindowLabels((0, 0, 0), (3, 3, 7)), 1000, f=Null(), consts=c)
        assert res["bound"] > 0
        assert res["measured"] == 0.0

    def test_diagonal_rejected(self):
        ps = PhaseSpec(0.05, -1.0, (1, 1, -1), (1, 2, 3), (1, 1, 1))
        with pytest.raises(ValueError):
            i_hr_bound(ps, WindowLabels((0, 0, 0), (1, 1, 1)), 1000, measure=False)

    def test_aggregate_within_bound(self, sampled_terms):
        """Summed over the sampled family, quadrature stays below the bound aggregate."""
        assert 0 < sampled_terms.measured_total < sampled_terms.total

    def test_per_term_constant(self, sampled_terms):
        """|I| <= 100 * bound for each sampled off-diagonal term with a nonzero bound.

        Known to fail: the bound reads the windows at mu_0 (s = 0) only, and a
        few terms whose windows nearly vanish there still carry weight across s.
        """
        ratios = [row["measured"] / row["bound"] for row in sampled_terms.rows if row["bound"] > 0]
        assert ratios and max(ratios) <= 100


class TestAggregate:
    def test_predicted_exponent(self):
        assert predicted_exponent(3, 1 / 11) == pytest.approx(0.0, abs=1e-15)
        assert predicted_exponent(3, 0.05) == pytest.approx(-0.15)

    def test_rejects_small_m(self):
        with pytest.raises(ValueError):
            offdiag_err_estimate(2, 0.05, 1000)

    def test_deterministic(self):
        a = offdiag_err_estimate(3, 0.05, 1000, seed=3)
        b = offdiag_err_estimate(3, 0.05, 1000, seed=3)
        assert a.total == b.total and a.rows == b.rows

    def test_csv(self, sampled_terms, tmp_path):
        path = tmp_path / "scatter.csv"
        sampled_terms.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("block,u,q,h,r,sigma,L")
        assert len(lines) == len(sampled_terms.rows) + 1

    def test_loglog_slope(self):
        slope, r2 = loglog_slope([1, 10, 100], [3, 30 * 10**0.5, 300 * 10])
        assert slope == pytest.approx(1.5)
        assert r2 == pytest.approx(1.0)


class TestHolderCheck:
    def test_small_range(self):
        res = h_sum_holder_check(3, 0.05, 10)
        assert 0 < res["brute"] and np.isfinite(res["ratio"]) and res["ratio"] > 0

    def test_single_h(self):
        """With one admissible h every tuple repeats an entry, so the sum is 0."""
        assert h_sum_holder_check(3, 0.05, 1)["brute"] == 0.0

    def test_pair_brute_force(self):
        H = 6
        ref = sum(abs(a - b) ** -0.5 for a in range(1, H + 1) for b in range(1, H + 1) if a != b)
        assert h_sum_holder_check(2, 0.1, H)["brute"] == pytest.approx(ref, rel=1e-14)

    def test_slope(self):
        res = holder_slope(3, 0.05)
        assert res["slope_N"] <= res["predicted_N"] + 0.05
