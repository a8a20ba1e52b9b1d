import math

import numpy as np
import pytest

from pdfastream.pac import (
    PacParams,
    batch_bound_terms,
    batch_lower_bound,
    cellwise_m0_bound,
    collision_bound,
    f_m0,
    format_report,
    min_m0,
    parameter_report,
)


class TestFm0:
    def test_hand_value(self):
        # sqrt(0.02 ln 40) = 0.27162, (0.5 - 0.27162)^2 = 0.052157,
        # 0.005 / (0.005 + 0.052157) = 0.08748
        assert f_m0(100, 0.5, 0.05) == pytest.approx(0.0875, abs=2e-4)

    def test_decays_to_zero(self):
        values = [f_m0(m, 0.5, 0.05) for m in (10**3, 10**4, 10**5, 10**6)]
        assert all(b < a for a, b in zip(values, values[1:]))
        assert values[-1] < 1e-5

    def test_not_monotone_at_small_m(self):
        """Dense grid scan: f rises before it falls."""
        grid = [f_m0(m, 0.5, 0.05) for m in range(1, 500)]
        peak = max(range(len(grid)), key=grid.__getitem__)
        assert 0 < peak < len(grid) - 1
        assert grid[peak] > grid[0] and grid[peak] > grid[-1]

    def test_single_interior_maximum(self):
        for mu, alpha in [(0.1, 0.05), (0.5, 0.2), (0.9, 0.05)]:
            grid = np.array([f_m0(m, mu, alpha) for m in range(1, 20000)])
            diffs = np.sign(np.diff(grid))
            # once decreasing, never increases again
            changes = np.flatnonzero(np.diff((diffs < 0).astype(int)) != 0)
            assert len(changes) <= 1

    def test_rejects_bad_m(self):
        with pytest.raises(ValueError):
            f_m0(0, 0.5, 0.05)


class TestMinM0:
    def test_trivial_bound(self):
        grid_max = max(f_m0(m, 0.5, 0.05) for m in range(1, 5000))
        assert min_m0(0.5, 0.05, grid_max + 0.01) == 1

    def test_matches_exhaustive_scan(self):
        """Brute-force oracle: scan every m up to 10^6."""
        mu, alpha, bound = 0.5, 0.05, 0.01
        got = min_m0(mu, alpha, bound)
        values = np.array([f_m0(m, mu, alpha) for m in range(1, 1_000_001)])
        ok = values <= bound
        # smallest m such that everything from m on satisfies the bound
        suffix_ok = np.flip(np.logical_and.accumulate(np.flip(ok)))
        expected = int(np.flatnonzero(suffix_ok)[0]) + 1
        assert got == expected

    def test_monotone_in_bound(self):
        bounds = [0.05, 0.01, 0.001, 1e-4]
        answers = [min_m0(0.4, 0.05, b) for b in bounds]
        assert all(b >= a for a, b in zip(answers, answers[1:]))

    def test_boundary_exactness(self):
        mu, alpha, bound = 0.3, 0.05, 0.005
        m = min_m0(mu, alpha, bound)
        assert f_m0(m, mu, alpha) <= bound
        if m > 1:
            assert f_m0(m - 1, mu, alpha) > bound

    def test_rejects_bad_bound(self):
        with pytest.raises(ValueError):
            min_m0(0.5, 0.05, 0.0)


class TestBatchBound:
    def test_independent_reevaluation(self):
        n, sigma, eps, delta, m0 = 5, 3, 0.1, 0.05, 500
        ns2 = (n * sigma) ** 2
        term1 = 8 * ns2 / eps**2 * math.log(2 * ns2 / delta)
        term2 = 4 * m0 * n * sigma / eps
        assert batch_lower_bound(n, sigma, eps, delta, m0) == math.ceil(max(term1, term2))
        t1, t2 = batch_bound_terms(n, sigma, eps, delta, m0)
        assert t1 == pytest.approx(term1) and t2 == pytest.approx(term2)

    def test_doubling_n_more_than_quadruples_first_term(self):
        t1a, _ = batch_bound_terms(5, 3, 0.1, 0.05, 1)
        t1b, _ = batch_bound_terms(10, 3, 0.1, 0.05, 1)
        assert t1b > 4 * t1a

    def test_divergence_as_epsilon_shrinks(self):
        b1 = batch_lower_bound(5, 3, 1e-2, 0.05, 500)
        b2 = batch_lower_bound(5, 3, 1e-4, 0.05, 500)
        assert b2 > 1e3 * b1


class TestCollisionBound:
    def test_full_support(self):
        assert collision_bound(10_000, 100, 10_000) == 1.0

    def test_at_mean_near_half(self):
        p = collision_bound(10_000, 100, 100)  # mean = 100
        assert p == pytest.approx(0.5, abs=0.05)

    def test_against_exact_binomial(self):
        from scipy.stats import binom

        sigma, w, t = 10_000, 100, 120
        approx = collision_bound(sigma, w, t)
        exact = binom.cdf(t, sigma, 1 / w)
        assert approx == pytest.approx(exact, abs=0.01)

    def test_warns_when_alphabet_small(self):
        with pytest.warns(RuntimeWarning):
            collision_bound(100, 64, 3)


class TestCellwiseM0:
    def test_substitution_nc_one(self):
        mu, delta = 0.2, 0.05
        n, sigma = 10, 5
        expected = math.ceil(16 * n**2 * sigma**2 / (mu**2 * delta))
        assert cellwise_m0_bound(1, n, sigma, mu, delta) == expected

    def test_cubic_growth_in_nc(self):
        base = cellwise_m0_bound(1, 10, 5, 0.2, 0.05)
        scaled = cellwise_m0_bound(4, 10, 5, 0.2, 0.05)
        assert scaled == pytest.approx(base * 4**3, rel=1e-9)

    def test_independent_reevaluation(self):
        n_c, n, sigma, mu, delta = 4, 10, 5, 0.2, 0.05
        expected = math.ceil(n_c * n**2 * sigma**2 / ((mu / (4 * n_c)) ** 2 * delta))
        assert cellwise_m0_bound(n_c, n, sigma, mu, delta) == expected
        assert expected == 1_280_000_000  # frozen from the hand evaluation


class TestParams:
    def test_mu_validation(self):
        with pytest.raises(ValueError):
            PacParams(mu=0.0)
        with pytest.raises(ValueError):
            PacParams(mu=-0.5)

    def test_beta_below_mu_required(self):
        with pytest.raises(ValueError):
            PacParams(mu=0.05, beta=0.1)

    def test_report_contains_both_terms(self):
        report = parameter_report(PacParams(mu=0.5, n_states=10, alphabet_size=8))
        text = format_report(report)
        assert "coverage term" in text and "evidence term" in text
        assert report.dominating_term() in ("coverage", "evidence")
        assert report.w == math.ceil(math.e / 0.01)

    def test_pure_function_determinism(self):
        a = parameter_report(PacParams(mu=0.3))
        b = parameter_report(PacParams(mu=0.3))
        assert a == b
