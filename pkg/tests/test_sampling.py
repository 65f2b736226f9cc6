"""Generative samplers: determinism, stream independence, moment consistency."""

import math

import numpy as np
import pytest

from priormatch import (
    CpmfHyper,
    DomainError,
    GammaParams,
    PmfHyper,
    RngHandle,
    cpmf_forward_moments,
    pmf_forward_moments,
    poisson_normal,
    sample_gamma,
    simulate_cpmf,
    simulate_hpf,
    simulate_pmf,
    unit_summand,
)
from priormatch.presets import HPF_CONFIGS, PMF_CONFIGS
from conftest import assert_within_stderr, replicate_mean_bound


class TestRngHandle:
    def test_same_stream_identical(self):
        a = RngHandle(123, 5).generator().random(1000)
        b = RngHandle(123, 5).generator().random(1000)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_independent(self):
        # config G has negligible within-matrix correlation, so the iid
        # cross-correlation bound applies to the flattened entries
        h = PMF_CONFIGS["G"]
        m1 = simulate_pmf(RngHandle(9, 0), h, 200, 200)
        m2 = simulate_pmf(RngHandle(9, 1), h, 200, 200)
        assert not np.array_equal(m1, m2)
        r = np.corrcoef(m1.ravel(), m2.ravel())[0, 1]
        assert abs(r) < 4.0 / math.sqrt(m1.size)

    def test_validation(self):
        with pytest.raises(DomainError):
            RngHandle(-1)


class TestSampleGamma:
    def test_unit_exponential_mean(self):
        draws = sample_gamma(RngHandle(0), GammaParams(1.0, 1.0), 1_000_000)
        assert abs(draws.mean() - 1.0) < 4.0 / math.sqrt(draws.size)

    def test_config_b_marginals(self):
        draws = sample_gamma(RngHandle(1), GammaParams(10.0, 2.0), 1_000_000)
        se_mean = draws.std(ddof=1) / math.sqrt(draws.size)
        assert_within_stderr(draws.mean(), 5.0, se_mean, label="mean")
        centered = (draws - draws.mean()) ** 2
        se_var = centered.std(ddof=1) / math.sqrt(draws.size)
        assert_within_stderr(draws.var(ddof=1), 2.5, se_var, label="variance")

    def test_small_shape_path(self):
        draws = sample_gamma(RngHandle(2), GammaParams(0.1, 1.0), 1_000_000)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert_within_stderr(draws.mean(), 0.1, se, label="small-shape mean")

    def test_tiny_shape_moments(self):
        # shapes this small underflow many draws to zero but keep the mean right
        draws = sample_gamma(RngHandle(3), GammaParams(0.001, 0.01), 2_000_000)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert_within_stderr(draws.mean(), 0.1, se, label="tiny-shape mean")


class TestSimulatePmf:
    def test_determinism(self):
        h = PMF_CONFIGS["A"]
        m1 = simulate_pmf(RngHandle(42), h, 100, 137)
        m2 = simulate_pmf(RngHandle(42), h, 100, 137)
        assert m1.tobytes() == m2.tobytes()

    def test_thread_count_does_not_change_output(self):
        h = PMF_CONFIGS["B"]
        m1 = simulate_pmf(RngHandle(5), h, 700, 60, threads=1)
        m2 = simulate_pmf(RngHandle(5), h, 700, 60, threads=4)
        np.testing.assert_array_equal(m1, m2)

    def test_counts_are_nonnegative_integers(self):
        m = simulate_pmf(RngHandle(0), PMF_CONFIGS["D"], 50, 50)
        assert np.all(m >= 0) and np.all(m == np.floor(m))

    def test_mean_matches_analytic(self):
        h = PMF_CONFIGS["A"]
        m = simulate_pmf(RngHandle(7), h, 1000, 1000)
        assert abs(m.mean() - 2500.0) / 2500.0 < 0.02

    def test_near_deterministic_rate_is_poisson(self):
        h = PmfHyper(
            k=1,
            row_prior=GammaParams(1e8, 1e4),  # mean 1e4, sd 1 -> tiny relative spread
            col_prior=GammaParams(1e8, 1e6),  # mean 100
        )
        m = simulate_pmf(RngHandle(11), h, 400, 400)
        ratio = m.var(ddof=1) / m.mean()
        assert abs(ratio - 1.0) < 0.02

    def test_moment_consistency_all_configs(self):
        """Replicate-matrix means and variances agree with the closed forms at 4 SE."""
        for label, h in PMF_CONFIGS.items():
            ms = pmf_forward_moments(h)
            means, variances = [], []
            for seed in range(30):
                m = simulate_pmf(RngHandle(1000 + seed), h, 300, 300)
                means.append(m.mean())
                variances.append(m.var(ddof=1))
            mean_hat, mean_se = replicate_mean_bound(means)
            assert_within_stderr(mean_hat, ms.mean, mean_se, label=f"{label} mean")
            var_hat, var_se = replicate_mean_bound(variances)
            assert_within_stderr(var_hat, ms.variance, var_se, label=f"{label} variance")


class TestSimulateCpmf:
    def test_poisson_normal_moments(self):
        ed = poisson_normal(1.0, 1.0)
        h = CpmfHyper(base=PMF_CONFIGS["A"], ed=ed)
        ms = cpmf_forward_moments(h)
        m = simulate_cpmf(RngHandle(13), h, 1000, 1000)
        assert abs(m.mean() - ms.mean) / ms.mean < 0.02
        assert abs(m.var(ddof=1) - ms.variance) / ms.variance < 0.05

    def test_unit_family_collapses_to_pmf(self):
        """With unit summands the compound model is the plain count model."""
        base = PMF_CONFIGS["B"]
        mc = simulate_cpmf(RngHandle(21), CpmfHyper(base=base, ed=unit_summand()), 500, 500)
        mp = simulate_pmf(RngHandle(22), base, 500, 500)
        ms = pmf_forward_moments(base)
        for m in (mc, mp):
            assert abs(m.mean() - ms.mean) / ms.mean < 0.05
        pooled_se = math.hypot(mc.std(ddof=1), mp.std(ddof=1)) / math.sqrt(mc.size)
        # two-sample means agree within wide MC bounds (entries are correlated)
        assert abs(mc.mean() - mp.mean()) < 40 * pooled_se

    def test_zero_count_zero_observation(self):
        base = PmfHyper(k=1, row_prior=GammaParams(0.01, 10.0), col_prior=GammaParams(0.01, 10.0))
        m = simulate_cpmf(RngHandle(5), CpmfHyper(base=base, ed=poisson_normal(5.0, 1.0)), 200, 200)
        assert (m == 0.0).mean() > 0.95  # nearly all latent counts are zero

    def test_determinism(self):
        h = CpmfHyper(base=PMF_CONFIGS["B"], ed=poisson_normal(1.0, 1.0))
        m1 = simulate_cpmf(RngHandle(3), h, 80, 90)
        m2 = simulate_cpmf(RngHandle(3), h, 80, 90)
        assert m1.tobytes() == m2.tobytes()


class TestSimulateHpf:
    def test_reference_mean_config_k(self):
        m = simulate_hpf(RngHandle(11), HPF_CONFIGS["K"], 1000, 1000)
        assert abs(m.mean() - 0.26) <= 0.01

    def test_reference_mean_config_p(self):
        m = simulate_hpf(RngHandle(11), HPF_CONFIGS["P"], 1000, 1000)
        assert abs(m.mean() - 1301.71) / 1301.71 <= 0.03

    def test_counts_are_nonnegative_integers(self):
        m = simulate_hpf(RngHandle(1), HPF_CONFIGS["L"], 60, 60)
        assert np.all(m >= 0) and np.all(m == np.floor(m))

    def test_concentrated_hyperprior_matches_pmf(self):
        """Huge a' pins the row rate at a'/b' ... i.e. theta ~ Gamma(a, b')."""
        from priormatch import HpfHyper

        h = HpfHyper(a=2.0, a_prime=1e6, b_prime=3.0, c=1.5, c_prime=1e6, d_prime=2.0, k=10)
        equiv = PmfHyper(k=10, row_prior=GammaParams(2.0, 3.0), col_prior=GammaParams(1.5, 2.0))
        ms = pmf_forward_moments(equiv)
        means = [simulate_hpf(RngHandle(40 + s), h, 300, 300).mean() for s in range(10)]
        mean_hat, se = replicate_mean_bound(means)
        assert_within_stderr(mean_hat, ms.mean, se, label="concentrated-hyperprior mean")

    def test_determinism(self):
        m1 = simulate_hpf(RngHandle(8), HPF_CONFIGS["K"], 90, 70)
        m2 = simulate_hpf(RngHandle(8), HPF_CONFIGS["K"], 90, 70)
        assert m1.tobytes() == m2.tobytes()


class TestDimensionValidation:
    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            simulate_pmf(RngHandle(0), PMF_CONFIGS["A"], 0, 10)
