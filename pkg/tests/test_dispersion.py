"""Observation families: conditional moments and degenerate limits."""

import numpy as np
import pytest

from priormatch import DomainError, EdFamily, poisson_normal, unit_summand
from conftest import assert_within_stderr


class TestPoissonNormal:
    def test_conditional_mean_and_variance(self):
        """Sampled conditional moments match kappa*N*psi' and kappa*N*psi''."""
        ed = poisson_normal(mean=2.0, std=1.5)
        gen = np.random.default_rng(0)
        for count in (1, 3, 20):
            draws = ed.sample_conditional(gen, np.full(200_000, count))
            se_mean = draws.std(ddof=1) / np.sqrt(draws.size)
            assert_within_stderr(draws.mean(), ed.mean_scale * count, se_mean, label="mean")
            sample_var = draws.var(ddof=1)
            se_var = sample_var * np.sqrt(2.0 / (draws.size - 1))
            assert_within_stderr(sample_var, ed.variance_scale * count, se_var, label="var")

    def test_zero_count_yields_zero(self):
        ed = poisson_normal(1.0, 1.0)
        out = ed.sample_conditional(np.random.default_rng(1), np.zeros(100, dtype=np.int64))
        assert np.all(out == 0.0)

    def test_scales(self):
        ed = poisson_normal(mean=3.0, std=2.0)
        assert ed.mean_scale == 3.0
        assert ed.variance_scale == 4.0


class TestUnitSummand:
    def test_observation_equals_count(self):
        ed = unit_summand()
        counts = np.array([0, 1, 5, 17])
        np.testing.assert_array_equal(ed.sample_conditional(np.random.default_rng(0), counts), counts)

    def test_degenerate_scales(self):
        ed = unit_summand()
        assert ed.mean_scale == 1.0 and ed.variance_scale == 0.0


class TestValidation:
    def test_kappa_positive(self):
        with pytest.raises(DomainError, match="kappa"):
            EdFamily(name="bad", kappa=0.0, psi_prime=1.0, psi_double_prime=1.0)

    def test_psi_double_prime_nonnegative(self):
        with pytest.raises(DomainError, match="psi_double_prime"):
            EdFamily(name="bad", kappa=1.0, psi_prime=1.0, psi_double_prime=-0.5)

    def test_sampler_optional(self):
        ed = EdFamily(name="abstract", kappa=1.0, psi_prime=2.0, psi_double_prime=3.0)
        with pytest.raises(DomainError, match="sampler"):
            ed.sample_conditional(np.random.default_rng(0), np.ones(3, dtype=np.int64))
