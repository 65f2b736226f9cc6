"""Moment estimation from matrices and latent-dimension recovery."""

import itertools
import math

import numpy as np
import pytest

from priormatch import (
    CpmfHyper,
    DataShapeError,
    FeasibilityError,
    MeanStdParams,
    PmfHyper,
    RngHandle,
    estimate_k,
    estimate_moments,
    pmf_forward_moments,
    poisson_normal,
    simulate_cpmf,
    simulate_pmf,
)
from priormatch.empirical import _decode_pairs
from priormatch.presets import PMF_CONFIGS
from conftest import assert_within_stderr


class TestPairDecoding:
    @pytest.mark.parametrize("n", [2, 3, 7, 50])
    def test_matches_itertools(self, n):
        expected = list(itertools.combinations(range(n), 2))
        total = n * (n - 1) // 2
        i, j = _decode_pairs(np.arange(total), n)
        assert list(zip(i.tolist(), j.tolist())) == expected


class TestEstimateMoments:
    def test_two_by_two_exact(self):
        est = estimate_moments(np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert est.moments.mean == 2.5
        np.testing.assert_allclose(est.moments.variance, 5.0 / 3.0, rtol=1e-12)

    def test_simulated_correlations_recovered(self):
        m = simulate_pmf(RngHandle(7), PMF_CONFIGS["A"], 1000, 1000)
        est = estimate_moments(m)
        assert abs(est.moments.rho1 - 5.0 / 11.0) < 0.02
        assert abs(est.moments.rho2 - 5.0 / 11.0) < 0.02
        assert est.n_pairs_rho1 == 2000 and est.n_pairs_rho2 == 2000

    def test_iid_matrix_has_no_correlation(self):
        m = RngHandle(1).generator().poisson(5.0, size=(400, 400)).astype(float)
        est = estimate_moments(m)
        # raw estimates may clip at zero; compare against the pair spread
        for rho, se, clipped in (
            (est.moments.rho1, est.stderr_rho1, est.rho1_clipped),
            (est.moments.rho2, est.stderr_rho2, est.rho2_clipped),
        ):
            assert rho <= 4.0 * se or clipped

    def test_pair_subsampling_unbiased(self):
        """Full-pair average and a 2000-pair subsample agree within 4 SE."""
        m = simulate_pmf(RngHandle(29), PMF_CONFIGS["B"], 200, 200)
        full = estimate_moments(m, max_pairs=200 * 199 // 2)
        sub = estimate_moments(m, max_pairs=2000, rng=RngHandle(5))
        assert full.n_pairs_rho1 == 19900 and sub.n_pairs_rho1 == 2000
        se = math.hypot(full.stderr_rho1, sub.stderr_rho1)
        assert_within_stderr(sub.moments.rho1, full.moments.rho1, se, label="rho1")
        se = math.hypot(full.stderr_rho2, sub.stderr_rho2)
        assert_within_stderr(sub.moments.rho2, full.moments.rho2, se, label="rho2")

    def test_transposition_swaps_correlations_exactly(self):
        m = simulate_pmf(RngHandle(3), PMF_CONFIGS["B"], 40, 60)
        est = estimate_moments(m, max_pairs=10**6)
        est_t = estimate_moments(m.T, max_pairs=10**6)
        assert est.moments.rho1 == est_t.moments.rho2
        assert est.moments.rho2 == est_t.moments.rho1
        assert est.moments.mean == est_t.moments.mean

    def test_dimension_errors(self):
        with pytest.raises(DataShapeError):
            estimate_moments(np.ones((1, 5)))
        with pytest.raises(DataShapeError):
            estimate_moments(np.ones((5, 1)))

    def test_constant_matrix_rejected(self):
        with pytest.raises(DataShapeError, match="constant"):
            estimate_moments(np.full((4, 4), 3.0))


class TestEstimateK:
    def test_pmf_recovery(self):
        m = simulate_pmf(RngHandle(7), PMF_CONFIGS["A"], 1000, 1000)
        sol = estimate_k(m)
        assert 22.5 <= sol.k_real <= 27.5

    def test_cpmf_recovery(self):
        ed = poisson_normal(1.0, 1.0)
        prior = MeanStdParams(10.0, math.sqrt(10.0))
        h = CpmfHyper(base=PmfHyper(k=50, row_prior=prior, col_prior=prior), ed=ed)
        m = simulate_cpmf(RngHandle(3), h, 1000, 1000)
        sol = estimate_k(m, model="cpmf", ed=ed)
        assert 45.0 <= sol.k_real <= 55.0

    def test_iid_matrix_is_infeasible(self):
        m = RngHandle(1).generator().poisson(5.0, size=(300, 300)).astype(float)
        with pytest.raises(FeasibilityError):
            estimate_k(m)

    def test_estimator_consistency_across_sizes(self):
        """Mean of the recovered dimension is within 10%, spread shrinks with size."""
        h = PMF_CONFIGS["A"]
        recovered = {}
        for size in (250, 1000):
            vals = [
                estimate_k(simulate_pmf(RngHandle(100 + s), h, size, size)).k_real
                for s in range(30)
            ]
            recovered[size] = np.asarray(vals)
        for size, vals in recovered.items():
            assert abs(vals.mean() - 25.0) / 25.0 < 0.10, f"size {size}"
        assert recovered[1000].std(ddof=1) < recovered[250].std(ddof=1)
