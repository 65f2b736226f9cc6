"""Parameterization transforms, packing and the hyperparameter JSON schema."""

import math

import numpy as np
import pytest

from priormatch import (
    CpmfHyper,
    DomainError,
    GammaParams,
    HpfHyper,
    MeanStdParams,
    PmfHyper,
    UnconstrainedVector,
    gamma_from_meanstd,
    hyper_from_json,
    hyper_to_json,
    meanstd_from_gamma,
    pack,
    poisson_normal,
    unpack,
)
from priormatch.params import MEAN_STD, SHAPE_RATE


class TestGammaMeanStdConversion:
    def test_meanstd_to_gamma_wide(self):
        g = gamma_from_meanstd(MeanStdParams(mean=10.0, std=3.1623))
        np.testing.assert_allclose(g.shape, 10.0, rtol=1e-4)
        np.testing.assert_allclose(g.rate, 1.0, rtol=1e-4)

    def test_meanstd_to_gamma_unit_exponential(self):
        g = gamma_from_meanstd(MeanStdParams(mean=1.0, std=1.0))
        assert g.shape == 1.0 and g.rate == 1.0

    def test_meanstd_to_gamma_small_mean(self):
        g = gamma_from_meanstd(MeanStdParams(mean=0.1, std=0.3162))
        np.testing.assert_allclose(g.shape, 0.1, rtol=1e-3)
        np.testing.assert_allclose(g.rate, 1.0, rtol=1e-3)

    def test_gamma_to_meanstd(self):
        p = meanstd_from_gamma(GammaParams(shape=10.0, rate=2.0))
        np.testing.assert_allclose(p.mean, 5.0, rtol=1e-12)
        np.testing.assert_allclose(p.std, math.sqrt(10.0) / 2.0, rtol=1e-12)

    def test_gamma_to_meanstd_trivial(self):
        p = meanstd_from_gamma(GammaParams(shape=1.0, rate=1.0))
        assert p.mean == 1.0 and p.std == 1.0

    def test_gamma_to_meanstd_concentrated(self):
        p = meanstd_from_gamma(GammaParams(shape=1000.0, rate=1000.0))
        np.testing.assert_allclose(p.mean, 1.0, rtol=1e-12)
        np.testing.assert_allclose(p.std, math.sqrt(1000.0) / 1000.0, rtol=1e-12)

    def test_moments_preserved(self):
        p = MeanStdParams(mean=3.7, std=0.41)
        g = gamma_from_meanstd(p)
        np.testing.assert_allclose(g.mean, p.mean, rtol=1e-12)
        np.testing.assert_allclose(math.sqrt(g.variance), p.std, rtol=1e-12)

    def test_roundtrip_log_uniform_grid(self):
        rng = np.random.default_rng(42)
        for _ in range(500):
            mean, std = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), size=2))
            p = MeanStdParams(float(mean), float(std))
            back = meanstd_from_gamma(gamma_from_meanstd(p))
            np.testing.assert_allclose(back.mean, p.mean, rtol=1e-12)
            np.testing.assert_allclose(back.std, p.std, rtol=1e-12)

    def test_shape_is_inverse_squared_cv(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            mean, std = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), size=2))
            g = gamma_from_meanstd(MeanStdParams(float(mean), float(std)))
            np.testing.assert_allclose(1.0 / g.shape, (std / mean) ** 2, rtol=1e-12)

    @pytest.mark.parametrize("mean,std", [(-1.0, 1.0), (0.0, 1.0), (1.0, -2.0), (1.0, 0.0)])
    def test_domain_errors_name_the_field(self, mean, std):
        with pytest.raises(DomainError) as exc:
            MeanStdParams(mean=mean, std=std)
        assert ("mean" in str(exc.value)) or ("std" in str(exc.value))

    def test_gamma_domain_errors(self):
        with pytest.raises(DomainError, match="shape"):
            GammaParams(shape=0.0, rate=1.0)
        with pytest.raises(DomainError, match="rate"):
            GammaParams(shape=1.0, rate=float("nan"))


ROW_A = PmfHyper(k=25, row_prior=GammaParams(10.0, 1.0), col_prior=GammaParams(10.0, 1.0))


class TestPack:
    def test_pmf_meanstd_coordinates(self):
        vec = pack(ROW_A, MEAN_STD)
        assert vec.names == ("mu_theta", "sigma_theta", "mu_beta", "sigma_beta")
        expected = [math.log(10.0), math.log(math.sqrt(10.0))] * 2
        np.testing.assert_allclose(vec.array(), expected, rtol=1e-12)

    def test_pmf_shaperate_coordinates(self):
        vec = pack(ROW_A, SHAPE_RATE)
        assert vec.names == ("a", "b", "c", "d")
        np.testing.assert_allclose(
            vec.array(), [math.log(10.0), 0.0, math.log(10.0), 0.0], atol=1e-12
        )

    def test_hpf_six_vector(self):
        h = HpfHyper(a=1.0, a_prime=100.0, b_prime=10.0, c=1.0, c_prime=100.0, d_prime=10.0, k=25)
        vec = pack(h)
        assert vec.names == ("a", "a_prime", "b_prime", "c", "c_prime", "d_prime")
        np.testing.assert_allclose(vec.array(), np.log([1, 100, 10, 1, 100, 10]), atol=1e-12)

    @pytest.mark.parametrize("parameterization", [MEAN_STD, SHAPE_RATE])
    def test_pmf_roundtrip(self, parameterization):
        vec = pack(ROW_A, parameterization)
        back = unpack(vec)
        assert back.k == ROW_A.k
        for get in ("row_gamma", "col_gamma"):
            orig, new = getattr(ROW_A, get)(), getattr(back, get)()
            np.testing.assert_allclose(new.shape, orig.shape, rtol=1e-12)
            np.testing.assert_allclose(new.rate, orig.rate, rtol=1e-12)

    def test_cpmf_roundtrip(self):
        ed = poisson_normal(1.0, 1.0)
        h = CpmfHyper(base=ROW_A, ed=ed)
        vec = pack(h, SHAPE_RATE)
        assert vec.model == "cpmf"
        back = unpack(vec, ed=ed)
        assert isinstance(back, CpmfHyper)
        np.testing.assert_allclose(back.base.row_gamma().shape, 10.0, rtol=1e-12)
        with pytest.raises(DomainError, match="ed"):
            unpack(vec)

    def test_hpf_roundtrip(self):
        h = HpfHyper(a=0.3, a_prime=7.0, b_prime=2.5, c=1.1, c_prime=9.0, d_prime=0.7, k=4)
        back = unpack(pack(h))
        for name in ("a", "a_prime", "b_prime", "c", "c_prime", "d_prime"):
            np.testing.assert_allclose(getattr(back, name), getattr(h, name), rtol=1e-12)
        assert back.k == 4

    def test_hpf_rejects_meanstd(self):
        h = HpfHyper(a=1.0, a_prime=100.0, b_prime=10.0, c=1.0, c_prime=100.0, d_prime=10.0, k=25)
        with pytest.raises(DomainError):
            pack(h, MEAN_STD)

    def test_natural_inverse(self):
        vec = pack(ROW_A, MEAN_STD)
        rebuilt = vec.from_natural(vec.natural())
        np.testing.assert_allclose(rebuilt.array(), vec.array(), rtol=1e-12)

    def test_k_excluded_from_vector(self):
        vec = pack(ROW_A, MEAN_STD)
        assert len(vec.values) == 4 and vec.k == 25


class TestJsonSchema:
    def test_field_names(self):
        obj = hyper_to_json(ROW_A, MEAN_STD)
        assert set(obj) == {"model", "k", "params", "parameterization"}
        assert obj["model"] == "pmf"
        assert set(obj["params"]) == {"mu_theta", "sigma_theta", "mu_beta", "sigma_beta"}

    def test_roundtrip_shape_rate(self):
        obj = hyper_to_json(ROW_A, SHAPE_RATE)
        back = hyper_from_json(obj)
        np.testing.assert_allclose(back.row_gamma().shape, 10.0, rtol=1e-12)
        np.testing.assert_allclose(back.col_gamma().rate, 1.0, rtol=1e-12)

    def test_hpf_json(self):
        h = HpfHyper(a=1.0, a_prime=100.0, b_prime=10.0, c=1.0, c_prime=100.0, d_prime=10.0, k=25)
        obj = hyper_to_json(h)
        assert set(obj["params"]) == {"a", "a_prime", "b_prime", "c", "c_prime", "d_prime"}
        back = hyper_from_json(obj)
        for name in ("a", "a_prime", "b_prime", "c", "c_prime", "d_prime"):
            np.testing.assert_allclose(getattr(back, name), getattr(h, name), rtol=1e-12)
        assert back.k == h.k

    def test_missing_params_rejected(self):
        obj = hyper_to_json(ROW_A, MEAN_STD)
        del obj["params"]["mu_theta"]
        with pytest.raises(DomainError, match="mu_theta"):
            hyper_from_json(obj)

    def test_unknown_model_rejected(self):
        with pytest.raises(DomainError, match="model"):
            hyper_from_json({"model": "nmf", "k": 2, "params": {}})


class TestVectorInvariants:
    def test_transform_tags_validated(self):
        with pytest.raises(DomainError):
            UnconstrainedVector(
                values=(0.0,),
                names=("x",),
                transforms=("squared",),
                model="pmf",
                k=1,
                parameterization=MEAN_STD,
            )

    def test_k_validation(self):
        with pytest.raises(DomainError, match="k"):
            PmfHyper(k=0, row_prior=GammaParams(1, 1), col_prior=GammaParams(1, 1))
