import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bbp_lab.ensemble import make_entry_law, rank_one
from bbp_lab.fluctuation import (
    FluctuationError,
    compare_distributions,
    collect_fluctuations,
    ks_statistic,
    laplace_check,
    sample_Z,
    sample_Z_batch,
    scaled_statistic,
)
from bbp_lab.profile import LimitLawParams, build_uniform_profile, compute_limit_params


def scalar_params(g=None, sigma_tilde=1.0, chi=0.25, tau=0.75, a=2.0, beta=1):
    if g is None:
        g = 1.0 / 12.0
    return LimitLawParams(
        r=1,
        g=np.array([[g]]),
        sigma_tilde=np.array([[sigma_tilde]]),
        chi=np.array([chi]),
        tau=np.array([tau]),
        q_rows=np.array([[1.0]]),
        beta=beta,
        a=a,
        truncation_k=25,
    )


class TestSampleZ:
    def test_degenerate_zero(self):
        params = scalar_params(g=0.0, sigma_tilde=0.0, chi=0.25, tau=0.25)
        law = make_entry_law("gaussian")
        for t in range(5):
            assert sample_Z(params, law, seed=t).z[0] == pytest.approx(0.0)

    def test_scalar_variance_identity(self):
        # Var Z = 2 sigma_tilde^2 + 2 g + (tau - chi) for beta = 1, r = q = 1
        params = scalar_params()
        law = make_entry_law("gaussian")
        n = 10 ** 5
        z = sample_Z_batch(params, law, n, seed=31)[:, 0]
        target = 2.0 + 2.0 / 12.0 + 0.5
        se = target * math.sqrt(2.0 / n)
        assert z.var(ddof=1) == pytest.approx(target, abs=3 * se)

    def test_sign_symmetry(self):
        params = scalar_params()
        law = make_entry_law("gaussian")
        n = 10 ** 5
        z = sample_Z_batch(params, law, n, seed=17)[:, 0]
        skew = np.mean((z - z.mean()) ** 3) / z.std() ** 3
        # skewness of a symmetric law: 0 within 5 standard errors (~sqrt(6/n))
        assert abs(skew) <= 5 * math.sqrt(6.0 / n)

    def test_beta2_real_eigenvalues(self):
        prof = build_uniform_profile(32)
        law = make_entry_law("gaussian", beta=2)
        u = np.eye(2, dtype=complex)
        params = compute_limit_params(prof, [0, 5], 2.0, law, beta=2, u=u, q=2)
        s = sample_Z(params, law, seed=9)
        assert np.isrealobj(s.z) or np.abs(np.imag(s.z)).max() < 1e-12
        assert s.z[0] >= s.z[-1]

    def test_negative_g_rejected(self):
        params = scalar_params(g=-0.01)
        law = make_entry_law("gaussian")
        with pytest.raises(FluctuationError, match="negative"):
            sample_Z(params, law, 0)

    def test_negative_diag_variance_rejected(self):
        params = scalar_params(chi=0.75, tau=0.25)
        law = make_entry_law("gaussian")
        with pytest.raises(FluctuationError, match="tau"):
            sample_Z(params, law, 0)

    def test_components_independent_reproducible(self):
        params = scalar_params()
        law = make_entry_law("gaussian")
        s1 = sample_Z(params, law, seed=5)
        s2 = sample_Z(params, law, seed=5)
        assert s1.z[0] == s2.z[0]
        assert s1.h_id[0, 0] == s2.h_id[0, 0]


class TestScaledStatistic:
    def test_center_is_zero(self):
        assert scaled_statistic(2.5, 2.0, 0.1) == pytest.approx(0.0)

    def test_arithmetic(self):
        # a=2, sigma*=0.1, lambda=2.53: (0.03) * 4 / (3 * 0.1) = 0.4
        assert scaled_statistic(2.53, 2.0, 0.1) == pytest.approx(0.4)

    def test_zero_noise_hook(self):
        # with the noise turned off the top eigenvalue sits at a exactly,
        # so the statistic is deterministic: -a / ((a^2 - 1) sigma*)
        a, sstar = 2.0, 0.05
        assert scaled_statistic(a, a, sstar) == pytest.approx(-a / ((a * a - 1) * sstar))

    def test_subcritical_rejected(self):
        with pytest.raises(FluctuationError):
            scaled_statistic(2.0, 0.9, 0.1)


class TestKs:
    def test_identical(self):
        x = np.arange(300.0)
        assert ks_statistic(x, x.copy()) == pytest.approx(0.0)

    def test_disjoint(self):
        assert ks_statistic(np.arange(300.0), np.arange(300.0) + 1000) == pytest.approx(1.0)

    def test_same_gaussian_within_null_band(self):
        rng = np.random.default_rng(2026)
        x = rng.standard_normal(2000)
        y = rng.standard_normal(2000)
        # 95% null quantile is about 1.358 * sqrt(2/n) = 0.043
        assert ks_statistic(x, y) < 0.06

    def test_matches_scipy(self):
        from scipy import stats

        rng = np.random.default_rng(7)
        x = rng.standard_normal(400)
        y = rng.standard_normal(500) * 1.2 + 0.1
        ours = ks_statistic(x, y)
        ref = stats.ks_2samp(x, y).statistic
        assert ours == pytest.approx(ref, abs=1e-12)

    def test_sample_floor(self):
        with pytest.raises(FluctuationError, match="200"):
            compare_distributions(np.zeros(10), np.zeros(300))

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_ks_bounds(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(50)
        y = rng.standard_normal(60) + rng.uniform(-2, 2)
        k = ks_statistic(x, y)
        assert 0.0 <= k <= 1.0


class TestCollectFluctuations:
    def test_small_run_centered(self):
        prof = build_uniform_profile(400)
        law = make_entry_law("gaussian")
        defo = rank_one(0, 2.0)
        samples = collect_fluctuations(prof, law, 1, defo, trials=60, seed=3, workers=1)
        scaled = np.array([s.scaled for s in samples])
        assert len(scaled) == 60
        # centered within 5 standard errors at the limit spread sqrt(8/3)
        assert abs(scaled.mean()) <= 5 * math.sqrt(8 / 3 / 60) + 0.3

    def test_precomputed_spectra_path(self):
        prof = build_uniform_profile(50)
        law = make_entry_law("gaussian")
        defo = rank_one(0, 2.0)
        spectra = np.tile(np.linspace(2.5, -2, 50), (4, 1))
        samples = collect_fluctuations(
            prof, law, 1, defo, trials=4, seed=0, spectra=spectra
        )
        assert all(s.scaled == pytest.approx(0.0) for s in samples)

    def test_subcritical_rejected(self):
        prof = build_uniform_profile(50)
        law = make_entry_law("gaussian")
        with pytest.raises(FluctuationError):
            collect_fluctuations(prof, law, 1, rank_one(0, 0.5), trials=4, seed=0)


class TestLaplace:
    def test_zero_noise_degenerate_t(self):
        # if Z were identically 0 the right side is exactly q^s = 1
        params = scalar_params(g=0.0, sigma_tilde=0.0, chi=0.25, tau=0.25)
        law = make_entry_law("gaussian")
        z = sample_Z_batch(params, law, 50, seed=1)
        rhs = np.exp(0.3 * z[:, 0])
        assert rhs.mean() == pytest.approx(1.0)

    def test_k_floor_error(self):
        prof = build_uniform_profile(16)
        law = make_entry_law("gaussian")
        defo = rank_one(0, 2.0)
        params = compute_limit_params(prof, [0], 2.0, law)
        with pytest.raises(FluctuationError, match="k_j"):
            laplace_check(prof, law, 1, defo, params, (0.1,), trials=4, seed=0)

    def test_smoke_agreement_small(self):
        # desk-scale smoke test; the acceptance suite runs the pinned config
        prof = build_uniform_profile(400)
        law = make_entry_law("gaussian")
        defo = rank_one(0, 2.0)
        params = compute_limit_params(prof, [0], 2.0, law)
        res = laplace_check(
            prof, law, 1, defo, params, (1.0,), trials=250, seed=12, z_draws=4000, workers=1
        )
        assert res["k_list"] == [20]
        assert abs(res["diff"]) <= 6 * res["combined_stderr"]
