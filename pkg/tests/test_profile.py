import json
import math

import numpy as np
import pytest

from bbp_lab.ensemble import make_entry_law
from bbp_lab.profile import (
    ProfileError,
    build_band_profile,
    build_chiral_profile,
    build_custom_profile,
    build_dregular_profile,
    build_uniform_profile,
    compute_limit_params,
    flat_kernel,
    gaussian_kernel,
    grid_kernel,
    markov_power_entry,
    profile_from_json,
    profile_to_json,
    sigma_star,
)


def cycle_adjacency(n):
    psi = np.zeros((n, n), dtype=int)
    for i in range(n):
        psi[i, (i + 1) % n] = 1
        psi[i, (i - 1) % n] = 1
    return psi


class TestBandProfile:
    def test_flat_kernel_wrap_l4(self):
        # bandwidth 2 with the open-ball indicator: each row spreads evenly
        # over the offsets within one lattice step, forced stochastic.
        prof = build_band_profile(4, 1, 2.0, flat_kernel())
        p = prof.p_matrix
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
        # nonzero exactly on |i-j| <= 1 (mod 4), equal mass 1/3
        assert p[0, 0] == pytest.approx(1 / 3)
        assert p[0, 1] == pytest.approx(1 / 3)
        assert p[0, 2] == pytest.approx(0.0, abs=1e-15)

    def test_gaussian_kernel_sigma_star_scaling(self):
        # peak variance tracks sup_norm / bandwidth for d=1 (loose check)
        kernel = gaussian_kernel()
        prof = build_band_profile(8, 1, 2.0, kernel)
        ratio = prof.sigma_star ** 2 / (kernel.sup_norm / 2.0)
        assert 0.5 < ratio < 1.5
        assert np.allclose(prof.p_matrix.sum(axis=1), 1.0, atol=1e-12)

    def test_full_support_kernel_degenerates_to_uniform(self):
        # d=2, L=3, bandwidth L/2 with the open unit ball covering the torus
        prof = build_band_profile(3, 2, 1.5, flat_kernel())
        assert prof.n == 9
        assert np.allclose(prof.p_matrix, 1.0 / 9.0, atol=1e-12)

    def test_grid_kernel_sigma_star(self):
        prof = build_band_profile(8, 1, 2.0, grid_kernel())
        assert sigma_star(prof) == pytest.approx(1 / math.sqrt(3))

    def test_bandwidth_exceeds_half_period(self):
        with pytest.raises(ProfileError, match="bandwidth"):
            build_band_profile(4, 1, 3.0, flat_kernel())


class TestDRegular:
    def test_all_ones(self):
        prof = build_dregular_profile(4, np.ones((4, 4), dtype=int))
        assert np.allclose(prof.sigma, 0.5)

    def test_cycle(self):
        prof = build_dregular_profile(6, cycle_adjacency(6))
        assert prof.sigma[0, 1] == pytest.approx(1 / math.sqrt(2))
        assert prof.sigma[0, 3] == 0.0
        assert np.allclose(prof.p_matrix.sum(axis=1), 1.0)

    def test_sigma_star_d9(self):
        psi = np.ones((9, 9), dtype=int)
        prof = build_dregular_profile(9, psi)
        assert sigma_star(prof) == pytest.approx(1 / 3)

    def test_irregular_rejected(self):
        psi = np.ones((4, 4), dtype=int)
        psi[3, 0] = psi[0, 3] = 0
        with pytest.raises(ProfileError, match="not regular"):
            build_dregular_profile(4, psi)


class TestChiral:
    def test_identity_block(self):
        prof = build_chiral_profile(np.eye(2))
        assert prof.n == 4
        p = prof.p_matrix
        assert np.allclose(p.sum(axis=0), 1.0)
        assert np.allclose(p.sum(axis=1), 1.0)

    def test_uniform_block(self):
        prof = build_chiral_profile(np.full((2, 2), 1 / math.sqrt(2)))
        assert prof.sigma[0, 2] == pytest.approx(1 / math.sqrt(2))
        assert prof.sigma[0, 1] == 0.0

    def test_bad_row_norm(self):
        phi = np.eye(2)
        phi[0, 0] = math.sqrt(0.9)
        with pytest.raises(ProfileError):
            build_chiral_profile(phi)


class TestMarkovPowers:
    def test_uniform_idempotent(self):
        prof = build_uniform_profile(16)
        for k in (1, 2, 5):
            assert markov_power_entry(prof, k, 3, 11) == pytest.approx(1 / 16)

    def test_k1_is_sigma_squared(self):
        prof = build_band_profile(4, 1, 2.0, flat_kernel())
        assert markov_power_entry(prof, 1, 0, 1) == pytest.approx(prof.p_matrix[0, 1])

    def test_cycle_two_step_return(self):
        prof = build_dregular_profile(6, cycle_adjacency(6))
        # brute-force square as independent oracle
        p2 = prof.p_matrix @ prof.p_matrix
        assert markov_power_entry(prof, 2, 0, 0) == pytest.approx(p2[0, 0])
        assert markov_power_entry(prof, 2, 0, 0) == pytest.approx(0.5)

    def test_index_errors(self):
        prof = build_uniform_profile(4)
        with pytest.raises(IndexError):
            markov_power_entry(prof, 1, 4, 0)


class TestLimitParams:
    def test_uniform_closed_forms(self):
        n, a = 256, 2.0
        prof = build_uniform_profile(n)
        law = make_entry_law("gaussian")
        params = compute_limit_params(prof, [0], a, law, tol=1e-14)
        assert params.g[0, 0] == pytest.approx(1 / (a ** 2 * (a ** 2 - 1)), abs=1e-10)
        assert params.chi[0] == pytest.approx(1 / a ** 2, abs=1e-12)
        # finite-size sum includes the diagonal entry with fourth moment 12
        expected_tau = (3 * (n - 1) + 12) / (n * a ** 2)
        assert params.tau[0] == pytest.approx(expected_tau, abs=1e-12)
        assert params.sigma_tilde[0, 0] == pytest.approx(1.0)

    def test_truncation_soundness(self):
        prof = build_band_profile(16, 1, 4.0, gaussian_kernel())
        law = make_entry_law("gaussian")
        tol = 1e-10
        p1 = compute_limit_params(prof, [0, 5], 1.5, law, tol=tol)
        # recompute with five extra powers: changes bounded by tol
        import bbp_lab.profile as pm

        orig = pm._series_truncation

        def longer(a, t):
            return orig(a, t) + 5

        pm._series_truncation = longer
        try:
            p2 = compute_limit_params(prof, [0, 5], 1.5, law, tol=tol)
        finally:
            pm._series_truncation = orig
        assert np.abs(p1.g - p2.g).max() < tol

    def test_symmetry_and_q_rows(self):
        prof = build_band_profile(16, 1, 4.0, gaussian_kernel())
        law = make_entry_law("gaussian")
        u = np.linalg.qr(np.random.default_rng(5).standard_normal((2, 2)))[0]
        params = compute_limit_params(prof, [2, 9], 2.0, law, u=u, q=2)
        assert np.allclose(params.g, params.g.T)
        assert np.allclose(params.sigma_tilde, params.sigma_tilde.T)
        assert np.allclose(params.q_rows @ params.q_rows.T, np.eye(2), atol=1e-10)

    def test_subcritical_rejected(self):
        prof = build_uniform_profile(8)
        law = make_entry_law("gaussian")
        with pytest.raises(ProfileError, match="a > 1"):
            compute_limit_params(prof, [0], 1.0, law)

    def test_sigma_tilde_peak_is_one(self):
        prof = build_uniform_profile(8)
        law = make_entry_law("gaussian")
        params = compute_limit_params(prof, [3], 2.0, law)
        assert params.sigma_tilde[0, 0] == pytest.approx(1.0)


class TestSerialization:
    @pytest.mark.parametrize(
        "prof",
        [
            build_uniform_profile(6),
            build_band_profile(8, 1, 2.0, gaussian_kernel()),
            build_dregular_profile(6, cycle_adjacency(6)),
            build_chiral_profile(np.eye(3)),
            build_custom_profile(np.full((4, 4), 0.5)),
        ],
        ids=["uniform", "band", "dregular", "chiral", "custom"],
    )
    def test_round_trip(self, prof):
        doc = profile_to_json(prof)
        back = profile_from_json(doc)
        assert back.kind == prof.kind
        assert back.n == prof.n
        assert np.allclose(back.sigma, prof.sigma, atol=1e-12)

    def test_custom_requires_rows(self):
        with pytest.raises(ProfileError, match="sigma_rows"):
            profile_from_json(json.dumps({"kind": "custom", "n": 2, "params": {}}))

    def test_invariant_validation_on_load(self):
        bad = json.dumps(
            {"kind": "custom", "n": 2, "params": {}, "sigma_rows": [[1.0, 0.0], [0.5, 0.5]]}
        )
        with pytest.raises(ProfileError):
            profile_from_json(bad)
