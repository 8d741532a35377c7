import math

import numpy as np
import pytest

from bbp_lab.ensemble import (
    ENTRY_LAW_NAMES,
    Deformation,
    EnsembleError,
    assemble_deformed,
    derive_seed,
    embed_deformation,
    make_entry_law,
    rank_one,
    sample_spectrum,
    sample_wigner,
)
from bbp_lab.profile import build_uniform_profile


def double_factorial(m):
    out = 1
    for v in range(m, 0, -2):
        out *= v
    return out


class TestEntryLaws:
    @pytest.mark.parametrize("name", ENTRY_LAW_NAMES)
    @pytest.mark.parametrize("beta", [1, 2])
    def test_moment_normalization(self, name, beta):
        law = make_entry_law(name, beta)
        rng = np.random.default_rng(99)
        n = 10 ** 6
        off = law.sample_offdiag(rng, n)
        diag = law.sample_diag(rng, n)
        # symmetry: sample mean within 4 / sqrt(n) of zero (per component)
        assert abs(off.real.mean()) <= 4 / math.sqrt(n)
        if beta == 2:
            assert abs(off.imag.mean()) <= 4 / math.sqrt(n)
        assert abs(diag.mean()) <= 4 / math.sqrt(n) * math.sqrt(2)

        # variance normalization
        v_off = np.mean(np.abs(off) ** 2)
        assert v_off == pytest.approx(1.0, abs=5 * 3 / math.sqrt(n))
        v_diag = diag.var()
        target_diag = 2.0 if beta == 1 else 1.0
        assert v_diag == pytest.approx(target_diag, abs=5 * 6 / math.sqrt(n))
        if beta == 2:
            # E W^2 = 0 for complex off-diagonal entries
            assert abs(np.mean(off ** 2)) <= 5 * 2 / math.sqrt(n)

        # fourth moments match the stored constants within 5 standard errors
        m4 = np.abs(off) ** 4
        se4 = m4.std() / math.sqrt(n)
        assert np.mean(m4) == pytest.approx(law.fourth_moment_offdiag, abs=max(5 * se4, 1e-12))
        m4d = diag ** 4
        se4d = m4d.std() / math.sqrt(n)
        assert np.mean(m4d) == pytest.approx(law.fourth_moment_diag, abs=max(5 * se4d, 1e-12))

    @pytest.mark.parametrize("name", ENTRY_LAW_NAMES)
    @pytest.mark.parametrize("beta", [1, 2])
    def test_subgaussian_moment_bound(self, name, beta):
        # E|W|^(2k) <= gamma^(k-1) (2k-1)!! for k = 2, 3, from stored moments
        law = make_entry_law(name, beta)
        for k, m_off, m_diag in (
            (2, law.fourth_moment_offdiag, law.fourth_moment_diag),
            (3, law.sixth_moment_offdiag, law.sixth_moment_diag),
        ):
            bound = law.gamma ** (k - 1) * double_factorial(2 * k - 1)
            assert m_off <= bound * (1 + 1e-12)
            assert m_diag <= bound * (1 + 1e-12)

    def test_uniform_symmetric_fourth_moment_value(self):
        law = make_entry_law("uniform_symmetric", 1)
        assert law.fourth_moment_offdiag == pytest.approx(9 / 5)

    def test_unknown_law(self):
        with pytest.raises(EnsembleError):
            make_entry_law("cauchy")


class TestSampleWigner:
    def test_scalar_gaussian_variance(self):
        law = make_entry_law("gaussian")
        draws = np.array(
            [sample_wigner(1, law, seed=derive_seed(7, t)).entries[0, 0] for t in range(10 ** 5)]
        )
        assert 1.94 <= draws.var() <= 2.06

    def test_rademacher_support(self):
        law = make_entry_law("rademacher")
        w = sample_wigner(2, law, seed=3).entries
        assert w[0, 1] in (-1.0, 1.0)
        assert abs(w[0, 0]) == pytest.approx(math.sqrt(2))
        assert abs(w[1, 1]) == pytest.approx(math.sqrt(2))

    @pytest.mark.parametrize("name", ENTRY_LAW_NAMES)
    @pytest.mark.parametrize("beta", [1, 2])
    def test_exact_hermitian(self, name, beta):
        law = make_entry_law(name, beta)
        w = sample_wigner(17, law, beta, seed=11).entries
        assert np.array_equal(w, w.conj().T)

    def test_reproducible(self):
        law = make_entry_law("gaussian")
        a = sample_wigner(32, law, seed=123).entries
        b = sample_wigner(32, law, seed=123).entries
        assert np.array_equal(a, b)
        c = sample_wigner(32, law, seed=124).entries
        assert not np.array_equal(a, c)

    def test_beta_mismatch(self):
        law = make_entry_law("gaussian", 1)
        with pytest.raises(EnsembleError, match="beta"):
            sample_wigner(4, law, beta=2, seed=0)


class TestDeformation:
    def test_eigendecomposition_convention(self):
        at = np.array([[1.0, 0.5], [0.5, -0.2]])
        defo = Deformation(positions=(1, 3), a_tilde=at)
        u = defo.eigvecs
        rebuilt = u.conj().T @ np.diag(defo.eigenvalues) @ u
        assert np.allclose(rebuilt, at, atol=1e-10)
        assert defo.eigenvalues[0] >= defo.eigenvalues[1]

    def test_embedding_rank_and_norm(self):
        defo = Deformation(positions=(0, 2), a_tilde=np.array([[2.0, 1.0], [1.0, 0.5]]))
        a = embed_deformation(defo, 6)
        assert np.linalg.matrix_rank(a) <= 2
        assert np.linalg.norm(a, 2) == pytest.approx(defo.op_norm)

    def test_embedded_eigenvector(self):
        defo = Deformation(positions=(1, 4), a_tilde=np.array([[2.0, 0.3], [0.3, 1.0]]))
        n = 8
        a = embed_deformation(defo, n)
        for idx in range(2):
            q = defo.eigenvector_embedded(n, idx)
            assert np.linalg.norm(q) == pytest.approx(1.0)
            assert np.allclose(a @ q, defo.eigenvalues[idx] * q, atol=1e-10)

    def test_duplicate_positions(self):
        with pytest.raises(EnsembleError, match="distinct"):
            Deformation(positions=(1, 1), a_tilde=np.eye(2))

    def test_non_hermitian(self):
        with pytest.raises(EnsembleError, match="Hermitian"):
            Deformation(positions=(0, 1), a_tilde=np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestAssemble:
    def test_zero_deformation(self):
        prof = build_uniform_profile(8)
        law = make_entry_law("gaussian")
        w = sample_wigner(8, law, seed=5)
        x = assemble_deformed(prof, w)
        assert np.allclose(x.entries, prof.sigma * w.entries)

    def test_zero_noise_rank_one_spectrum(self):
        prof = build_uniform_profile(6)
        law = make_entry_law("gaussian")
        w = sample_wigner(6, law, seed=5)
        zeroed = type(w)(n=6, beta=1, entries=np.zeros((6, 6)), seed=0)
        x = assemble_deformed(prof, zeroed, rank_one(0, 2.0))
        vals = np.sort(np.linalg.eigvalsh(x.entries))[::-1]
        assert vals[0] == pytest.approx(2.0)
        assert np.allclose(vals[1:], 0.0, atol=1e-14)

    def test_two_by_two_hand_arithmetic(self):
        prof = build_uniform_profile(2)
        law = make_entry_law("gaussian")
        w = sample_wigner(2, law, seed=9)
        defo = Deformation(positions=(0, 1), a_tilde=np.diag([2.0, -1.0]))
        x = assemble_deformed(prof, w, defo).entries
        s = 1 / math.sqrt(2)
        expect = s * w.entries + np.diag([2.0, -1.0])
        assert np.allclose(x, expect)

    def test_size_mismatch(self):
        prof = build_uniform_profile(4)
        law = make_entry_law("gaussian")
        w = sample_wigner(5, law, seed=1)
        with pytest.raises(EnsembleError, match="size"):
            assemble_deformed(prof, w)


class TestSpectrum:
    def test_n1_trivial(self):
        prof = build_uniform_profile(1)
        law = make_entry_law("gaussian")
        w = sample_wigner(1, law, seed=2)
        spec = sample_spectrum(prof, law, seed=2)
        assert spec[0] == pytest.approx(float(w.entries[0, 0]))

    def test_trace_identity(self):
        prof = build_uniform_profile(32)
        law = make_entry_law("gaussian")
        spec = sample_spectrum(prof, law, deformation=rank_one(0, 2.0), seed=4)
        w = sample_wigner(32, law, seed=4)
        x = assemble_deformed(prof, w, rank_one(0, 2.0))
        norm = max(abs(spec[0]), abs(spec[-1]))
        assert spec.sum() == pytest.approx(np.trace(x.entries), abs=1e-8 * 32 * norm)

    def test_descending_and_residual(self):
        prof = build_uniform_profile(16)
        law = make_entry_law("gaussian")
        spec = sample_spectrum(prof, law, seed=8, check_residual=True)
        assert all(spec[i] >= spec[i + 1] for i in range(len(spec) - 1))

    def test_permutation_invariance(self):
        # permuting positions together with conjugating a_tilde by the same
        # permutation leaves the spectrum unchanged
        prof = build_uniform_profile(6)
        law = make_entry_law("gaussian")
        at = np.array([[2.0, 0.7], [0.7, 1.0]])
        perm = np.array([[0.0, 1.0], [1.0, 0.0]])
        d1 = Deformation(positions=(1, 4), a_tilde=at)
        d2 = Deformation(positions=(4, 1), a_tilde=perm @ at @ perm)
        s1 = sample_spectrum(prof, law, deformation=d1, seed=13)
        s2 = sample_spectrum(prof, law, deformation=d2, seed=13)
        assert np.allclose(s1, s2, atol=1e-12)


class TestSeeds:
    def test_derive_seed_spread(self):
        seeds = {derive_seed(42, t) for t in range(10000)}
        assert len(seeds) == 10000

    def test_derive_seed_deterministic(self):
        assert derive_seed(7, 3) == derive_seed(7, 3)
        assert derive_seed(7, 3) != derive_seed(8, 3)
