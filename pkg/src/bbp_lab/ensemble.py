"""Sampling of deformed inhomogeneous random matrices.

The model is X = sigma o W + A: a Wigner matrix W with symmetric entries
(unit off-diagonal variance; diagonal variance 2 real / 1 complex), damped
entrywise by a variance profile and shifted by a deterministic rank-r
matrix A supported on r rows/columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .profile import VarianceProfile

__all__ = [
    "EnsembleError",
    "EntryLaw",
    "make_entry_law",
    "ENTRY_LAW_NAMES",
    "Deformation",
    "rank_one",
    "SampledMatrix",
    "sample_wigner",
    "assemble_deformed",
    "embed_deformation",
    "sample_spectrum",
    "derive_seed",
]

ENTRY_LAW_NAMES = ("gaussian", "rademacher", "uniform_symmetric")


class EnsembleError(ValueError):
    """Invalid ensemble construction or sampling request."""


def derive_seed(master: int, index: int) -> int:
    """Per-trial seed: splitmix64-style hash of (master, index).

    Gives reproducible, independent-looking streams for embarrassingly
    parallel trials without coordinating generator state.
    """
    z = (master * 0x9E3779B97F4A7C15 + index + 0x632BE59BD9B4E019) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


@dataclass(frozen=True)
class EntryLaw:
    """A symmetric entry distribution with queryable moments.

    Off-diagonal entries have E|W|^2 = 1 (and E W^2 = 0 when beta = 2);
    diagonal entries are real with variance 2 (beta = 1) or 1 (beta = 2).
    ``gamma`` is the smallest constant with E|W|^(2k) <= gamma**(k-1)(2k-1)!!
    over both entry types for k = 2..10.
    """

    name: str
    beta: int
    fourth_moment_offdiag: float
    fourth_moment_diag: float
    sixth_moment_offdiag: float
    sixth_moment_diag: float
    gamma: float
    _sample_offdiag: Callable[[np.random.Generator, int], np.ndarray] = field(repr=False)
    _sample_diag: Callable[[np.random.Generator, int], np.ndarray] = field(repr=False)

    def sample_offdiag(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self._sample_offdiag(rng, size)

    def sample_diag(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self._sample_diag(rng, size)


def _double_factorial(m: int) -> int:
    out = 1
    for v in range(m, 0, -2):
        out *= v
    return out


def _gamma_constant(moments_2k: dict[int, float]) -> float:
    """Least gamma covering E|W|^(2k) <= gamma**(k-1) (2k-1)!! for given moments."""
    best = 1.0
    for k, m2k in moments_2k.items():
        if k < 2:
            continue
        bound = (m2k / _double_factorial(2 * k - 1)) ** (1.0 / (k - 1))
        best = max(best, bound)
    return best


def _uniform_even_moment(c: float, k: int) -> float:
    """E X^(2k) for X ~ Uniform[-c, c]."""
    return c ** (2 * k) / (2 * k + 1)


def make_entry_law(name: str, beta: int = 1) -> EntryLaw:
    """Build one of the three concrete entry laws.

    gaussian: N(0,1) off-diagonal (complex: (x+iy)/sqrt(2)); rademacher:
    fair signs; uniform_symmetric: Uniform[-sqrt(3), sqrt(3)], whose fourth
    moment 9/5 != 3 exercises the non-universal part of the fluctuation law.
    Diagonal entries are rescaled to variance 2 (beta=1) or 1 (beta=2).
    """
    if beta not in (1, 2):
        raise EnsembleError("beta must be 1 or 2")
    diag_scale = math.sqrt(2.0) if beta == 1 else 1.0

    if name == "gaussian":
        if beta == 1:
            off = lambda rng, m: rng.standard_normal(m)
            m4_off, m6_off = 3.0, 15.0
        else:
            off = lambda rng, m: (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / math.sqrt(2.0)
            m4_off, m6_off = 2.0, 6.0  # E|CN(0,1)|^(2k) = k!
        diag = lambda rng, m: diag_scale * rng.standard_normal(m)
        m4_diag = 3.0 * diag_scale ** 4
        m6_diag = 15.0 * diag_scale ** 6
        gam = _gamma_constant({k: diag_scale ** (2 * k) * _double_factorial(2 * k - 1) for k in range(2, 11)})
    elif name == "rademacher":
        if beta == 1:
            off = lambda rng, m: rng.integers(0, 2, m) * 2.0 - 1.0
            m4_off = m6_off = 1.0
        else:
            off = lambda rng, m: ((rng.integers(0, 2, m) * 2.0 - 1.0)
                                  + 1j * (rng.integers(0, 2, m) * 2.0 - 1.0)) / math.sqrt(2.0)
            m4_off = m6_off = 1.0  # |W| = 1 surely
        diag = lambda rng, m: diag_scale * (rng.integers(0, 2, m) * 2.0 - 1.0)
        m4_diag = diag_scale ** 4
        m6_diag = diag_scale ** 6
        gam = _gamma_constant({k: diag_scale ** (2 * k) for k in range(2, 11)})
    elif name == "uniform_symmetric":
        c = math.sqrt(3.0)
        if beta == 1:
            off = lambda rng, m: rng.uniform(-c, c, m)
            m4_off = _uniform_even_moment(c, 2)  # 9/5
            m6_off = _uniform_even_moment(c, 3)  # 27/7
        else:
            c2 = math.sqrt(1.5)
            off = lambda rng, m: rng.uniform(-c2, c2, m) + 1j * rng.uniform(-c2, c2, m)
            # E|W|^4 = 2 E xi^4 + 2 (E xi^2)^2 with xi ~ U[-c2, c2]
            m4_off = 2 * _uniform_even_moment(c2, 2) + 2 * 0.25
            m6_off = (2 * _uniform_even_moment(c2, 3)
                      + 6 * _uniform_even_moment(c2, 2) * 0.5)
        cd = c * diag_scale
        diag = lambda rng, m: rng.uniform(-cd, cd, m)
        m4_diag = _uniform_even_moment(cd, 2)
        m6_diag = _uniform_even_moment(cd, 3)
        gam = _gamma_constant({k: _uniform_even_moment(cd, k) for k in range(2, 11)})
    else:
        raise EnsembleError(f"unknown entry law {name!r}; choose from {ENTRY_LAW_NAMES}")

    return EntryLaw(
        name=name,
        beta=beta,
        fourth_moment_offdiag=m4_off,
        fourth_moment_diag=m4_diag,
        sixth_moment_offdiag=m6_off,
        sixth_moment_diag=m6_diag,
        gamma=gam,
        _sample_offdiag=off,
        _sample_diag=diag,
    )


@dataclass(frozen=True)
class Deformation:
    """Rank-r shift: the reduced matrix a_tilde placed at the given sites.

    Eigenvalues are stored in descending order with ``eigvecs`` the unitary
    U such that a_tilde = U* diag(eigenvalues) U.
    """

    positions: tuple[int, ...]
    a_tilde: np.ndarray
    eigenvalues: np.ndarray = field(init=False)
    eigvecs: np.ndarray = field(init=False)

    def __post_init__(self):
        pos = tuple(int(p) for p in self.positions)
        if len(set(pos)) != len(pos):
            raise EnsembleError("deformation positions must be distinct")
        at = np.asarray(self.a_tilde)
        r = len(pos)
        if at.shape != (r, r):
            raise EnsembleError(f"a_tilde must be {r}x{r}")
        if np.abs(at - at.conj().T).max() > 1e-12:
            raise EnsembleError("a_tilde must be Hermitian")
        at = 0.5 * (at + at.conj().T)
        if np.iscomplexobj(at) and np.abs(at.imag).max() == 0:
            at = at.real.copy()
        w, v = np.linalg.eigh(at)  # at = v diag(w) v*
        order = np.argsort(w)[::-1]
        w = w[order]
        v = v[:, order]
        at.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "a_tilde", at)
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigvecs", v.conj().T)  # rows are eigenvectors

    @property
    def rank(self) -> int:
        return len(self.positions)

    @property
    def op_norm(self) -> float:
        return float(np.abs(self.eigenvalues).max()) if self.rank else 0.0

    def eigenvector_embedded(self, n: int, index: int = 0) -> np.ndarray:
        """Unit eigenvector of the embedded A for the index-th eigenvalue."""
        vec = np.zeros(n, dtype=self.a_tilde.dtype)
        vec[list(self.positions)] = self.eigvecs[index].conj()
        return vec


def rank_one(position: int, a: float) -> Deformation:
    """Convenience constructor for a single spike of strength a."""
    return Deformation(positions=(position,), a_tilde=np.array([[float(a)]]))


@dataclass(frozen=True)
class SampledMatrix:
    """A Hermitian draw, reproducible from (shape of the config, seed)."""

    n: int
    beta: int
    entries: np.ndarray
    seed: int

    def __post_init__(self):
        ent = self.entries
        if ent.shape != (self.n, self.n):
            raise EnsembleError("entries must be n x n")
        if not np.array_equal(ent, ent.conj().T):
            raise EnsembleError("entries must be exactly Hermitian")


def sample_wigner(n: int, law: EntryLaw, beta: int = 1, seed: int = 0) -> SampledMatrix:
    """Draw a Wigner matrix: independent upper triangle, mirrored exactly."""
    if n < 1:
        raise EnsembleError("n must be >= 1")
    if beta != law.beta:
        raise EnsembleError(f"law was built for beta={law.beta}, requested beta={beta}")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, k=1)
    off = law.sample_offdiag(rng, len(iu[0]))
    diag = law.sample_diag(rng, n)
    dtype = complex if beta == 2 else float
    W = np.zeros((n, n), dtype=dtype)
    W[iu] = off
    W = W + W.conj().T
    W[np.diag_indices(n)] = diag
    return SampledMatrix(n=n, beta=beta, entries=W, seed=seed)


def embed_deformation(deformation: Deformation | None, n: int, dtype=float) -> np.ndarray:
    """Dense N x N matrix with a_tilde placed at the deformation sites."""
    A = np.zeros((n, n), dtype=dtype)
    if deformation is None or deformation.rank == 0:
        return A
    pos = list(deformation.positions)
    if max(pos) >= n:
        raise EnsembleError("deformation positions exceed matrix size")
    A[np.ix_(pos, pos)] = deformation.a_tilde
    return A


def assemble_deformed(
    profile: VarianceProfile,
    wigner: SampledMatrix,
    deformation: Deformation | None = None,
) -> SampledMatrix:
    """X = sigma o W + A with A embedded at the deformation positions."""
    if profile.n != wigner.n:
        raise EnsembleError(f"profile size {profile.n} != wigner size {wigner.n}")
    if deformation is not None and deformation.rank > 0:
        if np.iscomplexobj(deformation.a_tilde) and wigner.beta == 1:
            raise EnsembleError("complex deformation requires beta = 2")
    X = profile.sigma * wigner.entries
    if deformation is not None and deformation.rank > 0:
        pos = list(deformation.positions)
        if max(pos) >= profile.n:
            raise EnsembleError("deformation positions exceed matrix size")
        X[np.ix_(pos, pos)] += deformation.a_tilde
    # Hermitize exactly: sigma * W is Hermitian up to float representation,
    # and the mirrored triangles were built from identical products.
    return SampledMatrix(n=profile.n, beta=wigner.beta, entries=X, seed=wigner.seed)


def sample_spectrum(
    profile: VarianceProfile,
    law: EntryLaw,
    beta: int = 1,
    deformation: Deformation | None = None,
    seed: int = 0,
    check_residual: bool = False,
) -> np.ndarray:
    """All eigenvalues of one draw of X, in descending order.

    With ``check_residual`` the extreme eigenpairs are validated against
    ||Xv - lambda v|| <= 1e-8 ||X||.
    """
    W = sample_wigner(profile.n, law, beta, seed)
    X = assemble_deformed(profile, W, deformation)
    try:
        if check_residual:
            vals, vecs = np.linalg.eigh(X.entries)
            norm = max(abs(vals[0]), abs(vals[-1]), 1e-300)
            for idx in (0, len(vals) - 1):
                res = np.linalg.norm(X.entries @ vecs[:, idx] - vals[idx] * vecs[:, idx])
                if res > 1e-8 * norm:
                    raise EnsembleError(
                        f"eigenpair residual {res:.3e} exceeds tolerance (seed={seed})"
                    )
        else:
            vals = np.linalg.eigvalsh(X.entries)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EnsembleError(f"eigensolver failed for seed {seed}: {exc}") from exc
    return vals[::-1]
