"""Variance profiles for inhomogeneous random matrices.

A variance profile is a symmetric matrix ``sigma`` of entrywise standard
deviations whose entrywise square ``P = sigma**2`` is row-stochastic, so P
doubles as the transition matrix of a random walk on the index set.  The
profiles built here are the standard geometries: band profiles on the
d-dimensional discrete torus, d-regular profiles, chiral (two-block)
profiles, and the flat (uniform) profile.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ProfileError",
    "BandKernel",
    "VarianceProfile",
    "LimitLawParams",
    "gaussian_kernel",
    "flat_kernel",
    "grid_kernel",
    "build_band_profile",
    "build_dregular_profile",
    "build_chiral_profile",
    "build_uniform_profile",
    "build_custom_profile",
    "sigma_star",
    "markov_power_entry",
    "markov_power_row",
    "compute_limit_params",
    "profile_to_json",
    "profile_from_json",
]

ROW_SUM_TOL = 1e-12


class ProfileError(ValueError):
    """Invalid profile construction or query."""


@dataclass(frozen=True)
class BandKernel:
    """Symmetric non-negative kernel f on R^d used by band profiles.

    ``evaluate`` is applied to an (m, d) array of lattice offsets divided by
    the bandwidth and must return an (m,) array of non-negative weights.
    ``sup_norm`` is the peak value of f (used for diagnostics only; the band
    construction normalizes by the lattice sum, not by sup_norm).
    """

    name: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    sup_norm: float
    support_radius: float = math.inf  # f vanishes for max-norm |x| >= radius

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.asarray(self.evaluate(x), dtype=float)
        if np.any(out < 0):
            raise ProfileError(f"kernel {self.name!r} returned negative values")
        return out


def gaussian_kernel() -> BandKernel:
    """Standard Gaussian density, normalized per dimension.

    With a normalized kernel the peak variance of a bandwidth-b profile
    tracks sup_norm**d / b**d, matching the usual sparsity bookkeeping.
    ``sup_norm`` stores the one-dimensional peak 1/sqrt(2 pi).
    """
    return BandKernel(
        name="gaussian",
        evaluate=lambda x: (2 * math.pi) ** (-x.shape[1] / 2)
        * np.exp(-0.5 * np.sum(x * x, axis=1)),
        sup_norm=1.0 / math.sqrt(2 * math.pi),
    )


def flat_kernel() -> BandKernel:
    """Indicator of the open max-norm unit ball."""
    return BandKernel(
        name="flat",
        evaluate=lambda x: (np.max(np.abs(x), axis=1) < 1.0).astype(float),
        sup_norm=1.0,
        support_radius=1.0,
    )


def grid_kernel(points: tuple[float, ...] = (-1.0, 0.0, 1.0)) -> BandKernel:
    """Kernel equal to 1 exactly on a finite symmetric set of 1-d abscissae.

    Convenient for hand-checkable band profiles: with points (-1, 0, 1) and
    bandwidth b, only offsets that are exact multiples of b contribute.
    """
    pts = np.asarray(sorted(points), dtype=float)
    if not np.allclose(pts, -pts[::-1]):
        raise ProfileError("grid kernel points must be symmetric about 0")

    def ev(x: np.ndarray) -> np.ndarray:
        flat = x[:, 0] if x.shape[1] == 1 else np.max(np.abs(x), axis=1)
        return np.isclose(flat[:, None], pts[None, :], atol=1e-12).any(axis=1).astype(float)

    return BandKernel(
        name="grid",
        evaluate=ev,
        sup_norm=1.0,
        support_radius=float(pts[-1]) + 1.0,
    )


_NAMED_KERNELS: dict[str, Callable[[], BandKernel]] = {
    "gaussian": gaussian_kernel,
    "flat": flat_kernel,
    "grid": grid_kernel,
}


@dataclass(frozen=True)
class VarianceProfile:
    """Symmetric standard-deviation matrix with row-stochastic square.

    ``kind`` tags how the profile was built; ``params`` holds the constructor
    arguments needed to rebuild named kinds from JSON.
    """

    n: int
    sigma: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.shape != (self.n, self.n):
            raise ProfileError(f"sigma must be {self.n}x{self.n}, got {sigma.shape}")
        if np.any(sigma < 0):
            raise ProfileError("sigma entries must be non-negative")
        if not np.array_equal(sigma, sigma.T):
            if np.abs(sigma - sigma.T).max() > 1e-14:
                raise ProfileError("sigma must be symmetric")
            sigma = 0.5 * (sigma + sigma.T)
        row_sums = (sigma ** 2).sum(axis=1)
        err = np.abs(row_sums - 1.0).max()
        if err > ROW_SUM_TOL:
            raise ProfileError(
                f"rows of sigma**2 must sum to 1 (max deviation {err:.3e})"
            )
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)

    @property
    def p_matrix(self) -> np.ndarray:
        """Row-stochastic transition matrix P = sigma**2 (entrywise)."""
        return self.sigma ** 2

    @property
    def sigma_star(self) -> float:
        return float(self.sigma.max())


def sigma_star(profile: VarianceProfile) -> float:
    """Largest entry of sigma, the sparsity proxy of the profile."""
    return profile.sigma_star


def build_band_profile(
    L: int,
    d: int,
    bandwidth: float,
    kernel: BandKernel,
    wrap_radius: int = 3,
) -> VarianceProfile:
    """Band profile on the d-dimensional torus Z^d / L with N = L**d sites.

    sigma_ij**2 = (1/M) * sum_n f((x_i - x_j + n*L) / bandwidth) where the
    wrap sum runs over n in Z^d and M normalizes so rows sum to 1.  The wrap
    sum is truncated at max-norm ``wrap_radius`` plus the kernel support
    radius; for rapidly decaying kernels the tail is below double precision.
    """
    if L < 1 or d < 1:
        raise ProfileError("L and d must be positive")
    if bandwidth <= 0:
        raise ProfileError("bandwidth must be positive")
    if bandwidth > L / 2:
        raise ProfileError(f"bandwidth {bandwidth} exceeds L/2 = {L / 2}")
    N = L ** d
    if N > 8192:
        raise ProfileError(f"N = L**d = {N} too large for dense construction")

    radius = wrap_radius
    if math.isfinite(kernel.support_radius):
        radius = max(1, math.ceil(kernel.support_radius * bandwidth / L) + 1)

    coords = np.stack(
        np.meshgrid(*([np.arange(L)] * d), indexing="ij"), axis=-1
    ).reshape(N, d)
    diff = coords[:, None, :] - coords[None, :, :]  # (N, N, d)

    shifts = np.stack(
        np.meshgrid(*([np.arange(-radius, radius + 1)] * d), indexing="ij"),
        axis=-1,
    ).reshape(-1, d)

    s2 = np.zeros((N, N))
    flat_diff = diff.reshape(-1, d).astype(float)
    for n in shifts:
        s2 += kernel((flat_diff + n * L) / bandwidth).reshape(N, N)

    # Normalizer M = sum over the infinite lattice of f(i / bandwidth),
    # truncated consistently with the wrap sum.
    span = int(radius * L + L)
    lattice = np.stack(
        np.meshgrid(*([np.arange(-span, span + 1)] * d), indexing="ij"), axis=-1
    ).reshape(-1, d).astype(float)
    M = float(np.sum(kernel(lattice / bandwidth)))
    if M <= 0:
        raise ProfileError("kernel lattice sum vanished; degenerate kernel")

    s2 /= M
    rows = s2.sum(axis=1)
    if np.any(rows < 1e-300):
        raise ProfileError("kernel mass underflowed to zero for some row")
    # The wrap sum over a full period tiles the lattice, so rows equal 1 up to
    # the truncated tail; renormalize the residual truncation error away.
    s2 /= rows[:, None]
    s2 = 0.5 * (s2 + s2.T)
    return VarianceProfile(
        n=N,
        sigma=np.sqrt(s2),
        kind="band",
        params={
            "L": L,
            "d": d,
            "bandwidth": bandwidth,
            "kernel": kernel.name,
            "wrap_radius": wrap_radius,
        },
    )


def build_dregular_profile(n: int, psi: np.ndarray) -> VarianceProfile:
    """Profile sigma = psi / sqrt(d) from a symmetric 0/1 d-regular matrix."""
    psi = np.asarray(psi)
    if psi.shape != (n, n):
        raise ProfileError(f"psi must be {n}x{n}")
    if not np.array_equal(psi, psi.T):
        raise ProfileError("psi must be symmetric")
    if not np.isin(psi, (0, 1)).all():
        raise ProfileError("psi entries must be 0 or 1")
    degrees = psi.sum(axis=1)
    if degrees.min() != degrees.max():
        raise ProfileError(f"psi is not regular: row sums range {set(degrees.tolist())}")
    dreg = int(degrees[0])
    if dreg < 1:
        raise ProfileError("degree must be at least 1")
    return VarianceProfile(
        n=n, sigma=psi / math.sqrt(dreg), kind="dregular", params={"d": dreg}
    )


def build_chiral_profile(phi: np.ndarray) -> VarianceProfile:
    """Two-block profile [[0, phi], [phi.T, 0]] of even size N = 2 * len(phi).

    Requires every row and column of phi**2 to sum to 1.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise ProfileError("phi must be square")
    if np.any(phi < 0):
        raise ProfileError("phi entries must be non-negative")
    half = phi.shape[0]
    sq = phi ** 2
    if np.abs(sq.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
        raise ProfileError("rows of phi**2 must sum to 1")
    if np.abs(sq.sum(axis=0) - 1.0).max() > ROW_SUM_TOL:
        raise ProfileError("columns of phi**2 must sum to 1")
    sigma = np.zeros((2 * half, 2 * half))
    sigma[:half, half:] = phi
    sigma[half:, :half] = phi.T
    return VarianceProfile(n=2 * half, sigma=sigma, kind="chiral", params={})


def build_uniform_profile(n: int) -> VarianceProfile:
    """Flat profile sigma_ij = 1/sqrt(n)."""
    if n < 1:
        raise ProfileError("n must be positive")
    return VarianceProfile(
        n=n, sigma=np.full((n, n), 1.0 / math.sqrt(n)), kind="uniform", params={}
    )


def build_custom_profile(sigma: np.ndarray) -> VarianceProfile:
    """Wrap an explicit sigma matrix, validating all profile invariants."""
    sigma = np.asarray(sigma, dtype=float)
    return VarianceProfile(n=sigma.shape[0], sigma=sigma, kind="custom", params={})


def markov_power_row(profile: VarianceProfile, k: int, i: int) -> np.ndarray:
    """Row i of P**k by repeated vector-matrix multiplication.

    Each intermediate row is re-checked to sum to 1 within 1e-9, which bounds
    the accumulated drift of the dense products.
    """
    N = profile.n
    if not (0 <= i < N):
        raise IndexError(f"row index {i} out of range [0, {N})")
    if k < 1:
        raise ProfileError("power k must be >= 1")
    P = profile.p_matrix
    row = P[i].copy()
    if abs(row.sum() - 1.0) > 1e-9:
        raise ProfileError("row of P is not stochastic")
    for _ in range(k - 1):
        row = row @ P
        drift = abs(row.sum() - 1.0)
        if drift > 1e-9:
            raise ProfileError(f"stochasticity drifted by {drift:.3e} in P**k")
    return row


def markov_power_entry(profile: VarianceProfile, k: int, i: int, j: int) -> float:
    """Entry (i, j) of P**k (0-based indices)."""
    N = profile.n
    if not (0 <= j < N):
        raise IndexError(f"column index {j} out of range [0, {N})")
    return float(markov_power_row(profile, k, i)[j])


@dataclass(frozen=True)
class LimitLawParams:
    """Finite-N surrogates of the limiting fluctuation parameters.

    ``g`` collects the multi-step return weights of the profile walk between
    the deformation sites, ``sigma_tilde`` the rescaled one-step amplitudes,
    ``chi``/``tau`` the fourth-power column masses without/with the entry
    law's fourth moments, and ``q_rows`` the first q rows of the reduction's
    diagonalizing matrix.
    """

    r: int
    g: np.ndarray
    sigma_tilde: np.ndarray
    chi: np.ndarray
    tau: np.ndarray
    q_rows: np.ndarray
    beta: int
    a: float
    truncation_k: int

    def __post_init__(self):
        for name in ("g", "sigma_tilde"):
            m = getattr(self, name)
            if m.shape != (self.r, self.r):
                raise ProfileError(f"{name} must be {self.r}x{self.r}")
            if np.abs(m - m.T).max() > 1e-10:
                raise ProfileError(f"{name} must be symmetric")
        q = self.q_rows
        gram = q @ q.conj().T
        if np.abs(gram - np.eye(q.shape[0])).max() > 1e-10:
            raise ProfileError("q_rows must have orthonormal rows")
        if self.beta not in (1, 2):
            raise ProfileError("beta must be 1 or 2")

    @property
    def q(self) -> int:
        return self.q_rows.shape[0]

    @property
    def diag_variances(self) -> np.ndarray:
        """Variances tau_i - chi_i of the diagonal Gaussian block."""
        return self.tau - self.chi


def _series_truncation(a: float, tol: float) -> int:
    """Smallest K with a**(-2K) * a**2/(a**2-1) < tol (geometric tail bound)."""
    K = 2
    tail = a ** (-2 * K) * a ** 2 / (a ** 2 - 1.0)
    while tail >= tol:
        K += 1
        tail *= a ** -2
        if K > 100000:
            raise ProfileError("series truncation did not converge")
    return K


def compute_limit_params(
    profile: VarianceProfile,
    positions: list[int],
    a: float,
    law,
    beta: int = 1,
    u: np.ndarray | None = None,
    q: int = 1,
    tol: float = 1e-13,
) -> LimitLawParams:
    """Evaluate the fluctuation-law parameters at finite N.

    ``positions`` are the 0-based deformation sites m_1..m_r; ``a`` is the top
    deformation eigenvalue (must exceed 1, the supercritical regime); ``law``
    supplies fourth moments of the matrix entries; ``u`` is the r x r
    orthogonal/unitary matrix diagonalizing the reduced deformation (identity
    by default) and ``q_rows`` are its first q rows.
    """
    if a <= 1:
        raise ProfileError(f"fluctuation parameters require a > 1, got a = {a}")
    if tol <= 0:
        raise ProfileError("tol must be positive")
    r = len(positions)
    if len(set(positions)) != r:
        raise ProfileError("positions must be distinct")
    N = profile.n
    for m in positions:
        if not (0 <= m < N):
            raise IndexError(f"position {m} out of range [0, {N})")
    if u is None:
        u = np.eye(r)
    u = np.asarray(u)
    if u.shape != (r, r):
        raise ProfileError(f"u must be {r}x{r}")
    if np.abs(u @ u.conj().T - np.eye(r)).max() > 1e-10:
        raise ProfileError("u must be orthogonal/unitary")
    if beta == 1 and np.iscomplexobj(u) and np.abs(u.imag).max() > 0:
        raise ProfileError("u must be real orthogonal when beta = 1")
    if not (1 <= q <= r):
        raise ProfileError(f"q must lie in [1, r], got {q}")

    sigma = profile.sigma
    P = profile.p_matrix
    sstar = profile.sigma_star
    sstar2 = sstar ** 2
    pos = np.asarray(positions)

    K = _series_truncation(a, tol)
    # Rows of P**k at the deformation sites, accumulated once per power.
    rows = P[pos].copy()  # P**1
    g = np.zeros((r, r))
    p2_at_pos = None
    for k in range(2, K + 1):
        rows = rows @ P
        if k == 2:
            p2_at_pos = rows[:, pos].copy()
        g += rows[:, pos] * a ** (-2 * k + 2)
    g -= np.diag(np.diag(p2_at_pos)) * a ** -2
    g /= sstar2
    g = 0.5 * (g + g.T)

    sigma_tilde = sigma[np.ix_(pos, pos)] / sstar

    fourth = np.full(N, law.fourth_moment_offdiag)
    chi = np.empty(r)
    tau = np.empty(r)
    for idx, m in enumerate(pos):
        col4 = sigma[m] ** 4
        chi[idx] = col4.sum() / (sstar2 * a ** 2)
        weights = fourth.copy()
        weights[m] = law.fourth_moment_diag
        tau[idx] = (col4 * weights).sum() / (sstar2 * a ** 2)

    return LimitLawParams(
        r=r,
        g=g,
        sigma_tilde=sigma_tilde,
        chi=chi,
        tau=tau,
        q_rows=np.array(u[:q, :]),
        beta=beta,
        a=a,
        truncation_k=K,
    )


def profile_to_json(profile: VarianceProfile, include_sigma: bool | None = None) -> str:
    """Serialize a profile to JSON.

    Named kinds are stored by their parameters and rebuilt on load; custom
    profiles always carry sigma_rows.  ``include_sigma`` forces carrying the
    raw matrix either way.
    """
    doc: dict = {"kind": profile.kind, "n": profile.n, "params": dict(profile.params)}
    if profile.kind in ("dregular", "chiral", "custom"):
        include_sigma = True
    if include_sigma:
        doc["sigma_rows"] = profile.sigma.tolist()
    return json.dumps(doc)


def profile_from_json(text: str) -> VarianceProfile:
    doc = json.loads(text)
    kind = doc.get("kind")
    params = doc.get("params", {})
    if kind == "band":
        kernel_name = params.get("kernel")
        if kernel_name not in _NAMED_KERNELS:
            raise ProfileError(f"unknown band kernel {kernel_name!r}")
        return build_band_profile(
            L=params["L"],
            d=params["d"],
            bandwidth=params["bandwidth"],
            kernel=_NAMED_KERNELS[kernel_name](),
            wrap_radius=params.get("wrap_radius", 3),
        )
    if kind == "uniform":
        return build_uniform_profile(doc["n"])
    if kind in ("dregular", "chiral", "custom"):
        if "sigma_rows" not in doc:
            raise ProfileError(f"kind {kind!r} requires sigma_rows")
        sigma = np.asarray(doc["sigma_rows"], dtype=float)
        prof = build_custom_profile(sigma)
        return VarianceProfile(n=prof.n, sigma=prof.sigma, kind=kind, params=params)
    raise ProfileError(f"unknown profile kind {kind!r}")
