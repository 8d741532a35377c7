"""Exact joint trace moments for small deformed Gaussian ensembles, the
diagram-function evaluation that must reproduce them, and the exact
combinatorial identities behind the tree counting.

The brute-force oracle expands E[prod_j Tr X^{k_j}] for real Gaussian X =
sigma o W + A directly: a sum over the positions carrying noise factors,
their pairings (the Gaussian moment factorization), and all index labelings.
It never touches the graph machinery, so agreement with the summed diagram
functions is a genuine two-route check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .combinatorics.contraction import Diagram
from .ensemble import Deformation, embed_deformation
from .profile import VarianceProfile

__all__ = [
    "WickError",
    "exact_moment_oracle",
    "oracle_expansion_check",
    "diagram_function",
    "sum_diagram_functions",
    "catalan",
    "catalan_tree_count",
    "binom_identity_check",
    "connected_cumulants",
    "cumulants_to_moments",
    "dominating_function",
    "dominating_function_direct",
    "dominating_sum",
]

ORACLE_GRID_CAP = 1 << 21


class WickError(ValueError):
    """Invalid exact-computation request."""


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def _cyclic_successor(k_list: list[int]) -> list[int]:
    """Successor map of the disjoint cycles (one per trace factor)."""
    gamma = []
    start = 0
    for k in k_list:
        for i in range(k):
            gamma.append(start + (i + 1) % k)
        start += k
    return gamma


def _pairings_of(items: tuple[int, ...]) -> list[list[tuple[int, int]]]:
    if not items:
        return [[]]
    first, rest = items[0], items[1:]
    out = []
    for i in range(len(rest)):
        partner = rest[i]
        remaining = rest[:i] + rest[i + 1 :]
        for sub in _pairings_of(remaining):
            out.append([(first, partner)] + sub)
    return out


def exact_moment_oracle(
    profile: VarianceProfile,
    deformation: Deformation | None,
    k_list: list[int],
) -> float:
    """E[prod_j Tr X^{k_j}] for the real Gaussian ensemble, exactly.

    Cost is N**k times the number of (noise subset, pairing) choices; the
    index grid is capped so requests stay within brute-force territory.
    """
    k = sum(k_list)
    N = profile.n
    if k < 0 or any(kj < 1 for kj in k_list):
        raise WickError("trace powers must be positive")
    if N > 8 or k > 8:
        raise WickError(f"oracle budget is N <= 8 and total power <= 8 (got N={N}, k={k})")
    if N ** k > ORACLE_GRID_CAP:
        raise WickError(f"index grid N**k = {N**k} exceeds cap {ORACLE_GRID_CAP}")

    gamma = _cyclic_successor(k_list)
    sigma2 = profile.p_matrix
    A = embed_deformation(deformation, N)

    # eta[j] for all labelings, vectorized: eta has shape (k, N**k)
    eta = np.indices((N,) * k).reshape(k, -1)

    total = 0.0
    positions = tuple(range(k))
    for size in range(0, k + 1, 2):
        for J in combinations(positions, size):
            rest = [p for p in positions if p not in J]
            base = np.ones(eta.shape[1])
            for j in rest:
                base = base * A[eta[j], eta[gamma[j]]]
            if not np.any(base):
                continue
            for pairing in _pairings_of(J):
                term = base.copy()
                for (s, t) in pairing:
                    es, egs = eta[s], eta[gamma[s]]
                    et, egt = eta[t], eta[gamma[t]]
                    cov = sigma2[es, egs] * (
                        ((es == egt) & (et == egs)).astype(float)
                        + ((egt == egs) & (es == et)).astype(float)
                    )
                    term = term * cov
                total += term.sum()
    return float(total)


def oracle_expansion_check(
    profile: VarianceProfile,
    deformation: Deformation | None,
    k_list: list[int],
    a: float,
    beta: int = 1,
) -> dict:
    """Both routes to rho_a**(-k) E[prod Tr X^{k_j}]: oracle vs diagram sum."""
    rho = a + 1.0 / a
    k = sum(k_list)
    lhs = rho ** (-k) * exact_moment_oracle(profile, deformation, k_list)
    rhs = sum_diagram_functions(profile, deformation, k_list, a, beta=beta)
    return {"oracle": lhs, "diagram_sum": rhs, "abs_err": abs(lhs - rhs)}


# ---------------------------------------------------------------------------
# Diagram functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _DiagramWeights:
    p_pows: list[np.ndarray]  # P**n, index n (0 unused)
    a_pows: list[np.ndarray]  # A**n, possibly entrywise-absolute


def _matrix_powers(m: np.ndarray, nmax: int, absolute: bool = False) -> list[np.ndarray]:
    out: list[np.ndarray] = [np.eye(m.shape[0])]
    cur = np.eye(m.shape[0])
    for _ in range(nmax):
        cur = cur @ m
        out.append(np.abs(cur) if absolute else cur.copy())
    return out


def _segment_assignments(
    diagram: Diagram, k_list: list[int]
) -> list[tuple[dict[int, int], float]]:
    """All admissible segment counts n_e >= 1 with their face tree weights.

    A face of perimeter k_j carrying n_j segment-sides (interior edges on
    its walk count once per traversal) admits C(k_j, (k_j - n_j)/2) pendant
    -tree completions; parity failures contribute zero and are skipped.
    """
    mult = diagram.edge_face_multiplicity()
    edge_ids = sorted(diagram.edges)
    nonpoint_faces = [f for f, walk in enumerate(diagram.face_walks) if walk]

    results: list[tuple[dict[int, int], float]] = []
    assignment: dict[int, int] = {}

    def face_load(f: int) -> int:
        return sum(mult[f].get(e, 0) * assignment.get(e, 0) for e in mult[f])

    def recurse(pos: int) -> None:
        if pos == len(edge_ids):
            weight = 1.0
            for f in nonpoint_faces:
                kj = k_list[f]
                nj = face_load(f)
                if nj > kj or (kj - nj) % 2:
                    return
                weight *= math.comb(kj, (kj - nj) // 2)
            results.append((dict(assignment), weight))
            return
        e = edge_ids[pos]
        cap = min(
            (k_list[f] - face_load(f)) // mult[f][e]
            for f in nonpoint_faces
            if e in mult[f]
        )
        for n in range(1, cap + 1):
            assignment[e] = n
            recurse(pos + 1)
        assignment.pop(e, None)

    recurse(0)
    return results


def diagram_function(
    diagram: Diagram,
    profile: VarianceProfile,
    deformation: Deformation | None,
    k_list: list[int],
    a: float,
    use_absolute: bool = False,
) -> float:
    """Exact weight of one diagram in the trace-moment expansion.

    Sums over all segment subdivisions and vertex labelings: interior edges
    carry multi-step transition weights p_n, boundary edges carry entries of
    A**n (entrywise absolute value for the dominating variant), faces carry
    the pendant-tree binomials, all divided by rho_a**k.  A face contracted
    to a bare point contributes N * Catalan(k_j / 2).
    """
    s = len(k_list)
    if s != diagram.num_faces:
        raise WickError(f"diagram has {diagram.num_faces} faces, k_list has {s}")
    N = profile.n
    rho = a + 1.0 / a
    k = sum(k_list)

    point_factor = 1.0
    for f in diagram.point_faces():
        kj = k_list[f]
        if kj % 2:
            return 0.0
        point_factor *= N * catalan(kj // 2)

    edge_ids = sorted(diagram.edges)
    if not edge_ids:
        return rho ** (-k) * point_factor

    nmax = max(k_list)
    weights = _DiagramWeights(
        p_pows=_matrix_powers(profile.p_matrix, nmax),
        a_pows=_matrix_powers(embed_deformation(deformation, N), nmax, absolute=use_absolute),
    )

    # Vertices touched by edges; bare marked vertices are the point factors.
    verts = sorted({v for e in diagram.edges.values() for v in (e.u, e.v)})
    vpos = {v: i for i, v in enumerate(verts)}

    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if len(verts) > len(letters):
        raise WickError("diagram too large for labeling contraction")

    total = 0.0
    for assignment, tree_weight in _segment_assignments(diagram, k_list):
        operands = []
        subs = []
        for eid in edge_ids:
            e = diagram.edges[eid]
            n = assignment[eid]
            mat = weights.p_pows[n] if e.kind == "interior" else weights.a_pows[n]
            operands.append(mat)
            subs.append(letters[vpos[e.u]] + letters[vpos[e.v]])
        expr = ",".join(subs) + "->"
        total += tree_weight * float(np.einsum(expr, *operands, optimize=True))
    return rho ** (-k) * total * point_factor


def sum_diagram_functions(
    profile: VarianceProfile,
    deformation: Deformation | None,
    k_list: list[int],
    a: float,
    beta: int = 1,
) -> float:
    """Sum of diagram functions over all distinct diagrams of these faces."""
    from .combinatorics.enumeration import diagrams_for

    total = 0.0
    for diag in diagrams_for(list(k_list), beta=beta):
        total += diagram_function(diag, profile, deformation, list(k_list), a)
    return total


# ---------------------------------------------------------------------------
# Exact identities
# ---------------------------------------------------------------------------


def catalan(n: int) -> int:
    return math.comb(2 * n, n) // (n + 1)


def catalan_tree_count(k: int, n: int) -> tuple[int, int]:
    """Weighted composition count of pendant-tree sizes vs its closed form.

    lhs = sum over (u_1..u_n >= 0) with sum u_i = (k - n)/2 of
    (2 u_1 + 1) prod C(u_i); rhs = C(k, (k-n)/2).  Parity failures return
    (0, 0).  Both sides are exact integers.
    """
    if not (1 <= n <= k):
        raise WickError("need 1 <= n <= k")
    if (k - n) % 2:
        return (0, 0)
    budget = (k - n) // 2
    lhs = 0

    def compositions(total: int, parts: int):
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    for comp in compositions(budget, n):
        term = 2 * comp[0] + 1
        for u in comp:
            term *= catalan(u)
        lhs += term
    rhs = math.comb(k, budget)
    return (lhs, rhs)


def binom_identity_check(k: int, n: int, a: float) -> tuple[float, float]:
    """P(Binom(k, a^2/(a^2+1)) = (k+n)/2) against rho_a**(-k) a**n C(k,(k-n)/2)."""
    if a <= 0:
        raise WickError("a must be positive")
    if not (0 <= n <= k):
        raise WickError("need 0 <= n <= k")
    if (k - n) % 2:
        return (0.0, 0.0)
    p = a ** 2 / (a ** 2 + 1.0)
    m = (k + n) // 2
    lhs = math.comb(k, m) * p ** m * (1 - p) ** (k - m)
    rho = a + 1.0 / a
    rhs = rho ** (-k) * a ** n * math.comb(k, (k - n) // 2)
    return (lhs, rhs)


# ---------------------------------------------------------------------------
# Connected cumulants
# ---------------------------------------------------------------------------


def _set_partitions(items: tuple[int, ...]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for sub in _set_partitions(rest):
        for i in range(len(sub)):
            yield sub[:i] + [[first] + sub[i]] + sub[i + 1 :]
        yield [[first]] + sub


def _block_key(k_tuple: tuple[int, ...], block: list[int]) -> tuple[int, ...]:
    return tuple(sorted(k_tuple[i] for i in block))


def connected_cumulants(moment_table: dict[tuple, float]) -> dict[tuple, float]:
    """Partition-inversion of joint moments into connected parts.

    Keys are sorted tuples of trace powers; the table must contain every
    sub-tuple of every key.  T(single) = moment(single); larger tuples
    subtract all products of T over proper partitions.
    """
    keys = sorted(moment_table, key=lambda t: (len(t), t))
    T: dict[tuple, float] = {}
    for key in keys:
        idx = tuple(range(len(key)))
        total = moment_table[key]
        for partition in _set_partitions(idx):
            if len(partition) == 1:
                continue
            prod = 1.0
            try:
                for block in partition:
                    prod *= T[_block_key(key, block)]
            except KeyError as exc:
                raise WickError(f"moment table missing sub-tuple {exc}") from exc
            total -= prod
        T[tuple(sorted(key))] = total
    return T


def cumulants_to_moments(T: dict[tuple, float], key: tuple) -> float:
    """Inverse relation: moment(key) = sum over all partitions of prod T."""
    idx = tuple(range(len(key)))
    total = 0.0
    for partition in _set_partitions(idx):
        prod = 1.0
        for block in partition:
            prod *= T[_block_key(key, block)]
        total += prod
    return total


# ---------------------------------------------------------------------------
# Dominating function
# ---------------------------------------------------------------------------


def dominating_function(g: int, t: int, s: int, xi: float, a: float, lam: float = 1.0) -> float:
    """Per-(g, t) dominating weight, evaluated in log space:

    (2 xi s)**(2g+2t+2s-4) * (2 lam a^2/(a^2-1))**(3g+3t+4s-6)
        * 2048**(g+t+2s) / (g+t)!
    """
    if g < 0 or t < 1 or s < 1:
        raise WickError("need g >= 0, t >= 1, s >= 1")
    if a <= 1 or lam < 1 or xi <= 0:
        raise WickError("need a > 1, lam >= 1, xi > 0")
    e1 = 2 * g + 2 * t + 2 * s - 4
    e2 = 3 * g + 3 * t + 4 * s - 6
    log_val = (
        e1 * math.log(2 * xi * s)
        + e2 * math.log(2 * lam * a * a / (a * a - 1))
        + (g + t + 2 * s) * math.log(2048.0)
        - math.lgamma(g + t + 1)
    )
    return math.exp(log_val)


def dominating_function_direct(g: int, t: int, s: int, xi: float, a: float, lam: float = 1.0) -> float:
    """Same value by direct products; cross-checks the log-space route."""
    e1 = 2 * g + 2 * t + 2 * s - 4
    e2 = 3 * g + 3 * t + 4 * s - 6
    return (
        (2 * xi * s) ** e1
        * (2 * lam * a * a / (a * a - 1)) ** e2
        * 2048.0 ** (g + t + 2 * s)
        / math.factorial(g + t)
    )


def dominating_sum(
    s: int, xi: float, a: float, lam: float = 1.0, max_gt: int = 200
) -> dict:
    """Partial sums of the dominating weights over g >= 0, t >= 1.

    Returns the total up to g + t <= max_gt together with the mass of the
    last shell, whose ratio to the total certifies convergence (the (g+t)!
    in the denominator beats the exponentials).
    """
    total = 0.0
    last_shell = 0.0
    for gt in range(1, max_gt + 1):
        shell = 0.0
        for t in range(1, gt + 1):
            g = gt - t
            shell += dominating_function(g, t, s, xi, a, lam)
        total += shell
        last_shell = shell
    return {
        "total": total,
        "last_shell": last_shell,
        "tail_ratio": last_shell / total if total > 0 else 0.0,
    }
