"""Exhaustive gluing enumeration, diagram canonicalization, count bounds.

Diagrams are deduplicated by a canonical key: the face walks encoded from
their marked-corner anchors, with edges and vertices renamed in
first-appearance order and each edge's direction normalized so its first
traversal reads forward.  Faces are labeled (the trace product fixes their
order) and walks are anchored, so neither face permutations nor walk
rotations are quotiented; this is exactly the equivalence under which each
diagram's segment-and-tree expansion counts its gluing pre-images once.
"""

from __future__ import annotations

import math
from itertools import combinations, product
from typing import Iterator

from .contraction import Diagram, okounkov_contract
from .surface import CombinatoricsError, RibbonGraph, glue_polygons

__all__ = [
    "canonical_key",
    "enumerate_gluings",
    "diagrams_for",
    "enumerate_small_diagrams",
    "trivalent_count_bound",
]

MAX_TOTAL_PERIMETER = 10


def canonical_key(d: RibbonGraph) -> tuple:
    """Isomorphism-invariant encoding of a (possibly contracted) graph.

    Walks are read from their anchors; labels are assigned in order of first
    appearance, so the key is invariant under renaming but distinguishes
    marked-corner placement.
    """
    edge_names: dict[int, int] = {}
    edge_flip: dict[int, int] = {}
    vert_names: dict[int, int] = {}

    def vname(v: int) -> int:
        if v not in vert_names:
            vert_names[v] = len(vert_names)
        return vert_names[v]

    body = []
    for walk in d.face_walks:
        if not walk:
            body.append(("pointface",))
            continue
        steps = []
        for eid, dirn in walk:
            e = d.edges[eid]
            tail = e.u if dirn > 0 else e.v
            if eid not in edge_names:
                edge_names[eid] = len(edge_names)
                edge_flip[eid] = dirn  # first traversal becomes +1
            steps.append((edge_names[eid], dirn * edge_flip[eid], vname(tail)))
        body.append(tuple(steps))
    kinds = tuple(
        d.edges[orig].kind for _, orig in sorted((v, k) for k, v in edge_names.items())
    )
    marks = tuple(vname(m) for m in d.marks)
    return (tuple(body), kinds, marks, d.num_vertices)


def _pairings(items: list[int]) -> Iterator[list[tuple[int, int]]]:
    """All perfect matchings of an even-sized list."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, partner in enumerate(rest):
        remaining = rest[:i] + rest[i + 1 :]
        for sub in _pairings(remaining):
            yield [(first, partner)] + sub


def enumerate_gluings(
    perimeters: list[int], beta: int = 1
) -> Iterator[RibbonGraph]:
    """Every gluing of the labeled polygons: all glued subsets, pairings, and
    (for beta = 1) per-pair side orientations."""
    k = sum(perimeters)
    if k > MAX_TOTAL_PERIMETER:
        raise CombinatoricsError(
            f"total perimeter {k} exceeds enumeration budget {MAX_TOTAL_PERIMETER}"
        )
    sides = list(range(k))
    orient_options = ("opposite", "same") if beta == 1 else ("opposite",)
    for size in range(0, k + 1, 2):
        for subset in combinations(sides, size):
            for pairing in _pairings(list(subset)):
                for orients in product(orient_options, repeat=len(pairing)):
                    yield glue_polygons(perimeters, pairing, list(orients))


_DIAGRAMS_CACHE: dict[tuple, list[Diagram]] = {}


def diagrams_for(perimeters: list[int], beta: int = 1) -> list[Diagram]:
    """Distinct diagrams arising from all gluings of the given polygons."""
    cache_key = (tuple(perimeters), beta)
    if cache_key in _DIAGRAMS_CACHE:
        return _DIAGRAMS_CACHE[cache_key]
    seen: dict[tuple, Diagram] = {}
    for graph in enumerate_gluings(perimeters, beta):
        diag = okounkov_contract(graph)
        key = canonical_key(diag)
        if key not in seen:
            seen[key] = diag
    out = list(seen.values())
    _DIAGRAMS_CACHE[cache_key] = out
    return out


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_small_diagrams(
    k_budget: int,
    s: int,
    beta: int = 1,
    connected_only: bool = False,
    require_boundary: bool = False,
) -> list[Diagram]:
    """Distinct diagrams from all gluings of s polygons with total perimeter
    at most k_budget, optionally filtered to connected diagrams or to those
    with at least one boundary edge on every face."""
    if k_budget > MAX_TOTAL_PERIMETER:
        raise CombinatoricsError(
            f"budget {k_budget} exceeds enumeration cap {MAX_TOTAL_PERIMETER}"
        )
    seen: dict[tuple, Diagram] = {}
    for total in range(s, k_budget + 1):
        for perim in _compositions(total, s):
            for graph in enumerate_gluings(list(perim), beta):
                diag = okounkov_contract(graph)
                key = canonical_key(diag)
                if key in seen:
                    continue
                seen[key] = diag
    out = list(seen.values())
    if connected_only:
        out = [d for d in out if d.connected]
    if require_boundary:
        out = [
            d
            for d in out
            if all(
                any(d.edges[eid].kind == "boundary" for eid, _ in walk)
                for walk in d.face_walks
            )
            and not d.point_faces()
        ]
    return out


def trivalent_count_bound(g: int, t: int, s: int) -> float:
    """Upper bound on the number of connected trivalent diagrams with genus
    parameter g, t boundary circles, and s faces:

        128**(g+t+2s) * (g+t+2s)**(g+t+3s-3) / (s-1)!

    evaluated in log space to dodge overflow.
    """
    if g < 0 or t < 1 or s < 1:
        raise CombinatoricsError("need g >= 0, t >= 1, s >= 1")
    base = g + t + 2 * s
    log_val = (
        base * math.log(128.0)
        + (g + t + 3 * s - 3) * math.log(base)
        - math.lgamma(s)
    )
    return math.exp(log_val) if log_val < 700 else math.inf
