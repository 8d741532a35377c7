"""Tree-and-chain reduction of surface graphs to their diagram cores.

The reduction deletes pendant trees (moving any marked point on a tree to
the vertex where the tree attaches) and then dissolves unmarked divalent
vertices by merging their two incident edges, accumulating segment counts.
It preserves the surface topology: Euler characteristic, boundary-circle
count, and orientability are unchanged.  What remains has every unmarked
vertex of degree at least 3 and every marked vertex of degree at least 2,
except that a face whose sides are entirely glued into a tree collapses to
a bare marked vertex (a point component).
"""

from __future__ import annotations

from dataclasses import dataclass

from .surface import BOUNDARY, INTERIOR, CombinatoricsError, Edge, RibbonGraph

__all__ = ["Diagram", "okounkov_contract", "classify_diagram", "DiagramClassification"]


@dataclass(frozen=True)
class Diagram(RibbonGraph):
    """A contracted surface graph.

    Shares the RibbonGraph structure; ``orientable_flag`` carries the
    orientability of the parent gluing (the parity data does not survive
    contraction).  Face walks may be empty for point components.
    """

    orientable_flag: bool = True

    @property
    def orientable(self) -> bool:  # type: ignore[override]
        return self.orientable_flag

    def edge_face_multiplicity(self) -> list[dict[int, int]]:
        """For each face, how many times each edge occurs on its walk."""
        out = []
        for walk in self.face_walks:
            mult: dict[int, int] = {}
            for eid, _ in walk:
                mult[eid] = mult.get(eid, 0) + 1
            out.append(mult)
        return out

    def point_faces(self) -> list[int]:
        """Faces whose walk contracted away entirely."""
        return [f for f, walk in enumerate(self.face_walks) if not walk]


def _tail(edges: dict[int, list], eid: int, d: int) -> int:
    e = edges[eid]
    return e[0] if d > 0 else e[1]


def _head(edges: dict[int, list], eid: int, d: int) -> int:
    e = edges[eid]
    return e[1] if d > 0 else e[0]


def okounkov_contract(graph: RibbonGraph) -> Diagram:
    """Contract a glued-polygon graph to its diagram.

    Idempotent up to relabeling: contracting a Diagram leaves its canonical
    form unchanged.
    """
    edges: dict[int, list] = {
        i: [e.u, e.v, e.kind, e.segments] for i, e in graph.edges.items()
    }
    walks: list[list[tuple[int, int]]] = [list(w) for w in graph.face_walks]
    marks: list[int] = list(graph.marks)
    alive = set(range(graph.num_vertices))

    def degree(v: int) -> int:
        return sum((e[0] == v) + (e[1] == v) for e in edges.values())

    _prune_pendants(edges, walks, marks, alive, degree)
    _dissolve_divalent(edges, walks, marks, alive, degree)

    # Compact vertex and edge ids deterministically.
    vmap = {old: new for new, old in enumerate(sorted(alive))}
    order = sorted(edges.items(), key=lambda kv: (kv[1][0], kv[1][1], kv[1][2], kv[0]))
    emap = {old: new for new, (old, _) in enumerate(order)}
    final_edges = {
        emap[old]: Edge(u=vmap[e[0]], v=vmap[e[1]], kind=e[2], segments=e[3])
        for old, e in edges.items()
    }
    final_walks = tuple(tuple((emap[eid], d) for eid, d in walk) for walk in walks)

    diagram = Diagram(
        num_faces=graph.num_faces,
        perimeters=graph.perimeters,
        edges=final_edges,
        face_walks=final_walks,
        marks=tuple(vmap[m] for m in marks),
        num_vertices=len(alive),
        glue_parities=(),
        orientable_flag=graph.orientable,
    )
    diagram.validate_walks()
    _validate_diagram(diagram)
    return diagram


def _prune_pendants(edges, walks, marks, alive, degree) -> None:
    """Delete degree-1 vertices with their pendant edges until none remain.

    A pendant edge's two sides are consecutive in one face walk (the walk
    enters the leaf and immediately bounces back), so each deletion is a
    local splice.  Marks on a deleted leaf move to its neighbor.
    """
    changed = True
    while changed:
        changed = False
        for v in list(alive):
            if v not in alive or degree(v) != 1:
                continue
            eid = next(i for i, e in edges.items() if v in (e[0], e[1]))
            e = edges[eid]
            if e[2] != INTERIOR:
                raise CombinatoricsError("pendant boundary edge: corrupt structure")
            u = e[1] if e[0] == v else e[0]
            pos = [
                (f, idx)
                for f, walk in enumerate(walks)
                for idx, (wid, _) in enumerate(walk)
                if wid == eid
            ]
            if len(pos) != 2 or pos[0][0] != pos[1][0]:
                raise CombinatoricsError("pendant edge sides not on one face")
            f = pos[0][0]
            i0, i1 = pos[0][1], pos[1][1]
            n = len(walks[f])
            if not ((i0 + 1) % n == i1 or (i1 + 1) % n == i0):
                raise CombinatoricsError("pendant edge sides not adjacent in walk")
            del walks[f][max(i0, i1)]
            del walks[f][min(i0, i1)]
            del edges[eid]
            alive.discard(v)
            for m_idx, m in enumerate(marks):
                if m == v:
                    marks[m_idx] = u
            changed = True


def _dissolve_divalent(edges, walks, marks, alive, degree) -> None:
    """Merge the two edges at every unmarked divalent vertex."""
    marked_set = set(marks)
    changed = True
    while changed:
        changed = False
        for v in list(alive):
            if v not in alive or v in marked_set or degree(v) != 2:
                continue
            inc = [i for i, e in edges.items() if v in (e[0], e[1])]
            if len(inc) == 1:
                raise CombinatoricsError(
                    "unmarked circle component: loop at unmarked divalent vertex"
                )
            e1, e2 = inc
            k1, k2 = edges[e1][2], edges[e2][2]
            if k1 != k2:
                raise CombinatoricsError("divalent vertex mixing boundary and interior")
            x = edges[e1][1] if edges[e1][0] == v else edges[e1][0]
            y = edges[e2][1] if edges[e2][0] == v else edges[e2][0]
            new_id = max(edges) + 1
            edges[new_id] = [x, y, k1, edges[e1][3] + edges[e2][3]]

            for f in range(len(walks)):
                walk = walks[f]
                if not any(eid in (e1, e2) for eid, _ in walk):
                    continue
                # Walks are linear sequences anchored at the marked corner,
                # whose tail vertex is the (marked) anchor; since v is
                # unmarked, no passage through v wraps around the anchor.
                out: list[tuple[int, int]] = []
                idx = 0
                while idx < len(walk):
                    step = walk[idx]
                    if _head(edges, *step) == v:
                        if idx + 1 >= len(walk):
                            raise CombinatoricsError(
                                "passage through unmarked vertex wraps the anchor"
                            )
                        nxt = walk[idx + 1]
                        start = _tail(edges, *step)
                        end = _head(edges, *nxt)
                        if x == y:
                            # merged edge is a loop; orient by which side enters
                            new_d = +1 if step[0] == e1 else -1
                        else:
                            new_d = +1 if (start, end) == (x, y) else -1
                        out.append((new_id, new_d))
                        idx += 2
                    else:
                        out.append(step)
                        idx += 1
                walks[f] = out
            del edges[e1], edges[e2]
            alive.discard(v)
            changed = True


def _validate_diagram(d: Diagram) -> None:
    degs = d.degrees()
    marked = set(d.marks)
    for v in range(d.num_vertices):
        if v in marked:
            if degs[v] == 1:
                raise CombinatoricsError(f"marked vertex {v} kept degree 1")
        elif degs[v] < 3:
            raise CombinatoricsError(f"unmarked vertex {v} has degree {degs[v]} < 3")


@dataclass(frozen=True)
class DiagramClassification:
    trivalent: bool
    marks_distinct: bool
    typical: bool
    counts: dict
    saturates_edge_bound: bool


def classify_diagram(d: Diagram) -> DiagramClassification:
    """Degree profile, edge/vertex counts, and the typical/trivalent flags.

    ``trivalent``: every unmarked vertex has degree exactly 3 and every
    marked vertex degree exactly 2 (vacuously true for the bare circle).
    ``typical``: trivalent with no interior vertices and all marked points
    on the boundary; equivalently |E_b| = 2 |E_int| + s.
    ``saturates_edge_bound``: equality in |E_b| + 3 |V_int| <= 2 |E_int| + s.
    """
    degs = d.degrees()
    marked = set(d.marks)
    b_vertices = d.boundary_vertices()
    n_eb = len(d.boundary_edges())
    n_ei = len(d.interior_edges())
    n_vb = len(b_vertices)
    n_vi = d.num_vertices - n_vb
    s = d.num_faces

    trivalent = all(
        (degs[v] == 2 if v in marked else degs[v] == 3) for v in range(d.num_vertices)
    )
    marks_distinct = len(marked) == len(d.marks)
    typical = trivalent and n_vi == 0 and all(m in b_vertices for m in d.marks)
    saturates = (n_eb + 3 * n_vi) == (2 * n_ei + s)
    counts = {
        "V": d.num_vertices,
        "E": len(d.edges),
        "V_b": n_vb,
        "V_int": n_vi,
        "E_b": n_eb,
        "E_int": n_ei,
        "s": s,
    }
    if typical != (n_eb == 2 * n_ei + s):
        raise CombinatoricsError(f"typicality characterizations disagree: {counts}")
    return DiagramClassification(
        trivalent=trivalent,
        marks_distinct=marks_distinct,
        typical=typical,
        counts=counts,
        saturates_edge_bound=saturates,
    )
