"""Surface graphs built by gluing labeled polygons edge-to-edge.

A graph lives on a compact surface with boundary: s labeled polygonal faces,
glued along a pairing of their directed sides.  Unglued sides become
boundary edges (the surface boundary is the union of the circles they
form); glued sides become interior edges.  In the real-symmetry case each
pair may be glued with opposite or equal side directions; equal-direction
gluings can make the surface non-orientable.

The whole combinatorial structure is carried by the face walks: for each
face, the sequence of (edge id, traversal direction) around the face,
stored as a linear list anchored at the face's marked corner.  The anchor
matters: two graphs whose walks differ by a rotation are different objects
(their marked points sit at different corners), and the moment expansion
counts them separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = ["CombinatoricsError", "Edge", "RibbonGraph", "glue_polygons"]

BOUNDARY = "boundary"
INTERIOR = "interior"


class CombinatoricsError(ValueError):
    """Invalid gluing data or corrupted graph structure."""


@dataclass(frozen=True)
class Edge:
    """One edge class; (u, v) are endpoints in the canonical direction."""

    u: int
    v: int
    kind: str  # BOUNDARY or INTERIOR
    segments: int = 1  # polygon sides merged into this edge by contraction

    def other(self, w: int) -> int:
        if w == self.u:
            return self.v
        if w == self.v:
            return self.u
        raise CombinatoricsError(f"vertex {w} not an endpoint of {self}")


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[ry] = rx


@dataclass(frozen=True)
class RibbonGraph:
    """Faces, edges, vertices, and marked points of a glued-polygon graph.

    ``face_walks[j]`` lists (edge_id, direction) steps around face j,
    anchored so the first step leaves face j's marked corner; ``marks[j]``
    is the vertex at that corner.  Derived topology (boundary circles,
    Euler characteristic, genus parameter, orientability) is computed per
    connected component and exposed both per-component and aggregated.
    """

    num_faces: int
    perimeters: tuple[int, ...]
    edges: dict[int, Edge]
    face_walks: tuple[tuple[tuple[int, int], ...], ...]
    marks: tuple[int, ...]
    num_vertices: int
    glue_parities: tuple[tuple[int, int, int], ...] = field(default=())
    # (face_a, face_b, parity) per glued pair: parity 0 = opposite, 1 = same

    # -- basic structure ---------------------------------------------------

    def vertex_ids(self) -> range:
        return range(self.num_vertices)

    def degree(self, v: int) -> int:
        deg = 0
        for e in self.edges.values():
            deg += (e.u == v) + (e.v == v)
        return deg

    def degrees(self) -> list[int]:
        deg = [0] * self.num_vertices
        for e in self.edges.values():
            deg[e.u] += 1
            deg[e.v] += 1
        return deg

    def boundary_edges(self) -> list[int]:
        return [i for i, e in self.edges.items() if e.kind == BOUNDARY]

    def interior_edges(self) -> list[int]:
        return [i for i, e in self.edges.items() if e.kind == INTERIOR]

    def boundary_vertices(self) -> set[int]:
        out = set()
        for i in self.boundary_edges():
            e = self.edges[i]
            out.update((e.u, e.v))
        return out

    def walk_vertices(self, face: int) -> list[int]:
        """Vertex visited ahead of each step of the face walk."""
        out = []
        for eid, d in self.face_walks[face]:
            e = self.edges[eid]
            out.append(e.u if d > 0 else e.v)
        return out

    def validate_walks(self) -> None:
        """Each walk must chain head-to-tail and close up cyclically."""
        counts = {i: 0 for i in self.edges}
        for f, walk in enumerate(self.face_walks):
            if not walk:
                continue
            for idx, (eid, d) in enumerate(walk):
                e = self.edges[eid]
                counts[eid] += 1
                head = e.v if d > 0 else e.u
                nid, nd = walk[(idx + 1) % len(walk)]
                ne = self.edges[nid]
                tail_next = ne.u if nd > 0 else ne.v
                if head != tail_next:
                    raise CombinatoricsError(
                        f"face {f} walk breaks at step {idx}: {head} != {tail_next}"
                    )
        for i, c in counts.items():
            want = 1 if self.edges[i].kind == BOUNDARY else 2
            if c != want:
                raise CombinatoricsError(
                    f"edge {i} ({self.edges[i].kind}) appears {c} times in walks, wants {want}"
                )

    # -- topology ----------------------------------------------------------

    def components(self) -> list[dict]:
        """Connected components with per-component topological invariants.

        Each dict has vertex/edge/face sets plus t (boundary circles),
        chi = V - E + s, and the genus parameter g = 2 - t - chi (which
        counts handles twice and cross-caps once).
        """
        uf = _UnionFind(self.num_vertices)
        for e in self.edges.values():
            uf.union(e.u, e.v)
        comp_of = {}
        for v in range(self.num_vertices):
            comp_of.setdefault(uf.find(v), []).append(v)

        face_comp = {}
        for f in range(self.num_faces):
            wv = self.walk_vertices(f)
            anchor = wv[0] if wv else self.marks[f]
            face_comp[f] = uf.find(anchor)

        comps = []
        for root, verts in comp_of.items():
            vset = set(verts)
            eset = {i for i, e in self.edges.items() if uf.find(e.u) == root}
            fset = {f for f, r in face_comp.items() if r == root}
            if not fset and not eset and len(vset) == 1:
                # vertex created by gluing but carrying no face: impossible by
                # construction; keep defensive.
                continue
            t = self._count_boundary_circles(vset, eset)
            chi = len(vset) - len(eset) + len(fset)
            comps.append(
                {
                    "vertices": vset,
                    "edges": eset,
                    "faces": fset,
                    "t": t,
                    "chi": chi,
                    "g": 2 - t - chi,
                }
            )
        return comps

    def _count_boundary_circles(self, vset: set[int], eset: set[int]) -> int:
        bedges = [i for i in eset if self.edges[i].kind == BOUNDARY]
        if not bedges:
            return 0
        adj: dict[int, list[int]] = {}
        for i in bedges:
            e = self.edges[i]
            adj.setdefault(e.u, []).append(i)
            adj.setdefault(e.v, []).append(i)
        for v, inc in adj.items():
            if len(inc) != 2:
                raise CombinatoricsError(
                    f"boundary vertex {v} has boundary-degree {len(inc)}, not 2"
                )
        seen: set[int] = set()
        circles = 0
        for start in bedges:
            if start in seen:
                continue
            circles += 1
            stack = [start]
            seen.add(start)
            while stack:
                i = stack.pop()
                e = self.edges[i]
                for w in (e.u, e.v):
                    for nxt in adj[w]:
                        if nxt not in seen:
                            seen.add(nxt)
                            stack.append(nxt)
        return circles

    @property
    def t(self) -> int:
        return sum(c["t"] for c in self.components())

    @property
    def euler_characteristic(self) -> int:
        return self.num_vertices - len(self.edges) + self.num_faces

    @property
    def genus_parameter(self) -> int:
        """Aggregate g = sum over components of (2 - t_c - chi_c)."""
        return sum(c["g"] for c in self.components())

    @property
    def is_closed(self) -> bool:
        return not self.boundary_edges()

    @property
    def connected(self) -> bool:
        return len(self.components()) == 1

    @property
    def orientable(self) -> bool:
        """2-colorability of faces under the gluing parity constraints."""
        color = {}
        adj: dict[int, list[tuple[int, int]]] = {f: [] for f in range(self.num_faces)}
        for fa, fb, parity in self.glue_parities:
            if fa == fb:
                if parity == 1:
                    return False
                continue
            adj[fa].append((fb, parity))
            adj[fb].append((fa, parity))
        for f in range(self.num_faces):
            if f in color:
                continue
            color[f] = 0
            stack = [f]
            while stack:
                cur = stack.pop()
                for nxt, parity in adj[cur]:
                    want = color[cur] ^ parity
                    if nxt not in color:
                        color[nxt] = want
                        stack.append(nxt)
                    elif color[nxt] != want:
                        return False
        return True


def glue_polygons(
    perimeters: list[int],
    pairing: list[tuple[int, int]],
    orientations: list[str] | None = None,
    marked_corners: list[int] | None = None,
) -> RibbonGraph:
    """Glue s labeled polygons along a pairing of their directed sides.

    Sides are numbered 0..k-1 consecutively around face 0, then face 1, etc;
    side c runs from corner c to the cyclically next corner of its face.
    ``pairing`` lists disjoint side pairs to glue; remaining sides stay on
    the boundary.  ``orientations`` gives per pair "opposite" (head-to-tail,
    the only option allowed in the complex-Hermitian setting) or "same".
    ``marked_corners`` picks the marked corner of each face (default: its
    first corner).
    """
    s = len(perimeters)
    if s < 1 or any(p < 1 for p in perimeters):
        raise CombinatoricsError("need at least one face, all perimeters >= 1")
    k = sum(perimeters)
    face_start = [0] * s
    for f in range(1, s):
        face_start[f] = face_start[f - 1] + perimeters[f - 1]

    face_of = [0] * k
    for f in range(s):
        for c in range(face_start[f], face_start[f] + perimeters[f]):
            face_of[c] = f

    def gamma(c: int) -> int:
        f = face_of[c]
        base = face_start[f]
        return base + (c - base + 1) % perimeters[f]

    if orientations is None:
        orientations = ["opposite"] * len(pairing)
    if len(orientations) != len(pairing):
        raise CombinatoricsError("orientations must match pairing length")
    used = set()
    for (i, j) in pairing:
        for c in (i, j):
            if not 0 <= c < k:
                raise CombinatoricsError(f"side {c} out of range [0, {k})")
            if c in used:
                raise CombinatoricsError(f"side {c} glued twice")
            used.add(c)
        if i == j:
            raise CombinatoricsError("cannot glue a side to itself")

    uf = _UnionFind(k)
    for (i, j), orient in zip(pairing, orientations):
        if orient == "opposite":
            uf.union(i, gamma(j))
            uf.union(j, gamma(i))
        elif orient == "same":
            uf.union(i, j)
            uf.union(gamma(i), gamma(j))
        else:
            raise CombinatoricsError(f"unknown orientation {orient!r}")

    labels: dict[int, int] = {}

    def vclass(c: int) -> int:
        root = uf.find(c)
        if root not in labels:
            labels[root] = len(labels)
        return labels[root]

    edges: dict[int, Edge] = {}
    side_edge: dict[int, tuple[int, int]] = {}  # side -> (edge_id, direction)
    parities = []
    next_id = 0
    for (i, j), orient in zip(pairing, orientations):
        e = Edge(u=vclass(i), v=vclass(gamma(i)), kind=INTERIOR)
        edges[next_id] = e
        side_edge[i] = (next_id, +1)
        side_edge[j] = (next_id, -1 if orient == "opposite" else +1)
        parities.append((face_of[i], face_of[j], 0 if orient == "opposite" else 1))
        next_id += 1
    for c in range(k):
        if c not in used:
            edges[next_id] = Edge(u=vclass(c), v=vclass(gamma(c)), kind=BOUNDARY)
            side_edge[c] = (next_id, +1)
            next_id += 1

    if marked_corners is None:
        marked_corners = list(face_start)
    marks = []
    walks = []
    for f, c in enumerate(marked_corners):
        if face_of[c] != f:
            raise CombinatoricsError(f"marked corner {c} is not on face {f}")
        marks.append(vclass(c))
        # Anchor the stored walk at the marked corner: walks are linear
        # sequences whose first step leaves the marked corner.
        base, p = face_start[f], perimeters[f]
        walks.append(tuple(side_edge[base + (c - base + i) % p] for i in range(p)))

    graph = RibbonGraph(
        num_faces=s,
        perimeters=tuple(perimeters),
        edges=edges,
        face_walks=tuple(walks),
        marks=tuple(marks),
        num_vertices=len(labels),
        glue_parities=tuple(parities),
    )
    graph.validate_walks()
    return graph
