"""Bounded-degree graphs, windows of infinite graphs, rooted balls and canonical
ball signatures.

Conventions used throughout the package:

* A graph is a finite, simple, undirected graph together with a declared
  degree bound ``d`` (every vertex degree must be <= d, but d may exceed the
  actual maximum degree).
* ``vertex_boundary`` is always the *inner* vertex boundary: the vertices of F
  adjacent to at least one vertex outside F.
* Infinite graphs are only ever represented as :class:`Window` objects: a
  finite host graph, a set of vertices whose neighbourhoods may be incomplete
  (``truncated``), and an ``interior`` that is guaranteed to be more than
  ``margin`` hops away from every truncated vertex.  Operations that would
  need to see past the margin raise :class:`MarginError` instead of silently
  using truncated data.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

__all__ = [
    "Graph",
    "Window",
    "RootedBall",
    "BallSignature",
    "GraphFormatError",
    "MarginError",
    "SizeCapError",
    "vset",
    "load_graph",
    "dump_graph",
    "vertex_boundary",
    "ball",
    "induced_subgraph",
    "canonical_signature",
    "rooted_isomorphic_bruteforce",
    "connected_components",
    "is_connected",
    "set_diameter",
    "host_of",
]

SIGNATURE_SIZE_CAP = 64


class GraphFormatError(ValueError):
    """Malformed graph text or an edge list violating the Graph invariants."""


class MarginError(ValueError):
    """An operation on a Window would depend on vertices past the margin."""


class SizeCapError(ValueError):
    """Input exceeds a configured size cap."""


VertexSet = tuple  # sorted tuple of vertex ids


def vset(ids: Iterable[int], n: int | None = None) -> VertexSet:
    """Normalize an iterable of vertex ids to a strictly increasing tuple."""
    out = tuple(sorted(set(int(i) for i in ids)))
    if out and out[0] < 0:
        raise ValueError("negative vertex id")
    if n is not None and out and out[-1] >= n:
        raise ValueError(f"vertex id {out[-1]} out of range (n={n})")
    return out


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with a declared degree bound.

    ``adjacency`` holds one sorted tuple of neighbours per vertex.  Instances
    are immutable; all operations in this package are pure functions of their
    inputs.
    """

    n: int
    d: int
    adjacency: tuple

    @staticmethod
    def from_edges(n: int, d: int, edges: Iterable[tuple]) -> "Graph":
        if n < 0:
            raise GraphFormatError("vertex count must be >= 0")
        if d < 0:
            raise GraphFormatError("degree bound must be >= 0")
        adj = [set() for _ in range(n)]
        for u, v in edges:
            u = int(u)
            v = int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"edge ({u},{v}): id out of range (n={n})")
            if u == v:
                raise GraphFormatError(f"edge ({u},{v}): loop")
            if v in adj[u]:
                raise GraphFormatError(f"edge ({u},{v}): duplicate edge")
            adj[u].add(v)
            adj[v].add(u)
        for x in range(n):
            if len(adj[x]) > d:
                raise GraphFormatError(
                    f"vertex {x} has degree {len(adj[x])} > bound {d}"
                )
        return Graph(n=n, d=d, adjacency=tuple(tuple(sorted(s)) for s in adj))

    def degree(self, x: int) -> int:
        return len(self.adjacency[x])

    def edges(self):
        for u in range(self.n):
            for v in self.adjacency[u]:
                if u < v:
                    yield (u, v)

    def num_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u]

    def check_vertex(self, x: int) -> None:
        if not (0 <= x < self.n):
            raise ValueError(f"vertex id {x} out of range (n={self.n})")


@dataclass(frozen=True)
class Window:
    """Finite window of an infinite graph.

    ``truncated`` marks host vertices whose neighbour lists may be incomplete.
    Every interior vertex is more than ``margin`` hops from every truncated
    vertex, so any r-ball with r <= margin around an interior vertex is exact.
    """

    host: Graph
    interior: VertexSet
    margin: int
    truncated: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        vset(self.interior, self.host.n)
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        bad = self.truncated.difference(range(self.host.n))
        if bad:
            raise ValueError(f"truncated ids out of range: {sorted(bad)}")
        # margin invariant: BFS from the truncated set must not reach the
        # interior within `margin` hops
        if self.truncated and self.interior:
            interior = set(self.interior)
            dist = {t: 0 for t in self.truncated}
            queue = deque(self.truncated)
            while queue:
                x = queue.popleft()
                if dist[x] >= self.margin:
                    continue
                for y in self.host.adjacency[x]:
                    if y not in dist:
                        dist[y] = dist[x] + 1
                        if y in interior:
                            raise MarginError(
                                f"interior vertex {y} is only {dist[y]} hops "
                                f"from a truncated vertex (margin={self.margin})"
                            )
                        queue.append(y)

    def require_margin(self, r: int) -> None:
        if r > self.margin:
            raise MarginError(f"operation needs margin >= {r}, window has {self.margin}")


def host_of(g) -> Graph:
    """The underlying finite graph of a Graph or Window."""
    return g.host if isinstance(g, Window) else g


def load_graph(text: str) -> Graph:
    """Parse the graph text format: header line ``n d``, then one ``u v`` edge
    per line (0-based ids).  Blank lines and ``#`` comments are ignored."""
    lines = [
        ln.strip()
        for ln in text.splitlines()
        if ln.strip() and not ln.strip().startswith("#")
    ]
    if not lines:
        raise GraphFormatError("empty graph file")
    head = lines[0].split()
    if len(head) != 2:
        raise GraphFormatError(f"bad header {lines[0]!r}, expected 'n d'")
    try:
        n, d = int(head[0]), int(head[1])
    except ValueError as exc:
        raise GraphFormatError(f"bad header {lines[0]!r}") from exc
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise GraphFormatError(f"bad edge line {ln!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise GraphFormatError(f"bad edge line {ln!r}") from exc
    return Graph.from_edges(n, d, edges)


def dump_graph(g: Graph) -> str:
    lines = [f"{g.n} {g.d}"]
    lines.extend(f"{u} {v}" for u, v in g.edges())
    return "\n".join(lines) + "\n"


def vertex_boundary(g: Graph, F: Sequence[int]) -> VertexSet:
    """Inner vertex boundary: the x in F with a neighbour outside F."""
    fs = set(F)
    for x in fs:
        g.check_vertex(x)
    return tuple(
        sorted(x for x in fs if any(y not in fs for y in g.adjacency[x]))
    )


@dataclass(frozen=True)
class RootedBall:
    """BFS ball of radius r, stored as an induced subgraph with local ids.

    ``vertices[i]`` is the host id of local vertex i; the root has local id 0.
    ``dist[i]`` is the BFS distance of local vertex i from the root.
    """

    graph: Graph
    root: int
    radius: int
    dist: tuple
    vertices: tuple

    @property
    def order(self) -> int:
        return self.graph.n

    @property
    def eccentricity(self) -> int:
        return max(self.dist)


def ball(g: Graph, x: int, r: int) -> RootedBall:
    g.check_vertex(x)
    if r < 0:
        raise ValueError("radius must be >= 0")
    dist = {x: 0}
    order = [x]
    queue = deque([x])
    while queue:
        u = queue.popleft()
        if dist[u] >= r:
            continue
        for v in g.adjacency[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                order.append(v)
                queue.append(v)
    local = {h: i for i, h in enumerate(order)}
    edges = [
        (local[u], local[v])
        for u in order
        for v in g.adjacency[u]
        if v in local and local[u] < local[v]
    ]
    sub = Graph.from_edges(len(order), g.d, edges)
    return RootedBall(
        graph=sub,
        root=0,
        radius=r,
        dist=tuple(dist[h] for h in order),
        vertices=tuple(order),
    )


def induced_subgraph(g: Graph, F: Sequence[int]):
    """Induced subgraph on F.  Returns (subgraph, vertices) where vertices[i]
    is the host id of local vertex i."""
    fs = vset(F, g.n)
    local = {h: i for i, h in enumerate(fs)}
    edges = [
        (local[u], local[v])
        for u in fs
        for v in g.adjacency[u]
        if v in local and local[u] < local[v]
    ]
    return Graph.from_edges(len(fs), g.d, edges), fs


def connected_components(g: Graph, subset: Sequence[int] | None = None):
    """Connected components (as sorted tuples of host ids), restricted to
    ``subset`` if given."""
    allowed = set(range(g.n)) if subset is None else set(subset)
    seen = set()
    comps = []
    for start in sorted(allowed):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in g.adjacency[u]:
                if v in allowed and v not in seen:
                    seen.add(v)
                    comp.append(v)
                    queue.append(v)
        comps.append(tuple(sorted(comp)))
    return comps


def is_connected(g: Graph, subset: Sequence[int]) -> bool:
    subset = list(subset)
    if not subset:
        return True
    return len(connected_components(g, subset)[0]) == len(set(subset))


def set_diameter(g: Graph, F: Sequence[int]) -> int:
    """Diameter of F measured with ambient graph distances (infinite -> raises)."""
    fs = set(F)
    best = 0
    for s in fs:
        dist = {s: 0}
        queue = deque([s])
        remaining = len(fs) - 1
        while queue and remaining:
            u = queue.popleft()
            for v in g.adjacency[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    if v in fs:
                        remaining -= 1
                        best = max(best, dist[v])
                    queue.append(v)
        if remaining:
            raise ValueError("set is not contained in one connected component")
    return best


# ---------------------------------------------------------------------------
# canonical signatures of rooted balls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BallSignature:
    """Canonical byte string: equal iff the rooted balls are rooted-isomorphic."""

    data: bytes

    def hex(self) -> str:
        return self.data.hex()

    def __lt__(self, other: "BallSignature") -> bool:
        return self.data < other.data


def _refine(adj, colors):
    """Stable colour refinement: colour := (colour, sorted neighbour colours),
    re-compressed to small ints, until a fixed point."""
    n = len(adj)
    while True:
        sigs = [
            (colors[v], tuple(sorted(colors[u] for u in adj[v]))) for v in range(n)
        ]
        palette = {s: i for i, s in enumerate(sorted(set(sigs)))}
        new = [palette[s] for s in sigs]
        if new == colors:
            return colors
        colors = new


def _encode(adj, order, dist):
    """Distance profile plus adjacency encoding under a total vertex order.

    The distance-to-root sequence is included so the root position survives
    individualization (refined colours no longer carry it)."""
    pos = {v: i for i, v in enumerate(order)}
    out = bytearray([len(order)])
    out.extend(dist[v] for v in order)
    for v in order:
        nbrs = sorted(pos[u] for u in adj[v])
        out.append(len(nbrs))
        out.extend(nbrs)
    return bytes(out)


def _canonical_encoding(adj, colors, dist):
    """Lexicographically smallest encoding over all colourings compatible with
    iterated refinement (individualize the first non-singleton class)."""
    colors = _refine(adj, colors)
    n = len(adj)
    classes = {}
    for v, c in enumerate(colors):
        classes.setdefault(c, []).append(v)
    target = None
    for c in sorted(classes):
        if len(classes[c]) > 1:
            target = classes[c]
            break
    if target is None:
        order = sorted(range(n), key=lambda v: colors[v])
        return _encode(adj, order, dist)
    best = None
    for v in target:
        branched = list(colors)
        branched[v] = -1  # unique smallest colour within the class
        enc = _canonical_encoding(adj, branched, dist)
        if best is None or enc < best:
            best = enc
    return best


def canonical_signature(b: RootedBall) -> BallSignature:
    """Canonical form of a rooted ball.

    BFS-layer refinement (initial colour = distance to root) followed by
    exhaustive individualization over refinement-compatible labelings; the
    smallest adjacency encoding wins.  Complete invariant for rooted
    isomorphism; capped at SIGNATURE_SIZE_CAP vertices.
    """
    if b.order > SIGNATURE_SIZE_CAP:
        raise SizeCapError(
            f"ball has {b.order} vertices, canonicalization cap is {SIGNATURE_SIZE_CAP}"
        )
    adj = [list(nbrs) for nbrs in b.graph.adjacency]
    # distance to root is an isomorphism invariant of the rooted ball and pins
    # the root (the unique distance-0 vertex)
    colors = list(b.dist)
    return BallSignature(_canonical_encoding(adj, colors, list(b.dist)))


def rooted_isomorphic_bruteforce(b1: RootedBall, b2: RootedBall) -> bool:
    """Backtracking rooted-isomorphism test, independent of signatures.

    Used as the oracle in tests that certify canonical_signature is a complete
    invariant on small balls.
    """
    g1, g2 = b1.graph, b2.graph
    if g1.n != g2.n or g1.num_edges() != g2.num_edges():
        return False
    if sorted(b1.dist) != sorted(b2.dist):
        return False
    n = g1.n
    mapping = {b1.root: b2.root}
    used = {b2.root}
    if b1.dist[b1.root] != 0 or b2.dist[b2.root] != 0:
        return False

    order = sorted(range(n), key=lambda v: (b1.dist[v], v))

    def extend(idx):
        if idx == len(order):
            return True
        v = order[idx]
        if v in mapping:
            return extend(idx + 1)
        for w in range(n):
            if w in used or b2.dist[w] != b1.dist[v]:
                continue
            if g1.degree(v) != g2.degree(w):
                continue
            ok = True
            for u in g1.adjacency[v]:
                if u in mapping and not g2.has_edge(mapping[u], w):
                    ok = False
                    break
            if ok:
                # also reject extra edges between mapped vertices
                for u2 in g2.adjacency[w]:
                    pre = [k for k, val in mapping.items() if val == u2]
                    if pre and not g1.has_edge(pre[0], v):
                        ok = False
                        break
            if ok:
                mapping[v] = w
                used.add(w)
                if extend(idx + 1):
                    return True
                del mapping[v]
                used.remove(w)
        return False

    return extend(0)


def as_ratio(x) -> Fraction:
    """Coerce ints, strings like '3/5' and Fractions to an exact Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")
