"""Packings and tilings by Folner sets, the Ornstein-Weiss style packing
search, Hall-matching tiling completion, fractional covers, and randomized
tiling distributions.

A (eps, r)-packing is a family of pairwise disjoint eps-Folner sets of
diameter at most r; a tiling is a packing covering every vertex.  Fractional
covers assign weights F(H) >= 0 to Folner sets with
sum_{H containing x} F(H) + c_x = 1 at every vertex, small c_x, and small
boundary mass sum_{x in bd(H)} F(H).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .folner import BudgetExceededError, connected_subsets_by_size, folner_quality
from .graphs import (
    Graph,
    Window,
    ball,
    host_of,
    set_diameter,
    vertex_boundary,
    vset,
)
from .hierarchy import PropAWitness
from .matching import deficiency_witness, max_bipartite_matching

__all__ = [
    "Packing",
    "Tiling",
    "TilingDistribution",
    "FractionalCover",
    "DeficiencyCertificate",
    "FamilyResult",
    "enumerate_folner_family",
    "ow_packing",
    "complete_tiling_hall",
    "fractional_from_distribution",
    "propA_from_fractional",
    "shifted_block_distribution",
    "distribution_stats",
]


@dataclass(frozen=True)
class Packing:
    """Disjoint eps-Folner sets of diameter <= r."""

    tiles: tuple  # sorted tuple of vertex tuples
    eps: Fraction
    r: int

    def covered(self) -> frozenset:
        out: set = set()
        for t in self.tiles:
            out.update(t)
        return frozenset(out)

    def validate(self, g) -> None:
        h = host_of(g)
        seen: set = set()
        for t in self.tiles:
            ts = set(t)
            if ts & seen:
                raise ValueError("tiles overlap")
            seen |= ts
            if not folner_quality(h, t) < self.eps:
                raise ValueError(f"tile {t} has quality {folner_quality(h, t)} >= {self.eps}")
            if set_diameter(h, t) > self.r:
                raise ValueError(f"tile {t} has diameter > {self.r}")


@dataclass(frozen=True)
class Tiling(Packing):
    """A packing whose tiles partition the whole vertex set (or the window
    interior together with the rest of the host, when built on a Window)."""

    def validate(self, g, universe: Sequence[int] | None = None) -> None:
        super().validate(g)
        h = host_of(g)
        uni = frozenset(range(h.n)) if universe is None else frozenset(universe)
        if self.covered() != uni:
            raise ValueError("tiles do not cover the vertex set exactly")

    def tile_of(self, x: int):
        for t in self.tiles:
            if x in set(t):
                return t
        raise KeyError(x)


@dataclass(frozen=True)
class TilingDistribution:
    """Finite probability distribution over tilings (or packings)."""

    outcomes: tuple  # ((Packing|Tiling, Fraction>0), ...)

    def __post_init__(self):
        total = sum((p for _, p in self.outcomes), Fraction(0))
        if total != 1:
            raise ValueError(f"probabilities must sum to 1, got {total}")
        if any(p <= 0 for _, p in self.outcomes):
            raise ValueError("probabilities must be positive")


@dataclass(frozen=True)
class FractionalCover:
    """Weights F(H) on Folner sets plus per-vertex defect c_x."""

    weights: tuple  # ((vertex tuple, Fraction>0), ...)
    c: dict  # vertex -> Fraction (zero entries may be omitted)
    eps: Fraction
    r: int

    def coverage(self, x: int) -> Fraction:
        return sum((f for H, f in self.weights if x in set(H)), Fraction(0))

    def c_of(self, x: int) -> Fraction:
        return self.c.get(x, Fraction(0))

    def boundary_mass(self, g, x: int) -> Fraction:
        h = host_of(g)
        out = Fraction(0)
        for H, f in self.weights:
            if x in set(vertex_boundary(h, H)):
                out += f
        return out

    def validate(self, g, vertices: Sequence[int]) -> None:
        for x in vertices:
            if self.coverage(x) + self.c_of(x) != 1:
                raise ValueError(f"cover does not sum to 1 at {x}")
            if not (0 <= self.c_of(x) < self.eps):
                raise ValueError(f"c_{x} = {self.c_of(x)} outside [0, eps)")
            if not self.boundary_mass(g, x) < self.eps:
                raise ValueError(f"boundary mass at {x} >= eps")


@dataclass(frozen=True)
class FamilyResult:
    sets: tuple
    cap_exceeded: bool


def enumerate_folner_family(g, eps, r: int, cap: int = 100_000) -> FamilyResult:
    """Connected eps-Folner sets of diameter <= r, deduplicated, in
    (size, lexicographic) order, truncated at cap (flagged)."""
    eps = Fraction(eps)
    h = host_of(g)
    if isinstance(g, Window):
        g.require_margin(r)
        allowed = sorted(g.interior)
    else:
        allowed = list(range(h.n))
    out = []
    cap_exceeded = False
    try:
        for size, sets_of_size in connected_subsets_by_size(h, allowed, _max_size_for_radius(h, r)):
            for S in sets_of_size:
                if set_diameter(h, S) <= r and folner_quality(h, S) < eps:
                    out.append(S)
                    if len(out) >= cap:
                        cap_exceeded = True
                        return FamilyResult(sets=tuple(out), cap_exceeded=True)
    except BudgetExceededError:
        cap_exceeded = True
    return FamilyResult(sets=tuple(out), cap_exceeded=cap_exceeded)


def _max_size_for_radius(g: Graph, r: int) -> int:
    # a connected set of diameter <= r fits in an r-ball
    if g.n == 0:
        return 0
    return max(ball(g, x, r).order for x in range(min(g.n, 64))) if g.n <= 64 else min(
        g.n, 1 + g.d * sum((g.d - 1) ** i for i in range(r))
    )


def _coverage_stats(tests, covered: set):
    fracs = []
    for T in tests:
        ts = set(T)
        fracs.append(Fraction(len(ts & covered), len(ts)))
    return fracs


def ow_packing(g, family: Sequence[tuple], tests: Sequence[tuple], eps, budget: int = 1000):
    """Greedy-plus-exchange packing search.

    Maximizes, lexicographically, (minimum covered fraction over the test
    sets, total coverage).  The exchange move clears all packing elements
    inside the worst test set and greedily refills from the family elements
    contained in it, accepting only strict lexicographic improvements.
    Deterministic; returns (Packing, per-test covered fractions).
    """
    eps = Fraction(eps)
    h = host_of(g)
    if not family:
        raise ValueError("empty family")
    family = sorted(vset(S, h.n) for S in family)
    family = sorted(set(family), key=lambda S: (len(S), S))
    tests = [vset(T, h.n) for T in tests]

    def greedy_fill(chosen: list, covered: set, pool):
        for S in pool:
            ss = set(S)
            if not (ss & covered):
                chosen.append(S)
                covered |= ss
        return chosen, covered

    chosen, covered = greedy_fill([], set(), family)
    if tests:
        best_obj = (min(_coverage_stats(tests, covered)), len(covered))
        for _ in range(budget):
            fracs = _coverage_stats(tests, covered)
            worst = min(range(len(tests)), key=lambda i: (fracs[i], i))
            if fracs[worst] == 1:
                break
            T = set(tests[worst])
            # exchange: drop tiles meeting T, refill inside T first
            kept = [S for S in chosen if not (set(S) & T)]
            cov = set()
            for S in kept:
                cov.update(S)
            inside = [S for S in family if set(S) <= T]
            cand, cand_cov = greedy_fill(list(kept), set(cov), inside)
            cand, cand_cov = greedy_fill(cand, cand_cov, family)
            obj = (min(_coverage_stats(tests, cand_cov)), len(cand_cov))
            if obj > best_obj:
                chosen, covered, best_obj = cand, cand_cov, obj
            else:
                break
    diam = max((set_diameter(h, S) for S in chosen), default=0)
    packing = Packing(tiles=tuple(sorted(chosen)), eps=eps, r=diam)
    fracs = _coverage_stats(tests, covered) if tests else []
    return packing, tuple(fracs)


@dataclass(frozen=True)
class DeficiencyCertificate:
    """Hall violator: uncovered vertices M with fewer than |M| reachable
    donors."""

    violating_set: tuple
    neighbourhood: tuple

    def check(self) -> bool:
        return len(self.neighbourhood) < len(self.violating_set)


def complete_tiling_hall(g, P: Packing, cover: FractionalCover, eps, k: int):
    """Graft the uncovered vertices onto nearby tiles via maximum matching.

    Donor slots are subsets K_i of each tile with 3 eps |H_i| < |K_i| <
    4 eps |H_i| (lexicographically first vertices, preferring non-boundary
    ones; degenerate windows are clamped and flagged).  An uncovered vertex x
    may use a donor y in K_i when some positive-weight cover set contains both
    and d(x, y) < k.  On success the tiles H_i plus their grafted vertices
    form a partition with per-tile quality <= 5 eps and diameter <= 2k + r;
    if Hall's condition fails, the violating set is returned instead.
    """
    eps = Fraction(eps)
    h = host_of(g)
    universe = set(range(h.n)) if not isinstance(g, Window) else set(range(h.n))
    uncovered = sorted(universe - P.covered())
    if not uncovered:
        return Tiling(tiles=P.tiles, eps=P.eps, r=P.r), ()

    flags = []
    donors: dict = {}  # vertex -> tile index
    for idx, H in enumerate(P.tiles):
        size = len(H)
        lo = 3 * eps * size
        hi = 4 * eps * size
        want = int(lo) + 1  # smallest integer > 3 eps |H|
        if not (lo < want < hi):
            flags.append(f"K-window-degenerate:{idx}")
        want = max(1, min(size, want))
        bd = set(vertex_boundary(h, H))
        ordered = sorted(H, key=lambda v: (v in bd, v))  # non-boundary first
        for v in ordered[:want]:
            donors[v] = idx

    # bipartite support graph: x ~ donor y iff some positive-F cover set
    # contains both and they are within reach k
    adj: dict = {}
    for x in uncovered:
        near = set(ball(h, x, k - 1).vertices)
        opts = set()
        for H, f in cover.weights:
            hs = set(H)
            if x in hs:
                opts.update(v for v in hs if v in donors and v != x and v in near)
        adj[x] = tuple(sorted(opts))

    matching = max_bipartite_matching(adj)
    witness = deficiency_witness(adj, matching)
    if witness is not None:
        M, NM = witness
        return None, DeficiencyCertificate(violating_set=tuple(M), neighbourhood=tuple(NM))

    grafted: dict = {idx: list(H) for idx, H in enumerate(P.tiles)}
    for x, y in matching.items():
        grafted[donors[y]].append(x)
    tiles = tuple(sorted(vset(t) for t in grafted.values()))
    qualities = [folner_quality(h, t) for t in tiles]
    diams = [set_diameter(h, t) for t in tiles]
    if any(q > 5 * eps for q in qualities):
        raise ValueError(
            f"completed tile quality {max(qualities)} exceeds 5*eps = {5 * eps}"
        )
    if any(dd > 2 * k + P.r for dd in diams):
        raise ValueError(f"completed tile diameter {max(diams)} exceeds 2k+r")
    tiling = Tiling(tiles=tiles, eps=5 * eps, r=2 * k + P.r)
    tiling.validate(g)
    return tiling, tuple(flags)


def fractional_from_distribution(dist: TilingDistribution, eps=None, r=None) -> FractionalCover:
    """F(H) = total probability of outcomes containing H as an element;
    c_x = probability that x is uncovered."""
    F: dict = {}
    uncovered_mass: dict = {}
    vertices: set = set()
    for packing, prob in dist.outcomes:
        cov = packing.covered()
        vertices.update(cov)
        for t in packing.tiles:
            F[t] = F.get(t, Fraction(0)) + prob
    for packing, prob in dist.outcomes:
        cov = packing.covered()
        for x in vertices:
            if x not in cov:
                uncovered_mass[x] = uncovered_mass.get(x, Fraction(0)) + prob
    some = dist.outcomes[0][0]
    return FractionalCover(
        weights=tuple(sorted(F.items())),
        c=uncovered_mass,
        eps=Fraction(eps) if eps is not None else some.eps,
        r=r if r is not None else some.r,
    )


def propA_from_fractional(g, cover: FractionalCover):
    """P_x = sum_{H containing x} F(H) p_H + c_x delta_x.

    Returns (witness, per-vertex defect dict).  The reported per-edge bound is
    c_x + c_y + (boundary F-mass at x) + (boundary F-mass at y) <= 4 eps; each
    P_x is additionally reported with its exact total-variation defect
    (Folner Property A: the defect is <= 2 d eps for an (eps, r) cover).
    """
    from .folner import FolnerFunction, function_defect

    h = host_of(g)
    vertices: set = set(cover.c)
    member_index: dict = {}
    for H, f in cover.weights:
        vertices.update(H)
        for x in H:
            member_index.setdefault(x, []).append((H, f))
    vectors: dict = {}
    bd_mass = {x: Fraction(0) for x in vertices}
    for H, f in cover.weights:
        for x in vertex_boundary(h, H):
            bd_mass[x] += f
    for x in sorted(vertices):
        vec: dict = {}
        for H, f in member_index.get(x, ()):
            share = f / len(H)
            for z in H:
                vec[z] = vec.get(z, Fraction(0)) + share
        cx = cover.c_of(x)
        if cx > 0:
            vec[x] = vec.get(x, Fraction(0)) + cx
        vectors[x] = vec

    edge_bounds: dict = {}
    for u, v in h.edges():
        if u in vectors and v in vectors:
            edge_bounds[(u, v)] = (
                cover.c_of(u) + cover.c_of(v) + bd_mass.get(u, Fraction(0)) + bd_mass.get(v, Fraction(0))
            )
    lip = max(edge_bounds.values(), default=Fraction(0))
    witness = PropAWitness(
        radius=cover.r,
        vectors=vectors,
        edge_bounds=edge_bounds,
        lipschitz_bound=lip,
        flags=("fractional",),
    )
    defects = {
        x: function_defect(h, FolnerFunction.from_dict(vec))
        for x, vec in vectors.items()
        if vec
    }
    return witness, defects


def _torus_vertex(n: int, row: int, col: int) -> int:
    return (row % n) * n + (col % n)


def shifted_block_distribution(torus: Graph, k: int, n: int | None = None) -> TilingDistribution:
    """Uniform distribution over the k^2 translates of the k x k block tiling
    of an n x n torus (requires k | n).  The torus must be the output of
    make_torus(2, n) (row-major vertex ids)."""
    if n is None:
        n = int(round(torus.n**0.5))
    if n * n != torus.n:
        raise ValueError("graph is not an n x n torus")
    if n % k != 0:
        raise ValueError(f"block side {k} does not divide torus side {n}")
    quality = folner_quality(torus, [_torus_vertex(n, i, j) for i in range(k) for j in range(k)])
    eps_tile = quality + Fraction(1, torus.n * 4)  # any strict upper bound works
    outcomes = []
    prob = Fraction(1, k * k)
    for a in range(k):
        for b in range(k):
            tiles = []
            for bi in range(n // k):
                for bj in range(n // k):
                    tiles.append(
                        vset(
                            _torus_vertex(n, a + bi * k + i, b + bj * k + j)
                            for i in range(k)
                            for j in range(k)
                        )
                    )
            diam = set_diameter(torus, tiles[0]) if tiles else 0
            outcomes.append(
                (Tiling(tiles=tuple(sorted(tiles)), eps=eps_tile, r=diam), prob)
            )
    return TilingDistribution(outcomes=tuple(outcomes))


@dataclass(frozen=True)
class DistributionStats:
    boundary_probability: dict  # vertex -> Fraction
    max_boundary_probability: Fraction
    uncovered_probability: dict  # vertex -> Fraction


def distribution_stats(g, dist: TilingDistribution) -> DistributionStats:
    """Exact per-vertex probabilities: being on the boundary of one's tile,
    and being uncovered."""
    h = host_of(g)
    bnd = {x: Fraction(0) for x in range(h.n)}
    unc = {x: Fraction(0) for x in range(h.n)}
    for packing, prob in dist.outcomes:
        cov: set = set()
        for t in packing.tiles:
            cov.update(t)
            for x in vertex_boundary(h, t):
                bnd[x] += prob
        for x in range(h.n):
            if x not in cov:
                unc[x] += prob
    return DistributionStats(
        boundary_probability=bnd,
        max_boundary_probability=max(bnd.values(), default=Fraction(0)),
        uncovered_probability=unc,
    )
