"""The Long Cycle: local-amenability peeling, weighted-hyperfinite separators,
the separator-measure LP with exact dual certificates, and Property A
witnesses built from separator measures.

A k-separator of g is a vertex set whose deletion leaves components of size
<= k.  The LP dichotomy computes, for each (g, k), the exact threshold

    eps*(g, k) = min over probability measures mu on k-separators of the
                 maximum vertex marginal mu({Y : x in Y})
               = max over probability weight vectors w of the minimum
                 separator weight w(Y),

solving both optimisation problems independently with an exact rational
simplex; queries at a given eps return a measure (eps >= eps*) or a dual
weight certificate (eps < eps*), never both.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .folner import connected_subsets_by_size
from .graphs import (
    Graph,
    Window,
    ball,
    connected_components,
    host_of,
    induced_subgraph,
    vset,
)
from .lp import simplex_min

__all__ = [
    "Separator",
    "SeparatorMeasure",
    "DualWeightCertificate",
    "PropAWitness",
    "WitnessReport",
    "PeelFailure",
    "PeelResult",
    "WeightedSeparatorResult",
    "peel_local_hyperfinite",
    "weighted_separator",
    "minimal_separators",
    "separator_threshold",
    "separator_measure_lp",
    "witness_from_measure",
    "restrict_witness",
    "validate_witness",
    "growth_probe",
    "is_k_separator",
]

EXHAUSTIVE_SEPARATOR_LIMIT = 1 << 20  # enumerate all subsets up to 2^20


class PeelFailure(RuntimeError):
    """No qualifying connected subset exists; carries the offending subgraph."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness  # vertex set of the stuck induced subgraph


@dataclass(frozen=True)
class Separator:
    vertices: tuple
    k: int


def is_k_separator(g: Graph, Y: Sequence[int], k: int) -> bool:
    rest = [v for v in range(g.n) if v not in set(Y)]
    return all(len(c) <= k for c in connected_components(g, rest))


@dataclass(frozen=True)
class SeparatorMeasure:
    """Probability measure on k-separators with positive weights."""

    entries: tuple  # ((Separator, Fraction>0), ...)
    k: int

    def __post_init__(self):
        total = sum((w for _, w in self.entries), Fraction(0))
        if total != 1:
            raise ValueError(f"weights must sum to 1, got {total}")
        if any(w <= 0 for _, w in self.entries):
            raise ValueError("weights must be positive")

    def marginals(self, g: Graph) -> dict:
        out = {x: Fraction(0) for x in range(g.n)}
        for sep, w in self.entries:
            for x in sep.vertices:
                out[x] += w
        return out

    def max_marginal(self, g: Graph) -> Fraction:
        return max(self.marginals(g).values(), default=Fraction(0))


@dataclass(frozen=True)
class DualWeightCertificate:
    """Normalized nonnegative vertex weights with w(Y) > eps for every
    k-separator Y; proves (eps, k)-strong hyperfiniteness fails."""

    weights: tuple  # ((vertex, Fraction), ...) positive entries only
    eps: Fraction
    threshold: Fraction  # min over separators of w(Y) (= eps*)
    k: int

    def weight_of(self, Y: Sequence[int]) -> Fraction:
        wd = dict(self.weights)
        return sum((wd.get(v, Fraction(0)) for v in Y), Fraction(0))


@dataclass(frozen=True)
class PeelResult:
    removed: tuple  # S = union of the step boundaries
    components: tuple  # components after deleting S
    steps: tuple  # ((L_i, boundary_i), ...) in peel order


def _inner_boundary_within(g: Graph, inside: set, L: Sequence[int]) -> tuple:
    """Inner vertex boundary of L computed inside the induced subgraph on
    ``inside`` (so neighbours outside ``inside`` are invisible)."""
    Ls = set(L)
    out = []
    for x in L:
        for y in g.adjacency[x]:
            if y in inside and y not in Ls:
                out.append(x)
                break
    return tuple(sorted(out))


def peel_local_hyperfinite(g: Graph, eps, k: int, budget: int = 10_000_000) -> PeelResult:
    """Iteratively select connected L_i inside the remaining graph H_i with
    |L_i| <= k and |bd_{H_i}(L_i)| <= eps |L_i| (smallest size first, then
    lexicographic), removing all of L_i each round.  S is the union of the
    step boundaries; deleting S leaves components of size <= k.

    Raises PeelFailure (with the stuck H_i as witness) when some H_i admits no
    qualifying subset.
    """
    eps = Fraction(eps)
    remaining = set(range(g.n))
    steps = []
    S: list = []
    while remaining:
        found = None
        for size, sets_of_size in connected_subsets_by_size(
            g, sorted(remaining), min(k, len(remaining)), budget
        ):
            for L in sets_of_size:
                bd = _inner_boundary_within(g, remaining, L)
                if Fraction(len(bd)) <= eps * len(L):
                    found = (L, bd)
                    break
            if found:
                break
        if found is None:
            raise PeelFailure(
                f"no connected subset of size <= {k} with relative boundary <= {eps}",
                witness=vset(remaining),
            )
        L, bd = found
        steps.append((vset(L), bd))
        S.extend(bd)
        remaining.difference_update(L)
    Sv = vset(S)
    comps = connected_components(g, [v for v in range(g.n) if v not in set(Sv)])
    if any(len(c) > k for c in comps):
        raise AssertionError("peel postcondition violated")  # pragma: no cover
    return PeelResult(removed=Sv, components=tuple(comps), steps=tuple(steps))


@dataclass(frozen=True)
class WeightedSeparatorResult:
    separator: tuple
    weight_removed: Fraction
    total_weight: Fraction
    components: tuple
    trace: dict = field(default_factory=dict, compare=False)


def _default_oracle(sub: Graph, eps: Fraction, k: int) -> tuple:
    return peel_local_hyperfinite(sub, eps, k).removed


def weighted_separator(
    g: Graph,
    w: Mapping[int, Fraction],
    eps,
    k: int,
    oracle: Callable[[Graph, Fraction, int], tuple] | None = None,
) -> WeightedSeparatorResult:
    """Delete a set S with w(S) <= eps w(V) leaving components of size <= k.

    Follows the bucket decomposition: weights are split into geometric buckets
    with ratio eps/(3d), one bucket layer D_m of mass < (eps/3) w(V) is
    deleted, edges running down across the C_i blocks are pruned (F_{i,j}),
    and each remaining component is handed to the sub-hyperfiniteness oracle.
    The oracle budget for a component T is (eps/3) * min_T w / max_T w, the
    exact spread bound the worst-case constant delta = (eps/3d)^(L-1) eps/3
    instantiates; oracle failures propagate with the trace so far.
    """
    eps = Fraction(eps)
    if not (0 < eps):
        raise ValueError("eps must be positive")
    weights = {int(v): Fraction(val) for v, val in w.items() if Fraction(val) != 0}
    if any(val < 0 for val in weights.values()):
        raise ValueError("weights must be >= 0")
    for v in weights:
        g.check_vertex(v)
    total = sum(weights.values(), Fraction(0))
    if total <= 0:
        raise ValueError("zero total weight")

    d = g.d
    L = int(math.floor(Fraction(3) / eps)) + 1  # smallest integer > 3/eps
    base = eps / (3 * d)
    delta = base ** (L - 1) * eps / 3

    trace: dict = {"L": L, "delta": delta, "base": base}

    # zero-weight vertices are free to delete
    S = set(v for v in range(g.n) if v not in weights)
    trace["zero_weight_deleted"] = len(S)

    # bucket index: unique i with base^(i+1) < w(x) <= base^i
    def bucket(val: Fraction) -> int:
        i = int(math.floor(math.log(float(val)) / math.log(float(base))))
        while base**i < val:
            i -= 1
        while base ** (i + 1) >= val:
            i += 1
        assert base ** (i + 1) < val <= base**i
        return i

    buckets: dict = {}
    for v, val in weights.items():
        buckets.setdefault(bucket(val), []).append(v)

    layer_mass = [Fraction(0)] * L
    for bi, verts in buckets.items():
        layer_mass[bi % L] += sum((weights[v] for v in verts), Fraction(0))
    m = min(range(L), key=lambda qq: (layer_mass[qq], qq))
    trace["m"] = m
    trace["layer_mass"] = tuple(layer_mass)
    assert layer_mass[m] * L <= total  # some layer has mass <= total/L < eps/3 total

    cblock: dict = {}
    for bi, verts in buckets.items():
        if bi % L == m % L:
            S.update(verts)  # the D_m layer
        else:
            q = (bi - m - 1) % L + 1
            i = (bi - m - q) // L
            for v in verts:
                cblock[v] = i
    trace["dm_mass"] = layer_mass[m]

    # F_{i,j} pruning: delete the lower-weight endpoint of every edge that
    # crosses from a block to a higher-index (smaller-weight) block
    pruned = set()
    for x in cblock:
        for y in g.adjacency[x]:
            if y in cblock and cblock[y] > cblock[x]:
                pruned.add(y)
    S.update(pruned)
    trace["pruned_mass"] = sum((weights[v] for v in pruned), Fraction(0))

    oracle = oracle or _default_oracle
    survivors = [v for v in range(g.n) if v not in S]
    oracle_calls = []
    for comp in connected_components(g, survivors):
        if len(comp) <= k:
            continue
        sub, verts = induced_subgraph(g, comp)
        wmin = min(weights[v] for v in comp)
        wmax = max(weights[v] for v in comp)
        budget_eps = (eps / 3) * wmin / wmax
        try:
            local_S = oracle(sub, budget_eps, k)
        except PeelFailure as exc:
            trace["oracle_calls"] = tuple(oracle_calls)
            raise PeelFailure(
                f"oracle failed on a component of size {len(comp)} at "
                f"budget {budget_eps}: {exc}",
                witness=comp,
            ) from exc
        removed = vset(verts[i] for i in local_S)
        oracle_calls.append((comp, budget_eps, removed))
        S.update(removed)
    trace["oracle_calls"] = tuple(oracle_calls)

    Sv = vset(S)
    removed_weight = sum((weights.get(v, Fraction(0)) for v in Sv), Fraction(0))
    comps = connected_components(g, [v for v in range(g.n) if v not in set(Sv)])
    if removed_weight > eps * total or any(len(c) > k for c in comps):
        raise AssertionError(
            f"weighted separator contract failed: w(S)={removed_weight}, "
            f"eps*w(V)={eps * total}"
        )  # pragma: no cover
    return WeightedSeparatorResult(
        separator=Sv,
        weight_removed=removed_weight,
        total_weight=total,
        components=tuple(comps),
        trace=trace,
    )


# ---------------------------------------------------------------------------
# separator LP
# ---------------------------------------------------------------------------


def minimal_separators(g: Graph, k: int, budget: int = EXHAUSTIVE_SEPARATOR_LIMIT):
    """Inclusion-minimal k-separators.

    Adding vertices to a separator keeps it one, so the LP over all separators
    equals the LP over minimal ones.  Exhaustive over all 2^n subsets while
    that fits the budget; returns (list of Separator, exhaustive flag).
    """
    if 2**g.n > budget:
        return _heuristic_separator_pool(g, k), False
    out = []
    for size in range(g.n + 1):
        for Y in itertools.combinations(range(g.n), size):
            if not is_k_separator(g, Y, k):
                continue
            if any(is_k_separator(g, Y[:i] + Y[i + 1 :], k) for i in range(len(Y))):
                continue
            out.append(Separator(vertices=Y, k=k))
    return out, True


def _greedy_separator(g: Graph, k: int, w: Mapping[int, Fraction]) -> tuple:
    """Cheap valid separator: repeatedly delete the lightest vertex of a
    too-large component, then prune to inclusion-minimal."""
    removed: list = []
    alive = set(range(g.n))
    while True:
        big = [c for c in connected_components(g, sorted(alive)) if len(c) > k]
        if not big:
            break
        comp = big[0]
        v = min(comp, key=lambda u: (w.get(u, Fraction(0)), u))
        removed.append(v)
        alive.discard(v)
    for v in sorted(removed, key=lambda u: (-w.get(u, Fraction(0)), u)):
        trial = [u for u in removed if u != v]
        if is_k_separator(g, trial, k):
            removed = trial
    return tuple(sorted(removed))


def _heuristic_separator_pool(g: Graph, k: int, rounds: int = 24):
    """Column pool for large graphs: greedy separators for a sweep of weight
    profiles (uniform plus concentrated)."""
    pool = set()
    uniform = {v: Fraction(1, g.n) for v in range(g.n)}
    pool.add(_greedy_separator(g, k, uniform))
    for v in range(0, g.n, max(1, g.n // rounds)):
        w = dict(uniform)
        w[v] = Fraction(g.n)
        pool.add(_greedy_separator(g, k, w))
    return [Separator(vertices=Y, k=k) for Y in sorted(pool)]


@dataclass(frozen=True)
class SeparatorLPOutcome:
    threshold: Fraction  # eps*(g, k); primal and dual agree exactly
    measure: SeparatorMeasure  # optimal primal measure (max marginal = eps*)
    dual: DualWeightCertificate  # optimal dual weights (min sep weight = eps*)
    exhaustive: bool

    def query(self, eps):
        """The dichotomy at eps: the measure when eps >= eps*, else the dual
        certificate (whose separator weights all exceed eps)."""
        eps = Fraction(eps)
        if eps >= self.threshold:
            return self.measure
        return DualWeightCertificate(
            weights=self.dual.weights,
            eps=eps,
            threshold=self.threshold,
            k=self.dual.k,
        )


def separator_threshold(g: Graph, k: int, budget: int = EXHAUSTIVE_SEPARATOR_LIMIT) -> SeparatorLPOutcome:
    """Solve both sides of the separator LP exactly.

    Primal:  min t  s.t.  sum_Y x_Y = 1,  sum_{Y contains v} x_Y <= t,  x >= 0
    Dual:    max l  s.t.  sum_v w_v = 1,  w(Y) >= l for every separator, w >= 0

    The two optima are computed by independent simplex runs and must agree.
    """
    seps, exhaustive = minimal_separators(g, k, budget)
    if not seps:
        raise RuntimeError("no separators found")  # pragma: no cover
    n, msep = g.n, len(seps)

    # primal: variables [x_1..x_m, t, s_1..s_n]
    nv = msep + 1 + n
    A = []
    b = []
    row = [Fraction(0)] * nv
    for j in range(msep):
        row[j] = Fraction(1)
    A.append(row)
    b.append(Fraction(1))
    for v in range(n):
        row = [Fraction(0)] * nv
        for j, sep in enumerate(seps):
            if v in sep.vertices:
                row[j] = Fraction(1)
        row[msep] = Fraction(-1)
        row[msep + 1 + v] = Fraction(1)
        A.append(row)
        b.append(Fraction(0))
    c = [Fraction(0)] * nv
    c[msep] = Fraction(1)
    primal = simplex_min(c, A, b)
    if primal.status != "optimal":
        raise RuntimeError(f"primal LP {primal.status}")  # pragma: no cover

    # dual: variables [w_1..w_n, l, u_1..u_m]
    nv2 = n + 1 + msep
    A2 = []
    b2 = []
    row = [Fraction(0)] * nv2
    for v in range(n):
        row[v] = Fraction(1)
    A2.append(row)
    b2.append(Fraction(1))
    for j, sep in enumerate(seps):
        row = [Fraction(0)] * nv2
        for v in sep.vertices:
            row[v] = Fraction(1)
        row[n] = Fraction(-1)
        row[n + 1 + j] = Fraction(-1)
        A2.append(row)
        b2.append(Fraction(0))
    c2 = [Fraction(0)] * nv2
    c2[n] = Fraction(-1)  # maximize l
    dual = simplex_min(c2, A2, b2)
    if dual.status != "optimal":
        raise RuntimeError(f"dual LP {dual.status}")  # pragma: no cover

    t_star = primal.objective
    l_star = -dual.objective
    if t_star != l_star:
        raise AssertionError(
            f"LP duality gap: primal {t_star} != dual {l_star}"
        )  # pragma: no cover

    measure_entries = tuple(
        (seps[j], primal.x[j]) for j in range(msep) if primal.x[j] > 0
    )
    measure = SeparatorMeasure(entries=measure_entries, k=k)
    dual_weights = tuple((v, dual.x[v]) for v in range(n) if dual.x[v] > 0)
    cert = DualWeightCertificate(
        weights=dual_weights, eps=t_star, threshold=l_star, k=k
    )
    return SeparatorLPOutcome(
        threshold=t_star, measure=measure, dual=cert, exhaustive=exhaustive
    )


def separator_measure_lp(g: Graph, eps, k: int, budget: int = EXHAUSTIVE_SEPARATOR_LIMIT):
    """The LP dichotomy at a given eps: exactly one of a SeparatorMeasure with
    all marginals <= eps, or a DualWeightCertificate with w(Y) > eps for every
    k-separator."""
    return separator_threshold(g, k, budget).query(eps)


# ---------------------------------------------------------------------------
# Property A witnesses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropAWitness:
    """Ball-supported probability vector per vertex.

    ``vectors[x]`` is a dict z -> Fraction summing to 1 with support inside
    B_radius(x).  ``edge_bounds`` carries the per-edge Lipschitz bound
    reported by the construction that produced the witness (empty for
    hand-built witnesses).
    """

    radius: int
    vectors: dict
    edge_bounds: dict = field(default_factory=dict, compare=False)
    lipschitz_bound: Fraction | None = field(default=None, compare=False)
    flags: tuple = field(default=(), compare=False)

    def vector(self, x: int) -> dict:
        return self.vectors[x]


def edge_l1(theta: PropAWitness, x: int, y: int) -> Fraction:
    vx, vy = theta.vectors[x], theta.vectors[y]
    keys = set(vx) | set(vy)
    return sum(
        (abs(vx.get(z, Fraction(0)) - vy.get(z, Fraction(0))) for z in keys),
        Fraction(0),
    )


def witness_from_measure(g, mu: SeparatorMeasure, target_eps=None) -> PropAWitness:
    """Theta_x = sum_{H component containing x} F(H) p_H + c_x delta_x, where
    F(H) is the mu-mass of separators for which H is a component and p_H is
    uniform on H.

    When ``target_eps`` is given and some vertex marginal exceeds
    target_eps/4, the witness is still produced but flagged
    'marginal-regime' (its true Lipschitz bound is reported either way).
    On Window inputs, components containing truncated vertices are dropped
    from F and their mass folds into c_x (flagged 'margin-fold').
    """
    h = host_of(g)
    truncated = g.truncated if isinstance(g, Window) else frozenset()
    F: dict = {}
    flags = []
    folded = False
    for sep, weight in mu.entries:
        Ys = set(sep.vertices)
        rest = [v for v in range(h.n) if v not in Ys]
        for comp in connected_components(h, rest):
            if truncated and any(v in truncated for v in comp):
                folded = True
                continue
            F[comp] = F.get(comp, Fraction(0)) + weight
    if folded:
        flags.append("margin-fold")

    coverage = {x: Fraction(0) for x in range(h.n)}
    for comp, fh in F.items():
        for x in comp:
            coverage[x] += fh
    vectors = {}
    for x in range(h.n):
        vec: dict = {}
        for comp, fh in F.items():
            if x in set(comp):
                share = fh / len(comp)
                for z in comp:
                    vec[z] = vec.get(z, Fraction(0)) + share
        cx = 1 - coverage[x]
        if cx > 0:
            vec[x] = vec.get(x, Fraction(0)) + cx
        vectors[x] = vec

    edge_bounds: dict = {}
    for u, v in h.edges():
        edge_bounds[(u, v)] = (1 - coverage[u]) + (1 - coverage[v])
    for comp, fh in F.items():
        comp_set = set(comp)
        for x in comp:
            for y in h.adjacency[x]:
                if y not in comp_set:
                    key = (min(x, y), max(x, y))
                    edge_bounds[key] = edge_bounds.get(key, Fraction(0)) + fh
    lip = max(edge_bounds.values(), default=Fraction(0))
    max_marginal = mu.max_marginal(h)
    if target_eps is not None and max_marginal > Fraction(target_eps) / 4:
        flags.append("marginal-regime")
    if lip >= 2:
        flags.append("vacuous-bound")  # any pair of probability vectors is <= 2 apart
    return PropAWitness(
        radius=mu.k,
        vectors=vectors,
        edge_bounds=edge_bounds,
        lipschitz_bound=lip,
        flags=tuple(flags),
    )


def restrict_witness(g: Graph, H: Sequence[int], theta: PropAWitness) -> PropAWitness:
    """Project a witness onto H through the nearest-vertex map tau
    (ties to the smallest id): Omega(x)(z) = sum_{tau(t) = z} Theta(x)(t)."""
    H = vset(H, g.n)
    if not H:
        raise ValueError("H must be nonempty")
    # tau(v) = smallest-id vertex of H at distance d(v, H): propagate the
    # minimum over shortest-path predecessors layer by layer
    tau = {v: v for v in H}
    seen = set(H)
    layer = sorted(H)
    while layer:
        nxt: dict = {}
        for u in layer:
            for v in g.adjacency[u]:
                if v not in seen:
                    cand = tau[u]
                    if v not in nxt or cand < nxt[v]:
                        nxt[v] = cand
        for v, t in nxt.items():
            tau[v] = t
            seen.add(v)
        layer = sorted(nxt)

    vectors = {}
    for x in H:
        omega: dict = {}
        for t, val in theta.vectors[x].items():
            z = tau.get(t)
            if z is None:
                raise ValueError(
                    f"witness mass at {t} is unreachable from H"
                )  # disconnected host component without H vertices
            omega[z] = omega.get(z, Fraction(0)) + val
        vectors[x] = omega
    return PropAWitness(
        radius=2 * theta.radius,
        vectors=vectors,
        flags=theta.flags + ("restricted",),
    )


@dataclass(frozen=True)
class WitnessReport:
    normalized: bool
    support_ok: bool
    max_edge_l1: Fraction
    worst_edge: tuple | None
    passes: bool
    eps: Fraction
    radius: int
    edge_l1: dict = field(default_factory=dict, compare=False)


def validate_witness(g, theta: PropAWitness, eps, r: int | None = None) -> WitnessReport:
    """Check normalization, support radius and the per-edge l1 differences.

    ``passes`` means: every vector is a probability vector supported in
    B_r(x) and the maximum per-edge l1 difference is strictly below eps.
    """
    h = host_of(g)
    eps = Fraction(eps)
    r = theta.radius if r is None else r
    normalized = True
    support_ok = True
    for x, vec in theta.vectors.items():
        if sum(vec.values(), Fraction(0)) != 1 or any(v < 0 for v in vec.values()):
            normalized = False
        in_ball = set(ball(h, x, r).vertices)
        if any(z not in in_ball for z in vec):
            support_ok = False
    per_edge: dict = {}
    worst = None
    max_l1 = Fraction(0)
    for u, v in h.edges():
        if u in theta.vectors and v in theta.vectors:
            val = edge_l1(theta, u, v)
            per_edge[(u, v)] = val
            if val > max_l1:
                max_l1 = val
                worst = (u, v)
    return WitnessReport(
        normalized=normalized,
        support_ok=support_ok,
        max_edge_l1=max_l1,
        worst_edge=worst,
        passes=normalized and support_ok and max_l1 < eps,
        eps=eps,
        radius=r,
        edge_l1=per_edge,
    )


def growth_probe(w: Window, r_max: int, eps):
    """Smallest i <= r_max with |B_{i+1}(x)| < (1+eps)|B_i(x)| for every
    interior x; None if no such i exists."""
    eps = Fraction(eps)
    w.require_margin(r_max + 1)
    h = w.host
    sizes = {}
    for x in w.interior:
        dist = {x: 0}
        queue = deque([x])
        counts = [0] * (r_max + 2)
        counts[0] = 1
        while queue:
            u = queue.popleft()
            if dist[u] > r_max:
                continue
            for v in h.adjacency[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    if dist[v] <= r_max + 1:
                        counts[dist[v]] += 1
                        queue.append(v)
        cumulative = list(itertools.accumulate(counts))
        sizes[x] = cumulative
    for i in range(r_max + 1):
        if all(
            Fraction(sizes[x][i + 1]) < (1 + eps) * sizes[x][i] for x in w.interior
        ):
            return i
    return None
