"""Folner sets and functions: isoperimetric quality, total-variation defect,
ball-growth search, smallest-Folner-set search, and the level-set extraction
that turns a low-defect probability function into a high-mass Folner subset.

Exactness.  Every quality/threshold comparison in this module is decided in
exact arithmetic.  The extraction's level thresholds live on the geometric
grid ``s * 2^k * beta^(t/(4q))`` with ``beta = 11/10``; comparing a rational v
against such a threshold is equivalent to comparing ``(v / (s 2^k))^(4q)``
with ``beta^t``, which is a rational comparison.  A decimal enclosure of the
irrational root (width < 1e-30) is carried in the trace for reporting.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .graphs import (
    Graph,
    MarginError,
    Window,
    host_of,
    is_connected,
    vertex_boundary,
    vset,
)

__all__ = [
    "FolnerFunction",
    "ExtractionTrace",
    "AdmissibilityError",
    "ExtractionError",
    "BudgetExceededError",
    "folner_quality",
    "is_folner",
    "function_defect",
    "grow_folner",
    "min_folner_in_ball",
    "connected_subsets_by_size",
    "extract_folner_from_function",
    "extraction_delta_enclosure",
    "defect_is_admissible",
]

DEFAULT_ENUM_BUDGET = 10_000_000
_ENCLOSURE_DIGITS = 40  # 10^-40 < 10^-30 target width


class AdmissibilityError(ValueError):
    """Input function violates the extraction preconditions."""

    def __init__(self, msg, defect=None, delta=None):
        super().__init__(msg)
        self.defect = defect
        self.delta = delta


class ExtractionError(RuntimeError):
    """The level-set extraction could not meet its output contracts."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


class BudgetExceededError(RuntimeError):
    """Enumeration budget exhausted before an answer was determined."""


@dataclass(frozen=True)
class FolnerFunction:
    """Finitely supported nonnegative vertex function with exact values.

    Entries with value zero are dropped, so ``support`` is exactly the set of
    vertices with positive value.
    """

    entries: tuple  # sorted tuple of (vertex, Fraction>0)

    def __post_init__(self):
        prev = -1
        for v, val in self.entries:
            if v <= prev:
                raise ValueError("entries must be sorted by vertex id")
            if val <= 0:
                raise ValueError("stored values must be positive")
            prev = v
        if not self.entries:
            raise ValueError("function must have at least one positive value")

    @staticmethod
    def from_dict(values: Mapping[int, Fraction]) -> "FolnerFunction":
        ent = tuple(
            sorted((int(v), Fraction(val)) for v, val in values.items() if Fraction(val) != 0)
        )
        for _, val in ent:
            if val < 0:
                raise ValueError("values must be >= 0")
        return FolnerFunction(ent)

    @staticmethod
    def uniform(F: Sequence[int]) -> "FolnerFunction":
        F = vset(F)
        if not F:
            raise ValueError("empty set")
        w = Fraction(1, len(F))
        return FolnerFunction(tuple((v, w) for v in F))

    @staticmethod
    def point_mass(x: int) -> "FolnerFunction":
        return FolnerFunction(((int(x), Fraction(1)),))

    @staticmethod
    def mixture(parts: Sequence["FolnerFunction"], weights: Sequence[Fraction] | None = None):
        if not parts:
            raise ValueError("empty mixture")
        if weights is None:
            weights = [Fraction(1, len(parts))] * len(parts)
        acc: dict = {}
        for f, w in zip(parts, weights):
            w = Fraction(w)
            for v, val in f.entries:
                acc[v] = acc.get(v, Fraction(0)) + w * val
        return FolnerFunction.from_dict(acc)

    def support(self) -> tuple:
        return tuple(v for v, _ in self.entries)

    def mass(self) -> Fraction:
        return sum((val for _, val in self.entries), Fraction(0))

    def value(self, v: int) -> Fraction:
        lo, hi = 0, len(self.entries)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.entries[mid][0] < v:
                lo = mid + 1
            else:
                hi = mid
        if lo < len(self.entries) and self.entries[lo][0] == v:
            return self.entries[lo][1]
        return Fraction(0)

    def as_dict(self) -> dict:
        return dict(self.entries)

    def __add__(self, other: "FolnerFunction") -> "FolnerFunction":
        acc = dict(self.entries)
        for v, val in other.entries:
            acc[v] = acc.get(v, Fraction(0)) + val
        return FolnerFunction.from_dict(acc)

    def normalized(self) -> "FolnerFunction":
        m = self.mass()
        return FolnerFunction(tuple((v, val / m) for v, val in self.entries))


def folner_quality(g, F: Sequence[int]) -> Fraction:
    """|boundary(F)| / |F|, exactly.  F is epsilon-Folner iff this is < epsilon."""
    h = host_of(g)
    F = vset(F, h.n)
    if not F:
        raise ValueError("quality of the empty set is undefined")
    return Fraction(len(vertex_boundary(h, F)), len(F))


def is_folner(g, F: Sequence[int], eps) -> bool:
    return folner_quality(g, F) < Fraction(eps)


def _support_check_window(g, supp: Iterable[int], need_margin: int = 1) -> Graph:
    """For Window inputs: require support inside the interior and margin >= 1
    so the host adjacency of the support is exact.  Returns the host graph."""
    if isinstance(g, Window):
        g.require_margin(need_margin)
        inside = set(g.interior)
        for v in supp:
            if v not in inside:
                raise MarginError(f"support vertex {v} is outside the window interior")
        return g.host
    return g


def function_defect(g, f: FolnerFunction) -> Fraction:
    """Total variation over ordered adjacent pairs divided by the mass.

    sum_x sum_{y ~ x} |f(x)-f(y)|  /  sum_x f(x), exactly.
    """
    h = _support_check_window(g, f.support())
    mass = f.mass()
    if mass == 0:
        raise ValueError("zero total mass")
    vals = dict(f.entries)
    tv = Fraction(0)
    for x, fx in f.entries:
        h.check_vertex(x)
        outside = 0
        for y in h.adjacency[x]:
            fy = vals.get(y)
            if fy is None:
                tv += fx  # ordered pair (x,y), y outside the support
                outside += 1
            else:
                tv += abs(fx - fy)
        tv += outside * fx  # ordered pairs (y,x) with y outside the support
    return tv / mass


def grow_folner(g, L: Sequence[int], eps, r_max: int):
    """Smallest i <= r_max with B_i(L) an eps-Folner set, plus that ball.

    Returns None when every ball up to r_max fails; in that case the balls
    grew by a factor > (1 + eps/d) at every step.
    """
    eps = Fraction(eps)
    h = host_of(g)
    L = vset(L, h.n)
    if not L:
        raise ValueError("L must be nonempty")
    if isinstance(g, Window):
        g.require_margin(r_max)
        inside = set(g.interior)
        if any(v not in inside for v in L):
            raise MarginError("L must lie inside the window interior")
    current = set(L)
    for i in range(r_max + 1):
        if folner_quality(h, tuple(current)) < eps:
            return i, vset(current)
        if i == r_max:
            break
        grown = set(current)
        for x in current:
            grown.update(h.adjacency[x])
        current = grown
    return None


def connected_subsets_by_size(
    g: Graph,
    allowed: Sequence[int],
    max_size: int,
    budget: int = DEFAULT_ENUM_BUDGET,
):
    """Yield (size, sorted list of connected subsets of that size).

    Enumerates connected subsets of ``allowed`` (connectivity in the induced
    subgraph) grouped by size; within a size class, subsets come out in
    lexicographic order of their sorted vertex tuples.  Each connected subset
    is generated exactly once via min-anchored extension.  Raises
    BudgetExceededError when more than ``budget`` recursion steps are needed.
    """
    allowed = vset(allowed, g.n)
    allowed_set = set(allowed)
    by_size: dict = {s: [] for s in range(1, max_size + 1)}
    steps = 0

    def rec(S: tuple, ext: frozenset, anchor: int):
        nonlocal steps
        steps += 1
        if steps > budget:
            raise BudgetExceededError(f"connected-subset enumeration exceeded {budget} steps")
        by_size[len(S)].append(S)
        if len(S) == max_size:
            return
        ext_sorted = sorted(ext)
        for idx, v in enumerate(ext_sorted):
            grow = {
                w
                for w in g.adjacency[v]
                if w in allowed_set and w > anchor and w not in S and w not in ext
            }
            rec(
                tuple(sorted(S + (v,))),
                frozenset(ext_sorted[idx + 1 :]) | frozenset(grow),
                anchor,
            )

    for a in allowed:
        ext0 = frozenset(w for w in g.adjacency[a] if w in allowed_set and w > a)
        rec((a,), ext0, a)
    for s in range(1, max_size + 1):
        yield s, sorted(by_size[s])


def min_folner_in_ball(g, x: int, r: int, eps, budget: int = DEFAULT_ENUM_BUDGET):
    """Smallest connected eps-Folner subset of B_r(x); ties broken
    lexicographically on the sorted vertex tuple.  Returns None if no
    connected subset of the ball is eps-Folner (quality measured in the
    ambient graph)."""
    eps = Fraction(eps)
    h = host_of(g)
    if isinstance(g, Window):
        g.require_margin(r)
        if x not in set(g.interior):
            raise MarginError(f"root {x} is outside the window interior")
    from .graphs import ball as _ball

    B = _ball(h, x, r).vertices
    for _, sets_of_size in connected_subsets_by_size(h, B, len(B), budget):
        for S in sets_of_size:
            if folner_quality(h, S) < eps:
                return vset(S)
    return None


# ---------------------------------------------------------------------------
# level-set extraction
# ---------------------------------------------------------------------------


def _int_nth_root(a: int, n: int) -> int:
    """floor(a ** (1/n)) for nonnegative integer a, by Newton iteration."""
    if a < 0 or n <= 0:
        raise ValueError("need a >= 0, n >= 1")
    if a == 0:
        return 0
    x = 1 << (-(-a.bit_length() // n))  # upper bound
    while True:
        y = ((n - 1) * x + a // x ** (n - 1)) // n
        if y >= x:
            break
        x = y
    while x**n > a:
        x -= 1
    return x


def _root_enclosure(power: int, digits: int = _ENCLOSURE_DIGITS):
    """Rational enclosure [lo, hi] of (11/10)^(1/power), hi - lo = 10^-digits."""
    scale = 10**digits
    a = _int_nth_root(11 * 10 ** (power * digits - 1), power)
    return Fraction(a, scale), Fraction(a + 1, scale)


def _extraction_q(eps: Fraction) -> int:
    # smallest integer strictly greater than 16 / eps^2
    ratio = 16 / eps**2
    return int(math.floor(ratio)) + 1


def extraction_delta_enclosure(eps) -> tuple:
    """Enclosure of delta(eps) = eps^2 (sqrt(1+rho) - 1) / 16 where
    (1+rho)^(2q) = 11/10 and q is the smallest integer > 16/eps^2."""
    eps = Fraction(eps)
    q = _extraction_q(eps)
    lo, hi = _root_enclosure(4 * q)  # sqrt(1+rho) = (11/10)^(1/(4q))
    return eps**2 * (lo - 1) / 16, eps**2 * (hi - 1) / 16


def defect_is_admissible(defect: Fraction, eps) -> bool:
    """Exact test of defect < delta(eps):
    (1 + 16 defect / eps^2)^(4q) < 11/10."""
    eps = Fraction(eps)
    q = _extraction_q(eps)
    return (1 + 16 * Fraction(defect) / eps**2) ** (4 * q) < Fraction(11, 10)


class _GridScale:
    """Exact position of rationals on the grid s * 2^k * x^t, x = (11/10)^(1/(4q)).

    cmp(vpow, k, t) is the sign of v - s*2^k*x^t where vpow = (v/s)^(4q).
    """

    def __init__(self, s: Fraction, q: int):
        self.s = s
        self.q4 = 4 * q
        self._beta = Fraction(11, 10)
        self._rhs: dict = {}
        self._log_x = math.log(1.1) / self.q4

    def vpow(self, v: Fraction) -> Fraction:
        return (v / self.s) ** self.q4

    def cmp(self, vpow: Fraction, k: int, t: int) -> int:
        key = (k, t)
        rhs = self._rhs.get(key)
        if rhs is None:
            rhs = Fraction(2) ** (self.q4 * k) * self._beta**t
            self._rhs[key] = rhs
        return (vpow > rhs) - (vpow < rhs)

    def position(self, v: Fraction):
        """(k, t, exact, vpow) with s*2^k <= v < s*2^(k+1) and
        x^t <= v/(s*2^k) < x^(t+1); exact means v = s*2^k*x^t."""
        w = v / self.s
        k = w.numerator.bit_length() - w.denominator.bit_length()
        if (Fraction(2) ** k) > w:
            k -= 1
        elif (Fraction(2) ** (k + 1)) <= w:
            k += 1
        assert Fraction(2) ** k <= w < Fraction(2) ** (k + 1)
        theta = w / Fraction(2) ** k  # in [1, 2)
        vpow = self.vpow(v)
        t = int(math.floor(math.log(float(theta)) / self._log_x))
        while self.cmp(vpow, k, t) < 0:
            t -= 1
        while self.cmp(vpow, k, t + 1) >= 0:
            t += 1
        exact = self.cmp(vpow, k, t) == 0
        return k, t, exact, vpow


def _choose_s(eps: Fraction, n: int, values: Sequence[Fraction]) -> Fraction:
    """Positive s < eps^2/(32 n) with 2^k * s * (11/10)^m != v for all values v
    and integers k, m >= 0.  (Powers (1+rho)^j with 2q not dividing j are
    irrational, so only the (11/10)^m relations can produce equality.)

    Starts at eps^2/(64 n) and decrements in steps of 1/1000 of the start; if a
    full sweep is exhausted the step is refined, which must terminate because
    each value forbids finitely many candidates in any bounded interval.
    """

    def forbidden(s: Fraction) -> bool:
        for v in values:
            w = v / s
            num, den = w.numerator, w.denominator
            a2 = a11 = b2 = b5 = 0
            while num % 2 == 0:
                num //= 2
                a2 += 1
            while num % 11 == 0:
                num //= 11
                a11 += 1
            while den % 2 == 0:
                den //= 2
                b2 += 1
            while den % 5 == 0:
                den //= 5
                b5 += 1
            if num == 1 and den == 1 and b5 == a11 and a11 + a2 - b2 >= 0:
                return True
        return False

    s0 = eps**2 / (64 * n)
    step = s0 / 1000
    while True:
        s = s0
        while s > 0:
            if not forbidden(s):
                return s
            s -= step
        step /= 1000


@dataclass(frozen=True)
class ExtractionTrace:
    """Full account of one level-set extraction run.

    The thresholds a_i, b_i, c_i are irrational; they are determined exactly
    by (s, q, l) via a_i = s 2^(i-1) x^(4l-4), b_i = a_i x, c_i = 2 a_i / x
    with x = (11/10)^(1/(4q)).  ``a_float`` etc. are display approximations.
    """

    eps: Fraction
    defect: Fraction
    delta_lo: Fraction
    delta_hi: Fraction
    admissible: bool
    q: int
    rho_lo: Fraction
    rho_hi: Fraction
    s: Fraction
    m: int
    l: int
    t_masses: tuple  # p(T_j) for j = 1..q
    bucket_masses: tuple  # p(M_i) for i = 1..m-1
    level_sets: tuple  # (i, vertices, quality, is_folner) for nonempty S_i
    bad_set: tuple
    bad_mass: Fraction
    below_a1_mass: Fraction
    discarded_mass: Fraction
    a_float: tuple = field(default=())
    b_float: tuple = field(default=())
    c_float: tuple = field(default=())

    def selected_levels(self):
        return tuple(ls for ls in self.level_sets if ls[3])


def extract_folner_from_function(g, p: FolnerFunction, eps, enforce_delta: bool = False):
    """Extract an eps-Folner union of level sets H with p(H) > 1 - eps.

    The input must be a probability function (mass 1) with every value < 1/2.
    ``defect < delta(eps)`` is the theorem hypothesis guaranteeing success; it
    is recorded in the trace (``admissible``) and only enforced as a hard
    precondition when ``enforce_delta`` is set, since the level-set algorithm
    itself is well defined, and typically succeeds, far above delta.  If the
    output contracts cannot be met, ExtractionError is raised with the trace
    attached.

    Returns (H, mass, trace).
    """
    eps = Fraction(eps)
    if not (0 < eps):
        raise ValueError("eps must be positive")
    h = _support_check_window(g, p.support())
    mass = p.mass()
    if mass != 1:
        raise AdmissibilityError(f"total mass must be 1, got {mass}")
    defect = function_defect(g, p)
    delta_lo, delta_hi = extraction_delta_enclosure(eps)
    admissible = defect_is_admissible(defect, eps)
    problems = []
    if any(val >= Fraction(1, 2) for _, val in p.entries):
        problems.append("some value is >= 1/2")
    if problems:
        raise AdmissibilityError(
            "; ".join(problems) + f" (defect={defect}, admissible={admissible})",
            defect=defect,
            delta=(delta_lo, delta_hi),
        )
    if enforce_delta and not admissible:
        raise AdmissibilityError(
            f"defect {defect} >= delta(eps) (enclosure [{float(delta_lo)}, {float(delta_hi)}])",
            defect=defect,
            delta=(delta_lo, delta_hi),
        )

    q = _extraction_q(eps)
    rho_lo_root, rho_hi_root = _root_enclosure(2 * q)
    rho_lo, rho_hi = rho_lo_root - 1, rho_hi_root - 1
    n = len(p.entries)
    values = sorted({val for _, val in p.entries})
    s = _choose_s(eps, n, values)

    # m = largest integer with s 2^m < 1/2
    m = 0
    while s * Fraction(2) ** (m + 1) < Fraction(1, 2):
        m += 1
    if m < 2:
        raise ExtractionError("degenerate scale: fewer than one level band")

    scale = _GridScale(s, q)
    pos = {v: scale.position(v) for v in values}

    # masses of the T_j value intervals, j = 1..q; vertices sharing a value
    # share membership, so aggregate mass by value first
    t_masses = [Fraction(0)] * (q + 1)  # 1-based
    mass_of_value: dict = {}
    for vtx, val in p.entries:
        mass_of_value[val] = mass_of_value.get(val, Fraction(0)) + val

    for v in values:
        k, t, exact, vpow = pos[v]
        pmass = mass_of_value[v]
        # part 1 of T_j: v in (s 2^(i-1) x^(4j-4), s 2^(i-1) x^(4j-2)), i-1 = k
        if 1 <= k + 1 <= m - 1 and t % 4 in (0, 1):
            j = t // 4 + 1
            if 1 <= j <= q and not (exact and t % 4 == 0):
                t_masses[j] += pmass
        # part 2, j >= 2: v in (s 2^i x^(4j-6), s 2^i x^(4j-4)), i = k
        if 1 <= k <= m - 1 and t % 4 in (2, 3):
            j = (t + 6) // 4
            if 2 <= j <= q and not (exact and t % 4 == 2):
                t_masses[j] += pmass
        # part 2, j = 1: v in (s 2^i x^(-2), s 2^i), i = k+1
        if 1 <= k + 1 <= m - 1:
            if scale.cmp(vpow, k + 1, -2) > 0 and scale.cmp(vpow, k + 1, 0) < 0:
                t_masses[1] += pmass

    l = min(range(1, q + 1), key=lambda j: (t_masses[j], j))
    assert t_masses[l] <= Fraction(1, q)

    # level sets S_i = [b_i, c_i] = [s 2^(i-1) x^(4l-3), s 2^i x^(4l-5)]
    level_members: dict = {i: [] for i in range(1, m)}
    bucket = [Fraction(0)] * m  # p(M_i), 1-based up to m-1
    below_a1 = Fraction(0)
    for vtx, val in p.entries:
        k, t, exact, vpow = pos[val]
        placed = False
        for i in (k, k + 1):
            if 1 <= i <= m - 1:
                if scale.cmp(vpow, i - 1, 4 * l - 3) >= 0 and scale.cmp(vpow, i, 4 * l - 5) <= 0:
                    level_members[i].append(vtx)
                    placed = True
                    break
        for i in (k, k + 1):
            if 1 <= i <= m - 1:
                if scale.cmp(vpow, i - 1, 4 * l - 2) > 0 and scale.cmp(vpow, i, 4 * l - 6) < 0:
                    bucket[i] += val
                    break
        if not placed and scale.cmp(vpow, 0, 4 * l - 4) < 0:
            below_a1 += val

    # bad set B(G): support vertices with a missing neighbour or a neighbour
    # ratio exceeding sqrt(1+rho) = x
    vals = dict(p.entries)
    bad = []
    bad_mass = Fraction(0)
    beta = Fraction(11, 10)
    for vtx, val in p.entries:
        is_bad = False
        for y in h.adjacency[vtx]:
            fy = vals.get(y)
            if fy is None:
                is_bad = True
                break
            r = val / fy if val > fy else fy / val
            if r ** (4 * q) > beta:
                is_bad = True
                break
        if is_bad:
            bad.append(vtx)
            bad_mass += val

    level_sets = []
    H: list = []
    covered = Fraction(0)
    for i in range(1, m):
        members = vset(level_members[i])
        if not members:
            continue
        quality = folner_quality(h, members)
        folner = quality < eps
        level_sets.append((i, members, quality, folner))
        if folner:
            H.extend(members)
            covered += sum((vals[v] for v in members), Fraction(0))

    lx = float(rho_lo) + 1.0
    a_float = tuple(float(s) * 2 ** (i - 1) * lx ** (2 * l - 2) for i in range(1, m + 1))
    b_float = tuple(a_float[i - 1] * lx**0.5 for i in range(1, m))
    c_float = tuple(a_float[i] / lx**0.5 for i in range(1, m))

    trace = ExtractionTrace(
        eps=eps,
        defect=defect,
        delta_lo=delta_lo,
        delta_hi=delta_hi,
        admissible=admissible,
        q=q,
        rho_lo=rho_lo,
        rho_hi=rho_hi,
        s=s,
        m=m,
        l=l,
        t_masses=tuple(t_masses[1:]),
        bucket_masses=tuple(bucket[1:]),
        level_sets=tuple(level_sets),
        bad_set=tuple(bad),
        bad_mass=bad_mass,
        below_a1_mass=below_a1,
        discarded_mass=1 - covered,
        a_float=a_float,
        b_float=b_float,
        c_float=c_float,
    )

    Hs = vset(H)
    if not Hs:
        raise ExtractionError(
            f"no Folner level set found (defect={defect}, admissible={admissible})",
            trace=trace,
        )
    quality = folner_quality(h, Hs)
    if not (quality < eps and covered > 1 - eps):
        raise ExtractionError(
            f"output contract failed: quality={quality}, mass={covered} "
            f"(defect={defect} vs delta enclosure "
            f"[{float(trace.delta_lo)}, {float(trace.delta_hi)}], admissible={admissible})",
            trace=trace,
        )
    return Hs, covered, trace
