"""Graph Laplacian spectra, Hausdorff distance, the polynomial spectral window
test, ball-profile neighborhood distance, and spectral convergence tables.

The Laplacian is L f(x) = deg(x) f(x) - sum_{y ~ x} f(y); its spectrum lies in
[0, 2d].  The window test builds a trapezoid profile around lambda, replaces
it by a Chebyshev polynomial p with small sup error on [0, 2d], and reports
whether ||p(L)|| > eps: a sound and complete local test for spectral mass
near lambda.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from numpy.polynomial.chebyshev import Chebyshev

from .graphs import Graph, SizeCapError, Window, ball, canonical_signature, host_of

__all__ = [
    "Spectrum",
    "SpectralFilter",
    "NeighborhoodProfile",
    "laplacian_matrix",
    "laplacian_spectrum",
    "hausdorff_distance",
    "build_spectral_filter",
    "spectral_window_test",
    "window_filter_norm_estimate",
    "neighborhood_profile",
    "profile_upto",
    "neighborhood_distance",
    "NeighborhoodDistance",
    "corpus_enumeration",
    "convergence_experiment",
    "cycle_spectrum_closed_form",
    "torus_spectrum_closed_form",
]

EIG_TOL = 1e-9
SPECTRUM_SIZE_CAP = 4096
DEGREE_CAP = 2000
AUDIT_GRID = 10001


@dataclass(frozen=True)
class Spectrum:
    values: tuple  # sorted floats
    n: int
    d: int

    def __post_init__(self):
        lo, hi = -EIG_TOL, 2 * self.d + EIG_TOL
        for v in self.values:
            if not (lo <= v <= hi):
                raise ValueError(f"eigenvalue {v} outside [0, 2d] by more than {EIG_TOL}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values)


def laplacian_matrix(g: Graph) -> np.ndarray:
    L = np.zeros((g.n, g.n))
    for x in range(g.n):
        L[x, x] = g.degree(x)
        for y in g.adjacency[x]:
            L[x, y] = -1.0
    return L


def laplacian_spectrum(g: Graph, cap: int = SPECTRUM_SIZE_CAP) -> Spectrum:
    if g.n > cap:
        raise SizeCapError(f"graph has {g.n} vertices, spectrum cap is {cap}")
    if g.n == 0:
        return Spectrum(values=(), n=0, d=g.d)
    eig = np.linalg.eigvalsh(laplacian_matrix(g))
    return Spectrum(values=tuple(sorted(float(v) for v in eig)), n=g.n, d=g.d)


def _as_values(A) -> np.ndarray:
    if isinstance(A, Spectrum):
        return A.as_array()
    arr = np.asarray(list(A), dtype=float)
    return arr


def hausdorff_distance(A, B) -> float:
    a, b = _as_values(A), _as_values(B)
    if a.size == 0 or b.size == 0:
        raise ValueError("Hausdorff distance needs nonempty sets")
    M = np.abs(a[:, None] - b[None, :])
    return float(max(M.min(axis=1).max(), M.min(axis=0).max()))


# ---------------------------------------------------------------------------
# spectral window test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralFilter:
    """Trapezoid profile around ``center`` approximated by a Chebyshev
    polynomial on [0, two_d]; ``sup_error`` is measured on the audit grid."""

    center: float
    width: float  # the eps of the trapezoid
    two_d: float
    coefficients: tuple
    degree: int
    sup_error: float

    def profile(self, x):
        lam, eps = self.center, self.width
        x = np.asarray(x, dtype=float)
        up = np.clip((x - (lam - eps)) / (eps / 2), 0.0, 1.0)
        down = np.clip(((lam + eps) - x) / (eps / 2), 0.0, 1.0)
        return np.minimum(up, down)

    def poly(self, x):
        return Chebyshev(np.asarray(self.coefficients), domain=[0.0, self.two_d])(x)


_filter_cache: dict = {}


def build_spectral_filter(
    lam: float,
    eps: float,
    two_d: float,
    degree_cap: int = DEGREE_CAP,
    grid: int = AUDIT_GRID,
) -> SpectralFilter:
    """Smallest-degree Chebyshev approximation of the trapezoid with sup error
    <= eps on the audit grid (the construction targets 0.995 eps so the true
    sup error between grid points stays below eps)."""
    if not (0 < eps < 0.5):
        raise ValueError("eps must be in (0, 1/2)")
    key = (round(lam, 12), round(eps, 12), round(two_d, 12), degree_cap, grid)
    cached = _filter_cache.get(key)
    if cached is not None:
        return cached

    xs = np.linspace(0.0, two_d, grid)

    def trapezoid(x):
        up = np.clip((np.asarray(x) - (lam - eps)) / (eps / 2), 0.0, 1.0)
        down = np.clip(((lam + eps) - np.asarray(x)) / (eps / 2), 0.0, 1.0)
        return np.minimum(up, down)

    target = 0.995 * eps
    fx = trapezoid(xs)

    def sup_err(deg):
        ch = Chebyshev.interpolate(trapezoid, deg, domain=[0.0, two_d])
        return float(np.max(np.abs(ch(xs) - fx))), ch

    lo_deg, hi_deg = None, None
    deg = 8
    last = None
    while deg <= degree_cap:
        err, ch = sup_err(deg)
        if err <= target:
            hi_deg, last = deg, ch
            break
        lo_deg = deg
        deg *= 2
    if hi_deg is None:
        err, ch = sup_err(degree_cap)
        if err <= target:
            hi_deg, last = degree_cap, ch
        else:
            raise SizeCapError(
                f"degree cap {degree_cap} cannot reach sup error {target:g} "
                f"for lambda={lam}, eps={eps}"
            )
    lo = (lo_deg or 1) + 1
    hi = hi_deg
    while lo < hi:  # smallest passing degree; error is monotone enough here
        mid = (lo + hi) // 2
        err, ch = sup_err(mid)
        if err <= target:
            hi, last = mid, ch
        else:
            lo = mid + 1
    while hi > 1:
        err, ch = sup_err(hi - 1)
        if err <= target:
            hi, last = hi - 1, ch
        else:
            break
    final_err = float(np.max(np.abs(last(xs) - fx)))
    filt = SpectralFilter(
        center=lam,
        width=eps,
        two_d=two_d,
        coefficients=tuple(float(c) for c in last.coef),
        degree=hi,
        sup_error=final_err,
    )
    _filter_cache[key] = filt
    return filt


def spectral_window_test(g, lam: float, eps: float, spectrum: Spectrum | None = None) -> bool:
    """True iff ||p(L)|| > eps for the trapezoid filter at lambda.

    Soundness: a True verdict implies dist(lambda, Spec) < eps.
    Completeness: dist(lambda, Spec) <= eps/2 forces a True verdict.
    For finite graphs the norm is max |p(kappa)| over the eigenvalues.
    """
    h = host_of(g)
    filt = build_spectral_filter(lam, eps, 2.0 * h.d)
    if spectrum is None:
        spectrum = laplacian_spectrum(h)
    vals = filt.poly(spectrum.as_array())
    return bool(np.max(np.abs(vals)) > eps)


def window_filter_norm_estimate(
    w: Window, lam: float, eps: float, iters: int = 60, seed: int = 0
):
    """Matrix-free power-iteration estimate of ||p(L)|| on a window; the
    boundary contaminates the operator, so the result is flagged approximate.

    Returns (estimate, 'approximate')."""
    h = w.host
    filt = build_spectral_filter(lam, eps, 2.0 * h.d)
    coefs = np.asarray(filt.coefficients)
    deg_list = [g for g in h.adjacency]

    def matvec(v):
        out = np.empty_like(v)
        for x in range(h.n):
            out[x] = h.degree(x) * v[x] - sum(v[y] for y in h.adjacency[x])
        return out

    # Clenshaw for Chebyshev series in L mapped from [0, 2d] to [-1, 1]
    a, b = 0.0, 2.0 * h.d
    alpha, beta = 2.0 / (b - a), -(a + b) / (b - a)

    def apply_poly(v):
        bk1 = np.zeros_like(v)
        bk2 = np.zeros_like(v)
        for c in coefs[:0:-1]:
            tv = alpha * matvec(bk1) + beta * bk1
            bk = 2.0 * tv + c * v - bk2
            bk2, bk1 = bk1, bk
        tv = alpha * matvec(bk1) + beta * bk1
        return tv + coefs[0] * v - bk2

    rng = np.random.default_rng(seed)
    v = rng.standard_normal(h.n)
    mask = np.zeros(h.n)
    mask[list(w.interior)] = 1.0
    v *= mask
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        y = apply_poly(v)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            break
        est = max(est, nrm)
        v = y / nrm
    return est, "approximate"


# ---------------------------------------------------------------------------
# neighborhood profiles and distance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NeighborhoodProfile:
    radius: int
    signatures: frozenset  # BallSignature set, multiplicity dropped


def _roots(g) -> Sequence[int]:
    if isinstance(g, Window):
        return g.interior
    return range(g.n)


def neighborhood_profile(g, r: int) -> NeighborhoodProfile:
    """Deduplicated signatures of all r-balls (interior-rooted on Windows)."""
    h = host_of(g)
    if isinstance(g, Window):
        g.require_margin(r)
    sigs = set()
    for x in _roots(g):
        sigs.add(canonical_signature(ball(h, x, r)))
    return NeighborhoodProfile(radius=r, signatures=frozenset(sigs))


def profile_upto(g, r_cap: int) -> frozenset:
    """Ball types up to radius r_cap, keyed by (eccentricity, size, signature).

    A ball that stops growing (eccentricity below the query radius) is the
    same abstract rooted graph as its smaller-radius version and is recorded
    once, at its eccentricity.
    """
    h = host_of(g)
    if isinstance(g, Window):
        g.require_margin(r_cap)
    keys = set()
    for x in _roots(g):
        prev_order = -1
        for e in range(r_cap + 1):
            b = ball(h, x, e)
            if b.order == prev_order:
                break  # stopped growing; no new types from this root
            prev_order = b.order
            if b.eccentricity == e:
                keys.add((e, b.order, canonical_signature(b).data))
    return frozenset(keys)


@dataclass(frozen=True)
class NeighborhoodDistance:
    value: Fraction
    agreed_to_cap: bool
    index: int | None  # 1-based position of the first differing ball
    first_difference: tuple | None  # (ecc, size, signature bytes)


def corpus_enumeration(graphs: Sequence, r_cap: int) -> tuple:
    """Shared, sorted enumeration of every ball type occurring in a corpus;
    pass as ``universe`` to make distances across the corpus use consistent
    indices (the ultrametric inequality then holds exactly)."""
    keys = set()
    for g in graphs:
        keys |= profile_upto(g, r_cap)
    return tuple(sorted(keys))


def neighborhood_distance(g, h, r_cap: int, universe: Sequence | None = None) -> NeighborhoodDistance:
    """2^-n where n is the index of the first ball type (radius, then size,
    then signature bytes) on which the two profiles disagree; 0 when the
    profiles agree through r_cap (flagged)."""
    A = profile_upto(g, r_cap)
    B = profile_upto(h, r_cap)
    diff = A ^ B
    if universe is None:
        enum = sorted(A | B)
    else:
        enum = list(universe)
        missing = (A | B) - set(enum)
        if missing:
            raise ValueError("universe does not contain every observed ball type")
    if not diff:
        return NeighborhoodDistance(
            value=Fraction(0), agreed_to_cap=True, index=None, first_difference=None
        )
    first = min(diff)
    n = enum.index(first) + 1
    return NeighborhoodDistance(
        value=Fraction(1, 2**n), agreed_to_cap=False, index=n, first_difference=first
    )


# ---------------------------------------------------------------------------
# convergence experiment
# ---------------------------------------------------------------------------


def cycle_spectrum_closed_form(n: int) -> np.ndarray:
    ks = 2.0 * np.pi * np.arange(n) / n
    return np.sort(2.0 - 2.0 * np.cos(ks))


def torus_spectrum_closed_form(n: int, dim: int = 2) -> np.ndarray:
    one = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(n) / n)
    acc = one
    for _ in range(dim - 1):
        acc = (acc[:, None] + one[None, :]).ravel()
    return np.sort(acc)


def convergence_experiment(
    seq: Sequence,
    limit_proxy,
    r_cap: int,
    size_cap: int = SPECTRUM_SIZE_CAP,
    proxy_spectrum=None,
):
    """Per element: neighborhood distance to the proxy and Hausdorff distance
    of the Laplacian spectra.  Oversize rows are skipped with a note.

    Returns (rows, csv_text); each row is a dict with keys
    index, n, neigh_dist, spec_hausdorff, note.
    """
    if proxy_spectrum is None:
        proxy_vals = laplacian_spectrum(host_of(limit_proxy), cap=size_cap).as_array()
    else:
        proxy_vals = _as_values(proxy_spectrum)
    rows = []
    for idx, g in enumerate(seq):
        hst = host_of(g)
        if hst.n > size_cap:
            rows.append(
                {
                    "index": idx,
                    "n": hst.n,
                    "neigh_dist": "",
                    "spec_hausdorff": "",
                    "note": f"skipped: {hst.n} > size cap {size_cap}",
                }
            )
            continue
        nd = neighborhood_distance(g, limit_proxy, r_cap)
        spec = laplacian_spectrum(hst, cap=size_cap)
        hd = hausdorff_distance(spec.as_array(), proxy_vals)
        rows.append(
            {
                "index": idx,
                "n": hst.n,
                "neigh_dist": float(nd.value),
                "spec_hausdorff": hd,
                "note": "agree-to-cap" if nd.agreed_to_cap else "",
            }
        )
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf, fieldnames=["index", "n", "neigh_dist", "spec_hausdorff", "note"]
    )
    writer.writeheader()
    writer.writerows(rows)
    return rows, buf.getvalue()
