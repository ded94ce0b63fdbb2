"""Exact rational linear programming via two-phase simplex with Bland's rule.

Small and deliberately simple: the separator LPs this package solves have at
most a few dozen variables, and the acceptance checks require the primal and
dual optima to agree as exact rationals, so everything runs over Fraction.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

__all__ = ["LPResult", "simplex_min", "LPError"]


class LPError(RuntimeError):
    pass


class LPResult:
    def __init__(self, status: str, x=None, objective=None):
        self.status = status  # "optimal" | "infeasible" | "unbounded"
        self.x = x
        self.objective = objective

    def __repr__(self):
        return f"LPResult({self.status}, obj={self.objective})"


def _pivot(T, basis, row, col):
    piv = T[row][col]
    T[row] = [v / piv for v in T[row]]
    for r in range(len(T)):
        if r != row and T[r][col] != 0:
            f = T[r][col]
            T[r] = [a - f * b for a, b in zip(T[r], T[row])]
    basis[row] = col


def _solve_phase(T, basis, ncols):
    """Run simplex iterations on tableau T (last row = objective, last column
    = rhs) until optimal or unbounded.  Bland's rule guarantees termination."""
    mrows = len(T) - 1
    while True:
        obj = T[-1]
        col = next((j for j in range(ncols) if obj[j] < 0), None)
        if col is None:
            return "optimal"
        best = None
        for r in range(mrows):
            if T[r][col] > 0:
                ratio = T[r][-1] / T[r][col]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[r] < basis[best[1]]):
                    best = (ratio, r)
        if best is None:
            return "unbounded"
        _pivot(T, basis, best[1], col)


def simplex_min(c: Sequence[Fraction], A: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> LPResult:
    """min c.x subject to A x = b, x >= 0 (exact rationals).

    Two-phase simplex.  Rows with negative rhs are negated first.
    """
    m = len(A)
    n = len(c)
    A = [[Fraction(v) for v in row] for row in A]
    b = [Fraction(v) for v in b]
    c = [Fraction(v) for v in c]
    for i in range(m):
        if len(A[i]) != n:
            raise LPError("ragged constraint matrix")
        if b[i] < 0:
            A[i] = [-v for v in A[i]]
            b[i] = -b[i]

    # phase 1 tableau: [A | I | b], objective = sum of artificials
    ncols = n + m
    T = [A[i] + [Fraction(int(j == i)) for j in range(m)] + [b[i]] for i in range(m)]
    basis = [n + i for i in range(m)]
    obj = [Fraction(0)] * (ncols + 1)
    for i in range(m):
        for j in range(ncols + 1):
            obj[j] -= T[i][j]
    for j in range(n, ncols):
        obj[j] = Fraction(0)
    T.append(obj)
    status = _solve_phase(T, basis, ncols)
    if status != "optimal" or T[-1][-1] != 0:
        return LPResult("infeasible")

    # drive artificial variables out of the basis where possible
    for r in range(m):
        if basis[r] >= n:
            col = next((j for j in range(n) if T[r][j] != 0), None)
            if col is not None:
                _pivot(T, basis, r, col)
    rows = [r for r in range(m) if basis[r] < n]
    if len(rows) < m:
        # drop redundant all-zero rows left by dependent constraints
        T = [T[r] for r in range(m) if basis[r] < n] + [T[-1]]
        basis = [basis[r] for r in range(m) if basis[r] < n]
        m = len(basis)

    # phase 2: real objective over original columns only
    T2 = [T[r][:n] + [T[r][-1]] for r in range(m)]
    obj2 = list(c) + [Fraction(0)]
    for r in range(m):
        j = basis[r]
        if obj2[j] != 0:
            f = obj2[j]
            obj2 = [a - f * bb for a, bb in zip(obj2, T2[r])]
    T2.append(obj2)
    status = _solve_phase(T2, basis, n)
    if status == "unbounded":
        return LPResult("unbounded")
    x = [Fraction(0)] * n
    for r in range(m):
        x[basis[r]] = T2[r][-1]
    objective = sum(ci * xi for ci, xi in zip(c, x))
    return LPResult("optimal", x=x, objective=objective)
