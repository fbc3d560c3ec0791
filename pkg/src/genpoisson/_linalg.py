"""Exact linear algebra over QQ (thin wrapper around sympy's DomainMatrix)."""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from .symexpr import to_fraction


def _dm(rows: Sequence[Sequence[Fraction]], ncols: int) -> DomainMatrix:
    data = [[QQ(int(to_fraction(v).numerator), int(to_fraction(v).denominator)) for v in r] for r in rows]
    return DomainMatrix(data, (len(data), ncols), QQ)


def rref(rows, ncols):
    if not rows:
        return [], ()
    m, pivots = _dm(rows, ncols).rref()
    return [[to_fraction(v) for v in r] for r in m.to_Matrix().tolist()], tuple(pivots)


def nullspace(rows: Sequence[Sequence[Fraction]], ncols: int) -> list[list[Fraction]]:
    """Basis of ``{c : rows @ c = 0}``, one vector per free column."""
    if not rows:
        return [[Fraction(int(i == j)) for j in range(ncols)] for i in range(ncols)]
    r, pivots = rref(rows, ncols)
    free = [j for j in range(ncols) if j not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, p in zip(r, pivots):
            v[p] = -row[f]
        basis.append(v)
    return basis


def solve(rows: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction], ncols: int):
    """A particular solution (free unknowns set to zero) or ``None``."""
    if not rows:
        return [Fraction(0)] * ncols
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    r, pivots = rref(aug, ncols + 1)
    if ncols in pivots:
        return None
    x = [Fraction(0)] * ncols
    for row, p in zip(r, pivots):
        x[p] = row[ncols]
    return x


def numerical_rank(matrix, rel_tol: float) -> tuple[int, list[float]]:
    import numpy as np

    s = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0, s.tolist()
    return int(np.sum(s > rel_tol * s[0])), s.tolist()
