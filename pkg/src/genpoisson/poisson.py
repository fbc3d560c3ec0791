"""Poisson structures on a chart and the operators they induce.

Convention: ``X_f(g) = {g, f}``, so ``X_f = P#(df)`` with ``<b, P#(a)> = P(b, a)``.
With ``P = @x^@y`` this gives ``{x, y} = 1`` and ``X_x = -@y``.  The derivation
``g -> {f, g}`` is available separately as :func:`bracket_derivation`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations, combinations_with_replacement
from typing import Sequence

from . import _linalg
from .exterior import (
    ExteriorError,
    KForm,
    KVector,
    contract,
    exterior_derivative,
    lie_derivative,
    permutation_sign,
    schouten,
    volume_form,
    wedge,
)
from .symexpr import Expr, to_fraction

__all__ = [
    "PoissonError",
    "PoissonStructure",
    "ModularField",
    "TrivialityReport",
    "bracket",
    "bracket_derivation",
    "hamiltonian_field",
    "sigma",
    "canonical_delta",
    "canonical_delta_expanded",
    "star",
    "modular_field",
    "modular_change_of_volume_check",
    "modular_triviality_witness",
    "casimir_scan",
    "monomials",
    "apply_vector_field",
]


class PoissonError(ValueError):
    pass


def monomials(vars: Sequence[str], max_degree: int, min_degree: int = 0) -> list[Expr]:
    """All monomials with ``min_degree <= degree <= max_degree``, by degree then lex."""
    vars = tuple(vars)
    n = len(vars)
    out = []
    for deg in range(min_degree, max_degree + 1):
        for combo in combinations_with_replacement(range(n), deg):
            exps = [0] * n
            for i in combo:
                exps[i] += 1
            out.append(Expr.monomial(vars, exps))
    return out


def apply_vector_field(X: KVector, f: Expr) -> Expr:
    acc = Expr.const(f.vars, 0)
    for (i,), c in X.coeffs.items():
        acc = acc + c * f.diff_index(i)
    return acc


class PoissonStructure:
    """A bivector field on a chart; the Jacobi verdict is computed once, lazily."""

    def __init__(self, P: KVector):
        if not isinstance(P, KVector) or (P.grade != 2 and not P.is_zero()):
            raise PoissonError("a Poisson structure needs a bivector")
        self.P = P if P.grade == 2 else KVector.zero(P.vars, 2)
        self.vars = P.vars

    @classmethod
    def from_table(cls, vars: Sequence[str], table) -> "PoissonStructure":
        """``table`` maps strictly upper pairs ``(i, j)`` to coefficients."""
        vars = tuple(vars)
        coeffs = {}
        for (i, j), c in table.items():
            if not (0 <= i < j < len(vars)):
                raise PoissonError(f"bivector index ({i}, {j}) is not a strictly upper pair")
            coeffs[(i, j)] = c if isinstance(c, Expr) else Expr.const(vars, c)
        return cls(KVector(vars, 2, coeffs))

    @property
    def dim(self) -> int:
        return len(self.vars)

    @cached_property
    def matrix(self) -> list[list[Expr]]:
        n = self.dim
        zero = Expr.const(self.vars, 0)
        m = [[zero] * n for _ in range(n)]
        for (i, j), c in self.P.coeffs.items():
            m[i][j] = c
            m[j][i] = -c
        return m

    @cached_property
    def jacobiator(self) -> KVector:
        return schouten(self.P, self.P)

    @cached_property
    def jacobi_ok(self) -> bool:
        return self.jacobiator.is_zero()

    def rank_at(self, point) -> int:
        import sympy

        return sympy.Matrix([[c(point) for c in row] for row in self.matrix]).rank()

    @cached_property
    def pfaffian(self) -> Expr:
        return _pfaffian(self.matrix, list(range(self.dim)), self.vars)

    def __repr__(self):
        return f"PoissonStructure({self.P})"


def _pfaffian(m, idx, vars) -> Expr:
    if not idx:
        return Expr.const(vars, 1)
    if len(idx) % 2:
        return Expr.const(vars, 0)
    first, rest = idx[0], idx[1:]
    acc = Expr.const(vars, 0)
    for pos, j in enumerate(rest):
        a = m[first][j]
        if not a:
            continue
        sub = rest[:pos] + rest[pos + 1:]
        term = a * _pfaffian(m, sub, vars)
        acc = acc + (term if pos % 2 == 0 else -term)
    return acc


def _det(m, vars) -> Expr:
    n = len(m)
    if n == 0:
        return Expr.const(vars, 1)
    acc = Expr.const(vars, 0)
    for j in range(n):
        if not m[0][j]:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = m[0][j] * _det(minor, vars)
        acc = acc + (term if j % 2 == 0 else -term)
    return acc


def _same_chart(ps: PoissonStructure, *exprs):
    for e in exprs:
        if e.vars != ps.vars:
            raise PoissonError("dimension mismatch between structure and argument")


# -------------------------------------------------------------------------
# bracket and Hamiltonian fields


def bracket(ps: PoissonStructure, f: Expr, g: Expr) -> Expr:
    """``{f, g} = P(df, dg)``."""
    _same_chart(ps, f, g)
    acc = Expr.const(ps.vars, 0)
    df = [f.diff_index(i) for i in range(ps.dim)]
    dg = [g.diff_index(i) for i in range(ps.dim)]
    for (i, j), c in ps.P.coeffs.items():
        t = df[i] * dg[j] - df[j] * dg[i]
        if t:
            acc = acc + c * t
    return acc


def hamiltonian_field(ps: PoissonStructure, f: Expr) -> KVector:
    """``X_f`` with ``X_f(g) = {g, f}``."""
    _same_chart(ps, f)
    n = ps.dim
    df = [f.diff_index(b) for b in range(n)]
    comps = {}
    for j in range(n):
        acc = Expr.const(ps.vars, 0)
        for b in range(n):
            if df[b] and ps.matrix[j][b]:
                acc = acc + ps.matrix[j][b] * df[b]
        comps[(j,)] = acc
    return KVector(ps.vars, 1, comps)


def bracket_derivation(ps: PoissonStructure, f: Expr) -> KVector:
    """The vector field ``g -> {f, g}`` (equal to ``-X_f``)."""
    return -hamiltonian_field(ps, f)


def sigma(ps: PoissonStructure, W) -> KVector:
    """Lichnerowicz coboundary: ``X_f`` on functions, ``[P, W]`` otherwise."""
    if isinstance(W, Expr):
        return hamiltonian_field(ps, W)
    if W.grade == 0:
        return hamiltonian_field(ps, W.scalar_part())
    return schouten(ps.P, W)


# -------------------------------------------------------------------------
# canonical boundary and symplectic star


def canonical_delta(ps: PoissonStructure, w: KForm) -> KForm:
    """``delta = i_P d - d i_P``; lowers degree by one."""
    if w.vars != ps.vars:
        raise PoissonError("dimension mismatch")
    k = w.grade
    out = KForm.zero(ps.vars, k - 1)
    dw = exterior_derivative(w)
    if dw.grade >= 2 and dw.grade <= ps.dim:
        out = out + contract(ps.P, dw)
    if k >= 2:
        out = out - exterior_derivative(contract(ps.P, w))
    return out


def canonical_delta_expanded(ps: PoissonStructure, phis: Sequence[Expr]) -> KForm:
    """``delta(phi0 dphi1^...^dphik)`` by the expanded bracket formula."""
    phi0, rest = phis[0], list(phis[1:])
    k = len(rest)
    vars = ps.vars
    d = [KForm.d(p) for p in rest]

    def wedge_all(forms):
        out = KForm.scalar(Expr.const(vars, 1))
        for f in forms:
            out = wedge(out, f)
        return out

    out = KForm.zero(vars, k - 1)
    for i in range(k):
        c = bracket(ps, phi0, rest[i])
        # the sign (-1)^(i+1) uses 1-based i, so an even 0-based i gives +
        term = wedge_all(d[:i] + d[i + 1:]) * c
        out = out + (term if i % 2 == 0 else -term)
    for i, j in combinations(range(k), 2):
        db = KForm.d(bracket(ps, rest[i], rest[j]))
        others = [d[m] for m in range(k) if m not in (i, j)]
        term = wedge(db, wedge_all(others)) * phi0
        out = out + (term if (i + j) % 2 == 0 else -term)
    return out


def _pairing_det(ps: PoissonStructure, L, I) -> Expr:
    m = [[ps.matrix[a][b] for b in I] for a in L]
    return _det(m, ps.vars)


def star(ps: PoissonStructure, w: KForm) -> KForm:
    """Symplectic star: ``a ^ *w = P^k(a, w) * omega^n / n!`` for all k-forms ``a``."""
    n = ps.dim
    if n % 2 or not ps.pfaffian:
        raise PoissonError("star undefined for degenerate structure")
    vol = ps.pfaffian.inverse()
    k = w.grade
    top = tuple(range(n))
    out = KForm.zero(ps.vars, n - k)
    for I, c in w.coeffs.items():
        for L in combinations(range(n), k):
            pk = _pairing_det(ps, L, I)
            if not pk:
                continue
            comp = tuple(i for i in top if i not in L)
            s = permutation_sign(L + comp)
            out = out + KForm(ps.vars, n - k, {comp: c * pk * vol * s})
    return out


# -------------------------------------------------------------------------
# modular theory


@dataclass(frozen=True)
class ModularField:
    field: KVector
    volume: KForm

    def __call__(self, f: Expr) -> Expr:
        return apply_vector_field(self.field, f)


def _check_volume(ps: PoissonStructure, W: KForm) -> Expr:
    if W.vars != ps.vars or W.grade != ps.dim:
        raise PoissonError("volume form must be a top-degree form on the chart")
    w = W[tuple(range(ps.dim))]
    if not w:
        raise PoissonError("volume form coefficient is identically zero")
    return w


def modular_value(ps: PoissonStructure, W: KForm, f: Expr) -> Expr:
    """``mu_W(f)`` straight from ``mu_W(f) W = L_{X_f} W``."""
    w = _check_volume(ps, W)
    L = lie_derivative(hamiltonian_field(ps, f), W)
    return L[tuple(range(ps.dim))] / w


def modular_field(ps: PoissonStructure, W: KForm) -> ModularField:
    """Modular vector field, assembled from its values on the coordinates."""
    coords = [Expr.var(ps.vars, v) for v in ps.vars]
    comps = {(i,): modular_value(ps, W, x) for i, x in enumerate(coords)}
    return ModularField(KVector(ps.vars, 1, comps), W)


def modular_change_of_volume_check(
    ps: PoissonStructure,
    W: KForm,
    phi: Expr,
    degree_bound: int = 2,
    mu_override: KVector | None = None,
) -> bool:
    """Check ``mu_{phi W}(f) = mu_W(f) + X_f(phi)/phi`` on monomials up to ``degree_bound``.

    This is the rational form of ``mu_W - mu_{phi W} = sigma(ln phi)``.
    ``mu_override`` replaces ``mu_W`` (used for negative controls).
    """
    if phi.is_zero():
        raise PoissonError("phi must not vanish identically")
    _check_volume(ps, W)
    mu = mu_override if mu_override is not None else modular_field(ps, W).field
    W1 = W * phi
    for f in monomials(ps.vars, degree_bound):
        lhs = modular_value(ps, W1, f)
        rhs = apply_vector_field(mu, f) + apply_vector_field(hamiltonian_field(ps, f), phi) / phi
        if lhs != rhs:
            return False
    return True


@dataclass(frozen=True)
class TrivialityReport:
    witness: Expr | None
    degree_bound: int
    modular: KVector

    @property
    def found(self) -> bool:
        return self.witness is not None

    @property
    def message(self) -> str:
        if self.found:
            return f"modular field equals sigma(psi) with psi = {self.witness}"
        return (
            f"no polynomial witness of degree <= {self.degree_bound}; "
            "this does not prove the modular class is nontrivial"
        )


def _numerator_equations(exprs_by_unknown: list[list[Expr]], targets: list[Expr]):
    """Rows for ``sum_m c_m E[m][j] = T[j]`` (all j), after clearing denominators."""
    vars = targets[0].vars
    rows, rhs = [], []
    ncols = len(exprs_by_unknown)
    for j, t in enumerate(targets):
        dens = [t.den] + [e[j].den for e in exprs_by_unknown]
        D = dens[0]
        for d in dens[1:]:
            D = D.lcm(d)
        Dx = Expr(vars, D)
        cols = [(e[j] * Dx) for e in exprs_by_unknown]
        tt = t * Dx
        monos = set()
        for c in cols:
            monos.update(c.num.monoms())
        monos.update(tt.num.monoms())
        for mono in sorted(monos):
            row = [to_fraction(c.num.get(mono, 0)) for c in cols]
            b = to_fraction(tt.num.get(mono, 0))
            rows.append(row)
            rhs.append(b)
    return rows, rhs, ncols


def modular_triviality_witness(ps: PoissonStructure, W: KForm, degree_bound: int) -> TrivialityReport:
    """Search for a polynomial ``psi`` with ``sigma(psi) = mu_W``, ``deg psi <= degree_bound``."""
    if not ps.jacobi_ok:
        raise PoissonError("triviality search needs a verified Poisson structure")
    mu = modular_field(ps, W).field
    if mu.is_zero():
        return TrivialityReport(Expr.const(ps.vars, 0), degree_bound, mu)
    basis = monomials(ps.vars, degree_bound, min_degree=1)
    fields = [hamiltonian_field(ps, m).components() for m in basis]
    rows, rhs, ncols = _numerator_equations(fields, mu.components())
    sol = _linalg.solve(rows, rhs, ncols)
    if sol is None:
        return TrivialityReport(None, degree_bound, mu)
    psi = Expr.const(ps.vars, 0)
    for c, m in zip(sol, basis):
        if c:
            psi = psi + m * c
    return TrivialityReport(psi, degree_bound, mu)


def casimir_scan(ps: PoissonStructure, degree_bound: int) -> list[Expr]:
    """Basis of polynomial Casimirs (``X_C = 0``) of degree at most ``degree_bound``."""
    basis = monomials(ps.vars, degree_bound)
    fields = [hamiltonian_field(ps, m).components() for m in basis]
    zero = [Expr.const(ps.vars, 0)] * ps.dim
    rows, _, ncols = _numerator_equations(fields, zero)
    rows = [r for r in rows if any(r)]
    out = []
    for v in _linalg.nullspace(rows, ncols):
        c = Expr.const(ps.vars, 0)
        for coef, m in zip(v, basis):
            if coef:
                c = c + m * coef
        out.append(c)
    out.sort(key=lambda e: (e.degree(), str(e)))
    return out
