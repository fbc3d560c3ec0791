"""Multivector fields and differential forms on a coordinate chart.

Both kinds store a sparse map from strictly increasing index tuples to
:class:`~genpoisson.symexpr.Expr` coefficients.  ``@x`` denotes the basis
vector field for coordinate ``x`` and ``dx`` the basis 1-form.

Contraction convention: ``contract(X1^...^Xp, w)`` feeds ``X1, ..., Xp`` into
the first ``p`` slots of ``w``, so ``contract(X^Y, a^b) = a(X)b(Y) - a(Y)b(X)``
and ``contract(P, df^dg)`` is the Poisson bracket of ``f`` and ``g``.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .symexpr import Expr, ParseError, UnknownVariableError, _Parser
from . import symexpr

__all__ = [
    "ExteriorError",
    "KVector",
    "KForm",
    "volume_form",
    "wedge",
    "exterior_derivative",
    "contract",
    "contract_covector",
    "lie_derivative",
    "lie_bracket",
    "lie_derivative_multivector",
    "schouten",
    "schouten_leibniz",
    "parse_kvector",
    "parse_kform",
    "permutation_sign",
    "commutator_exponent",
    "lie_contraction_commutator",
    "CONVENTIONS",
]


class ExteriorError(ValueError):
    pass


def permutation_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq``; 0 if an entry repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _merge(I: tuple[int, ...], J: tuple[int, ...]):
    """Sorted union of disjoint index tuples with the sign of ``I + J``."""
    s = permutation_sign(I + J)
    if s == 0:
        return None, 0
    return tuple(sorted(I + J)), s


class _Alternating:
    kind = ""
    _basis_prefix = ""

    __slots__ = ("vars", "grade", "coeffs")

    def __init__(self, vars: Sequence[str], grade: int, coeffs: Mapping[tuple, Expr] | None = None):
        self.vars = tuple(vars)
        self.grade = grade
        dim = len(self.vars)
        clean = {}
        for idx, c in (coeffs or {}).items():
            idx = tuple(idx)
            if len(idx) != grade:
                raise ExteriorError(f"index {idx} does not match grade {grade}")
            if any(i < 0 or i >= dim for i in idx) or any(a >= b for a, b in zip(idx, idx[1:])):
                raise ExteriorError(f"index {idx} is not strictly increasing below {dim}")
            if not isinstance(c, Expr):
                c = Expr.const(self.vars, c)
            elif c.vars != self.vars:
                raise ExteriorError("coefficient lives on a different chart")
            if c:
                clean[idx] = c
        if grade > dim and clean:
            raise ExteriorError(f"nonzero {self.kind} of grade {grade} > dim {dim}")
        if grade < 0 and clean:
            raise ExteriorError("negative grade is only allowed for zero")
        self.coeffs = dict(sorted(clean.items()))

    # constructors -------------------------------------------------------

    @classmethod
    def zero(cls, vars, grade):
        return cls(vars, grade, {})

    @classmethod
    def scalar(cls, f: Expr):
        return cls(f.vars, 0, {(): f})

    @classmethod
    def basis(cls, vars, indices: Sequence[int], coeff=1):
        """Coefficient times the wedge of basis elements in the given order."""
        vars = tuple(vars)
        idx = tuple(indices)
        s = permutation_sign(idx)
        if s == 0:
            return cls.zero(vars, len(idx))
        c = coeff if isinstance(coeff, Expr) else Expr.const(vars, coeff)
        return cls(vars, len(idx), {tuple(sorted(idx)): c * s})

    @classmethod
    def from_components(cls, components: Sequence[Expr]):
        """Grade-1 object from its coordinate components."""
        vars = components[0].vars
        return cls(vars, 1, {(i,): c for i, c in enumerate(components)})

    # queries -------------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.vars)

    def __getitem__(self, idx) -> Expr:
        if isinstance(idx, int):
            idx = (idx,)
        return self.coeffs.get(tuple(idx), Expr.const(self.vars, 0))

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self):
        return bool(self.coeffs)

    def components(self) -> list[Expr]:
        if self.grade != 1:
            raise ExteriorError("components() needs grade 1")
        return [self[(i,)] for i in range(self.dim)]

    def scalar_part(self) -> Expr:
        if self.grade != 0 and self.coeffs:
            raise ExteriorError("not a grade-0 object")
        return self[()] if self.grade == 0 else Expr.const(self.vars, 0)

    def _check(self, other):
        if type(other) is not type(self):
            raise ExteriorError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.vars != self.vars:
            raise ExteriorError("dimension mismatch")

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        if self.vars != other.vars:
            return False
        if self.coeffs != other.coeffs:
            return False
        return self.grade == other.grade or not self.coeffs

    def __hash__(self):
        return hash((self.kind, self.vars, tuple(self.coeffs.items())))

    def __add__(self, other):
        self._check(other)
        if self.grade != other.grade:
            if not other.coeffs:
                return self
            if not self.coeffs:
                return other
            raise ExteriorError(f"grade mismatch {self.grade} vs {other.grade}")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return type(self)(self.vars, self.grade, out)

    def __neg__(self):
        return type(self)(self.vars, self.grade, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, f):
        if isinstance(f, (int, Fraction)):
            f = Expr.const(self.vars, f)
        if not isinstance(f, Expr):
            return NotImplemented
        return type(self)(self.vars, self.grade, {k: v * f for k, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)

    def map_coeffs(self, fn):
        return type(self)(self.vars, self.grade, {k: fn(v) for k, v in self.coeffs.items()})

    def at(self, point) -> dict[tuple, Fraction]:
        """Exact coefficient values at a point."""
        return {k: v(point) for k, v in self.coeffs.items()}

    def to_dense(self, point) -> dict[tuple, Fraction]:
        vals = self.at(point)
        return {I: vals.get(I, Fraction(0)) for I in combinations(range(self.dim), self.grade)}

    # text ---------------------------------------------------------------

    def __str__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for idx, c in self.coeffs.items():
            basis = "^".join(self._basis_prefix + self.vars[i] for i in idx)
            coef = symexpr.to_text(c)
            if not basis:
                parts.append(f"({coef})")
            elif c == 1:
                parts.append(basis)
            else:
                parts.append(f"({coef})*{basis}")
        return " + ".join(parts)

    def __repr__(self):
        return f"{type(self).__name__}({str(self)!r}, grade={self.grade})"


class KVector(_Alternating):
    """Multivector field of a fixed grade."""

    kind = "multivector"
    _basis_prefix = "@"
    __slots__ = ()


class KForm(_Alternating):
    """Differential form of a fixed grade."""

    kind = "form"
    _basis_prefix = "d"
    __slots__ = ()

    @classmethod
    def d(cls, f: Expr) -> "KForm":
        return cls(f.vars, 1, {(i,): f.diff_index(i) for i in range(f.dim)})


def volume_form(coeff: Expr) -> KForm:
    """Top-degree form ``coeff * dx1^...^dxn``; the coefficient must not be identically zero."""
    if coeff.is_zero():
        raise ExteriorError("volume form coefficient is identically zero")
    return KForm(coeff.vars, coeff.dim, {tuple(range(coeff.dim)): coeff})


# -------------------------------------------------------------------------
# algebra


def wedge(a: _Alternating, b: _Alternating) -> _Alternating:
    a._check(b)
    out: dict[tuple, Expr] = {}
    for I, ca in a.coeffs.items():
        for J, cb in b.coeffs.items():
            K, s = _merge(I, J)
            if not s:
                continue
            term = ca * cb if s > 0 else -(ca * cb)
            out[K] = out[K] + term if K in out else term
    grade = a.grade + b.grade
    return type(a)(a.vars, grade, out)


def exterior_derivative(w: KForm) -> KForm:
    if not isinstance(w, KForm):
        raise ExteriorError("exterior derivative needs a form")
    out: dict[tuple, Expr] = {}
    for I, c in w.coeffs.items():
        for j in range(w.dim):
            if j in I:
                continue
            K, s = _merge((j,), I)
            dc = c.diff_index(j)
            if not dc:
                continue
            term = dc if s > 0 else -dc
            out[K] = out[K] + term if K in out else term
    return KForm(w.vars, w.grade + 1, out) if w.grade + 1 <= w.dim else KForm.zero(w.vars, w.grade + 1)


def _split_sign(I: tuple[int, ...], K: tuple[int, ...]):
    """For ``I`` a subset of ``K``: complement ``J`` and the sign of ``I + J`` against ``K``."""
    if not set(I) <= set(K):
        return None, 0
    J = tuple(k for k in K if k not in I)
    return J, permutation_sign(I + J)


def _contract_raw(U: _Alternating, w: _Alternating, out_cls):
    out: dict[tuple, Expr] = {}
    for I, cu in U.coeffs.items():
        for K, cw in w.coeffs.items():
            J, s = _split_sign(I, K)
            if not s:
                continue
            term = cu * cw if s > 0 else -(cu * cw)
            out[J] = out[J] + term if J in out else term
    return out_cls(w.vars, w.grade - U.grade, out)


def contract(U: KVector, w: KForm) -> KForm:
    """Interior product ``i_U w`` (``U`` fills the leading slots of ``w``)."""
    if not isinstance(U, KVector) or not isinstance(w, KForm):
        raise ExteriorError("contract(KVector, KForm) expected")
    if U.vars != w.vars:
        raise ExteriorError("dimension mismatch")
    if U.grade > w.grade:
        raise ExteriorError(f"cannot contract grade {U.grade} into a {w.grade}-form")
    return _contract_raw(U, w, KForm)


def _contract_or_zero(U: KVector, w: KForm) -> KForm:
    if U.grade > w.grade:
        return KForm.zero(w.vars, w.grade - U.grade)
    return contract(U, w)


def contract_covector(a: KForm, U: KVector) -> KVector:
    """Insert a 1-form into the leading slot of a multivector."""
    if a.grade != 1:
        raise ExteriorError("contract_covector needs a 1-form")
    if U.grade < 1:
        return KVector.zero(U.vars, U.grade - 1)
    return _contract_raw(a, U, KVector)


# The bracket formula used here satisfies
#     L_X i_Y - (-1)^e i_Y L_X = (-1)^e i_[X,Y],   e = (|X| - 1) |Y|
# with the contraction order above; both signs are pinned by property tests.
def commutator_exponent(gx: int, gy: int) -> int:
    return ((gx - 1) * gy) % 2


def lie_contraction_commutator(X: KVector, Y: KVector, w: KForm) -> KForm:
    """``(-1)^e L_X(i_Y w) - i_Y(L_X w)``; equals ``i_[X,Y] w``."""
    e = commutator_exponent(X.grade, Y.grade)
    a = lie_derivative(X, _contract_or_zero(Y, w))
    b = _contract_or_zero(Y, lie_derivative(X, w))
    return (-a if e else a) - b


CONVENTIONS = {
    "contraction": "i_(X1^...^Xp) w = w(X1, ..., Xp, ...)",
    "lie_contraction_commutator": "(-1)^((|X|-1)|Y|) L_X i_Y - i_Y L_X = i_[X,Y]",
    "hamiltonian_field": "X_f(g) = {g, f}",
    "schouten": "[X1^..^Xm, Y] = (-1)^(m+1) sum (-1)^(i+j) [Xi,Yj]^...",
}


def lie_derivative(X: KVector, w: KForm) -> KForm:
    """Generalized Lie derivative ``L_X = i_X d - (-1)^|X| d i_X``."""
    if X.vars != w.vars:
        raise ExteriorError("dimension mismatch")
    first = _contract_or_zero(X, exterior_derivative(w))
    inner = _contract_or_zero(X, w)
    second = exterior_derivative(inner) if inner.grade >= 0 else KForm.zero(w.vars, inner.grade + 1)
    grade = w.grade - X.grade + 1
    out = KForm.zero(w.vars, grade)
    if first.grade == grade:
        out = out + first
    if second.grade == grade:
        out = out + (-second if X.grade % 2 == 0 else second)
    return out


# -------------------------------------------------------------------------
# brackets


def lie_bracket(X: KVector, Y: KVector) -> KVector:
    """Lie bracket of vector fields, ``[X, Y](f) = X(Y f) - Y(X f)``."""
    if X.grade != 1 or Y.grade != 1:
        raise ExteriorError("lie_bracket needs vector fields")
    X._check(Y)
    out = {}
    for j in range(X.dim):
        acc = Expr.const(X.vars, 0)
        for (i,), xi in X.coeffs.items():
            acc = acc + xi * Y[j].diff_index(i)
        for (i,), yi in Y.coeffs.items():
            acc = acc - yi * X[j].diff_index(i)
        if acc:
            out[(j,)] = acc
    return KVector(X.vars, 1, out)


def _vector_apply(X: KVector, f: Expr) -> Expr:
    acc = Expr.const(f.vars, 0)
    for (i,), xi in X.coeffs.items():
        acc = acc + xi * f.diff_index(i)
    return acc


def lie_derivative_multivector(X: KVector, U: KVector) -> KVector:
    """Classical Lie derivative of a multivector field along a vector field."""
    if X.grade != 1:
        raise ExteriorError("lie_derivative_multivector needs a vector field")
    X._check(U)
    vars = U.vars
    out = KVector.zero(vars, U.grade)
    for I, u in U.coeffs.items():
        du = _vector_apply(X, u)
        if du:
            out = out + KVector(vars, U.grade, {I: du})
        # [X, @i] = -sum_j (d_i X^j) @j
        for pos, i in enumerate(I):
            for j in range(U.dim):
                c = X[j].diff_index(i)
                if not c:
                    continue
                idx = I[:pos] + (j,) + I[pos + 1:]
                out = out + KVector.basis(vars, idx, -(u * c))
    return out


def _schouten_function(U: KVector, f: Expr) -> KVector:
    # [U, f] = [f, U] = sum_pos (-1)^pos (d_{I_pos} f) u @_{I without pos}
    out = KVector.zero(U.vars, U.grade - 1)
    for I, u in U.coeffs.items():
        for pos, i in enumerate(I):
            df = f.diff_index(i)
            if not df:
                continue
            rest = I[:pos] + I[pos + 1:]
            c = u * df
            out = out + KVector(U.vars, U.grade - 1, {rest: c if pos % 2 == 0 else -c})
    return out


def schouten(U: KVector, V: KVector) -> KVector:
    """Schouten-Nijenhuis bracket via the formula on monomial multivectors.

    For ``U = X1^...^Xm`` and ``V = Y1^...^Yn``::

        [U, V] = (-1)^(m+1) sum_{i,j} (-1)^(i+j) [Xi, Yj] ^ X1..^Xi..Xm ^ Y1..^Yj..Yn

    Grade-0 arguments act as functions: ``[U, f] = [f, U]`` is the contraction
    of ``df`` into the leading slot of ``U`` and two functions bracket to zero.
    """
    if not isinstance(U, KVector) or not isinstance(V, KVector):
        raise ExteriorError("schouten needs multivector fields")
    U._check(V)
    p, q = U.grade, V.grade
    vars = U.vars
    if p == 0 and q == 0:
        return KVector.zero(vars, -1)
    if q == 0:
        return _schouten_function(U, V.scalar_part())
    if p == 0:
        return _schouten_function(V, U.scalar_part())
    out: dict[tuple, Expr] = {}

    def acc(idx, c):
        K = tuple(sorted(idx))
        s = permutation_sign(idx)
        if not s or not c:
            return
        c = c if s > 0 else -c
        if K in out:
            out[K] = out[K] + c
        else:
            out[K] = c

    outer = 1 if (p + 1) % 2 == 0 else -1
    for I, u in U.coeffs.items():
        for J, v in V.coeffs.items():
            for a in range(p):
                for b in range(q):
                    # X_a = (u if a == 0 else 1) @I[a], Y_b = (v if b == 0 else 1) @J[b]
                    xa = u if a == 0 else None
                    yb = v if b == 0 else None
                    rest_coeff = (v if b != 0 else None, u if a != 0 else None)
                    sign = outer * (1 if (a + b) % 2 == 0 else -1)
                    rest = I[:a] + I[a + 1:] + J[:b] + J[b + 1:]
                    mult = Expr.const(vars, sign)
                    for rc in rest_coeff:
                        if rc is not None:
                            mult = mult * rc
                    # [alpha @i, beta @j] = alpha d_i(beta) @j - beta d_j(alpha) @i
                    i, j = I[a], J[b]
                    if yb is not None:
                        t = yb.diff_index(i)
                        if xa is not None:
                            t = xa * t
                        acc((j,) + rest, mult * t)
                    if xa is not None:
                        t = xa.diff_index(j)
                        if yb is not None:
                            t = yb * t
                        acc((i,) + rest, -(mult * t))
    return KVector(vars, p + q - 1, out)


def schouten_leibniz(U: KVector, V: KVector) -> KVector:
    """Independent route to the Schouten bracket.

    Uses only Lie derivatives of multivectors along vector fields, graded
    antisymmetry ``[U, V] = (-1)^(|U||V|) [V, U]`` and the graded Leibniz
    rule ``[U, A^B] = [U, A]^B + (-1)^((|U|+1)|A|) A^[U, B]``.
    """
    U._check(V)
    p, q = U.grade, V.grade
    vars = U.vars
    if p == 0 and q == 0:
        return KVector.zero(vars, -1)
    if q == 0:
        return _schouten_function(U, V.scalar_part())
    if p == 0:
        return _schouten_function(V, U.scalar_part())
    out = KVector.zero(vars, p + q - 1)
    for J, v in V.coeffs.items():
        A = KVector(vars, 1, {(J[0],): v})
        B = KVector.basis(vars, J[1:])
        # [U, A] = (-1)^p [A, U] = (-1)^p L_A U
        UA = lie_derivative_multivector(A, U)
        if p % 2:
            UA = -UA
        term = wedge(UA, B)
        if q > 1:
            UB = schouten_leibniz(U, B)
            s = (p + 1) % 2 == 0
            tail = wedge(A, UB)
            term = term + (tail if s else -tail)
        out = out + term
    return out


# -------------------------------------------------------------------------
# text


class _AltParser(_Parser):
    def __init__(self, text, vars, prefix):
        super().__init__(text, vars)
        self.prefix = prefix
        # re-tokenize basis symbols: "@x" and "dx"
        toks = []
        i = 0
        raw = self.tokens
        while i < len(raw):
            kind, val, at = raw[i]
            if prefix == "@" and kind == "name" and val.startswith("@"):
                if val[1:] not in vars:
                    raise UnknownVariableError(f"unknown basis vector {val!r} at offset {at}")
                toks.append(("basis", val[1:], at))
            elif prefix == "d" and kind == "name" and val not in vars and val[:1] == "d" and val[1:] in vars:
                toks.append(("basis", val[1:], at))
            else:
                toks.append(raw[i])
            i += 1
        self.tokens = toks

    def alt_expr(self, cls, grade):
        parts = [self.alt_term(cls, grade)]
        while self.tok[0] in ("+", "-"):
            op = self.take()[0]
            t = self.alt_term(cls, grade)
            parts.append(t if op == "+" else -t)
        if self.tok[0] != "end":
            raise ParseError(f"unexpected {self.tok[1]!r}", self.tok[2])
        out = parts[0]
        for p in parts[1:]:
            out = out + p
        return out

    def alt_term(self, cls, grade):
        sign = 1
        while self.tok[0] in ("+", "-"):
            if self.take()[0] == "-":
                sign = -sign
        coeff = Expr.const(self.vars, sign)
        basis: list[int] | None = None
        while True:
            if self.tok[0] == "basis":
                if basis is not None:
                    raise ParseError("repeated basis chain", self.tok[2])
                basis = [self.vars.index(self.take()[1])]
                while self.tok[0] == "^":
                    self.take()
                    basis.append(self.vars.index(self.take("basis")[1]))
            else:
                coeff = coeff * self.power()
            if self.tok[0] == "*":
                self.take()
                continue
            if self.tok[0] == "/" and basis is None:
                at = self.take()[2]
                d = self.power()
                if d.is_zero():
                    raise ParseError("division by zero", at)
                coeff = coeff / d
                if self.tok[0] == "*":
                    self.take()
                    continue
            break
        basis = basis or []
        if grade is not None and len(basis) != grade and coeff:
            raise ExteriorError(f"term of grade {len(basis)} in a grade-{grade} object")
        return cls.basis(self.vars, basis, coeff)


def _parse_alt(text, vars, cls, prefix, grade):
    vars = tuple(vars)
    p = _AltParser(text, vars, prefix)
    for kind, val, at in p.tokens:
        if kind == "name" and val.startswith("@"):
            raise ParseError(f"vector basis symbol {val!r} in a form", at)
        if kind == "basis" and val not in vars:
            raise UnknownVariableError(f"unknown basis symbol at offset {at}")
    out = p.alt_expr(cls, grade)
    if grade is not None and out.is_zero():
        out = cls.zero(vars, grade)
    return out


def parse_kvector(text: str, vars: Iterable[str], grade: int | None = None) -> KVector:
    """Parse e.g. ``"x3*@x1^@x2 + x1*@x2^@x3"``."""
    return _parse_alt(text, vars, KVector, "@", grade)


def parse_kform(text: str, vars: Iterable[str], grade: int | None = None) -> KForm:
    """Parse e.g. ``"x*dx^dy - dz"``."""
    return _parse_alt(text, vars, KForm, "d", grade)
