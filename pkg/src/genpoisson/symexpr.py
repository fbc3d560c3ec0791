"""Exact rational functions over QQ in named chart coordinates.

An :class:`Expr` is a quotient of two sparse polynomials kept in canonical
form: the gcd of numerator and denominator is a unit, the denominator is
monic with respect to graded-lexicographic order, and zero is ``0/1``.
Structural equality is therefore semantic equality.

Polynomial storage and gcds are delegated to sympy's sparse ``PolyRing``.

Grammar accepted by :func:`parse`::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom ("^" unary)?          # exponent must reduce to an integer
    atom   := NUMBER | NAME | "(" expr ")"
    NUMBER := DIGITS ("." DIGITS)?
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from sympy.polys.domains import QQ
from sympy.polys.orderings import grlex
from sympy.polys.rings import PolyRing

__all__ = [
    "Expr",
    "SymexprError",
    "ParseError",
    "UnknownVariableError",
    "PoleError",
    "parse",
    "diff",
    "evaluate",
    "add",
    "mul",
    "neg",
    "inv",
    "variables",
    "to_fraction",
]


class SymexprError(ValueError):
    pass


class ParseError(SymexprError):
    """Malformed expression text; ``position`` is the 0-based offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnknownVariableError(SymexprError):
    pass


class PoleError(SymexprError, ZeroDivisionError):
    pass


@lru_cache(maxsize=None)
def _ring(names: tuple[str, ...]) -> PolyRing:
    if not names:
        # sympy rings need at least one generator; a dummy one is never used
        return PolyRing(("_",), QQ, grlex)
    return PolyRing(names, QQ, grlex)


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    # gmpy2.mpq / PythonMPQ
    return Fraction(int(value.numerator), int(value.denominator))


class Expr:
    """Immutable rational function in canonical form."""

    __slots__ = ("vars", "num", "den", "_hash")

    def __init__(self, vars: Sequence[str], num, den=None, *, _canonical=False):
        self.vars = tuple(vars)
        ring = _ring(self.vars)
        num = ring(num)
        den = ring.one if den is None else ring(den)
        if not _canonical:
            num, den = _canonicalize(num, den)
        self.num = num
        self.den = den
        self._hash = None

    # construction -------------------------------------------------------

    @classmethod
    def const(cls, vars: Sequence[str], value) -> "Expr":
        v = to_fraction(value)
        ring = _ring(tuple(vars))
        return cls(vars, ring(QQ(v.numerator, v.denominator)), _canonical=True)

    @classmethod
    def var(cls, vars: Sequence[str], name: str) -> "Expr":
        vars = tuple(vars)
        if name not in vars:
            raise UnknownVariableError(f"unknown variable {name!r}")
        ring = _ring(vars)
        return cls(vars, ring.gens[vars.index(name)], _canonical=True)

    @classmethod
    def monomial(cls, vars: Sequence[str], exponents: Sequence[int], coeff=1) -> "Expr":
        vars = tuple(vars)
        ring = _ring(vars)
        c = to_fraction(coeff)
        if c == 0:
            return cls(vars, ring.zero, _canonical=True)
        p = ring({tuple(exponents): QQ(c.numerator, c.denominator)})
        return cls(vars, p, _canonical=True)

    def _coerce(self, other) -> "Expr":
        if isinstance(other, Expr):
            if other.vars != self.vars:
                raise SymexprError(f"variable mismatch: {self.vars} vs {other.vars}")
            return other
        if isinstance(other, (int, Fraction)):
            return Expr.const(self.vars, other)
        return NotImplemented

    # queries ------------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.vars)

    def is_zero(self) -> bool:
        return not self.num

    def is_constant(self) -> bool:
        return self.num.is_ground and self.den.is_ground

    def is_polynomial(self) -> bool:
        return self.den.is_ground

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise SymexprError("expression is not constant")
        return to_fraction(self.num.LC if self.num else 0)

    def degree(self) -> int:
        """Total degree of the numerator (``-1`` for zero)."""
        if not self.num:
            return -1
        return max(sum(m) for m in self.num.monoms())

    def poly_terms(self) -> list[tuple[tuple[int, ...], Fraction]]:
        """Numerator terms in grlex-descending order."""
        return [(m, to_fraction(c)) for m, c in self.num.terms()]

    def __bool__(self):
        return bool(self.num)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Expr.const(self.vars, other)
        if not isinstance(other, Expr):
            return NotImplemented
        return self.vars == other.vars and self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.vars, tuple(self.num.terms()), tuple(self.den.terms())))
        return self._hash

    # arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.den == other.den:
            return Expr(self.vars, self.num + other.num, self.den)
        return Expr(self.vars, self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return Expr(self.vars, -self.num, self.den, _canonical=True)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if not self.num or not other.num:
            return Expr(self.vars, _ring(self.vars).zero, _canonical=True)
        return Expr(self.vars, self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def inverse(self) -> "Expr":
        if not self.num:
            raise ZeroDivisionError("inversion of the zero expression")
        return Expr(self.vars, self.den, self.num)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise SymexprError("exponent must be an integer")
        if n < 0:
            return self.inverse() ** (-n)
        return Expr(self.vars, self.num**n, self.den**n, _canonical=True)

    # calculus / evaluation ----------------------------------------------

    def diff(self, var: str) -> "Expr":
        if var not in self.vars:
            raise UnknownVariableError(f"unknown variable {var!r}")
        g = _ring(self.vars).gens[self.vars.index(var)]
        dn = self.num.diff(g)
        if self.den.is_ground:
            return Expr(self.vars, dn, self.den)
        dd = self.den.diff(g)
        return Expr(self.vars, dn * self.den - self.num * dd, self.den**2)

    def diff_index(self, i: int) -> "Expr":
        return self.diff(self.vars[i])

    def __call__(self, point) -> Fraction:
        return evaluate(self, point)

    def to_numpy(self):
        """Vectorized float evaluator ``f(coords)`` with coords of shape (dim, ...)."""
        nt = [(np.array(m), float(to_fraction(c))) for m, c in self.num.terms()]
        dt = [(np.array(m), float(to_fraction(c))) for m, c in self.den.terms()]

        def _poly(terms, xs):
            out = 0.0
            for m, c in terms:
                t = c
                for i, e in enumerate(m):
                    if e:
                        t = t * xs[i] ** int(e)
                out = out + t
            return out

        def f(coords):
            xs = [np.asarray(c, dtype=float) for c in coords]
            shape = np.broadcast(*xs).shape if xs else ()
            val = _poly(nt, xs) / _poly(dt, xs)
            return np.broadcast_to(np.asarray(val, dtype=float), shape).copy()

        return f

    def substitute(self, images: Sequence["Expr"]) -> "Expr":
        """Compose with a map: replace the i-th variable by ``images[i]``."""
        if len(images) != self.dim:
            raise SymexprError("substitution needs one image per variable")
        target_vars = images[0].vars if images else ()
        one = Expr.const(target_vars, 1)

        def _poly(p):
            out = Expr.const(target_vars, 0)
            for m, c in p.terms():
                t = one * to_fraction(c)
                for img, e in zip(images, m):
                    if e:
                        t = t * img**e
                out = out + t
            return out

        return _poly(self.num) / _poly(self.den)

    # printing -----------------------------------------------------------

    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"Expr({to_text(self)!r}, vars={list(self.vars)})"


def _canonicalize(num, den):
    if not den:
        raise ZeroDivisionError("zero denominator")
    ring = num.ring
    if not num:
        return ring.zero, ring.one
    if den.is_ground:
        c = den.LC
        return num.quo_ground(c), ring.one
    g = num.gcd(den)
    if not g.is_ground:
        num = num.exquo(g)
        den = den.exquo(g)
    c = den.LC
    if c != 1:
        num = num.quo_ground(c)
        den = den.quo_ground(c)
    return num, den


# -------------------------------------------------------------------------
# functional surface


def variables(vars: Sequence[str]) -> tuple[Expr, ...]:
    return tuple(Expr.var(vars, v) for v in vars)


def diff(e: Expr, var: str) -> Expr:
    return e.diff(var)


def add(a: Expr, b: Expr) -> Expr:
    return a + b


def mul(a: Expr, b: Expr) -> Expr:
    return a * b


def neg(a: Expr) -> Expr:
    return -a


def inv(a: Expr) -> Expr:
    return a.inverse()


def evaluate(e: Expr, point: Sequence) -> Fraction:
    """Exact value of ``e`` at a point of rationals."""
    if len(point) != e.dim:
        raise SymexprError(f"point has {len(point)} coordinates, chart has {e.dim}")
    vals = [QQ(f.numerator, f.denominator) for f in map(to_fraction, point)]
    if e.dim == 0:
        vals = [QQ(0)]
    d = e.den(*vals)
    if d == 0:
        raise PoleError(f"denominator of {e} vanishes at {tuple(map(str, point))}")
    n = e.num(*vals)
    return to_fraction(n) / to_fraction(d)


# -------------------------------------------------------------------------
# printer


def _frac_text(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"({c.numerator}/{c.denominator})"


def _poly_text(p, names) -> str:
    if not p:
        return "0"
    parts = []
    for mono, coeff in p.terms():
        c = to_fraction(coeff)
        factors = []
        for name, e in zip(names, mono):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        sign = "-" if c < 0 else "+"
        a = abs(c)
        if factors:
            body = "*".join(factors) if a == 1 else _frac_text(a) + "*" + "*".join(factors)
        else:
            body = _frac_text(a)
        parts.append((sign, body))
    first_sign, first = parts[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


def to_text(e: Expr) -> str:
    n = _poly_text(e.num, e.vars)
    if e.den == e.den.ring.one:
        return n
    return f"({n})/({_poly_text(e.den, e.vars)})"


# -------------------------------------------------------------------------
# parser

_PUNCT = set("+-*/^()")


def _tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            yield ("num", text[i:j], i)
            i = j
        elif ch.isalpha() or ch == "_" or (ch == "@" and i + 1 < n and (text[i + 1].isalpha() or text[i + 1] == "_")):
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            yield ("name", text[i:j], i)
            i = j
        elif ch in _PUNCT:
            yield (ch, ch, i)
            i += 1
        else:
            raise ParseError(f"unexpected character {ch!r}", i)
    yield ("end", "", n)


class _Parser:
    def __init__(self, text: str, vars: tuple[str, ...]):
        self.tokens = list(_tokenize(text))
        self.pos = 0
        self.vars = vars

    @property
    def tok(self):
        return self.tokens[self.pos]

    def take(self, kind=None):
        t = self.tok
        if kind is not None and t[0] != kind:
            what = "end of input" if t[0] == "end" else repr(t[1])
            raise ParseError(f"expected {kind!r}, found {what}", t[2])
        self.pos += 1
        return t

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok[0] != "end":
            raise ParseError(f"unexpected {self.tok[1]!r}", self.tok[2])
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.tok[0] in ("*", "/"):
            op, _, at = self.take()
            rhs = self.unary()
            if op == "*":
                e = e * rhs
            else:
                if rhs.is_zero():
                    raise ParseError("division by zero", at)
                e = e / rhs
        return e

    def unary(self) -> Expr:
        if self.tok[0] == "-":
            self.take()
            return -self.unary()
        if self.tok[0] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok[0] == "^":
            at = self.take()[2]
            exp_at = self.tok[2]
            exponent = self.unary()
            if not exponent.is_constant() or exponent.constant_value().denominator != 1:
                raise ParseError("exponentiation by non-integer", exp_at)
            n = int(exponent.constant_value())
            if n < 0 and base.is_zero():
                raise ParseError("negative power of zero", at)
            return base**n
        return base

    def atom(self) -> Expr:
        kind, text, at = self.tok
        if kind == "num":
            self.take()
            return Expr.const(self.vars, Fraction(text))
        if kind == "name":
            self.take()
            if text not in self.vars:
                raise UnknownVariableError(f"unknown identifier {text!r} at offset {at}")
            return Expr.var(self.vars, text)
        if kind == "(":
            self.take()
            e = self.expr()
            self.take(")")
            return e
        what = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {what}", at)


def parse(text: str, vars: Iterable[str]) -> Expr:
    """Parse ``text`` into a canonical :class:`Expr` over ``vars``."""
    vars = tuple(vars)
    if len(set(vars)) != len(vars):
        raise SymexprError("duplicate variable names")
    return _Parser(text, vars).parse()
