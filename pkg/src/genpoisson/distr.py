"""Generalized functions supported on leaves, and their Poisson-module structure.

Two realizations are supported.  Function-realized distributions (Dirac,
its derivative, leaf deltas) pair with functions; form-realized ones
(transversal deltas) pair with top-degree forms.  A :class:`Distribution` is
a finite formal sum of primitives with exact rational weights.

Module action on test objects follows the adjoint rules::

    <f.Phi, g>     =  <Phi, f g>
    <X(Phi), f>    = -<Phi, X(f)>         (functions)
    <X(Phi), a>    = -<Phi, L_X a>        (top forms)
    {f, Phi}       =  ad_f(Phi),  ad_f(g) = {f, g}

Dirac-type primitives stay closed under multiplication and first-order
derivation; anything else becomes a :class:`Deferred` wrapper that pairs
through the adjoint identity.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import factorial
from typing import Union

import numpy as np

from . import _linalg
from .exterior import KForm, KVector, contract, exterior_derivative, lie_derivative, volume_form
from .leaf import (
    ParameterizedLeaf,
    PointLeaf,
    _eval_float,
    _numeric,
    _pfaffian_float,
    _values_at,
    bott_derivative_multi,
    bott_field,
    symplectic_form_on_frame,
    transversal_class,
)
from .poisson import PoissonStructure, apply_vector_field, bracket, bracket_derivation, monomials
from .report import FAIL, PASS, Report
from .symexpr import Expr, to_fraction

__all__ = [
    "DistrError",
    "Dirac",
    "DiracDerivative",
    "LeafDelta",
    "TransversalDelta",
    "Deferred",
    "Distribution",
    "Function",
    "TopForm",
    "Multiply",
    "Derive",
    "Bracket",
    "distribution",
    "pair",
    "pair_with_refinement",
    "module_action",
    "hamiltonian_potential",
    "genc_check",
    "leaf_delta_independence",
    "delta_N_annihilator_check",
    "transversal_delta_flatness",
]


class DistrError(ValueError):
    pass


FUNCTION = "function"
FORM = "form"

# ---------------------------------------------------------------------------
# primitives


@dataclass(frozen=True)
class Dirac:
    point: tuple

    def __post_init__(self):
        object.__setattr__(self, "point", tuple(to_fraction(v) for v in self.point))

    realization = FUNCTION


@dataclass(frozen=True)
class DiracDerivative:
    """``<delta'(v), f> = -df_x0(v)``."""

    point: tuple
    direction: tuple

    def __post_init__(self):
        object.__setattr__(self, "point", tuple(to_fraction(v) for v in self.point))
        object.__setattr__(self, "direction", tuple(to_fraction(v) for v in self.direction))
        if len(self.point) != len(self.direction):
            raise DistrError("direction and point dimensions differ")

    realization = FUNCTION


@dataclass(frozen=True, eq=False)
class LeafDelta:
    leaf: Union[PointLeaf, ParameterizedLeaf]

    realization = FUNCTION


@dataclass(frozen=True, eq=False)
class TransversalDelta:
    """``<delta^u, a> = int_N i_u a`` for ``u`` of grade ``dim - dim N``."""

    leaf: Union[PointLeaf, ParameterizedLeaf]
    u: KVector

    def __post_init__(self):
        if self.u.grade != self.leaf.ps.dim - self.leaf.leaf_dim and not self.u.is_zero():
            raise DistrError(
                f"transversal grade must be {self.leaf.ps.dim - self.leaf.leaf_dim}, got {self.u.grade}"
            )

    realization = FORM


@dataclass(frozen=True, eq=False)
class Deferred:
    """``kind`` is ``"multiply"`` (arg an Expr) or ``"derive"`` (arg a vector field)."""

    kind: str
    arg: object
    inner: "Distribution"

    @property
    def realization(self):
        return self.inner.realization


Primitive = Union[Dirac, DiracDerivative, LeafDelta, TransversalDelta, Deferred]


def _is_exact(p) -> bool:
    if isinstance(p, (Dirac, DiracDerivative)):
        return True
    if isinstance(p, (LeafDelta, TransversalDelta)):
        return isinstance(p.leaf, PointLeaf)
    return p.inner.exact


class Distribution:
    """Finite formal sum ``sum_i w_i * primitive_i`` with rational weights."""

    __slots__ = ("terms",)

    def __init__(self, terms=()):
        merged: dict = {}
        order = []
        for w, p in terms:
            w = to_fraction(w)
            if w == 0 or _is_trivial(p):
                continue
            if p not in merged:
                order.append(p)
                merged[p] = Fraction(0)
            merged[p] += w
        self.terms = tuple((merged[p], p) for p in order if merged[p] != 0)
        if len({p.realization for _, p in self.terms}) > 1:
            raise DistrError("cannot mix function- and form-realized distributions")

    @property
    def realization(self):
        return self.terms[0][1].realization if self.terms else None

    @property
    def exact(self) -> bool:
        return all(_is_exact(p) for _, p in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other):
        return Distribution(self.terms + other.terms)

    def __sub__(self, other):
        return self + other * -1

    def __mul__(self, c):
        c = to_fraction(c)
        return Distribution((w * c, p) for w, p in self.terms)

    __rmul__ = __mul__

    def __repr__(self):
        if not self.terms:
            return "Distribution(0)"
        return "Distribution(" + " + ".join(f"{w}*{p!r}" for w, p in self.terms) + ")"


def _is_trivial(p) -> bool:
    if isinstance(p, DiracDerivative):
        return not any(p.direction)
    if isinstance(p, TransversalDelta):
        return p.u.is_zero()
    if isinstance(p, Deferred):
        return p.inner.is_zero() or (p.kind == "derive" and p.arg.is_zero()) or (
            p.kind == "multiply" and p.arg.is_zero()
        )
    return False


def distribution(*prims, weights=None) -> Distribution:
    weights = weights or [1] * len(prims)
    return Distribution(zip(weights, prims))


# ---------------------------------------------------------------------------
# test objects and pairing


@dataclass(frozen=True)
class Function:
    f: Expr


@dataclass(frozen=True)
class TopForm:
    form: KForm


def _unwrap(t):
    if isinstance(t, Function):
        return FUNCTION, t.f
    if isinstance(t, TopForm):
        t = t.form
    if isinstance(t, KForm):
        if t.grade != t.dim and not t.is_zero():
            raise DistrError("test forms must be top-degree")
        return FORM, t
    if isinstance(t, Expr):
        return FUNCTION, t
    raise DistrError(f"not a test object: {t!r}")


def pair(phi: Distribution, t):
    """Pair with a test function or top form.

    Exact (``Fraction``) when every primitive is exact, float otherwise.
    """
    if not isinstance(phi, Distribution):
        phi = Distribution([(1, phi)])
    kind, obj = _unwrap(t)
    if phi.is_zero():
        return Fraction(0)
    if phi.realization != kind:
        raise DistrError(f"realization mismatch: {phi.realization}-realized distribution paired with a {kind}")
    total = Fraction(0) if phi.exact else 0.0
    for w, p in phi.terms:
        v = _pair_primitive(p, obj)
        total += (w * v) if isinstance(v, Fraction) else float(w) * v
    return total


def _pair_primitive(p, obj):
    if isinstance(p, Dirac):
        return obj(p.point)
    if isinstance(p, DiracDerivative):
        return -sum((obj.diff_index(i)(p.point) * v for i, v in enumerate(p.direction) if v), Fraction(0))
    if isinstance(p, LeafDelta):
        if isinstance(p.leaf, PointLeaf):
            return obj(p.leaf.point)
        X, _, _ = p.leaf.node_arrays()
        return float(np.sum(_values(obj, X) * p.leaf.liouville_weights()))
    if isinstance(p, TransversalDelta):
        inner = contract(p.u, obj)
        if isinstance(p.leaf, PointLeaf):
            return inner.scalar_part()(p.leaf.point)
        return _integrate_form(p.leaf, inner)
    if isinstance(p, Deferred):
        if p.kind == "multiply":
            return pair(p.inner, obj * p.arg)
        if isinstance(obj, KForm):
            return -pair(p.inner, lie_derivative(p.arg, obj))
        return -pair(p.inner, apply_vector_field(p.arg, obj))
    raise DistrError(f"unknown primitive {p!r}")


def _values(e: Expr, X: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(_numeric(e)(X), dtype=float), X.shape[1:])


def _integrate_form(leaf: ParameterizedLeaf, w: KForm) -> float:
    """Quadrature of a leaf-degree form pulled back through the charts."""
    X, J, weights = leaf.node_arrays()
    density = np.zeros(weights.shape)
    for K, c in w.coeffs.items():
        density += _values(c, X) * np.linalg.det(J[:, list(K), :])
    return float(np.sum(density * weights))


def _with_order(phi: Distribution, delta: int) -> Distribution:
    def fix(p):
        if isinstance(p, LeafDelta) and isinstance(p.leaf, ParameterizedLeaf):
            return LeafDelta(p.leaf.with_order(p.leaf.order + delta))
        if isinstance(p, TransversalDelta) and isinstance(p.leaf, ParameterizedLeaf):
            return TransversalDelta(p.leaf.with_order(p.leaf.order + delta), p.u)
        if isinstance(p, Deferred):
            return Deferred(p.kind, p.arg, _with_order(p.inner, delta))
        return p

    return Distribution((w, fix(p)) for w, p in phi.terms)


def pair_with_refinement(phi: Distribution, t):
    """``(value, |value - value at one higher quadrature order|)``."""
    value = pair(phi, t)
    if phi.exact:
        return value, 0.0
    return value, abs(float(pair(_with_order(phi, 1), t)) - float(value))


# ---------------------------------------------------------------------------
# module action


@dataclass(frozen=True)
class Multiply:
    f: Expr


@dataclass(frozen=True)
class Derive:
    X: KVector


@dataclass(frozen=True)
class Bracket:
    """``{f, .}``: derivation by ``ad_f``."""

    ps: PoissonStructure
    f: Expr


def module_action(op, phi) -> Distribution:
    if not isinstance(phi, Distribution):
        phi = Distribution([(1, phi)])
    if isinstance(op, Bracket):
        op = Derive(bracket_derivation(op.ps, op.f))
    out = []
    for w, p in phi.terms:
        out.extend((w * c, q) for c, q in _act(op, p))
    return Distribution(out)


def _act(op, p):
    if isinstance(op, Multiply):
        h = op.f
        if isinstance(p, Dirac):
            return [(h(p.point), p)]
        if isinstance(p, DiracDerivative):
            dh = sum((h.diff_index(i)(p.point) * v for i, v in enumerate(p.direction)), Fraction(0))
            return [(h(p.point), p), (-dh, Dirac(p.point))]
        return [(1, Deferred("multiply", h, Distribution([(1, p)])))]
    if isinstance(op, Derive):
        X = op.X
        if X.grade != 1:
            raise DistrError("derive needs a vector field")
        if isinstance(p, Dirac):
            return [(1, DiracDerivative(p.point, tuple(c(p.point) for c in X.components())))]
        return [(1, Deferred("derive", X, Distribution([(1, p)])))]
    raise DistrError(f"unknown module operation {op!r}")


def hamiltonian_potential(ps: PoissonStructure, f: Expr, alpha: KForm) -> KForm:
    """Potential ``i_{ad_f} a`` whose exterior derivative is ``L_{ad_f} a`` for top forms ``a``."""
    if alpha.grade != ps.dim:
        raise DistrError("exactness witness needs a top form")
    X = bracket_derivation(ps, f)
    beta = contract(X, alpha)
    if exterior_derivative(beta) != lie_derivative(X, alpha):
        raise DistrError("potential check failed")
    return beta


# ---------------------------------------------------------------------------
# checks


def _mass_scale(phi: Distribution) -> float:
    try:
        one = Expr.const(_vars_of(phi), 1)
        return max(1.0, abs(float(pair(phi, one))))
    except DistrError:
        return 1.0


def _vars_of(phi: Distribution):
    for _, p in phi.terms:
        if isinstance(p, (LeafDelta, TransversalDelta)):
            return p.leaf.ps.vars
        if isinstance(p, Deferred):
            return _vars_of(p.inner)
    raise DistrError("variables not determined by this distribution")


def genc_check(ps: PoissonStructure, phi, degree_bound: int = 4, tolerance: float = 1e-8) -> Report:
    """Generalized-Casimir test ``{f, Phi} = 0`` over monomials up to ``degree_bound``."""
    if not isinstance(phi, Distribution):
        phi = Distribution([(1, phi)])
    details = {"degree_bound": degree_bound, "exact": phi.exact, "realization": phi.realization}
    if phi.is_zero():
        return Report("genc", PASS, Fraction(0), details)
    monos = monomials(ps.vars, degree_bound)
    worst = Fraction(0) if phi.exact else 0.0
    violating = None
    tested = 0
    if phi.realization == FUNCTION:
        scale = 1.0 if phi.exact else _mass_scale(phi)
        for a, b in combinations(range(len(monos)), 2):
            br = bracket(ps, monos[a], monos[b])
            if br.is_zero():
                continue
            tested += 1
            v = abs(pair(phi, br))
            if v > worst:
                worst = v
                violating = (str(monos[a]), str(monos[b]))
                if phi.exact:
                    break
    else:
        scale = 1.0
        forms = [volume_form(m) for m in monos]
        for f in monos[1:]:
            act = module_action(Bracket(ps, f), phi)
            for alpha in forms:
                tested += 1
                v = abs(pair(act, alpha))
                if v > worst:
                    worst = v
                    violating = (str(f), str(alpha))
            if phi.exact and worst:
                break
    ok = bool(worst == 0 if phi.exact else worst <= tolerance * scale)
    details.update({"pairs_tested": tested, "violating_pair": None if ok else violating, "scale": scale})
    return Report("genc", PASS if ok else FAIL, worst, details)


def leaf_delta_independence(ps: PoissonStructure, leaves, separating_functions, rel_tol: float = 1e-6) -> Report:
    """Numerical rank of ``M_ij = <delta_{N_i}, f_j>``."""
    M = np.array(
        [[float(pair(Distribution([(1, LeafDelta(L))]), f)) for f in separating_functions] for L in leaves]
    )
    if not np.all(np.isfinite(M)):
        raise DistrError("singular quadrature")
    rank, sv = _linalg.numerical_rank(M, rel_tol)
    return Report(
        "leaf-delta-independence",
        PASS if rank == len(leaves) else FAIL,
        rank,
        {"matrix": M, "singular_values": sv, "rel_tol": rel_tol},
    )


def _divergence_residual(leaf: ParameterizedLeaf, X: KVector, h: float = 1e-5) -> float:
    """Max over nodes of ``|div_p(rho * xi)| / rho`` with ``xi`` the pulled-back field."""
    ps = leaf.ps
    worst = 0.0
    for chart_idx, chart in enumerate(leaf.charts):
        maps = [_numeric(c) for c in chart.map]
        jac = [[_numeric(e) for e in row] for row in chart.jacobian_exprs()]
        k = leaf.leaf_dim // 2

        def flux(p):
            x = np.array([float(m(list(p))) for m in maps])
            J = np.array([[float(f(list(p))) for f in row] for row in jac])
            rho = factorial(k) * _pfaffian_float(symplectic_form_on_frame(ps, x, J.T))
            v = np.array([_eval_float(c, x) for c in X.components()])
            xi, *_ = np.linalg.lstsq(J, v, rcond=None)
            return rho * xi, rho

        for nd in leaf.nodes():
            if nd.chart != chart_idx:
                continue
            p0 = np.array(nd.param)
            div = 0.0
            for a in range(leaf.leaf_dim):
                e = np.zeros_like(p0)
                e[a] = h
                div += (flux(p0 + e)[0][a] - flux(p0 - e)[0][a]) / (2 * h)
            rho = flux(p0)[1]
            worst = max(worst, abs(div / rho))
    return worst


def delta_N_annihilator_check(
    ps: PoissonStructure, leaf, X: KVector, degree_bound: int = 3, tolerance: float = 1e-8, fd_tolerance: float = 1e-6
) -> Report:
    """Does ``X`` annihilate ``delta_N``?  Reported alongside tangency and volume preservation."""
    delta = Distribution([(1, LeafDelta(leaf))])
    monos = monomials(ps.vars, degree_bound, min_degree=1)
    exact = isinstance(leaf, PointLeaf)
    worst = Fraction(0) if exact else 0.0
    violating = None
    for f in monos:
        v = abs(pair(delta, apply_vector_field(X, f)))
        if v > worst:
            worst, violating = v, str(f)
    scale = 1.0 if exact else _mass_scale(delta)
    annihilates = bool(worst == 0 if exact else worst <= tolerance * scale)
    if exact:
        tangent = all(c(leaf.point) == 0 for c in X.components())
        preserved = tangent
        tangent_res = 0.0
    else:
        tangent_res = 0.0
        for nd in leaf.nodes():
            v = np.array([_eval_float(c, nd.x) for c in X.components()])
            coef, *_ = np.linalg.lstsq(nd.jacobian, v, rcond=None)
            tangent_res = max(tangent_res, float(np.abs(nd.jacobian @ coef - v).max()))
        tangent = bool(tangent_res <= tolerance * max(1.0, float(np.abs(leaf.node_arrays()[0]).max())))
        preserved = bool(_divergence_residual(leaf, X) <= fd_tolerance) if tangent else False
    return Report(
        "delta-N-annihilator",
        PASS if annihilates else FAIL,
        worst,
        {
            "annihilates": annihilates,
            "tangent": tangent,
            "tangent_residual": tangent_res,
            "volume_preserved": preserved,
            "violating_monomial": None if annihilates else violating,
            "degree_bound": degree_bound,
        },
    )


def transversal_delta_flatness(
    ps: PoissonStructure, leaf, u: KVector, degree_bound: int = 3, tolerance: float = 1e-8
) -> Report:
    """Cross-check ``{f, delta^u} = 0`` (direct pairing) against flatness of ``u`` (Bott derivative)."""
    expected = ps.dim - leaf.leaf_dim
    if u.grade != expected and not u.is_zero():
        raise DistrError(f"grade mismatch: u has grade {u.grade}, leaf needs {expected}")
    exact = isinstance(leaf, PointLeaf)
    direct = genc_check(ps, Distribution([(1, TransversalDelta(leaf, u))]), degree_bound, tolerance)
    worst_b = Fraction(0) if exact else 0.0
    violating_b = None
    if not u.is_zero():
        for f in monomials(ps.vars, degree_bound, min_degree=1):
            if exact:
                classes = [bott_derivative_multi(ps, leaf, f_ext=f, u_ext=u)]
            else:
                br = bott_field(ps, f, u)
                classes = [transversal_class(ps, tuple(nd.x), _values_at(br, nd.x, False), br.grade) for nd in leaf.nodes()]
            m = max((abs(c) for cls in classes for c in cls.coords), default=0)
            if m > worst_b:
                worst_b, violating_b = (m if exact else float(m)), str(f)
    flat = bool(worst_b == 0 if exact else worst_b <= tolerance)
    casimir = direct.ok
    return Report(
        "transversal-delta-flatness",
        PASS if casimir == flat else FAIL,
        {"direct": direct.residual, "bott": worst_b},
        {
            "casimir_direct": casimir,
            "flat_bott": flat,
            "violating_direct": direct.details.get("violating_pair"),
            "violating_bott": None if flat else violating_b,
            "degree_bound": degree_bound,
            "exact": exact,
        },
    )
