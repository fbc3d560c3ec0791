"""Symplectic leaves, transversal quotients and the Bott connection.

Point leaves are handled exactly.  Parameterized leaves carry rational chart
maps and a tensor Gauss-Legendre rule; everything evaluated at their nodes is
floating point.  At a point ``x`` of a leaf the tangent space is the column
space of the Poisson matrix, and transversal classes are represented by their
pairings with a basis of the annihilator (the kernel of that matrix).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import factorial
from typing import Sequence

import numpy as np

from . import _linalg
from .exterior import KVector, lie_bracket, schouten
from .poisson import PoissonStructure, apply_vector_field, bracket, hamiltonian_field, monomials
from .report import FAIL, PASS, Report
from .symexpr import Expr, to_fraction

__all__ = [
    "LeafError",
    "PointLeaf",
    "Chart",
    "Node",
    "ParameterizedLeaf",
    "TransversalMultivector",
    "point_leaf",
    "parameterized_leaf",
    "sphere_charts",
    "bott_derivative_point",
    "bott_flat_sections_point",
    "bott_derivative_multi",
    "bott_field",
    "transversal_class",
    "leaf_symplectic_form",
    "symplectic_form_on_frame",
    "symplectic_consistency",
    "flat_section_correspondence_check",
    "bott_extension_probe",
    "RANK_TOL",
]

RANK_TOL = 1e-10


class LeafError(ValueError):
    pass


@lru_cache(maxsize=4096)
def _numeric(e: Expr):
    return e.to_numpy()


def _eval_float(e: Expr, x) -> float:
    return float(_numeric(e)(list(x)))


def _pi_float(ps: PoissonStructure, x) -> np.ndarray:
    n = ps.dim
    m = np.zeros((n, n))
    for (i, j), c in ps.P.coeffs.items():
        v = _eval_float(c, x)
        m[i, j] = v
        m[j, i] = -v
    return m


def _pi_exact(ps: PoissonStructure, x) -> list[list[Fraction]]:
    return [[c(x) if c else Fraction(0) for c in row] for row in ps.matrix]


def _to_point(point) -> tuple[Fraction, ...]:
    return tuple(to_fraction(v) for v in point)


# -------------------------------------------------------------------------
# leaves


@dataclass(frozen=True)
class PointLeaf:
    """A zero-dimensional leaf: a point where the bivector vanishes."""

    ps: PoissonStructure
    point: tuple[Fraction, ...]
    name: str = ""

    @property
    def leaf_dim(self) -> int:
        return 0

    @property
    def vars(self):
        return self.ps.vars


def point_leaf(ps: PoissonStructure, point, name: str = "") -> PointLeaf:
    x0 = _to_point(point)
    if len(x0) != ps.dim:
        raise LeafError("point has the wrong dimension")
    nonzero = [(I, str(c)) for I, c in ps.P.coeffs.items() if c(x0) != 0]
    if nonzero:
        raise LeafError(f"not a point leaf: the bivector does not vanish at {tuple(map(str, x0))}")
    return PointLeaf(ps, x0, name)


@dataclass(frozen=True)
class Chart:
    params: tuple[str, ...]
    box: tuple[tuple[float, float], ...]
    map: tuple[Expr, ...]

    def jacobian_exprs(self) -> tuple[tuple[Expr, ...], ...]:
        return tuple(tuple(c.diff(p) for p in self.params) for c in self.map)


@dataclass(frozen=True)
class Node:
    chart: int
    param: tuple[float, ...]
    weight: float
    x: np.ndarray = field(compare=False)
    jacobian: np.ndarray = field(compare=False)


class ParameterizedLeaf:
    """A compact leaf covered by rational charts with disjoint interiors."""

    def __init__(self, ps: PoissonStructure, charts: Sequence[Chart], casimirs=(), order: int = 32, name: str = ""):
        self.ps = ps
        self.charts = tuple(charts)
        self.casimirs = tuple(casimirs)
        self.order = int(order)
        self.name = name
        if not self.charts:
            raise LeafError("a parameterized leaf needs at least one chart")
        dims = {len(c.params) for c in self.charts}
        if len(dims) != 1 or next(iter(dims)) % 2:
            raise LeafError("charts must share one even parameter dimension")
        self.leaf_dim = dims.pop()
        for c in self.charts:
            if len(c.map) != ps.dim:
                raise LeafError("chart map must have one component per ambient coordinate")
        self._nodes = None
        self._arrays = None
        self._liouville = None

    @property
    def vars(self):
        return self.ps.vars

    def with_order(self, order: int) -> "ParameterizedLeaf":
        return ParameterizedLeaf(self.ps, self.charts, self.casimirs, order, self.name)

    def node_arrays(self):
        """Stacked node data: points ``(n, N)``, Jacobians ``(N, n, 2k)``, weights ``(N,)``."""
        if self._arrays is None:
            nodes = self.nodes()
            self._arrays = (
                np.array([nd.x for nd in nodes]).T,
                np.array([nd.jacobian for nd in nodes]),
                np.array([nd.weight for nd in nodes]),
            )
        return self._arrays

    def liouville_weights(self) -> np.ndarray:
        """Quadrature weight times ``omega_N^k`` evaluated on the chart frame, per node."""
        if self._liouville is None:
            k = self.leaf_dim // 2
            out = []
            for nd in self.nodes():
                omega = leaf_symplectic_form(self.ps, self, nd)
                out.append(nd.weight * factorial(k) * _pfaffian_float(omega))
            self._liouville = np.array(out)
        return self._liouville

    def nodes(self) -> list[Node]:
        if self._nodes is None:
            self._nodes = list(self._build_nodes())
        return self._nodes

    def _build_nodes(self):
        t, w = np.polynomial.legendre.leggauss(self.order)
        for ci, chart in enumerate(self.charts):
            axes = []
            for lo, hi in chart.box:
                half = 0.5 * (hi - lo)
                axes.append((lo + half * (t + 1.0), half * w))
            maps = [_numeric(c) for c in chart.map]
            jac = [[_numeric(e) for e in row] for row in chart.jacobian_exprs()]
            grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
            wgrid = np.ones_like(grids[0])
            for g in np.meshgrid(*[a[1] for a in axes], indexing="ij"):
                wgrid = wgrid * g
            pts = [g.ravel() for g in grids]
            X = np.array([m(pts) for m in maps])
            J = np.array([[f(pts) for f in row] for row in jac])
            for k in range(pts[0].size):
                yield Node(ci, tuple(float(p[k]) for p in pts), float(wgrid.ravel()[k]), X[:, k], J[:, :, k])

    def validate(self, tol: float = 1e-8) -> Report:
        """Check the leaf invariants at every node (rank, tangency, Casimirs)."""
        worst_tangent = 0.0
        casimir_values = [[] for _ in self.casimirs]
        for node in self.nodes():
            J = node.jacobian
            sv = np.linalg.svd(J, compute_uv=False)
            if sv[-1] <= tol * max(1.0, sv[0]):
                return Report("leaf-invariants", FAIL, float(sv[-1]), {"reason": "chart Jacobian drops rank", "param": node.param})
            pi = _pi_float(self.ps, node.x)
            r = np.linalg.matrix_rank(pi, tol=tol * max(1.0, np.abs(pi).max()))
            if r != self.leaf_dim:
                return Report("leaf-invariants", FAIL, r, {"reason": "Poisson rank differs from leaf dimension", "param": node.param})
            # columns of J must lie in the image of pi
            U, _, _ = np.linalg.svd(pi)
            basis = U[:, : self.leaf_dim]
            resid = J - basis @ (basis.T @ J)
            worst_tangent = max(worst_tangent, float(np.abs(resid).max() / max(1.0, np.abs(J).max())))
            for k, c in enumerate(self.casimirs):
                casimir_values[k].append(_eval_float(c, node.x))
        spread = [float(np.ptp(v)) for v in casimir_values]
        ok = worst_tangent <= tol and all(s <= tol * max(1.0, np.abs(v).max()) for s, v in zip(spread, casimir_values))
        return Report(
            "leaf-invariants",
            PASS if ok else FAIL,
            worst_tangent,
            {"casimir_spread": spread, "nodes": len(self.nodes())},
        )


def parameterized_leaf(ps, charts, casimirs=(), order=32, name="", tol=1e-8) -> ParameterizedLeaf:
    leaf = ParameterizedLeaf(ps, charts, casimirs, order, name)
    rep = leaf.validate(tol)
    if not rep.ok:
        raise LeafError(f"leaf invariants fail: {rep.details}")
    return leaf


def sphere_charts(radius, params=("t", "s")) -> list[Chart]:
    """Two rational charts tiling the sphere of the given radius.

    Latitude and longitude enter through the half-angle substitution
    ``t = tan(lat/2)``, ``s = tan(lon/2)``; both charts use the box
    ``[-1, 1]^2`` and the second is the first rotated by pi about the
    third axis.
    """
    r = to_fraction(radius)
    t = Expr.var(params, params[0])
    s = Expr.var(params, params[1])
    one = Expr.const(params, 1)
    cl = (one - t * t) / (one + t * t)
    sl = (t * 2) / (one + t * t)
    co = (one - s * s) / (one + s * s)
    so = (s * 2) / (one + s * s)
    box = ((-1.0, 1.0), (-1.0, 1.0))
    c1 = Chart(tuple(params), box, (cl * co * r, cl * so * r, sl * r))
    c2 = Chart(tuple(params), box, (-(cl * co * r), -(cl * so * r), sl * r))
    return [c1, c2]


# -------------------------------------------------------------------------
# transversal classes


def _annihilator(ps: PoissonStructure, x, exact: bool):
    """Columns spanning the covectors vanishing on the leaf tangent space at ``x``."""
    if exact:
        rows = _pi_exact(ps, x)
        basis = _linalg.nullspace(rows, ps.dim)
        return basis  # list of covectors (exact)
    pi = _pi_float(ps, x)
    U, s, Vt = np.linalg.svd(pi)
    scale = max(1.0, s[0] if s.size else 1.0)
    rank = int(np.sum(s > RANK_TOL * scale * 1e2))
    return Vt[rank:].T  # n x (n - rank)


@dataclass(frozen=True)
class TransversalMultivector:
    """Class of an ambient m-vector at a leaf point modulo the leaf tangent ideal.

    ``coords`` are the pairings with wedges of an annihilator basis; they
    determine the class.  Exact for point leaves, float otherwise.
    """

    base: tuple
    grade: int
    representative: dict
    coords: tuple
    exact: bool

    def is_zero(self, tol: float = RANK_TOL) -> bool:
        if self.exact:
            return all(c == 0 for c in self.coords)
        return all(abs(c) <= tol for c in self.coords)

    def equals(self, other: "TransversalMultivector", tol: float = RANK_TOL) -> bool:
        if len(self.coords) != len(other.coords):
            return False
        if self.exact and other.exact:
            return self.coords == other.coords
        return all(abs(float(a) - float(b)) <= tol for a, b in zip(self.coords, other.coords))


def _pair_multivector(rep: dict, theta_cols, grade: int, exact: bool):
    """Pairings of an m-vector with wedges of annihilator covectors."""
    k = len(theta_cols) if exact else theta_cols.shape[1]
    out = []
    for J in combinations(range(k), grade):
        acc = Fraction(0) if exact else 0.0
        for I, u in rep.items():
            if exact:
                m = [[theta_cols[j][i] for j in J] for i in I]
                acc += u * _det_exact(m)
            else:
                m = theta_cols[np.ix_(list(I), list(J))] if grade else np.zeros((0, 0))
                acc += float(u) * (np.linalg.det(m) if grade else 1.0)
        out.append(acc)
    return tuple(out)


def _det_exact(m):
    n = len(m)
    if n == 0:
        return Fraction(1)
    acc = Fraction(0)
    for j in range(n):
        if m[0][j] == 0:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        acc += (-1) ** j * m[0][j] * _det_exact(minor)
    return acc


def transversal_class(ps: PoissonStructure, base, values: dict, grade: int) -> TransversalMultivector:
    """Class of the m-vector with coefficient ``values`` at ``base``.

    Exact (``Fraction``) base points give exact classes.
    """
    exact = all(isinstance(v, (int, Fraction)) for v in base)
    if exact:
        base = _to_point(base)
        values = {tuple(I): to_fraction(v) for I, v in values.items()}
    else:
        base = tuple(float(v) for v in base)
        values = {tuple(I): float(v) for I, v in values.items()}
    theta = _annihilator(ps, base, exact)
    coords = _pair_multivector(values, theta, grade, exact)
    return TransversalMultivector(base, grade, values, coords, exact)


def _values_at(U: KVector, x, exact: bool) -> dict:
    if exact:
        return {I: c(x) for I, c in U.coeffs.items()}
    return {I: _eval_float(c, x) for I, c in U.coeffs.items()}


# -------------------------------------------------------------------------
# Bott connection at point leaves


def _linear_function(vars, alpha) -> Expr:
    f = Expr.const(vars, 0)
    for v, a in zip(vars, alpha):
        if a:
            f = f + Expr.var(vars, v) * to_fraction(a)
    return f


def _check_point_leaf(ps, x0) -> PointLeaf:
    if isinstance(x0, PointLeaf):
        return x0
    return point_leaf(ps, x0)


def bott_derivative_point(ps: PoissonStructure, x0, alpha, V, f_ext: Expr | None = None) -> tuple[Fraction, ...]:
    """``nabla_alpha(V) = [X_f, V]`` at a point leaf, ``V`` extended as a constant field."""
    leaf = _check_point_leaf(ps, x0)
    x0 = leaf.point
    alpha = _to_point(alpha)
    if f_ext is None:
        f_ext = _linear_function(ps.vars, alpha)
    df = tuple(f_ext.diff_index(i)(x0) for i in range(ps.dim))
    if df != alpha:
        raise LeafError("extension f does not satisfy df(x0) = alpha")
    Vbar = KVector(ps.vars, 1, {(i,): to_fraction(v) for i, v in enumerate(V)})
    br = lie_bracket(hamiltonian_field(ps, f_ext), Vbar)
    return tuple(c(x0) for c in br.components())


def bott_flat_sections_point(ps: PoissonStructure, x0) -> list[tuple[Fraction, ...]]:
    """Basis of tangent vectors at a point leaf annihilated by every ``nabla_{dx_i}``."""
    leaf = _check_point_leaf(ps, x0)
    n = ps.dim
    rows = []
    for i in range(n):
        alpha = [Fraction(int(i == j)) for j in range(n)]
        cols = [bott_derivative_point(ps, leaf, alpha, [Fraction(int(j == k)) for k in range(n)]) for j in range(n)]
        for r in range(n):
            rows.append([cols[j][r] for j in range(n)])
    rows = [r for r in rows if any(r)]
    return [tuple(v) for v in _linalg.nullspace(rows, n)]


def bott_derivative_multi(
    ps: PoissonStructure,
    leaf,
    alpha=None,
    u=None,
    *,
    f_ext: Expr | None = None,
    u_ext: KVector | None = None,
    node: Node | None = None,
) -> TransversalMultivector:
    """Bott derivative of a transversal multivector: class of ``[X_f, U]`` on the leaf.

    At point leaves ``u`` may be a constant :class:`KVector` or a coefficient
    dict; the default extensions are the linear ``f`` with ``df = alpha`` and
    the constant multivector.  At parameterized leaves ``f_ext`` and ``u_ext``
    are required and the result lives at ``node``.
    """
    if isinstance(leaf, PointLeaf) or not isinstance(leaf, ParameterizedLeaf):
        leaf = _check_point_leaf(ps, leaf)
        x0 = leaf.point
        if u_ext is None:
            if isinstance(u, KVector):
                u_ext = u
            else:
                grade = len(next(iter(u))) if u else 0
                u_ext = KVector(ps.vars, grade, {tuple(I): to_fraction(v) for I, v in u.items()})
        if alpha is None and f_ext is None:
            raise LeafError("need alpha or an extension f")
        if f_ext is None:
            f_ext = _linear_function(ps.vars, alpha)
        if alpha is not None:
            df = tuple(f_ext.diff_index(i)(x0) for i in range(ps.dim))
            if df != _to_point(alpha):
                raise LeafError("extension f does not satisfy df(x0) = alpha")
        if u is not None and not isinstance(u, KVector):
            given = transversal_class(ps, x0, u, u_ext.grade)
            ext = transversal_class(ps, x0, _values_at(u_ext, x0, True), u_ext.grade)
            if not given.equals(ext):
                raise LeafError("extension U does not represent u at the base point")
        br = bott_field(ps, f_ext, u_ext)
        return transversal_class(ps, x0, _values_at(br, x0, True), br.grade)
    if f_ext is None or u_ext is None or node is None:
        raise LeafError("parameterized leaves need f_ext, u_ext and a node")
    x = node.x
    if alpha is not None:
        df = np.array([_eval_float(f_ext.diff_index(i), x) for i in range(ps.dim)])
        if np.abs(df - np.asarray(alpha, dtype=float)).max() > 1e-9:
            raise LeafError("extension f does not satisfy df = alpha at the node")
    if u is not None:
        given = u if isinstance(u, TransversalMultivector) else transversal_class(ps, x, u, u_ext.grade)
        ext = transversal_class(ps, x, _values_at(u_ext, x, False), u_ext.grade)
        if not given.equals(ext, 1e-9):
            raise LeafError("extension U does not represent u at the node")
    br = bott_field(ps, f_ext, u_ext)
    return transversal_class(ps, tuple(x), _values_at(br, x, False), br.grade)


def bott_field(ps: PoissonStructure, f: Expr, U: KVector) -> KVector:
    """Ambient field ``[X_f, U]`` whose class along a leaf is ``nabla_{df}`` of the class of ``U``."""
    return schouten(hamiltonian_field(ps, f), U)


# -------------------------------------------------------------------------
# induced symplectic form


def _pfaffian_float(m: np.ndarray) -> float:
    n = m.shape[0]
    if n == 0:
        return 1.0
    acc = 0.0
    for j in range(1, n):
        if m[0, j] == 0:
            continue
        keep = [i for i in range(1, n) if i != j]
        acc += (-1) ** (j - 1) * m[0, j] * _pfaffian_float(m[np.ix_(keep, keep)])
    return acc


def symplectic_form_on_frame(ps: PoissonStructure, x, frame, tol: float = 1e-9) -> np.ndarray:
    """``omega_N(u_i, u_j) = <b_i, u_j>`` where ``P# b_i = u_i`` (least squares)."""
    pi = _pi_float(ps, [float(v) for v in x])
    U = np.asarray(frame, dtype=float).T  # n x 2k
    beta, *_ = np.linalg.lstsq(pi, U, rcond=None)
    resid = np.abs(pi @ beta - U).max() / max(1.0, np.abs(U).max())
    if resid > tol:
        raise LeafError(f"tangent frame is not in the image of P# (residual {resid:.3g})")
    return beta.T @ U


def leaf_symplectic_form(ps: PoissonStructure, leaf: ParameterizedLeaf, node: Node, tol: float = 1e-9) -> np.ndarray:
    sv = np.linalg.svd(node.jacobian, compute_uv=False)
    if sv[-1] <= tol * max(1.0, sv[0]):
        raise LeafError("chart Jacobian drops rank at this node")
    return symplectic_form_on_frame(ps, node.x, node.jacobian.T, tol)


def symplectic_consistency(ps: PoissonStructure, leaf: ParameterizedLeaf, degree: int = 2, nodes=None) -> float:
    """Max of ``|omega_N(X_f, X_g) - {f, g}|`` over monomials at the given nodes."""
    monos = monomials(ps.vars, degree, min_degree=1)
    fields = {i: hamiltonian_field(ps, m) for i, m in enumerate(monos)}
    worst = 0.0
    for node in nodes if nodes is not None else leaf.nodes():
        omega = leaf_symplectic_form(ps, leaf, node)
        J = node.jacobian
        coords = {}
        for i, X in fields.items():
            v = np.array([_eval_float(c, node.x) for c in X.components()])
            coords[i], *_ = np.linalg.lstsq(J, v, rcond=None)
        for i, j in combinations(range(len(monos)), 2):
            lhs = coords[i] @ omega @ coords[j]
            rhs = _eval_float(bracket(ps, monos[i], monos[j]), node.x)
            worst = max(worst, abs(lhs - rhs))
    return worst


# -------------------------------------------------------------------------
# flat sections vs. Poisson-compatible transversal fields


def flat_section_correspondence_check(
    ps: PoissonStructure, leaf, X: KVector, degree_bound: int = 2, tolerance: float = 1e-9
) -> Report:
    """Test ``X{f,g} = {Xf, g} + {f, Xg}`` on the leaf and flatness of the class of ``X``."""
    exact = not isinstance(leaf, ParameterizedLeaf)
    if exact:
        leaf = _check_point_leaf(ps, leaf)
        points = [leaf.point]
    else:
        points = [n.x for n in leaf.nodes()]
    monos = monomials(ps.vars, degree_bound)
    worst = Fraction(0) if exact else 0.0
    violating = None
    for a, b in combinations(range(len(monos)), 2):
        f, g = monos[a], monos[b]
        r = apply_vector_field(X, bracket(ps, f, g)) - bracket(ps, apply_vector_field(X, f), g) - bracket(
            ps, f, apply_vector_field(X, g)
        )
        if r.is_zero():
            continue
        for x in points:
            v = abs(r(x)) if exact else abs(_eval_float(r, x))
            if v > worst:
                worst = v
                violating = (str(f), str(g))
    cond1 = worst == 0 if exact else worst <= tolerance
    flat_worst = Fraction(0) if exact else 0.0
    for f in monos:
        br = lie_bracket(hamiltonian_field(ps, f), X)
        for x in points:
            vals = _values_at(br, x, exact)
            cls = transversal_class(ps, x if exact else tuple(x), vals, 1)
            m = max((abs(c) for c in cls.coords), default=0)
            flat_worst = max(flat_worst, m)
    flat = flat_worst == 0 if exact else flat_worst <= tolerance
    return Report(
        "flat-section-correspondence",
        PASS if flat or not cond1 else FAIL,
        worst,
        {
            "condition_1": cond1,
            "flat": flat,
            "flat_residual": flat_worst,
            "violating_pair": violating,
            "degree_bound": degree_bound,
        },
    )


def bott_extension_probe(ps: PoissonStructure, x0, samples: int = 50, seed: int = 0) -> Report:
    """Compare ``nabla_alpha(V)`` for the linear extension against random quadratic ones."""
    import random

    leaf = _check_point_leaf(ps, x0)
    rng = random.Random(seed)
    n = ps.dim
    shifted = [Expr.var(ps.vars, v) - leaf.point[i] for i, v in enumerate(ps.vars)]
    mismatches = []
    for s in range(samples):
        alpha = [Fraction(rng.randint(-3, 3)) for _ in range(n)]
        V = [Fraction(rng.randint(-3, 3)) for _ in range(n)]
        f = Expr.const(ps.vars, rng.randint(-5, 5))
        for i in range(n):
            f = f + shifted[i] * alpha[i]
            for j in range(i, n):
                f = f + shifted[i] * shifted[j] * Fraction(rng.randint(-4, 4), rng.randint(1, 3))
        if bott_derivative_point(ps, leaf, alpha, V) != bott_derivative_point(ps, leaf, alpha, V, f_ext=f):
            mismatches.append(s)
    return Report(
        "bott.extension-probe",
        FAIL if mismatches else PASS,
        len(mismatches),
        {"samples": samples, "seed": seed, "mismatched_samples": mismatches[:5]},
    )
