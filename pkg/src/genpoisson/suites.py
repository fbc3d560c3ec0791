"""Randomized exact identity suites shared by the CLI and the test-suite."""
from __future__ import annotations

import random
from itertools import combinations

from .exterior import (
    CONVENTIONS,
    KForm,
    KVector,
    contract,
    exterior_derivative,
    lie_contraction_commutator,
    lie_derivative,
    schouten,
    schouten_leibniz,
    wedge,
)
from .poisson import (
    PoissonError,
    PoissonStructure,
    bracket,
    canonical_delta,
    canonical_delta_expanded,
    monomials,
    star,
)
from .report import FAIL, PASS, Report
from .symexpr import Expr


def random_poly(rng: random.Random, vars, degree: int = 2, nterms: int = 3) -> Expr:
    e = Expr.const(vars, 0)
    for _ in range(nterms):
        exps = [0] * len(vars)
        for _ in range(rng.randint(0, degree)):
            exps[rng.randrange(len(vars))] += 1
        e = e + Expr.monomial(vars, exps, rng.randint(-3, 3))
    return e


def random_alternating(rng: random.Random, cls, vars, grade: int, nterms: int = 2, degree: int = 2):
    out = cls.zero(vars, grade)
    slots = list(combinations(range(len(vars)), grade))
    for _ in range(nterms):
        out = out + cls(vars, grade, {rng.choice(slots): random_poly(rng, vars, degree)})
    return out


def _sample_dim_grades(rng, count, max_grade=3):
    d = rng.randint(2, 4)
    vars = tuple(f"x{i + 1}" for i in range(d))
    return vars, [rng.randint(1, min(max_grade, d)) for _ in range(count)]


def _tally(name: str, failures: list, total: int, details=None) -> Report:
    details = dict(details or {})
    details["samples"] = total
    if failures:
        details["first_failure"] = failures[0]
    return Report(name, FAIL if failures else PASS, len(failures), details)


def schouten_suite(samples: int = 200, lie_samples: int = 100, seed: int = 0) -> list[Report]:
    """Graded antisymmetry, Leibniz, Jacobi, the Lie/contraction commutator and d-identities."""
    rng = random.Random(seed)
    fails = {k: [] for k in ("antisym", "leibniz", "jacobi", "routes")}
    counts = dict.fromkeys(fails, 0)
    # draw until every identity has seen `samples` instances whose grades fit the dimension
    while min(counts.values()) < samples:
        vars, (u, v, w) = _sample_dim_grades(rng, 3)
        d = len(vars)
        U, V, W = (random_alternating(rng, KVector, vars, g) for g in (u, v, w))
        tag = f"dim={d} grades=({u},{v},{w})"
        if counts["antisym"] < samples:
            counts["antisym"] += 1
            if schouten(U, V) != schouten(V, U) * (-1) ** (u * v):
                fails["antisym"].append(tag)
        if v + w <= d and counts["leibniz"] < samples:
            counts["leibniz"] += 1
            rhs = wedge(schouten(U, V), W) + wedge(V, schouten(U, W)) * (-1) ** ((u + 1) * v)
            if schouten(U, wedge(V, W)) != rhs:
                fails["leibniz"].append(tag)
        if u + v + w - 2 <= d and counts["jacobi"] < samples:
            counts["jacobi"] += 1
            j = (
                schouten(U, schouten(V, W)) * (-1) ** (u * (w - 1))
                + schouten(V, schouten(W, U)) * (-1) ** (v * (u - 1))
                + schouten(W, schouten(U, V)) * (-1) ** (w * (v - 1))
            )
            if not j.is_zero():
                fails["jacobi"].append(tag)
        if counts["routes"] < samples:
            counts["routes"] += 1
            if schouten(U, V) != schouten_leibniz(U, V):
                fails["routes"].append(tag)

    lie_fail, lie_count = [], 0
    while lie_count < lie_samples:
        vars, (gx, gy) = _sample_dim_grades(rng, 2)
        d = len(vars)
        if gx + gy - 1 > d:
            continue
        g = rng.randint(gx + gy - 1, d)
        X = random_alternating(rng, KVector, vars, gx)
        Y = random_alternating(rng, KVector, vars, gy)
        w = random_alternating(rng, KForm, vars, g)
        lie_count += 1
        if lie_contraction_commutator(X, Y, w) != contract(schouten(X, Y), w):
            lie_fail.append(f"dim={d} grades=({gx},{gy}) form={g}")

    d_fail, d_count = [], 0
    for _ in range(samples // 2):
        vars, (k,) = _sample_dim_grades(rng, 1)
        w = random_alternating(rng, KForm, vars, k - 1)
        X = random_alternating(rng, KVector, vars, 1)
        d_count += 1
        dw = exterior_derivative(w)
        if not exterior_derivative(dw).is_zero() or lie_derivative(X, dw) != exterior_derivative(lie_derivative(X, w)):
            d_fail.append(f"dim={len(vars)} grade={k - 1}")

    return [
        _tally("schouten.antisymmetry", fails["antisym"], counts["antisym"]),
        _tally("schouten.leibniz", fails["leibniz"], counts["leibniz"]),
        _tally("schouten.jacobi", fails["jacobi"], counts["jacobi"]),
        _tally("schouten.monomial-vs-leibniz", fails["routes"], counts["routes"]),
        _tally("schouten.lie-contraction", lie_fail, lie_count, {"convention": CONVENTIONS["lie_contraction_commutator"]}),
        _tally("schouten.d-identities", d_fail, d_count),
    ]


def jacobi_check(ps: PoissonStructure, degree: int = 1) -> Report:
    """``[P, P] = 0``; on failure also exhibit a monomial triple breaking the bracket Jacobi identity."""
    J = ps.jacobiator
    if J.is_zero():
        return Report("jacobi", PASS, "0", {"bivector": str(ps.P)})
    monos = monomials(ps.vars, degree, min_degree=1)
    triple = None
    for f, g, h in combinations(monos, 3):
        s = bracket(ps, f, bracket(ps, g, h)) + bracket(ps, g, bracket(ps, h, f)) + bracket(ps, h, bracket(ps, f, g))
        if not s.is_zero():
            triple = (str(f), str(g), str(h))
            break
    return Report("jacobi", FAIL, str(J), {"bivector": str(ps.P), "violating_triple": triple})


def delta_suite(ps: PoissonStructure, samples: int = 100, degree: int = 3, seed: int = 0) -> list[Report]:
    """Operator vs. expanded canonical boundary, its square, and star conjugation when defined."""
    rng = random.Random(seed)
    n = ps.dim
    agree_fail = []
    sq_fail = []
    for _ in range(samples):
        k = rng.randint(0, min(3, n))
        phis = [random_poly(rng, ps.vars, 2, 2) for _ in range(k + 1)]
        w = KForm.scalar(phis[0])
        for p in phis[1:]:
            w = wedge(w, KForm.d(p))
        dw = canonical_delta(ps, w)
        if dw != canonical_delta_expanded(ps, phis):
            agree_fail.append(f"k={k}")
        if not canonical_delta(ps, dw).is_zero():
            sq_fail.append(f"k={k}")
    reports = [
        _tally("delta.definitions-agree", agree_fail, samples),
        _tally("delta.square-zero", sq_fail, samples),
    ]
    try:
        star(ps, KForm.scalar(Expr.const(ps.vars, 1)))
    except PoissonError:
        return reports  # star needs a nondegenerate bivector
    # linearity reduces "all forms of coefficient degree <= degree" to monomial multiples of basis forms
    star_fail, twice_fail, total = [], [], 0
    monos = monomials(ps.vars, degree)
    for k in range(n + 1):
        for I in combinations(range(n), k):
            basis = KForm(ps.vars, k, {I: Expr.const(ps.vars, 1)})
            if star(ps, star(ps, basis)) != basis:
                twice_fail.append(str(basis))
            for m in monos:
                w = KForm(ps.vars, k, {I: m})
                total += 1
                if canonical_delta(ps, w) != star(ps, exterior_derivative(star(ps, w))) * (-1) ** (k + 1):
                    star_fail.append(str(w))
    reports.append(_tally("delta.star-conjugation", star_fail, total, {"sign": "(-1)^(k+1)"}))
    reports.append(_tally("delta.star-involution", twice_fail, 2 ** n))
    return reports
