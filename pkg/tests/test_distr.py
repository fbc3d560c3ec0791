import math
import random
from fractions import Fraction

import pytest

from genpoisson.distr import (
    Bracket,
    Derive,
    Dirac,
    DiracDerivative,
    DistrError,
    Distribution,
    Function,
    LeafDelta,
    Multiply,
    TopForm,
    TransversalDelta,
    delta_N_annihilator_check,
    distribution,
    genc_check,
    hamiltonian_potential,
    leaf_delta_independence,
    module_action,
    pair,
    pair_with_refinement,
    transversal_delta_flatness,
)
from genpoisson.exterior import KForm, KVector, parse_kvector
from genpoisson.leaf import parameterized_leaf, point_leaf, sphere_charts
from genpoisson.poisson import bracket, hamiltonian_field, monomials, volume_form
from genpoisson.suites import random_poly
from genpoisson.symexpr import Expr, parse

from conftest import X3, XY

O = (0, 0)
F = Fraction


def d(*prims):
    return distribution(*prims)


@pytest.fixture(scope="module")
def spheres(so3):
    r2 = parse("x1^2+x2^2+x3^2", X3)
    return [parameterized_leaf(so3, sphere_charts(r), [r2]) for r in (1, 2)]


def test_pair_dirac_examples():
    assert pair(d(Dirac((1, 2))), parse("x^2+y^2", XY)) == 5
    assert pair(d(DiracDerivative(O, (1, 0))), Function(parse("x^2+x", XY))) == -1


def test_pair_realization_mismatch(deformed_x):
    with pytest.raises(DistrError, match="realization"):
        pair(d(Dirac(O)), TopForm(volume_form(Expr.const(XY, 1))))
    leaf = point_leaf(deformed_x, O)
    with pytest.raises(DistrError):
        pair(d(TransversalDelta(leaf, parse_kvector("@x^@y", XY))), parse("x", XY))
    with pytest.raises(DistrError):
        Distribution([(1, Dirac(O)), (1, TransversalDelta(leaf, parse_kvector("@x^@y", XY)))])


def test_transversal_grade_checked(deformed_x):
    with pytest.raises(DistrError, match="grade"):
        TransversalDelta(point_leaf(deformed_x, O), parse_kvector("@x", XY))


def test_sphere_area(spheres):
    value, refinement = pair_with_refinement(d(LeafDelta(spheres[0])), Expr.const(X3, 1))
    assert abs(abs(value) - 4 * math.pi) <= 1e-6
    assert refinement <= 1e-10


def test_module_action_examples(deformed_r2):
    out = module_action(Multiply(parse("x", XY)), d(Dirac((2, 3))))
    assert out.terms == ((2, Dirac((2, 3))),)
    assert module_action(Bracket(deformed_r2, parse("x^3*y + y", XY)), d(Dirac(O))).is_zero()
    derived = module_action(Derive(parse_kvector("@x", XY)), d(Dirac(O)))
    # adjoint: <X(delta), f> = -<delta, X f> = -1
    assert pair(derived, parse("x", XY)) == -1


def test_module_action_derive_matches_adjoint():
    rng = random.Random(2)
    for _ in range(30):
        X = KVector(XY, 1, {(0,): random_poly(rng, XY), (1,): random_poly(rng, XY)})
        f = random_poly(rng, XY, 3)
        p = (F(rng.randint(-3, 3), 2), F(rng.randint(-3, 3)))
        for phi in (d(Dirac(p)), d(DiracDerivative(p, (1, -2)))):
            Xf = sum((X[(i,)] * f.diff_index(i) for i in range(2)), Expr.const(XY, 0))
            assert pair(module_action(Derive(X), phi), f) == -pair(phi, Xf)
            assert pair(module_action(Multiply(f), phi), X[(0,)]) == pair(phi, f * X[(0,)])


def test_adjoint_consistency():
    rng = random.Random(5)
    for _ in range(30):
        X = KVector(XY, 1, {(0,): random_poly(rng, XY), (1,): random_poly(rng, XY)})
        f, g = random_poly(rng, XY), random_poly(rng, XY, 3)
        Xf = sum((X[(i,)] * f.diff_index(i) for i in range(2)), Expr.const(XY, 0))
        phi = d(Dirac((1, -1)), DiracDerivative((0, 2), (3, 1)))
        lhs = module_action(Derive(X), module_action(Multiply(f), phi))
        rhs = module_action(Multiply(Xf), phi) + module_action(Multiply(f), module_action(Derive(X), phi))
        fX = KVector(XY, 1, {(i,): X[(i,)] * f for i in range(2)})
        assert pair(lhs, g) == pair(rhs, g) == pair(module_action(Derive(fX), phi), g)


def test_poisson_module_axioms(deformed_x, so3, spheres):
    rng = random.Random(8)
    ps = deformed_x
    phi = d(Dirac((1, 2)), DiracDerivative((-1, 1), (1, 1)))
    br = lambda f, Phi: module_action(Bracket(ps, f), Phi)
    mul = lambda f, Phi: module_action(Multiply(f), Phi)
    for _ in range(20):
        f, g, t = (random_poly(rng, XY) for _ in range(3))
        assert pair(br(f * g, phi), t) == pair(mul(f, br(g, phi)) + mul(g, br(f, phi)), t)
        assert pair(br(f, mul(g, phi)), t) == pair(mul(g, br(f, phi)) + mul(bracket(ps, f, g), phi), t)
    delta = d(LeafDelta(spheres[0]))
    f, g, t = parse("x1*x2", X3), parse("x3^2 + x1", X3), parse("x2*x3", X3)
    lhs = pair(module_action(Bracket(so3, f * g), delta), t)
    rhs = pair(
        module_action(Multiply(f), module_action(Bracket(so3, g), delta))
        + module_action(Multiply(g), module_action(Bracket(so3, f), delta)),
        t,
    )
    assert abs(lhs - rhs) <= 1e-9


def test_genc_examples(deformed_r2):
    assert genc_check(deformed_r2, d(Dirac(O)), 4).verdict == "pass"
    for v in [(1, 0), (0, 1), (3, -7)]:
        assert genc_check(deformed_r2, d(DiracDerivative(O, v)), 4).verdict == "pass"
    rep = genc_check(deformed_r2, d(Dirac((1, 0))), 4)
    assert rep.verdict == "fail" and rep.details["violating_pair"] is not None


def test_genc_pass_implies_bracket_pairings_vanish(deformed_r2):
    phi = d(Dirac(O), DiracDerivative(O, (2, 5)))
    assert genc_check(deformed_r2, phi, 3).verdict == "pass"
    monos = monomials(XY, 3)
    for f in monos:
        for g in monos:
            assert pair(phi, bracket(deformed_r2, f, g)) == 0


def test_nondegenerate_diracs_fail(std2):
    for p in [O, (1, 0), (F(-1, 3), 2)]:
        rep = genc_check(std2, d(Dirac(p)), 2)
        assert rep.verdict == "fail" and rep.details["violating_pair"]


def test_hamiltonian_potential(so3, deformed_x):
    rng = random.Random(1)
    for ps in (so3, deformed_x):
        for _ in range(5):
            f = random_poly(rng, ps.vars)
            alpha = volume_form(random_poly(rng, ps.vars))
            beta = hamiltonian_potential(ps, f, alpha)
            assert beta.grade == ps.dim - 1


def test_leaf_delta_genc(so3, spheres):
    rep = genc_check(so3, d(LeafDelta(spheres[0])), 3)
    assert rep.verdict == "pass" and rep.residual <= 1e-8 * rep.details["scale"]


def test_independence(so3, spheres):
    f1, f2 = parse("4-x1^2-x2^2-x3^2", X3), parse("x1^2+x2^2+x3^2-1", X3)
    assert leaf_delta_independence(so3, spheres, [f1, f2]).residual == 2
    assert leaf_delta_independence(so3, spheres[:1], [Expr.const(X3, 1)]).residual == 1
    rep = leaf_delta_independence(so3, [spheres[0], spheres[0]], [f1, f2])
    assert rep.residual == 1 and rep.verdict == "fail"


def test_annihilator(so3, spheres):
    rot = delta_N_annihilator_check(so3, spheres[0], parse_kvector("x1*@x2 - x2*@x1", X3))
    assert rot.details["annihilates"] and rot.details["tangent"] and rot.details["volume_preserved"]
    rad = delta_N_annihilator_check(so3, spheres[0], parse_kvector("x1*@x1 + x2*@x2 + x3*@x3", X3))
    assert not rad.details["annihilates"] and not rad.details["tangent"]
    zero = delta_N_annihilator_check(so3, spheres[0], KVector.zero(X3, 1))
    assert zero.details["annihilates"] and zero.residual == 0


def test_flatness_point_leaves(deformed_x, deformed_r2):
    u = parse_kvector("@x^@y", XY)
    r2 = transversal_delta_flatness(deformed_r2, point_leaf(deformed_r2, O), u)
    assert r2.verdict == "pass" and r2.details["casimir_direct"] and r2.details["flat_bott"]
    x = transversal_delta_flatness(deformed_x, point_leaf(deformed_x, O), u)
    assert x.verdict == "pass" and not x.details["casimir_direct"] and not x.details["flat_bott"]
    assert x.details["violating_direct"] and x.details["violating_bott"]
    zero = transversal_delta_flatness(deformed_x, point_leaf(deformed_x, O), KVector.zero(XY, 2))
    assert zero.details["casimir_direct"] and zero.details["flat_bott"]
    with pytest.raises(DistrError, match="grade"):
        transversal_delta_flatness(deformed_x, point_leaf(deformed_x, O), parse_kvector("@x", XY))


def test_flatness_sphere(so3, spheres):
    leaf = spheres[0].with_order(20)
    radial = parse_kvector("x1*@x1 + x2*@x2 + x3*@x3", X3)
    rep = transversal_delta_flatness(so3, leaf, radial, 2)
    assert rep.verdict == "pass" and rep.details["casimir_direct"] and rep.details["flat_bott"]
    bent = parse_kvector("x1*x2*@x1 + x2*@x2 + x3*@x3", X3)
    rep = transversal_delta_flatness(so3, leaf, bent, 2)
    assert rep.verdict == "pass" and not rep.details["flat_bott"]
