import random
from fractions import Fraction

import numpy as np
import pytest

from genpoisson.exterior import KVector, parse_kvector
from genpoisson.leaf import (
    Chart,
    LeafError,
    Node,
    bott_derivative_multi,
    bott_derivative_point,
    bott_extension_probe,
    bott_field,
    bott_flat_sections_point,
    flat_section_correspondence_check,
    leaf_symplectic_form,
    parameterized_leaf,
    point_leaf,
    sphere_charts,
    symplectic_consistency,
    transversal_class,
)
from genpoisson.poisson import hamiltonian_field
from genpoisson.suites import random_poly
from genpoisson.symexpr import Expr, parse

from conftest import X3, XY

O = (0, 0)
F = Fraction


@pytest.fixture(scope="module")
def sphere(so3):
    return parameterized_leaf(so3, sphere_charts(1), [parse("x1^2+x2^2+x3^2", X3)], order=12)


def test_point_leaf_requires_vanishing_bivector(std2, deformed_x):
    point_leaf(deformed_x, (0, 5))
    with pytest.raises(LeafError, match="not a point leaf"):
        point_leaf(deformed_x, (1, 0))
    with pytest.raises(LeafError):
        point_leaf(std2, O)


def test_bott_derivative_point_examples(deformed_x, deformed_r2):
    assert bott_derivative_point(deformed_x, O, (1, 0), (1, 0)) == (0, 1)
    assert bott_derivative_point(deformed_x, O, (1, 0), (0, 1)) == (0, 0)
    for alpha in [(1, 0), (0, 1), (2, -3)]:
        for V in [(1, 0), (0, 1), (5, 7)]:
            assert bott_derivative_point(deformed_r2, O, alpha, V) == (0, 0)


def test_bott_derivative_point_errors(std2, deformed_x):
    with pytest.raises(LeafError):
        bott_derivative_point(std2, O, (1, 0), (1, 0))
    with pytest.raises(LeafError, match="df"):
        bott_derivative_point(deformed_x, O, (1, 0), (1, 0), f_ext=parse("y + x^2", XY))


def test_flat_sections_examples(std2, deformed_x, deformed_r2):
    assert bott_flat_sections_point(deformed_x, O) == [(0, 1)]
    assert bott_flat_sections_point(deformed_r2, O) == [(1, 0), (0, 1)]
    with pytest.raises(LeafError):
        bott_flat_sections_point(std2, O)


def test_extension_probe(deformed_x, deformed_r2):
    for ps in (deformed_x, deformed_r2):
        rep = bott_extension_probe(ps, O, samples=50, seed=1)
        assert rep.verdict == "pass" and rep.details["samples"] == 50


def test_bott_multi_examples(deformed_x):
    u = parse_kvector("@x^@y", XY)
    assert bott_derivative_multi(deformed_x, O, (1, 0), u).is_zero()
    got = bott_derivative_multi(deformed_x, O, (0, 1), u)
    want = transversal_class(deformed_x, O, {(0, 1): -1}, 2)
    assert got.equals(want) and not got.is_zero()


def test_bott_multi_rejects_bad_extension(deformed_x):
    with pytest.raises(LeafError):
        bott_derivative_multi(deformed_x, O, (1, 0), {(0, 1): 1}, u_ext=parse_kvector("@x^@y + x*@x^@y", XY) * 2)


def test_bott_multi_grade_one_matches_point(deformed_x, deformed_r2):
    rng = random.Random(4)
    for ps in (deformed_x, deformed_r2):
        for _ in range(20):
            alpha = (rng.randint(-3, 3), rng.randint(-3, 3))
            V = (rng.randint(-3, 3), rng.randint(-3, 3))
            u = KVector(XY, 1, {(i,): Expr.const(XY, v) for i, v in enumerate(V)})
            multi = bott_derivative_multi(ps, O, alpha, u)
            assert multi.coords == bott_derivative_point(ps, O, alpha, V)


def test_tangent_classes_vanish(so3, sphere):
    rot = parse_kvector("x1*@x2 - x2*@x1", X3)
    node = sphere.nodes()[17]
    vals = {I: float(c.to_numpy()(list(node.x))) for I, c in rot.coeffs.items()}
    assert transversal_class(so3, tuple(node.x), vals, 1).is_zero(1e-10)
    f = parse("x1*x3 + x2", X3)
    X_h = hamiltonian_field(so3, parse("x2^2", X3))
    assert bott_derivative_multi(so3, sphere, f_ext=f, u_ext=X_h, node=node).is_zero(1e-10)


def test_bott_leibniz_at_nodes(so3, sphere):
    E = parse_kvector("x1*@x1 + x2*@x2 + x3*@x3", X3)
    rng = random.Random(9)
    for _ in range(3):
        f, h = random_poly(rng, X3, 2), random_poly(rng, X3, 2)
        lhs = bott_field(so3, f, E * h)
        Xh = sum((hamiltonian_field(so3, f)[(i,)] * h.diff_index(i) for i in range(3)), Expr.const(X3, 0))
        rhs = E * Xh + bott_field(so3, f, E) * h
        for node in sphere.nodes()[::37]:
            a = transversal_class(so3, tuple(node.x), {I: float(c.to_numpy()(list(node.x))) for I, c in lhs.coeffs.items()}, 1)
            b = transversal_class(so3, tuple(node.x), {I: float(c.to_numpy()(list(node.x))) for I, c in rhs.coeffs.items()}, 1)
            assert a.equals(b, 1e-9)


def test_symplectic_form_standard_plane(std2):
    patch = parameterized_leaf(std2, [Chart(("u", "v"), ((-1.0, 1.0), (-1.0, 1.0)), (parse("u", ("u", "v")), parse("v", ("u", "v"))))], order=3)
    for node in patch.nodes():
        assert np.allclose(leaf_symplectic_form(std2, patch, node), [[0, 1], [-1, 0]], atol=1e-14)


def test_symplectic_form_on_sphere(so3, sphere):
    from genpoisson.leaf import symplectic_form_on_frame

    omega = symplectic_form_on_frame(so3, (0, 0, 1), [(1, 0, 0), (0, 1, 0)])
    assert np.allclose(omega, [[0, 1], [-1, 0]], atol=1e-14)
    for node in sphere.nodes():
        w = leaf_symplectic_form(so3, sphere, node)
        assert np.allclose(w, -w.T, atol=1e-12)
        assert abs(np.linalg.det(w)) > 1e-8
    assert symplectic_consistency(so3, sphere, 2, sphere.nodes()[::10]) < 1e-9


def test_symplectic_form_rejects_degenerate_node(so3, sphere):
    bad = Node(0, (0.0, 0.0), 1.0, np.array([1.0, 0.0, 0.0]), np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(LeafError):
        leaf_symplectic_form(so3, sphere, bad)


def test_leaf_validation_rejects_non_leaf(so3):
    uv = ("u", "v")
    plane = Chart(uv, ((-1.0, 1.0), (-1.0, 1.0)), (parse("u", uv), parse("v", uv), parse("1", uv)))
    with pytest.raises(LeafError):
        parameterized_leaf(so3, [plane], order=4)


def test_sphere_nodes_lie_on_sphere(sphere):
    X, J, w = sphere.node_arrays()
    assert np.allclose((X ** 2).sum(axis=0), 1.0, atol=1e-14)
    assert np.all(w > 0)


def test_correspondence_examples(deformed_x, deformed_r2, so3, sphere):
    X_psi = hamiltonian_field(deformed_x, parse("x^2*y + y", XY))
    rep = flat_section_correspondence_check(deformed_x, O, X_psi, 2)
    assert rep.details["condition_1"] and rep.details["flat"]
    rep = flat_section_correspondence_check(deformed_r2, O, parse_kvector("@x", XY), 2)
    assert rep.details["condition_1"] and rep.details["flat"]
    rep = flat_section_correspondence_check(deformed_x, O, parse_kvector("@x", XY), 2)
    assert not rep.details["condition_1"] and rep.details["violating_pair"] is not None
    rep = flat_section_correspondence_check(so3, sphere, hamiltonian_field(so3, parse("x1*x2", X3)), 1)
    assert rep.details["condition_1"] and rep.details["flat"]
