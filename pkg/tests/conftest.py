from fractions import Fraction

import pytest
from hypothesis import strategies as st

from genpoisson.exterior import parse_kvector
from genpoisson.poisson import PoissonStructure
from genpoisson.symexpr import Expr

XY = ("x", "y")
X3 = ("x1", "x2", "x3")
X4 = ("x1", "x2", "x3", "x4")


def structure(text, vars):
    return PoissonStructure(parse_kvector(text, vars, 2))


@pytest.fixture(scope="session")
def std2():
    return structure("@x^@y", XY)


@pytest.fixture(scope="session")
def std4():
    return structure("@x1^@x2 + @x3^@x4", X4)


@pytest.fixture(scope="session")
def deformed_x():
    return structure("x*@x^@y", XY)


@pytest.fixture(scope="session")
def deformed_r2():
    return structure("(x^2+y^2)*@x^@y", XY)


@pytest.fixture(scope="session")
def so3():
    return structure("x3*@x1^@x2 + x1*@x2^@x3 + x2*@x3^@x1", X3)


@st.composite
def polynomials(draw, vars=XY, max_degree=2, max_terms=3):
    e = Expr.const(vars, 0)
    for _ in range(draw(st.integers(0, max_terms))):
        exps = [draw(st.integers(0, max_degree)) for _ in vars]
        c = draw(st.fractions(min_value=-5, max_value=5, max_denominator=4))
        e = e + Expr.monomial(vars, exps, c)
    return e


@st.composite
def nonzero_polynomials(draw, vars=XY, max_degree=2):
    e = draw(polynomials(vars, max_degree))
    if e.is_zero():
        e = e + 1
    return e


@st.composite
def rational_functions(draw, vars=XY):
    return draw(polynomials(vars)) / draw(nonzero_polynomials(vars, 1))


def points(dim):
    return st.tuples(*[st.fractions(min_value=-3, max_value=3, max_denominator=5) for _ in range(dim)])


F = Fraction


# acceptance lines, printed after the test session
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
