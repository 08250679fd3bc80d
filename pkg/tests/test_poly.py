from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from mpmcheck.poly import ExprSyntaxError, Poly, parse_poly, render_poly

NAMES = ["A", "B"]


def P(text):
    return parse_poly(text, NAMES)


def test_parse_and_eval():
    p = P("(A-10)^2 + (B-0)^2")
    assert p.eval_exact((10, 2)) == 4
    assert p.eval_exact((8, 1)) == 5


def test_decimal_and_scientific_literals_exact():
    assert P("0.02").constant_value() == Fraction(1, 50)
    assert P("1e-3").constant_value() == Fraction(1, 1000)
    assert P("2.5e2").constant_value() == 250


def test_rational_division():
    assert P("1/3 * A").eval_exact((6, 0)) == 2
    with pytest.raises(ExprSyntaxError):
        P("A / B")


def test_unknown_name():
    with pytest.raises(ExprSyntaxError):
        P("A + C")


def test_syntax_errors_carry_position():
    with pytest.raises(ExprSyntaxError) as exc:
        P("A + ")
    assert "position" in str(exc.value)


def test_shift_matches_translated_evaluation():
    p = P("A^2 + 3*A*B - B + 7")
    q = p.shift((2, -1))
    for x in [(0, 1), (3, 4), (10, 2)]:
        assert q.eval_exact(x) == p.eval_exact((x[0] + 2, x[1] - 1))


def test_fix_substitutes_coordinate():
    p = P("A^2*B + B^2")
    q = p.fix(0, 3)
    assert q.eval_exact((999, 2)) == 9 * 2 + 4


def test_derivative():
    p = P("A^3 + 2*A*B")
    dA = p.deriv(0)
    assert dA.eval_exact((2, 5)) == 3 * 4 + 10


def test_degree_and_leading_coeff():
    p = P("A^2 - 5*B^3 + 1")
    assert p.degree() == 3
    assert p.degree_in(0) == 2
    assert p.leading_coeff_in(1) == -5


def test_scaled_int_clears_denominators():
    p = P("0.02*A + 1/3")
    terms, den = p.scaled_int()
    assert den == 150
    assert all(isinstance(c, int) for c in terms.values())
    assert terms[(1, 0)] == 3
    assert terms[(0, 0)] == 50


coeffs = st.fractions(min_value=-5, max_value=5, max_denominator=20)


@st.composite
def polys(draw):
    n_terms = draw(st.integers(0, 5))
    terms = {}
    for _ in range(n_terms):
        e = (draw(st.integers(0, 3)), draw(st.integers(0, 3)))
        terms[e] = draw(coeffs)
    return Poly(2, terms)


points = st.tuples(st.integers(0, 12), st.integers(0, 12))


@given(polys(), polys(), points)
def test_ring_homomorphism_at_points(p, q, x):
    assert (p + q).eval_exact(x) == p.eval_exact(x) + q.eval_exact(x)
    assert (p * q).eval_exact(x) == p.eval_exact(x) * q.eval_exact(x)
    assert (p - q).eval_exact(x) == p.eval_exact(x) - q.eval_exact(x)


@given(polys(), st.tuples(st.integers(-4, 4), st.integers(-4, 4)), points)
def test_shift_identity(p, v, x):
    assert p.shift(v).eval_exact(x) == p.eval_exact((x[0] + v[0], x[1] + v[1]))


@given(polys())
def test_render_reparses_to_equal_poly(p):
    text = render_poly(p, NAMES)
    assert parse_poly(text, NAMES) == p
