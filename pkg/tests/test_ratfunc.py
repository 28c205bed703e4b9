from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chowcalc.errors import ParseError
from chowcalc.numfield import field_create
from chowcalc.ratfunc import (
    INF,
    FactoredRational,
    Mobius,
    fr_divisor,
    fr_eval,
    fr_reparam,
    parse_coordinate,
    serialize_fr,
)
from strategies import elements

Q = field_create(1)
Q5 = field_create(5)


def fr(text, ctx=Q):
    return parse_coordinate(text, ctx)


def test_totaro_coordinate_divisor():
    f = fr("1 - 2/x")
    assert dict((str(p), m) for p, m in fr_divisor(f)) == {"2": 1, "0": -1}
    assert fr_eval(f, INF) == Q.one
    assert fr_eval(f, Q.zero) is INF
    assert fr_eval(f, Q.one * 4) == Q.one / 2


def test_divisor_at_infinity():
    f = fr("x^2/(x - 1)")
    div = dict((str(p), m) for p, m in fr_divisor(f))
    assert div == {"0": 2, "1": -1, "oo": -1}
    assert sum(m for _, m in fr_divisor(f)) == 0


def test_expanded_polynomials_are_factored():
    f = fr("(x^2 - 3*x + 2)/(x^2 - 1)")
    assert f == fr("(x - 2)/(x + 1)")


def test_cyclotomic_roots_found():
    f = fr("x^4 + x^3 + x^2 + x + 1", Q5)
    assert len(f.factors) == 4
    assert fr("1 - x^5", Q5) == fr("-(x - 1)*(x - g)*(x - g^2)*(x - g^3)*(x - g^4)", Q5)


def test_irreducible_polynomial_rejected():
    with pytest.raises(ParseError):
        fr("x^2 - 2")


def test_parse_error_position():
    with pytest.raises(ParseError):
        fr("(x - 1")


def test_mobius_sending():
    mu = Mobius.sending(Q.one * 2, Q.one * 3, INF, Q)
    assert mu(Q.one * 2).is_zero()
    assert mu(Q.one * 3).is_one()
    assert mu(INF) is INF


def test_reparametrization_by_scaling():
    # (x - a)/(x - 1) with x -> x/b equals (x - ab)/(x - b) up to the unit
    b = Q.one * 3
    f = fr("(x - 2)/(x - 1)")
    g = fr_reparam(f, Mobius.make(1, 0, 0, b, Q))
    assert g == fr("(x - 6)/(x - 3)")


@given(elements(5, nonzero=True), elements(5, nonzero=True), elements(5))
def test_degree_zero_divisor(a, b, c):
    if a == b:
        return
    f = FactoredRational.linear(a) / FactoredRational.linear(b) * FactoredRational.linear(c, 2)
    assert sum(m for _, m in fr_divisor(f)) == 0


@given(elements(5), elements(5))
def test_serialization_round_trip(a, b):
    f = FactoredRational(Q5.one * 3, [(a, 1), (b, -2)])
    assert parse_coordinate(serialize_fr(f), Q5) == f


@given(st.integers(-20, 20).filter(lambda v: v not in (0, 1)), st.fractions(max_denominator=9))
def test_evaluation_matches_numeric(r, t):
    f = fr(f"(x - {r})/(x - 1)")
    if t in (Fraction(1), Fraction(r)):
        return
    exact = complex(fr_eval(f, Q.one * t))
    assert abs(exact - f.numeric(float(t))) < 1e-9 * (1 + abs(exact))
