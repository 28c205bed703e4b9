import json
from importlib.resources import files

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chowcalc.cycles import (
    CURVES,
    SURFACES,
    CurveTerm,
    FormalSum,
    PointTerm,
    TermClass,
    admissible_curve,
    boundary,
    canonical_form,
    classify,
    closedness_check,
    dumps_sum,
    loads_sum,
    normalize_quotient,
    parse_sum,
    parse_term,
    totaro,
    z_term,
)
from chowcalc.errors import GradingMismatch, ParseError
from chowcalc.numfield import field_create
from chowcalc.ratfunc import parse_coordinate
from chowcalc.relations import from_recipe, product_rule, two_term
from strategies import elements, rationals

Q = field_create(1)
Q5 = field_create(5)


def points(text, ctx=Q):
    return parse_sum(text, ctx)


def test_totaro_boundary_oracle():
    assert boundary(parse_sum("C(2)", Q)) == points("(-1, 2)")
    assert boundary(parse_sum("C(-1)", Q)) == points("(2, -1)")
    assert not boundary(parse_sum("C(1)", Q))


def test_z_term_boundary():
    # faces at x = a and x = 0; the result is symmetric in (a, c)
    b = boundary(FormalSum.of(z_term(Q.one * 2, Q.one * 3)))
    assert b == points("(2, 3) + (3, 2)")
    assert b == boundary(FormalSum.of(z_term(Q.one * 3, Q.one * 2)))


def test_curve_with_two_constants_is_degenerate():
    t = parse_term("[1 - 2/x, 3, 5]", Q)
    assert classify(t) is TermClass.DEGENERATE
    assert not normalize_quotient(FormalSum.of(t))


def test_constant_left_coordinate_is_quotiented():
    t = parse_term("[3, 1 - x, x]", Q)
    assert classify(t) is TermClass.ZPRIME
    assert not normalize_quotient(FormalSum.of(t))


def test_inadmissible_witness():
    result = admissible_curve(parse_term("[x, x, x]", Q))
    assert not result
    assert sorted(result.indices) == [0, 1, 2]


def test_totaro_is_admissible():
    assert admissible_curve(totaro(Q.one * 3, Q))


def test_canonical_form_is_reparametrization_invariant():
    a = parse_term("[1 - 2/x, 1 - x, x]", Q)
    b = parse_term("[1 - 2*x, 1 - 1/x, 1/x]", Q)
    assert canonical_form(a) == canonical_form(b)
    assert FormalSum.of(a) - FormalSum.of(b) == FormalSum(CURVES)


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_sum("C(2) +", Q)
    with pytest.raises(ParseError):
        parse_sum("1/2*C(2)", Q)
    with pytest.raises(ParseError):
        parse_sum("W(2)", Q)


def test_grading_mismatch():
    with pytest.raises(GradingMismatch):
        parse_sum("C(2)", Q) + points("(2, 3)")


def test_two_term_instance_is_closed():
    claim = two_term(Q.one * 3).claim
    assert closedness_check(claim)


def test_not_closed_reports_residual():
    result = closedness_check(parse_sum("C(2)", Q))
    assert not result


def _all_chains(identity, seen=None):
    seen = set() if seen is None else seen
    if id(identity) in seen:
        return []
    seen.add(id(identity))
    out = [identity.chains] if identity.chains else []
    for ref, _ in identity.derivation:
        out += _all_chains(ref, seen)
    return out


def test_boundary_squared_on_catalogued_chains():
    records = json.loads(files("chowcalc").joinpath("corpus/identities.json").read_text())
    checked = 0
    for rec in records:
        for chain in _all_chains(from_recipe(rec["recipe"])):
            assert chain.grading == SURFACES
            assert not boundary(boundary(chain)), rec["label"]
            checked += 1
    assert checked > 30


# properties

@given(st.sampled_from((1, 5)).flatmap(lambda n: elements(n, nonzero=True, avoid_one=True)))
def test_boundary_of_totaro(a):
    assert boundary(FormalSum.of(totaro(a))) == FormalSum.of(PointTerm(1 - a, a))


@given(rationals(), rationals(), rationals(), rationals())
def test_boundary_squared_on_random_product_chains(p, q, r, s):
    if len({p, q, r, s}) < 4:
        return
    f = parse_coordinate(f"(x - ({p}))/(x - ({q}))", Q)
    g = parse_coordinate(f"(x - ({r}))/(x - ({s}))", Q)
    for slot in ("left", "middle", "right"):
        try:
            ident = product_rule(slot, Q.one * 2, Q.one * 3, f, g) if slot == "right" else \
                product_rule(slot, parse_coordinate("x - 7", Q), parse_coordinate("x + 11", Q), f, g)
        except Exception:
            continue
        assert not boundary(boundary(ident.chains))


@given(st.lists(st.tuples(st.integers(-5, 5), rationals()), max_size=5))
def test_sum_serialization_round_trip(pairs):
    S = FormalSum(CURVES, [(c, totaro(a)) for c, a in pairs])
    assert loads_sum(dumps_sum(S)) == S
    assert parse_sum(str(S) if S else "0", Q) == S


@given(st.lists(st.tuples(st.integers(-5, 5), rationals()), max_size=5))
def test_boundary_is_linear(pairs):
    S = FormalSum(CURVES, [(c, totaro(a)) for c, a in pairs])
    T = FormalSum(CURVES, [(1, totaro(a)) for _, a in pairs])
    assert boundary(S + T) == boundary(S) + boundary(T)
    assert boundary(S * 3) == boundary(S) * 3


def test_curve_term_requires_three_coordinates():
    with pytest.raises(Exception):
        CurveTerm([parse_coordinate("x", Q)])
