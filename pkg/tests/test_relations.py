import dataclasses
import json
from importlib.resources import files

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from chowcalc.cycles import FormalSum, parse_sum, recognize, sum_from_records
from chowcalc.errors import InvalidParameter
from chowcalc.numfield import field_create
from chowcalc.ratfunc import parse_coordinate
from chowcalc.relations import (
    Status,
    c_tilde,
    c_tilde_identity,
    distribution,
    five_term,
    from_recipe,
    inversion,
    permute,
    product_rule,
    recipe,
    torsion_right,
    two_term,
    verify,
    z_quotient,
    z_split,
    z_symmetry,
)
from strategies import elements, rationals

Q = field_create(1)
Q4 = field_create(4)
Q5 = field_create(5)
CORPUS = json.loads(files("chowcalc").joinpath("corpus/identities.json").read_text())


def S(text, ctx=Q):
    return parse_sum(text, ctx)


# claims fixed by hand

def test_two_term_at_minus_one():
    ident = two_term(-Q.one)
    assert ident.claim == S("C(-1) + C(2) - C(1) - Z(-1, 2)")
    assert verify(ident) is Status.VERIFIED


def test_distribution_at_one():
    ident = distribution(Q.one, 2)
    assert ident.claim == S("-2*C(1) - 4*C(-1)")
    assert verify(ident) is Status.VERIFIED


def test_distribution_n5_at_one():
    ident = distribution(Q5.one, 5)
    assert ident.claim == S("-20*C(1) - 25*C(g) - 25*C(g^2) - 25*C(g^3) - 25*C(g^4)", Q5)
    assert verify(ident) is Status.VERIFIED


def test_z_lemmas():
    a, b, c = Q.one * 2, Q.one * 5, Q.one * 3
    assert z_symmetry(a, c).claim == S("Z(2, 3) - Z(3, 2)")
    assert z_split(a, b, c).claim == S("M(2, 5, 3) - Z(3, 2) + Z(3, 5) + Z(3, 2/5)")
    for ident in (z_symmetry(a, c), z_split(a, b, c), z_quotient(a, b, c)):
        assert verify(ident) is Status.VERIFIED


def test_swap23_on_totaro_shape():
    ident = permute("swap23", parse_coordinate("1 - 3/x", Q), parse_coordinate("x", Q), parse_coordinate("1 - x", Q))
    assert verify(ident) is Status.VERIFIED
    # [1 - a/x, x, 1 - x] = -C_a + Z(a, 1 - a)
    swapped = ident.claim - S("C(3)")
    assert swapped == S("[1 - 3/x, x, 1 - x] - Z(-2, 3)")


def test_c_tilde():
    assert verify(c_tilde_identity(Q.one * 3)) is Status.VERIFIED
    assert c_tilde(Q.one * 3) == S("[1 - 3/x, 1 - x, x] - [1 - 3/x, x, 1 - x]")


def test_torsion_right_over_q5():
    ident = torsion_right(parse_coordinate("(x - 2)/(x - 3)", Q5), parse_coordinate("x", Q5), Q5.gen())
    assert verify(ident) is Status.VERIFIED
    assert len(ident.claim) == 1 and ident.claim.coefficient(next(iter(ident.claim.terms()))) == 5


# invalid parameters

@pytest.mark.parametrize("make", [
    lambda: two_term(Q.one),
    lambda: two_term(Q.zero),
    lambda: five_term("full", Q.one * 2, -Q.one),
    lambda: inversion("b_eq_minus_a", Q.one, None),
    lambda: distribution(Q.one * 2, 3),
    lambda: z_split(Q.one * 2, Q.one * 2, Q.one * 3),
])
def test_invalid_parameters(make):
    with pytest.raises(InvalidParameter):
        make()


# corpus

@pytest.mark.parametrize("entry", CORPUS, ids=[e["label"] for e in CORPUS])
def test_corpus_instance_verifies(entry):
    ident = from_recipe(entry["recipe"])
    assert ident.claim == sum_from_records(entry["claim"]), "generated claim drifted"
    assert verify(ident) is Status.VERIFIED, ident.witness


@pytest.mark.parametrize("entry", CORPUS, ids=[e["label"] for e in CORPUS])
def test_recipe_round_trip(entry):
    ident = from_recipe(entry["recipe"])
    assert recipe(ident) == entry["recipe"]


def _mutations(ident):
    if ident.chains:
        t, c = next(iter(ident.chains.items()))
        yield dataclasses.replace(ident, chains=ident.chains + FormalSum.of((1, t)), status=Status.UNVERIFIED)
    if ident.derivation:
        (ref, w), *rest = ident.derivation
        yield dataclasses.replace(ident, derivation=((ref, w + 1), *rest), status=Status.UNVERIFIED)


@pytest.mark.parametrize("entry", CORPUS, ids=[e["label"] for e in CORPUS])
def test_mutations_fail(entry):
    ident = from_recipe(entry["recipe"])
    count = 0
    for bad in _mutations(ident):
        count += 1
        assert verify(bad) is Status.FAILED
        assert bad.witness is not None
    assert count


# properties: random admissible draws

@given(rationals())
def test_two_term_random(a):
    assert verify(two_term(a)) is Status.VERIFIED


@given(elements(5, nonzero=True, avoid_one=True))
def test_two_term_random_q5(a):
    assert verify(two_term(a)) is Status.VERIFIED


@given(rationals(), rationals(), rationals())
def test_z_lemmas_random(a, b, c):
    assume(a != b and c != 1)
    for make in (lambda: z_split(a, b, c), lambda: z_quotient(a, b, c), lambda: z_symmetry(a, c)):
        try:
            ident = make()
        except InvalidParameter:
            continue
        assert verify(ident) is Status.VERIFIED


@given(rationals(), rationals())
def test_five_term_random(a, b):
    try:
        ident = five_term("full", a, b)
    except InvalidParameter:
        assume(False)
    assert verify(ident) is Status.VERIFIED


@given(elements(5, nonzero=True, avoid_one=True), elements(5, nonzero=True, avoid_one=True))
def test_five_term_random_q5(a, b):
    try:
        ident = five_term("full", a, b)
    except InvalidParameter:
        assume(False)
    assert verify(ident) is Status.VERIFIED


@given(rationals())
def test_distribution_n2_random(a):
    assume(a != -1)
    assert verify(distribution(a, 2)) is Status.VERIFIED


@given(st.sampled_from(["left", "middle", "right"]), rationals(), rationals(), rationals(), rationals())
def test_product_rule_random(slot, p, q, r, s):
    assume(len({p, q, r, s}) == 4)
    f = parse_coordinate(f"(x - ({p}))/(x - ({q}))", Q)
    g = parse_coordinate(f"(x - ({r}))/(x - ({s}))", Q)
    h1, h2 = (Q.one * 2, Q.one * 3) if slot == "right" else (parse_coordinate("x - 7", Q), parse_coordinate("x + 11", Q))
    try:
        ident = product_rule(slot, h1, h2, f, g)
    except Exception:
        assume(False)
    assert verify(ident) is Status.VERIFIED


@given(st.sampled_from(["swap12", "swap23", "swap13"]), rationals(), rationals(), rationals(), rationals())
def test_permute_random(variant, p, q, r, s):
    assume(len({p, q, r, s}) == 4)
    f = parse_coordinate(f"(x - ({p}))/(x - ({q}))", Q)
    g = parse_coordinate(f"(x - ({r}))/(x - ({s}))", Q)
    h = parse_coordinate(f"(x - ({p + q}))/(x - ({r * s}))", Q)
    try:
        ident = permute(variant, f, g, h)
    except Exception:
        assume(False)
    assert verify(ident) is Status.VERIFIED


def test_permute_twice_is_trivial():
    f, g, h = (parse_coordinate(t, Q) for t in ("(x - 2)/(x - 5)", "(x + 1)/(x - 3)", "(x - 4)/(x + 6)"))
    once = permute("swap23", f, g, h)
    twice = permute("swap23", f, h, g)
    assert verify(once) is Status.VERIFIED and verify(twice) is Status.VERIFIED
    # the curve terms cancel; what is left are Z(a, c) - Z(c, a) pairs
    pairs = {}
    for t, c in (once.claim - twice.claim).items():
        kind, a, b = recognize(t)
        assert kind == "Z"
        key = frozenset((a, b))
        pairs[key] = pairs.get(key, 0) + c
    assert all(v == 0 for v in pairs.values())
