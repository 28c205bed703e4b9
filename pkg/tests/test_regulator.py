import cmath
import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chowcalc.cycles import FormalSum, parse_sum, totaro
from chowcalc.errors import UnsupportedShape
from chowcalc.numfield import embed_complex, field_create
from chowcalc.regulator import (
    _li2_series,
    aj_all_embeddings,
    aj_curve,
    aj_sum,
    aj_sum_robust,
    lattice_distance,
    li2,
    recognize_pi2,
)
from strategies import elements

PI2 = math.pi ** 2
LN2 = math.log(2)


# closed forms of the dilogarithm
@pytest.mark.parametrize("z,value", [
    (1, PI2 / 6),
    (-1, -PI2 / 12),
    (0.5, PI2 / 12 - LN2 ** 2 / 2),
    (2, PI2 / 4 - 1j * math.pi * LN2),
    ((3 - 5 ** 0.5) / 2, PI2 / 15 - math.log((1 + 5 ** 0.5) / 2) ** 2),
    (1j, -PI2 / 48 + 0.915965594177219015j),
])
def test_li2_closed_forms(z, value):
    assert abs(li2(z) - value) < 1e-13


@given(st.complex_numbers(max_magnitude=0.5, allow_nan=False, allow_infinity=False))
def test_li2_agrees_with_raw_series(z):
    assert abs(li2(z) - _li2_series(z, 200)) < 1e-13


@given(st.complex_numbers(min_magnitude=0.05, max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_li2_reflection(z):
    if abs(z - 1) < 0.05 or (z.imag == 0 and (z.real > 1 or z.real < 0)):
        return
    lhs = li2(z) + li2(1 - z)
    rhs = PI2 / 6 - cmath.log(z) * cmath.log(1 - z)
    assert abs(lhs - rhs) < 1e-10


def test_aj_of_c1():
    for n in (1, 5, 8):
        F = field_create(n)
        for k in F.coprime_indices():
            assert abs(aj_curve(totaro(F.one), k).value - PI2 / 6) < 1e-8


@given(st.sampled_from((1, 5)).flatmap(lambda n: elements(n, nonzero=True, avoid_one=True)))
def test_aj_matches_li2(a):
    for k in a.context.coprime_indices():
        try:
            v = aj_sum_robust(FormalSum.of(totaro(a)), k)[0]
        except UnsupportedShape:
            continue
        assert lattice_distance(v.value - li2(embed_complex(a, k))) < 1e-8


def test_recognize():
    r = recognize_pi2(PI2 / 6)
    assert r.q == Fraction(1, 6) and r.implied_order == 24
    r = recognize_pi2(PI2 / 15)
    assert r.q == Fraction(1, 15) and r.implied_order == 60
    assert recognize_pi2(4 * PI2 + 1e-12).implied_order == 1
    assert recognize_pi2(1 + 0.5j).q is None


def test_value_is_reduced_mod_lattice():
    v = aj_sum(parse_sum("25*C(1)", field_create(1)))
    assert abs(v.value - PI2 / 6) < 1e-8


def test_two_term_numerically():
    # C_a + C_(1-a) - C_1 - Z(a, 1 - a) vanishes, matching Euler's reflection
    S = parse_sum("C(1/3) + C(2/3) - C(1) - Z(1/3, 2/3)", field_create(1))
    assert aj_sum(S).is_zero()


def test_all_embeddings_conjugate():
    values = aj_all_embeddings(parse_sum("C(g)", field_create(5)))
    assert len(values) == 4
    v1, v4 = values[0].value, values[-1].value
    assert abs(v1 - v4.conjugate()) < 1e-8


def test_imaginary_part_of_4_ci():
    v = aj_sum(parse_sum("4*C(g)", field_create(4)))
    # 4 Im Li2(i) = 4 G with Catalan's constant G
    assert abs(v.value.imag - 4 * 0.915965594177219015) < 1e-8
