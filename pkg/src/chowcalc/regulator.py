"""Numerical Abel-Jacobi map for curve terms, valued in C / 4 pi^2 Z.

For a term [f1, f2, f3] with fractional-linear f1 the value is

    int_{f1^{-1}(R^-)} log f2 dlog f3  +  2 pi i sum_p +-log f3(p),

the sum running over the points of the arc where f2 crosses R^-.  The arc
is oriented from f1 = 0 to f1 = oo, which gives C_a -> Li2(a).
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize

from .cycles import CURVES, CurveTerm, FormalSum, boundary, normalize_quotient
from .errors import DegeneratePosition, GradingMismatch, UnsupportedShape
from .ratfunc import INF, FactoredRational, Mobius

PI2 = math.pi ** 2
LATTICE = 4 * PI2
TWO_PI_I = 2j * math.pi

# sign of the discrete crossing term; fixed once against two_term / z_split instances
_CROSSING_SIGN = -1


# ---------------------------------------------------------------------------
# Dilogarithm


def _li2_series(z: complex, terms: int = 60) -> complex:
    total = 0j
    zk = z
    for k in range(1, terms + 1):
        total += zk / (k * k)
        zk *= z
    return total


def _li2_bernoulli(z: complex) -> complex:
    """Li2 via the series in u = -log(1 - z); good for |z| <= 1, Re z <= 1/2."""
    u = -cmath.log(1 - z)
    # B_{2k} / (2k+1)!
    coeffs = (
        1 / 36, -1 / 3600, 1 / 211680, -1 / 10886400, 1 / 526901760,
        -4.064761645144226e-11, 8.921691020456453e-13, -1.9939295860721074e-14,
        4.5189800296199184e-16, -1.0356517612181247e-17, 2.3952186210261867e-19,
        -5.58178587432500e-21,
    )
    u2 = u * u
    total = u - u2 / 4
    p = u
    for c in coeffs:
        p *= u2
        total += c * p
    return total


def li2(z: complex) -> complex:
    """The dilogarithm, principal branch with cut [1, oo), continuous from below on the cut."""
    z = complex(z)
    if z.imag == 0 and z.real > 1:
        z = complex(z.real, -0.0)
    if z == 0:
        return 0j
    if z == 1:
        return complex(PI2 / 6)
    if abs(z) > 1:
        # inversion: Li2(z) = -Li2(1/z) - pi^2/6 - log(-z)^2 / 2
        return -li2(1 / z) - PI2 / 6 - cmath.log(-z) ** 2 / 2
    if abs(z) <= 0.5:
        return _li2_series(z)
    if z.real > 0.5:
        # reflection: Li2(z) = pi^2/6 - log z log(1-z) - Li2(1-z)
        w = 1 - z
        if abs(w) <= 0.5 or w.real <= 0.5:
            return PI2 / 6 - cmath.log(z) * cmath.log(w) - li2(w)
    return _li2_bernoulli(z)


# ---------------------------------------------------------------------------
# Values modulo the lattice


def reduce_mod(v: complex) -> complex:
    r = math.fmod(v.real, LATTICE)
    if r < 0:
        r += LATTICE
    if r >= LATTICE:
        r -= LATTICE
    return complex(r, v.imag)


def lattice_distance(v: complex) -> float:
    """Distance from v to the nearest point of 4 pi^2 Z."""
    r = math.fmod(v.real, LATTICE)
    r = min(abs(r), LATTICE - abs(r))
    return math.hypot(r, v.imag)


@dataclass(frozen=True)
class RegulatorValue:
    value: complex
    embedding_index: int
    precision_estimate: float = 0.0
    lattice: float = LATTICE

    def __post_init__(self):
        object.__setattr__(self, "value", reduce_mod(complex(self.value)))

    def __add__(self, other: "RegulatorValue") -> "RegulatorValue":
        return RegulatorValue(self.value + other.value, self.embedding_index,
                              self.precision_estimate + other.precision_estimate)

    def scaled(self, m: int) -> "RegulatorValue":
        return RegulatorValue(self.value * m, self.embedding_index, self.precision_estimate * abs(m))

    def is_zero(self, tol: float = 1e-6) -> bool:
        return lattice_distance(self.value) < tol

    def to_record(self) -> dict:
        return {
            "re": self.value.real,
            "im": self.value.imag,
            "embedding": self.embedding_index,
            "precision": self.precision_estimate,
        }


class Recognized(NamedTuple):
    q: Fraction | None
    implied_order: int | None
    residual: float
    torsion_candidate: bool


def recognize_pi2(v: RegulatorValue | complex, tol: float = 1e-6, max_den: int = 10_000) -> Recognized:
    """Find q with v = q pi^2 mod 4 pi^2; the implied order is the least n with n q in 4Z."""
    value = v.value if isinstance(v, RegulatorValue) else reduce_mod(complex(v))
    if abs(value.imag) > tol:
        return Recognized(None, None, abs(value.imag), False)
    x = value.real / PI2
    q = Fraction(x).limit_denominator(max_den)
    err = abs(float(q) - x) * PI2
    if err > tol:
        return Recognized(None, None, err, True)
    q = q % 4
    if q == 0:
        return Recognized(q, 1, err, True)
    n = (Fraction(4) / q).numerator  # least n with n * q in 4Z
    return Recognized(q, n, err, True)


def format_value(v: RegulatorValue) -> str:
    r = recognize_pi2(v)
    raw = f"{v.value.real:.12g}{v.value.imag:+.12g}i"
    if r.q is None:
        return f"{raw} (mod 4pi^2, +-{v.precision_estimate:.1e})"
    return f"{r.q}·π² (mod 4π²)  [{raw}, +-{v.precision_estimate:.1e}]"


# ---------------------------------------------------------------------------
# Curve terms


def _dlog(f: FactoredRational, y: complex, k: int) -> complex:
    total = 0j
    for r, e in f.factors:
        total += e / (y - r.embed(k))
    return total


class _Arc:
    """y(s) = -s e^{i theta}, s in (0, oo), written in u in (0, 1) via s = tan(pi u / 2)^2."""

    def __init__(self, theta: float):
        self.rot = cmath.exp(1j * theta)

    def y(self, u: float) -> complex:
        s = math.tan(math.pi * u / 2) ** 2
        return -s * self.rot

    def dy_du(self, u: float) -> complex:
        t = math.tan(math.pi * u / 2)
        return -self.rot * math.pi * t * (1 + t * t)


def _log_cut(w: complex, theta: float) -> complex:
    """log with branch cut along e^{i theta} R^-."""
    if theta == 0.0:
        return cmath.log(w)
    return cmath.log(w * cmath.exp(-1j * theta)) + 1j * theta


def _normalized(term: CurveTerm) -> CurveTerm:
    f1 = term.coords[0]
    if f1.map_degree() != 1:
        raise UnsupportedShape("the first coordinate must be fractional-linear; rewrite with relations first")
    mu = Mobius.from_factored(f1)
    return term.reparam(mu.inverse())


def _check_position(f2: FactoredRational, f3: FactoredRational, k: int, theta: float) -> None:
    rot = cmath.exp(1j * theta)
    for f in (f2, f3):
        for r, _ in f.factors:
            w = r.embed(k) / -rot
            if abs(w.imag) < 1e-12 * max(1.0, abs(w)) and w.real > 1e-12:
                raise DegeneratePosition(
                    "a zero or pole of the second or third coordinate lies on the arc; retry with rotated cuts")


def _crossings(f2: FactoredRational, arc: _Arc, k: int, theta: float, grid: int = 512):
    """Points u where f2(y(u)) crosses the cut of the second logarithm, with direction."""
    rot2 = cmath.exp(-1j * theta)
    if f2.is_constant():
        w = f2.unit.embed(k) * rot2
        if abs(w.imag) < 1e-13 and w.real < 0:
            raise DegeneratePosition("constant second coordinate on the cut; retry with rotated cuts")
        return []

    for end in (f2(f2.context.zero), f2(INF)):
        if end is INF or end.is_zero():
            continue
        w = end.embed(k) * rot2
        if abs(w.imag) < 1e-12 * abs(w) and w.real < 0:
            raise DegeneratePosition("second coordinate starts or ends on its cut; retry with rotated cuts")

    def im(u):
        return (f2.numeric(arc.y(u), k) * rot2).imag

    def re(u):
        return (f2.numeric(arc.y(u), k) * rot2).real

    us = np.linspace(1e-9, 1 - 1e-9, grid)
    vals = [im(u) for u in us]
    scale = max(1e-300, max(abs(v) for v in vals))
    if all(abs(v) < 1e-12 * scale or abs(v) < 1e-14 for v in vals):
        if any(re(u) < 0 for u in us):
            raise DegeneratePosition("second coordinate is real-negative along the arc; retry with rotated cuts")
        return []
    out = []
    for u0, u1, v0, v1 in zip(us[:-1], us[1:], vals[:-1], vals[1:]):
        if v0 == 0.0:
            continue
        if v0 * v1 < 0 or v1 == 0.0:
            if v1 == 0.0:
                u = float(u1)
            else:
                u = optimize.brentq(im, u0, u1, xtol=1e-15, maxiter=200)
            if re(u) < 0:
                out.append((u, 1 if v1 < v0 else -1))
    return out


def aj_curve(term: CurveTerm, k: int | None = None, theta: float = 0.0) -> RegulatorValue:
    """-Phi_{2,3} of the embedded term, reduced mod 4 pi^2.

    Every logarithm uses the cut e^{i theta} R^-. The cut has to be shared by
    all three coordinates: a boundary point can be a value of the first
    coordinate in one term and of the second in another, and the branch
    ambiguities only cancel in a closed sum when the conventions agree.
    """
    ctx = term.context
    k = ctx.embedding_index if k is None else k
    f1 = term.coords[0]
    if f1.is_constant():
        c = f1.unit.embed(k) * cmath.exp(-1j * theta)
        if not (abs(c.imag) < 1e-13 and c.real <= 0):
            return RegulatorValue(0j, k, 0.0)
        raise DegeneratePosition("constant first coordinate on the cut")
    _, f2, f3 = _normalized(term).coords
    _check_position(f2, f3, k, theta)
    arc = _Arc(theta)
    cross = _crossings(f2, arc, k, theta)
    breaks = sorted(u for u, _ in cross)

    def integrand(u):
        y = arc.y(u)
        return _log_cut(f2.numeric(y, k), theta) * _dlog(f3, y, k) * arc.dy_du(u)

    def part(g):
        total, err = 0.0, 0.0
        edges = [0.0] + breaks + [1.0]
        for a, b in zip(edges[:-1], edges[1:]):
            with warnings.catch_warnings():
                # roundoff near the endpoints; the returned error estimate still counts
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                v, e = integrate.quad(g, a, b, epsabs=1e-13, epsrel=1e-12, limit=400)
            total += v
            err += e
        return total, err

    re_part, e1 = part(lambda u: integrand(u).real)
    im_part, e2 = part(lambda u: integrand(u).imag)
    value = complex(re_part, im_part)
    for u, direction in cross:
        w = f3.numeric(arc.y(u), k)
        r = w * cmath.exp(-1j * theta)
        if abs(r.imag) < 1e-10 * abs(r) and r.real < 0:
            raise DegeneratePosition("third coordinate is on its cut where the second crosses its cut")
        value += _CROSSING_SIGN * direction * TWO_PI_I * _log_cut(w, theta)
    return RegulatorValue(value, k, e1 + e2 + 1e-12)


def aj_sum(S: FormalSum, k: int | None = None, theta: float = 0.0,
           normalize: bool = True) -> RegulatorValue:
    """Termwise regulator of a curve sum; terms outside the quotient are dropped first."""
    if S.grading != CURVES:
        raise GradingMismatch("the regulator is defined on curve sums")
    terms = normalize_quotient(S) if normalize else S
    ctx = next((t.context for t in terms.terms()), None)
    kk = k if k is not None else (ctx.embedding_index if ctx else 1)
    total = 0j
    prec = 0.0
    for t, c in terms.items():
        v = aj_curve(t, kk, theta)
        total += c * v.value
        prec += abs(c) * v.precision_estimate
    return RegulatorValue(total, kk, prec)


def aj_all_embeddings(S: FormalSum) -> list[RegulatorValue]:
    ctx = next((t.context for t in S.terms()), None)
    indices = ctx.coprime_indices() if ctx else [1]
    return [aj_sum_robust(S, k)[0] for k in indices]


# rotated cuts used when the default position is degenerate
RETRY_ANGLES = (0.0, 0.37, -0.29, 0.53, -0.61, 0.13, 1.1, -1.3)
AGREEMENT_TOL = 1e-6


def aj_sum_robust(S: FormalSum, k: int | None = None) -> tuple[RegulatorValue, float]:
    """aj_sum at the first non-degenerate cut angle.

    For a closed sum the value is independent of the angle, and a second
    non-degenerate angle must reproduce it mod 4 pi^2. An open sum is only
    defined up to branch terms supported on its boundary, so there the first
    usable angle fixes the convention.
    """
    closed = S.grading == CURVES and not boundary(S)
    last = None
    first = None
    for th in RETRY_ANGLES:
        try:
            v = aj_sum(S, k, th)
        except DegeneratePosition as exc:
            last = exc
            continue
        if not closed:
            return v, th
        if first is None:
            first = (v, th)
            continue
        if lattice_distance(v.value - first[0].value) < AGREEMENT_TOL:
            return first
        raise DegeneratePosition(
            f"cut angles {first[1]} and {th} give different values", witness=(first[0].value, v.value))
    if first is not None:
        raise DegeneratePosition(f"only {first[1]} is a non-degenerate cut angle", witness=first[0].value)
    raise last
