"""Parametrized cycles in the algebraic cube and the cubical boundary map.

Curves are triples of factored rational functions of one parameter,
surfaces are quadruples of :mod:`ratfunc` surface coordinates on
P^1_x x P^1_z, and points are pairs of field elements.  A
:class:`FormalSum` is an integer combination of terms; curve terms are
stored in a reparametrization invariant canonical form so that copies of
one cycle written with different parameters collide.
"""

from __future__ import annotations

import ast
import enum
import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from math import gcd
from typing import Iterable, Iterator, NamedTuple, Union

from .errors import (
    ContextMismatch,
    GradingMismatch,
    InadmissibleError,
    InvalidArgument,
    NotDescendable,
    ParseError,
    UnsupportedShape,
)
from .numfield import (
    FieldContext,
    FieldElement,
    _ElementEvaluator,
    coerce,
    field_create,
    parse_element,
    parse_python_expr,
)
from .ratfunc import (
    INF,
    FactoredRational,
    Mixed,
    Mobius,
    Point,
    PureX,
    PureZ,
    SurfaceCoordinate,
    compose_mobius_branch,
    eval_coordinate_node,
    fr_divisor,
    fr_eval,
    fr_reparam,
    parse_coordinate,
    point_key,
    point_str,
    serialize_fr,
)

POINTS, CURVES, SURFACES = "points", "curves", "surfaces"


# ---------------------------------------------------------------------------
# Terms


class PointTerm:
    __slots__ = ("coords", "_hash")

    def __init__(self, u: FieldElement, v: FieldElement):
        for c in (u, v):
            if c.is_zero() or c.is_one():
                raise InvalidArgument(f"point coordinates must avoid 0 and 1, got ({u}, {v})")
        self.coords = (u, v)
        self._hash = hash(self.coords)

    @property
    def context(self) -> FieldContext:
        return self.coords[0].context

    def key(self) -> tuple:
        return (self.coords[0].key(), self.coords[1].key())

    def __eq__(self, other):
        return isinstance(other, PointTerm) and self.coords == other.coords

    def __hash__(self):
        return self._hash

    def __str__(self):
        return f"({self.coords[0]}, {self.coords[1]})"

    __repr__ = __str__


class CurveTerm:
    """The image of P^1 under ``x -> (f1(x), f2(x), f3(x))``, cut down to the cube."""

    __slots__ = ("coords", "_hash", "_key")

    def __init__(self, coords):
        coords = tuple(coords)
        if len(coords) != 3:
            raise InvalidArgument("a curve term has exactly three coordinates")
        ctx = next((c.context for c in coords if isinstance(c, (FactoredRational, FieldElement))), None)
        if ctx is None:
            raise InvalidArgument("need a field context for a curve term")
        self.coords = tuple(_as_fr(ctx, c) for c in coords)
        if len({c.context.conductor for c in self.coords}) != 1:
            raise ContextMismatch("curve coordinates live in different fields")
        self._hash = hash(self.coords)
        self._key = None

    @property
    def context(self) -> FieldContext:
        return self.coords[0].context

    def key(self) -> tuple:
        if self._key is None:
            self._key = tuple(c.key() for c in self.coords)
        return self._key

    def support(self) -> list[Point]:
        seen: dict = {}
        for c in self.coords:
            for p in c.support():
                seen.setdefault(p, None)
        return sorted(seen, key=point_key)

    def reparam(self, mu: Mobius) -> "CurveTerm":
        return CurveTerm([fr_reparam(c, mu) for c in self.coords])

    def __eq__(self, other):
        return isinstance(other, CurveTerm) and self.coords == other.coords

    def __hash__(self):
        return self._hash

    def __str__(self):
        return "[" + ", ".join(serialize_fr(c) for c in self.coords) + "]"

    __repr__ = __str__


class SurfaceTerm:
    __slots__ = ("coords", "_hash")

    def __init__(self, coords):
        coords = tuple(coords)
        if len(coords) != 4:
            raise InvalidArgument("a surface term has exactly four coordinates")
        if sum(isinstance(c, Mixed) for c in coords) > 1:
            raise UnsupportedShape("at most one mixed coordinate is supported")
        for c in coords:
            if not isinstance(c, (PureX, PureZ, Mixed)):
                raise InvalidArgument(f"not a surface coordinate: {c!r}")
        self.coords = coords
        self._hash = hash(coords)

    @property
    def context(self) -> FieldContext:
        c = self.coords[0]
        if isinstance(c, PureX):
            return c.f.context
        if isinstance(c, PureZ):
            return c.mu.context
        return c.P.context

    def key(self) -> tuple:
        return tuple(_surface_coord_key(c) for c in self.coords)

    def __eq__(self, other):
        return isinstance(other, SurfaceTerm) and self.coords == other.coords

    def __hash__(self):
        return self._hash

    def __str__(self):
        return "[" + ", ".join(str(c) for c in self.coords) + "]"

    __repr__ = __str__


def _surface_coord_key(c: SurfaceCoordinate) -> tuple:
    if isinstance(c, PureX):
        return (0, c.f.key())
    if isinstance(c, PureZ):
        return (1, tuple(v.key() for v in (c.mu.a, c.mu.b, c.mu.c, c.mu.d)))
    q = (1,) if c.Q is INF else (0, c.Q.key())
    return (2, c.P.key(), q)


def _as_fr(ctx: FieldContext, v) -> FactoredRational:
    if isinstance(v, FactoredRational):
        return v
    if v is INF:
        raise InadmissibleError("a coordinate is identically infinite", witness=INF)
    v = coerce(ctx, v)
    if v.is_zero():
        raise InadmissibleError("a coordinate is identically zero", witness=v)
    return FactoredRational(v)


Term = Union[PointTerm, CurveTerm, SurfaceTerm]


def _grading_of(term: Term) -> str:
    if isinstance(term, PointTerm):
        return POINTS
    if isinstance(term, CurveTerm):
        return CURVES
    if isinstance(term, SurfaceTerm):
        return SURFACES
    raise InvalidArgument(f"not a term: {term!r}")


# ---------------------------------------------------------------------------
# Named curve families


def _x(ctx):
    return FactoredRational.x(ctx)


def totaro(a, ctx: FieldContext | None = None) -> CurveTerm:
    """C_a = [1 - a/x, 1 - x, x]."""
    ctx = ctx or a.context
    a = coerce(ctx, a)
    if a.is_zero():
        raise InvalidArgument("C_a needs a != 0")
    one = ctx.one
    f1 = FactoredRational(one, [(a, 1), (ctx.zero, -1)])
    f2 = FactoredRational(-one, [(one, 1)])
    return CurveTerm([f1, f2, _x(ctx)])


def z_term(a, c, ctx: FieldContext | None = None) -> CurveTerm:
    """Z(a, c) = [(x - a)/(x - 1), c, x]."""
    ctx = ctx or (a.context if isinstance(a, FieldElement) else c.context)
    a, c = coerce(ctx, a), coerce(ctx, c)
    if a.is_one():
        return CurveTerm([ctx.one, c, _x(ctx)])
    if a.is_zero():
        f1 = FactoredRational(ctx.one, [(ctx.zero, 1), (ctx.one, -1)])
    else:
        f1 = FactoredRational(ctx.one, [(a, 1), (ctx.one, -1)])
    return CurveTerm([f1, c, _x(ctx)])


def monodromy(p, q, c, ctx: FieldContext | None = None) -> CurveTerm:
    """[(z - p)/(z - q), z, c], the correction terms with a constant on the right."""
    ctx = ctx or next(v.context for v in (p, q, c) if isinstance(v, FieldElement))
    p, q, c = (coerce(ctx, v) for v in (p, q, c))
    if p == q:
        f1 = FactoredRational(ctx.one)
    else:
        f1 = FactoredRational(ctx.one, [(p, 1), (q, -1)])
    return CurveTerm([f1, _x(ctx), c])


# ---------------------------------------------------------------------------
# Classification and admissibility


class TermClass(enum.Enum):
    ZERO = "Zero"
    DEGENERATE = "Degenerate"
    ZPRIME = "ZPrime"
    GENERIC = "Generic"

    def __str__(self):
        return self.value


def classify(term: CurveTerm) -> TermClass:
    coords = term.coords
    if any(c.is_one() for c in coords):
        return TermClass.ZERO
    if sum(c.is_constant() for c in coords) >= 2:
        return TermClass.DEGENERATE
    if coords[0].is_constant():
        return TermClass.ZPRIME
    return TermClass.GENERIC


class Admissibility(NamedTuple):
    ok: bool
    point: Point | None = None
    indices: tuple[int, ...] = ()

    def __bool__(self):
        return self.ok


def admissible_curve(term: CurveTerm) -> Admissibility:
    """Two coordinates may share a zero or pole only where the third one equals 1."""
    for p in term.support():
        hit = tuple(i for i, c in enumerate(term.coords) if c.order_at(p))
        if len(hit) < 2:
            continue
        if len(hit) == 3:
            return Admissibility(False, p, hit)
        (third,) = set(range(3)) - set(hit)
        val = fr_eval(term.coords[third], p)
        if val is INF or not val.is_one():
            return Admissibility(False, p, hit)
    return Admissibility(True)


# ---------------------------------------------------------------------------
# Boundary of a curve


def boundary_curve(term: CurveTerm) -> "FormalSum":
    """Alternating sum of the face restrictions, as a formal sum of points."""
    out = FormalSum(POINTS)
    coords = term.coords
    for i, f in enumerate(coords):
        sign = -1 if i % 2 else 1
        others = [c for j, c in enumerate(coords) if j != i]
        for p, m in fr_divisor(f):
            vals = [fr_eval(c, p) for c in others]
            if any(v is not INF and v.is_one() for v in vals):
                continue
            if any(v is INF or v.is_zero() for v in vals):
                raise InadmissibleError(
                    f"{term} meets a codimension two face at x = {point_str(p)}", witness=(p, i)
                )
            out._add(PointTerm(*vals), sign * m)
    return out


# ---------------------------------------------------------------------------
# Boundary of a surface

_ONE = "one"


def _pt_is_one(v) -> bool:
    if isinstance(v, FactoredRational):
        return v.is_one()
    return v is not INF and v.is_one()


def _fr_or_point(v):
    """Collapse constant factored rationals to field elements."""
    if isinstance(v, FactoredRational) and v.is_constant():
        return v.unit
    return v


def _const_minus(z0: FieldElement, P: FactoredRational):
    """The function z0 - P(x), or a field element when it is constant."""
    if P.is_constant():
        return z0 - P.unit
    if z0.is_zero():
        return P * -1
    if P.map_degree() == 1:
        mu = Mobius.from_factored(P)
        return Mobius.make(z0 * mu.c - mu.a, z0 * mu.d - mu.b, mu.c, mu.d).as_factored()
    raise UnsupportedShape(f"cannot factor {z0} - ({P}) without expanding")


def _restrict_vertical(coord: SurfaceCoordinate, x0: Point):
    """Restriction to the line x = x0, as a function of z or a constant."""
    if isinstance(coord, PureX):
        return fr_eval(coord.f, x0)
    if isinstance(coord, PureZ):
        return _fr_or_point(coord.mu.as_factored())
    P, Q = coord.P, coord.Q
    oP = min(0, P.order_at(x0))
    ctx = P.context
    if Q is INF:
        if oP < 0:
            return INF
        return FactoredRational.linear(fr_eval(P, x0))
    oQ = min(0, Q.order_at(x0))
    if oP == 0 and oQ == 0:
        p0, q0 = fr_eval(P, x0), fr_eval(Q, x0)
        if p0 == q0:
            return ctx.one
        return FactoredRational(ctx.one, [(p0, 1), (q0, -1)])
    if oP == oQ:
        return P.leading_value(x0) / Q.leading_value(x0)
    return INF if oP < oQ else ctx.zero


def _restrict_horizontal(coord: SurfaceCoordinate, z0: Point):
    """Restriction to the line z = z0, as a function of x or a constant."""
    if isinstance(coord, PureX):
        return _fr_or_point(coord.f)
    if isinstance(coord, PureZ):
        return coord.mu(z0)
    P, Q = coord.P, coord.Q
    ctx = P.context
    if z0 is INF:
        return INF if Q is INF else ctx.one
    num = _fr_or_point(_const_minus(z0, P))
    if Q is INF:
        return num
    den = _fr_or_point(_const_minus(z0, Q))
    if isinstance(num, FieldElement) and num.is_zero():
        return num
    if isinstance(den, FieldElement) and den.is_zero():
        return INF
    if isinstance(num, FieldElement) and isinstance(den, FieldElement):
        return num / den
    return _fr_or_point(FactoredRational(ctx.one) * num / den)


def _restrict_graph(coord: SurfaceCoordinate, R: FactoredRational):
    """Restriction to the graph z = R(x), parametrized by x."""
    if isinstance(coord, PureX):
        return _fr_or_point(coord.f)
    if isinstance(coord, PureZ):
        if R.is_constant():
            return coord.mu(R.unit)
        return _fr_or_point(compose_mobius_branch(coord.mu, R))
    raise UnsupportedShape("a graph component cannot be restricted to a second mixed coordinate")


class Face(NamedTuple):
    index: int
    value: str  # "0" or "oo"
    multiplicity: int
    component: str
    term: CurveTerm | None  # None when the face is dropped
    dropped: bool


def _components(coord: SurfaceCoordinate, ctx: FieldContext):
    """Yield (value, multiplicity, kind, locus) for the divisor of one coordinate.

    kind is "v" (x = locus), "h" (z = locus) or "g" (z = locus(x)).
    """
    if isinstance(coord, PureX):
        for p, m in fr_divisor(coord.f):
            yield ("0" if m > 0 else "oo"), abs(m), "v", p
        return
    if isinstance(coord, PureZ):
        yield "0", 1, "h", coord.mu.zero()
        yield "oo", 1, "h", coord.mu.pole()
        return
    P, Q = coord.P, coord.Q
    yield "0", 1, "g", P
    if Q is INF:
        yield "oo", 1, "h", INF
    else:
        yield "oo", 1, "g", Q
    pts: dict = {}
    for f in (P, Q):
        if f is INF:
            continue
        for p in f.support():
            pts.setdefault(p, None)
    for p in sorted(pts, key=point_key):
        o = min(0, P.order_at(p)) - (0 if Q is INF else min(0, Q.order_at(p)))
        if o:
            yield ("0" if o > 0 else "oo"), abs(o), "v", p


def surface_faces(term: SurfaceTerm) -> list[Face]:
    """Every face component of a surface with its restriction, dropped ones included."""
    ctx = term.context
    faces = []
    for i, coord in enumerate(term.coords):
        others = [c for j, c in enumerate(term.coords) if j != i]
        for value, mult, kind, locus in _components(coord, ctx):
            if kind == "v":
                vals = [_restrict_vertical(c, locus) for c in others]
                desc = f"x = {point_str(locus)}"
            elif kind == "h":
                vals = [_restrict_horizontal(c, locus) for c in others]
                desc = f"z = {point_str(locus)}"
            else:
                if locus.is_constant():
                    vals = [_restrict_horizontal(c, locus.unit) for c in others]
                else:
                    vals = [_restrict_graph(c, locus) for c in others]
                desc = f"z = {serialize_fr(locus)}"
            if any(_pt_is_one(v) for v in vals):
                faces.append(Face(i, value, mult, desc, None, True))
                continue
            bad = [v for v in vals if v is INF or (isinstance(v, FieldElement) and v.is_zero())]
            if bad:
                raise InadmissibleError(
                    f"{term} contains a curve inside a codimension two face ({desc}, coordinate {i + 1})",
                    witness=(i, value, desc),
                )
            faces.append(Face(i, value, mult, desc, CurveTerm([_as_fr(ctx, v) for v in vals]), False))
    return faces


def boundary_surface(term: SurfaceTerm) -> "FormalSum":
    out = FormalSum(CURVES)
    for face in surface_faces(term):
        if face.dropped:
            continue
        sign = (-1 if face.index % 2 else 1) * (1 if face.value == "0" else -1)
        out._add(face.term, sign * face.multiplicity)
    return out


def boundary(S: "FormalSum") -> "FormalSum":
    """Boundary of a homogeneous formal sum of curves or surfaces."""
    if S.grading == CURVES:
        op, target = boundary_curve, POINTS
    elif S.grading == SURFACES:
        op, target = boundary_surface, CURVES
    else:
        raise GradingMismatch("points have no boundary in this complex")
    out = FormalSum(target)
    for term, c in S.items():
        out = out + op(term) * c
    return out


# ---------------------------------------------------------------------------
# Reparametrization: descent and canonical form


def _has_root_of_unity(ctx: FieldContext, n: int) -> bool:
    N = ctx.conductor if ctx.conductor % 2 == 0 else 2 * ctx.conductor
    return N % n == 0


def _descend_fr(f: FactoredRational, n: int, zeta: FieldElement | None) -> FactoredRational:
    ctx = f.context
    remaining = dict(f.factors)
    factors = []
    e0 = remaining.pop(ctx.zero, 0)
    if e0 % n or f.degree % n:
        raise NotDescendable(f"{f} has order not divisible by {n} at 0 or oo")
    if e0:
        factors.append((ctx.zero, e0 // n))
    while remaining:
        r, e = next(iter(remaining.items()))
        if zeta is None:
            raise NotDescendable(f"the field has no primitive {n}-th root of unity")
        orbit = [r * zeta**j for j in range(n)]
        for s in orbit:
            if remaining.get(s) != e:
                raise NotDescendable(f"{f} is not invariant under x -> zeta_{n} x")
            del remaining[s]
        factors.append((r**n, e))
    return FactoredRational(f.unit, factors)


def descend_parametrization(term: CurveTerm, n: int) -> tuple[int, CurveTerm]:
    """Write ``term`` as ``n`` times a curve in the parameter w = x^n."""
    if n < 2:
        raise InvalidArgument("descent needs n >= 2")
    ctx = term.context
    zeta = ctx.root_of_unity(n) if _has_root_of_unity(ctx, n) else None
    return n, CurveTerm([_descend_fr(c, n, zeta) for c in term.coords])


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        while n % p == 0:
            if p not in out:
                out.append(p)
            n //= p
        p += 1
    if n > 1 and n not in out:
        out.append(n)
    return out


def _two_point_mobius(p: Point, q: Point, ctx: FieldContext) -> Mobius:
    """A map sending p to 0 and q to oo."""
    if q is INF:
        return Mobius.make(1, -p, 0, 1, ctx)
    if p is INF:
        return Mobius.make(0, 1, 1, -q, ctx)
    return Mobius.make(1, -p, 1, -q, ctx)


def _auto_descend(term: CurveTerm) -> tuple[int, CurveTerm]:
    """Factor out cyclic covers x -> x^n around pairs of support points."""
    ctx = term.context
    mult = 1
    progress = True
    while progress:
        progress = False
        pts = term.support()
        for p, q in itertools.permutations(pts, 2):
            g = 0
            for c in term.coords:
                g = gcd(g, c.order_at(p))
                g = gcd(g, c.order_at(q))
            if g < 2:
                continue
            nu = _two_point_mobius(p, q, ctx)
            moved = term.reparam(nu.inverse())
            for n in _prime_factors(g):
                try:
                    _, term = descend_parametrization(moved, n)
                except NotDescendable:
                    continue
                mult *= n
                progress = True
                break
            if progress:
                break
    return mult, term


def _point_label(term: CurveTerm, p: Point) -> tuple:
    lab = []
    for c in term.coords:
        o = c.order_at(p)
        lab.append((o, fr_eval(c, p).key() if o == 0 else ()))
    return tuple(lab)


class Canonical(NamedTuple):
    multiplicity: int
    term: CurveTerm
    exact: bool  # False when fewer than three support points were available


@lru_cache(maxsize=65536)
def canonical_data(term: CurveTerm) -> Canonical:
    mult, term = _auto_descend(term)
    pts = term.support()
    if len(pts) < 3:
        return Canonical(mult, term, False)
    ctx = term.context
    labels = {p: _point_label(term, p) for p in pts}

    def best(cands):
        m = min(labels[p] for p in cands)
        return [p for p in cands if labels[p] == m]

    chosen = None
    for p0 in best(pts):
        rest0 = [p for p in pts if p != p0]
        for p1 in best(rest0):
            rest1 = [p for p in rest0 if p != p1]
            for pinf in best(rest1):
                nu = Mobius.sending(p0, p1, pinf, ctx)
                cand = term.reparam(nu.inverse())
                if chosen is None or cand.key() < chosen.key():
                    chosen = cand
    return Canonical(mult, chosen, True)


def canonical_form(term: CurveTerm) -> CurveTerm:
    """Representative of the reparametrization class of ``term``.

    Cyclic multiple covers are first factored out; use :func:`canonical_data`
    to see the multiplicity that was removed.
    """
    return canonical_data(term).term


# ---------------------------------------------------------------------------
# Formal sums


class FormalSum:
    """Integer combination of terms of one grading; curves are kept canonical."""

    __slots__ = ("grading", "_terms", "audit")

    def __init__(self, grading: str, terms: Iterable[tuple[int, Term]] = (), audit=()):
        if grading not in (POINTS, CURVES, SURFACES):
            raise InvalidArgument(f"unknown grading {grading!r}")
        self.grading = grading
        self._terms: dict[Term, int] = {}
        self.audit = tuple(audit)
        for c, t in terms:
            self._add(t, c)

    @classmethod
    def of(cls, *pairs) -> "FormalSum":
        """``FormalSum.of((2, t1), (-1, t2))`` or ``FormalSum.of(t)``."""
        items = [(1, p) if not isinstance(p, tuple) else p for p in pairs]
        if not items:
            raise InvalidArgument("cannot infer the grading of an empty sum")
        return cls(_grading_of(items[0][1]), items)

    def _add(self, term: Term, c: int) -> None:
        if not c:
            return
        if _grading_of(term) != self.grading:
            raise GradingMismatch(f"cannot put a {_grading_of(term)} term into a sum of {self.grading}")
        if self.grading == CURVES:
            m, term, _ = canonical_data(term)
            c *= m
        new = self._terms.get(term, 0) + c
        if new:
            self._terms[term] = new
        else:
            self._terms.pop(term, None)

    def copy(self) -> "FormalSum":
        out = FormalSum(self.grading, audit=self.audit)
        out._terms = dict(self._terms)
        return out

    def items(self) -> list[tuple[Term, int]]:
        return sorted(self._terms.items(), key=lambda kv: kv[0].key())

    def terms(self) -> list[Term]:
        return [t for t, _ in self.items()]

    def coefficient(self, term: Term) -> int:
        if self.grading == CURVES:
            m, term, _ = canonical_data(term)
            return self._terms.get(term, 0) // m if m > 1 else self._terms.get(term, 0)
        return self._terms.get(term, 0)

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def __len__(self):
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[Term, int]]:
        return iter(self.items())

    def _check(self, other: "FormalSum"):
        if not isinstance(other, FormalSum):
            raise TypeError(f"expected a FormalSum, got {type(other).__name__}")
        if other.grading != self.grading and other._terms and self._terms:
            raise GradingMismatch(f"cannot combine {self.grading} with {other.grading}")

    def __add__(self, other: "FormalSum") -> "FormalSum":
        self._check(other)
        grading = self.grading if self._terms or not other._terms else other.grading
        out = FormalSum(grading)
        out._terms = dict(self._terms)
        for t, c in other._terms.items():
            new = out._terms.get(t, 0) + c
            if new:
                out._terms[t] = new
            else:
                del out._terms[t]
        return out

    def __neg__(self) -> "FormalSum":
        out = FormalSum(self.grading)
        out._terms = {t: -c for t, c in self._terms.items()}
        return out

    def __sub__(self, other: "FormalSum") -> "FormalSum":
        return self + (-other)

    def __mul__(self, m: int) -> "FormalSum":
        if not isinstance(m, int):
            return NotImplemented
        out = FormalSum(self.grading)
        if m:
            out._terms = {t: c * m for t, c in self._terms.items()}
        return out

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, FormalSum):
            return NotImplemented
        if not self._terms and not other._terms:
            return True
        return self.grading == other.grading and self._terms == other._terms

    def __hash__(self):
        return hash((self.grading, frozenset(self._terms.items())))

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for t, c in self.items():
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            body = str(t) if mag == 1 else f"{mag}*{t}"
            parts.append((sign, body))
        out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self):
        return f"FormalSum({self.grading}: {self})"


def sum_arith(op: str, S: FormalSum, T=None) -> FormalSum:
    if op == "add":
        return S + T
    if op == "sub":
        return S - T
    if op == "scale":
        return S * int(T)
    if op == "negate":
        return -S
    raise InvalidArgument(f"unknown operation {op!r}")


@dataclass(frozen=True)
class AuditEntry:
    coefficient: int
    term: CurveTerm
    kind: TermClass


def normalize_quotient(S: FormalSum) -> FormalSum:
    """Drop zero, degenerate and constant-left terms; the dropped ones go to ``audit``."""
    if S.grading != CURVES and S._terms:
        raise GradingMismatch("the quotient only applies to curve sums")
    kept, log = [], []
    for t, c in S.items():
        k = classify(t)
        if k is TermClass.GENERIC:
            kept.append((c, t))
        else:
            log.append(AuditEntry(c, t, k))
    out = FormalSum(CURVES, audit=log)
    for c, t in kept:
        out._terms[t] = c
    return out


class Closedness(NamedTuple):
    closed: bool
    witness: object = None
    overridden: bool = False

    def __bool__(self):
        return self.closed


def closedness_check(S: FormalSum, overrides: Iterable[FormalSum] = ()) -> Closedness:
    """Is ``S`` a cycle modulo constant-left point sums?

    Points (u, v) are grouped by u and each group must satisfy
    prod v^m = 1.  Sums listed in ``overrides`` are accepted as closed
    regardless, and the result says so.
    """
    for o in overrides:
        if o == S:
            return Closedness(True, None, True)
    pts = boundary(S) if S.grading == CURVES else FormalSum(POINTS)
    groups: dict[FieldElement, list[tuple[FieldElement, int]]] = {}
    for pt, m in pts.items():
        u, v = pt.coords
        groups.setdefault(u, []).append((v, m))
    for u, vs in groups.items():
        prod = u.context.one
        for v, m in vs:
            prod = prod * v**m
        if not prod.is_one():
            return Closedness(False, (u, prod))
    return Closedness(True)


# ---------------------------------------------------------------------------
# Text grammar and records


class _SumEvaluator:
    """Evaluates ``5*C(g) - Z(a, b) + 2*[1 - a/x, 1 - x, x]`` style expressions."""

    def __init__(self, ctx: FieldContext, names: dict | None = None):
        self.ctx = ctx
        self.names = names or {}
        self.elements = _ElementEvaluator(ctx, self.names)

    def element(self, node) -> FieldElement:
        return self.elements(node)

    def __call__(self, node):
        ctx = self.ctx
        if isinstance(node, ast.Expression):
            return self(node.body)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            name, args = node.func.id, node.args
            if node.keywords:
                raise ParseError("keyword arguments are not allowed", node.col_offset)
            if name == "C" and len(args) == 1:
                return FormalSum.of(totaro(self.element(args[0]), ctx))
            if name == "Z" and len(args) == 2:
                return FormalSum.of(z_term(self.element(args[0]), self.element(args[1]), ctx))
            if name == "M" and len(args) == 3:
                p, q, c = (self.element(a) for a in args)
                return FormalSum.of(monodromy(p, q, c, ctx))
            raise ParseError(f"unknown constructor {name}/{len(args)}", node.col_offset)
        if isinstance(node, (ast.List, ast.Tuple)):
            elts = node.elts
            if len(elts) == 3:
                coords = [eval_coordinate_node(e, ctx, "x", self.names) for e in elts]
                return FormalSum.of(CurveTerm(coords))
            if len(elts) == 2:
                try:
                    return FormalSum.of(PointTerm(self.element(elts[0]), self.element(elts[1])))
                except InvalidArgument as exc:
                    raise ParseError(str(exc), node.col_offset) from None
            raise ParseError("terms have two or three coordinates", node.col_offset)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = self(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, (ast.Add, ast.Sub)):
                left, right = self(node.left), self(node.right)
                return left + right if isinstance(node.op, ast.Add) else left - right
            if isinstance(node.op, ast.Mult):
                for a, b in ((node.left, node.right), (node.right, node.left)):
                    if _is_integer_literal(a):
                        return self(b) * _integer_literal(a)
                raise ParseError("terms can only be scaled by integer literals", node.col_offset)
        if isinstance(node, ast.Constant) and node.value == 0:
            return FormalSum(CURVES)
        raise ParseError("unsupported syntax in a formal sum", getattr(node, "col_offset", None))


def _is_integer_literal(node) -> bool:
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return _is_integer_literal(node.operand)
    return isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool)


def _integer_literal(node) -> int:
    if isinstance(node, ast.UnaryOp):
        return -_integer_literal(node.operand)
    return node.value


def parse_sum(text: str, ctx: FieldContext, names: dict | None = None) -> FormalSum:
    """Parse a formal sum of points or curves."""
    if not text.strip():
        raise ParseError("empty input", 0)
    return _SumEvaluator(ctx, names)(parse_python_expr(text))


def parse_term(text: str, ctx: FieldContext, names: dict | None = None) -> CurveTerm | PointTerm:
    """Parse a single bracketed term such as ``[1 - 2/x, 1 - x, x]``, without canonicalizing."""
    node = parse_python_expr(text).body
    if not isinstance(node, (ast.List, ast.Tuple)):
        raise ParseError("expected a bracketed term", getattr(node, "col_offset", 0))
    ev = _SumEvaluator(ctx, names)
    if len(node.elts) == 3:
        return CurveTerm([eval_coordinate_node(e, ctx, "x", names) for e in node.elts])
    if len(node.elts) == 2:
        return PointTerm(ev.element(node.elts[0]), ev.element(node.elts[1]))
    raise ParseError("terms have two or three coordinates", node.col_offset)


def _surface_coord_record(c: SurfaceCoordinate) -> dict:
    if isinstance(c, PureX):
        return {"type": "x", "f": serialize_fr(c.f)}
    if isinstance(c, PureZ):
        return {"type": "z", "mobius": [str(v) for v in (c.mu.a, c.mu.b, c.mu.c, c.mu.d)]}
    return {"type": "mixed", "P": serialize_fr(c.P), "Q": "oo" if c.Q is INF else serialize_fr(c.Q)}


def _surface_coord_from_record(rec: dict, ctx: FieldContext) -> SurfaceCoordinate:
    kind = rec.get("type")
    if kind == "x":
        return PureX(parse_coordinate(rec["f"], ctx))
    if kind == "z":
        return PureZ(Mobius.make(*(parse_element(v, ctx) for v in rec["mobius"]), ctx=ctx))
    if kind == "mixed":
        Q = INF if rec["Q"] == "oo" else parse_coordinate(rec["Q"], ctx)
        return Mixed(parse_coordinate(rec["P"], ctx), Q)
    raise ParseError(f"unknown surface coordinate type {kind!r}")


def term_to_record(term: Term) -> dict:
    ctx = term.context
    if isinstance(term, PointTerm):
        coords = [str(c) for c in term.coords]
        kind = "point"
    elif isinstance(term, CurveTerm):
        coords = [serialize_fr(c) for c in term.coords]
        kind = "curve"
    else:
        coords = [_surface_coord_record(c) for c in term.coords]
        kind = "surface"
    return {"kind": kind, "coords": coords, "field": {"conductor": ctx.conductor}}


def term_from_record(rec: dict) -> Term:
    try:
        ctx = field_create(int(rec["field"]["conductor"]))
        kind, coords = rec["kind"], rec["coords"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed term record: {exc}") from None
    if kind == "point":
        return PointTerm(*(parse_element(c, ctx) for c in coords))
    if kind == "curve":
        return CurveTerm([parse_coordinate(c, ctx) for c in coords])
    if kind == "surface":
        return SurfaceTerm([_surface_coord_from_record(c, ctx) for c in coords])
    raise ParseError(f"unknown term kind {kind!r}")


def sum_to_records(S: FormalSum) -> list[dict]:
    return [{"coeff": c, "term": term_to_record(t)} for t, c in S.items()]


def sum_from_records(records: list[dict], grading: str | None = None) -> FormalSum:
    pairs = [(int(r["coeff"]), term_from_record(r["term"])) for r in records]
    if not pairs:
        return FormalSum(grading or CURVES)
    return FormalSum(grading or _grading_of(pairs[0][1]), pairs)


def dumps_sum(S: FormalSum) -> str:
    return json.dumps(sum_to_records(S), sort_keys=True)


def loads_sum(text: str) -> FormalSum:
    return sum_from_records(json.loads(text))


# ---------------------------------------------------------------------------
# Recognizing named families


def _unparam(term: CurveTerm, i: int) -> CurveTerm | None:
    """Reparametrize so that coordinate ``i`` becomes x, if it has map degree one."""
    f = term.coords[i]
    if f.map_degree() != 1:
        return None
    return term.reparam(Mobius.from_factored(f).inverse())


@lru_cache(maxsize=16384)
def recognize(term: CurveTerm) -> tuple | None:
    """``("C", a)``, ``("Z", a, c)`` or ``("M", p, q, c)`` when the term is one of these."""
    ctx = term.context
    one = ctx.one
    t = _unparam(term, 2)
    if t is not None:
        f1, f2, _ = t.coords
        if f1.degree == 0 and f1.unit.is_one() and len(f1.factors) == 2:
            (r1, e1), (r2, e2) = f1.factors
            if {e1, e2} == {1, -1}:
                a, pole = (r1, r2) if e1 == 1 else (r2, r1)
                if pole.is_zero() and f2 == FactoredRational(-one, [(one, 1)]):
                    return ("C", a)
                if pole.is_one() and f2.is_constant():
                    return ("Z", a, f2.unit)
    t = _unparam(term, 1)
    if t is not None and t.coords[2].is_constant():
        f1 = t.coords[0]
        if f1.map_degree() == 1 and f1.degree == 0 and f1.unit.is_one():
            zero = next(r for r, e in f1.factors if e > 0)
            pole = next(r for r, e in f1.factors if e < 0)
            return ("M", zero, pole, t.coords[2].unit)
    return None


def describe(term: CurveTerm) -> str:
    """Short name such as ``C(2)``, ``Z(3, 5)`` or ``M(p, q, c)`` when one applies."""
    r = recognize(term)
    if r is None:
        return str(term)
    return f"{r[0]}({', '.join(str(v) for v in r[1:])})"


def describe_sum(S: FormalSum) -> str:
    if S.grading != CURVES or not S:
        return str(S)
    parts = []
    for t, c in sorted(S.items(), key=lambda kv: (describe(kv[0]), kv[0].key())):
        name = describe(t)
        sign = "-" if c < 0 else "+"
        body = name if abs(c) == 1 else f"{abs(c)}*{name}"
        parts.append((sign, body))
    out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out
