"""Factored rational functions of one variable and the surface coordinate shapes.

A :class:`FactoredRational` is ``unit * prod (x - r)^e`` with roots in the
field.  Nothing is ever expanded into dense polynomials, so divisors are read
off the factorization and no polynomial factoring over a number field is
needed.  Points of P^1 are field elements or the singleton :data:`INF`.
"""

from __future__ import annotations

import ast
from math import lcm
from dataclasses import dataclass
from typing import Union

from .errors import FieldDivisionError, InvalidArgument, ParseError, UnsupportedShape
from .numfield import FieldContext, FieldElement, coerce, parse_python_expr


class _Infinity:
    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "oo"

    def __reduce__(self):
        return (_Infinity, ())

    def key(self):
        return (1,)


INF = _Infinity()
Point = Union[FieldElement, _Infinity]


def point_key(p: Point) -> tuple:
    return (1,) if p is INF else (0, p.key())


def point_str(p: Point) -> str:
    return "oo" if p is INF else str(p)


class FactoredRational:
    """``unit * prod (x - root)^exp`` with a nonzero unit and distinct roots."""

    __slots__ = ("unit", "factors", "_hash", "_degree", "_key")

    def __init__(self, unit: FieldElement, factors=()):
        if unit.is_zero():
            raise InvalidArgument("unit of a factored rational must be nonzero")
        merged: dict[FieldElement, int] = {}
        for root, e in factors:
            if e:
                merged[root] = merged.get(root, 0) + e
        self.unit = unit
        self.factors = tuple(sorted(((r, e) for r, e in merged.items() if e), key=lambda t: t[0].key()))
        self._hash = None
        self._key = None
        self._degree = sum(e for _, e in self.factors)

    # -- constructors ----------------------------------------------------
    @classmethod
    def constant(cls, c: FieldElement) -> "FactoredRational":
        return cls(c)

    @classmethod
    def x(cls, ctx: FieldContext) -> "FactoredRational":
        return cls(ctx.one, [(ctx.zero, 1)])

    @classmethod
    def linear(cls, root: FieldElement, exp: int = 1) -> "FactoredRational":
        """(x - root)^exp"""
        return cls(root.context.one, [(root, exp)])

    @classmethod
    def mobius(cls, a, b, c, d, ctx: FieldContext | None = None) -> "FactoredRational":
        """(a x + b) / (c x + d) in factored form."""
        return Mobius.make(a, b, c, d, ctx).as_factored()

    # -- structure ---------------------------------------------------------
    @property
    def context(self) -> FieldContext:
        return self.unit.context

    @property
    def degree(self) -> int:
        """Total exponent: behaviour at infinity is x^degree."""
        return self._degree

    def is_constant(self) -> bool:
        return not self.factors

    def is_one(self) -> bool:
        return not self.factors and self.unit.is_one()

    def map_degree(self) -> int:
        """Degree as a map P^1 -> P^1 (number of zeros with multiplicity)."""
        zeros = sum(e for _, e in self.factors if e > 0)
        poles = -sum(e for _, e in self.factors if e < 0)
        return max(zeros, poles)

    def roots(self) -> list[FieldElement]:
        return [r for r, _ in self.factors]

    def support(self) -> list[Point]:
        pts: list[Point] = self.roots()
        if self._degree:
            pts.append(INF)
        return pts

    def order_at(self, p: Point) -> int:
        if p is INF:
            return -self._degree
        for r, e in self.factors:
            if r == p:
                return e
        return 0

    def key(self) -> tuple:
        if self._key is None:
            self._key = (self.unit.key(), tuple((r.key(), e) for r, e in self.factors))
        return self._key

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.unit, self.factors))
        return self._hash

    def __eq__(self, other):
        if not isinstance(other, FactoredRational):
            return NotImplemented
        return self.unit == other.unit and self.factors == other.factors

    # -- arithmetic ----------------------------------------------------------
    def __mul__(self, other):
        if isinstance(other, FactoredRational):
            return FactoredRational(self.unit * other.unit, self.factors + other.factors)
        if isinstance(other, (FieldElement, int)):
            return FactoredRational(self.unit * other, self.factors)
        return NotImplemented

    __rmul__ = __mul__

    def inverse(self) -> "FactoredRational":
        return FactoredRational(self.unit.inv(), [(r, -e) for r, e in self.factors])

    def __truediv__(self, other):
        if isinstance(other, FactoredRational):
            return self * other.inverse()
        if isinstance(other, (FieldElement, int)):
            return FactoredRational(self.unit / other, self.factors)
        return NotImplemented

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, e: int):
        if e == 0:
            return FactoredRational(self.context.one)
        return FactoredRational(self.unit**e, [(r, k * e) for r, k in self.factors])

    # -- evaluation ------------------------------------------------------------
    def __call__(self, p: Point) -> Point:
        return fr_eval(self, p)

    def leading_value(self, p: Point) -> FieldElement:
        """Value of f / (local parameter)^ord at p; the local parameter at oo is 1/x."""
        if p is INF:
            return self.unit
        val = self.unit
        for r, e in self.factors:
            if r != p:
                val = val * (p - r) ** e
        return val

    def numeric(self, x: complex, k: int | None = None) -> complex:
        val = complex(self.unit.embed(k))
        for r, e in self.factors:
            val *= (x - complex(r.embed(k))) ** e
        return val

    def __str__(self) -> str:
        return serialize_fr(self)

    def __repr__(self) -> str:
        return f"FR({self})"


def fr_mul(f: FactoredRational, g: FactoredRational) -> FactoredRational:
    return f * g


def fr_eval(f: FactoredRational, p: Point) -> Point:
    """Exact value in P^1; exponents are compared before anything is multiplied."""
    if p is INF:
        if f.degree > 0:
            return INF
        if f.degree < 0:
            return f.context.zero
        return f.unit
    o = f.order_at(p)
    if o > 0:
        return f.context.zero
    if o < 0:
        return INF
    return f.leading_value(p)


def fr_divisor(f: FactoredRational) -> list[tuple[Point, int]]:
    out: list[tuple[Point, int]] = list(f.factors)
    if f.degree:
        out.append((INF, -f.degree))
    return out


def serialize_fr(f: FactoredRational, var: str = "x") -> str:
    if f.is_constant():
        return str(f.unit)
    parts = []
    if not f.unit.is_one():
        u = str(f.unit)
        parts.append(u if _is_atomic(u) else f"({u})")
    for r, e in f.factors:
        base = _linear_str(var, r)
        parts.append(base if e == 1 else f"{base}^{e}")
    return " * ".join(parts)


def _is_atomic(s: str) -> bool:
    body = s[1:] if s.startswith("-") else s
    return not any(ch in body for ch in "+- ")


def _linear_str(var: str, r: FieldElement) -> str:
    if r.is_zero():
        return var
    s = str(r)
    if not _is_atomic(s):
        return f"({var} - ({s}))"
    if s.startswith("-"):
        return f"({var} + {s[1:]})"
    return f"({var} - {s})"


# ---------------------------------------------------------------------------
# Moebius transformations


@dataclass(frozen=True)
class Mobius:
    """x -> (a x + b) / (c x + d), scaled so the first nonzero entry is 1."""

    a: FieldElement
    b: FieldElement
    c: FieldElement
    d: FieldElement

    @classmethod
    def make(cls, a, b, c, d, ctx: FieldContext | None = None) -> "Mobius":
        if ctx is None:
            for v in (a, b, c, d):
                if isinstance(v, FieldElement):
                    ctx = v.context
                    break
            else:
                raise InvalidArgument("need a field context for an all-integer Moebius map")
        a, b, c, d = (coerce(ctx, v) for v in (a, b, c, d))
        if (a * d - b * c).is_zero():
            raise InvalidArgument("Moebius map has zero determinant")
        lead = next(v for v in (a, b, c, d) if not v.is_zero())
        if not lead.is_one():
            inv = lead.inv()
            a, b, c, d = a * inv, b * inv, c * inv, d * inv
        return cls(a, b, c, d)

    @classmethod
    def identity(cls, ctx: FieldContext) -> "Mobius":
        return cls.make(1, 0, 0, 1, ctx)

    @classmethod
    def sending(cls, p0: Point, p1: Point, pinf: Point, ctx: FieldContext) -> "Mobius":
        """The unique map with p0 -> 0, p1 -> 1, pinf -> oo."""
        if pinf is INF:
            return cls.make(1, -p0, 0, p1 - p0, ctx)
        if p0 is INF:
            return cls.make(0, p1 - pinf, 1, -pinf, ctx)
        if p1 is INF:
            return cls.make(1, -p0, 1, -pinf, ctx)
        return cls.make(p1 - pinf, -p0 * (p1 - pinf), p1 - p0, -pinf * (p1 - p0), ctx)

    @property
    def context(self) -> FieldContext:
        return self.a.context

    def is_identity(self) -> bool:
        return self.a.is_one() and self.b.is_zero() and self.c.is_zero() and self.d.is_one()

    def __call__(self, p: Point) -> Point:
        if p is INF:
            return INF if self.c.is_zero() else self.a / self.c
        den = self.c * p + self.d
        num = self.a * p + self.b
        if den.is_zero():
            return INF
        return num / den

    def inverse(self) -> "Mobius":
        return Mobius.make(self.d, -self.b, -self.c, self.a)

    def compose(self, inner: "Mobius") -> "Mobius":
        """self o inner"""
        a, b, c, d = self.a, self.b, self.c, self.d
        p, q, r, s = inner.a, inner.b, inner.c, inner.d
        return Mobius.make(a * p + b * r, a * q + b * s, c * p + d * r, c * q + d * s)

    def zero(self) -> Point:
        return self.inverse()(self.context.zero)

    def pole(self) -> Point:
        return self.inverse()(INF)

    def as_factored(self) -> FactoredRational:
        a, b, c, d = self.a, self.b, self.c, self.d
        if c.is_zero():
            if a.is_zero():
                return FactoredRational(b / d)
            return FactoredRational(a / d, [(-b / a, 1)])
        if a.is_zero():
            return FactoredRational(b / c, [(-d / c, -1)])
        return FactoredRational(a / c, [(-b / a, 1), (-d / c, -1)])

    @classmethod
    def from_factored(cls, f: FactoredRational) -> "Mobius":
        """Inverse of :meth:`as_factored` for map-degree-one functions."""
        ctx = f.context
        if f.map_degree() != 1:
            raise UnsupportedShape(f"{f} is not fractional linear")
        u = f.unit
        zeros = [r for r, e in f.factors if e > 0]
        poles = [r for r, e in f.factors if e < 0]
        if zeros and poles:
            return cls.make(u, -u * zeros[0], 1, -poles[0], ctx)
        if zeros:
            return cls.make(u, -u * zeros[0], 0, 1, ctx)
        return cls.make(0, u, 1, -poles[0], ctx)

    def __str__(self) -> str:
        return f"({self.a}*z + {self.b})/({self.c}*z + {self.d})"


def fr_reparam(f: FactoredRational, mu: Mobius) -> FactoredRational:
    """f o mu, kept in factored form."""
    alpha, beta, gamma, delta = mu.a, mu.b, mu.c, mu.d
    unit = f.unit
    factors: list[tuple[FieldElement, int]] = []
    for r, e in f.factors:
        lead = alpha - r * gamma
        const = beta - r * delta
        if lead.is_zero():
            unit = unit * const**e
        else:
            unit = unit * lead**e
            factors.append((-const / lead, e))
    deg = f.degree
    if deg:
        if gamma.is_zero():
            unit = unit * delta ** (-deg)
        else:
            unit = unit * gamma ** (-deg)
            factors.append((-delta / gamma, -deg))
    return FactoredRational(unit, factors)


def mobius_apply(mu: Mobius, v):
    """Apply ``mu`` to a point or to a factored rational branch.

    Only the identity may receive a nonconstant branch.
    """
    if isinstance(v, FactoredRational):
        if v.is_constant():
            img = mu(v.unit)
            if img is INF or img.is_zero():
                return img
            return FactoredRational(img)
        if mu.is_identity():
            return v
        raise UnsupportedShape("a non-identity Moebius map cannot receive a nonconstant branch")
    return mu(v)


def compose_mobius_branch(mu: Mobius, v: FactoredRational):
    """mu o v for branches of map degree at most one (constants, Moebius)."""
    if v.is_constant() or mu.is_identity():
        return mobius_apply(mu, v)
    if v.map_degree() == 1:
        return mu.compose(Mobius.from_factored(v)).as_factored()
    raise UnsupportedShape(f"cannot factor {mu} applied to {v}")


# ---------------------------------------------------------------------------
# Surface coordinates on P^1_x x P^1_z


@dataclass(frozen=True)
class PureX:
    f: FactoredRational

    def __str__(self):
        return serialize_fr(self.f, "x")


@dataclass(frozen=True)
class PureZ:
    mu: Mobius

    def __str__(self):
        return serialize_fr(self.mu.as_factored(), "z")


@dataclass(frozen=True)
class Mixed:
    """(z - P(x)) / (z - Q(x)); ``Q`` may be INF, meaning plain z - P(x)."""

    P: FactoredRational
    Q: Union[FactoredRational, _Infinity]

    def __post_init__(self):
        if self.Q is not INF and self.P == self.Q:
            raise InvalidArgument("mixed coordinate needs P != Q")

    def __str__(self):
        p = serialize_fr(self.P, "x")
        if self.Q is INF:
            return f"z - ({p})"
        return f"(z - ({p}))/(z - ({serialize_fr(self.Q, 'x')}))"


SurfaceCoordinate = Union[PureX, PureZ, Mixed]


def as_fr(ctx: FieldContext, v) -> FactoredRational:
    if isinstance(v, FactoredRational):
        return v
    return FactoredRational(coerce(ctx, v))


# ---------------------------------------------------------------------------
# Text grammar


class _Dense:
    """Dense numerator/denominator used only while parsing sums."""

    __slots__ = ("num", "den")

    def __init__(self, num, den):
        self.num, self.den = num, den


def _dense_from_fr(f: FactoredRational):
    if any(e < 0 for _, e in f.factors) and any(e > 0 for _, e in f.factors):
        pass
    num = [f.unit]
    den = [f.context.one]
    for r, e in f.factors:
        lin = [-r, f.context.one]
        for _ in range(abs(e)):
            if e > 0:
                num = _dpoly_mul(num, lin)
            else:
                den = _dpoly_mul(den, lin)
    return num, den


def _dpoly_mul(a, b):
    out = [a[0].context.zero] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = out[i + j] + x * y
    return out


def _dpoly_add(a, b):
    n = max(len(a), len(b))
    zero = a[0].context.zero
    out = [(a[i] if i < len(a) else zero) + (b[i] if i < len(b) else zero) for i in range(n)]
    while len(out) > 1 and out[-1].is_zero():
        out.pop()
    return out


def _factor_dense(poly) -> FactoredRational:
    while len(poly) > 1 and poly[-1].is_zero():
        poly = poly[:-1]
    if len(poly) == 1:
        if poly[0].is_zero():
            raise FieldDivisionError("expression is identically zero")
        return FactoredRational(poly[0])
    lead = poly[-1]
    monic = [c / lead for c in poly]
    ctx = lead.context
    # strip roots at zero
    k = 0
    while monic[k].is_zero():
        k += 1
    rest = monic[k:]
    factors = [(ctx.zero, k)] if k else []
    if len(rest) == 1:
        return FactoredRational(lead, factors)
    candidates = _root_candidates(rest)
    while len(rest) > 2:
        root = next((c for c in candidates if _horner(rest, c).is_zero()), None)
        if root is None:
            raise ParseError("could not split a polynomial of degree >= 2 over the field; write it as a product")
        rest = _deflate(rest, root)
        factors.append((root, 1))
    factors.append((-rest[0], 1))
    return FactoredRational(lead, factors)


def _horner(poly, r):
    acc = poly[-1]
    for c in reversed(poly[:-1]):
        acc = acc * r + c
    return acc


def _deflate(poly, r):
    """Divide a monic polynomial by (x - r)."""
    out = [poly[-1]]
    for c in reversed(poly[1:-1]):
        out.append(c + out[-1] * r)
    return list(reversed(out))


def _divisors(n: int, cap: int = 2000) -> list[int]:
    n = abs(n)
    out = [d for d in range(1, min(n, cap) + 1) if n % d == 0]
    return out


def _root_candidates(monic) -> list:
    """Candidate roots q * zeta, q rational and zeta a root of unity in the field.

    Only polynomials with rational coefficients get candidates; this covers the
    binomials 1 - x^n and 1 - (a/x)^n that appear in practice.  The list is
    computed once per polynomial, so deflated quotients with cyclotomic
    coefficients still split.
    """
    if not all(c.is_rational() for c in monic):
        return []
    fr = [c.to_fraction() for c in monic]
    L = 1
    for q in fr:
        L = lcm(L, q.denominator)
    a0, an = int(fr[0] * L), int(fr[-1] * L)
    ctx = monic[0].context
    n = ctx.conductor if ctx.conductor % 2 == 0 else 2 * ctx.conductor
    roots_of_unity = [ctx.root_of_unity(n, j) for j in range(n)]
    return [zeta * p / q for p in _divisors(a0) for q in _divisors(an) for zeta in roots_of_unity]


def _to_fr(v, ctx):
    if isinstance(v, FactoredRational):
        return v
    if isinstance(v, FieldElement):
        return FactoredRational(v)
    num = _factor_dense(v.num)
    den = _factor_dense(v.den)
    return num / den


def _to_dense(v, ctx):
    if isinstance(v, _Dense):
        return v
    if isinstance(v, FieldElement):
        return _Dense([v], [ctx.one])
    n, d = _dense_from_fr(v)
    return _Dense(n, d)


class _CoordEvaluator:
    def __init__(self, ctx: FieldContext, var: str, names: dict | None = None):
        self.ctx = ctx
        self.var = var
        self.names = {"g": ctx.gen()}
        if names:
            self.names.update(names)

    def __call__(self, node):
        ctx = self.ctx
        if isinstance(node, ast.Expression):
            return self(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
            return coerce(ctx, node.value)
        if isinstance(node, ast.Name):
            if node.id == self.var:
                return FactoredRational.x(ctx)
            if node.id in self.names:
                return self.names[node.id]
            raise ParseError(f"unknown symbol {node.id!r}", node.col_offset)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = self(node.operand)
            if isinstance(node.op, ast.UAdd):
                return v
            if isinstance(v, _Dense):
                return _Dense([-c for c in v.num], v.den)
            return -v if isinstance(v, FieldElement) else v * -1
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                from .numfield import _int_exponent

                base = self(node.left)
                e = _int_exponent(node.right)
                if isinstance(base, FieldElement):
                    return base**e
                return _to_fr(base, ctx) ** e
            left, right = self(node.left), self(node.right)
            if isinstance(node.op, (ast.Add, ast.Sub)):
                if isinstance(left, FieldElement) and isinstance(right, FieldElement):
                    return left + right if isinstance(node.op, ast.Add) else left - right
                a, b = _to_dense(left, ctx), _to_dense(right, ctx)
                sign = 1 if isinstance(node.op, ast.Add) else -1
                num = _dpoly_add(_dpoly_mul(a.num, b.den), [c * sign for c in _dpoly_mul(b.num, a.den)])
                return _Dense(num, _dpoly_mul(a.den, b.den))
            if isinstance(node.op, ast.Mult):
                if isinstance(left, FieldElement) and isinstance(right, FieldElement):
                    return left * right
                return _to_fr(left, ctx) * _to_fr(right, ctx)
            if isinstance(node.op, ast.Div):
                if isinstance(right, FieldElement) and right.is_zero():
                    raise ParseError("division by zero", node.col_offset)
                if isinstance(left, FieldElement) and isinstance(right, FieldElement):
                    return left / right
                return _to_fr(left, ctx) / _to_fr(right, ctx)
        raise ParseError("unsupported syntax", getattr(node, "col_offset", None))


def parse_coordinate(text: str, ctx: FieldContext, var: str = "x", names: dict | None = None) -> FactoredRational:
    """Parse a coordinate such as ``1 - a/x`` or ``2 * (x - 1)^-1 * x`` into factored form."""
    value = _CoordEvaluator(ctx, var, names)(parse_python_expr(text))
    return _to_fr(value, ctx)


def eval_coordinate_node(node, ctx: FieldContext, var: str = "x", names: dict | None = None) -> FactoredRational:
    return _to_fr(_CoordEvaluator(ctx, var, names)(node), ctx)
