"""Exact arithmetic in cyclotomic fields Q(zeta_n).

Elements are stored as an integer numerator vector over the power basis
1, g, ..., g^(d-1) (``g`` a fixed primitive n-th root of unity) together
with one positive common denominator.  Everything is reduced modulo the
n-th cyclotomic polynomial, so structural equality is field equality.
"""

from __future__ import annotations

import ast
import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Union

from .errors import (
    ContextMismatch,
    FieldDivisionError,
    InvalidArgument,
    InvalidEmbedding,
    ParseError,
)

GENERATOR = "g"


def _poly_mul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _poly_divexact(num, den):
    """Exact division of integer polynomials, ``den`` monic."""
    num = list(num)
    out = [0] * (len(num) - len(den) + 1)
    for k in range(len(out) - 1, -1, -1):
        c = num[k + len(den) - 1]
        out[k] = c
        if c:
            for j, d in enumerate(den):
                num[k + j] -= c * d
    if any(num[: len(den) - 1]):
        raise ArithmeticError("inexact polynomial division")
    return out


@lru_cache(maxsize=None)
def cyclotomic_polynomial(n: int) -> tuple[int, ...]:
    """Coefficients of Phi_n, lowest degree first."""
    if n < 1:
        raise InvalidArgument(f"conductor must be positive, got {n}")
    poly = [-1] + [0] * (n - 1) + [1]
    for d in range(1, n):
        if n % d == 0:
            poly = _poly_divexact(poly, cyclotomic_polynomial(d))
    return tuple(poly)


@dataclass(frozen=True)
class FieldContext:
    conductor: int
    degree: int
    modulus: tuple[int, ...]
    embedding_index: int = field(default=1, compare=False)
    _powers: tuple = field(default=(), compare=False, repr=False)

    def __str__(self) -> str:
        return "Q" if self.conductor <= 2 else f"Q(zeta_{self.conductor})"

    def coprime_indices(self) -> list[int]:
        n = self.conductor
        return [k for k in range(1, max(n, 2)) if math.gcd(k, n) == 1] or [1]

    # convenience constructors -------------------------------------------
    def __call__(self, value) -> "FieldElement":
        return coerce(self, value)

    @property
    def zero(self) -> "FieldElement":
        return FieldElement(self, (0,) * self.degree, 1)

    @property
    def one(self) -> "FieldElement":
        return FieldElement(self, (1,) + (0,) * (self.degree - 1), 1)

    def gen(self) -> "FieldElement":
        """The generator ``g`` = exp(2 pi i / n) under the default embedding."""
        if self.degree == 1:
            # zeta_1 = 1, zeta_2 = -1
            return self.one if self.conductor == 1 else -self.one
        return FieldElement(self, (0, 1) + (0,) * (self.degree - 2), 1)

    def root_of_unity(self, order: int, power: int = 1) -> "FieldElement":
        """The element exp(2 pi i * power / order), which must lie in the field."""
        n = self.conductor
        full = n if n % 2 == 0 else 2 * n
        if full % order:
            raise InvalidArgument(f"{self} does not contain a primitive {order}-th root of unity")
        if n % 2 == 1:
            # -g^((n+1)/2) is a primitive 2n-th root of unity with the right argument
            base = -(self.gen() ** ((n + 1) // 2))
        else:
            base = self.gen()
        return base ** ((full // order) * power % full)


@lru_cache(maxsize=None)
def field_create(conductor: int, embedding_index: int = 1) -> FieldContext:
    """Build (and cache) the context for Q(zeta_conductor)."""
    if not isinstance(conductor, int) or conductor < 1:
        raise InvalidArgument(f"conductor must be a positive integer, got {conductor!r}")
    if math.gcd(embedding_index, conductor) != 1:
        raise InvalidEmbedding(f"embedding index {embedding_index} not coprime to {conductor}")
    mod = cyclotomic_polynomial(conductor)
    deg = len(mod) - 1
    # rows: g^k reduced for k < 2*deg - 1
    powers = []
    for k in range(max(2 * deg - 1, 1)):
        if k < deg:
            row = [0] * deg
            row[k] = 1
        else:
            prev = powers[k - 1]
            row = [0] + list(prev[:-1])
            top = prev[-1]
            if top:
                for j in range(deg):
                    row[j] -= top * mod[j]
        powers.append(tuple(row))
    return FieldContext(conductor, deg, mod, embedding_index, tuple(powers))


Scalar = Union[int, Fraction]


def _normalize(nums, den):
    if den < 0:
        nums = [-x for x in nums]
        den = -den
    g = den
    for x in nums:
        if x:
            g = math.gcd(g, x)
            if g == 1:
                break
    if not any(nums):
        return tuple(0 for _ in nums), 1
    if g != 1:
        nums = [x // g for x in nums]
        den //= g
    return tuple(nums), den


class FieldElement:
    __slots__ = ("context", "num", "den", "_hash", "_key")

    def __init__(self, context: FieldContext, num, den: int = 1):
        if len(num) != context.degree:
            raise InvalidArgument("coefficient vector has wrong length")
        if den == 0:
            raise FieldDivisionError("zero denominator")
        self.context = context
        self.num, self.den = _normalize(list(num), den)
        self._hash = None
        self._key = None

    # -- structure -----------------------------------------------------
    @property
    def coeffs(self) -> list[Fraction]:
        return [Fraction(x, self.den) for x in self.num]

    def key(self) -> tuple:
        """Total-order key: coefficients from the top power down."""
        if self._key is None:
            self._key = tuple(Fraction(x, self.den) for x in reversed(self.num))
        return self._key

    def is_zero(self) -> bool:
        return not any(self.num)

    def is_one(self) -> bool:
        return self.den == 1 and self.num[0] == 1 and not any(self.num[1:])

    def is_rational(self) -> bool:
        return not any(self.num[1:])

    def to_fraction(self) -> Fraction:
        if not self.is_rational():
            raise InvalidArgument(f"{self} is not rational")
        return Fraction(self.num[0], self.den)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.context.conductor, self.num, self.den))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return (
                self.context.conductor == other.context.conductor
                and self.den == other.den
                and self.num == other.num
            )
        if isinstance(other, (int, Fraction)):
            return self.is_rational() and Fraction(self.num[0], self.den) == other
        return NotImplemented

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __bool__(self):
        return not self.is_zero()

    # -- arithmetic ----------------------------------------------------
    def _other(self, other) -> "FieldElement":
        if isinstance(other, FieldElement):
            if other.context.conductor != self.context.conductor:
                raise ContextMismatch(f"{self.context} vs {other.context}")
            return other
        if isinstance(other, (int, Fraction)):
            return coerce(self.context, other)
        raise TypeError(f"cannot combine FieldElement with {type(other).__name__}")

    def __add__(self, other):
        try:
            o = self._other(other)
        except TypeError:
            return NotImplemented
        d = self.den * o.den
        return FieldElement(self.context, [a * o.den + b * self.den for a, b in zip(self.num, o.num)], d)

    __radd__ = __add__

    def __neg__(self):
        return FieldElement(self.context, [-a for a in self.num], self.den)

    def __sub__(self, other):
        try:
            o = self._other(other)
        except TypeError:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, int):
            return FieldElement(self.context, [a * other for a in self.num], self.den)
        try:
            o = self._other(other)
        except TypeError:
            return NotImplemented
        ctx = self.context
        prod = _poly_mul(self.num, o.num)
        out = [0] * ctx.degree
        for k, c in enumerate(prod):
            if c:
                row = ctx._powers[k]
                for j in range(ctx.degree):
                    out[j] += c * row[j]
        return FieldElement(ctx, out, self.den * o.den)

    __rmul__ = __mul__

    def inv(self) -> "FieldElement":
        return _inverse(self)

    def __truediv__(self, other):
        try:
            o = self._other(other)
        except TypeError:
            return NotImplemented
        return self * o.inv()

    def __rtruediv__(self, other):
        return self._other(other) * self.inv()

    def __pow__(self, e: int):
        if not isinstance(e, int):
            return NotImplemented
        if e < 0:
            return self.inv() ** (-e)
        result = self.context.one
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    # -- numerics ------------------------------------------------------
    def embed(self, k: int | None = None) -> complex:
        """Image under g -> exp(2 pi i k / n)."""
        return embed_complex(self, k)

    def __complex__(self):
        return self.embed()

    def __str__(self) -> str:
        return serialize_element(self)

    def __repr__(self) -> str:
        return f"FieldElement({self}, n={self.context.conductor})"


def coerce(ctx: FieldContext, value) -> FieldElement:
    if isinstance(value, FieldElement):
        if value.context.conductor != ctx.conductor:
            raise ContextMismatch(f"{value.context} vs {ctx}")
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not field elements")
    if isinstance(value, int):
        return FieldElement(ctx, (value,) + (0,) * (ctx.degree - 1), 1)
    if isinstance(value, Fraction):
        return FieldElement(ctx, (value.numerator,) + (0,) * (ctx.degree - 1), value.denominator)
    if isinstance(value, str):
        return parse_element(value, ctx)
    raise TypeError(f"cannot coerce {value!r} into {ctx}")


def _fpoly_trim(p):
    while p and p[-1] == 0:
        p.pop()
    return p


def _fpoly_divmod(a, b):
    a = list(a)
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    lead = b[-1]
    while len(a) >= len(b) and a:
        c = a[-1] / lead
        shift = len(a) - len(b)
        q[shift] = c
        for j, bj in enumerate(b):
            a[shift + j] -= c * bj
        _fpoly_trim(a)
    return q, a


def _fpoly_sub(a, b):
    n = max(len(a), len(b))
    out = [(a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0) for i in range(n)]
    return _fpoly_trim(out)


def _fpoly_mul(a, b):
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


@lru_cache(maxsize=65536)
def _inverse(a: FieldElement) -> FieldElement:
    if a.is_zero():
        raise FieldDivisionError("inverse of zero")
    ctx = a.context
    # extended Euclid: find s with s*a = 1 mod Phi_n
    r0 = [Fraction(x) for x in ctx.modulus]
    r1 = _fpoly_trim([Fraction(x, a.den) for x in a.num])
    s0, s1 = [], [Fraction(1)]
    while len(r1) > 1:
        q, r = _fpoly_divmod(r0, r1)
        r0, r1 = r1, r
        s0, s1 = s1, _fpoly_sub(s0, _fpoly_mul(q, s1))
    c = r1[0]
    coeffs = [x / c for x in s1] + [Fraction(0)] * ctx.degree
    coeffs = coeffs[: ctx.degree]
    den = 1
    for x in coeffs:
        den = den * x.denominator // math.gcd(den, x.denominator)
    return FieldElement(ctx, [int(x * den) for x in coeffs], den)


def element_arith(op: str, a: FieldElement, b: FieldElement | None = None):
    """Dispatch form of the field operations (used by the CLI and tests)."""
    if op in ("add", "sub", "mul", "div", "eq") and b is None:
        raise InvalidArgument(f"{op} needs two operands")
    if b is not None and a.context.conductor != b.context.conductor:
        raise ContextMismatch(f"{a.context} vs {b.context}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "neg":
        return -a
    if op == "inv":
        return a.inv()
    if op == "eq":
        return a == b
    if op == "is_zero":
        return a.is_zero()
    raise InvalidArgument(f"unknown operation {op!r}")


def embed_complex(a: FieldElement, k: int | None = None) -> complex:
    ctx = a.context
    n = ctx.conductor
    if k is None:
        k = ctx.embedding_index
    if math.gcd(k, n) != 1:
        raise InvalidEmbedding(f"embedding index {k} is not coprime to {n}")
    if ctx.degree == 1:
        return complex(Fraction(a.num[0], a.den))
    re = []
    im = []
    for j, c in enumerate(a.num):
        if c:
            w = cmath.exp(2j * math.pi * ((k * j) % n) / n)
            re.append(c * w.real)
            im.append(c * w.imag)
    return complex(math.fsum(re) / a.den, math.fsum(im) / a.den)


def multiplicative_order(a: FieldElement) -> int | None:
    """Order of ``a`` in the multiplicative group if it is a root of unity, else None."""
    if a.is_zero():
        return None
    n = a.context.conductor
    full = n if n % 2 == 0 else 2 * n
    for m in sorted(d for d in range(1, full + 1) if full % d == 0):
        if (a**m).is_one():
            return m
    return None


# -- text form -------------------------------------------------------------


def serialize_element(a: FieldElement, symbol: str = GENERATOR) -> str:
    if a.is_zero():
        return "0"
    parts = []
    for j, c in enumerate(a.num):
        if not c:
            continue
        q = Fraction(c, a.den)
        mag = abs(q)
        if j == 0:
            body = str(mag)
        else:
            mono = symbol if j == 1 else f"{symbol}^{j}"
            body = mono if mag == 1 else f"{mag}*{mono}"
        sign = "-" if q < 0 else "+"
        parts.append((sign, body))
    first_sign, first = parts[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


class _ElementEvaluator:
    def __init__(self, ctx: FieldContext, names: dict | None = None):
        self.ctx = ctx
        self.names = {GENERATOR: ctx.gen()}
        if names:
            self.names.update(names)

    def __call__(self, node):
        ctx = self.ctx
        if isinstance(node, ast.Expression):
            return self(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
            return coerce(ctx, node.value)
        if isinstance(node, ast.Name):
            if node.id in self.names:
                return self.names[node.id]
            raise ParseError(f"unknown symbol {node.id!r}", node.col_offset)
        if isinstance(node, ast.UnaryOp):
            v = self(node.operand)
            if isinstance(node.op, ast.USub):
                return -v
            if isinstance(node.op, ast.UAdd):
                return v
        if isinstance(node, ast.BinOp):
            left = self(node.left)
            if isinstance(node.op, ast.Pow):
                exp = _int_exponent(node.right)
                return left**exp
            right = self(node.right)
            if isinstance(node.op, ast.Add):
                return left + right
            if isinstance(node.op, ast.Sub):
                return left - right
            if isinstance(node.op, ast.Mult):
                return left * right
            if isinstance(node.op, ast.Div):
                if right.is_zero():
                    raise ParseError("division by zero", node.col_offset)
                return left / right
        raise ParseError(f"unsupported syntax {ast.dump(node)[:40]}", getattr(node, "col_offset", None))


def _int_exponent(node) -> int:
    if isinstance(node, ast.Constant) and isinstance(node.value, int):
        return node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_int_exponent(node.operand)
    raise ParseError("exponents must be integer literals", getattr(node, "col_offset", None))


def parse_python_expr(text: str) -> ast.Expression:
    try:
        return ast.parse(text.replace("^", "**").strip(), mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"cannot parse {text!r}: {exc.msg}", exc.offset) from None


def parse_element(text: str, ctx: FieldContext) -> FieldElement:
    """Parse ``1/2 - 3*g^2 + g^3`` style input exactly."""
    return _ElementEvaluator(ctx)(parse_python_expr(text))
