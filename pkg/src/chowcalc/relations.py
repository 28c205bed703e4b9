"""Relations between curve cycles, each backed by replayable bounding data.

A :class:`VerifiedIdentity` claims that a formal sum of curves vanishes in
the quotient of the cycle group by boundaries of surfaces and by terms with
a constant left coordinate (plus zero and degenerate terms).  Primitive
identities carry explicit surface chains; composite ones carry a list of
earlier identities with integer weights.  :func:`verify` replays either kind
exactly.
"""

from __future__ import annotations

import enum
import json
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .cycles import (
    CURVES,
    SURFACES,
    CurveTerm,
    FormalSum,
    SurfaceTerm,
    TermClass,
    admissible_curve,
    boundary,
    classify,
    monodromy,
    normalize_quotient,
    recognize,
    sum_to_records,
    totaro,
    z_term,
)
from .errors import InadmissibleError, InvalidArgument, InvalidParameter, VerificationError
from .numfield import FieldContext, FieldElement, coerce, field_create, multiplicative_order, parse_element, serialize_element
from .ratfunc import INF, FactoredRational, Mixed, Mobius, PureX, PureZ, fr_divisor, fr_eval, parse_coordinate, serialize_fr


class Status(str, enum.Enum):
    UNVERIFIED = "unverified"
    VERIFIED = "verified"
    FAILED = "failed"


@dataclass(eq=False)
class VerifiedIdentity:
    """``claim`` = 0 modulo boundaries, justified by ``chains`` and ``derivation``."""

    name: str
    params: dict
    claim: FormalSum
    chains: FormalSum = field(default_factory=lambda: FormalSum(SURFACES))
    derivation: tuple = ()
    status: Status = Status.UNVERIFIED
    witness: object = None

    @property
    def context(self) -> FieldContext:
        for t in self.claim.terms():
            return t.context
        for ref, _ in self.derivation:
            return ref.context
        for t in self.chains.terms():
            return t.context
        raise InvalidArgument("identity has no terms")

    def key(self) -> str:
        rec = {
            "name": self.name,
            "params": {k: str(v) for k, v in sorted(self.params.items())},
            "claim": sum_to_records(self.claim),
            "chains": sum_to_records(self.chains),
            "derivation": [[ref.key(), w] for ref, w in self.derivation],
        }
        return json.dumps(rec, sort_keys=True)

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "params": {k: str(v) for k, v in sorted(self.params.items())},
            "claim": sum_to_records(self.claim),
            "chains": sum_to_records(self.chains),
            "derivation": [{"ref": ref.name, "params": {k: str(v) for k, v in ref.params.items()}, "weight": w}
                           for ref, w in self.derivation],
            "status": self.status.value,
        }

    def with_claim(self, claim: FormalSum, name: str | None = None) -> "VerifiedIdentity":
        return VerifiedIdentity(name or self.name, dict(self.params), claim, self.chains, self.derivation)

    def __repr__(self):
        return f"<{self.name} {self.params} {self.status.value}>"


class _WriteOnce:
    """Verification results keyed by canonical serialization; first write wins."""

    def __init__(self):
        self._data: dict[str, tuple[Status, object]] = {}
        self._lock = threading.Lock()

    def get(self, key):
        return self._data.get(key)

    def put(self, key, value):
        with self._lock:
            return self._data.setdefault(key, value)

    def clear(self):
        with self._lock:
            self._data.clear()


_RESULTS = _WriteOnce()


def clear_cache() -> None:
    _RESULTS.clear()


def _first_term(S: FormalSum):
    for t, c in S.items():
        return (c, t)
    return None


def residual(identity: VerifiedIdentity) -> FormalSum:
    """normalize(boundary(chains) + sum w * claim_ref) - normalize(claim)."""
    total = FormalSum(CURVES)
    if identity.chains:
        total = total + boundary(identity.chains)
    for ref, w in identity.derivation:
        total = total + ref.claim * w
    return normalize_quotient(total) - normalize_quotient(identity.claim)


def verify(identity: VerifiedIdentity, _active: set | None = None) -> Status:
    """Replay the bounding data of ``identity`` and record the outcome on it."""
    active = set() if _active is None else _active
    if id(identity) in active:
        raise VerificationError(f"cyclic derivation through {identity.name}")
    key = identity.key()
    hit = _RESULTS.get(key)
    if hit is not None:
        identity.status, identity.witness = hit
        return identity.status
    active.add(id(identity))
    try:
        result = _replay(identity, active)
    finally:
        active.discard(id(identity))
    identity.status, identity.witness = _RESULTS.put(key, result)
    return identity.status


def _replay(identity: VerifiedIdentity, active: set) -> tuple[Status, object]:
    for ref, _ in identity.derivation:
        if verify(ref, active) is not Status.VERIFIED:
            return Status.FAILED, ("unverified reference", ref.name, ref.witness)
    for t, _ in identity.claim.items():
        if classify(t) is TermClass.GENERIC:
            adm = admissible_curve(t)
            if not adm:
                return Status.FAILED, ("inadmissible claim term", t, adm.point)
    try:
        diff = residual(identity)
    except InadmissibleError as exc:
        return Status.FAILED, ("inadmissible chain", str(exc))
    if diff:
        return Status.FAILED, _first_term(diff)
    return Status.VERIFIED, None


def verified(identity: VerifiedIdentity) -> VerifiedIdentity:
    """Verify and raise on failure; returns the identity for chaining."""
    if verify(identity) is not Status.VERIFIED:
        raise VerificationError(f"{identity.name} {identity.params} failed", identity.witness)
    return identity


# ---------------------------------------------------------------------------
# Helpers


def _ctx_of(*vals) -> FieldContext:
    for v in vals:
        if isinstance(v, (FieldElement, FactoredRational)):
            return v.context
    raise InvalidArgument("cannot infer the field from integer arguments")


def _fr(ctx, v) -> FactoredRational:
    if isinstance(v, FactoredRational):
        return v
    return FactoredRational(coerce(ctx, v))


def _X(ctx):
    return FactoredRational.x(ctx)


def _lin(ctx, r, e=1):
    """(x - r)^e"""
    return FactoredRational(ctx.one, [(coerce(ctx, r), e)])


def _is_unit_value(v) -> bool:
    return v is not INF and not v.is_zero()


def _curve(coords) -> FormalSum:
    """One curve term as a sum, or 0 when a coordinate is identically 1."""
    if any(isinstance(c, FieldElement) and c.is_one() for c in coords):
        return FormalSum(CURVES)
    if any(isinstance(c, FactoredRational) and c.is_one() for c in coords):
        return FormalSum(CURVES)
    return FormalSum.of(CurveTerm(coords))


def _Z(a, c) -> FormalSum:
    """Z(a, c); zero when either argument is 1."""
    if a.is_one() or c.is_one():
        return FormalSum(CURVES)
    if not (_is_unit_value(a) and _is_unit_value(c)):
        raise InadmissibleError(f"Z({a}, {c}) needs nonzero finite arguments", witness=(a, c))
    return FormalSum.of(z_term(a, c))


def _M(p, q, c) -> FormalSum:
    """[(z - p)/(z - q), z, c]; zero when p = q or c = 1."""
    if c is not INF and c.is_one():
        return FormalSum(CURVES)
    if not _is_unit_value(c):
        raise InadmissibleError(f"monodromy term with constant {c}", witness=c)
    if p is INF and q is INF:
        return FormalSum(CURVES)
    if p is INF or q is INF:
        raise InadmissibleError("monodromy term with one infinite parameter", witness=(p, q))
    if p == q:
        return FormalSum(CURVES)
    return FormalSum.of(monodromy(p, q, c))


def _restricted_mixed(P: FactoredRational, Q: FactoredRational, x0, c) -> FormalSum:
    """The term [(z - P(x0))/(z - Q(x0)), z, c] with limits taken at poles."""
    if c is not INF and c.is_one():
        return FormalSum(CURVES)
    oP, oQ = min(0, P.order_at(x0)), min(0, Q.order_at(x0))
    if oP == oQ and oP < 0:
        return FormalSum(CURVES)  # constant first coordinate and constant last: degenerate
    if oP != oQ:
        raise InadmissibleError("restricted mixed coordinate is identically 0 or oo", witness=x0)
    p0, q0 = fr_eval(P, x0), fr_eval(Q, x0)
    if p0 == q0:
        return FormalSum(CURVES)
    return _M(p0, q0, c)


def _check_admissible(S: FormalSum, raw: Iterable[CurveTerm] = ()) -> None:
    for t in list(raw) + S.terms():
        if classify(t) is TermClass.GENERIC:
            adm = admissible_curve(t)
            if not adm:
                raise InadmissibleError(f"{t} is not admissible", witness=(adm.point, adm.indices))


def _Zchain(*coords) -> FormalSum:
    return FormalSum.of(SurfaceTerm(coords))


# ---------------------------------------------------------------------------
# Primitive identities with explicit chains

SLOTS = ("left", "middle", "right")


def product_rule(slot: str, h1, h2, f, g) -> VerifiedIdentity:
    """Split a product h1*h2 sitting in one coordinate of a curve.

    right:  [f, g, h1 h2] - [f, g, h1] - [f, g, h2] = 0
    left:   [h1 h2, f, g] - [h1, f, g] - [h2, f, g]
            + sum_{div f} m M(x0; g(x0)) - sum_{div g} m M(x0; f(x0)) = 0
    middle: [f, h1 h2, g] - [f, h1, g] - [f, h2, g] - sum_{div f} m M(x0; g(x0)) = 0

    where M(x0; c) = [(z - h1 h2(x0))/(z - h1(x0)), z, c].
    """
    if slot not in SLOTS:
        raise InvalidArgument(f"slot must be one of {SLOTS}")
    ctx = _ctx_of(h1, h2, f, g)
    h1, h2, f, g = (_fr(ctx, v) for v in (h1, h2, f, g))
    h12 = h1 * h2
    if h12 == h1:
        raise InvalidParameter("h2 must not be identically 1", "h2 != 1")
    M = Mixed(h12, h1)
    z = PureZ(Mobius.identity(ctx))

    def mon(x0, c):
        return _restricted_mixed(h12, h1, x0, c)

    if slot == "right":
        chains = _Zchain(PureX(f), PureX(g), M, z)
        claim = _curve([f, g, h12]) - _curve([f, g, h1]) - _curve([f, g, h2])
    elif slot == "left":
        chains = _Zchain(M, z, PureX(f), PureX(g))
        claim = _curve([h12, f, g]) - _curve([h1, f, g]) - _curve([h2, f, g])
        for x0, m in fr_divisor(f):
            claim = claim + mon(x0, fr_eval(g, x0)) * m
        for x0, m in fr_divisor(g):
            claim = claim - mon(x0, fr_eval(f, x0)) * m
    else:
        chains = -_Zchain(PureX(f), M, z, PureX(g))
        claim = _curve([f, h12, g]) - _curve([f, h1, g]) - _curve([f, h2, g])
        for x0, m in fr_divisor(f):
            claim = claim - mon(x0, fr_eval(g, x0)) * m
    _check_admissible(claim)
    params = {"h1": h1, "h2": h2, "f": f, "g": g}
    return VerifiedIdentity(f"product_rule[{slot}]", params, claim, chains)


def swap_right_const(f, g, c) -> VerifiedIdentity:
    """[f, g, c] + [f, c, g] - sum_{div f} m Z(c, g(x0)) = 0."""
    ctx = _ctx_of(f, g, c)
    f, g = _fr(ctx, f), _fr(ctx, g)
    c = coerce(ctx, c)
    if c.is_zero() or c.is_one():
        raise InvalidParameter("c must avoid 0 and 1", "c not in {0, 1}")
    z = PureZ(Mobius.identity(ctx))
    chains = -_Zchain(PureX(f), PureZ(Mobius.make(1, -c, 1, -1, ctx)), PureX(g), z)
    claim = _curve([f, g, c]) + _curve([f, c, g])
    for x0, m in fr_divisor(f):
        claim = claim - _Z(c, fr_eval(g, x0)) * m
    _check_admissible(claim)
    return VerifiedIdentity("swap_right_const", {"f": f, "g": g, "c": c}, claim, chains)


def reciprocal(f, c, g) -> VerifiedIdentity:
    """[f, c, g] + [1/f, c, g] - sum_{div g} m ([(z - 1)/(z - f(x0)), c, z] + Z(c, f(x0))) = 0."""
    ctx = _ctx_of(f, c, g)
    f, g = _fr(ctx, f), _fr(ctx, g)
    c = coerce(ctx, c)
    if c.is_zero() or c.is_one():
        raise InvalidParameter("c must avoid 0 and 1", "c not in {0, 1}")
    z = PureZ(Mobius.identity(ctx))
    one = FactoredRational(ctx.one)
    chains = -_Zchain(Mixed(one, f), z, PureX(_fr(ctx, c)), PureX(g))
    claim = _curve([f, c, g]) + _curve([f.inverse(), c, g])
    refs = []
    for x0, m in fr_divisor(g):
        f0 = fr_eval(f, x0)
        if f0 is INF or f0.is_zero():
            raise InadmissibleError("f must be finite and nonzero on the divisor of g", witness=x0)
        if f0.is_one():
            continue
        side = FactoredRational(ctx.one, [(ctx.one, 1), (f0, -1)])
        claim = claim - (_curve([side, c, _X(ctx)]) + _Z(c, f0)) * m
        refs.append((swap_right_const(side, _X(ctx), c), -m))
    _check_admissible(claim)
    return VerifiedIdentity("reciprocal", {"f": f, "c": c, "g": g}, claim, chains, tuple(refs))


def permute(variant: str, f, g, h) -> VerifiedIdentity:
    """Exchange two coordinates of [f, g, h] at the cost of Z-terms.

    swap23: [f, g, h] + [f, h, g] - sum_{div f} m Z(h0, g0) = 0
    swap12: [f, g, h] + [g, f, h] - sum_{div h} m Z(f0, g0) = 0
    swap13: [f, g, h] + [h, g, f] - sum_{div f} m Z(h0, g0)
            + sum_{div g} m Z(f0, h0) - sum_{div h} m Z(f0, g0) = 0
    """
    ctx = _ctx_of(f, g, h)
    f, g, h = (_fr(ctx, v) for v in (f, g, h))
    z = PureZ(Mobius.identity(ctx))
    one = FactoredRational(ctx.one)

    def zsum(div_of, a_fn, b_fn):
        out = FormalSum(CURVES)
        for x0, m in fr_divisor(div_of):
            a0, b0 = fr_eval(a_fn, x0), fr_eval(b_fn, x0)
            if any(v is not INF and v.is_one() for v in (a0, b0)):
                continue
            if a0 is INF or b0 is INF or a0.is_zero() or b0.is_zero():
                raise InadmissibleError("Z correction with argument 0 or oo", witness=x0)
            out = out + _Z(a0, b0) * m
        return out

    def values(div_of, *fns):
        return [tuple(fr_eval(fn, x0) for fn in fns) for x0, _ in fr_divisor(div_of)]

    if variant == "swap23":
        chains = -_Zchain(PureX(f), Mixed(g, one), PureX(h), z)
        claim = _curve([f, g, h]) + _curve([f, h, g]) - zsum(f, h, g)
        helpers = [_sym(a, b) for a, b in values(f, h, g)]
    elif variant == "swap12":
        chains = _Zchain(Mixed(f, one), PureX(g), z, PureX(h))
        claim = _curve([f, g, h]) + _curve([g, f, h]) - zsum(h, f, g)
        helpers = [_split1(a, c) for a, c in values(g, f, h)]
    elif variant == "swap13":
        chains = _Zchain(Mixed(g, one), PureX(h), z, PureX(f)) - _Zchain(Mixed(f, one), PureX(g), PureX(h), z)
        claim = _curve([f, g, h]) + _curve([h, g, f]) - zsum(f, h, g) + zsum(g, f, h) - zsum(h, f, g)
        helpers = [_sym(a, b) for a, b in values(f, h, g)]
        helpers += [_split1(a, c) for a, c in values(h, g, f)]
    else:
        raise InvalidArgument("variant must be swap23, swap12 or swap13")
    _check_admissible(claim)
    return derive(f"permute[{variant}]", {"f": f, "g": g, "h": h}, claim,
                  [hp for hp in helpers if hp is not None], chains=chains)


def _sym(a, b):
    if a is INF or b is INF or a.is_zero() or b.is_zero() or a.is_one() or b.is_one() or a == b:
        return None
    return z_symmetry(a, b)


def _split1(a, c):
    """z_split(a, 1, c), which kills the monodromy term M(a, 1, c)."""
    if a is INF or c is INF or a.is_zero() or c.is_zero() or a.is_one() or c.is_one():
        return None
    return z_split(a, a.context.one, c)


# ---------------------------------------------------------------------------
# Weight fitting


def _solve(columns: list[dict], target: dict) -> list[Fraction] | None:
    """Exact solution of sum_k w_k columns[k] = target, free variables set to 0."""
    rows = sorted({t for col in columns for t in col} | set(target), key=lambda t: t.key())
    index = {t: i for i, t in enumerate(rows)}
    n = len(columns)
    mat = [[Fraction(0)] * (n + 1) for _ in rows]
    for k, col in enumerate(columns):
        for t, c in col.items():
            mat[index[t]][k] = Fraction(c)
    for t, c in target.items():
        mat[index[t]][n] = Fraction(c)
    pivots = []
    r = 0
    for k in range(n):
        p = next((i for i in range(r, len(mat)) if mat[i][k]), None)
        if p is None:
            continue
        mat[r], mat[p] = mat[p], mat[r]
        piv = mat[r][k]
        mat[r] = [v / piv for v in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][k]:
                fac = mat[i][k]
                mat[i] = [a - fac * b for a, b in zip(mat[i], mat[r])]
        pivots.append(k)
        r += 1
    if any(row[n] for row in mat[r:]):
        return None
    w = [Fraction(0)] * n
    for i, k in enumerate(pivots):
        w[k] = mat[i][n]
    return w


def derive(name: str, params: dict, claim: FormalSum, steps: Sequence[VerifiedIdentity],
           chains: FormalSum | None = None) -> VerifiedIdentity:
    """Build an identity whose derivation combines ``steps`` with fitted integer weights.

    The weights only have to be found here; :func:`verify` replays them
    independently.  When no integral combination exists the derivation is
    left empty and verification fails with a witness.
    """
    chains = chains if chains is not None else FormalSum(SURFACES)
    base = normalize_quotient(claim)
    if chains:
        base = base - normalize_quotient(boundary(chains))
    uniq: dict[str, VerifiedIdentity] = {}
    for st in steps:
        uniq.setdefault(st.key(), st)
    steps = list(uniq.values())
    cols = [dict(normalize_quotient(st.claim).items()) for st in steps]
    w = _solve(cols, dict(base.items()))
    if w is None or any(v.denominator != 1 for v in w):
        return VerifiedIdentity(name, params, claim, chains, ())
    deriv = tuple((st, int(v)) for st, v in zip(steps, w) if v)
    return VerifiedIdentity(name, params, claim, chains, deriv)

# ---------------------------------------------------------------------------
# Lemmas on Z-terms


def z_symmetry(a, c) -> VerifiedIdentity:
    """Z(a, c) - Z(c, a) = 0."""
    ctx = _ctx_of(a, c)
    a, c = coerce(ctx, a), coerce(ctx, c)
    _nonzero(a=a, c=c)
    claim = _Z(a, c) - _Z(c, a)
    if a.is_one() or c.is_one() or a == c:
        return VerifiedIdentity("z_symmetry", {"a": a, "c": c}, claim)
    f = FactoredRational(ctx.one, [(a, 1), (ctx.one, -1)])
    ref = reciprocal(f, c, _X(ctx))
    return VerifiedIdentity("z_symmetry", {"a": a, "c": c}, claim, derivation=((ref, 1),))


def z_quotient(a, b, c) -> VerifiedIdentity:
    """[(x - a)/(x - b), c, x] - Z(c, a/b) = 0."""
    ctx = _ctx_of(a, b, c)
    a, b, c = (coerce(ctx, v) for v in (a, b, c))
    _nonzero(a=a, b=b, c=c)
    if a == b:
        raise InvalidParameter("a and b must differ", "a != b")
    if c.is_one():
        raise InvalidParameter("c must not be 1", "c != 1")
    f = FactoredRational(ctx.one, [(a, 1), (b, -1)])
    claim = _curve([f, c, _X(ctx)]) - _Z(c, a / b)
    g_inv = f.inverse()
    refs = [(reciprocal(f, c, _X(ctx)), 1)]
    if not b.is_one():
        refs.append((product_rule("right", _X(ctx), b.inv(), g_inv, c), 1))
    return VerifiedIdentity("z_quotient", {"a": a, "b": b, "c": c}, claim, derivation=tuple(refs))


def z_split(a, b, c) -> VerifiedIdentity:
    """[(x - a)/(x - b), x, c] - Z(c, a) + Z(c, b) + Z(c, a/b) = 0."""
    ctx = _ctx_of(a, b, c)
    a, b, c = (coerce(ctx, v) for v in (a, b, c))
    _nonzero(a=a, b=b, c=c)
    if a == b:
        raise InvalidParameter("a and b must differ", "a != b")
    if c.is_one():
        raise InvalidParameter("c must not be 1", "c != 1")
    f = FactoredRational(ctx.one, [(a, 1), (b, -1)])
    claim = _curve([f, _X(ctx), c]) - _Z(c, a) + _Z(c, b) + _Z(c, a / b)
    refs = ((swap_right_const(f, _X(ctx), c), 1), (z_quotient(a, b, c), -1))
    return VerifiedIdentity("z_split", {"a": a, "b": b, "c": c}, claim, derivation=refs)


def z_lemmas(kind: str, **params) -> VerifiedIdentity:
    """Dispatch by name: swap_right_const(f, g, c), reciprocal(f, c, g),
    z_symmetry(a, c), z_split(a, b, c), z_quotient(a, b, c)."""
    table = {
        "swap_right_const": swap_right_const,
        "reciprocal": reciprocal,
        "z_symmetry": z_symmetry,
        "z_split": z_split,
        "z_quotient": z_quotient,
    }
    if kind not in table:
        raise InvalidArgument(f"unknown lemma {kind!r}")
    return table[kind](**params)


def _nonzero(**vals):
    for k, v in vals.items():
        if v.is_zero():
            raise InvalidParameter(f"{k} must be nonzero", f"{k} != 0")


# ---------------------------------------------------------------------------
# Lower-order helpers collected from the terms a derivation produces


def _lower_order_helpers(sums: Iterable[FormalSum]) -> list[VerifiedIdentity]:
    """z_split for every monodromy term and z_symmetry for every Z-term seen."""
    out: list[VerifiedIdentity] = []
    zs: set = set()
    seen: set = set()
    pending = list(sums)
    while pending:
        S = pending.pop()
        for t, _ in normalize_quotient(S).items():
            if t in seen:
                continue
            seen.add(t)
            r = recognize(t)
            if r is None:
                continue
            if r[0] == "M":
                _, p, q, c = r
                if p.is_zero() or q.is_zero() or c.is_one() or c.is_zero():
                    continue
                ident = z_split(p, q, c)
                out.append(ident)
                pending.append(ident.claim)
            elif r[0] == "Z":
                _, a, c = r
                if a != c and not (a.is_one() or c.is_one() or a.is_zero() or c.is_zero()):
                    zs.add(tuple(sorted((a, c), key=lambda v: v.key())))
    out.extend(z_symmetry(a, c) for a, c in sorted(zs, key=lambda p: (p[0].key(), p[1].key())))
    return out


def _derive_with_helpers(name, params, claim, steps, chains=None) -> VerifiedIdentity:
    helpers = _lower_order_helpers([claim] + [st.claim for st in steps])
    return derive(name, params, claim, list(steps) + helpers, chains)


def _C(a) -> FormalSum:
    return FormalSum.of(totaro(a))


def _frac(ctx, zeros=(), poles=(), unit=1) -> FactoredRational:
    """unit * prod (x - r) / prod (x - s)"""
    factors = [(coerce(ctx, r), 1) for r in zeros] + [(coerce(ctx, r), -1) for r in poles]
    return FactoredRational(coerce(ctx, unit), factors)


# ---------------------------------------------------------------------------
# Relations between Totaro cycles


def two_term(a) -> VerifiedIdentity:
    """C_a + C_{1-a} - C_1 - Z(a, 1-a) = 0."""
    ctx = a.context
    one = ctx.one
    if a.is_zero() or a.is_one():
        raise InvalidParameter("two_term needs a not in {0, 1}", "a not in {0, 1}")
    claim = _C(a) + _C(one - a) - _C(one) - _Z(a, one - a)
    one_minus_x = _frac(ctx, [1], unit=-1)
    x = _X(ctx)
    steps = [
        product_rule("left", _frac(ctx, [a], [1]), _frac(ctx, [1], [0]), one_minus_x, x),
        permute("swap23", _frac(ctx, [one - a], [0]), x, one_minus_x),
    ]
    return _derive_with_helpers("two_term", {"a": a}, claim, steps)


def c_tilde(a) -> FormalSum:
    """The variant [1 - a/x, 1 - x, x] - [1 - a/x, x, 1 - x]."""
    ctx = a.context
    f = _frac(ctx, [a], [0])
    return _curve([f, _frac(ctx, [1], unit=-1), _X(ctx)]) - _curve([f, _X(ctx), _frac(ctx, [1], unit=-1)])


def c_tilde_identity(a) -> VerifiedIdentity:
    """C~_a - 2 C_a + Z(a, 1-a) = 0."""
    ctx = a.context
    if a.is_zero() or a.is_one():
        raise InvalidParameter("c_tilde needs a not in {0, 1}", "a not in {0, 1}")
    claim = c_tilde(a) - _C(a) * 2 + _Z(a, ctx.one - a)
    step = permute("swap23", _frac(ctx, [a], [0]), _X(ctx), _frac(ctx, [1], unit=-1))
    return _derive_with_helpers("c_tilde", {"a": a}, claim, [step])


def torsion_right(f, g, zeta) -> VerifiedIdentity:
    """d [f, g, zeta] = 0 for a root of unity zeta of exact order d."""
    ctx = _ctx_of(f, g, zeta)
    zeta = coerce(ctx, zeta)
    d = multiplicative_order(zeta)
    if d is None:
        raise InvalidParameter(f"{zeta} is not a root of unity", "zeta^d = 1")
    f, g = _fr(ctx, f), _fr(ctx, g)
    claim = _curve([f, g, zeta]) * d
    if d == 1:
        return VerifiedIdentity("torsion_right", {"f": f, "g": g, "zeta": zeta}, FormalSum(CURVES))
    steps = [product_rule("right", zeta ** m, zeta, f, g) for m in range(1, d)]
    return derive("torsion_right", {"f": f, "g": g, "zeta": zeta}, claim, steps)


def distribution(a, n: int, weight: int | None = None) -> VerifiedIdentity:
    """n C_{a^n} = n^2 sum_j C_{zeta^j a} + w sum_{i>=2} [(z - prod_{j<=i}(1 - zeta^j a))/(z - (1 - zeta^i a)), z, a^n].

    The monodromy weight ``w`` defaults to n; see :func:`distribution_displayed`.
    """
    ctx = a.context
    if n < 2:
        raise InvalidParameter("n must be at least 2", "n >= 2")
    if a.is_zero():
        raise InvalidParameter("a must be nonzero", "a != 0")
    try:
        zeta = ctx.root_of_unity(n, 1)
    except InvalidArgument:
        raise InvalidParameter(f"the field has no primitive {n}-th root of unity", "zeta_n in F") from None
    one = ctx.one
    an = a ** n
    claim = _C(an) * n
    for j in range(1, n + 1):
        claim = claim - _C(zeta ** j * a) * (n * n)
    prod = one
    for i in range(1, n + 1):
        prod = prod * (one - zeta ** i * a)
        if i >= 2:
            claim = claim - _M(prod, one - zeta ** i * a, an) * (n if weight is None else weight)

    x = _X(ctx)
    xn = FactoredRational(one, [(ctx.zero, n)])
    one_minus_xn = FactoredRational(-one, [(zeta ** k, 1) for k in range(n)])
    L = [_frac(ctx, [zeta ** j * a], [0]) for j in range(1, n + 1)]
    steps = []
    P = L[0]
    for i in range(1, n):
        steps.append(product_rule("left", P, L[i], one_minus_xn, xn))
        P = P * L[i]
    lin = [_frac(ctx, [zeta ** (-k)], unit=-(zeta ** k)) for k in range(n)]  # 1 - zeta^k x
    for Lj in L:
        Q = lin[0]
        for k in range(1, n):
            steps.append(product_rule("middle", Q, lin[k], Lj, xn))
            Q = Q * lin[k]
    # x -> zeta^k x fixes x^n, so every [L_j, 1 - zeta^k x, x^n] is some [L_i, 1 - x, x^n]
    for Lj in L:
        for m in range(1, n):
            steps.append(product_rule("right", x ** m, x, Lj, lin[0]))
    params = {"a": a, "n": n}
    if weight is not None:
        params["weight"] = weight
    return _derive_with_helpers("distribution", params, claim, steps)


def distribution_displayed(a, n: int) -> VerifiedIdentity:
    """The distribution relation with monodromy weight 2 for every n.

    Only n = 2 (or a with a^n = 1, where the monodromy terms vanish) verifies;
    for n >= 3 the telescoped correction carries weight n.
    """
    return distribution(a, n, weight=2)


def _five_term_args(a, b):
    ctx = _ctx_of(a, b)
    a, b = coerce(ctx, a), coerce(ctx, b)
    one = ctx.one
    for name, v in (("a", a), ("b", b)):
        if v.is_zero() or v.is_one():
            raise InvalidParameter(f"{name} must avoid 0 and 1", f"{name} not in {{0, 1}}")
    if a == b or a == one - b:
        raise InvalidParameter("five-term relation needs a not in {b, 1 - b}", "a not in {b, 1-b}")
    return ctx, a, b


def _five_term_steps(ctx, a, b) -> list[VerifiedIdentity]:
    """The splitting steps applied to the reparametrized C_{a(1-b)/(b(1-a))}."""
    one = ctx.one
    t = _X(ctx)
    ia = (one - a).inv()
    bt_b1t = _frac(ctx, [b], [1], b.inv())          # (b - t)/(b(1 - t))
    ta_t1a = _frac(ctx, [a], [0], ia)               # (t - a)/(t(1 - a))
    one_t_1a = _frac(ctx, [1], [], -ia)             # (1 - t)/(1 - a)
    a_t = _frac(ctx, [], [0], a)                    # a/t
    bt_1t = _frac(ctx, [b], [1])                    # (b - t)/(1 - t)
    ta_t = _frac(ctx, [a], [0])                     # (t - a)/t
    ta_1a = _frac(ctx, [a], [], ia)                 # (t - a)/(1 - a)
    inv_t = _frac(ctx, [], [0])                     # 1/t
    bt_b = _frac(ctx, [b], [], -b.inv())            # (b - t)/b
    inv_1t = _frac(ctx, [], [1], -one)              # 1/(1 - t)
    one_t = _frac(ctx, [1], [], -one)               # 1 - t
    cst_ia = FactoredRational(ia)
    steps = [
        product_rule("right", one_t_1a, a_t, bt_b1t, ta_t1a),
        product_rule("left", bt_1t, b.inv(), ta_t1a, one_t_1a),
        product_rule("middle", ta_t, ia, bt_b1t, a_t),
        product_rule("middle", ta_1a, inv_t, bt_1t, one_t_1a),
        product_rule("left", bt_b, inv_1t, ta_t, a_t),
        # [1/(1-t), (t-a)/t, a/t] is an inverted Totaro cycle
        product_rule("left", _frac(ctx, [1], [], -one), inv_1t, ta_t, a_t),
        # [(b-t)/(1-t), 1/t, (1-t)/(1-a)]
        product_rule("right", one_t, ia, bt_1t, inv_t),
        product_rule("middle", t, inv_t, bt_1t, one_t),
        # [(b-t)/(b(1-t)), 1/(1-a), a/t]
        product_rule("left", bt_1t, b.inv(), cst_ia, a_t),
        product_rule("right", inv_t, a, bt_1t, cst_ia),
        permute("swap23", bt_1t, cst_ia, inv_t),
    ]
    return steps


def five_term_claim(a, b, displayed: bool = False) -> FormalSum:
    """V_{a,b}; with ``displayed`` the three sign-ambiguous monodromy terms are flipped."""
    ctx, a, b = _five_term_args(a, b)
    sign = -1 if displayed else 1
    one = ctx.one
    u = a * (one - b) / (b * (one - a))
    p = (b - a) / (b * (one - a))
    return (_C(u) - _C((one - b) / (one - a)) + _C(one - b) - _C(a / b) + _C(a)
            - _Z(b.inv(), (one - a).inv()) + sign * _M(one, b, one - b)
            - sign * _M(p, (b - a) / (one - a), (one - b) / (one - a))
            + _M(one, one - a, a)
            - sign * _M(p, (b - a) / b, a / b))


def z_reciprocal_split(a, b) -> VerifiedIdentity:
    """Z(1/b, 1/(1-a)) - Z(b, 1-a) - [(z-1)/(z-a), z, 1-b] = 0.

    Backed by the Z-term lemmas, the x -> 1/x reparametrization (a left
    product rule with a constant factor and a right product rule with
    x * 1/x) and the collected lower-order helpers.
    """
    ctx, a, b = _five_term_args(a, b)
    one = ctx.one
    claim = _Z(b.inv(), (one - a).inv()) - _Z(b, one - a) - _M(one, a, one - b)
    x, xi = _X(ctx), _frac(ctx, [], [0])
    steps = []
    for r, c in ((b, one - a), (b.inv(), (one - a).inv()), (one - a, b), ((one - a).inv(), b.inv())):
        if c.is_one() or r.is_one():
            continue
        f = _frac(ctx, [r], [1])
        steps += [product_rule("left", f, r.inv(), c, xi), product_rule("right", x, xi, f, c)]
    return _derive_with_helpers("z_reciprocal_split", {"a": a, "b": b}, claim, steps)


def two_torsion_monodromy(a) -> VerifiedIdentity:
    """2 [(z - 1)/(z - a), z, 1 - a] = 0.

    The derivation subtracts V_{2, 1-a} from V_{a, -1}; the remaining term
    2 [(z-1)/(z-2), z, -1] dies by torsion.  a = -1 goes through the right
    product rule and the Z-splitting lemma instead.
    """
    ctx = a.context
    one = ctx.one
    if a.is_zero() or a.is_one():
        raise InvalidParameter("a must avoid 0 and 1", "a not in {0, 1}")
    claim = _M(one, a, one - a) * 2
    x = _X(ctx)
    steps = []
    if multiplicative_order(one - a):
        steps.append(torsion_right(_frac(ctx, [1], [a]), x, one - a))
    elif a == -one:
        steps += [product_rule("right", 2 * one, one / 2, _frac(ctx, [1], [-1]), x),
                  z_split(one, -one, 2 * one), z_split(one, -one, one / 2), z_split(one, 2 * one, -one),
                  z_symmetry(-one, 2 * one), torsion_right(_frac(ctx, [1], [2]), x, -one)]
    else:
        steps += [five_term("full", a, -one), five_term("full", 2 * one, one - a),
                  torsion_right(_frac(ctx, [1], [2]), x, -one)]
    return _derive_with_helpers("two_torsion_monodromy", {"a": a}, claim, steps)


def five_term_even_claim(a, b) -> FormalSum:
    """2V'(a, b): twice V_{a,b} with the Z-term rewritten and the 2-torsion terms dropped."""
    ctx, a, b = _five_term_args(a, b)
    one = ctx.one
    claim = five_term_claim(a, b) * 2 + z_reciprocal_split(a, b).claim * 2
    for q, c in ((b, one - b), (one - a, a)):
        m = _M(one, q, c)
        for t, k in m.items():
            claim = claim - FormalSum.of((claim.coefficient(t) // k, t))
    return claim


def five_term(variant: str, a, b) -> VerifiedIdentity:
    """V_{a,b} = 0 ('full') or 2V'(a, b) = 0 ('even')."""
    ctx, a, b = _five_term_args(a, b)
    if variant == "full":
        claim = five_term_claim(a, b)
        return _derive_with_helpers("five_term[full]", {"a": a, "b": b}, claim, _five_term_steps(ctx, a, b))
    if variant == "even":
        one = ctx.one
        steps = [five_term("full", a, b), z_reciprocal_split(a, b)]
        steps += [two_torsion_monodromy(q) for q in (b, one - a) if not (one - q).is_one()]
        return derive("five_term[even]", {"a": a, "b": b}, five_term_even_claim(a, b), steps)
    raise InvalidArgument("variant must be 'full' or 'even'")


def monodromy_inverse(a, b, c) -> VerifiedIdentity:
    """[(x-a)/(x-b), x, c] + [(x-b)/(x-a), x, c] - [(x-1)/(x-a/b), x, c] = 0."""
    ctx = _ctx_of(a, b, c)
    a, b, c = (coerce(ctx, v) for v in (a, b, c))
    _nonzero(a=a, b=b, c=c)
    if a == b or c.is_one():
        raise InvalidParameter("need a != b and c != 1", "a != b, c != 1")
    x = _X(ctx)
    one = FactoredRational(ctx.one)
    chains = -_Zchain(Mixed(one, _frac(ctx, [a], [b])), PureZ(Mobius.identity(ctx)), PureX(x), PureX(_fr(ctx, c)))
    claim = _M(a, b, c) + _M(b, a, c) - _M(ctx.one, a / b, c)
    return derive("monodromy_inverse", {"a": a, "b": b, "c": c}, claim, [], chains=chains)


def _inversion_args(a, b):
    ctx = _ctx_of(a, b)
    a, b = coerce(ctx, a), coerce(ctx, b)
    one = ctx.one
    for name, v in (("a", a), ("b", b)):
        if v.is_zero() or v.is_one():
            raise InvalidParameter(f"{name} must avoid 0 and 1", f"{name} not in {{0, 1}}")
    if a == b or a == one - b or a == b / (b - one):
        raise InvalidParameter("inversion needs a not in {b, 1 - b, b/(b - 1)}", "a not in {b, 1-b, b/(b-1)}")
    return ctx, a, b


def _inversion_parts(a, b):
    ia, ib = a.inv(), b.inv()
    fives = [five_term("full", a, b), five_term("full", ia, ib), five_term("full", b, a), five_term("full", ib, ia)]
    twos = [two_term(v) for v in (a, b, ia, ib)]
    return fives, twos


def inversion(variant: str, a, b) -> VerifiedIdentity:
    """2(C_c + C_{1/c} - 2C_1) minus Z- and monodromy terms, c = a/b.

    'full' combines V_{a,b}, V_{1/a,1/b}, V_{b,a}, V_{1/b,1/a} with four
    two-term relations; the lower-order terms of the claim are generated by
    that combination.  'b_eq_minus_a' is twice the full relation at b = -a.
    'even' is the doubled relation with the monodromy terms of the
    2-torsion corollary removed.
    """
    if variant == "b_eq_minus_a":
        ctx = a.context
        if a.is_zero() or a.is_one() or (-a).is_one():
            raise InvalidParameter("b_eq_minus_a needs a not in {0, 1, -1}", "a not in {0, +-1}")
        full = inversion("full", a, -a)
        return derive("inversion[b_eq_minus_a]", {"a": a}, full.claim * 2, [full])
    ctx, a, b = _inversion_args(a, b)
    fives, twos = _inversion_parts(a, b)
    claim = FormalSum(CURVES)
    for v in fives:
        claim = claim - v.claim
    for t in twos:
        claim = claim + t.claim
    if variant == "full":
        return derive("inversion[full]", {"a": a, "b": b}, claim, fives + twos)
    if variant == "even":
        evens = [five_term("even", p, q) for p, q in ((a, b), (a.inv(), b.inv()), (b, a), (b.inv(), a.inv()))]
        claim2 = FormalSum(CURVES)
        for v in evens:
            claim2 = claim2 - v.claim
        for t in twos:
            claim2 = claim2 + t.claim * 2
        return derive("inversion[even]", {"a": a, "b": b}, claim2, evens + twos)
    raise InvalidArgument("variant must be 'full', 'even' or 'b_eq_minus_a'")


# ---------------------------------------------------------------------------
# Named constructors and their serialized recipes


CONSTRUCTORS = {
    "product_rule": product_rule,
    "swap_right_const": swap_right_const,
    "reciprocal": reciprocal,
    "permute": permute,
    "z_symmetry": z_symmetry,
    "z_quotient": z_quotient,
    "z_split": z_split,
    "two_term": two_term,
    "c_tilde": c_tilde_identity,
    "torsion_right": torsion_right,
    "distribution": distribution,
    "five_term": five_term,
    "inversion": inversion,
    "monodromy_inverse": monodromy_inverse,
    "z_reciprocal_split": z_reciprocal_split,
    "two_torsion_monodromy": two_torsion_monodromy,
}


def _encode(v):
    if isinstance(v, (int, str)):
        return v
    if isinstance(v, FactoredRational):
        return {"fr": serialize_fr(v)}
    if isinstance(v, FieldElement):
        return {"el": serialize_element(v)}
    raise InvalidArgument(f"cannot encode parameter {v!r}")


def _decode(v, ctx: FieldContext):
    if isinstance(v, dict):
        if "fr" in v:
            return parse_coordinate(v["fr"], ctx)
        return parse_element(v["el"], ctx)
    return v


def recipe(identity: VerifiedIdentity) -> dict:
    """Constructor name, variant and encoded parameters that rebuild ``identity``."""
    name, _, variant = identity.name.partition("[")
    if name not in CONSTRUCTORS:
        raise InvalidArgument(f"{identity.name} has no registered constructor")
    rec = {"ctor": name, "args": {k: _encode(v) for k, v in identity.params.items()},
           "conductor": identity.context.conductor}
    if variant:
        rec["variant"] = variant.rstrip("]")
    return rec


def from_recipe(rec: dict, ctx: FieldContext | None = None) -> VerifiedIdentity:
    ctx = ctx or field_create(int(rec["conductor"]))
    try:
        fn = CONSTRUCTORS[rec["ctor"]]
    except KeyError:
        raise InvalidArgument(f"unknown constructor {rec.get('ctor')!r}") from None
    kwargs = {k: _decode(v, ctx) for k, v in rec["args"].items()}
    if "variant" in rec:
        key = "slot" if rec["ctor"] == "product_rule" else "variant"
        kwargs[key] = rec["variant"]
    if rec["ctor"] == "inversion":
        kwargs.setdefault("b", None)
    return fn(**kwargs)
