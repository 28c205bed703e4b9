"""Step-logged rewriting of formal sums into torsion certificates.

A ledger starts from a target sum S and rewrites it by adding multiples of
verified identities, scaling, removing root-of-unity torsion and importing
earlier certificates.  When the running sum reaches zero, the product m of
the scale factors gives m S = 0 in the quotient.  The regulator of S then
bounds the order from below.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field as dc_field, replace
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from math import lcm
from typing import Sequence

from .cycles import (
    CURVES,
    CurveTerm,
    FormalSum,
    describe,
    describe_sum,
    normalize_quotient,
    parse_sum,
    sum_to_records,
    term_from_record,
    term_to_record,
)
from .errors import ChowError, IncompleteDerivation, InvalidArgument, LedgerError
from .numfield import FieldContext, field_create, multiplicative_order
from .ratfunc import FactoredRational
from .regulator import RegulatorValue, aj_all_embeddings, aj_sum_robust, format_value, recognize_pi2
from .relations import (
    Status,
    VerifiedIdentity,
    derive,
    from_recipe,
    product_rule,
    recipe,
    torsion_right,
    verify,
)


class StepKind(str, enum.Enum):
    APPLY = "apply_identity"
    SCALE = "scale"
    KILL = "kill_torsion"
    SUBSTITUTE = "substitute_equal"


@dataclass(frozen=True)
class CertStep:
    kind: StepKind
    identity: VerifiedIdentity | None = None
    weight: int = 0
    term: CurveTerm | None = None
    order: int = 0
    imported: "TorsionCertificate | None" = None

    def describe(self) -> str:
        if self.kind is StepKind.SCALE:
            return f"scale by {self.weight}"
        if self.kind is StepKind.APPLY:
            args = ", ".join(f"{k}={v}" for k, v in self.identity.params.items())
            return f"apply {self.identity.name}({args}) with weight {self.weight}"
        if self.kind is StepKind.KILL:
            return f"kill {self.weight}*{describe(self.term)} as {self.order}-torsion via {self.identity.name}"
        c = self.imported
        return f"substitute {c.order_upper_bound}*({describe_sum(c.cycle)}) = 0 from {c.name} with weight {self.weight}"

    def to_record(self) -> dict:
        rec: dict = {"kind": self.kind.value}
        if self.kind is StepKind.SCALE:
            rec["m"] = self.weight
        elif self.kind is StepKind.APPLY:
            rec["identity"] = recipe(self.identity)
            rec["weight"] = self.weight
        elif self.kind is StepKind.KILL:
            rec["term"] = term_to_record(self.term)
            rec["order"] = self.order
        else:
            rec["certificate"] = self.imported.name
            rec["weight"] = self.weight
        return rec


@dataclass(frozen=True)
class LedgerState:
    """The running sum, the initial sum and the append-only step log."""

    initial: FormalSum
    current: FormalSum
    field: FieldContext
    steps: tuple[CertStep, ...] = ()

    @property
    def multiplier(self) -> int:
        m = 1
        for st in self.steps:
            if st.kind is StepKind.SCALE:
                m *= st.weight
        return m

    def _push(self, current: FormalSum, step: CertStep) -> "LedgerState":
        return replace(self, current=normalize_quotient(current), steps=self.steps + (step,))


def start(target: FormalSum) -> LedgerState:
    if target.grading != CURVES or not target:
        raise InvalidArgument("a ledger starts from a nonzero sum of curves")
    ctx = next(iter(target.terms())).context
    return LedgerState(target, normalize_quotient(target), ctx)


def _same_field(state: LedgerState, ctx: FieldContext) -> None:
    if ctx.conductor != state.field.conductor:
        raise LedgerError(f"identity over {ctx} used in a ledger over {state.field}")


def apply_identity(state: LedgerState, identity: VerifiedIdentity, weight: int) -> LedgerState:
    if verify(identity) is not Status.VERIFIED:
        raise LedgerError(f"{identity.name} is not verified: {identity.witness}")
    _same_field(state, identity.context)
    weight = int(weight)
    return state._push(state.current + identity.claim * weight, CertStep(StepKind.APPLY, identity, weight))


def scale(state: LedgerState, m: int) -> LedgerState:
    if int(m) == 0:
        raise LedgerError("cannot scale by 0")
    return state._push(state.current * int(m), CertStep(StepKind.SCALE, weight=int(m)))


def _canonical(term: CurveTerm) -> CurveTerm:
    terms = FormalSum.of((1, term)).items()
    if len(terms) != 1:
        raise LedgerError(f"{term} is not a single nondegenerate term")
    return terms[0][0]


def torsion_middle(f, zeta, g) -> VerifiedIdentity:
    """d [f, zeta, g] = 0 when the middle product rule leaves only quotient terms."""
    d = multiplicative_order(zeta)
    if d is None:
        raise LedgerError(f"{zeta} is not a root of unity")
    claim = FormalSum.of((d, CurveTerm([f, FactoredRational(zeta), g])))
    steps = [product_rule("middle", zeta ** m, zeta, f, g) for m in range(1, d)]
    return derive("torsion_middle", {"f": f, "zeta": zeta, "g": g}, claim, steps)


def torsion_justification(term: CurveTerm) -> tuple[int, VerifiedIdentity]:
    """The torsion order of ``term`` and the identity proving it."""
    f, g, h = term.coords
    if h.is_constant() and multiplicative_order(h.unit):
        J = torsion_right(f, g, h.unit)
    elif g.is_constant() and multiplicative_order(g.unit):
        J = torsion_middle(f, g.unit, h)
    else:
        raise LedgerError(f"no root of unity in the middle or right coordinate of {term}")
    if verify(J) is not Status.VERIFIED:
        raise LedgerError(f"torsion justification for {describe(term)} does not verify")
    d = J.claim.coefficient(term)
    if not d or normalize_quotient(J.claim) != FormalSum.of((d, term)):
        raise LedgerError(f"torsion justification for {describe(term)} leaves correction terms")
    return abs(d), J


def kill_torsion(state: LedgerState, term: CurveTerm, n: int) -> LedgerState:
    term = _canonical(term)
    k = state.current.coefficient(term)
    if k == 0:
        raise LedgerError(f"{describe(term)} does not occur in the current sum")
    if n <= 0 or k % n:
        raise LedgerError(f"coefficient {k} of {describe(term)} is not divisible by {n}")
    d, J = torsion_justification(term)
    if n % d:
        raise LedgerError(f"{describe(term)} is {d}-torsion, not {n}-torsion")
    d_signed = J.claim.coefficient(term)
    step = CertStep(StepKind.KILL, J, weight=k, term=term, order=n)
    return state._push(state.current + J.claim * (-k // d_signed), step)


def transport(S: FormalSum, ctx: FieldContext) -> FormalSum:
    """Re-read a sum with rational coordinates over another cyclotomic field."""
    out = FormalSum(CURVES)
    for t, c in S.items():
        for coord in t.coords:
            vals = [coord.unit] + [r for r, _ in coord.factors]
            if not all(v.is_rational() for v in vals):
                raise LedgerError(f"{describe(t)} is not defined over Q")
        rec = term_to_record(t)
        rec["field"] = {"conductor": ctx.conductor}
        out = out + FormalSum.of((c, term_from_record(rec)))
    return out


def substitute_equal(state: LedgerState, cert: "TorsionCertificate", weight: int) -> LedgerState:
    """Add weight * m * S where m S = 0 is the content of a concluded certificate.

    Certificates over a different field enter through the injectivity of
    indecomposable K_3 under field extensions, so only sums with rational
    coordinates may cross.
    """
    replay(cert.ledger)
    rel = cert.cycle * cert.order_upper_bound
    if cert.field.conductor != state.field.conductor:
        rel = transport(rel, state.field)
    step = CertStep(StepKind.SUBSTITUTE, weight=int(weight), imported=cert)
    return state._push(state.current + rel * int(weight), step)


def _redo(state: LedgerState, st: CertStep) -> LedgerState:
    if st.kind is StepKind.SCALE:
        return scale(state, st.weight)
    if st.kind is StepKind.APPLY:
        return apply_identity(state, st.identity, st.weight)
    if st.kind is StepKind.KILL:
        return kill_torsion(state, st.term, st.order)
    return substitute_equal(state, st.imported, st.weight)


def replay(state: LedgerState) -> LedgerState:
    """Re-execute every step from the initial sum; the result must match bit for bit."""
    fresh = start(state.initial)
    for st in state.steps:
        fresh = _redo(fresh, st)
    if fresh.current != state.current:
        raise LedgerError("replay does not reproduce the recorded sum")
    return fresh


# ---------------------------------------------------------------------------
# Certificates


@dataclass(frozen=True)
class TorsionCertificate:
    name: str
    cycle: FormalSum
    field: FieldContext
    order_upper_bound: int
    ledger: LedgerState
    regulator_value: RegulatorValue | None
    order_lower_bound: int
    conclusion: str
    notes: tuple[str, ...] = ()

    @property
    def exact(self) -> bool:
        return self.order_lower_bound == self.order_upper_bound

    def to_record(self) -> dict:
        reg = self.regulator_value
        return {
            "name": self.name,
            "cycle": sum_to_records(self.cycle),
            "field": {"conductor": self.field.conductor},
            "order_upper_bound": self.order_upper_bound,
            "order_lower_bound": self.order_lower_bound,
            "conclusion": self.conclusion,
            "regulator": reg.to_record() if reg else None,
            "steps": [st.to_record() for st in self.ledger.steps],
            "notes": list(self.notes),
        }

    def render(self) -> str:
        reg = self.regulator_value
        lines = [
            f"certificate  {self.name}",
            f"field        {self.field}" + (f"  (embedding {reg.embedding_index})" if reg else ""),
            f"cycle        {describe_sum(self.cycle)}",
            f"upper bound  {self.order_upper_bound}",
            f"regulator    {format_value(reg) if reg else 'n/a'}",
            f"lower bound  {self.order_lower_bound}",
            f"conclusion   {self.conclusion}",
        ]
        lines += [f"note         {n}" for n in self.notes]
        if self.ledger.steps:
            lines.append("steps")
            lines += [f"  {i:3d}  {st.describe()}" for i, st in enumerate(self.ledger.steps, 1)]
        return "\n".join(lines)


def regulator_lower_bound(S: FormalSum, k: int | None = None) -> tuple[RegulatorValue, int]:
    """The regulator of S and the order it forces (1 when it says nothing)."""
    value, _ = aj_sum_robust(S, k)
    rec = recognize_pi2(value)
    return value, rec.implied_order or 1


def conclude(state: LedgerState, target: FormalSum, name: str = "certificate",
             embedding: int | None = None, notes: Sequence[str] = ()) -> TorsionCertificate:
    state = replay(state)
    if normalize_quotient(target) != normalize_quotient(state.initial):
        raise LedgerError("the ledger was started from a different sum")
    if state.current:
        first = state.current.items()[0]
        raise IncompleteDerivation(f"{len(state.current)} terms remain, e.g. {first[1]}*{describe(first[0])}",
                                   witness=first)
    m = abs(state.multiplier)
    value, lower = regulator_lower_bound(target, embedding)
    if not (value.scaled(m)).is_zero(1e-6):
        raise LedgerError(f"{m} times the regulator {format_value(value)} is not in 4 pi^2 Z", witness=value)
    if m % lower:
        raise LedgerError(f"regulator order {lower} does not divide the ledger bound {m}", witness=(lower, m))
    conclusion = f"exact order {m}" if lower == m else f"order between {lower} and {m}"
    return TorsionCertificate(name, target, state.field, m, state, value, lower, conclusion, tuple(notes))


# ---------------------------------------------------------------------------
# Fitting integer weights


def _axpy(a: dict, b: dict, k) -> dict:
    out = dict(a)
    for key, v in b.items():
        nv = out.get(key, 0) + k * v
        if nv:
            out[key] = nv
        else:
            out.pop(key, None)
    return out


def _echelon(rows: Sequence[dict], order: dict) -> list[tuple[object, dict, dict]]:
    """Integer row echelon form; each basis row carries its combination of input rows."""
    work = [(dict(r), {i: 1}) for i, r in enumerate(rows) if r]
    cols = sorted({c for r, _ in work for c in r}, key=order.__getitem__)
    basis = []
    for c in cols:
        active = [w for w in work if w[0].get(c)]
        if not active:
            continue
        rest = [w for w in work if not w[0].get(c)]
        while len(active) > 1:
            active.sort(key=lambda w: abs(w[0][c]))
            piv, new = active[0], [active[0]]
            for r, t in active[1:]:
                q = r[c] // piv[0][c]
                r2, t2 = _axpy(r, piv[0], -q), _axpy(t, piv[1], -q)
                if r2.get(c):
                    new.append((r2, t2))
                elif r2:
                    rest.append((r2, t2))
            active = new
        r, t = active[0]
        if r[c] < 0:
            r, t = {k: -v for k, v in r.items()}, {k: -v for k, v in t.items()}
        basis.append((c, r, t))
        work = rest
    return basis


def integer_relation(rows: Sequence[dict], target: dict) -> tuple[int, dict[int, int]] | None:
    """Least m > 0 with m * target = sum w_i rows_i over the integers, with the weights.

    Rows and target map hashable keys to integers.  Returns None when the
    target is not even in the rational span.
    """
    order = {}
    for r in list(rows) + [target]:
        for k in r:
            order.setdefault(k, len(order))
    basis = _echelon(rows, order)
    u = {k: Fraction(v) for k, v in target.items()}
    coeffs = []
    for c, r, t in basis:
        x = u.get(c)
        if x:
            coef = x / r[c]
            coeffs.append((coef, t))
            u = _axpy(u, r, -coef)
    if any(u.values()):
        return None
    m = 1
    for coef, _ in coeffs:
        m = lcm(m, coef.denominator)
    w: dict = {}
    for coef, t in coeffs:
        w = _axpy(w, t, int(coef * m))
    return m, {i: int(v) for i, v in w.items()}


def _vector(S: FormalSum) -> dict:
    return dict(normalize_quotient(S).items())


def _prune(vectors: list[dict], tvec: dict, chosen: list[int], m: int) -> list[int]:
    keep = list(chosen)
    for i in sorted(chosen, reverse=True):
        trial = [j for j in keep if j != i]
        res = integer_relation([vectors[j] for j in trial], tvec)
        if res and res[0] == m:
            keep = trial
    return keep


def fit_ledger(target: FormalSum, identities: Sequence[VerifiedIdentity],
               imports: Sequence[TorsionCertificate] = (), prune: bool = True) -> LedgerState:
    """Build a concluding ledger for ``target`` from the given identities.

    Integer weights are found by exact lattice reduction; the cited
    identities are supplied by the caller.  Torsion identities enter as
    kill_torsion steps and imported certificates as substitutions.
    """
    ctx = next(iter(target.terms())).context
    ids = [I for I in identities if verify(I) is Status.VERIFIED and normalize_quotient(I.claim)]
    rows = [_vector(I.claim) for I in ids]
    rels = []
    for cert in imports:
        rel = cert.cycle * cert.order_upper_bound
        if cert.field.conductor != ctx.conductor:
            rel = transport(rel, ctx)
        rels.append(rel)
    rows += [_vector(r) for r in rels]
    tvec = _vector(target)
    res = integer_relation(rows, tvec)
    if res is None:
        raise IncompleteDerivation("the target is not in the span of the supplied identities")
    m, w = res
    chosen = sorted(w)
    if prune:
        chosen = _prune(rows, tvec, chosen, m)
        m, w = integer_relation([rows[j] for j in chosen], tvec)
        w = {chosen[i]: v for i, v in w.items()}
    state = scale(start(target), m)
    kills = []
    for i in sorted(w):
        if i >= len(ids):
            continue
        I = ids[i]
        if I.name == "torsion_right" and len(normalize_quotient(I.claim)) == 1:
            kills.append(I)
            continue
        state = apply_identity(state, I, -w[i])
    for j, cert in enumerate(imports):
        if len(ids) + j in w:
            state = substitute_equal(state, cert, -w[len(ids) + j])
    for I in kills:
        (term, _), = normalize_quotient(I.claim).items()
        d, _ = torsion_justification(term)
        state = kill_torsion(state, term, d)
    return state


# ---------------------------------------------------------------------------
# Presets


PRESETS = ("Q", "Qi", "Qzeta3", "Qzeta5", "Qzeta8", "Qsqrt5", "Qsqrt2")


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise InvalidArgument(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("chowcalc").joinpath("presets", f"{name}.json").read_text()
    return json.loads(text)


def _step_from_record(state: LedgerState, rec: dict) -> LedgerState:
    kind = rec["kind"]
    if kind == StepKind.SCALE.value:
        return scale(state, rec["m"])
    if kind == StepKind.APPLY.value:
        return apply_identity(state, from_recipe(rec["identity"], state.field), rec["weight"])
    if kind == StepKind.KILL.value:
        return kill_torsion(state, term_from_record(rec["term"]), rec["order"])
    if kind == StepKind.SUBSTITUTE.value:
        preset, _, label = rec["certificate"].partition("/")
        return substitute_equal(state, preset_certificate(preset, label), rec["weight"])
    raise LedgerError(f"unknown step kind {kind!r}")


def run_ledger(entry: dict, preset: str) -> TorsionCertificate:
    ctx = field_create(int(entry["conductor"]))
    target = parse_sum(entry["target"], ctx)
    state = start(target)
    for i, rec in enumerate(entry["steps"], 1):
        try:
            state = _step_from_record(state, rec)
        except ChowError as exc:
            cause = getattr(exc, "witness", None)
            raise LedgerError(f"step {i} ({rec['kind']}) of {preset}/{entry['label']} failed: {exc}",
                              witness=(i, cause if cause is not None else str(exc))) from exc
    return conclude(state, target, f"{preset}/{entry['label']}", entry.get("embedding"), entry.get("notes", ()))


_ACTIVE: set = set()


@lru_cache(maxsize=None)
def preset_certificate(preset: str, label: str) -> TorsionCertificate:
    key = (preset, label)
    if key in _ACTIVE:
        raise LedgerError(f"circular certificate import at {preset}/{label}")
    _ACTIVE.add(key)
    try:
        data = load_preset(preset)
        for entry in data.get("certificates", ()):
            if entry["label"] == label:
                return run_ledger(entry, preset)
        raise InvalidArgument(f"preset {preset} has no certificate {label!r}")
    finally:
        _ACTIVE.discard(key)


@dataclass
class PresetReport:
    name: str
    certificates: list[TorsionCertificate] = dc_field(default_factory=list)
    findings: list[dict] = dc_field(default_factory=list)
    ok: bool = True

    def to_record(self) -> dict:
        return {"preset": self.name, "ok": self.ok,
                "certificates": [c.to_record() for c in self.certificates], "findings": self.findings}

    def render(self) -> str:
        parts = [f"preset {self.name}: {'ok' if self.ok else 'FAILED'}"]
        parts += [c.render() for c in self.certificates]
        for f in self.findings:
            parts.append(f"{f['kind']:<12} {f['text']}")
        return "\n\n".join(parts[:1 + len(self.certificates)]) + (
            "\n\n" + "\n".join(parts[1 + len(self.certificates):]) if self.findings else "")


def _combination(data: dict, entry: dict, certs: dict) -> dict:
    ctx = field_create(int(entry["conductor"]))
    S = parse_sum(entry["sum"], ctx)
    upper = 1
    for label in entry["parts"]:
        upper = lcm(upper, certs[label].order_upper_bound)
    value, lower = regulator_lower_bound(S, entry.get("embedding"))
    ok = lower == upper and value.scaled(upper).is_zero(1e-6)
    return {"kind": "generator", "ok": ok, "order": upper if ok else None,
            "text": f"{describe_sum(S)} over {ctx}: order {upper} (ledger lcm), regulator {format_value(value)}"
                    f" forces {lower}" + ("" if ok else "  [bounds disagree]")}


def _nontorsion(entry: dict) -> dict:
    ctx = field_create(int(entry["conductor"]))
    S = parse_sum(entry["sum"], ctx)
    vals = aj_all_embeddings(S)
    ims = [v.value.imag for v in vals]
    ok = any(abs(x) > 1e-3 for x in ims)
    return {"kind": "nontorsion", "ok": ok,
            "text": f"{describe_sum(S)} over {ctx}: imaginary regulator parts "
                    + ", ".join(f"{x:.9f}" for x in ims)}


def _regulator_only(entry: dict) -> dict:
    ctx = field_create(int(entry["conductor"]))
    S = parse_sum(entry["sum"], ctx)
    value, lower = regulator_lower_bound(S, entry.get("embedding"))
    expected = Fraction(entry["expected"])
    rec = recognize_pi2(value)
    ok = rec.q == expected % 4 and lower >= int(entry["order_at_least"])
    text = (f"{describe_sum(S)} over {ctx}: regulator {format_value(value)}, order at least {lower}"
            f" (non-exact; expected {expected}*pi^2)")
    if "literature_order" in entry:
        text += f"; literature order {entry['literature_order']} is reported, not certified"
    return {"kind": "regulator", "ok": ok, "order_lower_bound": lower, "text": text}


def certify(name: str) -> PresetReport:
    """Replay a preset: its ledgers, generator claims and regulator-only checks."""
    data = load_preset(name)
    report = PresetReport(name)
    certs = {}
    for entry in data.get("certificates", ()):
        cert = preset_certificate(name, entry["label"])
        certs[entry["label"]] = cert
        report.certificates.append(cert)
        if entry.get("require_exact", True) and not cert.exact:
            report.ok = False
        if "expect_order" in entry and cert.order_upper_bound != entry["expect_order"]:
            report.ok = False
    for entry in data.get("generators", ()):
        f = _combination(data, entry, certs)
        report.findings.append(f)
        report.ok &= f["ok"]
    for entry in data.get("nontorsion", ()):
        f = _nontorsion(entry)
        report.findings.append(f)
        report.ok &= f["ok"]
    for entry in data.get("regulator_only", ()):
        f = _regulator_only(entry)
        report.findings.append(f)
        report.ok &= f["ok"]
    for note in data.get("notes", ()):
        report.findings.append({"kind": "note", "ok": True, "text": note})
    return report
