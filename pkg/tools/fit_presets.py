"""Regenerate the shipped preset ledgers under src/chowcalc/presets.

Each ledger starts from the identities the derivation cites (distribution,
inversion), closes them under the lower-order lemmas, and lets
ledger.fit_ledger find integer weights.  The output is plain data; certify
replays it without any search.

    python3 tools/fit_presets.py [preset ...]
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from chowcalc.cycles import normalize_quotient, parse_sum, recognize
from chowcalc.ledger import fit_ledger, preset_certificate, torsion_middle
from chowcalc.numfield import field_create, multiplicative_order
from chowcalc.relations import (
    Status,
    _frac,
    _lower_order_helpers,
    _X,
    distribution,
    inversion,
    product_rule,
    torsion_right,
    verify,
)

OUT = Path(__file__).resolve().parent.parent / "src" / "chowcalc" / "presets"


def _ok(c):
    return not (c.is_zero() or c.is_one())


def closure(ctx, base, rounds=2):
    """Cited identities plus Z-lemmas, product rules with constants and torsion kills."""
    out, keys = [], set()

    def add(make, *args):
        try:
            ident = make(*args)
        except Exception:
            return
        if ident.key() not in keys and verify(ident) is Status.VERIFIED:
            keys.add(ident.key())
            out.append(ident)

    for ident in base:
        add(lambda i=ident: i)
    x, xi = _X(ctx), _frac(ctx, [], [0])
    for _ in range(rounds):
        for ident in _lower_order_helpers([i.claim for i in out]):
            add(lambda i=ident: i)
        terms = {t for i in out for t, _ in normalize_quotient(i.claim).items()}
        zs, mons = {}, {}
        for t in terms:
            r = recognize(t)
            if r is None:
                continue
            if r[0] == "M":
                _, p, q, c = r
                if not (p.is_zero() or q.is_zero()) and _ok(c):
                    mons.setdefault((p, q), set()).add(c)
                    if multiplicative_order(c):
                        add(torsion_right, _frac(ctx, [p], [q]), x, c)
            elif r[0] == "Z":
                _, a, c = r
                zs.setdefault(a, set()).add(c)
                zs.setdefault(c, set()).add(a)
        for (p, q), cs in mons.items():
            cs = sorted(cs, key=lambda v: v.key())
            f = _frac(ctx, [p], [q])
            for k, c in enumerate(cs):
                for c2 in cs[k + 1:]:
                    if not (c2 / c).is_one():
                        add(product_rule, "right", c, c2 / c, f, x)
        for a, cs in zs.items():
            if not _ok(a):
                continue
            f = _frac(ctx, [a], [1])
            cs = sorted((c for c in cs if _ok(c)), key=lambda v: v.key())
            for k, c in enumerate(cs):
                add(product_rule, "left", f, a.inv(), c, xi)
                add(product_rule, "right", x, xi, f, c)
                d = multiplicative_order(c)
                if d and d > 1:
                    add(torsion_middle, f, c, x)
                    for m in range(1, d):
                        add(product_rule, "middle", c ** m, c, f, x)
                for c2 in cs[k + 1:]:
                    if not (c2 / c).is_one():
                        add(product_rule, "middle", c, c2 / c, f, x)
    return out


def ledger_spec(label, conductor, target_text, base, imports=(), rounds=2, embedding=1, notes=(), expect=None):
    ctx = field_create(conductor)
    target = parse_sum(target_text, ctx)
    t0 = time.time()
    pool = closure(ctx, base(ctx), rounds)
    certs = [preset_certificate(*imp.split("/")) for imp in imports]
    state = fit_ledger(target, pool, certs)
    print(f"  {label}: pool {len(pool)}, m = {state.multiplier}, {len(state.steps)} steps, "
          f"{time.time() - t0:.1f}s", file=sys.stderr)
    steps = [st.to_record() for st in state.steps]
    for st, rec in zip(state.steps, steps):
        if rec["kind"] == "substitute_equal":
            rec["certificate"] = st.imported.name
    entry = {"label": label, "conductor": conductor, "target": target_text, "embedding": embedding,
            "steps": steps, "notes": list(notes)}
    if expect:
        entry["expect_order"] = expect
    return entry


def q_base(ctx):
    i = ctx.root_of_unity(4)
    return [distribution(ctx.one, 2), inversion("b_eq_minus_a", i, None)]


def build_Q():
    return {
        "name": "Q",
        "statement": "CH^2(Q,3) = Z/24 is generated by C(1)",
        "certificates": [ledger_spec(
            "C1", 4, "C(1)", q_base, expect=24,
            notes=["derived over Q(i); 24 C(1) = 0 descends to Q because K3ind(Q) -> K3ind(Q(i)) is injective"])],
        "annotations": {"w2": 24, "literature_order": 24},
    }


def build_Qi():
    return {
        "name": "Qi",
        "statement": "torsion of CH^2(Q(i),3) is generated by C(1); 4 C(i) is not torsion",
        "certificates": [ledger_spec("C1", 4, "C(1)", q_base, expect=24)],
        "nontorsion": [{"conductor": 4, "sum": "4*C(g)"}],
        "annotations": {"w2": 24},
    }


def build_Qzeta3():
    def base(ctx):
        return [distribution(ctx.one, 3)]
    return {
        "name": "Qzeta3",
        "statement": "3(C(zeta3) + C(zeta3^2)) is 12-torsion and C(1) has order 24",
        "certificates": [
            ledger_spec("T", 3, "3*C(g) + 3*C(g^2)", base, imports=["Q/C1"], expect=12),
            ledger_spec("C1", 3, "C(1)", lambda ctx: [], imports=["Q/C1"], expect=24,
                        notes=["imported from Q by injectivity of K3ind under field extension"]),
        ],
        "nontorsion": [{"conductor": 3, "sum": "3*C(g)"}],
        "annotations": {"w2": 24},
    }


def build_Qzeta5():
    def base(ctx):
        z = ctx.gen()
        return [distribution(ctx.one, 5), inversion("full", z ** 3, z ** 2)]
    return {
        "name": "Qzeta5",
        "statement": "5(C(zeta5) + C(zeta5^4)) has order 60; C(1) + 5(C(zeta5) + C(zeta5^4)) has order 120",
        "certificates": [
            ledger_spec("T", 5, "5*C(g) + 5*C(g^4)", base, imports=["Q/C1"], expect=60),
            ledger_spec("C1", 5, "C(1)", lambda ctx: [], imports=["Q/C1"], expect=24,
                        notes=["imported from Q by injectivity of K3ind under field extension"]),
        ],
        "generators": [{"conductor": 5, "sum": "C(1) + 5*C(g) + 5*C(g^4)", "parts": ["T", "C1"]}],
        "annotations": {"w2": 120},
    }


def build_Qzeta8():
    def base(ctx):
        z = ctx.gen()
        return [distribution(ctx.one, 8), distribution(ctx.one, 4), inversion("full", z ** 2, z)]
    return {
        "name": "Qzeta8",
        "statement": "8(C(zeta8) + C(zeta8^7)) has order 48",
        "certificates": [ledger_spec("T", 8, "8*C(g) + 8*C(g^7)", base, imports=["Q/C1"], rounds=2, expect=48)],
        "notes": ["the regulator of 8(C(zeta8) + C(zeta8^7)) is 11/12 pi^2; only the order 48 it forces is asserted"],
        "annotations": {"w2": 48},
    }


def build_Qsqrt5():
    return {
        "name": "Qsqrt5",
        "statement": "C((sqrt5 - 1)/2) - C((sqrt5 - 1)^2/4) has order at least 120",
        "regulator_only": [{"conductor": 5, "sum": "C(g + g^4) - C((g + g^4)^2)", "embedding": 1,
                            "expected": "1/30", "order_at_least": 120, "literature_order": 120}],
    }


def build_Qsqrt2():
    return {
        "name": "Qsqrt2",
        "statement": "2C((sqrt2 - 1)^4) - 12C((sqrt2 - 1)^2) + 8C(sqrt2 - 1) has regulator pi^2/6",
        "regulator_only": [{"conductor": 8, "sum": "2*C((g + g^7 - 1)^4) - 12*C((g + g^7 - 1)^2) + 8*C(g + g^7 - 1)",
                            "embedding": 1, "expected": "1/6", "order_at_least": 24, "literature_order": 48}],
    }


BUILDERS = {name[6:]: fn for name, fn in globals().items() if name.startswith("build_")}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("presets", nargs="*", default=list(BUILDERS))
    args = ap.parse_args(argv)
    OUT.mkdir(parents=True, exist_ok=True)
    for name in args.presets:
        print(name, file=sys.stderr)
        data = BUILDERS[name]()
        (OUT / f"{name}.json").write_text(json.dumps(data, indent=1) + "\n")
        preset_certificate.cache_clear()


if __name__ == "__main__":
    main()
