"""Regenerate src/chowcalc/corpus/identities.json.

Every entry is a constructor recipe plus the claim it is expected to produce,
so the test suite can replay the corpus and catch drift in generated claims.

    python3 tools/build_corpus.py
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

from chowcalc.cycles import sum_to_records
from chowcalc.numfield import field_create
from chowcalc.ratfunc import parse_coordinate
from chowcalc.relations import (
    c_tilde_identity,
    distribution,
    five_term,
    inversion,
    monodromy_inverse,
    permute,
    product_rule,
    recipe,
    reciprocal,
    swap_right_const,
    torsion_right,
    two_term,
    verify,
    z_quotient,
    z_split,
    z_symmetry,
)

OUT = Path(__file__).resolve().parent.parent / "src" / "chowcalc" / "corpus" / "identities.json"


def entries():
    Q, Q3, Q4, Q5, Q8 = (field_create(n) for n in (1, 3, 4, 5, 8))

    def fr(text, ctx=Q):
        return parse_coordinate(text, ctx)

    g5, i, g8 = Q5.gen(), Q4.gen(), Q8.gen()
    q = Q.one
    yield "product rule, right slot", product_rule("right", q * 2, q * 3, fr("(x - 2)/(x - 1)"), fr("x"))
    yield "product rule, left slot", product_rule("left", fr("(x - 3)/(x - 4)"), fr("x/(x - 6)"), fr("1 - x"), fr("x"))
    yield "product rule, middle slot", product_rule("middle", fr("x - 3"), fr("x + 2"), fr("(x - 2)/(x - 5)"), fr("(x + 1)/(x - 7)"))
    yield "product rule, left slot with reciprocal factor", product_rule("left", fr("x - 3"), fr("1/(x - 3)"), fr("(x - 2)/(x - 5)"), fr("(x + 1)/(x - 7)"))
    yield "torsion of a 5th root of unity in the last slot", torsion_right(fr("(x - 2)/(x - 3)", Q5), fr("x", Q5), g5)
    yield "torsion of i in the last slot", torsion_right(fr("(x - 1)/(x - g)", Q4), fr("x", Q4), i)
    yield "constant swap in the last two slots", swap_right_const(fr("1 - 2/x"), fr("1 - x"), q * 3)
    yield "reciprocal of the first slot", reciprocal(fr("(x - 2)/(x - 5)"), q * 3, fr("(x + 1)/(x - 7)"))
    yield "Z symmetry", z_symmetry(q * 2, q * 3)
    yield "Z symmetry over Q(zeta5)", z_symmetry(g5, g5 + 2)
    yield "Z quotient", z_quotient(q * 2, q * 5, q * 3)
    yield "monodromy split into Z terms", z_split(q * 2, q * 5, q * 3)
    yield "monodromy split into Z terms over Q(i)", z_split(i, -i, Q4.one * 2)
    yield "monodromy inverse", monodromy_inverse(q * 2, q * 5, q * 3)
    yield "swap23 on [1 - a/x, x, 1 - x]", permute("swap23", fr("1 - 3/x"), fr("x"), fr("1 - x"))
    yield "swap12 on a generic triple", permute("swap12", fr("(x - 2)/(x - 5)"), fr("(x + 1)/(x - 3)"), fr("(x - 4)/(x + 6)"))
    yield "swap13 on a generic triple", permute("swap13", fr("(x - 2)/(x - 5)"), fr("(x + 1)/(x - 3)"), fr("(x - 4)/(x + 6)"))
    yield "two-term at a = -1", two_term(-q)
    yield "two-term at a = 1/2", two_term(q / 2)
    yield "two-term at a = zeta5", two_term(g5)
    yield "C tilde at a = 3", c_tilde_identity(q * 3)
    yield "distribution n = 2, a = 1", distribution(q, 2)
    yield "distribution n = 2, a = 3", distribution(q * 3, 2)
    yield "distribution n = 3, a = 1", distribution(Q3.one, 3)
    yield "distribution n = 3, a = 2", distribution(Q3.one * 2, 3)
    yield "distribution n = 5, a = 1", distribution(Q5.one, 5)
    yield "distribution n = 8, a = 1", distribution(Q8.one, 8)
    yield "distribution n = 4, a = 1 over Q(zeta8)", distribution(Q8.one, 4)
    yield "five-term at (2, 3)", five_term("full", q * 2, q * 3)
    yield "five-term at (zeta5^3, zeta5^2)", five_term("full", g5 ** 3, g5 ** 2)
    yield "even five-term at (2, 3)", five_term("even", q * 2, q * 3)
    yield "inversion at (2, 3)", inversion("full", q * 2, q * 3)
    yield "inversion at (zeta5^3, zeta5^2)", inversion("full", g5 ** 3, g5 ** 2)
    yield "inversion at (zeta8^2, zeta8)", inversion("full", g8 ** 2, g8)
    yield "inversion with b = -a at a = i", inversion("b_eq_minus_a", i, None)
    yield "even inversion at (2, 3)", inversion("even", q * 2, q * 3)


def main():
    OUT.parent.mkdir(parents=True, exist_ok=True)
    out = []
    for label, ident in entries():
        t0 = time.time()
        status = verify(ident)
        print(f"{status.value:10s} {time.time() - t0:6.2f}s  {label}", file=sys.stderr)
        out.append({"label": label, "recipe": recipe(ident), "claim": sum_to_records(ident.claim)})
    OUT.write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
