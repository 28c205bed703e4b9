"""Command-line interface: parse, boundary, admissible, verify, certify, regulator.

Exit codes: 0 success, 2 input error, 3 unsupported or inadmissible input,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction

from .cycles import (
    CURVES,
    CurveTerm,
    FormalSum,
    admissible_curve,
    boundary,
    classify,
    describe_sum,
    parse_sum,
    parse_term,
    sum_from_records,
    sum_to_records,
)
from .errors import (
    ChowError,
    DegeneratePosition,
    InadmissibleError,
    InvalidArgument,
    InvalidParameter,
    LedgerError,
    ParseError,
    UnsupportedShape,
    VerificationError,
)
from .ledger import PRESETS, certify
from .numfield import field_create, parse_element
from .ratfunc import parse_coordinate, point_str
from .regulator import aj_all_embeddings, aj_sum_robust, format_value, recognize_pi2
from .relations import CONSTRUCTORS, Status, verify

OK, INPUT_ERROR, UNSUPPORTED, FAILED = 0, 2, 3, 4


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _context(args):
    if args.conductor < 1:
        raise _Exit(INPUT_ERROR, "conductor must be at least 1")
    return field_create(args.conductor, args.embedding)


def _read_sum(args, ctx) -> FormalSum:
    text = args.term or args.sum
    if args.file:
        with open(args.file) as fh:
            text = fh.read()
    if text is None:
        raise _Exit(INPUT_ERROR, "give --term, --sum or --file")
    stripped = text.lstrip()
    if stripped.startswith("[{") or stripped.startswith("{"):
        records = json.loads(text)
        if isinstance(records, dict):
            records = records.get("sum", records.get("cycle", []))
        return sum_from_records(records)
    if args.term:
        term = parse_term(text, ctx)
        if isinstance(term, CurveTerm):
            ok = admissible_curve(term)
            if not ok:
                raise InadmissibleError("term is not admissible",
                                        witness=(point_str(ok.point), [i + 1 for i in ok.indices]))
        return FormalSum.of(term)
    return parse_sum(text, ctx)


def _emit(args, human: str, record) -> None:
    if args.format == "machine":
        print(json.dumps(record, sort_keys=True))
    else:
        print(human)


def _check_admissible(S: FormalSum) -> None:
    if S.grading != CURVES:
        return
    for t, _ in S.items():
        ok = admissible_curve(t)
        if not ok:
            raise InadmissibleError(f"{t} is not admissible",
                                    witness=(point_str(ok.point), [i + 1 for i in ok.indices]))


def cmd_parse(args) -> int:
    ctx = _context(args)
    S = _read_sum(args, ctx)
    _emit(args, str(S) if S else "0", sum_to_records(S))
    return OK


def cmd_boundary(args) -> int:
    ctx = _context(args)
    S = _read_sum(args, ctx)
    _check_admissible(S)
    B = boundary(S)
    audit = [{"term": str(t), "class": str(classify(t)), "coeff": c} for t, c in S.items()]
    human = str(B) if B else "0"
    if args.verbose:
        human += "\n" + "\n".join(f"  {a['coeff']:+d} {a['term']}  [{a['class']}]" for a in audit)
    _emit(args, human, {"boundary": sum_to_records(B), "audit": audit})
    return OK


def cmd_admissible(args) -> int:
    ctx = _context(args)
    text = args.term or args.sum
    S = parse_sum(text, ctx) if args.sum else FormalSum.of(parse_term(text, ctx))
    rows = []
    bad = False
    for t, _ in S.items():
        ok = admissible_curve(t)
        bad |= not ok
        rows.append({"term": str(t), "admissible": ok.ok, "class": str(classify(t)),
                     "witness": None if ok else {"point": point_str(ok.point),
                                                 "coordinates": [i + 1 for i in ok.indices]}})
    human = "\n".join(f"{r['term']}: {'admissible' if r['admissible'] else 'inadmissible'} [{r['class']}]"
                      + (f" at {r['witness']['point']} in coordinates {r['witness']['coordinates']}"
                         if r["witness"] else "") for r in rows)
    _emit(args, human, rows)
    return UNSUPPORTED if bad else OK


_PARAM_KINDS = {"a": "el", "b": "el", "c": "el", "zeta": "el", "n": "int", "weight": "int",
                "f": "fr", "g": "fr", "h": "fr", "h1": "fr", "h2": "fr"}


def _identity_kwargs(args, ctx) -> dict:
    kwargs = {}
    for key, kind in _PARAM_KINDS.items():
        text = getattr(args, key)
        if text is None:
            continue
        if kind == "int":
            kwargs[key] = int(text)
        elif kind == "el":
            kwargs[key] = parse_element(text, ctx)
        else:
            kwargs[key] = parse_coordinate(text, ctx)
    if args.variant:
        kwargs["slot" if args.identity == "product_rule" else "variant"] = args.variant
    elif args.identity in ("five_term", "inversion"):
        kwargs["variant"] = "full"
    if args.identity == "inversion" and kwargs.get("variant") == "b_eq_minus_a":
        kwargs.setdefault("b", None)
    return kwargs


def _random_kwargs(name: str, rng: random.Random, ctx) -> dict:
    def el():
        while True:
            v = parse_element(str(Fraction(rng.randint(-30, 30), rng.randint(1, 12))), ctx)
            if not (v.is_zero() or v.is_one()):
                return v
    if name in ("five_term", "inversion"):
        return {"variant": "full", "a": el(), "b": el()}
    if name in ("two_term", "c_tilde"):
        return {"a": el()}
    if name in ("z_symmetry",):
        return {"a": el(), "c": el()}
    if name in ("z_split", "z_quotient"):
        return {"a": el(), "b": el(), "c": el()}
    raise _Exit(INPUT_ERROR, f"--random is not available for {name}")


def _verify_one(fn, kwargs) -> tuple[int, dict, str]:
    ident = fn(**kwargs)
    status = verify(ident)
    rec = ident.to_record()
    human = f"{ident.name} {', '.join(f'{k}={v}' for k, v in ident.params.items())}\n" \
            f"  claim: {describe_sum(ident.claim) if ident.claim else '0'} = 0\n  status: {status.value}"
    if status is not Status.VERIFIED:
        human += f"\n  witness: {ident.witness}"
        rec["witness"] = str(ident.witness)
    return (OK if status is Status.VERIFIED else FAILED), rec, human


def cmd_verify(args) -> int:
    ctx = _context(args)
    if args.identity not in CONSTRUCTORS:
        raise _Exit(INPUT_ERROR, f"unknown identity {args.identity!r}; choose from {', '.join(sorted(CONSTRUCTORS))}")
    fn = CONSTRUCTORS[args.identity]
    if args.random:
        rng = random.Random(args.seed)
        code, recs, texts = OK, [], []
        for _ in range(args.random):
            while True:
                try:
                    c, rec, human = _verify_one(fn, _random_kwargs(args.identity, rng, ctx))
                    break
                except InvalidParameter:
                    continue
            code = max(code, c)
            recs.append(rec)
            texts.append(human)
        _emit(args, "\n".join(texts), recs)
        return code
    code, rec, human = _verify_one(fn, _identity_kwargs(args, ctx))
    _emit(args, human, rec)
    return code


def cmd_certify(args) -> int:
    names = list(PRESETS) if args.preset == "all" else [args.preset]
    code = OK
    records, texts = [], []
    for name in names:
        try:
            report = certify(name)
        except (LedgerError, VerificationError) as exc:
            raise _Exit(FAILED, str(exc)) from exc
        records.append(report.to_record())
        texts.append(report.render())
        if not report.ok:
            code = FAILED
    _emit(args, "\n\n".join(texts), records if len(records) > 1 else records[0])
    return code


def cmd_regulator(args) -> int:
    ctx = _context(args)
    S = _read_sum(args, ctx)
    if args.all_embeddings:
        values = aj_all_embeddings(S)
    else:
        values = [aj_sum_robust(S, args.embedding)[0]]
    lines, recs = [], []
    for v in values:
        r = recognize_pi2(v)
        text = format_value(v)
        if len(values) > 1:
            text = f"embedding {v.embedding_index}: {text}"
        lines.append(text)
        rec = v.to_record()
        rec["implied_order"] = r.implied_order
        recs.append(rec)
    _emit(args, "\n".join(lines), recs if len(recs) > 1 else recs[0])
    return OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--conductor", type=int, default=1, help="work over Q(zeta_n); g names zeta_n")
    common.add_argument("--embedding", type=int, default=1, help="embedding index k: g -> exp(2 pi i k/n)")
    common.add_argument("--format", choices=("human", "machine"), default="human")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized draws")

    source = argparse.ArgumentParser(add_help=False)
    source.add_argument("--term")
    source.add_argument("--sum")
    source.add_argument("--file")

    ap = argparse.ArgumentParser(prog="chowcalc", description="Totaro cycles in CH^2(F, 3)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common, source], help="parse and print a sum canonically")
    p.set_defaults(run=cmd_parse)

    p = sub.add_parser("boundary", parents=[common, source], help="Bloch boundary of a curve sum")
    p.add_argument("-v", "--verbose", action="store_true", help="list each term with its class")
    p.set_defaults(run=cmd_boundary)

    p = sub.add_parser("admissible", parents=[common], help="check admissibility term by term")
    p.add_argument("--term")
    p.add_argument("--sum")
    p.set_defaults(run=cmd_admissible)

    p = sub.add_parser("verify", parents=[common], help="build and replay a named identity")
    p.add_argument("identity")
    p.add_argument("--variant")
    for key in _PARAM_KINDS:
        p.add_argument(f"--{key}")
    p.add_argument("--random", type=int, default=0, help="verify this many random instances instead")
    p.set_defaults(run=cmd_verify)

    p = sub.add_parser("certify", parents=[common], help="replay a torsion certificate preset")
    p.add_argument("preset", choices=PRESETS + ("all",))
    p.set_defaults(run=cmd_certify)

    p = sub.add_parser("regulator", parents=[common, source], help="Abel-Jacobi value mod 4 pi^2")
    p.add_argument("--all-embeddings", action="store_true")
    p.set_defaults(run=cmd_regulator)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code else OK
    try:
        return args.run(args)
    except _Exit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except InvalidParameter as exc:
        print(f"invalid parameter: {exc} (requires {exc.constraint})", file=sys.stderr)
        return INPUT_ERROR
    except InadmissibleError as exc:
        print(f"inadmissible: {exc}; witness {exc.witness}", file=sys.stderr)
        return UNSUPPORTED
    except UnsupportedShape as exc:
        print(f"unsupported: {exc}; rewrite the sum with `chowcalc verify` identities first", file=sys.stderr)
        return UNSUPPORTED
    except DegeneratePosition as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return UNSUPPORTED
    except (LedgerError, VerificationError) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return FAILED
    except (InvalidArgument, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except ChowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return UNSUPPORTED


if __name__ == "__main__":
    sys.exit(main())
