import copy

import pytest

from chowcalc.cycles import parse_sum
from chowcalc.errors import ChowError, IncompleteDerivation, LedgerError
from chowcalc.ledger import (
    PRESETS,
    apply_identity,
    certify,
    conclude,
    integer_relation,
    kill_torsion,
    load_preset,
    run_ledger,
    scale,
    start,
    transport,
)
from chowcalc.numfield import field_create
from chowcalc.relations import distribution, two_term

Q = field_create(1)
Q4 = field_create(4)


def test_integer_relation_lcm_of_denominators():
    rows = [{"a": 2, "b": 0}, {"a": 0, "b": 3}]
    assert integer_relation(rows, {"a": 1, "b": 1}) == (6, {0: 3, 1: 2})


def test_integer_relation_outside_span():
    assert integer_relation([{"a": 1}], {"b": 1}) is None


def test_integer_relation_weights_reproduce_target():
    rows = [{"a": 4, "b": 2, "c": 0}, {"a": 0, "b": 6, "c": 3}, {"a": 1, "b": 1, "c": 1}]
    target = {"a": 5, "b": 9, "c": 4}
    m, w = integer_relation(rows, target)
    for k in target:
        assert sum(wi * rows[i].get(k, 0) for i, wi in w.items()) == m * target[k]


def test_hand_ledger_for_c1_over_q():
    # 2 C1 + 4 C(-1) = 0 and the two-term relation at -1 are not enough on their own:
    # the ledger must stop with terms left over.
    target = parse_sum("C(1)", Q)
    state = scale(start(target), 2)
    state = apply_identity(state, distribution(Q.one, 2), 1)
    with pytest.raises(IncompleteDerivation) as exc:
        conclude(state, target)
    assert exc.value.witness is not None


def test_kill_torsion_needs_divisible_coefficient():
    S = parse_sum("M(2, 3, g)", Q4)
    state = start(S)
    with pytest.raises(LedgerError):
        kill_torsion(state, next(iter(S.terms())), 4)
    state = scale(state, 4)
    state = kill_torsion(state, next(iter(S.terms())), 4)
    assert not state.current


def test_apply_requires_same_field():
    state = start(parse_sum("C(2)", Q4))
    with pytest.raises(LedgerError):
        apply_identity(state, two_term(Q.one * 2), 1)


def test_transport_rejects_irrational_terms():
    with pytest.raises(LedgerError):
        transport(parse_sum("C(g)", Q4), field_create(8))
    moved = transport(parse_sum("C(1) + Z(2, 3)", Q), Q4)
    assert moved == parse_sum("C(1) + Z(2, 3)", Q4)


def test_scale_by_zero_rejected():
    with pytest.raises(LedgerError):
        scale(start(parse_sum("C(2)", Q)), 0)


@pytest.mark.parametrize("name", PRESETS)
def test_presets_certify(name):
    report = certify(name)
    assert report.ok, report.render()


def test_q_order_24():
    cert = certify("Q").certificates[0]
    assert cert.order_upper_bound == 24 and cert.exact


def _entries():
    for name in ("Q", "Qzeta3", "Qzeta5"):
        for entry in load_preset(name).get("certificates", ()):
            yield name, entry


def _mutants(entry, rng, sample):
    steps = entry["steps"]
    idx = list(range(len(steps)))
    if len(idx) > sample:
        idx = sorted(rng.sample(idx, sample))
    for i in idx:
        dropped = copy.deepcopy(entry)
        del dropped["steps"][i]
        yield f"drop {i + 1}", dropped
        st = steps[i]
        bumped = copy.deepcopy(entry)
        if st["kind"] == "scale":
            bumped["steps"][i]["m"] += 1
        elif st["kind"] == "kill_torsion":
            bumped["steps"][i]["order"] *= 7
        else:
            bumped["steps"][i]["weight"] += 1
        yield f"corrupt {i + 1}", bumped


@pytest.mark.parametrize("name,entry", list(_entries()), ids=[f"{n}/{s['label']}" for n, s in _entries()])
def test_ledger_mutations_fail(name, entry, rng):
    run_ledger(entry, name)
    for label, mutant in _mutants(entry, rng, sample=4):
        with pytest.raises(ChowError):
            run_ledger(mutant, name)
