import json
from collections import Counter

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from bbiprover.formula import Atom, MEmp, parse
from bbiprover.kernel import (EPS, Derivation, LabelSupply, Rel, RuleError, Sequent, check, dumps,
                              fresh_label, from_json, loads, rule_premises, substitute,
                              substitute_derivation, to_json, weaken)
from helpers import corpus, paths, unit_example

p = Atom("p")
CORPUS = corpus()


def test_substitute_examples():
    s = Sequent((Rel(EPS, "a", "a"),), (("a", p),), (("a", p),))
    assert substitute(s, {"a": "b"}) == Sequent((Rel(EPS, "b", "b"),), (("b", p),), (("b", p),))
    assert substitute(Sequent(lhs=(("a", MEmp()),)), {"a": EPS}) == Sequent(lhs=((EPS, MEmp()),))
    with pytest.raises(ValueError):
        substitute(s, {EPS: "a"})


def test_substitute_is_simultaneous():
    s = Sequent((Rel("a", "b", "c"),))
    assert substitute(s, {"a": "b", "b": "a"}) == Sequent((Rel("b", "a", "c"),))


def test_sequents_compare_as_multisets():
    one = Sequent((Rel("a", "b", "c"), Rel("b", "a", "c")), (("a", p),))
    two = Sequent((Rel("b", "a", "c"), Rel("a", "b", "c")), (("a", p),))
    assert one == two and hash(one) == hash(two)
    assert one != one.add(lhs=[("a", p)])


def test_star_left_schema():
    s = Sequent(lhs=(("z", parse("A * B")),), rhs=(("z", p),))
    (prem,) = rule_premises("starL", s, {"left": 0, "fresh": ["x", "y"]})
    assert prem == Sequent((Rel("x", "y", "z"),), (("x", Atom("A")), ("y", Atom("B"))), (("z", p),))


def test_star_left_freshness():
    s = Sequent(lhs=(("z", parse("A * B")),), rhs=(("x", p),))
    with pytest.raises(RuleError):
        rule_premises("starL", s, {"left": 0, "fresh": ["x", "y"]})
    with pytest.raises(RuleError):
        rule_premises("starL", s, {"left": 0, "fresh": ["y", "y"]})


def test_unit_schema():
    s = Sequent(lhs=(("x", p),))
    (prem,) = rule_premises("U", s, {"label": "x"})
    assert prem == s.add(rels=[Rel("x", EPS, "x")])
    with pytest.raises(RuleError):
        rule_premises("U", s, {"label": "nowhere"})


def test_eq1_schema():
    s = Sequent((Rel(EPS, "w", "v"), Rel("w", "u", "t")), (("w", p),), (("v", p),))
    (prem,) = rule_premises("Eq1", s, {"rel": 0})
    assert prem == Sequent((Rel(EPS, "v", "v"), Rel("v", "u", "t")), (("v", p),), (("v", p),))
    (prem,) = rule_premises("Eq2", s, {"rel": 0})
    assert prem == Sequent((Rel(EPS, "w", "w"), Rel("w", "u", "t")), (("w", p),), (("w", p),))


def test_eq_rejects_noop_and_eps_source():
    with pytest.raises(RuleError):
        rule_premises("Eq1", Sequent((Rel(EPS, "w", "w"),)), {"rel": 0})
    with pytest.raises(RuleError):
        rule_premises("Eq1", Sequent((Rel(EPS, EPS, "w"),)), {"rel": 0})


def test_unit_right_only_at_eps():
    assert rule_premises("empR", Sequent(rhs=((EPS, MEmp()),)), {"right": 0}) == []
    with pytest.raises(RuleError):
        rule_premises("empR", Sequent(rhs=(("w", MEmp()),)), {"right": 0})


def test_missing_principal():
    with pytest.raises(RuleError):
        rule_premises("andL", Sequent(), {"left": 0})
    with pytest.raises(RuleError):
        rule_premises("andL", Sequent(lhs=(("w", p),)), {"left": 0})


def test_associativity_schema():
    s = Sequent((Rel("x", "y", "z"), Rel("u", "v", "x")))
    (prem,) = rule_premises("A", s, {"rels": [0, 1], "fresh": "w"})
    assert prem == s.add(rels=[Rel("u", "w", "z"), Rel("y", "v", "w")])
    with pytest.raises(RuleError):
        rule_premises("A", s, {"rels": [0, 1], "fresh": "u"})


def test_exchange_retains_atom():
    s = Sequent((Rel("x", "y", "z"),))
    assert rule_premises("E", s, {"rel": 0}) == [Sequent((Rel("x", "y", "z"), Rel("y", "x", "z")))]


def test_unit_example_accepted():
    d = unit_example()
    report = check(d)
    assert report.accepted and report.cuts == 0
    assert report.rules == Counter({"impR": 1, "U": 1, "E": 1, "starR": 1, "empR": 1, "id": 1})
    assert d.height == 5


def test_deleting_unit_step_rejected():
    d = unit_example()
    spliced = Derivation("impR", d.conclusion, d.params, d.premises[0].premises)
    report = check(spliced)
    assert not report.accepted and report.path == ()
    # dropping the U node together with the atom it introduced strands the E step
    e = d.at([0, 0])
    gone = Rel("a", EPS, "a")

    def strip(n):
        s = n.conclusion
        rels = tuple(r for r in s.rels if r != gone)
        params = dict(n.params)
        if "rel" in params:
            params["rel"] -= sum(1 for r in s.rels[:params["rel"]] if r == gone)
        return Derivation(n.rule, Sequent(rels, s.lhs, s.rhs), params, tuple(strip(q) for q in n.premises))

    broken = Derivation("impR", d.conclusion, d.params, (strip(e),))
    report = check(broken)
    assert not report.accepted and report.path == (0,)


def test_id_needs_same_label():
    d = Derivation("id", Sequent(lhs=(("w1", p),), rhs=(("w2", p),)), {"left": 0, "right": 0})
    assert not check(d).accepted
    ok = Derivation("id", Sequent(lhs=(("w1", p),), rhs=(("w1", p),)), {"left": 0, "right": 0})
    assert check(ok).accepted


def test_id_only_on_atoms():
    f = parse("p & q")
    d = Derivation("id", Sequent(lhs=(("w", f),), rhs=(("w", f),)), {"left": 0, "right": 0})
    assert not check(d).accepted


def test_leaves_must_be_axioms():
    d = Derivation("andL", Sequent(lhs=(("w", parse("p & q")),)), {"left": 0})
    report = check(d)
    assert not report.accepted and "premises" in report.violation


def test_free_labels_rejected():
    d = Derivation("id", Sequent(lhs=(("?x0", p),), rhs=(("?x0", p),)), {"left": 0, "right": 0})
    assert "label" in check(d).violation


def test_hand_written_unit_proof():
    d = Derivation("empR", Sequent(rhs=((EPS, MEmp()),)), {"right": 0})
    assert check(d).accepted


def _cut_proof():
    s = Sequent(lhs=(("a", p),), rhs=(("a", p),))
    first = Derivation("id", Sequent(lhs=(("a", p),), rhs=(("a", p),)), {"left": 0, "right": 0})
    second = Derivation("id", Sequent(lhs=(("a", p),), rhs=(("a", p),)), {"left": 0, "right": 0})
    return Derivation("cut", s, {"label": "a", "formula": "p", "split": {"lhs": [0]}}, (first, second))


def test_cut_only_when_allowed():
    d = _cut_proof()
    assert not check(d).accepted
    report = check(d, allow_cut=True)
    assert report.accepted and report.cuts == 1


def test_extras_must_be_enabled():
    s = Sequent((Rel("a", "b", "c"), Rel("a", "b", "d")), (("c", p),), (("c", p), ))
    prem = rule_premises("P", s, {"rels": [0, 1]})[0]
    leaf = Derivation("id", prem, {"left": 0, "right": 0})
    d = Derivation("P", s, {"rels": [0, 1]}, (leaf,))
    assert not check(d).accepted
    assert check(d, extras={"P"}).accepted


def test_expect_end_sequent():
    d = unit_example()
    assert check(d, expect=d.conclusion).accepted
    assert not check(d, expect=Sequent()).accepted


def test_fresh_label_examples():
    assert fresh_label({EPS, "a"}) == "w0"
    assert fresh_label({EPS, "a", "w0"}) == "w1"
    assert fresh_label(set()) == "w0"


def test_label_supply_never_repeats():
    supply = LabelSupply("w", avoid={"w1"})
    assert [supply(), supply(), supply({"w3"})] == ["w0", "w2", "w4"]


def test_json_round_trip():
    for _, _, d in CORPUS[:5]:
        again = loads(dumps(d))
        assert to_json(again) == to_json(d)
        assert check(again).accepted


def test_json_is_the_documented_shape():
    doc = json.loads(dumps(unit_example()))
    assert set(doc) == {"rule", "sequent", "params", "premises"}
    assert doc["sequent"] == {"rels": [], "lhs": [], "rhs": [["a", "A -> T* * A"]]}
    leaf = doc["premises"][0]["premises"][0]["premises"][0]["premises"][0]
    assert leaf["sequent"]["rels"] == [["a", "eps", "a"], ["eps", "a", "a"]]


def test_check_is_deterministic():
    for _, extras, d in CORPUS:
        first, second = check(d, extras=extras), check(from_json(to_json(d)), extras=extras)
        assert first == second and first.accepted


def test_corpus_is_cut_free():
    for _, extras, d in CORPUS:
        report = check(d, extras=extras)
        assert report.accepted and report.cuts == 0


# substitution lemma: renaming inside any subproof keeps it derivable, no taller

_sites = [(i, path) for i, (_, _, d) in enumerate(CORPUS) for path, _ in paths(d)]


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.sampled_from(_sites), st.data())
def test_substitution_lemma(site, data):
    i, path = site
    _, extras, d = CORPUS[i]
    sub = d.at(path)
    sources = sorted(sub.conclusion.labels() - {EPS})
    if not sources:
        return
    x = data.draw(st.sampled_from(sources))
    y = data.draw(st.sampled_from(sorted(sub.labels() | {EPS, "z9"})))
    renamed = substitute_derivation(sub, {x: y})
    report = check(renamed, extras=extras)
    assert report.accepted, report
    assert renamed.conclusion == substitute(sub.conclusion, {x: y})
    assert renamed.height <= sub.height


def test_substitution_rejects_eps_source():
    with pytest.raises(ValueError):
        substitute_derivation(unit_example(), {EPS: "a"})


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.sampled_from(range(len(CORPUS))), st.sampled_from(["lhs", "rhs", "rels"]))
def test_weakening(i, side):
    _, extras, d = CORPUS[i]
    fresh = fresh_label(d.labels(), prefix="k")
    extra = {"lhs": dict(lhs=[(fresh, parse("q -* r"))]),
             "rhs": dict(rhs=[(fresh, parse("q * r"))]),
             "rels": dict(rels=[Rel(fresh, fresh, fresh)])}[side]
    weak = weaken(d, **extra)
    assert check(weak, extras=extras).accepted
    assert weak.conclusion == d.conclusion.add(**extra)
    assert weak.height == d.height


def test_weakening_refuses_clashing_labels():
    _, _, d = CORPUS[0]
    inner = sorted(d.labels() - d.conclusion.labels() - {EPS})
    assert inner
    with pytest.raises(ValueError):
        weaken(d, lhs=[(inner[0], p)])
