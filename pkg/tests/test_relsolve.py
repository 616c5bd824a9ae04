from itertools import count

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bbiprover.kernel import EPS, LabelSupply, Rel
from bbiprover.relsolve import (Budget, EqGoal, RelGoal, SigmaUndefined, Tree, brute_permute, entail,
                                eq_classes, goal_witnessed, heuristic_solve, labels_of, r_entails,
                                rel_of_tree, s_apply, step_A, step_E, step_Eq, trees_of)
from helpers import has_shape, random_shape

LABELS = [EPS, "a", "b", "c", "d", "e"]
atoms_st = st.frozensets(st.builds(Rel, *[st.sampled_from(LABELS)] * 3), max_size=6)


def oracle_classes(G):
    """Merge a and b for every atom currently reading (eps,a|>b), until nothing changes."""
    labels = labels_of(G) | {EPS}
    cls = {l: frozenset({l}) for l in labels}
    changed = True
    while changed:
        changed = False
        for l, r, p in G:
            if EPS in cls[l] and cls[r] != cls[p]:
                merged = cls[r] | cls[p]
                for x in merged:
                    cls[x] = merged
                changed = True
    return set(cls.values())


# -- s_apply ----------------------------------------------------------------

def test_s_apply_examples():
    t = Rel("a", "b", "c")
    assert s_apply({t}, [step_E(t)]) == ({t, Rel("b", "a", "c")}, {})
    G = {t, Rel("d", "e", "a")}
    assert s_apply(G, []) == (frozenset(G), {})
    with pytest.raises(SigmaUndefined) as exc:
        s_apply(set(), [step_E(t)])
    assert exc.value.index == 0


def test_s_apply_names_failing_step():
    t = Rel("a", "b", "c")
    with pytest.raises(SigmaUndefined) as exc:
        s_apply({t}, [step_E(t), step_E(Rel("x", "y", "z"))])
    assert exc.value.index == 1


def test_s_apply_composes_substitutions():
    G = {Rel(EPS, "a", "b"), Rel(EPS, "b", "c")}
    sigma = [step_Eq(Rel(EPS, "a", "b"), "b")]
    atoms, theta = s_apply(G, sigma)
    assert theta == {"a": "b"}
    sigma.append(step_Eq(Rel(EPS, "b", "c"), "c"))
    atoms, theta = s_apply(G, sigma)
    assert theta == {"a": "c", "b": "c"}
    assert atoms == {Rel(EPS, "c", "c")}


def test_fresh_labels_must_be_fresh():
    G = {Rel("x", "y", "z"), Rel("u", "v", "x")}
    with pytest.raises(SigmaUndefined):
        s_apply(G, [step_A(Rel("x", "y", "z"), Rel("u", "v", "x"), "y")])


# -- equality closure -------------------------------------------------------

def test_eq_classes_examples():
    assert eq_classes({Rel(EPS, "a", "b")}).same("a", "b")
    closed = eq_classes({Rel("a", EPS, "b")})
    assert not closed.same("a", "b")
    classes = eq_classes({Rel(EPS, "a", EPS), Rel("a", "c", "d")}).classes()
    assert set(classes) == {frozenset({"a", EPS}), frozenset({"c", "d"})}


def test_eq_classes_matches_oracle_on_example():
    G = {Rel(EPS, "a", EPS), Rel("a", "c", "d")}
    assert set(eq_classes(G).classes()) == oracle_classes(G)


def test_eq_witness_replays():
    G = {Rel(EPS, "a", EPS), Rel("a", "c", "d")}
    closed = eq_classes(G)
    atoms, theta = s_apply(G, closed.steps)
    assert atoms == closed.atoms and theta == closed.subst


@settings(max_examples=400, deadline=None)
@given(atoms_st)
def test_eq_classes_agree_with_oracle(G):
    assert set(eq_classes(G).classes()) == oracle_classes(G)


@settings(max_examples=300, deadline=None)
@given(atoms_st)
def test_eq_classes_is_an_equivalence(G):
    closed = eq_classes(G)
    labels = labels_of(G) | {EPS}
    for u in labels:
        assert closed.same(u, u)
        for v in labels:
            assert closed.same(u, v) == closed.same(v, u)
            if closed.same(u, v):
                assert all(closed.same(u, w) for w in labels if closed.same(v, w))
    parts = closed.classes()
    assert sorted(l for p in parts for l in p) == sorted(set(l for p in parts for l in p))


@settings(max_examples=300, deadline=None)
@given(atoms_st, atoms_st)
def test_eq_classes_monotone(G, H):
    small, big = eq_classes(G), eq_classes(G | H)
    labels = labels_of(G) | {EPS}
    for u in labels:
        for v in labels:
            if small.same(u, v):
                assert big.same(u, v)


@settings(max_examples=200, deadline=None)
@given(atoms_st)
def test_exchange_is_an_involution(G):
    for t in G:
        once, _ = s_apply(G, [step_E(t)])
        twice, _ = s_apply(G, [step_E(t), step_E(t.swapped())])
        assert once == twice


# -- relational entailment --------------------------------------------------

def test_r_entails_equality_via_exchange():
    G = {Rel("a", EPS, "b")}
    sigma = r_entails(G, EqGoal("a", "b"))
    assert [s.rule for s in sigma][0] == "E"
    assert goal_witnessed(G, sigma, EqGoal("a", "b"))


def test_r_entails_associativity_introduces_label():
    G = {Rel("x", "y", "z"), Rel("u", "v", "x")}
    binding, sigma = next(entail(G, RelGoal("u", "?w", "z")))
    assert [s.rule for s in sigma] == ["A"]
    w = binding["?w"]
    assert w not in labels_of(G)
    atoms, _ = s_apply(G, sigma)
    assert Rel("u", w, "z") in atoms and Rel("y", "v", w) in atoms


def test_r_entails_goal_present():
    assert r_entails({Rel("a", "b", "c")}, RelGoal("a", "b", "c")) == []


def test_r_entails_unit_goal():
    sigma = r_entails({Rel("a", "b", "c")}, RelGoal("a", EPS, "a"))
    assert [s.rule for s in sigma] == ["U"]


def test_r_entails_not_found_within_budget():
    assert r_entails(set(), RelGoal("a", "b", "c")) is None
    assert r_entails({Rel("a", "b", "c")}, EqGoal("a", "b"), Budget(max_A=2)) is None


def test_r_entails_deep_associativity():
    G = {Rel("a", "x", "r"), Rel("b", "y", "x"), Rel("c", "d", "y")}
    goal = RelGoal("?p", "?q", "r")
    found = [(b, s) for b, s in entail(G, goal)]
    assert found
    for binding, sigma in found[:20]:
        assert goal_witnessed(G, sigma, goal, binding)


# -- trees ------------------------------------------------------------------

def test_rel_of_tree_examples():
    assert rel_of_tree(Tree.node("r", "a", "b")) == {Rel("a", "b", "r")}
    tr = Tree.node("a0", "a3", Tree.node("x6", "a4", "a2"))
    assert rel_of_tree(tr) == {Rel("a3", "x6", "a0"), Rel("a4", "a2", "x6")}
    with pytest.raises(ValueError):
        rel_of_tree(Tree("a"))


def test_tree_measures():
    tr = Tree.node("a0", "a3", Tree.node("x6", "a4", "a2"))
    assert tr.width == 3 and tr.leaves() == ["a3", "a4", "a2"] and tr.internal() == ["a0", "x6"]


def test_trees_of_examples():
    (tr,) = trees_of({Rel("x5", "x6", "a0"), Rel("x7", "x8", "x6")})
    assert tr == Tree.node("a0", "x5", Tree.node("x6", "x7", "x8"))
    assert trees_of({Rel("a", "b", "c")}) == [Tree.node("c", "a", "b")]
    two = trees_of({Rel("a", "b", "c"), Rel("a", "b", "c2")})
    assert sorted(t.label for t in two) == ["c", "c2"]


def test_trees_of_rejects_non_trees():
    assert trees_of({Rel("a", "b", "c"), Rel("c", "d", "a")}) is None       # cycle
    assert trees_of({Rel("a", "b", "c"), Rel("d", "e", "c")}) is None       # parent used twice
    assert trees_of({Rel("a", "b", "c"), Rel("c", "x", "r"), Rel("c", "y", "s")}) is None


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6), st.randoms(use_true_random=False))
def test_trees_of_inverts_rel_of_tree(width, rng):
    names = (f"n{i}" for i in count())
    tr = random_shape(rng, [f"l{i}" for i in range(width)], names)
    assert trees_of(rel_of_tree(tr)) == [tr]


# -- heuristic solver and brute-force oracle --------------------------------

def test_heuristic_solve_example():
    G = {Rel("a1", "a2", "a0"), Rel("a3", "a4", "a1")}
    tr = Tree.node("a0", "a3", Tree.node("?x6", "a4", "a2"))
    assign, sigma = next(heuristic_solve(G, tr, ["?x6"]))
    assert assign["?x6"] not in labels_of(G)
    assert [s.rule for s in sigma] == ["A", "E"]
    atoms, _ = s_apply(G, sigma)
    assert {t.rename(assign) for t in rel_of_tree(tr)} <= atoms


def test_heuristic_solve_trivial_and_failing():
    G = {Rel("a", "b", "c")}
    assert next(heuristic_solve(G, Tree.node("c", "a", "b"))) == ({}, [])
    assert list(heuristic_solve(G, Tree.node("c", "a", "d"))) == []


def test_heuristic_solve_rejects_ground_internal_nodes():
    G = {Rel("a1", "a2", "a0"), Rel("a3", "a4", "a1")}
    assert list(heuristic_solve(G, Tree.node("a0", "a3", Tree.node("x6", "a4", "a2")))) == []


def test_brute_permute_examples():
    src = Tree.node("a", Tree.node("b", "d", "e"), "c")
    swap = brute_permute(src, Tree.node("a", Tree.node("b", "e", "d"), "c"))
    assert [str(s) for s in swap] == ["E((d,e|>b))"]
    regroup = brute_permute(src, Tree.node("a", "d", Tree.node("f", "c", "e")))
    assert [s.rule for s in regroup] == ["A"]
    assert brute_permute(src, src) == []


def test_brute_permute_mismatch():
    src = Tree.node("a", "b", "c")
    assert brute_permute(src, Tree.node("a", "b", "d")) is None
    assert brute_permute(src, Tree.node("z", "b", "c")) is None


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.randoms(use_true_random=False))
def test_brute_permute_witness_replays(width, rng):
    leaves = [f"l{i}" for i in range(width)]
    src = random_shape(rng, leaves, (f"s{i}" for i in count()))
    shuffled = leaves[:]
    rng.shuffle(shuffled)
    target = random_shape(rng, shuffled, (f"t{i}" for i in count()))
    target = Tree(src.label, target.children)
    sigma = brute_permute(src, target)
    assert sigma is not None
    atoms, _ = s_apply(rel_of_tree(src), sigma)
    assert has_shape(atoms, src.label, target.shape())


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.randoms(use_true_random=False))
def test_heuristic_replays(width, rng):
    leaves = [f"l{i}" for i in range(width)]
    src = random_shape(rng, leaves, (f"s{i}" for i in count()))
    shuffled = leaves[:]
    rng.shuffle(shuffled)
    target = random_shape(rng, shuffled, (f"?v{i}" for i in count()))
    target = Tree(src.label, target.children)
    G = rel_of_tree(src)
    assign, sigma = next(heuristic_solve(G, target))
    atoms, _ = s_apply(G, sigma)
    assert {t.rename(assign) for t in rel_of_tree(target)} <= atoms


def test_supply_is_respected():
    G = {Rel("a1", "a2", "a0"), Rel("a3", "a4", "a1")}
    tr = Tree.node("a0", "a3", Tree.node("?x6", "a4", "a2"))
    assign, _ = next(heuristic_solve(G, tr, supply=LabelSupply("k")))
    assert assign["?x6"] == "k0"
