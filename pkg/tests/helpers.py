"""Shared fixtures data and independent checking utilities for the tests."""

from __future__ import annotations

import random
from collections import Counter
from functools import lru_cache
from importlib import resources

from hypothesis import strategies as st

from bbiprover.formula import And, Atom, Bot, Imp, MEmp, Not, Or, Star, Top, Wand, read_suite
from bbiprover.kernel import Derivation, Rel, Sequent
from bbiprover.relsolve import Tree
from bbiprover.search import Proved, SearchOptions, prove

TABLE = read_suite(resources.files("bbiprover").joinpath("table1.txt").read_text(encoding="utf-8"))

HILBERT = [
    "a -> T* * a",
    "T* * a -> a",
    "a * b -> b * a",
    "a * (b * c) -> (a * b) * c",
]

HARD = "~(T* & a & (b * ~(c -* (T* -> a))))"

F = "~(T -* ~T*)"
PD_ONLY = f"({F} * {F}) -> {F}"
TD_ONLY = ["(~T* -* F) -> T*", "(T* & ((p * q) -* F)) -> ((p -* F) | (q -* F))"]


@lru_cache(maxsize=None)
def proved(text: str, extras: frozenset = frozenset()) -> Proved:
    out = prove(text, SearchOptions(extras=extras))
    assert isinstance(out, Proved), f"expected a proof of {text}: {out}"
    return out


def corpus() -> list[tuple[str, frozenset, Derivation]]:
    """Accepted ground proofs produced by the prover."""
    items = [(t, frozenset()) for t in TABLE + HILBERT + [HARD]]
    items += [(PD_ONLY, frozenset({"P"}))] + [(t, frozenset({"P", "T"})) for t in TD_ONLY]
    return [(t, ex, proved(t, ex).proof) for t, ex in items]


# -- random formulas --------------------------------------------------------

_ATOMS = ["a", "b", "c", "p", "q", "x1", "long_name"]


def formulas(max_depth: int = 8):
    leaves = st.one_of(st.sampled_from(_ATOMS).map(Atom), st.sampled_from([Top(), Bot(), MEmp()]))

    def extend(inner):
        binary = st.sampled_from([And, Or, Imp, Star, Wand])
        return st.one_of(inner.map(Not), st.builds(lambda c, l, r: c(l, r), binary, inner, inner))

    return st.recursive(leaves, extend, max_leaves=2 ** max_depth).filter(lambda f: depth(f) <= max_depth)


def depth(f) -> int:
    match f:
        case Not(s):
            return 1 + depth(s)
        case And(l, r) | Or(l, r) | Imp(l, r) | Star(l, r) | Wand(l, r):
            return 1 + max(depth(l), depth(r))
    return 0


def random_formula(rng: random.Random, max_depth: int = 8):
    if max_depth == 0 or rng.random() < 0.2:
        return rng.choice([Atom(rng.choice(_ATOMS)), Top(), Bot(), MEmp(), Atom("a")])
    if rng.random() < 0.15:
        return Not(random_formula(rng, max_depth - 1))
    cls = rng.choice([And, Or, Imp, Star, Wand])
    return cls(random_formula(rng, max_depth - 1), random_formula(rng, max_depth - 1))


# -- random trees -----------------------------------------------------------

def random_shape(rng: random.Random, leaves: list[str], names) -> Tree:
    if len(leaves) == 1:
        return Tree(leaves[0])
    k = rng.randint(1, len(leaves) - 1)
    return Tree(next(names), (random_shape(rng, leaves[:k], names), random_shape(rng, leaves[k:], names)))


def relabel_root(tr: Tree, root: str) -> Tree:
    return Tree(root, tr.children)


def has_shape(atoms, label: str, shape) -> bool:
    """Whether atoms contain a tree rooted at label with the given leaf shape."""
    if not isinstance(shape, tuple):
        return label == shape
    left, right = shape
    return any(t.parent == label and has_shape(atoms, t.left, left) and has_shape(atoms, t.right, right)
               for t in atoms)


# -- derivation surgery -----------------------------------------------------

def replace_at(d: Derivation, path: tuple, new: Derivation) -> Derivation:
    if not path:
        return new
    i, rest = path[0], path[1:]
    prems = list(d.premises)
    prems[i] = replace_at(prems[i], rest, new)
    return Derivation(d.rule, d.conclusion, d.params, tuple(prems))


def paths(d: Derivation, prefix: tuple = ()):
    yield prefix, d
    for i, p in enumerate(d.premises):
        yield from paths(p, prefix + (i,))


def rename_everywhere(d: Derivation, old: str, new: str) -> Derivation:
    """Blind textual renaming of one label in every sequent and parameter."""
    g = lambda l: new if l == old else l
    s = d.conclusion
    seq = Sequent(tuple(Rel(*map(g, t)) for t in s.rels),
                  tuple((g(w), f) for w, f in s.lhs), tuple((g(w), f) for w, f in s.rhs))
    params = {}
    for k, v in d.params.items():
        if isinstance(v, str):
            params[k] = g(v)
        elif isinstance(v, list) and all(isinstance(x, str) for x in v):
            params[k] = [g(x) for x in v]
        else:
            params[k] = v
    return Derivation(d.rule, seq, params, tuple(rename_everywhere(p, old, new) for p in d.premises))


def occurrences(s: Sequent):
    """(kind, index, position) for every label occurrence of a sequent."""
    for i, t in enumerate(s.rels):
        for k in range(3):
            yield "rels", i, k
    for i in range(len(s.lhs)):
        yield "lhs", i, 0
    for i in range(len(s.rhs)):
        yield "rhs", i, 0


def rename_occurrence(s: Sequent, site, new: str) -> Sequent:
    kind, i, k = site
    if kind == "rels":
        t = list(s.rels[i])
        t[k] = new
        rels = s.rels[:i] + (Rel(*t),) + s.rels[i + 1:]
        return Sequent(rels, s.lhs, s.rhs)
    items = getattr(s, kind)
    w, f = items[i]
    items = items[:i] + ((new, f),) + items[i + 1:]
    return Sequent(s.rels, items, s.rhs) if kind == "lhs" else Sequent(s.rels, s.lhs, items)


def label_at(s: Sequent, site) -> str:
    kind, i, k = site
    return s.rels[i][k] if kind == "rels" else getattr(s, kind)[i][0]


def multiset(s: Sequent):
    return Counter(s.rels), Counter(s.lhs), Counter(s.rhs)


# -- hand-written derivations -----------------------------------------------

def unit_example() -> Derivation:
    """a: A -> (T* * A) by impR, U, E, starR, then T*R and id."""
    from bbiprover.formula import parse
    from bbiprover.kernel import EPS
    A = Atom("A")
    s0 = Sequent(rhs=(("a", parse("A -> T* * A")),))
    s1 = Sequent(lhs=(("a", A),), rhs=(("a", parse("T* * A")),))
    s2 = s1.add(rels=[Rel("a", EPS, "a")])
    s3 = s2.add(rels=[Rel(EPS, "a", "a")])
    left = Derivation("empR", s3.add(rhs=[(EPS, MEmp())]), {"right": 1})
    right = Derivation("id", s3.add(rhs=[("a", A)]), {"left": 0, "right": 1})
    star = Derivation("starR", s3, {"right": 0, "rel": 1}, (left, right))
    e = Derivation("E", s2, {"rel": 0}, (star,))
    u = Derivation("U", s1, {"label": "a"}, (e,))
    return Derivation("impR", s0, {"right": 0}, (u,))


# -- acceptance reporting -----------------------------------------------------

RESULTS: list[str] = []
