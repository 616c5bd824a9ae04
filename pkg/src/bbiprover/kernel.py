"""Ground labelled sequents, rule instances and the trusted proof checker."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, NamedTuple

from .formula import (And, Atom, Bot, Formula, Imp, MEmp, Not, Or, Star, Top,
                      Wand, parse, show)

EPS = "eps"
_LABEL = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")

Labelled = tuple[str, Formula]
Subst = Mapping[str, str]


def is_free(label: str) -> bool:
    return label.startswith("?")


def valid_label(label: str, allow_free: bool = False) -> bool:
    if is_free(label):
        return allow_free and bool(_LABEL.fullmatch(label[1:]))
    return bool(_LABEL.fullmatch(label))


class Rel(NamedTuple):
    """Relational atom (left, right |> parent)."""
    left: str
    right: str
    parent: str

    def __str__(self):
        return f"({self.left},{self.right}|>{self.parent})"

    def labels(self) -> tuple[str, str, str]:
        return (self.left, self.right, self.parent)

    def swapped(self) -> "Rel":
        return Rel(self.right, self.left, self.parent)

    def rename(self, theta: Subst) -> "Rel":
        g = theta.get
        return Rel(g(self.left, self.left), g(self.right, self.right), g(self.parent, self.parent))


def _bag(items) -> frozenset:
    return frozenset(Counter(items).items())


@dataclass(frozen=True, eq=False)
class Sequent:
    """rels ; lhs |- rhs, compared as multisets."""
    rels: tuple[Rel, ...] = ()
    lhs: tuple[Labelled, ...] = ()
    rhs: tuple[Labelled, ...] = ()

    def __eq__(self, other):
        if not isinstance(other, Sequent):
            return NotImplemented
        return (Counter(self.rels) == Counter(other.rels)
                and Counter(self.lhs) == Counter(other.lhs)
                and Counter(self.rhs) == Counter(other.rhs))

    def __hash__(self):
        return hash((_bag(self.rels), _bag(self.lhs), _bag(self.rhs)))

    def labels(self) -> set[str]:
        out = {l for r in self.rels for l in r}
        out.update(w for w, _ in self.lhs)
        out.update(w for w, _ in self.rhs)
        return out

    def add(self, rels=(), lhs=(), rhs=()) -> "Sequent":
        return Sequent(self.rels + tuple(rels), self.lhs + tuple(lhs), self.rhs + tuple(rhs))

    def __str__(self):
        left = [str(r) for r in self.rels] + [f"{w}:{show(f)}" for w, f in self.lhs]
        right = [f"{w}:{show(f)}" for w, f in self.rhs]
        return f"{'; '.join(left)} |- {'; '.join(right)}".strip()


def substitute(s: Sequent, theta: Subst) -> Sequent:
    """Simultaneous label renaming; eps may be a target but never a source."""
    if EPS in theta and theta[EPS] != EPS:
        raise ValueError("eps cannot be substituted")
    g = theta.get
    return Sequent(tuple(r.rename(theta) for r in s.rels),
                   tuple((g(w, w), f) for w, f in s.lhs),
                   tuple((g(w, w), f) for w, f in s.rhs))


def compose(first: Subst, second: Subst) -> dict[str, str]:
    """t(first o second) = (t first) second."""
    out = {k: second.get(v, v) for k, v in first.items()}
    for k, v in second.items():
        out.setdefault(k, v)
    return {k: v for k, v in out.items() if k != v}


def fresh_label(ctx: Iterable[str], prefix: str = "w") -> str:
    """Smallest w<n> outside ctx."""
    taken = set(ctx)
    n = 0
    while f"{prefix}{n}" in taken:
        n += 1
    return f"{prefix}{n}"


class LabelSupply:
    """Monotone generator of names that never repeats within one task."""

    def __init__(self, prefix: str = "w", avoid: Iterable[str] = ()):
        self.prefix = prefix
        self.counter = 0
        self.avoid = set(avoid)

    def __call__(self, ctx: Iterable[str] = ()) -> str:
        taken = self.avoid.union(ctx)
        while True:
            name = f"{self.prefix}{self.counter}"
            self.counter += 1
            if name not in taken:
                return name


# -- rules ------------------------------------------------------------------

class RuleError(Exception):
    pass


RULE_NAMES = {
    "id": "id", "cut": "cut", "botL": "⊥L", "topR": "⊤R", "empL": "⊤*L", "empR": "⊤*R",
    "andL": "∧L", "andR": "∧R", "impL": "→L", "impR": "→R", "notL": "¬L", "notR": "¬R",
    "orL": "∨L", "orR": "∨R", "starL": "∗L", "starR": "∗R", "wandL": "−∗L", "wandR": "−∗R",
    "E": "E", "A": "A", "U": "U", "AC": "A_C", "Eq1": "Eq1", "Eq2": "Eq2",
    "P": "P", "T": "T", "IU": "IU", "C": "C",
}
STRUCTURAL = frozenset({"E", "A", "U", "AC", "Eq1", "Eq2", "P", "T", "IU", "C"})
EXTRAS = frozenset({"P", "T", "IU", "C"})
AXIOMS = frozenset({"id", "botL", "topR", "empR"})


def _pick(items: tuple, idx: Any, what: str):
    if not isinstance(idx, int) or isinstance(idx, bool) or not 0 <= idx < len(items):
        raise RuleError(f"no {what} at index {idx!r}")
    return items[idx]


def _drop(items: tuple, *idxs: int) -> tuple:
    gone = set(idxs)
    return tuple(x for i, x in enumerate(items) if i not in gone)


def _expect(f: Formula, cls, rule: str):
    if not isinstance(f, cls):
        raise RuleError(f"{rule}: principal formula has the wrong connective")
    return f


def _fresh(params: Mapping, key: str, n: int, concl: Sequent) -> list[str]:
    raw = params.get(key)
    names = [raw] if n == 1 and isinstance(raw, str) else raw
    if not isinstance(names, list) or len(names) != n or not all(isinstance(x, str) for x in names):
        raise RuleError(f"expected {n} fresh label(s) in '{key}'")
    if len(set(names)) != n:
        raise RuleError("fresh labels must be distinct")
    used = concl.labels()
    for x in names:
        if x == EPS or is_free(x) or not valid_label(x):
            raise RuleError(f"invalid fresh label {x!r}")
        if x in used:
            raise RuleError(f"label {x} is not fresh")
    return names


def _label(params: Mapping, key: str) -> str:
    x = params.get(key)
    if not isinstance(x, str) or not valid_label(x):
        raise RuleError(f"invalid label in '{key}'")
    return x


def _rel_pair(params: Mapping, concl: Sequent) -> tuple[int, int, Rel, Rel]:
    ks = params.get("rels")
    if not isinstance(ks, list) or len(ks) != 2 or ks[0] == ks[1]:
        raise RuleError("expected two distinct relational atom indices in 'rels'")
    return ks[0], ks[1], _pick(concl.rels, ks[0], "relational atom"), _pick(concl.rels, ks[1], "relational atom")


def _subst_rest(concl: Sequent, drop: tuple[int, ...], theta: Subst, keep: Iterable[Rel]) -> Sequent:
    rest = Sequent(_drop(concl.rels, *drop), concl.lhs, concl.rhs)
    out = substitute(rest, theta)
    return Sequent(tuple(keep) + out.rels, out.lhs, out.rhs)


def rule_premises(rule: str, concl: Sequent, params: Mapping[str, Any]) -> list[Sequent]:
    """Premises mandated by the rule schema, or RuleError."""
    rels, lhs, rhs = concl.rels, concl.lhs, concl.rhs
    match rule:
        case "id":
            wl, fl = _pick(lhs, params.get("left"), "left formula")
            wr, fr = _pick(rhs, params.get("right"), "right formula")
            if not isinstance(fl, Atom) or fl != fr:
                raise RuleError("id needs the same atomic formula on both sides")
            if wl != wr:
                raise RuleError("id needs the same label on both sides")
            return []
        case "botL":
            _expect(_pick(lhs, params.get("left"), "left formula")[1], Bot, rule)
            return []
        case "topR":
            _expect(_pick(rhs, params.get("right"), "right formula")[1], Top, rule)
            return []
        case "empR":
            w, f = _pick(rhs, params.get("right"), "right formula")
            _expect(f, MEmp, rule)
            if w != EPS:
                raise RuleError("T*R applies only at eps")
            return []
        case "empL":
            i = params.get("left")
            w, f = _pick(lhs, i, "left formula")
            _expect(f, MEmp, rule)
            if w == EPS:
                raise RuleError("T*L needs a non-eps label")
            return [substitute(Sequent(rels, _drop(lhs, i), rhs), {w: EPS})]
        case "andL" | "starL" | "impL" | "notL" | "orL":
            i = params.get("left")
            w, f = _pick(lhs, i, "left formula")
            rest = Sequent(rels, _drop(lhs, i), rhs)
            match rule, f:
                case "andL", And(a, b):
                    return [rest.add(lhs=[(w, a), (w, b)])]
                case "orL", Or(a, b):
                    return [rest.add(lhs=[(w, a)]), rest.add(lhs=[(w, b)])]
                case "impL", Imp(a, b):
                    return [rest.add(rhs=[(w, a)]), rest.add(lhs=[(w, b)])]
                case "notL", Not(a):
                    return [rest.add(rhs=[(w, a)])]
                case "starL", Star(a, b):
                    x, y = _fresh(params, "fresh", 2, concl)
                    return [rest.add(rels=[Rel(x, y, w)], lhs=[(x, a), (y, b)])]
            raise RuleError(f"{rule}: principal formula has the wrong connective")
        case "andR" | "orR" | "impR" | "notR" | "wandR":
            j = params.get("right")
            w, f = _pick(rhs, j, "right formula")
            rest = Sequent(rels, lhs, _drop(rhs, j))
            match rule, f:
                case "andR", And(a, b):
                    return [rest.add(rhs=[(w, a)]), rest.add(rhs=[(w, b)])]
                case "orR", Or(a, b):
                    return [rest.add(rhs=[(w, a), (w, b)])]
                case "impR", Imp(a, b):
                    return [rest.add(lhs=[(w, a)], rhs=[(w, b)])]
                case "notR", Not(a):
                    return [rest.add(lhs=[(w, a)])]
                case "wandR", Wand(a, b):
                    x, z = _fresh(params, "fresh", 2, concl)
                    return [rest.add(rels=[Rel(x, w, z)], lhs=[(x, a)], rhs=[(z, b)])]
            raise RuleError(f"{rule}: principal formula has the wrong connective")
        case "starR":
            w, f = _pick(rhs, params.get("right"), "right formula")
            a, b = _expect(f, Star, rule).left, f.right
            x, y, z = _pick(rels, params.get("rel"), "relational atom")
            if z != w:
                raise RuleError("*R: relational atom does not decompose the principal label")
            return [concl.add(rhs=[(x, a)]), concl.add(rhs=[(y, b)])]
        case "wandL":
            w, f = _pick(lhs, params.get("left"), "left formula")
            a, b = _expect(f, Wand, rule).left, f.right
            x, y, z = _pick(rels, params.get("rel"), "relational atom")
            if y != w:
                raise RuleError("-*L: relational atom does not match the principal label")
            return [concl.add(rhs=[(x, a)]), concl.add(lhs=[(z, b)])]
        case "cut":
            return _cut_premises(concl, params)
        case "E":
            x, y, z = _pick(rels, params.get("rel"), "relational atom")
            return [concl.add(rels=[Rel(y, x, z)])]
        case "U":
            x = _label(params, "label")
            if x != EPS and x not in concl.labels():
                raise RuleError("U label must occur in the conclusion or be eps")
            return [concl.add(rels=[Rel(x, EPS, x)])]
        case "A":
            _, _, (x, y, z), (u, v, x2) = _rel_pair(params, concl)
            if x2 != x:
                raise RuleError("A: second atom must decompose the first atom's left label")
            (w,) = _fresh(params, "fresh", 1, concl)
            return [concl.add(rels=[Rel(u, w, z), Rel(y, v, w)])]
        case "AC":
            x, y, z = _pick(rels, params.get("rel"), "relational atom")
            if z != x:
                raise RuleError("A_C needs an atom of the form (x,y|>x)")
            (w,) = _fresh(params, "fresh", 1, concl)
            return [concl.add(rels=[Rel(x, w, x), Rel(y, y, w)])]
        case "Eq1" | "Eq2":
            k = params.get("rel")
            e, a, b = _pick(rels, k, "relational atom")
            if e != EPS:
                raise RuleError(f"{rule} needs an atom of the form (eps,w|>w')")
            old, new = (a, b) if rule == "Eq1" else (b, a)
            if old == EPS:
                raise RuleError(f"{rule} cannot substitute eps")
            if old == new:
                raise RuleError(f"{rule} instance changes nothing")
            return [_subst_rest(concl, (k,), {old: new}, [Rel(EPS, new, new)])]
        case "P" | "C":
            if rule not in EXTRAS:
                raise RuleError(rule)
            k1, k2, r1, r2 = _rel_pair(params, concl)
            if rule == "P":
                if r1[:2] != r2[:2]:
                    raise RuleError("P needs two atoms with the same children")
                new, old = r1.parent, r2.parent
            else:
                if r1.left != r2.left or r1.parent != r2.parent:
                    raise RuleError("C needs atoms (a,b|>c) and (a,d|>c)")
                new, old = r1.right, r2.right
            if old == EPS and new != EPS:
                raise RuleError(f"{rule} cannot substitute eps")
            return [_subst_rest(concl, (k1, k2), {old: new}, [r1])]
        case "IU":
            k = params.get("rel")
            a, b, c = _pick(rels, k, "relational atom")
            if c != EPS:
                raise RuleError("IU needs an atom of the form (a,b|>eps)")
            if a == EPS and b == EPS:
                raise RuleError("IU instance changes nothing")
            theta = {l: EPS for l in (a, b) if l != EPS}
            return [_subst_rest(concl, (k,), theta, [Rel(EPS, EPS, EPS)])]
        case "T":
            ab = params.get("labels")
            if not isinstance(ab, list) or len(ab) != 2:
                raise RuleError("T needs two labels in 'labels'")
            used = concl.labels() | {EPS}
            for x in ab:
                if not isinstance(x, str) or x not in used:
                    raise RuleError("T labels must occur in the conclusion or be eps")
            (c,) = _fresh(params, "fresh", 1, concl)
            return [concl.add(rels=[Rel(ab[0], ab[1], c)])]
    raise RuleError(f"unknown rule {rule!r}")


def _cut_premises(concl: Sequent, params: Mapping) -> list[Sequent]:
    w = _label(params, "label")
    text = params.get("formula")
    if not isinstance(text, str):
        raise RuleError("cut needs a formula")
    try:
        f = parse(text)
    except ValueError as exc:
        raise RuleError(f"cut formula: {exc}") from None
    split = params.get("split", {})
    parts = []
    for name, items in (("rels", concl.rels), ("lhs", concl.lhs), ("rhs", concl.rhs)):
        chosen = split.get(name, [])
        if not isinstance(chosen, list) or len(set(chosen)) != len(chosen):
            raise RuleError("cut split must list distinct indices")
        for i in chosen:
            _pick(items, i, f"{name} entry")
        parts.append((tuple(items[i] for i in chosen), _drop(items, *chosen)))
    (r1, r2), (l1, l2), (d1, d2) = parts
    return [Sequent(r1, l1, d1 + ((w, f),)), Sequent(r2, l2 + ((w, f),), d2)]


# -- derivations ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Derivation:
    rule: str
    conclusion: Sequent
    params: dict = field(default_factory=dict)
    premises: tuple["Derivation", ...] = ()

    @property
    def height(self) -> int:
        return 1 + max((p.height for p in self.premises), default=0)

    def nodes(self) -> Iterator["Derivation"]:
        stack = [self]
        while stack:
            d = stack.pop()
            yield d
            stack.extend(reversed(d.premises))

    def rule_counts(self) -> Counter:
        return Counter(d.rule for d in self.nodes())

    def labels(self) -> set[str]:
        out: set[str] = set()
        for d in self.nodes():
            out |= d.conclusion.labels()
        return out

    def at(self, path: Iterable[int]) -> "Derivation":
        d = self
        for i in path:
            d = d.premises[i]
        return d


def derive(rule: str, concl: Sequent, params: Mapping[str, Any] | None = None,
           build=None) -> Derivation:
    """Apply a rule and close each premise with build(premise_sequent)."""
    params = dict(params or {})
    prems = rule_premises(rule, concl, params)
    subs = tuple(build(p) for p in prems) if prems else ()
    return Derivation(rule, concl, params, subs)


@dataclass(frozen=True)
class CheckReport:
    accepted: bool
    violation: str | None = None
    path: tuple[int, ...] = ()
    cuts: int = 0
    rules: Counter = field(default_factory=Counter)

    def __bool__(self):
        return self.accepted

    def __str__(self):
        if self.accepted:
            return f"accepted ({sum(self.rules.values())} rule instances, {self.cuts} cuts)"
        return f"rejected at {list(self.path)}: {self.violation}"


def check(d: Derivation, allow_cut: bool = False, extras: Iterable[str] = (),
          expect: Sequent | None = None) -> CheckReport:
    """Validate every node of d; report the first violation in pre-order."""
    extras = frozenset(extras)
    counts: Counter = Counter()
    cuts = 0
    if expect is not None and d.conclusion != expect:
        return CheckReport(False, "end sequent differs from the expected one", (), 0, counts)
    stack: list[tuple[Derivation, tuple[int, ...]]] = [(d, ())]
    while stack:
        node, path = stack.pop()
        fail = _check_node(node, allow_cut, extras)
        if fail:
            return CheckReport(False, fail, path, cuts, counts)
        counts[node.rule] += 1
        cuts += node.rule == "cut"
        for i in reversed(range(len(node.premises))):
            stack.append((node.premises[i], path + (i,)))
    return CheckReport(True, None, (), cuts, counts)


def _check_node(node: Derivation, allow_cut: bool, extras: frozenset) -> str | None:
    if node.rule not in RULE_NAMES:
        return f"unknown rule {node.rule!r}"
    if node.rule == "cut" and not allow_cut:
        return "cut is not allowed"
    if node.rule in EXTRAS and node.rule not in extras:
        return f"rule {node.rule} is not enabled"
    for label in node.conclusion.labels():
        if not valid_label(label):
            return f"invalid or free label {label!r}"
    try:
        expected = rule_premises(node.rule, node.conclusion, node.params)
    except RuleError as exc:
        return f"{RULE_NAMES[node.rule]}: {exc}"
    if len(expected) != len(node.premises):
        return f"{RULE_NAMES[node.rule]}: expected {len(expected)} premises, got {len(node.premises)}"
    for i, (want, got) in enumerate(zip(expected, node.premises)):
        if want != got.conclusion:
            return f"{RULE_NAMES[node.rule]}: premise {i} does not match the rule schema"
    return None


# -- renaming and weakening -------------------------------------------------

def _after(f: Mapping[str, str], g: Mapping[str, str]) -> dict[str, str]:
    """Substitution l -> g(f(l))."""
    return compose(f, g)


def substitute_derivation(d: Derivation, theta: Subst) -> Derivation:
    """Rename labels throughout d, repairing rule instances the renaming breaks."""
    if theta.get(EPS, EPS) != EPS:
        raise ValueError("eps cannot be substituted")
    return _rename(d, {k: v for k, v in theta.items() if k != v})


def _rename(d: Derivation, f: dict[str, str]) -> Derivation:
    concl = substitute(d.conclusion, f)
    p = dict(d.params)
    fm = lambda l: f.get(l, l)
    prem_f = [f] * len(d.premises)
    rule = d.rule

    def refresh(names: list[str]) -> tuple[list[str], dict[str, str]]:
        inner = {k: v for k, v in f.items() if k not in names}
        taken = concl.labels() | set(f.values()) | set(f)
        out = []
        for x in names:
            if x in concl.labels() or x in f.values():
                y = fresh_label(taken | d.labels())
                taken.add(y)
                inner[x] = y
                out.append(y)
            else:
                out.append(x)
        return out, inner

    match rule:
        case "starL" | "wandR":
            p["fresh"], g = refresh(list(d.params["fresh"]))
            prem_f = [g]
        case "A" | "AC" | "T":
            (w,), g = refresh([d.params["fresh"]])
            p["fresh"] = w
            prem_f = [g]
            if rule == "T":
                p["labels"] = [fm(x) for x in d.params["labels"]]
        case "U":
            p["label"] = fm(d.params["label"])
        case "cut":
            p["label"] = fm(d.params["label"])
        case "empL":
            w, _ = d.conclusion.lhs[d.params["left"]]
            if fm(w) == EPS:
                # the principal now sits at eps: drop the node, weaken the subproof
                sub = _rename(d.premises[0], f)
                return _weaken(sub, Sequent(lhs=((EPS, MEmp()),)))
            prem_f = [_after(f, {fm(w): EPS})]
        case "Eq1" | "Eq2":
            e, a, b = d.conclusion.rels[d.params["rel"]]
            a2, b2 = fm(a), fm(b)
            if a2 == b2:
                return _rename(d.premises[0], f)
            old, new = (a2, b2) if rule == "Eq1" else (b2, a2)
            if old == EPS:
                rule = "Eq2" if rule == "Eq1" else "Eq1"
                old, new = new, old
            prem_f = [_after(f, {old: new})]
        case "P" | "C":
            k1, k2 = d.params["rels"]
            pos = 2 if rule == "P" else 1
            new, old = fm(d.conclusion.rels[k1][pos]), fm(d.conclusion.rels[k2][pos])
            if old == EPS and new != EPS:
                # swap the roles of the two atoms so eps stays put
                p["rels"] = [k2, k1]
                new, old = old, new
            prem_f = [_after(f, {old: new})]
        case "IU":
            a, b, _ = d.conclusion.rels[d.params["rel"]]
            a2, b2 = fm(a), fm(b)
            if a2 == EPS and b2 == EPS:
                return _rename(d.premises[0], f)
            prem_f = [_after(f, {l: EPS for l in (a2, b2) if l != EPS})]
    prems = tuple(_rename(sub, g) for sub, g in zip(d.premises, prem_f))
    return Derivation(rule, concl, p, prems)


def weaken(d: Derivation, rels: Iterable[Rel] = (), lhs: Iterable[Labelled] = (),
           rhs: Iterable[Labelled] = ()) -> Derivation:
    """Add the given items to every sequent of d.

    Labels of the added items must not clash with labels introduced
    inside d; eps and labels of the end sequent are always safe.
    """
    extra = Sequent(tuple(rels), tuple(lhs), tuple(rhs))
    inside = d.labels() - d.conclusion.labels()
    if extra.labels() & inside:
        raise ValueError(f"weakening labels clash with {sorted(extra.labels() & inside)}")
    return _weaken(d, extra)


def rule_subst(rule: str, concl: Sequent, params: Mapping[str, Any]) -> dict[str, str]:
    """The global substitution a (valid) rule instance performs on its premise."""
    match rule:
        case "empL":
            return {concl.lhs[params["left"]][0]: EPS}
        case "Eq1" | "Eq2":
            _, a, b = concl.rels[params["rel"]]
            return {a: b} if rule == "Eq1" else {b: a}
        case "P" | "C":
            k1, k2 = params["rels"]
            pos = 2 if rule == "P" else 1
            new, old = concl.rels[k1][pos], concl.rels[k2][pos]
            return {old: new} if old != new else {}
        case "IU":
            a, b, _ = concl.rels[params["rel"]]
            return {l: EPS for l in (a, b) if l != EPS}
    return {}


def _weaken(d: Derivation, extra: Sequent) -> Derivation:
    concl = d.conclusion.add(extra.rels, extra.lhs, extra.rhs)
    image = substitute(extra, rule_subst(d.rule, d.conclusion, d.params))
    subs = []
    for i, sub in enumerate(d.premises):
        part = Sequent() if d.rule == "cut" and i == 0 else image
        subs.append(_weaken(sub, part))
    return Derivation(d.rule, concl, dict(d.params), tuple(subs))


# -- JSON -------------------------------------------------------------------

def sequent_to_json(s: Sequent) -> dict:
    return {"rels": [list(r) for r in s.rels],
            "lhs": [[w, show(f)] for w, f in s.lhs],
            "rhs": [[w, show(f)] for w, f in s.rhs]}


def sequent_from_json(obj: Mapping) -> Sequent:
    return Sequent(tuple(Rel(*r) for r in obj.get("rels", [])),
                   tuple((w, parse(f)) for w, f in obj.get("lhs", [])),
                   tuple((w, parse(f)) for w, f in obj.get("rhs", [])))


def to_json(d: Derivation) -> dict:
    return {"rule": d.rule, "sequent": sequent_to_json(d.conclusion),
            "params": d.params, "premises": [to_json(p) for p in d.premises]}


def from_json(obj: Mapping) -> Derivation:
    return Derivation(obj["rule"], sequent_from_json(obj["sequent"]), dict(obj.get("params", {})),
                      tuple(from_json(p) for p in obj.get("premises", [])))


def dumps(d: Derivation) -> str:
    return json.dumps(to_json(d), ensure_ascii=False)


def loads(text: str) -> Derivation:
    return from_json(json.loads(text))


def render(d: Derivation, indent: str = "") -> str:
    """Indented text rendering, root first."""
    lines = [f"{indent}{d.conclusion}   [{RULE_NAMES.get(d.rule, d.rule)}]"]
    for p in d.premises:
        lines.append(render(p, indent + "  "))
    return "\n".join(lines)
