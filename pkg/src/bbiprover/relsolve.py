"""Structural-rule sequences over sets of relational atoms.

Implements application of rule sequences, the equality closure induced
by eps-atoms, bounded relational entailment, labelled binary trees and
the tree permutation solver with its brute-force oracle.
"""

from __future__ import annotations

import itertools
import re
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Sequence

from .kernel import EPS, LabelSupply, Rel, compose, is_free

Atoms = frozenset  # frozenset[Rel]


class SigmaUndefined(Exception):
    def __init__(self, index: int, reason: str):
        self.index = index
        super().__init__(f"step {index}: {reason}")


@dataclass(frozen=True)
class Step:
    """One structural rule instance r(G', theta)."""
    rule: str
    principal: tuple[Rel, ...] = ()
    theta: tuple[tuple[str, str], ...] = ()
    produced: tuple[Rel, ...] = ()
    introduced: tuple[str, ...] = ()

    @property
    def subst(self) -> dict[str, str]:
        return dict(self.theta)

    def __str__(self):
        bits = [", ".join(map(str, self.principal))]
        if self.theta:
            bits.append("[" + ", ".join(f"{b}/{a}" for a, b in self.theta) + "]")
        if self.introduced:
            bits.append("fresh " + ",".join(self.introduced))
        return f"{self.rule}({'; '.join(b for b in bits if b)})"


def step_E(t: Rel) -> Step:
    return Step("E", (t,), (), (t.swapped(),))


def step_U(x: str) -> Step:
    return Step("U", (), (), (Rel(x, EPS, x),))


def step_A(t1: Rel, t2: Rel, w: str) -> Step:
    x, y, z = t1
    u, v, x2 = t2
    if x2 != x:
        raise ValueError("A: second atom must decompose the first atom's left label")
    return Step("A", (t1, t2), (), (Rel(u, w, z), Rel(y, v, w)), (w,))


def step_AC(t: Rel, w: str) -> Step:
    x, y, z = t
    if z != x:
        raise ValueError("A_C needs (x,y|>x)")
    return Step("AC", (t,), (), (Rel(x, w, x), Rel(y, y, w)), (w,))


def step_Eq(t: Rel, keep: str) -> Step:
    """Eq1/Eq2 on (eps,a|>b), keeping label ``keep`` and replacing the other."""
    e, a, b = t
    if e != EPS or a == b or keep not in (a, b):
        raise ValueError(f"no Eq step on {t} keeping {keep}")
    old = b if keep == a else a
    if old == EPS:
        raise ValueError("eps cannot be substituted")
    rule = "Eq1" if old == a else "Eq2"
    return Step(rule, (t,), ((old, keep),), (Rel(EPS, keep, keep),))


def step_P(t1: Rel, t2: Rel) -> Step:
    """(a,b|>c),(a,b|>d): keep c, replace d."""
    if t1[:2] != t2[:2] or t2.parent == EPS and t1.parent != EPS:
        raise ValueError("bad P instance")
    theta = ((t2.parent, t1.parent),) if t1.parent != t2.parent else ()
    return Step("P", (t1, t2), theta, (t1,))


def step_C(t1: Rel, t2: Rel) -> Step:
    """(a,b|>c),(a,d|>c): keep b, replace d."""
    if t1.left != t2.left or t1.parent != t2.parent or t2.right == EPS and t1.right != EPS:
        raise ValueError("bad C instance")
    theta = ((t2.right, t1.right),) if t1.right != t2.right else ()
    return Step("C", (t1, t2), theta, (t1,))


def step_IU(t: Rel) -> Step:
    a, b, c = t
    if c != EPS or (a == EPS and b == EPS):
        raise ValueError("bad IU instance")
    theta = tuple((l, EPS) for l in dict.fromkeys((a, b)) if l != EPS)
    return Step("IU", (t,), theta, (Rel(EPS, EPS, EPS),))


def step_T(a: str, b: str, c: str) -> Step:
    return Step("T", (), (), (Rel(a, b, c),), (c,))


def labels_of(atoms: Iterable[Rel]) -> set[str]:
    return {l for r in atoms for l in r}


def apply_step(G: Atoms, step: Step, index: int = 0) -> Atoms:
    for t in step.principal:
        if t not in G:
            raise SigmaUndefined(index, f"{step.rule}: principal atom {t} absent")
    if step.introduced and labels_of(G) & set(step.introduced):
        raise SigmaUndefined(index, f"{step.rule}: label {step.introduced} is not fresh")
    if step.theta:
        theta = step.subst
        G = frozenset(t.rename(theta) for t in G)
    return G | frozenset(step.produced)


def s_apply(G: Iterable[Rel], sigma: Sequence[Step]) -> tuple[Atoms, dict[str, str]]:
    """(S(G, sigma), subst(sigma)); raises SigmaUndefined at the failing step."""
    cur = frozenset(G)
    theta: dict[str, str] = {}
    for i, step in enumerate(sigma):
        cur = apply_step(cur, step, i)
        if step.theta:
            theta = compose(theta, step.subst)
    return cur, theta


# -- equality closure -------------------------------------------------------

_NUM = re.compile(r"(\d+)")


def label_key(label: str) -> tuple:
    """eps first, then natural order; later labels are replaced first."""
    if label == EPS:
        return (0,)
    return (1, is_free(label), tuple(int(p) if p.isdigit() else p for p in _NUM.split(label)))


@dataclass(frozen=True)
class Closure:
    """Result of closing a set of atoms under substituting rules."""
    atoms: Atoms
    subst: dict
    steps: tuple[Step, ...]

    def find(self, label: str) -> str:
        return self.subst.get(label, label)

    def same(self, u: str, v: str) -> bool:
        return self.find(u) == self.find(v)


class EqClasses(Closure):
    def classes(self, extra: Iterable[str] = ()) -> list[frozenset[str]]:
        groups: dict[str, set[str]] = {}
        for l in set(self.subst) | labels_of(self.atoms) | set(extra) | {EPS}:
            groups.setdefault(self.find(l), set()).add(l)
        return sorted((frozenset(g) for g in groups.values()), key=lambda g: sorted(g))


def _keep(a: str, b: str, rank: Callable[[str], tuple]) -> str:
    return a if rank(a) <= rank(b) else b


def eq_classes(G: Iterable[Rel], rank: Callable[[str], tuple] = label_key) -> EqClasses:
    """Partition induced by Eq1/Eq2 alone, with the witnessing steps."""
    c = _close(frozenset(G), (), rank, orient=False)
    return EqClasses(c.atoms, c.subst, c.steps)


def normalize(G: Iterable[Rel], extras: Iterable[str] = (),
              rank: Callable[[str], tuple] = label_key) -> Closure:
    """Close under E-oriented Eq merges and the enabled substituting extras."""
    return _close(frozenset(G), frozenset(extras), rank, orient=True)


def _close(G: Atoms, extras, rank, orient: bool) -> Closure:
    steps: list[Step] = []
    subst: dict[str, str] = {}

    def do(step: Step):
        nonlocal G, subst
        G = apply_step(G, step, len(steps))
        steps.append(step)
        if step.theta:
            subst = compose(subst, step.subst)

    while True:
        step = _next_merge(G, extras, rank, orient)
        if step is None:
            return Closure(G, subst, tuple(steps))
        for s in step:
            do(s)


def _next_merge(G: Atoms, extras, rank, orient) -> list[Step] | None:
    for t in sorted(G):
        if t.left == EPS and t.right != t.parent:
            return [step_Eq(t, _keep(t.right, t.parent, rank))]
    if orient:
        for t in sorted(G):
            if t.right == EPS and t.left != t.parent:
                s = t.swapped()
                return [step_E(t), step_Eq(s, _keep(s.right, s.parent, rank))]
    if not extras:
        return None
    if "IU" in extras:
        for t in sorted(G):
            if t.parent == EPS and (t.left != EPS or t.right != EPS):
                return [step_IU(t)]
    if "P" in extras:
        by_children: dict[tuple[str, str], Rel] = {}
        for t in sorted(G):
            for o in (t, t.swapped()):
                prev = by_children.get((o.left, o.right))
                if prev is not None and prev.parent != o.parent:
                    keep = _keep(prev.parent, o.parent, rank)
                    k1, k2 = (prev, o) if keep == prev.parent else (o, prev)
                    return _with_orientation(G, [k1, k2], lambda a, b: step_P(a, b))
                by_children.setdefault((o.left, o.right), o)
    if "C" in extras:
        by_side: dict[tuple[str, str], Rel] = {}
        for t in sorted(G):
            for o in (t, t.swapped()):
                prev = by_side.get((o.left, o.parent))
                if prev is not None and prev.right != o.right:
                    keep = _keep(prev.right, o.right, rank)
                    k1, k2 = (prev, o) if keep == prev.right else (o, prev)
                    return _with_orientation(G, [k1, k2], lambda a, b: step_C(a, b))
                by_side.setdefault((o.left, o.parent), o)
    return None


def _with_orientation(G: Atoms, atoms: list[Rel], make) -> list[Step]:
    pre = [step_E(t.swapped()) for t in atoms if t not in G]
    return pre + [make(*atoms)]


# -- bounded relational entailment ------------------------------------------

class EqGoal(NamedTuple):
    u: str
    v: str

    def __str__(self):
        return f"{self.u} = {self.v}"


class RelGoal(NamedTuple):
    u: str
    v: str
    w: str

    def __str__(self):
        return f"({self.u},{self.v}|>{self.w})"


Goal = EqGoal | RelGoal


@dataclass
class Budget:
    max_A: int = 4
    max_steps: int = 20000


class _Exhausted(Exception):
    pass


class DeadlineExceeded(Exception):
    """Raised when a wall-clock deadline passes mid-search."""


def _goal_holds(atoms: Atoms, subst: Mapping[str, str], goal: Goal, binding: Mapping[str, str]) -> bool:
    def m(l):
        l = binding.get(l, l)
        return subst.get(l, l)
    if isinstance(goal, EqGoal):
        return m(goal.u) == m(goal.v)
    return Rel(m(goal.u), m(goal.v), m(goal.w)) in atoms


def _unify(pattern: Sequence[str], atom: Sequence[str], binding: dict[str, str],
           open_vars: set[str], m) -> dict[str, str] | None:
    out = dict(binding)
    for p, a in zip(pattern, atom):
        if p in open_vars and p not in out:
            out[p] = a
        elif m(out.get(p, p)) != a:
            return None
    return out


class _Entailer:
    def __init__(self, G, goal, budget, extras, scope, supply, rank, deadline=None):
        self.deadline = deadline
        self.goal = goal
        self.budget = budget
        self.extras = frozenset(extras)
        self.rank = rank
        self.supply = supply or LabelSupply("w", labels_of(G) | set(scope))
        self.open = {l for l in goal if is_free(l)}
        self.scope = set(scope)
        self.expanded = 0
        self.G = frozenset(G)

    def run(self) -> Iterator[tuple[dict[str, str], list[Step]]]:
        base = normalize(self.G, self.extras, self.rank)
        seen: set = set()
        for depth in range(self.budget.max_A + 1):
            try:
                for binding, steps in self.dfs(base.atoms, base.subst, list(base.steps), depth, None, frozenset()):
                    key = frozenset(binding.items())
                    if key not in seen:
                        seen.add(key)
                        yield binding, minimize(self.G, steps, self.goal, binding)
            except _Exhausted:
                return

    def universe(self, atoms: Atoms, subst) -> list[str]:
        ls = labels_of(atoms) | {subst.get(l, l) for l in self.scope} | {EPS}
        return sorted(ls, key=label_key)

    def matches(self, atoms: Atoms, subst) -> Iterator[tuple[dict[str, str], list[Step]]]:
        m = lambda l: subst.get(l, l)
        goal = self.goal
        if isinstance(goal, EqGoal):
            if _goal_holds(atoms, subst, goal, {}):
                yield {}, []
            return
        pattern = tuple(goal)
        if not self.open & set(pattern):
            g = Rel(*map(m, pattern))
            if g in atoms:
                yield {}, []
            elif g.swapped() in atoms:
                yield {}, [step_E(g.swapped())]
            elif g.left == g.parent and g.right == EPS and g.left in self.universe(atoms, subst):
                yield {}, [step_U(g.left)]
            elif g.right == g.parent and g.left == EPS and g.right in self.universe(atoms, subst):
                yield {}, [step_U(g.right), step_E(g.swapped())]
            return
        for t in sorted(atoms):
            for o in (t, t.swapped()):
                if o != t and o in atoms:
                    continue
                b = _unify(pattern, o, {}, self.open, m)
                if b is not None:
                    yield b, ([] if o == t else [step_E(t)])
        for l in self.universe(atoms, subst):
            u = Rel(l, EPS, l)
            if u in atoms:
                continue
            for o in (u, u.swapped()):
                if o in atoms:
                    continue
                b = _unify(pattern, o, {}, self.open, m)
                if b is not None:
                    yield b, [step_U(l)] + ([] if o == u else [step_E(u)])

    def moves(self, atoms: Atoms, subst) -> Iterator[tuple[list[Step], tuple]]:
        oriented: list[tuple[Rel, list[Step]]] = []
        for t in sorted(atoms):
            oriented.append((t, []))
            if t.swapped() not in atoms:
                oriented.append((t.swapped(), [step_E(t)]))
        by_parent: dict[str, list[tuple[Rel, list[Step]]]] = {}
        for o, pre in oriented:
            by_parent.setdefault(o.parent, []).append((o, pre))
        firsts = list(oriented)
        for l in self.universe(atoms, subst):
            if l in by_parent.get(EPS, ()) or EPS not in by_parent:
                continue
            v = Rel(EPS, l, l)
            if v not in atoms:
                u = Rel(l, EPS, l)
                pre = [] if u in atoms else [step_U(l)]
                firsts.append((v, pre + [step_E(u)]))
        for t1, pre1 in firsts:
            x, y, z = t1
            for t2, pre2 in by_parent.get(x, ()):
                u, v, _ = t2
                if t1 == t2:
                    if x != z:
                        continue
                    if any(Rel(x, w, x) in atoms and Rel(y, y, w) in atoms for w in labels_of(atoms)):
                        continue
                    yield pre1 + [("AC", t1)], ("AC", t1)
                    continue
                if self._already(atoms, u, y, v, z):
                    continue
                pre = pre1 + [s for s in pre2 if s not in pre1]
                yield pre + [("A", t1, t2)], ("A", t1, t2)
        if "T" in self.extras:
            uni = self.universe(atoms, subst)
            parents = {(t.left, t.right) for t in atoms}
            for a, b in itertools.combinations_with_replacement(uni, 2):
                if (a, b) not in parents and (b, a) not in parents:
                    yield [("T", a, b)], ("T", a, b)

    @staticmethod
    def _already(atoms, u, y, v, z) -> bool:
        for t in atoms:
            if t.parent == z and t.left == u:
                w = t.right
                if Rel(y, v, w) in atoms or Rel(v, y, w) in atoms:
                    return True
        return False

    def realize(self, atoms: Atoms, plan: list) -> tuple[Atoms, list[Step]]:
        steps = []
        for item in plan:
            if isinstance(item, Step):
                s = item
            elif item[0] == "A":
                s = step_A(item[1], item[2], self.supply(labels_of(atoms)))
            elif item[0] == "AC":
                s = step_AC(item[1], self.supply(labels_of(atoms)))
            else:
                s = step_T(item[1], item[2], self.supply(labels_of(atoms)))
            atoms = apply_step(atoms, s)
            steps.append(s)
        return atoms, steps

    def dfs(self, atoms, subst, steps, depth, last, last_new) -> Iterator:
        self.expanded += 1
        if self.expanded > self.budget.max_steps:
            raise _Exhausted
        if self.deadline is not None and self.expanded % 64 == 0 and time.monotonic() > self.deadline:
            raise DeadlineExceeded
        if depth == 0:
            for b, pre in self.matches(atoms, subst):
                yield b, steps + pre
            return
        for plan, key in self.moves(atoms, subst):
            uses_new = any(t in last_new for t in key[1:] if isinstance(t, Rel))
            if last is not None and not uses_new and key <= last:
                continue
            new_atoms, new_steps = self.realize(atoms, plan)
            produced = frozenset(new_atoms - atoms)
            closed = normalize(new_atoms, self.extras, self.rank)
            yield from self.dfs(closed.atoms, compose(subst, closed.subst),
                                steps + new_steps + list(closed.steps), depth - 1, key, produced)


def entail(G: Iterable[Rel], goal: Goal, budget: Budget | None = None, extras: Iterable[str] = (),
           scope: Iterable[str] = (), supply=None, rank: Callable[[str], tuple] = label_key,
           deadline: float | None = None) -> Iterator[tuple[dict[str, str], list[Step]]]:
    """All (binding, sigma) witnesses for goal, free variables acting as wildcards."""
    e = _Entailer(G, goal, budget or Budget(), extras, scope, supply, rank, deadline)
    return e.run()


def r_entails(G: Iterable[Rel], goal: Goal, budget: Budget | None = None, extras: Iterable[str] = (),
              scope: Iterable[str] = (), supply=None) -> list[Step] | None:
    """A witnessing sigma for a ground goal, or None when the budget runs out."""
    for _, sigma in entail(G, goal, budget, extras, scope, supply):
        return sigma
    return None


def goal_witnessed(G: Iterable[Rel], sigma: Sequence[Step], goal: Goal,
                   binding: Mapping[str, str] | None = None) -> bool:
    """Replay sigma and check the goal literally, after a final Eq closure."""
    try:
        atoms, theta = s_apply(G, sigma)
    except SigmaUndefined:
        return False
    closed = eq_classes(atoms)
    return _goal_holds(closed.atoms, compose(theta, closed.subst), goal, binding or {})


def minimize(G: Iterable[Rel], sigma: Sequence[Step], goal: Goal,
             binding: Mapping[str, str]) -> list[Step]:
    """Drop steps not needed to witness the goal literally."""
    G = frozenset(G)
    steps = list(sigma)

    def literal(seq):
        try:
            atoms, theta = s_apply(G, seq)
        except SigmaUndefined:
            return False
        return _goal_holds(atoms, theta, goal, binding)

    i = len(steps) - 1
    while i >= 0:
        trial = steps[:i] + steps[i + 1:]
        if literal(trial):
            steps = trial
        i -= 1
    return steps


# -- labelled binary trees --------------------------------------------------

@dataclass(frozen=True)
class Tree:
    label: str
    children: tuple["Tree", "Tree"] | None = None

    @staticmethod
    def node(label: str, left: "Tree | str", right: "Tree | str") -> "Tree":
        as_tree = lambda t: t if isinstance(t, Tree) else Tree(t)
        return Tree(label, (as_tree(left), as_tree(right)))

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def leaves(self) -> list[str]:
        if self.children is None:
            return [self.label]
        return self.children[0].leaves() + self.children[1].leaves()

    @property
    def width(self) -> int:
        return len(self.leaves())

    def internal(self) -> list[str]:
        if self.children is None:
            return []
        return [self.label] + self.children[0].internal() + self.children[1].internal()

    def shape(self):
        """The tree with internal labels erased."""
        if self.children is None:
            return self.label
        return (self.children[0].shape(), self.children[1].shape())

    def __str__(self):
        if self.children is None:
            return self.label
        return f"{self.label}({self.children[0]}, {self.children[1]})"


def rel_of_tree(tr: Tree) -> set[Rel]:
    if tr.children is None:
        raise ValueError("a tree needs at least two leaves")
    out = set()
    stack = [tr]
    while stack:
        t = stack.pop()
        if t.children is not None:
            l, r = t.children
            out.add(Rel(l.label, r.label, t.label))
            stack.extend((l, r))
    return out


def trees_of(R: Iterable[Rel]) -> list[Tree] | None:
    """Split R into trees, or None when R is not a disjoint union of trees."""
    R = list(dict.fromkeys(R))
    by_parent: dict[str, Rel] = {}
    for t in R:
        if t.parent in by_parent:
            return None
        by_parent[t.parent] = t
    as_child = Counter(l for t in R for l in (t.left, t.right) if l in by_parent)
    if any(n > 1 for n in as_child.values()):
        return None
    roots = [t.parent for t in R if t.parent not in as_child]
    used: set[Rel] = set()

    def build(label: str, path: frozenset) -> Tree | None:
        if label not in by_parent:
            return Tree(label)
        if label in path:
            return None
        t = by_parent[label]
        used.add(t)
        l = build(t.left, path | {label})
        r = build(t.right, path | {label})
        if l is None or r is None:
            return None
        return Tree(label, (l, r))

    out = []
    for root in roots:
        tr = build(root, frozenset())
        if tr is None:
            return None
        out.append(tr)
    if len(used) != len(R):
        return None
    return out


# -- tree permutation -------------------------------------------------------

class _Permuter:
    """Rearranges trees of atoms with E and A, recording the steps."""

    def __init__(self, atoms: Atoms, supply):
        self.atoms = atoms
        self.steps: list[Step] = []
        self.supply = supply

    def apply(self, step: Step):
        self.atoms = apply_step(self.atoms, step, len(self.steps))
        self.steps.append(step)

    def E(self, tr: Tree) -> Tree:
        l, r = tr.children
        self.apply(step_E(Rel(l.label, r.label, tr.label)))
        return Tree(tr.label, (r, l))

    def A(self, tr: Tree) -> Tree:
        """r(x(u,v), y)  ->  r(u, w(y, v)) with w fresh."""
        x, y = tr.children
        u, v = x.children
        w = self.supply(labels_of(self.atoms))
        self.apply(step_A(Rel(x.label, y.label, tr.label), Rel(u.label, v.label, x.label), w))
        return Tree(tr.label, (u, Tree(w, (y, v))))

    def regroup(self, tr: Tree, want: Counter) -> Tree:
        """A tree rooted like tr whose left child has exactly the leaves ``want``."""
        left, right = tr.children
        m1, m2 = Counter(left.leaves()), Counter(right.leaves())
        if want == m1:
            return tr
        if want == m2:
            return self.E(tr)
        if _sub(want, m1):
            tr = Tree(tr.label, (self.regroup(left, want), right))
            return self.A(tr)
        if _sub(want, m2):
            return self.regroup(self.E(tr), want)
        total = m1 + m2
        rest = total - want
        if _sub(m1, want) or _sub(m2, want):
            # the complement sits inside one child: split it off and swap
            return self.E(self.regroup(tr, rest))
        # the wanted leaves straddle both children
        w1, w2 = want & m1, want & m2
        tr = Tree(tr.label, (self.regroup(left, w1), self.regroup(right, w2)))
        tr = self.A(tr)                         # r(x1, w(s2(x2,y2), y1))
        x1, w = tr.children
        w = self.A(w)                           # w(x2, w'(y1,y2))
        w = self.E(w)                           # w(w', x2)
        tr = self.E(Tree(tr.label, (x1, w)))    # r(w(w',x2), x1)
        tr = self.A(tr)                         # r(w', w''(x1,x2))
        return self.E(tr)                       # r(w''(x1,x2), w')

    def conform(self, src: Tree, target: Tree, assign: dict[str, str], loose=frozenset()):
        """Rearrange src to the target's shape, recording internal labels.

        Nodes named in ``loose`` only need the right leaves, not the shape.
        """
        if is_free(target.label):
            assign[target.label] = src.label
        if target.children is None or target.label in loose:
            return
        src = self.regroup(src, Counter(target.children[0].leaves()))
        self.conform(src.children[0], target.children[0], assign, loose)
        self.conform(src.children[1], target.children[1], assign, loose)


def _sub(a: Counter, b: Counter) -> bool:
    """a is a proper, nonempty sub-multiset of b."""
    return bool(a) and a != b and not (a - b)


def _subtrees(root: str, by_parent: Mapping[str, list[Rel]], limit: int) -> Iterator[Tree]:
    """Trees of atoms rooted at root with at most ``limit`` internal nodes."""

    def grow(label: str, internal: frozenset) -> Iterator[tuple[Tree, frozenset]]:
        yield Tree(label), internal
        if label in internal or len(internal) >= limit:
            return
        for t in by_parent.get(label, ()):
            for lt, li in grow(t.left, internal | {label}):
                for rt, ri in grow(t.right, li):
                    yield Tree(label, (lt, rt)), ri

    for tr, _ in grow(root, frozenset()):
        if tr.children is not None:
            yield tr


def _groupings(rest: list[str], k: int) -> Iterator[list[list[str]]]:
    """Ways to share the labels in rest among k nonempty groups."""
    if k == 0:
        if not rest:
            yield []
        return
    seen = set()
    for assign in itertools.product(range(k), repeat=len(rest)):
        groups = [[] for _ in range(k)]
        for label, g in zip(rest, assign):
            groups[g].append(label)
        if all(groups):
            key = tuple(tuple(sorted(g)) for g in groups)
            if key not in seen:
                seen.add(key)
                yield groups


def heuristic_solve(G: Iterable[Rel], tr: Tree, var_order: Sequence[str] | None = None,
                    supply=None, extras: Iterable[str] = ()) -> Iterator[tuple[dict[str, str], list[Step]]]:
    """Witnesses that tr's relational atoms follow from G by E and A.

    tr's root is a ground label, internal nodes are free variables used
    once, and leaves are ground labels or free variables.  Each witness
    pairs an assignment of tr's free variables with the structural steps
    (including the preliminary equality closure) that make every atom of
    tr, under the assignment, literally present.
    """
    G = frozenset(G)
    base = normalize(G, extras)
    m = base.find
    root = m(tr.label)
    if is_free(tr.label) or root == EPS:
        return
    internal = tr.internal()[1:]
    if any(not is_free(x) for x in internal) or len(set(internal)) != len(internal):
        return
    target_leaves = tr.leaves()
    bound = Counter(m(l) for l in target_leaves if not is_free(l))
    opens = [l for l in target_leaves if is_free(l)]
    if len(set(opens)) != len(opens) or set(opens) & set(internal) or EPS in bound:
        return
    supply = supply or LabelSupply("w", labels_of(G) | set(target_leaves) | {tr.label})
    by_parent: dict[str, list[Rel]] = {}
    for t in sorted(base.atoms):
        by_parent.setdefault(t.parent, []).append(t)
    limit = len(base.atoms) if opens else len(bound) - 1
    seen = set()
    for src in _subtrees(root, by_parent, limit):
        leaves = Counter(src.leaves())
        if opens:
            if bound - leaves:
                continue
            rest = sorted((leaves - bound).elements(), key=label_key)
            groupings = _groupings(rest, len(opens))
        else:
            if leaves != bound:
                continue
            groupings = iter([[]])
        for groups in groupings:
            target, loose = _instantiate(tr, m, dict(zip(opens, groups)))
            key = (src, str(target))
            if key in seen:
                continue
            seen.add(key)
            p = _Permuter(base.atoms, supply)
            assign: dict[str, str] = {}
            p.conform(src, target, assign, loose)
            out = {v: assign[v] for v in internal}
            for var, labels in zip(opens, groups):
                out[var] = assign.get(var, labels[0])
            steps = list(base.steps) + p.steps
            if var_order:
                out = {v: out[v] for v in var_order if v in out} | out
            yield out, steps


def _instantiate(tr: Tree, m, groups: Mapping[str, list[str]]) -> tuple[Tree, set[str]]:
    """Replace ground leaves by representatives and open leaves by their groups.

    An open leaf owning several labels becomes a node of arbitrary shape
    (its name is returned in the second component).
    """
    loose: set[str] = set()

    def go(t: Tree) -> Tree:
        if t.children is None:
            if not is_free(t.label):
                return Tree(m(t.label))
            labels = groups[t.label]
            if len(labels) == 1:
                return Tree(labels[0])
            loose.add(t.label)
            return Tree(t.label, (Tree(labels[0]), _comb(labels[1:])))
        return Tree(t.label, (go(t.children[0]), go(t.children[1])))

    return go(tr), loose


def _comb(labels: list[str]) -> Tree:
    if len(labels) == 1:
        return Tree(labels[0])
    return Tree("?", (Tree(labels[0]), _comb(labels[1:])))


def brute_permute(source: Tree, target: Tree, budget: int = 20000, supply=None) -> list[Step] | None:
    """Breadth-first search over single E/A moves from source to target's shape.

    Internal labels of target are ignored; its root and leaves must
    match.  Returns the witnessing steps or None when the budget runs out.
    """
    goal = target.shape()
    if source.label != target.label or Counter(source.leaves()) != Counter(target.leaves()):
        return None
    start_atoms = frozenset(rel_of_tree(source))
    supply = supply or LabelSupply("w", labels_of(start_atoms) | set(target.leaves()))
    queue = deque([(source, start_atoms, ())])
    seen = {source.shape()}
    while queue and budget > 0:
        tr, atoms, steps = queue.popleft()
        budget -= 1
        if tr.shape() == goal:
            return list(steps)
        for nxt, new_steps in _moves(tr, atoms, supply):
            key = nxt.shape()
            if key in seen:
                continue
            seen.add(key)
            new_atoms = atoms
            for s in new_steps:
                new_atoms = apply_step(new_atoms, s)
            queue.append((nxt, new_atoms, steps + tuple(new_steps)))
    return None


def _moves(tr: Tree, atoms: Atoms, supply) -> Iterator[tuple[Tree, list[Step]]]:
    """Trees one E or A move away, with the step performing the move."""
    if tr.children is None:
        return
    l, r = tr.children
    here = Rel(l.label, r.label, tr.label)
    yield Tree(tr.label, (r, l)), [step_E(here)]
    if l.children is not None:
        u, v = l.children
        w = supply(labels_of(atoms))
        yield (Tree(tr.label, (u, Tree(w, (r, v)))),
               [step_A(here, Rel(u.label, v.label, l.label), w)])
    for i, child in enumerate((l, r)):
        for sub, steps in _moves(child, atoms, supply):
            kids = (sub, r) if i == 0 else (l, sub)
            yield Tree(tr.label, kids), steps
