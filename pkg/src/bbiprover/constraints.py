"""Constraint systems collected from symbolic derivations, and their solver."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .kernel import EPS, Derivation, LabelSupply, Rel, is_free
from .relsolve import (Budget, DeadlineExceeded, EqGoal, Goal, RelGoal, Step, Tree, entail, goal_witnessed,
                       heuristic_solve, labels_of, normalize, s_apply, trees_of)

Path = tuple[int, ...]


@dataclass(frozen=True)
class Constraint:
    """lhs |-?_R rhs, generated at the rule instance found at ``origin``."""
    lhs: frozenset
    rhs: Goal
    origin: Path = ()
    scope: frozenset = frozenset()

    def fv(self) -> set[str]:
        return {l for l in labels_of(self.lhs) | set(self.rhs) if is_free(l)}

    def rhs_fv(self) -> set[str]:
        return {l for l in self.rhs if is_free(l)}

    @property
    def simple(self) -> bool:
        return not any(is_free(l) for l in labels_of(self.lhs))

    def subst(self, theta: Mapping[str, str]) -> "Constraint":
        g = lambda l: theta.get(l, l)
        rhs = type(self.rhs)(*map(g, self.rhs))
        return Constraint(frozenset(t.rename(theta) for t in self.lhs), rhs, self.origin,
                          frozenset(map(g, self.scope)))

    def __str__(self):
        lhs = "; ".join(map(str, sorted(self.lhs)))
        return f"{lhs} |-? {self.rhs}"


@dataclass(frozen=True)
class ConstraintSystem:
    constraints: tuple[Constraint, ...] = ()
    covers: frozenset = frozenset()   # (i, j): c_i directly below c_j

    def __len__(self):
        return len(self.constraints)

    def below(self) -> dict[int, set[int]]:
        """Strict predecessors of each constraint."""
        preds: dict[int, set[int]] = {i: set() for i in range(len(self.constraints))}
        changed = True
        for i, j in self.covers:
            preds[j].add(i)
        while changed:
            changed = False
            for j in preds:
                extra = set().union(*(preds[i] for i in preds[j])) - preds[j] if preds[j] else set()
                if extra:
                    preds[j] |= extra
                    changed = True
        return preds

    def precedes(self, i: int, j: int) -> bool:
        return i in self.below()[j]

    def to_json(self) -> dict:
        return {"constraints": [{"lhs": [list(t) for t in sorted(c.lhs)], "rhs": [type(c.rhs).__name__, *c.rhs],
                                 "origin": list(c.origin)} for c in self.constraints],
                "covers": sorted(map(list, self.covers))}


def _is_prefix(p: Path, q: Path) -> bool:
    return len(p) < len(q) and q[:len(p)] == p


def from_origins(constraints: Sequence[Constraint]) -> ConstraintSystem:
    """Order constraints by ancestry of their generating rule instances."""
    cs = tuple(constraints)
    covers = set()
    for j, cj in enumerate(cs):
        anc = [i for i, ci in enumerate(cs) if _is_prefix(ci.origin, cj.origin)]
        if anc:
            nearest = max(anc, key=lambda i: len(cs[i].origin))
            covers.add((nearest, j))
    return ConstraintSystem(cs, frozenset(covers))


def collect(pi: Derivation) -> ConstraintSystem:
    """Constraints of a symbolic derivation, ordered along its branches."""
    out: list[Constraint] = []
    stack: list[tuple[Derivation, Path]] = [(pi, ())]
    while stack:
        node, path = stack.pop()
        s = node.conclusion
        rhs = _constraint_rhs(node)
        if rhs is not None:
            out.append(Constraint(frozenset(s.rels), rhs, path, frozenset(s.labels())))
        for i, p in enumerate(node.premises):
            stack.append((p, path + (i,)))
    out.sort(key=lambda c: (len(c.origin), c.origin))
    return from_origins(out)


def _constraint_rhs(node: Derivation) -> Goal | None:
    s, p = node.conclusion, node.params
    match node.rule:
        case "id":
            return EqGoal(s.lhs[p["left"]][0], s.rhs[p["right"]][0])
        case "empR":
            return EqGoal(s.rhs[p["right"]][0], EPS)
        case "starR":
            x, y = p["vars"]
            return RelGoal(x, y, s.rhs[p["right"]][0])
        case "wandL":
            x, z = p["vars"]
            return RelGoal(x, s.lhs[p["left"]][0], z)
    return None


def well_formed(C: ConstraintSystem) -> tuple[bool, str | None]:
    n = len(C)
    for i, j in C.covers:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            return False, f"bad order edge {(i, j)}"
    preds = C.below()
    for j in range(n):
        if j in preds[j]:
            return False, "order is cyclic"
    for j, ps in preds.items():
        for i in ps:
            if not C.constraints[i].lhs <= C.constraints[j].lhs:
                return False, f"monotonicity fails between {i} and {j}"
    fvs = set().union(*(c.fv() for c in C.constraints)) if n else set()
    for x in sorted(fvs):
        having = [i for i, c in enumerate(C.constraints) if x in c.fv()]
        origins = [i for i in having
                   if isinstance(C.constraints[i].rhs, RelGoal)
                   and x in C.constraints[i].rhs_fv()
                   and x not in labels_of(C.constraints[i].lhs)
                   and not any(k in preds[i] for k in having)]
        if len(origins) != 1:
            return False, f"free variable {x} has no unique origin"
        o = origins[0]
        if any(i != o and o not in preds[i] for i in having):
            return False, f"origin of {x} is not below every constraint using it"
    return True, None


def minima(C: ConstraintSystem) -> list[int]:
    preds = C.below()
    return [i for i in range(len(C)) if not preds[i]]


def restrict(C: ConstraintSystem, i: int, theta: Mapping[str, str], sigma: Sequence[Step]) -> ConstraintSystem:
    """Remove the minimum simple constraint i, threading its solution upward."""
    c = C.constraints[i]
    preds = C.below()
    if preds[i]:
        raise ValueError("constraint is not minimum")
    if not c.simple:
        raise ValueError("constraint is not simple")
    G2, _ = s_apply(c.lhs, sigma)
    keep = [j for j in range(len(C)) if j != i]
    index = {j: k for k, j in enumerate(keep)}
    new = []
    for j in keep:
        cj = C.constraints[j]
        if i in preds[j]:
            moved = cj.subst(theta)
            cj = Constraint(G2 | moved.lhs, moved.rhs, cj.origin, cj.scope | moved.scope)
        new.append(cj)
    covers = {(index[a], index[b]) for a, b in C.covers if a != i and b != i}
    # successors of i inherit the order through i's removal only via transitivity,
    # which is empty here because i has no predecessors
    return ConstraintSystem(tuple(new), frozenset(covers))


# -- solving ----------------------------------------------------------------

@dataclass
class Solution:
    theta: dict[str, str]
    sigmas: dict[Path, list[Step]]
    order: list[Path] = field(default_factory=list)


@dataclass
class SolveStats:
    nodes: int = 0
    backtracks: int = 0


SolveTimeout = DeadlineExceeded


class _UnionFind:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: str, b: str):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb

    def groups(self) -> list[set[str]]:
        out: dict[str, set[str]] = {}
        for x in list(self.parent):
            out.setdefault(self.find(x), set()).add(x)
        return list(out.values())


def _pre_assignments(C: ConstraintSystem) -> Iterator[tuple[dict[str, str], list[set[str]]]]:
    """Bindings forced by equality constraints, one per choice of ground representative."""
    uf = _UnionFind()
    for c in C.constraints:
        if isinstance(c.rhs, EqGoal):
            uf.union(c.rhs.u, c.rhs.v)
    groups = [g for g in uf.groups() if any(is_free(l) for l in g)]
    choices = []
    for g in groups:
        ground = sorted((l for l in g if not is_free(l)), key=lambda l: (l != EPS, l))
        choices.append([(g, r) for r in ground] or [(g, None)])
    for combo in itertools.product(*choices):
        theta = {}
        open_groups = []
        for g, rep in combo:
            if rep is None:
                open_groups.append({l for l in g if is_free(l)})
            else:
                theta.update({l: rep for l in g if is_free(l)})
        yield theta, open_groups


class Solver:
    def __init__(self, C: ConstraintSystem, budget: Budget | None = None, extras: Iterable[str] = (),
                 supply=None, deadline: float | None = None):
        self.C = C
        self.budget = budget or Budget()
        self.extras = frozenset(extras)
        known = set().union(*(labels_of(c.lhs) | set(c.rhs) | c.scope for c in C.constraints)) if len(C) else set()
        self.supply = supply or LabelSupply("w", known)
        self.deadline = deadline
        self.stats = SolveStats()

    def tick(self):
        self.stats.nodes += 1
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise SolveTimeout

    def solve(self) -> Solution | None:
        ok, why = well_formed(self.C)
        if not ok:
            raise ValueError(f"constraint system is not well formed: {why}")
        for theta0, open_groups in _pre_assignments(self.C):
            self.open_groups = open_groups
            for theta, sigmas, order in self._rec(self.C, theta0):
                sol = Solution(theta, sigmas, order)
                if validate(self.C, sol, self.extras):
                    return sol
                self.stats.backtracks += 1
        return None

    def _rec(self, C: ConstraintSystem, theta: dict[str, str]) -> Iterator[tuple[dict, dict, list]]:
        self.tick()
        if len(C) == 0:
            yield dict(theta), {}, []
            return
        i = min(minima(C), key=lambda k: (len(C.constraints[k].origin), C.constraints[k].origin))
        c = C.constraints[i]
        view = c.subst(theta)
        if not view.simple:
            raise ValueError(f"minimum constraint {c} is not simple")
        for binding, sigma in self._candidates(C, i, view, theta):
            full = dict(theta)
            full.update(binding)
            local = {x: full[x] for x in c.fv() if x in full}
            missing = c.rhs_fv() - set(local)
            if missing:
                continue
            R = restrict(C, i, local, sigma)
            for th, sig, order in self._rec(R, full):
                sig = dict(sig)
                sig[c.origin] = list(sigma)
                yield th, sig, [c.origin] + order
            self.stats.backtracks += 1

    def _propagate(self, binding: dict[str, str]) -> dict[str, str]:
        out = dict(binding)
        for g in self.open_groups:
            hit = [out[x] for x in g if x in out]
            if hit:
                for x in g:
                    out.setdefault(x, hit[0])
        return out

    def _candidates(self, C: ConstraintSystem, i: int, view: Constraint,
                    theta: dict[str, str]) -> Iterator[tuple[dict[str, str], list[Step]]]:
        goal = view.rhs
        open_vars = [l for l in goal if is_free(l)]
        if not open_vars:
            for _, sigma in entail(view.lhs, goal, self.budget, self.extras, view.scope, self.supply,
                                      deadline=self.deadline):
                yield {}, sigma
                return
            return
        seen = set()
        for binding, sigma in self._chain(C, i, view, theta):
            binding = self._propagate(binding)
            key = frozenset((k, v) for k, v in binding.items() if k in open_vars)
            if key not in seen:
                seen.add(key)
                yield binding, sigma
        successors = [C.constraints[j].subst(theta) for j in range(len(C)) if C.precedes(i, j)]
        for depth in range(self.budget.max_A + 1):
            level = []
            b = Budget(depth, self.budget.max_steps)
            for binding, sigma in entail(view.lhs, goal, b, self.extras, view.scope, self.supply,
                                             deadline=self.deadline):
                self.tick()
                binding = self._propagate(binding)
                key = frozenset((k, v) for k, v in binding.items() if k in open_vars)
                if key in seen:
                    continue
                seen.add(key)
                level.append((binding, sigma))
            level.sort(key=lambda bs: -self._score(view, bs, successors))
            yield from level

    def _score(self, view: Constraint, cand, successors: list[Constraint]) -> int:
        """How many successor constraints the candidate satisfies outright."""
        binding, sigma = cand
        try:
            atoms, th = s_apply(view.lhs, sigma)
        except Exception:
            return 0
        score = 0
        for s in successors:
            s2 = s.subst(binding)
            closed = normalize(atoms | s2.lhs, self.extras)
            m = lambda l: closed.find(th.get(l, l))
            if isinstance(s2.rhs, EqGoal):
                if not any(is_free(l) for l in s2.rhs):
                    score += 2 if m(s2.rhs.u) == m(s2.rhs.v) else -2
                continue
            pat = tuple(s2.rhs)
            for t in closed.atoms:
                for o in (t, t.swapped()):
                    if all(is_free(p) or m(p) == a for p, a in zip(pat, o)):
                        score += 1
                        break
                else:
                    continue
                break
        return score

    def _chain(self, C: ConstraintSystem, i: int, view: Constraint,
               theta: dict[str, str]) -> Iterator[tuple[dict[str, str], list[Step]]]:
        """Tree-shaped groups of relational constraints rooted at constraint i."""
        goal = view.rhs
        if not isinstance(goal, RelGoal) or is_free(goal.w) or goal.w == EPS:
            return
        atoms = [Rel(*goal)]
        frontier = {l for l in goal[:2] if is_free(l)}
        succ = [C.constraints[j].subst(theta) for j in range(len(C)) if C.precedes(i, j)]
        rel_succ = [s for s in succ if isinstance(s.rhs, RelGoal) and view.lhs <= s.lhs]
        changed = True
        while changed:
            changed = False
            for s in rel_succ:
                t = Rel(*s.rhs)
                if t not in atoms and t.parent in frontier:
                    atoms.append(t)
                    frontier |= {l for l in t[:2] if is_free(l)}
                    changed = True
        if len(atoms) < 2 and any(is_free(l) for l in goal[:2]):
            return
        trees = trees_of(atoms)
        if not trees or len(trees) != 1:
            return
        tr = trees[0]
        if any(l == EPS for l in tr.leaves()):
            return
        yield from heuristic_solve(view.lhs, tr, None, self.supply, self.extras)


def solve(C: ConstraintSystem, budget: Budget | None = None, extras: Iterable[str] = (),
          supply=None, deadline: float | None = None) -> Solution | None:
    return Solver(C, budget, extras, supply, deadline).solve()


def validate(C: ConstraintSystem, sol: Solution, extras: Iterable[str] = ()) -> bool:
    """Replay the solution through successive restrictions."""
    cur = C
    theta = sol.theta
    for origin in sol.order:
        idx = [k for k, c in enumerate(cur.constraints) if c.origin == origin]
        if len(idx) != 1 or idx[0] not in minima(cur):
            return False
        i = idx[0]
        c = cur.constraints[i]
        local = {x: theta[x] for x in c.fv() if x in theta}
        if c.fv() - set(local):
            return False
        view = c.subst(local)
        if not view.simple or any(is_free(l) for l in view.rhs):
            return False
        sigma = sol.sigmas[origin]
        if not goal_witnessed(view.lhs, sigma, view.rhs):
            return False
        cur = restrict(cur, i, local, sigma)
    return len(cur) == 0
