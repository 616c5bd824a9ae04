"""Backward proof search with free variables, and proof reconstruction.

Search works on symbolic sequents whose labels may be free variables
(``?x<n>``).  Negative rules are applied eagerly; the positive rules
(id, T*R, *R, -*L) either close a branch or create free variables, and
leave relational obligations behind as constraints.  A closed symbolic
tree is accepted only once its constraints are solved and the grounded
derivation passes the kernel.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union

from .constraints import ConstraintSystem, Solution, SolveTimeout, collect, solve
from .formula import And, Atom, Bot, Formula, Imp, MEmp, Not, Or, Star, Top, Wand, parse
from .kernel import (EPS, CheckReport, Derivation, LabelSupply, Rel, RuleError, Sequent, check,
                     compose, is_free, rule_premises)
from .relsolve import Budget, Step, eq_classes, label_key, normalize

OPEN = "open"

_LEFT = [(And, "andL"), (Not, "notL"), (Star, "starL"), (MEmp, "empL")]
_RIGHT = [(Imp, "impR"), (Not, "notR"), (Or, "orR"), (Wand, "wandR")]
_LEFT_SPLIT = [(Or, "orL"), (Imp, "impL")]
_RIGHT_SPLIT = [(And, "andR")]


@dataclass
class SearchOptions:
    multiplicity: int = 3
    r_budget: Budget = field(default_factory=Budget)
    extras: frozenset = frozenset()
    timeout: float = 10_000          # milliseconds
    emit_proof: bool = True

    def __post_init__(self):
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be at least 1")
        if self.r_budget.max_A < 0 or self.r_budget.max_steps < 0 or self.timeout < 0:
            raise ValueError("budgets must be non-negative")
        self.extras = frozenset(self.extras)


@dataclass
class Stats:
    branches: int = 0
    trees: int = 0
    constraints: int = 0
    backtracks: int = 0
    multiplicity: int = 0
    wall: float = 0.0
    timed_out: bool = False

    def __str__(self):
        return (f"branches={self.branches} trees={self.trees} constraints={self.constraints} "
                f"backtracks={self.backtracks} multiplicity={self.multiplicity} "
                f"time={self.wall:.3f}s" + (" (timeout)" if self.timed_out else ""))


@dataclass
class Proved:
    symbolic: Derivation
    solution: Solution
    proof: Derivation | None
    stats: Stats
    report: CheckReport | None = None


@dataclass
class Unproved:
    reason: str
    stats: Stats


Outcome = Union[Proved, Unproved]


class _Timeout(Exception):
    pass


class ReconstructionError(Exception):
    pass


# -- symbolic rules ---------------------------------------------------------

def symbolic_premises(rule: str, concl: Sequent, params: Mapping) -> list[Sequent]:
    """Premises of a free-variable rule instance."""
    match rule:
        case "empL":
            w, f = concl.lhs[params["left"]]
            if not isinstance(f, MEmp):
                raise RuleError("T*L: principal formula has the wrong connective")
            lhs = concl.lhs[:params["left"]] + concl.lhs[params["left"] + 1:]
            return [Sequent(concl.rels + (Rel(EPS, w, EPS),), lhs, concl.rhs)]
        case "starR":
            w, f = concl.rhs[params["right"]]
            x, y = params["vars"]
            return [concl.add(rhs=[(x, f.left)]), concl.add(rhs=[(y, f.right)])]
        case "wandL":
            w, f = concl.lhs[params["left"]]
            x, z = params["vars"]
            return [concl.add(rhs=[(x, f.left)]), concl.add(lhs=[(z, f.right)])]
        case "id" | "empR" | "botL" | "topR":
            return []
    return rule_premises(rule, concl, params)


def _negative(seq: Sequent) -> tuple[str, dict] | None:
    for i, (_, f) in enumerate(seq.lhs):
        if isinstance(f, Bot):
            return "botL", {"left": i}
    for j, (_, f) in enumerate(seq.rhs):
        if isinstance(f, Top):
            return "topR", {"right": j}
    for table, side, items in ((_LEFT, "left", seq.lhs), (_RIGHT, "right", seq.rhs),
                               (_LEFT_SPLIT, "left", seq.lhs), (_RIGHT_SPLIT, "right", seq.rhs)):
        for cls, rule in table:
            for i, (_, f) in enumerate(items):
                if isinstance(f, cls):
                    return rule, {side: i}
    return None


def _saturate(seq: Sequent, supply) -> Derivation:
    """Negative rules to exhaustion; unexpanded leaves carry the rule OPEN."""
    pick = _negative(seq)
    if pick is None:
        return Derivation(OPEN, seq)
    rule, params = pick
    if rule in ("starL", "wandR"):
        ctx = seq.labels()
        a = supply(ctx)
        params["fresh"] = [a, supply(ctx | {a})]
    prems = symbolic_premises(rule, seq, params)
    return Derivation(rule, seq, params, tuple(_saturate(p, supply) for p in prems))


def saturation_tree(seq: Sequent, supply=None) -> Derivation:
    """Every negative rule applied to exhaustion; open leaves have rule OPEN."""
    return _saturate(seq, supply or LabelSupply("w", seq.labels()))


def saturate(seq: Sequent, supply=None) -> list[Sequent]:
    """The open leaves left after applying every negative rule."""
    return [d.conclusion for d in saturation_tree(seq, supply).nodes() if d.rule == OPEN]


# -- search -----------------------------------------------------------------

Bind = Mapping[str, str]


def _resolve(bind: Bind, l: str) -> str:
    while l in bind:
        l = bind[l]
    return l


@dataclass(frozen=True)
class _Leaf:
    """Equality information about one saturated branch."""
    closure: object
    loose: bool
    prune: bool

    def same(self, u: str, v: str) -> bool:
        return u == v or (not is_free(u) and not is_free(v) and self.closure.same(u, v))

    def possible(self, u: str, v: str) -> bool:
        return self.same(u, v) or not self.prune or self.loose or is_free(u) or is_free(v)


class _Prover:
    def __init__(self, opts: SearchOptions):
        self.opts = opts
        self.stats = Stats()
        self.deadline = time.monotonic() + opts.timeout / 1000.0

    def tick(self):
        if time.monotonic() > self.deadline:
            raise _Timeout

    def run(self, f: Formula) -> Outcome:
        start = time.monotonic()
        root = Sequent(rhs=(("w0", f),))
        try:
            for k in range(1, self.opts.multiplicity + 1):
                self.k = k
                self.stats.multiplicity = k
                self.worlds = LabelSupply("w", {"w0"})
                self.vars = LabelSupply("?x")
                for tree, _ in self.expand(root, Counter(), {}):
                    done = self.attempt(root, tree)
                    if done is not None:
                        self.stats.wall = time.monotonic() - start
                        return done
                    self.stats.backtracks += 1
        except (_Timeout, SolveTimeout):
            self.stats.timed_out = True
            self.stats.wall = time.monotonic() - start
            return Unproved("timeout", self.stats)
        self.stats.wall = time.monotonic() - start
        return Unproved("search space exhausted within budget", self.stats)

    def attempt(self, root: Sequent, tree: Derivation) -> Proved | None:
        self.stats.trees += 1
        C = collect(tree)
        self.stats.constraints = len(C)
        supply = LabelSupply("w", tree.labels())
        sol = solve(C, self.opts.r_budget, self.opts.extras, supply, self.deadline)
        if sol is None:
            return None
        try:
            proof = reconstruct(tree, sol, self.opts.extras)
        except ReconstructionError:
            return None
        report = check(proof, allow_cut=False, extras=self.opts.extras, expect=root)
        if not report.accepted:
            return None
        return Proved(tree, sol, proof if self.opts.emit_proof else None, self.stats, report)

    # a generator of (closed symbolic derivation, bindings) pairs
    def expand(self, seq: Sequent, counts: Counter, bind: Bind) -> Iterator[tuple[Derivation, Bind]]:
        yield from self.fill(_saturate(seq, self.worlds), counts, bind)

    def fill(self, node: Derivation, counts: Counter, bind: Bind) -> Iterator[tuple[Derivation, Bind]]:
        if node.rule == OPEN:
            yield from self.leaf(node.conclusion, counts, bind)
            return
        yield from self.fill_all(node.rule, node.conclusion, node.params,
                                 [lambda b, p=p: self.fill(p, counts, b) for p in node.premises], bind)

    @staticmethod
    def fill_all(rule, concl, params, gens, bind) -> Iterator[tuple[Derivation, Bind]]:
        def go(i: int, bind: Bind, done: list):
            if i == len(gens):
                yield Derivation(rule, concl, params, tuple(done)), bind
                return
            for d, b in gens[i](bind):
                yield from go(i + 1, b, done + [d])
        yield from go(0, bind, [])

    def examine(self, seq: Sequent, bind: Bind) -> _Leaf:
        rels = {t.rename({l: _resolve(bind, l) for l in t if is_free(l)}) for t in seq.rels}
        ground = [t for t in rels if not any(is_free(l) for l in t)]
        extras = self.opts.extras
        cl = normalize(ground, extras)
        loose = False
        for t in rels:
            if any(is_free(l) for l in t):
                kids = (cl.find(t.left), cl.find(t.right))
                if any(k == EPS or is_free(k) for k in kids) or extras:
                    loose = True
                    break
        return _Leaf(cl, loose, prune=not extras)

    def leaf(self, seq: Sequent, counts: Counter, bind: Bind) -> Iterator[tuple[Derivation, Bind]]:
        self.tick()
        info = self.examine(seq, bind)
        closes = []
        for i, (wl, fl) in enumerate(seq.lhs):
            if not isinstance(fl, Atom):
                continue
            for j, (wr, fr) in enumerate(seq.rhs):
                if fl == fr:
                    closes.append((("id", {"left": i, "right": j}), wl, wr))
        for j, (w, f) in enumerate(seq.rhs):
            if isinstance(f, MEmp):
                closes.append((("empR", {"right": j}), w, EPS))
        options = []
        for (rule, params), u, v in closes:
            ru, rv = _resolve(bind, u), _resolve(bind, v)
            if info.same(ru, rv):
                # nothing to guess: this closure dominates every alternative
                self.stats.branches += 1
                yield Derivation(rule, seq, params), bind
                return
            if not info.possible(ru, rv):
                continue
            options.append((self._distance(ru, rv), rule, params, ru, rv))
        options.sort(key=lambda o: o[0])
        for _, rule, params, ru, rv in options:
            b = self.unify(bind, ru, rv, info)
            if b is not None:
                self.stats.branches += 1
                yield Derivation(rule, seq, params), b
        for rule, params, key in self.positives(seq, counts):
            yield from self.apply_positive(seq, rule, params, counts + Counter([key]), bind)

    @staticmethod
    def _distance(u: str, v: str) -> tuple:
        free = is_free(u) + is_free(v)
        nums = [int("".join(c for c in l if c.isdigit()) or 0) for l in (u, v) if l != EPS]
        gap = abs(nums[0] - nums[1]) if len(nums) == 2 else 0
        return (2 - free, gap)

    def unify(self, bind: Bind, u: str, v: str, info: _Leaf) -> Bind | None:
        if u == v:
            return bind
        if not is_free(u) and not is_free(v):
            return bind if info.possible(u, v) else None
        if not is_free(u):
            u, v = v, u
        out = dict(bind)
        out[u] = v
        return out

    def positives(self, seq: Sequent, counts: Counter) -> list[tuple[str, dict, tuple]]:
        out = []
        for j, (w, f) in enumerate(seq.rhs):
            if isinstance(f, Star):
                key = ("R", w, f)
                if counts[key] < self.k:
                    out.append((label_key(w), "starR", {"right": j}, key))
        for i, (w, f) in enumerate(seq.lhs):
            if isinstance(f, Wand):
                key = ("L", w, f)
                if counts[key] < self.k:
                    out.append((label_key(w), "wandL", {"left": i}, key))
        out.sort(key=lambda o: o[0], reverse=True)
        seen = set()
        uniq = []
        for _, rule, params, key in out:
            if key not in seen:
                seen.add(key)
                uniq.append((rule, params, key))
        return uniq

    def apply_positive(self, seq, rule, params, counts, bind) -> Iterator[tuple[Derivation, Bind]]:
        params = dict(params)
        params["vars"] = [self.vars(), self.vars()]
        prems = symbolic_premises(rule, seq, params)
        gens = [lambda b, p=p: self.expand(p, counts, b) for p in prems]
        yield from self.fill_all(rule, seq, params, gens, bind)


def prove(f: Formula | str, opts: SearchOptions | None = None) -> Outcome:
    """Search for a cut-free proof of f at a generic world."""
    if isinstance(f, str):
        f = parse(f)
    return _Prover(opts or SearchOptions()).run(f)


# -- reconstruction ---------------------------------------------------------

class _Chain:
    """A run of unary rule instances above a ground sequent."""

    def __init__(self, seq: Sequent):
        self.seq = seq
        self.links: list[tuple[str, Sequent, dict]] = []

    def apply(self, rule: str, params: dict):
        try:
            (prem,) = rule_premises(rule, self.seq, params)
        except (RuleError, ValueError) as exc:
            raise ReconstructionError(f"{rule}: {exc}") from None
        self.links.append((rule, self.seq, params))
        self.seq = prem

    def rel(self, t: Rel) -> int:
        try:
            return self.seq.rels.index(t)
        except ValueError:
            raise ReconstructionError(f"relational atom {t} missing") from None

    def close(self, d: Derivation) -> Derivation:
        for rule, seq, params in reversed(self.links):
            d = Derivation(rule, seq, params, (d,))
        return d


def _find(items: tuple, item, what: str) -> int:
    try:
        return items.index(item)
    except ValueError:
        raise ReconstructionError(f"{what} {item[0]}:{item[1]} missing") from None


def reconstruct(pi: Derivation, sol: Solution, extras: Iterable[str] = ()) -> Derivation:
    """Ground a closed symbolic derivation using a solution of its constraints."""
    needed = {l for d in pi.nodes() for l in d.conclusion.labels() if is_free(l)}
    needed |= {x for d in pi.nodes() for x in d.params.get("vars", ())}
    missing = sorted(x for x in needed if x not in sol.theta)
    if missing:
        raise ReconstructionError(f"no assignment for {', '.join(missing)}")
    if any(is_free(l) for l in pi.conclusion.labels()):
        raise ReconstructionError("the end sequent must be ground")
    return _Rebuild(sol, frozenset(extras)).node(pi, (), pi.conclusion, {})


class _Rebuild:
    def __init__(self, sol: Solution, extras: frozenset):
        self.sol = sol
        self.extras = extras

    def node(self, sym: Derivation, path: tuple, seq: Sequent, rho: dict) -> Derivation:
        chain = _Chain(seq)
        for step in self.sol.sigmas.get(path, ()):
            rho = self.replay(step, chain, rho)
        f = lambda l: rho.get(l, l)
        s, p = sym.conclusion, sym.params
        match sym.rule:
            case "id":
                (wl, a), (wr, _) = s.lhs[p["left"]], s.rhs[p["right"]]
                rho = self.settle(chain, rho, lambda m: m(wl) == m(wr))
                f = lambda l: rho.get(l, l)
                cur = chain.seq
                d = Derivation("id", cur, {"left": _find(cur.lhs, (f(wl), a), "formula"),
                                           "right": _find(cur.rhs, (f(wr), a), "formula")})
                return chain.close(d)
            case "empR":
                w, a = s.rhs[p["right"]]
                rho = self.settle(chain, rho, lambda m: m(w) == EPS)
                d = Derivation("empR", chain.seq, {"right": _find(chain.seq.rhs, (EPS, a), "formula")})
                return chain.close(d)
            case "starR" | "wandL":
                for x in p["vars"]:
                    rho = dict(rho)
                    rho[x] = f(self.sol.theta[x])
                if sym.rule == "starR":
                    w, a = s.rhs[p["right"]]
                    x, y = p["vars"]
                    want = lambda m: Rel(m(x), m(y), m(w))
                else:
                    w, a = s.lhs[p["left"]]
                    x, z = p["vars"]
                    want = lambda m: Rel(m(x), m(w), m(z))
                rho = self.settle(chain, rho, lambda m: want(m) in chain.seq.rels)
                f = lambda l: rho.get(l, l)
                cur = chain.seq
                params = {"rel": chain.rel(want(f))}
                if sym.rule == "starR":
                    params["right"] = _find(cur.rhs, (f(w), a), "formula")
                else:
                    params["left"] = _find(cur.lhs, (f(w), a), "formula")
                return chain.close(self.rule(sym, path, cur, params, rho))
            case "empL":
                w, a = s.lhs[p["left"]]
                if f(w) != EPS:
                    chain.apply("empL", {"left": _find(chain.seq.lhs, (f(w), a), "formula")})
                    rho = compose(rho, {f(w): EPS})
                if Rel(EPS, EPS, EPS) not in chain.seq.rels:
                    chain.apply("U", {"label": EPS})
                sub = self.node(sym.premises[0], path + (0,), chain.seq, rho)
                return chain.close(sub)
        cur = chain.seq
        params = {k: v for k, v in p.items()}
        if "left" in p:
            params["left"] = _find(cur.lhs, (f(s.lhs[p["left"]][0]), s.lhs[p["left"]][1]), "formula")
        if "right" in p:
            params["right"] = _find(cur.rhs, (f(s.rhs[p["right"]][0]), s.rhs[p["right"]][1]), "formula")
        return chain.close(self.rule(sym, path, cur, params, rho))

    def rule(self, sym: Derivation, path: tuple, seq: Sequent, params: dict, rho: dict) -> Derivation:
        try:
            prems = rule_premises(sym.rule, seq, params)
        except RuleError as exc:
            raise ReconstructionError(f"{sym.rule}: {exc}") from None
        if len(prems) != len(sym.premises):
            raise ReconstructionError(f"{sym.rule}: premise count differs")
        subs = tuple(self.node(sp, path + (i,), gp, rho)
                     for i, (sp, gp) in enumerate(zip(sym.premises, prems)))
        return Derivation(sym.rule, seq, params, subs)

    def settle(self, chain: _Chain, rho: dict, ok) -> dict:
        """Finish with plain equality steps until ``ok`` holds."""
        m = lambda l: rho.get(l, l)
        if ok(m):
            return rho
        closure = eq_classes(chain.seq.rels)
        for step in closure.steps:
            rho = self.replay(step, chain, rho)
        m = lambda l: rho.get(l, l)
        if not ok(m):
            raise ReconstructionError("constraint not satisfied after replaying its solution")
        return rho

    def replay(self, step: Step, chain: _Chain, rho: dict) -> dict:
        f = lambda l: rho.get(l, l)
        g = lambda t: t.rename(rho)
        rels = chain.seq.rels
        match step.rule:
            case "E":
                t = g(step.principal[0])
                if t.swapped() not in rels:
                    chain.apply("E", {"rel": chain.rel(t)})
            case "U":
                x = f(step.produced[0].left)
                if Rel(x, EPS, x) not in rels:
                    chain.apply("U", {"label": x})
            case "A" | "AC":
                (w,) = step.introduced
                ts = [g(t) for t in step.principal]
                if len(ts) == 2 and (ts[0] != ts[1] or rels.count(ts[0]) > 1):
                    i = chain.rel(ts[0])
                    j = next((k for k, t in enumerate(rels) if t == ts[1] and k != i), None)
                    if j is None:
                        raise ReconstructionError(f"relational atom {ts[1]} missing")
                    chain.apply("A", {"rels": [i, j], "fresh": w})
                else:
                    chain.apply("AC", {"rel": chain.rel(ts[0]), "fresh": w})
            case "Eq1" | "Eq2":
                ((old, new),) = step.theta
                old, new = f(old), f(new)
                if old == new:
                    return rho
                t = g(step.principal[0])
                if old == EPS:
                    old, new = new, old
                rule = "Eq1" if t.right == old else "Eq2"
                chain.apply(rule, {"rel": chain.rel(t)})
                return compose(rho, {old: new})
            case "P" | "C":
                t1, t2 = (g(t) for t in step.principal)
                pos = 2 if step.rule == "P" else 1
                new, old = t1[pos], t2[pos]
                if old == new:
                    return rho
                if old == EPS:
                    t1, t2, old, new = t2, t1, new, old
                i = chain.rel(t1)
                chain.apply(step.rule, {"rels": [i, chain.rel(t2)]})
                return compose(rho, {old: new})
            case "IU":
                a, b, _ = g(step.principal[0])
                if a == EPS and b == EPS:
                    return rho
                chain.apply("IU", {"rel": chain.rel(Rel(a, b, EPS))})
                return compose(rho, {l: EPS for l in (a, b) if l != EPS})
            case "T":
                a, b, c = step.produced[0]
                chain.apply("T", {"labels": [f(a), f(b)], "fresh": c})
            case _:
                raise ReconstructionError(f"unexpected step {step.rule}")
        return rho
