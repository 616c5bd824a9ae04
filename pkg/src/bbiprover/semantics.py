"""Finite non-deterministic monoids, forcing, and countermodel search.

Elements are 0..size-1 with 0 as the unit.  A composition table maps a
pair of elements to a bitmask of elements (bit k set when k is in the
composition).  Formula evaluation is vectorised over valuations: every
subformula evaluates to an array holding, for each valuation, the
bitmask of worlds that force it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .formula import And, Atom, Bot, Formula, Imp, MEmp, Not, Or, Star, Top, Wand, atoms, show

MAX_SIZE = 4


@dataclass(frozen=True)
class Flags:
    pd: bool = False
    td: bool = False
    iu: bool = False
    cancellative: bool = False

    @property
    def partial(self) -> bool:
        # total and cancellative models are both taken to be partial-deterministic
        return self.pd or self.td or self.cancellative

    @staticmethod
    def for_rules(extras) -> "Flags":
        """The model class matching a set of enabled structural extras."""
        extras = set(extras)
        return Flags(pd="P" in extras, td="T" in extras, iu="IU" in extras, cancellative="C" in extras)


@dataclass(frozen=True)
class Model:
    size: int
    table: tuple[tuple[int, ...], ...]
    valuation: Mapping[str, frozenset] = field(default_factory=dict)
    eps: int = 0

    def comp(self, a: int, b: int) -> frozenset:
        return _elements(self.table[a][b])

    def with_valuation(self, valuation: Mapping[str, Iterable]) -> "Model":
        return Model(self.size, self.table, {k: frozenset(v) for k, v in valuation.items()}, self.eps)

    def __str__(self):
        n = self.size
        name = lambda k: "e" if k == 0 else f"m{k}"
        lines = ["composition:"]
        for a in range(n):
            row = []
            for b in range(n):
                items = ",".join(name(k) for k in sorted(self.comp(a, b)))
                row.append("{" + items + "}")
            lines.append(f"  {name(a):>3} | " + " ".join(f"{c:<10}" for c in row))
        lines.append("valuation:")
        for p in sorted(self.valuation):
            lines.append(f"  {p} = {{{', '.join(name(k) for k in sorted(self.valuation[p]))}}}")
        return "\n".join(lines)


def _elements(mask: int) -> frozenset:
    return frozenset(k for k in range(mask.bit_length()) if mask >> k & 1)


def _mask(items: Iterable[int]) -> int:
    out = 0
    for k in items:
        out |= 1 << k
    return out


# -- model conditions -------------------------------------------------------

def is_monoid(m: Model) -> bool:
    """Identity, commutativity and associativity, checked literally."""
    n, R = m.size, m.comp
    for a in range(n):
        if R(m.eps, a) != {a}:
            return False
        for b in range(n):
            if R(a, b) != R(b, a):
                return False
    for a, b, c, d in itertools.product(range(n), repeat=4):
        # (a,k |> d) and (b,c |> k)  implies  (a,b |> l) and (l,c |> d) for some l
        if any(d in R(a, k) and k in R(b, c) for k in range(n)):
            if not any(l in R(a, b) and d in R(l, c) for l in range(n)):
                return False
    return True


def satisfies(m: Model, flags: Flags) -> bool:
    n, R = m.size, m.comp
    pairs = list(itertools.product(range(n), repeat=2))
    if flags.partial and any(len(R(a, b)) > 1 for a, b in pairs):
        return False
    if flags.td and any(len(R(a, b)) != 1 for a, b in pairs):
        return False
    if flags.iu and any(m.eps in R(a, b) for a, b in pairs if (a, b) != (m.eps, m.eps)):
        return False
    if flags.cancellative:
        for a, b, d in itertools.product(range(n), repeat=3):
            if b != d and R(a, b) & R(a, d):
                return False
    return True


def enumerate_models(size: int, flags: Flags = Flags()) -> Iterator[Model]:
    """All composition tables on size elements, unit 0, meeting the flags."""
    if size < 1:
        raise ValueError("a model needs at least one element")
    if size > MAX_SIZE:
        raise ValueError(f"model size is limited to {MAX_SIZE}")
    n = size
    table = [[-1] * n for _ in range(n)]
    for a in range(n):
        table[0][a] = table[a][0] = 1 << a
    cells = [(a, b) for a in range(1, n) for b in range(a, n)]
    options = [v for v in range(1 << n)
               if (not flags.partial or v & (v - 1) == 0)
               and (not flags.td or v != 0)
               and (not flags.iu or not v & 1)]
    triples = list(itertools.product(range(1, n), repeat=3))

    def assoc_ok() -> bool:
        for a, b, c in triples:
            left = _known_lift(table, table[a][b], c)
            if left < 0:
                continue
            right = _known_lift(table, table[b][c], a)
            if right >= 0 and left != right:
                return False
        return True

    def go(i: int) -> Iterator[Model]:
        if i == len(cells):
            m = Model(n, tuple(tuple(r) for r in table))
            if not flags.cancellative or satisfies(m, flags):
                yield m
            return
        a, b = cells[i]
        for v in options:
            table[a][b] = table[b][a] = v
            if assoc_ok():
                yield from go(i + 1)
        table[a][b] = table[b][a] = -1

    yield from go(0)


def _known_lift(table, mask: int, c: int) -> int:
    """The composition of a set with c, or -1 while some entry is unknown."""
    if mask < 0:
        return -1
    out = 0
    k = 0
    while mask:
        if mask & 1:
            v = table[k][c]
            if v < 0:
                return -1
            out |= v
        mask >>= 1
        k += 1
    return out


# -- forcing ----------------------------------------------------------------

def _evaluate(f: Formula, table, n: int, val: Mapping[str, np.ndarray], memo: dict) -> np.ndarray:
    """Bitmask of forcing worlds, per valuation."""
    hit = memo.get(f)
    if hit is not None:
        return hit
    full = (1 << n) - 1
    shape = next(iter(val.values())).shape if val else (1,)
    match f:
        case Atom(name):
            if name not in val:
                raise KeyError(f"no valuation for atom {name}")
            out = val[name]
        case Top():
            out = np.full(shape, full, dtype=np.int64)
        case Bot():
            out = np.zeros(shape, dtype=np.int64)
        case MEmp():
            out = np.full(shape, 1, dtype=np.int64)
        case Not(a):
            out = full & ~_evaluate(a, table, n, val, memo)
        case And(a, b):
            out = _evaluate(a, table, n, val, memo) & _evaluate(b, table, n, val, memo)
        case Or(a, b):
            out = _evaluate(a, table, n, val, memo) | _evaluate(b, table, n, val, memo)
        case Imp(a, b):
            out = (full & ~_evaluate(a, table, n, val, memo)) | _evaluate(b, table, n, val, memo)
        case Star(a, b):
            A, B = _evaluate(a, table, n, val, memo), _evaluate(b, table, n, val, memo)
            out = np.zeros(shape, dtype=np.int64)
            for x in range(n):
                for y in range(n):
                    both = (A >> x) & (B >> y) & 1
                    out |= both * table[x][y]
        case Wand(a, b):
            A, B = _evaluate(a, table, n, val, memo), _evaluate(b, table, n, val, memo)
            out = np.zeros(shape, dtype=np.int64)
            for m in range(n):
                ok = np.ones(shape, dtype=bool)
                for x in range(n):
                    # every y in m.x must force b whenever x forces a
                    leak = (table[m][x] & ~B) != 0
                    ok &= ~(((A >> x) & 1).astype(bool) & leak)
                out |= ok.astype(np.int64) << m
        case _:
            raise TypeError(f"not a formula: {f!r}")
    memo[f] = out
    return out


def _single(m: Model, f: Formula) -> int:
    val = {p: np.array([_mask(m.valuation[p])], dtype=np.int64) for p in m.valuation}
    return int(_evaluate(f, m.table, m.size, val, {})[0])


def forces(m: Model, world: int, f: Formula) -> bool:
    if not 0 <= world < m.size:
        raise ValueError(f"no world {world} in a model of size {m.size}")
    missing = atoms(f) - set(m.valuation)
    if missing:
        raise KeyError(f"unknown atom(s): {', '.join(sorted(missing))}")
    return bool(_single(m, f) >> world & 1)


def valid_in(m: Model, f: Formula) -> bool:
    missing = atoms(f) - set(m.valuation)
    if missing:
        raise KeyError(f"unknown atom(s): {', '.join(sorted(missing))}")
    return _single(m, f) == (1 << m.size) - 1


@dataclass(frozen=True)
class Countermodel:
    model: Model
    world: int

    def __str__(self):
        name = "e" if self.world == 0 else f"m{self.world}"
        return f"{self.model}\nfails at: {name}"


def countermodel(f: Formula, max_size: int = 3, flags: Flags = Flags(),
                 max_atoms: int = 4) -> Countermodel | None:
    """First (model, valuation, world) falsifying f, searching small models.

    None only means that no countermodel exists up to ``max_size``.
    """
    if max_size > MAX_SIZE:
        raise ValueError(f"model size is limited to {MAX_SIZE}")
    names = sorted(atoms(f))
    if len(names) > max_atoms:
        raise ValueError(f"{len(names)} atoms exceed the limit of {max_atoms}")
    for n in range(1, max_size + 1):
        k = len(names)
        grid = np.indices((1 << n,) * k).reshape(k, -1) if k else np.zeros((0, 1), dtype=np.int64)
        val = {p: grid[i].astype(np.int64) for i, p in enumerate(names)}
        full = (1 << n) - 1
        for skel in enumerate_models(n, flags):
            res = _evaluate(f, skel.table, n, dict(val), {}) if val else \
                np.broadcast_to(_evaluate(f, skel.table, n, {}, {}), (1,))
            bad = np.nonzero(res != full)[0]
            if bad.size:
                i = int(bad[0])
                assignment = {p: _elements(int(val[p][i])) for p in names}
                world = next(w for w in range(n) if not int(res[i]) >> w & 1)
                return Countermodel(skel.with_valuation(assignment), world)
    return None


def describe(f: Formula, cm: Countermodel) -> str:
    return f"countermodel for {show(f)}\n{cm}"
