"""Brute-force ground truth: enumerate o-graphs and evaluate formulas directly.

This module is the independent side of every differential test, so it must
not share evaluation code with the rest of the package.  It resolves
predicate atoms by enumerating complete runs of the query automata (no
forward/backward set propagation) and walks formulas with its own recursive
evaluator.  Deliberately naive; never used on large instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator

from . import logic as L
from .structures import Bit, OGraph, PLetter, TypedDataWord

# Marker checked by a test: the pipeline evaluator must not be imported here.
INDEPENDENT_EVALUATOR = True


@dataclass(frozen=True)
class EnumConfig:
    in_alphabet: tuple
    out_alphabet: tuple
    max_in: int = 3
    max_out: int = 4
    non_erasing_only: bool = False

    def __post_init__(self):
        if self.max_in < 0 or self.max_out < 0:
            raise ValueError("bounds must be >= 0")
        if set(self.in_alphabet) & set(self.out_alphabet):
            # disjointness is assumed by the data-word encoding only; the
            # corpus reuses letters on both sides, so just leave a hook here
            pass


def enumerate_ographs(cfg: EnumConfig) -> Iterator[OGraph]:
    """All o-graphs within bounds, duplicate-free, in a stable order."""
    for n in range(1, cfg.max_in + 1):
        for u in itertools.product(cfg.in_alphabet, repeat=n):
            for m in range(0, cfg.max_out + 1):
                if cfg.non_erasing_only and m < n:
                    continue
                for v in itertools.product(cfg.out_alphabet, repeat=m):
                    for o in itertools.product(range(1, n + 1), repeat=m):
                        if cfg.non_erasing_only and set(o) != set(range(1, n + 1)):
                            continue
                        yield OGraph(u, v, o)


def count_ographs(cfg: EnumConfig) -> int:
    return sum(1 for _ in enumerate_ographs(cfg))


def enumerate_datawords(types, letters, max_len: int) -> Iterator[TypedDataWord]:
    """All typed data words of length 1..max_len over the two alphabets."""
    for n in range(1, max_len + 1):
        for data in itertools.product(range(1, n + 1), repeat=n):
            m = max(data)
            if set(data) != set(range(1, m + 1)):
                continue
            for tmap in itertools.product(types, repeat=m):
                for gs in itertools.product(letters, repeat=n):
                    yield TypedDataWord(tuple((gs[i], data[i], tmap[data[i] - 1]) for i in range(n)))


# ---------------------------------------------------------------------------
# run-level predicate semantics


def _all_accepting_runs(base, word):
    """Every accepting state sequence q_1 .. q_{n+1}, by depth-first search."""
    smap = base.succ_map()
    runs = []

    def go(prefix):
        t = len(prefix) - 1
        if t == len(word):
            if prefix[-1] in base.final:
                runs.append(tuple(prefix))
            return
        for q in sorted(smap.get((prefix[-1], word[t]), ()), key=str):
            prefix.append(q)
            go(prefix)
            prefix.pop()

    for q0 in sorted(base.initial, key=str):
        go([q0])
    return runs


class _PairCache:
    def __init__(self, table):
        self.table = table
        self.cache = {}

    def pairs(self, name, word):
        key = (name, word)
        if key not in self.cache:
            q = self.table.get(name)
            sel = set()
            for run in _all_accepting_runs(q.base, word):
                for p, r in q.selecting_pairs:
                    for i in range(1, len(word) + 1):
                        if run[i - 1] != p:
                            continue
                        for j in range(1, len(word) + 1):
                            if run[j - 1] == r:
                                sel.add((i, j))
            self.cache[key] = sel
        return self.cache[key]


def _letter_base(x):
    while isinstance(x, (Bit, PLetter)):
        x = x.base
    return x


def _letter_has_label(spec, x) -> bool:
    while True:
        if x == spec:
            return True
        if isinstance(x, (Bit, PLetter)):
            x = x.base
        else:
            return False


# ---------------------------------------------------------------------------
# the independent evaluator


def holds(phi, g: OGraph, table) -> bool:
    """Ground-truth satisfaction of a sentence on an o-graph."""
    cache = _PairCache(table)
    if isinstance(phi, L.EltFormula):
        points = [("in", i) for i in range(1, len(g.input) + 1)]
        points += [("out", j) for j in range(1, len(g.output) + 1)]
        for assignment in itertools.product([0, 1], repeat=len(points) * len(phi.setvars)):
            sets = {}
            for k, x in enumerate(phi.setvars):
                chunk = assignment[k * len(points) : (k + 1) * len(points)]
                sets[x] = {points[i] for i in range(len(points)) if chunk[i]}
            if _sat(phi.body, g, cache, {}, sets):
                return True
        return False
    return _sat(phi, g, cache, {}, {})


def _point(term, env, g):
    kind, pos = env[term.name]
    if isinstance(term, L.OTerm):
        return ("in", g.origin[pos - 1]) if kind == "out" else ("in", pos)
    return kind, pos


def _sat(f, g, cache, env, sets) -> bool:
    if isinstance(f, L.TrueF):
        return True
    if isinstance(f, L.FalseF):
        return False
    if isinstance(f, L.Not):
        return not _sat(f.sub, g, cache, env, sets)
    if isinstance(f, L.And):
        for p in f.parts:
            if not _sat(p, g, cache, env, sets):
                return False
        return True
    if isinstance(f, L.Or):
        for p in f.parts:
            if _sat(p, g, cache, env, sets):
                return True
        return False
    if isinstance(f, L.Implies):
        return _sat(f.right, g, cache, env, sets) if _sat(f.left, g, cache, env, sets) else True
    if isinstance(f, L.Iff):
        return _sat(f.left, g, cache, env, sets) == _sat(f.right, g, cache, env, sets)
    if isinstance(f, L.Quant):
        points = []
        if f.sort in ("in", "any"):
            points += [("in", i) for i in range(1, len(g.input) + 1)]
        if f.sort in ("out", "any"):
            points += [("out", j) for j in range(1, len(g.output) + 1)]
        hits = 0
        for pt in points:
            if _sat(f.body, g, cache, {**env, f.var: pt}, sets):
                hits += 1
                if f.kind == "E":
                    return True
            elif f.kind == "A":
                return False
        return f.kind == "A"
    if isinstance(f, L.OutLabel):
        kind, pos = _point(f.term, env, g)
        return kind == "out" and _letter_has_label(f.label, g.output[pos - 1])
    if isinstance(f, L.PBit):
        kind, pos = _point(f.term, env, g)
        if kind != "out":
            return False
        x = g.output[pos - 1]
        return isinstance(x, PLetter) and bool(x.bits[f.index])
    if isinstance(f, L.XBit):
        kind, pos = _point(f.term, env, g)
        x = g.output[pos - 1] if kind == "out" else g.input[pos - 1]
        if isinstance(x, PLetter):
            x = x.base
        return isinstance(x, Bit) and bool(x.bits[f.index])
    if isinstance(f, L.LeqOut):
        k1, p1 = _point(f.t1, env, g)
        k2, p2 = _point(f.t2, env, g)
        return k1 == k2 == "out" and p1 <= p2
    if isinstance(f, L.Eq):
        k1, p1 = _point(f.t1, env, g)
        k2, p2 = _point(f.t2, env, g)
        return k1 == k2 == "out" and p1 == p2
    if isinstance(f, L.InT):
        return _point(f.term, env, g)[0] == "in"
    if isinstance(f, L.OutT):
        return _point(f.term, env, g)[0] == "out"
    if isinstance(f, L.Member):
        return _point(f.term, env, g) in sets[f.setvar]
    if isinstance(f, L.Pred):
        pts = [_point(a, env, g) for a in f.args]
        if any(k != "in" for k, _ in pts):
            return False
        sel = cache.pairs(f.name, tuple(g.input))
        if len(pts) == 2:
            return (pts[0][1], pts[1][1]) in sel
        if len(pts) == 1:
            return (pts[0][1], pts[0][1]) in sel
        return (1, 1) in sel
    raise ValueError(f"oracle cannot evaluate {f!r}")


def holds_ld(psi, w: TypedDataWord, table) -> bool:
    """Ground-truth satisfaction on a typed data word."""
    cache = _PairCache(table)
    cw = w.class_word()
    n = len(w.letters)

    def ev(f, env):
        if isinstance(f, L.TrueF):
            return True
        if isinstance(f, L.FalseF):
            return False
        if isinstance(f, L.Not):
            return not ev(f.sub, env)
        if isinstance(f, L.And):
            return all(ev(p, env) for p in f.parts)
        if isinstance(f, L.Or):
            return any(ev(p, env) for p in f.parts)
        if isinstance(f, L.Implies):
            return ev(f.right, env) if ev(f.left, env) else True
        if isinstance(f, L.Iff):
            return ev(f.left, env) == ev(f.right, env)
        if isinstance(f, L.Quant):
            if f.kind == "E":
                return any(ev(f.body, {**env, f.var: i}) for i in range(1, n + 1))
            return all(ev(f.body, {**env, f.var: i}) for i in range(1, n + 1))
        if isinstance(f, L.OutLabel):
            return _letter_has_label(f.label, w.letters[env[f.term.name] - 1][0])
        if isinstance(f, L.LeqOut):
            return env[f.t1.name] <= env[f.t2.name]
        if isinstance(f, L.Eq):
            return env[f.t1.name] == env[f.t2.name]
        if isinstance(f, L.Pred):
            sel = cache.pairs(f.name, cw)
            ds = [w.datum(env[a.name]) for a in f.args]
            if len(ds) == 2:
                return (ds[0], ds[1]) in sel
            if len(ds) == 1:
                return (ds[0], ds[0]) in sel
            return (1, 1) in sel
        raise ValueError(f"data-word oracle cannot evaluate {f!r}")

    return ev(psi, {})


# ---------------------------------------------------------------------------
# search helpers built on the evaluator


def brute_sat(phi, table, cfg: EnumConfig):
    """First enumerated model, or None within the bounds."""
    for g in enumerate_ographs(cfg):
        if holds(phi, g, table):
            return g
    return None


def brute_models(phi, table, u, out_alphabet, max_out: int = 4) -> list:
    """All models with input exactly u, output length up to max_out."""
    u = tuple(u)
    out = []
    for m in range(0, max_out + 1):
        for v in itertools.product(tuple(out_alphabet), repeat=m):
            for o in itertools.product(range(1, len(u) + 1), repeat=m):
                g = OGraph(u, v, o)
                if holds(phi, g, table):
                    out.append(g)
    return out


def brute_domain(phi, table, in_alphabet, out_alphabet, max_in: int = 3, max_out: int = 4) -> set:
    """Input words (up to max_in) for which some bounded model exists."""
    dom = set()
    for n in range(1, max_in + 1):
        for u in itertools.product(tuple(in_alphabet), repeat=n):
            if brute_models(phi, table, u, out_alphabet, max_out):
                dom.add(u)
    return dom


def brute_sat_ld(psi, table, types, letters, max_len: int = 3):
    for w in enumerate_datawords(types, letters, max_len):
        if holds_ld(psi, w, table):
            return w
    return None
