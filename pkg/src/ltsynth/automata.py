"""Finite automata over finite alphabets and query automata for binary input predicates.

A query automaton is an NFA equipped with a set of selecting state pairs.  A
pair of positions (i, j) of a word u is selected when some accepting run is in
state p just before reading u(i) and in state q just before reading u(j), for
a selecting pair (p, q).  Positions are 1-based.  This is the automaton form
of a binary regular predicate; 0-ary and unary predicates are encoded as
query automata whose selected-pair set is, respectively, all pairs or the
diagonal pairs {(i, i)}.

All values here are immutable and hashable; operations are pure functions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable


class AutomatonError(ValueError):
    """Malformed automaton or input outside the declared alphabet."""


def _fmt(sym) -> str:
    from .structures import fmt_letter

    return fmt_letter(sym)


@dataclass(frozen=True)
class Nfa:
    """Nondeterministic finite automaton with named states.

    ``alphabet`` and ``states`` are ordered tuples; the declared order is the
    canonical order used everywhere else (search, dumps, DOT).
    """

    alphabet: tuple
    states: tuple
    initial: frozenset
    final: frozenset
    transitions: frozenset  # of (state, symbol, state)

    def __post_init__(self):
        sts, syms = set(self.states), set(self.alphabet)
        if len(self.states) != len(sts):
            raise AutomatonError("duplicate state names")
        if not self.initial <= sts or not self.final <= sts:
            raise AutomatonError("initial/final not subsets of states")
        for p, a, q in self.transitions:
            if p not in sts or q not in sts:
                raise AutomatonError(f"transition uses undeclared state: {p} {a} {q}")
            if a not in syms:
                raise AutomatonError(f"transition uses undeclared symbol: {_fmt(a)}")

    def step(self, srcs: frozenset, symbol) -> frozenset:
        return frozenset(q for p, a, q in self.transitions if a == symbol and p in srcs)

    def pre(self, dsts: frozenset, symbol) -> frozenset:
        return frozenset(p for p, a, q in self.transitions if a == symbol and q in dsts)

    def succ_map(self) -> dict:
        """Transition function as (state, symbol) -> frozenset of states."""
        out: dict = {}
        for p, a, q in self.transitions:
            out.setdefault((p, a), set()).add(q)
        return {k: frozenset(v) for k, v in out.items()}


def nfa(alphabet, states, initial, final, transitions) -> Nfa:
    """Convenience constructor accepting any iterables."""
    return Nfa(
        tuple(alphabet),
        tuple(states),
        frozenset(initial),
        frozenset(final),
        frozenset(tuple(t) for t in transitions),
    )


def run_accepts(a: Nfa, word) -> bool:
    """True iff some accepting run of ``a`` exists on ``word``."""
    syms = set(a.alphabet)
    cur = a.initial
    for sym in word:
        if sym not in syms:
            raise AutomatonError(f"symbol {_fmt(sym)} not in alphabet")
        cur = a.step(cur, sym)
        if not cur:
            return False
    return bool(cur & a.final)


def determinize(a: Nfa) -> Nfa:
    """Subset construction, reachable part only, deterministically numbered."""
    start = a.initial
    names = {start: "d0"}
    order = [start]
    trans = []
    i = 0
    while i < len(order):
        src = order[i]
        i += 1
        for sym in a.alphabet:
            dst = a.step(src, sym)
            if dst not in names:
                names[dst] = f"d{len(names)}"
                order.append(dst)
            trans.append((names[src], sym, names[dst]))
    final = frozenset(names[s] for s in order if s & a.final)
    return nfa(a.alphabet, [names[s] for s in order], [names[start]], final, trans)


def complement(a: Nfa) -> Nfa:
    """Automaton for the complement language over the same alphabet."""
    d = determinize(a)  # already complete: subset construction keeps the empty set
    return Nfa(d.alphabet, d.states, d.initial, frozenset(set(d.states) - d.final), d.transitions)


def intersect(a: Nfa, b: Nfa) -> Nfa:
    """Product automaton for the intersection; alphabets must agree."""
    if set(a.alphabet) != set(b.alphabet):
        raise AutomatonError("intersect: mixed alphabets")
    init = frozenset((p, q) for p in a.initial for q in b.initial)
    seen = list(init)
    seen_set = set(init)
    amap, bmap = a.succ_map(), b.succ_map()
    trans = []
    i = 0
    while i < len(seen):
        p, q = seen[i]
        i += 1
        for sym in a.alphabet:
            for p2 in amap.get((p, sym), ()):
                for q2 in bmap.get((q, sym), ()):
                    if (p2, q2) not in seen_set:
                        seen_set.add((p2, q2))
                        seen.append((p2, q2))
                    trans.append(((p, q), sym, (p2, q2)))
    final = [s for s in seen if s[0] in a.final and s[1] in b.final]
    return nfa(a.alphabet, seen, init, final, trans)


def is_empty(a: Nfa) -> bool:
    """True iff the recognised language is empty (no reachable final state)."""
    seen = set(a.initial)
    todo = list(a.initial)
    smap = a.succ_map()
    while todo:
        p = todo.pop()
        if p in a.final:
            return False
        for sym in a.alphabet:
            for q in smap.get((p, sym), ()):
                if q not in seen:
                    seen.add(q)
                    todo.append(q)
    return not (a.initial & a.final)


def words_upto(alphabet, max_len: int) -> Iterable[tuple]:
    """All words over ``alphabet`` of length 0..max_len, in length-then-lex order."""
    for n in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=n)


# ---------------------------------------------------------------------------
# query automata


@dataclass(frozen=True)
class QueryAutomaton:
    """NFA plus selecting pairs; houses one binary input predicate."""

    base: Nfa
    selecting_pairs: frozenset  # of (state, state)

    def __post_init__(self):
        sts = set(self.base.states)
        for p, q in self.selecting_pairs:
            if p not in sts or q not in sts:
                raise AutomatonError(f"selecting pair uses undeclared state: ({p}, {q})")

    @property
    def alphabet(self):
        return self.base.alphabet


def query(base: Nfa, pairs) -> QueryAutomaton:
    return QueryAutomaton(base, frozenset(tuple(p) for p in pairs))


def _forward_sets(a: Nfa, word):
    cur = a.initial
    out = [cur]
    for sym in word:
        cur = a.step(cur, sym)
        out.append(cur)
    return out  # index t (0-based) = states before reading word[t]


def _backward_sets(a: Nfa, word):
    cur = a.final
    out = [cur]
    for sym in reversed(word):
        cur = a.pre(cur, sym)
        out.append(cur)
    out.reverse()
    return out  # index t = states from which word[t:] can reach a final state


@lru_cache(maxsize=4096)
def selected_pairs(q: QueryAutomaton, word: tuple) -> frozenset:
    """All selected position pairs (1-based) of ``q`` on ``word``.

    (i, j) is selected iff some accepting run is in p before reading word(i)
    and in q before reading word(j) for a selecting pair (p, q).  i and j are
    unordered in the sense that both i <= j and i > j pairs are reported.
    """
    if not word:
        raise AutomatonError("selected_pairs: empty word")
    syms = set(q.base.alphabet)
    for sym in word:
        if sym not in syms:
            raise AutomatonError(f"symbol {_fmt(sym)} not in alphabet")
    n = len(word)
    fwd = _forward_sets(q.base, word)
    bwd = _backward_sets(q.base, word)
    sp = q.selecting_pairs
    smap = q.base.succ_map()
    out = set()
    for s in range(1, n + 1):
        # rel holds pairs (state at s, state at t) linked by a path over word[s..t-1]
        rel = {(p, p) for p in fwd[s - 1]}
        for t in range(s, n + 1):
            for p, r in rel:
                if r in bwd[t - 1]:
                    if (p, r) in sp:
                        out.add((s, t))
                    if t != s and (r, p) in sp:
                        out.add((t, s))
            if t < n:
                sym = word[t - 1]
                rel = {(p, r2) for p, r in rel for r2 in smap.get((r, sym), ())}
    return frozenset(out)


def holds_0ary(q: QueryAutomaton, word: tuple) -> bool:
    """Value of a 0-ary predicate: its global property on ``word``."""
    return (1, 1) in selected_pairs(q, tuple(word))


def holds_unary(q: QueryAutomaton, word: tuple, i: int) -> bool:
    return (i, i) in selected_pairs(q, tuple(word))


# -- builders ---------------------------------------------------------------


def _total(alphabet, states, initial, final, extra):
    """NFA whose listed 'extra' transitions are added to none by default."""
    return nfa(alphabet, states, initial, final, extra)


def pred_leq_in(alphabet) -> QueryAutomaton:
    """Binary predicate x <=_in y."""
    alphabet = tuple(alphabet)
    trans = []
    for a in alphabet:
        trans += [("q0", a, "q0"), ("q0", a, "q1"), ("q1", a, "q2"), ("q2", a, "q2")]
    base = nfa(alphabet, ["q0", "q1", "q2"], ["q0", "q1"], ["q1", "q2"], trans)
    return query(base, [("q1", "q1"), ("q1", "q2")])


def pred_lt_in(alphabet) -> QueryAutomaton:
    """Binary predicate x <_in y (strict)."""
    q = pred_leq_in(alphabet)
    return query(q.base, [("q1", "q2")])


def pred_eq(alphabet) -> QueryAutomaton:
    """Binary predicate x = y on input positions."""
    q = pred_leq_in(alphabet)
    return query(q.base, [("q1", "q1")])


def pred_succ_in(alphabet) -> QueryAutomaton:
    """Binary predicate y = x + 1 on input positions."""
    alphabet = tuple(alphabet)
    trans = []
    for a in alphabet:
        trans += [
            ("q0", a, "q0"),
            ("q0", a, "qx"),
            ("qx", a, "qy"),
            ("qy", a, "qf"),
            ("qf", a, "qf"),
        ]
    base = nfa(alphabet, ["q0", "qx", "qy", "qf"], ["q0", "qx"], ["qf"], trans)
    return query(base, [("qx", "qy")])


def pred_label(sigma, alphabet) -> QueryAutomaton:
    """Unary predicate 'position is labelled sigma', encoded on the diagonal."""
    alphabet = tuple(alphabet)
    if sigma not in alphabet:
        raise AutomatonError(f"label {_fmt(sigma)} not in alphabet")
    trans = [("qh", sigma, "q2")]
    for a in alphabet:
        trans += [("q0", a, "q0"), ("q0", a, "qh"), ("q2", a, "q2")]
    base = nfa(alphabet, ["q0", "qh", "q2"], ["q0", "qh"], ["q2"], trans)
    return query(base, [("qh", "qh")])


def pred_letter_test(name_hint, keep, alphabet) -> QueryAutomaton:
    """Unary predicate 'letter of the position is in ``keep``' (diagonal encoding)."""
    alphabet = tuple(alphabet)
    keep = set(keep)
    trans = [("qh", a, "q2") for a in alphabet if a in keep]
    for a in alphabet:
        trans += [("q0", a, "q0"), ("q0", a, "qh"), ("q2", a, "q2")]
    base = nfa(alphabet, ["q0", "qh", "q2"], ["q0", "qh"], ["q2"], trans)
    return query(base, [("qh", "qh")])


def pred_min_in(alphabet) -> QueryAutomaton:
    """Unary predicate 'position is the first input position'."""
    alphabet = tuple(alphabet)
    trans = []
    for a in alphabet:
        trans += [("q0", a, "q1"), ("q1", a, "q1")]
    base = nfa(alphabet, ["q0", "q1"], ["q0"], ["q1"], trans)
    return query(base, [("q0", "q0")])


def pred_between(sigma, alphabet) -> QueryAutomaton:
    """Binary predicate: some position strictly between x and y carries sigma."""
    alphabet = tuple(alphabet)
    if sigma not in alphabet:
        raise AutomatonError(f"label {_fmt(sigma)} not in alphabet")
    trans = [("qs", sigma, "qy")]
    for a in alphabet:
        trans += [
            ("qx", a, "qx"),
            ("qx", a, "qs"),
            ("qs", a, "qs"),
            ("qy", a, "qy"),
            ("qy", a, "qf"),
            ("qf", a, "qf"),
        ]
    base = nfa(alphabet, ["qx", "qs", "qy", "qf"], ["qx"], ["qf"], trans)
    return query(base, [("qx", "qy")])


def pred_regular_domain(lang: Nfa) -> QueryAutomaton:
    """0-ary predicate: the whole input word belongs to L(lang)."""
    pairs = [(p, q) for p in lang.states for q in lang.states]
    return query(lang, pairs)


def std_predicates(alphabet) -> "PredicateTable":
    """The stock table: leq, lt, eq, succ, min, lab_<sigma>, between_<sigma>."""
    t = PredicateTable(tuple(alphabet))
    t.add("leq", pred_leq_in(alphabet))
    t.add("lt", pred_lt_in(alphabet))
    t.add("eq", pred_eq(alphabet))
    t.add("succ", pred_succ_in(alphabet))
    t.add("min", pred_min_in(alphabet))
    for a in alphabet:
        t.add(f"lab_{a}", pred_label(a, alphabet))
        t.add(f"between_{a}", pred_between(a, alphabet))
    return t


# -- derived forms used when normalising predicate atoms --------------------


def qa_converse(q: QueryAutomaton) -> QueryAutomaton:
    """Swap the roles of the two arguments."""
    return query(q.base, [(b, a) for a, b in q.selecting_pairs])


def qa_first(q: QueryAutomaton) -> QueryAutomaton:
    """Binary predicate (i, j) -> q(i, i); j is unconstrained."""
    diag = [p for p, r in q.selecting_pairs if p == r]
    return query(q.base, [(p, s) for p in diag for s in q.base.states])


def qa_second(q: QueryAutomaton) -> QueryAutomaton:
    """Binary predicate (i, j) -> q(j, j); i is unconstrained."""
    diag = [p for p, r in q.selecting_pairs if p == r]
    return query(q.base, [(s, p) for p in diag for s in q.base.states])


# -- boolean combinations ----------------------------------------------------


def combine(op: str, args) -> QueryAutomaton:
    """Boolean combination of query automata, pointwise on selected-pair sets.

    Negation is the pair-set complement relative to dom(u)^2; it goes through
    a marked-word construction and may blow up the state count, so keep it to
    small operands.
    """
    args = list(args)
    if not args:
        raise AutomatonError("combine: no arguments")
    alph = args[0].base.alphabet
    for a in args[1:]:
        if set(a.base.alphabet) != set(alph):
            raise AutomatonError("combine: mixed alphabets")
    if op == "and":
        out = args[0]
        for a in args[1:]:
            out = _qa_and(out, a)
        return out
    if op == "or":
        out = args[0]
        for a in args[1:]:
            out = _qa_or(out, a)
        return out
    if op == "not":
        if len(args) != 1:
            raise AutomatonError("combine: not takes one argument")
        return _qa_not(args[0])
    raise AutomatonError(f"combine: unknown op {op!r}")


def _qa_and(a: QueryAutomaton, b: QueryAutomaton) -> QueryAutomaton:
    amap, bmap = a.base.succ_map(), b.base.succ_map()
    init = frozenset((p, q) for p in a.base.initial for q in b.base.initial)
    seen = list(init)
    seen_set = set(init)
    trans = []
    i = 0
    while i < len(seen):
        p, q = seen[i]
        i += 1
        for sym in a.base.alphabet:
            for p2 in amap.get((p, sym), ()):
                for q2 in bmap.get((q, sym), ()):
                    if (p2, q2) not in seen_set:
                        seen_set.add((p2, q2))
                        seen.append((p2, q2))
                    trans.append(((p, q), sym, (p2, q2)))
    final = [s for s in seen if s[0] in a.base.final and s[1] in b.base.final]
    base = nfa(a.base.alphabet, seen, init, final, trans)
    pairs = [
        ((p1, p2), (q1, q2))
        for (p1, q1) in a.selecting_pairs
        for (p2, q2) in b.selecting_pairs
        if (p1, p2) in seen_set and (q1, q2) in seen_set
    ]
    return query(base, pairs)


def _qa_or(a: QueryAutomaton, b: QueryAutomaton) -> QueryAutomaton:
    sa = [("A", s) for s in a.base.states]
    sb = [("B", s) for s in b.base.states]
    trans = [(("A", p), x, ("A", q)) for p, x, q in a.base.transitions]
    trans += [(("B", p), x, ("B", q)) for p, x, q in b.base.transitions]
    base = nfa(
        a.base.alphabet,
        sa + sb,
        [("A", s) for s in a.base.initial] + [("B", s) for s in b.base.initial],
        [("A", s) for s in a.base.final] + [("B", s) for s in b.base.final],
        trans,
    )
    pairs = [(("A", p), ("A", q)) for p, q in a.selecting_pairs]
    pairs += [(("B", p), ("B", q)) for p, q in b.selecting_pairs]
    return query(base, pairs)


# Negation route: encode the predicate as a regular language of marked words
# over alphabet x {0,1,2,3} (bit 1 = x-mark, bit 2 = y-mark), complement that
# language, intersect with well-formed markings, and convert back.


def _marked_from_query(q: QueryAutomaton) -> Nfa:
    alph = q.base.alphabet
    malph = [(a, m) for a in alph for m in (0, 1, 2, 3)]
    sps = sorted(q.selecting_pairs, key=lambda pq: (q.base.states.index(pq[0]), q.base.states.index(pq[1])))
    smap = q.base.succ_map()
    states, trans = [], []
    for k, (px, qy) in enumerate(sps):
        for s in q.base.states:
            for m in (0, 1, 2, 3):
                states.append((k, s, m))
        for (s, a), dsts in smap.items():
            for d in dsts:
                for m in (0, 1, 2, 3):
                    trans.append(((k, s, m), (a, 0), (k, d, m)))
                if s == px:
                    for m in (0, 2):
                        trans.append(((k, s, m), (a, 1), (k, d, m | 1)))
                if s == qy:
                    for m in (0, 1):
                        trans.append(((k, s, m), (a, 2), (k, d, m | 2)))
                if s == px and px == qy:
                    trans.append(((k, s, 0), (a, 3), (k, d, 3)))
    init = [(k, s, 0) for k in range(len(sps)) for s in q.base.initial]
    final = [(k, s, 3) for k in range(len(sps)) for s in q.base.final]
    return nfa(malph, states, init, final, trans)


def _well_formed_marks(alph) -> Nfa:
    malph = [(a, m) for a in alph for m in (0, 1, 2, 3)]
    trans = []
    for a in alph:
        for m in range(4):
            trans.append((m, (a, 0), m))
        trans += [(0, (a, 1), 1), (0, (a, 2), 2), (0, (a, 3), 3), (1, (a, 2), 3), (2, (a, 1), 3)]
    return nfa(malph, [0, 1, 2, 3], [0], [3], trans)


def _query_from_marked(m: Nfa, alph) -> QueryAutomaton:
    flags = (0, 1, 2, 3)  # mark bits carried by the current position
    smap = m.succ_map()
    states = [(s, mk, fl) for s in m.states for mk in (0, 1, 2, 3) for fl in flags]
    trans = []
    for (s, ma), dsts in smap.items():
        a, bits = ma
        for d in dsts:
            for mk in (0, 1, 2, 3):
                if mk & bits:
                    continue
                nmk = mk | bits
                for fl2 in flags:
                    if fl2 & nmk:
                        continue
                    trans.append(((s, mk, bits), a, (d, nmk, fl2)))
    init = [(s, 0, fl) for s in m.initial for fl in flags]
    final = [(s, 3, 0) for s in m.final]
    base = nfa(tuple(alph), states, init, final, trans)
    pairs = []
    for s in m.states:
        for s2 in m.states:
            pairs.append(((s, 0, 1), (s2, 1, 2)))   # x strictly before y
            pairs.append(((s, 2, 1), (s2, 0, 2)))   # y strictly before x
        pairs.append(((s, 0, 3), (s, 0, 3)))        # x = y
    # Keep only pairs over reachable useful states to limit size.
    return _trim_query(query(base, pairs))


def _trim_query(q: QueryAutomaton) -> QueryAutomaton:
    a = q.base
    smap = a.succ_map()
    reach = set(a.initial)
    todo = list(a.initial)
    while todo:
        s = todo.pop()
        for sym in a.alphabet:
            for d in smap.get((s, sym), ()):
                if d not in reach:
                    reach.add(d)
                    todo.append(d)
    pmap: dict = {}
    for p, sym, qq in a.transitions:
        pmap.setdefault(qq, set()).add(p)
    co = set(a.final)
    todo = list(a.final)
    while todo:
        s = todo.pop()
        for p in pmap.get(s, ()):
            if p not in co:
                co.add(p)
                todo.append(p)
    keep = reach & co
    if not keep:
        base = nfa(a.alphabet, ["dead"], ["dead"], [], [])
        return query(base, [])
    states = [s for s in a.states if s in keep]
    trans = [(p, x, qq) for p, x, qq in a.transitions if p in keep and qq in keep]
    base = nfa(a.alphabet, states, a.initial & keep, a.final & keep, trans)
    pairs = [(p, qq) for p, qq in q.selecting_pairs if p in keep and qq in keep]
    return query(base, pairs)


def _qa_not(q: QueryAutomaton) -> QueryAutomaton:
    marked = _marked_from_query(q)
    comp = complement(marked)
    wf = intersect(comp, _well_formed_marks(q.base.alphabet))
    return _query_from_marked(wf, q.base.alphabet)


# ---------------------------------------------------------------------------
# predicate tables


class PredicateTable:
    """Named query automata over one shared input alphabet."""

    def __init__(self, alphabet):
        self.alphabet = tuple(alphabet)
        self._entries: dict = {}

    def add(self, name: str, q: QueryAutomaton) -> None:
        if name in self._entries:
            raise AutomatonError(f"duplicate predicate name {name!r}")
        if set(q.base.alphabet) != set(self.alphabet):
            raise AutomatonError(f"predicate {name!r} uses a different alphabet")
        self._entries[name] = q

    def get(self, name: str) -> QueryAutomaton:
        return self._entries[name]

    def __contains__(self, name) -> bool:
        return name in self._entries

    def names(self) -> tuple:
        return tuple(self._entries)

    def items(self):
        return self._entries.items()

    def copy(self) -> "PredicateTable":
        t = PredicateTable(self.alphabet)
        t._entries = dict(self._entries)
        return t

    def fresh_name(self, hint: str) -> str:
        name, i = hint, 1
        while name in self._entries:
            name = f"{hint}{i}"
            i += 1
        return name


# ---------------------------------------------------------------------------
# text format and DOT export


def parse_automaton(text: str):
    """Parse the one-file automaton format; returns Nfa or QueryAutomaton.

    Lines: ``alphabet: a b c``, ``states: q0 q1``, ``initial: q0``,
    ``final: q1``, ``trans: q0 a q1``, ``select: q0 q1``.
    """
    alph, states, init, fin, trans, select = [], [], [], [], [], []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        if ":" not in line:
            raise AutomatonError(f"line {ln}: expected 'key: ...'")
        key, _, rest = line.partition(":")
        parts = rest.split()
        key = key.strip()
        if key == "alphabet":
            alph += parts
        elif key == "states":
            states += parts
        elif key == "initial":
            init += parts
        elif key == "final":
            fin += parts
        elif key == "trans":
            if len(parts) != 3:
                raise AutomatonError(f"line {ln}: trans wants 'src sym dst'")
            trans.append(tuple(parts))
        elif key == "select":
            if len(parts) != 2:
                raise AutomatonError(f"line {ln}: select wants 'p q'")
            select.append(tuple(parts))
        else:
            raise AutomatonError(f"line {ln}: unknown key {key!r}")
    base = nfa(alph, states, init, fin, trans)
    if select:
        return query(base, select)
    return base


def format_automaton(a) -> str:
    """Inverse of parse_automaton (only for string-labelled automata)."""
    q = None
    if isinstance(a, QueryAutomaton):
        a, q = a.base, a
    lines = [
        "alphabet: " + " ".join(str(s) for s in a.alphabet),
        "states: " + " ".join(str(s) for s in a.states),
        "initial: " + " ".join(str(s) for s in sorted(a.initial, key=a.states.index)),
        "final: " + " ".join(str(s) for s in sorted(a.final, key=a.states.index)),
    ]
    for p, sym, r in sorted(a.transitions, key=lambda t: (a.states.index(t[0]), str(t[1]), a.states.index(t[2]))):
        lines.append(f"trans: {p} {sym} {r}")
    if q is not None:
        for p, r in sorted(q.selecting_pairs, key=lambda t: (a.states.index(t[0]), a.states.index(t[1]))):
            lines.append(f"select: {p} {r}")
    return "\n".join(lines) + "\n"


def nfa_to_dot(a: Nfa, name: str = "nfa") -> str:
    """GraphViz rendering; initial states get an arrow from a point node."""
    idx = {s: i for i, s in enumerate(a.states)}
    out = [f"digraph {name} {{", "  rankdir=LR;"]
    for s in a.states:
        shape = "doublecircle" if s in a.final else "circle"
        out.append(f'  n{idx[s]} [label="{_fmt(s)}", shape={shape}];')
    for k, s in enumerate(sorted(a.initial, key=idx.get)):
        out.append(f"  i{k} [shape=point];")
        out.append(f"  i{k} -> n{idx[s]};")
    grouped: dict = {}
    for p, sym, q in a.transitions:
        grouped.setdefault((p, q), []).append(sym)
    for (p, q), syms in sorted(grouped.items(), key=lambda kv: (idx[kv[0][0]], idx[kv[0][1]])):
        label = ",".join(sorted(_fmt(s) for s in syms))
        out.append(f'  n{idx[p]} -> n{idx[q]} [label="{label}"];')
    out.append("}")
    return "\n".join(out) + "\n"
