"""Profiles: the bounded per-input-position abstraction behind the decision
procedures.

A profile of an input position records its letter, the set of predicate
states on accepting runs at that position, and one clause per output
position: local when the output originates here, otherwise a consistency
clause carrying the run-state pairs linking this position to the origin,
with a direction.  Keeping only the outermost occurrences of each clause
value makes the profile bounded without affecting constraint satisfaction.

Good sequences (valid + consistent + maximal + at least one local clause per
profile) are exactly the abstractions of constraint models; any
linearisation of the induced partial order on clause paths rebuilds a model.
The search enumerates enriched states on the fly, never materialising the
sequence automaton.

State sets are int bitmasks over the tagged union of the predicate automata;
relations are bitmasks over state pairs (p, q) -> p * n + q.  Pairs never
mix predicate tags because runs never leave their automaton.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .automata import PredicateTable
from .normalize import DOWN, SAME, UP, McpInstance
from .structures import OGraph, fmt_letter

LOCAL, LEFT, RIGHT = ".", "<", ">"
_DIR_RANK = {LOCAL: 0, RIGHT: 1, LEFT: 2}


class BudgetExceeded(RuntimeError):
    def __init__(self, msg, stats=None):
        super().__init__(msg)
        self.stats = stats


class InconsistentSequence(ValueError):
    pass


@dataclass(frozen=True)
class Clause:
    label: object
    dir: str  # LOCAL, LEFT or RIGHT
    rel: int = 0  # state-pair bitmask, 0 for local clauses

    def __repr__(self):
        if self.dir == LOCAL:
            return f"({fmt_letter(self.label)},.)"
        arrow = "<-" if self.dir == LEFT else "->"
        return f"({fmt_letter(self.label)},R{self.rel:x},{arrow})"


@dataclass(frozen=True)
class Profile:
    sigma: object
    S: int
    clauses: tuple

    def __repr__(self):
        body = " ".join(repr(c) for c in self.clauses)
        return f"[{fmt_letter(self.sigma)} S={self.S:x} | {body}]"


@dataclass(frozen=True)
class EnrichedState:
    """A profile enriched with the states and pairs that could still be
    added; reaching one of those later refutes maximality."""

    sigma: object
    S: int
    S2: int  # states reached so far but not on the guessed accepting runs
    items: tuple  # of (Clause, extra-rel or None), one per clause occurrence

    def profile(self) -> Profile:
        return Profile(self.sigma, self.S, tuple(c for c, _ in self.items))


INIT = None  # the initial search state is represented by None


class ProfileContext:
    """Dense state indexing and mask operations for one predicate table."""

    def __init__(self, table: PredicateTable, out_alphabet=()):
        self.table = table
        self.alphabet = table.alphabet
        self.names = table.names()
        self.index = {}
        self.info = []
        self.tag_of = []
        for ti, (name, q) in enumerate(table.items()):
            for st in q.base.states:
                self.index[(name, st)] = len(self.info)
                self.info.append((name, st))
                self.tag_of.append(ti)
        self.n = len(self.info)
        self.init_mask = 0
        self.final_mask = 0
        self.succ = {a: [0] * self.n for a in self.alphabet}
        self.pred = {a: [0] * self.n for a in self.alphabet}
        for name, q in table.items():
            for st in q.base.initial:
                self.init_mask |= 1 << self.index[(name, st)]
            for st in q.base.final:
                self.final_mask |= 1 << self.index[(name, st)]
            for p, a, r in q.base.transitions:
                pi, ri = self.index[(name, p)], self.index[(name, r)]
                self.succ[a][pi] |= 1 << ri
                self.pred[a][ri] |= 1 << pi
        self.sp_mask = {}
        for name, q in table.items():
            m = 0
            for p, r in q.selecting_pairs:
                m |= 1 << (self.index[(name, p)] * self.n + self.index[(name, r)])
            self.sp_mask[name] = m
        self.label_order = {x: i for i, x in enumerate(out_alphabet)}
        self._pools = None

    # -- elementary mask operations -----------------------------------------

    def bits(self, mask):
        while mask:
            b = mask & -mask
            yield b.bit_length() - 1
            mask ^= b

    def pairs(self, rel):
        for idx in self.bits(rel):
            yield divmod(idx, self.n)

    def pair_bit(self, p, q) -> int:
        return 1 << (p * self.n + q)

    def step_mask(self, mask, a) -> int:
        out = 0
        succ = self.succ[a]
        for p in self.bits(mask):
            out |= succ[p]
        return out

    def pre_mask(self, mask, a) -> int:
        out = 0
        pred = self.pred[a]
        for p in self.bits(mask):
            out |= pred[p]
        return out

    def diag(self, smask) -> int:
        out = 0
        for p in self.bits(smask):
            out |= self.pair_bit(p, p)
        return out

    def rel_dom(self, rel) -> int:
        out = 0
        for p, _ in self.pairs(rel):
            out |= 1 << p
        return out

    def rel_cols(self, rel) -> int:
        out = 0
        for _, q in self.pairs(rel):
            out |= 1 << q
        return out

    def step_first(self, rel, a) -> int:
        """{(p', q) : (p, q) in rel, p' in p.a}."""
        out = 0
        succ = self.succ[a]
        for p, q in self.pairs(rel):
            for p2 in self.bits(succ[p]):
                out |= self.pair_bit(p2, q)
        return out

    def back_max(self, rel, a) -> int:
        """{(p, q) : some (p', q) in rel with p' in p.a} -- the maximal
        relation compatible with rel one step earlier."""
        out = 0
        pred = self.pred[a]
        for p2, q in self.pairs(rel):
            for p in self.bits(pred[p2]):
                out |= self.pair_bit(p, q)
        return out

    def loc_set(self, s1, s2, a) -> int:
        """{(p, q) in s1 x s2 : q in p.a} -- the localisation relation."""
        out = 0
        succ = self.succ[a]
        for p in self.bits(s1):
            for q in self.bits(succ[p] & s2):
                out |= self.pair_bit(p, q)
        return out

    def step_second(self, rel, a) -> int:
        """{(p, q') : (p, q) in rel, q' in q.a}."""
        out = 0
        succ = self.succ[a]
        for p, q in self.pairs(rel):
            for q2 in self.bits(succ[q]):
                out |= self.pair_bit(p, q2)
        return out

    def restrict_cols(self, rel, smask) -> int:
        out = 0
        for p, q in self.pairs(rel):
            if smask >> q & 1:
                out |= self.pair_bit(p, q)
        return out

    def label_key(self, label) -> int:
        return self.label_order.get(label, len(self.label_order))

    def clause_key(self, c: Clause):
        return (self.label_key(c.label), _DIR_RANK[c.dir], c.rel)

    # -- run information for a concrete input word --------------------------

    def run_sets(self, u):
        """(fwd, bwd, alive) state masks at positions 1..n+1."""
        n = len(u)
        fwd = [self.init_mask]
        for a in u:
            fwd.append(self.step_mask(fwd[-1], a))
        bwd = [0] * (n + 1)
        bwd[n] = self.final_mask
        for t in range(n - 1, -1, -1):
            bwd[t] = self.pre_mask(bwd[t + 1], u[t])
        alive = [fwd[t] & bwd[t] for t in range(n + 1)]
        return fwd, bwd, alive

    def genuine_rel(self, u, k, kp, alive) -> int:
        """All pairs (state at k, state at k') on accepting runs, 1-based."""
        if k == kp:
            return self.diag(alive[k - 1])
        lo, hi = (k, kp) if k <= kp else (kp, k)
        rel = self.diag(alive[lo - 1])
        for t in range(lo, hi):
            rel = self.step_first(rel, u[t - 1])
        # rel now holds pairs (state at hi, state at lo); the clause wants the
        # current position first
        out = 0
        for p, q in self.pairs(rel):
            if (1 << p) & alive[hi - 1]:
                out |= self.pair_bit(p, q) if k > kp else self.pair_bit(q, p)
        return out

    # -- pools for candidate generation --------------------------------------

    def pools(self):
        """Reachable forward sets, backward sets, alive sets and the closure
        of localisation relations under back-steps (used to seed right
        clauses in initial profiles)."""
        if self._pools is not None:
            return self._pools
        fwd_pool = {self.init_mask}
        todo = [self.init_mask]
        while todo:
            m = todo.pop()
            for a in self.alphabet:
                m2 = self.step_mask(m, a)
                if m2 not in fwd_pool:
                    fwd_pool.add(m2)
                    todo.append(m2)
        bwd_pool = {self.final_mask}
        todo = [self.final_mask]
        while todo:
            m = todo.pop()
            for a in self.alphabet:
                m2 = self.pre_mask(m, a)
                if m2 not in bwd_pool:
                    bwd_pool.add(m2)
                    todo.append(m2)
        alive_pool = sorted({f & b for f in fwd_pool for b in bwd_pool})
        self._pools = (sorted(fwd_pool), sorted(bwd_pool), alive_pool)
        return self._pools

    def reach_pairs(self) -> int:
        """Pairs (p, q) with q reachable from p in one or more steps; a right
        clause's relation always sits inside this mask."""
        if not hasattr(self, "_reach_pairs"):
            succ1 = [0] * self.n
            for a in self.alphabet:
                for p in range(self.n):
                    succ1[p] |= self.succ[a][p]
            closure = list(succ1)
            changed = True
            while changed:
                changed = False
                for p in range(self.n):
                    grow = closure[p]
                    for q in self.bits(closure[p]):
                        grow |= closure[q]
                    if grow != closure[p]:
                        closure[p] = grow
                        changed = True
            mask = 0
            for p in range(self.n):
                for q in self.bits(closure[p]):
                    mask |= self.pair_bit(p, q)
            self._reach_pairs = mask
        return self._reach_pairs

    def pre_pool(self, a):
        """Candidate backward sets one letter before: pre_a of the backward pool."""
        if not hasattr(self, "_pre_pool"):
            self._pre_pool = {}
        if a not in self._pre_pool:
            _, bwd_pool, _ = self.pools()
            self._pre_pool[a] = sorted({self.pre_mask(b, a) for b in bwd_pool})
        return self._pre_pool[a]

    def slice_pool(self, sigma, S):
        """Relations a right clause of an initial (sigma, S) profile can
        carry -- column slices of the forward chain from S, restricted to a
        plausible set of live states -- together with a comparability map:
        two slices can share a profile only if some chain walk produces
        both (they describe origins along one future)."""
        if not hasattr(self, "_slice_pool"):
            self._slice_pool = {}
        key = (sigma, S)
        if key not in self._slice_pool:
            _, _, alive_pool = self.pools()
            full = (1 << self.n) - 1
            first = self.loc_set(S, full, sigma)
            chain = {first}
            reach = {first: {first}}
            todo = [first]
            while todo:
                rr = todo.pop()
                for a in self.alphabet:
                    rr2 = self.step_second(rr, a)
                    if not rr2:
                        continue
                    if rr2 not in chain:
                        chain.add(rr2)
                        reach[rr2] = {rr2}
                        todo.append(rr2)
                if len(chain) > 20000:
                    raise BudgetExceeded("slice chain too large for this table")
            changed = True
            while changed:
                changed = False
                for rr in chain:
                    grow = set()
                    for a in self.alphabet:
                        rr2 = self.step_second(rr, a)
                        if rr2:
                            grow |= reach[rr2]
                    if not grow <= reach[rr]:
                        reach[rr] |= grow
                        changed = True
            produced = {}
            for rr in chain:
                for b in alive_pool:
                    r = self.restrict_cols(rr, b)
                    if r:
                        produced.setdefault(r, set()).add(rr)
            pool = tuple(sorted(produced))
            compat = {}
            for r1 in pool:
                for r2 in pool:
                    ok = any(
                        rr2 in reach[rr1] or rr1 in reach[rr2]
                        for rr1 in produced[r1]
                        for rr2 in produced[r2]
                    )
                    if ok:
                        compat.setdefault(r1, set()).add(r2)
            self._slice_pool[key] = (pool, compat)
        return self._slice_pool[key]


# ---------------------------------------------------------------------------
# profiles of concrete o-graphs


def context_for(C: McpInstance) -> ProfileContext:
    return ProfileContext(C.predicates, C.out_alphabet)


def full_profile(g: OGraph, C: McpInstance, k: int, ctx: ProfileContext | None = None) -> Profile:
    """The unabstracted profile of input position k: one clause per output."""
    if not 1 <= k <= len(g.input):
        raise ValueError(f"input position {k} out of range")
    ctx = ctx or context_for(C)
    u = tuple(g.input)
    _, _, alive = ctx.run_sets(u)
    clauses = []
    for j in range(1, len(g.output) + 1):
        kp = g.origin[j - 1]
        gamma = g.output[j - 1]
        if kp == k:
            clauses.append(Clause(gamma, LOCAL))
        else:
            rel = ctx.genuine_rel(u, k, kp, alive)
            clauses.append(Clause(gamma, RIGHT if kp > k else LEFT, rel))
    return Profile(u[k - 1], alive[k - 1], tuple(clauses))


def alpha(clauses) -> tuple:
    """Keep only the outermost occurrences of each clause value."""
    clauses = tuple(clauses)
    first, last = {}, {}
    for i, c in enumerate(clauses):
        last[c] = i
        first.setdefault(c, i)
    keep = sorted(set(first.values()) | set(last.values()))
    return tuple(clauses[i] for i in keep)


def seq(g: OGraph, C: McpInstance, ctx: ProfileContext | None = None) -> tuple:
    """The profile sequence of an o-graph, one abstracted profile per input
    position."""
    ctx = ctx or context_for(C)
    out = []
    for k in range(1, len(g.input) + 1):
        fp = full_profile(g, C, k, ctx)
        out.append(Profile(fp.sigma, fp.S, alpha(fp.clauses)))
    return tuple(out)


# ---------------------------------------------------------------------------
# validity


def _clause_bits(ctx: ProfileContext, C: McpInstance, profile: Profile, c: Clause, diag_rel: int) -> int:
    """Atom valuation carried by one clause (against the local position)."""
    rel = diag_rel if c.dir == LOCAL else c.rel
    bits = 0
    for i, name in enumerate(C.atoms):
        if rel & ctx.sp_mask[name]:
            bits |= 1 << i
    return bits


def is_valid(p: Profile, C: McpInstance, ctx: ProfileContext | None = None) -> bool:
    """Every universal constraint holds and every local clause has its
    witnesses inside the profile (or on the diagonal)."""
    ctx = ctx or context_for(C)
    diag_rel = ctx.diag(p.S)
    sigs = [C.sig(c.label) for c in p.clauses]
    bits = [_clause_bits(ctx, C, p, c, diag_rel) for c in p.clauses]
    locals_ = [i for i, c in enumerate(p.clauses) if c.dir == LOCAL]
    for i in locals_:
        if not C.diag_allowed(sigs[i], bits[i]):
            return False
        for j, cj in enumerate(p.clauses):
            if i == j:
                continue
            d = UP if i < j else DOWN
            if not C.pair_allowed(sigs[i], sigs[j], d, bits[j]):
                return False
    for e in range(C.exists_count()):
        for i in locals_:
            if C.exists_self(e, sigs[i], bits[i]):
                continue
            ok = False
            for j in range(len(p.clauses)):
                if i == j:
                    continue
                d = UP if i < j else DOWN
                if C.exists_witness(e, sigs[i], sigs[j], d, bits[j]):
                    ok = True
                    break
            if not ok:
                return False
    return True


def is_initial(p: Profile, ctx: ProfileContext) -> bool:
    if p.S & ~ctx.init_mask:
        return False
    return all(c.dir != LEFT for c in p.clauses)


def is_final(p: Profile, ctx: ProfileContext) -> bool:
    if any(c.dir == RIGHT for c in p.clauses):
        return False
    for s in ctx.bits(p.S):
        if not (ctx.succ[p.sigma][s] & ctx.final_mask):
            return False
    return True


# ---------------------------------------------------------------------------
# successors of clauses


def successors(c: Clause, S: int, S2: int, sigma, ctx: ProfileContext, cap: int = 4096) -> tuple:
    """All successor clauses of c with respect to (S, S2, sigma)."""
    if c.dir == LOCAL:
        rel = 0
        for p in ctx.bits(S):
            for p2 in ctx.bits(ctx.succ[sigma][p] & S2):
                rel |= ctx.pair_bit(p2, p)
        return (Clause(c.label, LEFT, rel),)
    if c.dir == LEFT:
        if ctx.rel_dom(c.rel) & ~S:
            return ()
        rel2 = 0
        ok = True
        for p, q in ctx.pairs(c.rel):
            nxt = ctx.succ[sigma][p] & S2
            if not nxt:
                ok = False
                break
            for p2 in ctx.bits(nxt):
                rel2 |= ctx.pair_bit(p2, q)
        return (Clause(c.label, LEFT, rel2),) if ok else ()
    # RIGHT: optionally localise, plus all relations whose back-step is rel
    out = []
    if c.rel == ctx.loc_set(S, S2, sigma):
        out.append(Clause(c.label, LOCAL))
    cols: dict = {}
    for p, q in ctx.pairs(c.rel):
        cols.setdefault(q, 0)
        cols[q] |= 1 << p
    per_col = []
    for q, rq in sorted(cols.items()):
        allowed = []
        for p2 in ctx.bits(S2):
            back = ctx.pred[sigma][p2]
            if back and not (back & ~rq):
                allowed.append(p2)
        choices = []
        for r in range(1, 1 << len(allowed)):
            chosen = [allowed[i] for i in range(len(allowed)) if r >> i & 1]
            covered = 0
            for p2 in chosen:
                covered |= ctx.pred[sigma][p2]
            if covered & rq == rq and not (covered & ~rq):
                mask = 0
                for p2 in chosen:
                    mask |= ctx.pair_bit(p2, q)
                choices.append(mask)
        if not choices:
            return tuple(out)
        per_col.append(choices)
    total = 1
    for ch in per_col:
        total *= len(ch)
        if total > cap:
            raise BudgetExceeded("too many successor relations for one clause")
    reach = ctx.reach_pairs()
    for combo in itertools.product(*per_col):
        rel2 = 0
        for m in combo:
            rel2 |= m
        if not (rel2 & ~reach):
            out.append(Clause(c.label, RIGHT, rel2))
    seen = set()
    uniq = []
    for cl in out:
        if cl not in seen:
            seen.add(cl)
            uniq.append(cl)
    return tuple(sorted(uniq, key=ctx.clause_key))


def successor_values(p: Profile, S2: int, ctx: ProfileContext) -> dict:
    """Map from each clause value of p to its successor clause values."""
    out = {}
    for c in p.clauses:
        if c not in out:
            out[c] = successors(c, p.S, S2, p.sigma, ctx)
    return out


# ---------------------------------------------------------------------------
# consistency


@dataclass(frozen=True)
class PairGraph:
    left: Profile
    right: Profile
    edges: frozenset  # of (i, j) clause-occurrence indices


def build_pair_graph(p1: Profile, p2: Profile, ctx: ProfileContext) -> PairGraph:
    succ = successor_values(p1, p2.S, ctx)
    edges = set()
    occs1: dict = {}
    for i, c in enumerate(p1.clauses):
        occs1.setdefault(c, []).append(i)
    occs2: dict = {}
    for j, c in enumerate(p2.clauses):
        occs2.setdefault(c, []).append(j)
    # right clauses of p1 pick their extremal successor occurrences
    for c, occ in occs1.items():
        if c.dir != RIGHT:
            continue
        targets = [j for j, cj in enumerate(p2.clauses) if cj in succ[c]]
        if not targets:
            continue
        edges.add((occ[0], targets[0]))
        edges.add((occ[-1], targets[-1]))
    # left clauses of p2 pick their extremal predecessor occurrences
    for c, occ in occs2.items():
        if c.dir != LEFT:
            continue
        sources = [i for i, ci in enumerate(p1.clauses) if c in succ[ci]]
        if not sources:
            continue
        edges.add((sources[0], occ[0]))
        edges.add((sources[-1], occ[-1]))
    return PairGraph(p1, p2, frozenset(edges))


def _graph_conditions(gr: PairGraph) -> bool:
    outs: dict = {}
    ins: dict = {}
    for i, j in gr.edges:
        outs.setdefault(i, set()).add(j)
        ins.setdefault(j, set()).add(i)
    if any(len(v) > 1 for v in outs.values()):
        return False
    if any(len(v) > 1 for v in ins.values()):
        return False
    for (i1, j1), (i2, j2) in itertools.combinations(gr.edges, 2):
        if (i1 - i2) * (j1 - j2) < 0:
            return False
    return True


def consistent(p1: Profile, p2: Profile, ctx: ProfileContext) -> bool:
    """Step compatibility of the state sets, successor totality, and a
    crossing-free matching of the clause occurrences."""
    for s in ctx.bits(p1.S):
        if not (ctx.succ[p1.sigma][s] & p2.S):
            return False
    for s in ctx.bits(p2.S):
        if not (ctx.pre_mask(1 << s, p1.sigma) & p1.S):
            return False
    succ = successor_values(p1, p2.S, ctx)
    vals2 = set(p2.clauses)
    for c in p1.clauses:
        if not (vals2 & set(succ[c])):
            return False
    all_succ = set()
    for vs in succ.values():
        all_succ |= set(vs)
    for c in p2.clauses:
        if c not in all_succ:
            return False
    return _graph_conditions(build_pair_graph(p1, p2, ctx))


# ---------------------------------------------------------------------------
# the glued graph of a sequence, its paths and their partial order


@dataclass
class ConsistencyGraph:
    profiles: tuple
    edges: set  # of ((k, i), (k+1, j)), 0-based columns

    def clause_at(self, v) -> Clause:
        k, i = v
        return self.profiles[k].clauses[i]


def build_gs(s, ctx: ProfileContext) -> ConsistencyGraph:
    s = tuple(s)
    edges = set()
    for k in range(len(s) - 1):
        if not consistent(s[k], s[k + 1], ctx):
            raise InconsistentSequence(f"profiles {k} and {k + 1} are not consistent")
        gr = build_pair_graph(s[k], s[k + 1], ctx)
        for i, j in gr.edges:
            edges.add(((k, i), (k + 1, j)))
    g = ConsistencyGraph(s, edges)
    _assert_disjoint_paths(g)
    return g


def _assert_disjoint_paths(g: ConsistencyGraph):
    outs: dict = {}
    ins: dict = {}
    for a, b in g.edges:
        outs.setdefault(a, []).append(b)
        ins.setdefault(b, []).append(a)
    bad = [v for v, ws in outs.items() if len(ws) > 1] + [v for v, ws in ins.items() if len(ws) > 1]
    if bad:
        raise InconsistentSequence(f"glued graph is not a union of paths at {bad[:3]}")


def maximal_paths(g: ConsistencyGraph) -> tuple:
    """The maximal directed paths, each as a tuple of vertices; one local
    clause occurrence sits on each."""
    nxt = dict(g.edges)
    prv = {b: a for a, b in g.edges}
    starts = []
    for k, p in enumerate(g.profiles):
        for i in range(len(p.clauses)):
            v = (k, i)
            if v not in prv:
                starts.append(v)
    paths = []
    for v in sorted(starts):
        path = [v]
        while path[-1] in nxt:
            path.append(nxt[path[-1]])
        paths.append(tuple(path))
    return tuple(paths)


def path_shape_ok(g: ConsistencyGraph, path) -> bool:
    dirs = [g.clause_at(v).dir for v in path]
    labels = {g.clause_at(v).label for v in path}
    if len(labels) != 1 or dirs.count(LOCAL) != 1:
        return False
    loc = dirs.index(LOCAL)
    return all(d == RIGHT for d in dirs[:loc]) and all(d == LEFT for d in dirs[loc + 1 :])


def path_local(g: ConsistencyGraph, path):
    for v in path:
        if g.clause_at(v).dir == LOCAL:
            return v
    raise InconsistentSequence("path without a local clause")


def partial_order(g: ConsistencyGraph, paths=None) -> dict:
    """The reflexive-transitive column-overlap order on maximal paths;
    raises if a cycle between distinct paths shows up."""
    paths = paths if paths is not None else maximal_paths(g)
    idx = {}
    for pi, path in enumerate(paths):
        for v in path:
            idx[v] = pi
    below: dict = {pi: {pi} for pi in range(len(paths))}
    per_col: dict = {}
    for (k, i), pi in idx.items():
        per_col.setdefault(k, []).append((i, pi))
    for k, rows in per_col.items():
        rows.sort()
        for (i1, a), (i2, b) in itertools.combinations(rows, 2):
            below[a].add(b)  # a is at a smaller row: a <= b
    changed = True
    while changed:
        changed = False
        for a in below:
            grow = set()
            for b in below[a]:
                grow |= below[b]
            if not grow <= below[a]:
                below[a] |= grow
                changed = True
    for a in below:
        for b in below[a]:
            if a != b and a in below[b]:
                raise InconsistentSequence("path order has a cycle; upstream consistency bug")
    return below


# ---------------------------------------------------------------------------
# maximality (test oracle: direct run enumeration)


def _runs_by_tag(ctx: ProfileContext, u):
    """All accepting runs of each predicate automaton, as global-id tuples."""
    runs = []
    for name, q in ctx.table.items():
        smap = q.base.succ_map()

        def go(prefix, name=name, q=q, smap=smap):
            t = len(prefix) - 1
            if t == len(u):
                if prefix[-1] in q.base.final:
                    yield tuple(ctx.index[(name, s)] for s in prefix)
                return
            for nx in smap.get((prefix[-1], u[t]), ()):
                prefix.append(nx)
                yield from go(prefix)
                prefix.pop()

        for q0 in q.base.initial:
            runs.extend(go([q0]))
    return runs


def is_maximal(s, C: McpInstance, ctx: ProfileContext | None = None) -> bool:
    """Check the state sets and clause relations against all accepting runs
    of the input projection; the sequence must be consistent."""
    ctx = ctx or context_for(C)
    s = tuple(s)
    u = tuple(p.sigma for p in s)
    runs = _runs_by_tag(ctx, u)
    alive = [0] * (len(u) + 1)
    for run in runs:
        for t, st in enumerate(run):
            alive[t] |= 1 << st
    for k, p in enumerate(s):
        if p.S != alive[k]:
            return False
    g = build_gs(s, ctx)
    paths = maximal_paths(g)
    for path in paths:
        c = path_local(g, path)[0]  # origin column, 0-based
        for (k, i) in path:
            cl = s[k].clauses[i]
            if cl.dir == LOCAL:
                continue
            genuine = 0
            for run in runs:
                genuine |= ctx.pair_bit(run[k], run[c])
            if cl.rel != genuine:
                return False
    return True


# ---------------------------------------------------------------------------
# the enriched automaton, one transition at a time


def enriched_step(q, p: Profile, C: McpInstance, ctx: ProfileContext):
    """One transition of the good-sequence automaton; None means reject."""
    if not is_valid(p, C, ctx):
        return None
    if not any(c.dir == LOCAL for c in p.clauses):
        return None  # erasing column: the rebuilt o-graph would skip an input
    if q is INIT:
        if not is_initial(p, ctx):
            return None
        for c in p.clauses:
            if c.dir == RIGHT and ctx.rel_dom(c.rel) & ~ctx.init_mask:
                return None
        s2 = ctx.init_mask & ~p.S
        items = []
        for c in p.clauses:
            if c.dir == RIGHT:
                extra = 0
                for p0 in ctx.bits(s2):
                    for col in ctx.bits(ctx.rel_cols(c.rel)):
                        extra |= ctx.pair_bit(p0, col)
                items.append((c, extra))
            else:
                items.append((c, None))
        return EnrichedState(p.sigma, p.S, s2, tuple(items))

    prev = q.profile()
    if not consistent(prev, p, ctx):
        return None
    sigma = prev.sigma
    t_mask = ctx.step_mask(q.S2, sigma)
    if t_mask & p.S:
        return None
    new_s2 = (ctx.step_mask(q.S, sigma) | t_mask) & ~p.S

    extra_of: dict = {}
    for c, extra in q.items:
        if c not in extra_of and extra is not None:
            extra_of[c] = extra
    succ = successor_values(prev, p.S, ctx)

    items = []
    for c in p.clauses:
        sources = [v for v in extra_of if c in succ.get(v, ())]
        if c.dir == LOCAL:
            for v in sources:
                if v.dir == RIGHT:
                    for p0, q0 in ctx.pairs(extra_of[v]):
                        if (ctx.succ[sigma][p0] >> q0 & 1) and (p.S >> q0 & 1):
                            return None
            items.append((c, None))
        elif c.dir == RIGHT:
            back = ctx.back_max(c.rel, sigma)
            src = Clause(c.label, RIGHT, back)
            extra = ctx.step_first(extra_of.get(src, 0), sigma)
            if c.rel & extra:
                return None
            items.append((c, extra))
        else:  # LEFT
            extra = 0
            for v in sources:
                if v.dir == LOCAL:
                    for p0 in ctx.bits(t_mask):
                        for q0 in ctx.bits(ctx.pre_mask(1 << p0, sigma)):
                            extra |= ctx.pair_bit(p0, q0)
                else:
                    extra |= ctx.step_first(extra_of.get(v, 0), sigma)
            if c.rel & extra:
                return None
            items.append((c, extra))
    return EnrichedState(p.sigma, p.S, new_s2, tuple(items))


def enriched_accepts(q, ctx: ProfileContext) -> bool:
    if q is INIT:
        return False
    p = q.profile()
    if not is_final(p, ctx):
        return False
    if ctx.step_mask(q.S2, p.sigma) & ctx.final_mask:
        return False
    for c, extra in q.items:
        if extra and any(
            ctx.succ[p.sigma][p0] & ctx.final_mask for p0, _ in ctx.pairs(extra)
        ):
            return False
    return True


# ---------------------------------------------------------------------------
# candidate profile generation


def _word_nfa(word, alphabet):
    from .automata import nfa

    states = [f"w{i}" for i in range(len(word) + 1)]
    trans = [(f"w{i}", word[i], f"w{i+1}") for i in range(len(word))]
    return nfa(alphabet, states, [states[0]], [states[-1]], trans)


class SearchStats:
    def __init__(self):
        self.visited = 0
        self.expanded = 0
        self.candidates = 0
        self.truncated = False

    def __repr__(self):
        return (
            f"SearchStats(visited={self.visited}, expanded={self.expanded}, "
            f"candidates={self.candidates}, truncated={self.truncated})"
        )


def _candidate_sequences(values, max_len, stats, prune):
    """Clause sequences over ``values`` (each at most twice), in
    length-then-lex order, pruned by ``prune(prefix, new_clause)``."""

    def go(prefix, counts, length):
        if len(prefix) == length:
            yield tuple(prefix)
            return
        for v in values:
            if counts.get(v, 0) >= 2:
                continue
            if not prune(prefix, v):
                continue
            prefix.append(v)
            counts[v] = counts.get(v, 0) + 1
            yield from go(prefix, counts, length)
            prefix.pop()
            counts[v] -= 1

    for length in range(1, max_len + 1):
        yield from go([], {}, length)


def _mk_prune(C: McpInstance, ctx: ProfileContext, diag_rel: int, compat=None):
    """Prefix-sound pruning: universal pair and diagonal violations, plus
    chain compatibility of right relations when a map is given."""

    def bits_of(c: Clause) -> int:
        rel = diag_rel if c.dir == LOCAL else c.rel
        b = 0
        for i, name in enumerate(C.atoms):
            if rel & ctx.sp_mask[name]:
                b |= 1 << i
        return b

    cache: dict = {}

    def get_bits(c):
        if c not in cache:
            cache[c] = bits_of(c)
        return cache[c]

    def prune(prefix, new):
        if compat is not None and new.dir == RIGHT:
            for c in prefix:
                if c.dir == RIGHT and c.rel not in compat.get(new.rel, ()):
                    return False
        nb = get_bits(new)
        ns = C.sig(new.label)
        if new.dir == LOCAL and not C.diag_allowed(ns, nb):
            return False
        for c in prefix:
            cs, cb = C.sig(c.label), get_bits(c)
            if c.dir == LOCAL and not C.pair_allowed(cs, ns, UP, nb):
                return False
            if new.dir == LOCAL and not C.pair_allowed(ns, cs, DOWN, cb):
                return False
        return True

    return prune


def _initial_specs(C, ctx, sigma):
    """(S, values, compat) choices for an initial profile over sigma."""
    s_opts = sorted({ctx.init_mask & pb for pb in ctx.pre_pool(sigma)})
    reps = C.viable_rep_labels()
    out = []
    for S in s_opts:
        pool, compat = ctx.slice_pool(sigma, S)
        values = [Clause(lab, LOCAL) for lab in reps]
        for lab in reps:
            for rel in pool:
                values.append(Clause(lab, RIGHT, rel))
        values.sort(key=ctx.clause_key)
        out.append((S, values, compat))
    return out


def _step_specs(q: EnrichedState, C, ctx, sigma):
    """(S, values, compat) choices for the profile after an enriched state."""
    prev = q.profile()
    step = ctx.step_mask(q.S, prev.sigma)
    dead = ctx.step_mask(q.S2, prev.sigma)
    s2_opts = sorted({step & pb for pb in ctx.pre_pool(sigma)})
    out = []
    for S2 in s2_opts:
        if S2 & dead:
            continue
        if any(not (ctx.succ[prev.sigma][s] & S2) for s in ctx.bits(q.S)):
            continue
        succ = successor_values(prev, S2, ctx)
        values = sorted({v for vs in succ.values() for v in vs}, key=ctx.clause_key)
        if values:
            out.append((S2, values, None))
    return out


def _word_values(C, ctx, u):
    """Forced per-position clause values for a concrete input word: state
    sets and relations are the genuine run data, only labels and the column
    contents remain to choose."""
    _, _, alive = ctx.run_sets(u)
    n = len(u)
    reps = C.viable_rep_labels()
    per_pos = []
    for k in range(1, n + 1):
        vals = [Clause(lab, LOCAL) for lab in reps]
        right = sorted({ctx.genuine_rel(u, k, kp, alive) for kp in range(k + 1, n + 1)})
        left = sorted({ctx.genuine_rel(u, k, kp, alive) for kp in range(1, k)})
        for lab in reps:
            for r in right:
                vals.append(Clause(lab, RIGHT, r))
            for r in left:
                vals.append(Clause(lab, LEFT, r))
        per_pos.append((alive[k - 1], sorted(vals, key=ctx.clause_key), None))
    return per_pos


# ---------------------------------------------------------------------------
# the search


class _Searcher:
    """Iterative deepening on total sequence size (sum of 1 + column length).

    Within one size round the exploration is depth-first in canonical order
    (letters in alphabet order, columns in length-then-lex order), so the
    first sequence found is the least one under the frozen canonical order.
    A round that exhausts without ever being clipped by its size limit has
    seen every reachable state, so the instance is definitely empty.
    """

    def __init__(self, C, ctx, constraint, budget, max_len, stats):
        self.C = C
        self.ctx = ctx
        self.budget = budget
        self.max_len = max_len
        self.stats = stats
        self.word = None
        self.nfa = None
        if constraint is not None:
            if hasattr(constraint, "transitions"):
                self.nfa = constraint
                self.con_map = constraint.succ_map()
            else:
                self.word = tuple(constraint)
                for sym in self.word:
                    if sym not in C.in_alphabet:
                        raise ValueError(f"input symbol {sym!r} outside the alphabet")
                self.per_pos = _word_values(C, ctx, self.word)

    def run(self):
        if self.word is not None and not self.word:
            return None
        self.all_states = set()
        size = 2
        while True:
            self.clipped = False
            self.seen = set()
            found = self._dfs(INIT, self._con_start(), 0, size, [])
            if found is not None:
                return found
            if not self.clipped:
                return None  # the whole reachable space was explored
            size += 1

    def _con_start(self):
        if self.nfa is not None:
            return frozenset(self.nfa.initial)
        return 0 if self.word is not None else None

    def _con_step(self, cstate, sigma):
        if self.nfa is not None:
            out = frozenset(
                s2 for s in cstate for s2 in self.con_map.get((s, sigma), ())
            )
            return out if out else None
        if self.word is not None:
            if cstate < len(self.word) and self.word[cstate] == sigma:
                return cstate + 1
            return None
        return None

    def _accepting(self, state, cstate) -> bool:
        if not enriched_accepts(state, self.ctx):
            return False
        if self.nfa is not None:
            return bool(cstate & self.nfa.final)
        if self.word is not None:
            return cstate == len(self.word)
        return True

    def _dfs(self, state, cstate, depth, size_left, path):
        key = (state, cstate, size_left)
        if key in self.seen:
            return None
        self.seen.add(key)
        self.all_states.add((state, cstate))
        self.stats.visited = len(self.all_states)
        self.stats.expanded += 1
        if self.stats.expanded > self.budget:
            raise BudgetExceeded("search budget exceeded", self.stats)
        if self.word is not None:
            if depth >= len(self.word):
                return None
            letters = (self.word[depth],)
        else:
            letters = self.C.in_alphabet
        for sigma in letters:
            if self.word is not None or self.nfa is not None:
                c2 = self._con_step(cstate, sigma)
                if c2 is None:
                    continue
            else:
                c2 = None
            if self.word is not None:
                specs = [self.per_pos[depth]]
            elif state is INIT:
                specs = _initial_specs(self.C, self.ctx, sigma)
            else:
                specs = _step_specs(state, self.C, self.ctx, sigma)
            for S, values, compat in specs:
                intrinsic = 2 * len(values)
                max_col = min(self.max_len, size_left - 1, intrinsic)
                if max_col < intrinsic:
                    self.clipped = True
                if max_col < 1:
                    continue
                prune = _mk_prune(self.C, self.ctx, self.ctx.diag(S), compat)
                for clauses in _candidate_sequences(values, max_col, self.stats, prune):
                    if not any(c.dir == LOCAL for c in clauses):
                        continue
                    self.stats.candidates += 1
                    prof = Profile(sigma, S, clauses)
                    nxt = enriched_step(state, prof, self.C, self.ctx)
                    if nxt is None:
                        continue
                    used = 1 + len(prof.clauses)
                    path.append(prof)
                    if self._accepting(nxt, c2):
                        return tuple(path)
                    found = self._dfs(nxt, c2, depth + 1, size_left - used, path)
                    if found is not None:
                        return found
                    path.pop()
        return None


def search_good(
    C: McpInstance,
    input_constraint=None,
    budget: int = 10**6,
    max_profile_len: int = 12,
    ctx: ProfileContext | None = None,
):
    """Find the canonically least good profile sequence, or prove none exists.

    ``input_constraint`` may be None, a concrete input word, or an Nfa over
    the input alphabet; the Sigma-projection of the returned sequence is then
    constrained accordingly.  Returns (sequence or None, stats).  A None
    return is a definite no; resource exhaustion raises BudgetExceeded.
    """
    ctx = ctx or context_for(C)
    stats = SearchStats()
    if C.surely_empty():
        return None, stats
    s = _Searcher(C, ctx, input_constraint, budget, max_profile_len, stats)
    return s.run(), stats


# ---------------------------------------------------------------------------
# linearisation: from a good sequence back to o-graphs


def linearize(s, ctx: ProfileContext):
    """The canonical o-graph of a good sequence: topological sort of the
    path order, minimal paths broken by the (column, row) of their local
    clause."""
    g = build_gs(s, ctx)
    paths = maximal_paths(g)
    below = partial_order(g, paths)
    return _graph_from_order(g, paths, _canonical_topo(paths, below, g))


def _canonical_topo(paths, below, g):
    n = len(paths)
    preds = {b: set() for b in range(n)}
    for a in range(n):
        for b in below[a]:
            if a != b:
                preds[b].add(a)
    done: list = []
    remaining = set(range(n))
    keys = {pi: path_local(g, paths[pi]) for pi in range(n)}
    while remaining:
        avail = [pi for pi in remaining if not (preds[pi] & remaining)]
        pick = min(avail, key=lambda pi: keys[pi])
        done.append(pick)
        remaining.remove(pick)
    return done


def _graph_from_order(g, paths, order):
    u = tuple(p.sigma for p in g.profiles)
    out, orig = [], []
    for pi in order:
        k, i = path_local(g, paths[pi])
        out.append(g.profiles[k].clauses[i].label)
        orig.append(k + 1)
    return OGraph(u, tuple(out), tuple(orig))


def all_linearizations(s, ctx: ProfileContext, cap: int = 10**6):
    """Every o-graph induced by the path order, in a stable order."""
    g = build_gs(s, ctx)
    paths = maximal_paths(g)
    below = partial_order(g, paths)
    n = len(paths)
    preds = {b: {a for a in below if b in below[a] and a != b} for b in range(n)}
    count = 0

    def go(done, remaining):
        nonlocal count
        if not remaining:
            count += 1
            if count > cap:
                raise BudgetExceeded("too many linearizations")
            yield _graph_from_order(g, paths, done)
            return
        for pi in sorted(remaining):
            if preds[pi] & remaining:
                continue
            done.append(pi)
            remaining.remove(pi)
            yield from go(done, remaining)
            remaining.add(pi)
            done.pop()

    yield from go([], set(range(n)))


# ---------------------------------------------------------------------------
# DOT export


def gs_to_dot(s, ctx: ProfileContext, name: str = "gs") -> str:
    """Columns are input positions, rows follow the clause order."""
    g = build_gs(s, ctx)
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    for k, p in enumerate(g.profiles):
        lines.append(f"  subgraph cluster_{k} {{")
        lines.append(f'    label="{k + 1}:{fmt_letter(p.sigma)}";')
        for i, c in enumerate(p.clauses):
            lines.append(f'    v{k}_{i} [label="{c!r}"];')
        lines.append("  }")
    for (k, i), (k2, j) in sorted(g.edges):
        lines.append(f"  v{k}_{i} -> v{k2}_{j};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def order_to_dot(s, ctx: ProfileContext, name: str = "order") -> str:
    g = build_gs(s, ctx)
    paths = maximal_paths(g)
    below = partial_order(g, paths)
    lines = [f"digraph {name} {{"]
    for pi, path in enumerate(paths):
        k, i = path_local(g, paths[pi])
        lab = fmt_letter(g.profiles[k].clauses[i].label)
        lines.append(f'  p{pi} [label="{lab}@{k + 1}"];')
    for a in range(len(paths)):
        for b in sorted(below[a]):
            if a != b:
                lines.append(f"  p{a} -> p{b};")
    lines.append("}")
    return "\n".join(lines) + "\n"
