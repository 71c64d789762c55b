"""Preprocessing pipeline: non-erasing transform, output form, Scott normal
form, and compilation into existential/universal position constraints.

The non-erasing transform appends a separator and a copy of the input word to
every output, so that models use every input position.  Regions (before the
separator / after it) are recognised by the letters themselves, which keeps
the later normal form shallow.  Scott normalisation then rewrites a sentence
into  forall-forall psi  and  forall-exists psi_i  conjuncts with
quantifier-free bodies, folding any fresh unary predicates into the output
label as a bit vector.  Finally the quantifier-free bodies are read as a
constraint instance over atomic pair types.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import logic as L
from .automata import (
    PredicateTable,
    pred_eq,
    pred_label,
    pred_leq_in,
    pred_min_in,
    qa_converse,
    qa_first,
    qa_second,
    selected_pairs,
)
from .structures import SHARP, Bit, Copy, OGraph, PLetter, Sharp, fmt_letter


def normalize_var_names(phi):
    """Rename the (at most two) variable names to the canonical x and y."""
    names = sorted(L.var_names(phi))
    if len(names) > 2:
        raise PipelineOrder(f"more than two variable names: {names}")
    mapping = dict(zip(names, ("x", "y")))
    if all(mapping.get(n, n) == n for n in names):
        return phi
    return L.rename_vars(phi, mapping)


class AlphabetClash(ValueError):
    pass


class PipelineOrder(ValueError):
    pass


# ---------------------------------------------------------------------------
# non-erasing transform


@dataclass(frozen=True)
class NeInfo:
    """How the output alphabet was extended; undoes the extension."""

    gamma: tuple
    sigma: tuple
    out_alphabet: tuple

    def project_graph(self, g: OGraph) -> OGraph:
        """Strip the separator and the input copy from a model's output."""
        sharp_at = [j for j, x in enumerate(g.output) if isinstance(x, Sharp)]
        if len(sharp_at) != 1:
            raise ValueError("not a non-erasing-transformed model: separator count != 1")
        k = sharp_at[0]
        return OGraph(g.input, g.output[:k], g.origin[:k])


def _is_label(labels, var):
    return L.disj([L.OutLabel(lab, L.Var(var)) for lab in labels])


def make_non_erasing(phi, table: PredicateTable, out_alphabet):
    """Rewrite so every model carries a copy of its input after a separator.

    Returns (formula, table, out_alphabet, NeInfo).  The new sentence has
    exactly the models (u, v # copy(u), o') where (u, (v, o)) models the
    original, the separator's origin is 1 and the copy has identity origins.
    """
    phi = normalize_var_names(phi)
    gamma = tuple(out_alphabet)
    sigma = table.alphabet
    for x in gamma:
        if isinstance(x, (Sharp, Copy)):
            raise AlphabetClash(f"output alphabet already contains {fmt_letter(x)}")
    copies = tuple(Copy(s) for s in sigma)
    ext = gamma + (SHARP,) + copies

    t = table.copy()
    n_leq = t.fresh_name("_ne_leq")
    t.add(n_leq, pred_leq_in(sigma))
    n_eq = t.fresh_name("_ne_eq")
    t.add(n_eq, pred_eq(sigma))
    n_min = t.fresh_name("_ne_min")
    t.add(n_min, pred_min_in(sigma))
    n_lab = {}
    for s in sigma:
        name = t.fresh_name(f"_ne_lab_{fmt_letter(s)}")
        t.add(name, pred_label(s, sigma))
        n_lab[s] = name

    x, y = L.Var("x"), L.Var("y")
    ox, oy = L.OTerm("x"), L.OTerm("y")
    isg = lambda v: _is_label(gamma, v)
    isc = lambda v: _is_label(copies, v)
    shp = lambda v: L.OutLabel(SHARP, L.Var(v))

    def guard_before(v, body, kind):
        g = isg(v)
        return L.And((g, body)) if kind == "E" else L.Implies(g, body)

    def relativize(f):
        if isinstance(f, L.Quant):
            body = relativize(f.body)
            if f.sort == "out":
                return L.Quant(f.kind, "out", f.var, guard_before(f.var, body, f.kind))
            if f.sort == "any":
                g = L.Or((L.InT(L.Var(f.var)), L.And((L.OutT(L.Var(f.var)), isg(f.var)))))
                wrapped = L.And((g, body)) if f.kind == "E" else L.Implies(g, body)
                return L.Quant(f.kind, "any", f.var, wrapped)
            return L.Quant(f.kind, "in", f.var, body)
        kids = L.children(f)
        if kids:
            return L.rebuild(f, [relativize(k) for k in kids])
        return f

    fa2 = lambda body: L.Quant("A", "out", "x", L.Quant("A", "out", "y", body))
    conjuncts = [
        relativize(phi),
        # region discipline: plain letters before the separator, copies after
        fa2(L.Not(L.And((isg("x"), shp("y"), L.LeqOut(y, x))))),
        fa2(L.Not(L.And((isc("x"), shp("y"), L.LeqOut(x, y))))),
        fa2(L.Implies(L.And((shp("x"), shp("y"))), L.Eq(x, y))),
        L.Quant("E", "out", "x", shp("x")),
        L.Quant("A", "out", "x", L.Implies(shp("x"), L.Pred(n_min, (ox,)))),
        # the copy is the identity on the input: order, bijectivity, labels
        fa2(L.Implies(L.And((isc("x"), isc("y"), L.LeqOut(x, y))), L.Pred(n_leq, (ox, oy)))),
        fa2(L.Implies(L.And((isc("x"), isc("y"), L.Pred(n_eq, (ox, oy)))), L.Eq(x, y))),
        L.Quant(
            "A", "in", "x",
            L.Quant("E", "out", "y", L.And((isc("y"), L.Pred(n_eq, (x, oy))))),
        ),
        L.Quant(
            "A", "out", "x",
            L.Implies(
                isc("x"),
                L.conj(
                    [
                        L.Implies(L.Pred(n_lab[s], (ox,)), L.OutLabel(Copy(s), x))
                        for s in sigma
                    ]
                ),
            ),
        ),
    ]
    return L.conj(conjuncts), t, ext, NeInfo(gamma, sigma, ext)


# ---------------------------------------------------------------------------
# output form


def _resolve_static_types(f):
    """Resolve sort tests and type-inconsistent atoms once all variables are
    output-quantified (valid only after to_output_form)."""

    def is_oterm(t):
        return isinstance(t, L.OTerm)

    def go(f):
        if isinstance(f, L.Quant):
            return L.Quant(f.kind, f.sort, f.var, go(f.body))
        kids = L.children(f)
        if kids:
            return L.rebuild(f, [go(k) for k in kids])
        if isinstance(f, L.InT):
            return L.TRUE if is_oterm(f.term) else L.FALSE
        if isinstance(f, L.OutT):
            return L.FALSE if is_oterm(f.term) else L.TRUE
        if isinstance(f, (L.OutLabel, L.PBit, L.XBit)) and is_oterm(f.term):
            return L.FALSE
        if isinstance(f, (L.LeqOut, L.Eq)) and (is_oterm(f.t1) or is_oterm(f.t2)):
            return L.FALSE
        if isinstance(f, L.Pred) and any(not is_oterm(a) for a in f.args):
            return L.FALSE
        return f

    return L.simplify(go(f))


def to_output_form(phi):
    """Remove input-typed and untyped quantifiers (non-erasing models only).

    An input quantifier becomes an output quantifier over origins; an untyped
    one splits into the two guarded versions.  Afterwards every sort test is
    static, so they are resolved away.
    """

    def go(f):
        if isinstance(f, L.Quant):
            body = go(f.body)
            if f.sort == "out":
                return L.Quant(f.kind, "out", f.var, body)
            if f.sort == "in":
                return L.Quant(f.kind, "out", f.var, L.subst_origin(body, f.var))
            direct = L.Quant(f.kind, "out", f.var, body)
            via_origin = L.Quant(f.kind, "out", f.var, L.subst_origin(body, f.var))
            return L.Or((direct, via_origin)) if f.kind == "E" else L.And((direct, via_origin))
        kids = L.children(f)
        if kids:
            return L.rebuild(f, [go(k) for k in kids])
        return f

    return _resolve_static_types(go(phi))


# ---------------------------------------------------------------------------
# Scott normal form


@dataclass(frozen=True)
class SnfFormula:
    """forall x forall y psi  /\  AND_i forall x exists y psi_i, all bodies
    quantifier-free over the canonical variables x and y.  Fresh unary
    predicates introduced by the normalisation live in the output label as a
    bit vector of width n_bits."""

    psi: object
    psi_list: tuple
    in_alphabet: tuple
    base_out_alphabet: tuple
    n_bits: int
    table: PredicateTable

    def ext_out_alphabet(self) -> tuple:
        if self.n_bits == 0:
            return self.base_out_alphabet
        bits = [tuple((m >> i) & 1 for i in range(self.n_bits)) for m in range(1 << self.n_bits)]
        return tuple(PLetter(b, bt) for b in self.base_out_alphabet for bt in bits)

    def to_sentence(self):
        parts = [L.Quant("A", "out", "x", L.Quant("A", "out", "y", self.psi))]
        for b in self.psi_list:
            parts.append(L.Quant("A", "out", "x", L.Quant("E", "out", "y", b)))
        return L.conj(parts)

    def project_letter(self, letter):
        return letter.base if isinstance(letter, PLetter) else letter

    def project_graph(self, g: OGraph) -> OGraph:
        return OGraph(g.input, tuple(self.project_letter(v) for v in g.output), g.origin)


def _is_qf(f) -> bool:
    if isinstance(f, L.Quant):
        return False
    return all(_is_qf(k) for k in L.children(f))


def _canon_two_vars(f, outer, inner):
    """Rename so the outer variable is x and the inner one is y."""
    mapping = {}
    if outer is not None:
        mapping[outer] = "x"
    if inner is not None:
        mapping[inner] = "y"
    if outer == "y" and inner is None:
        mapping = {"y": "x", "x": "y"}
    if inner == "x" and outer is None:
        mapping = {"x": "y", "y": "x"}
    if outer == "y" and inner == "x":
        mapping = {"y": "x", "x": "y"}
    return L.rename_vars(f, mapping)


def _try_pull(body):
    """Try to see ``body`` as  Q y matrix  with a quantifier-free matrix.

    Pulls single inner quantifiers out of guarded conjunctions and
    disjunctions (the guard being free of the inner variable), and merges
    same-kind mergeable parts.  Returns (kind, var, matrix) or None.
    """
    if isinstance(body, L.Quant):
        if body.sort == "out" and _is_qf(body.body):
            return body.kind, body.var, body.body
        return None
    if isinstance(body, (L.Or, L.And)):
        plain, pulled = [], []
        for p in body.parts:
            if _is_qf(p):
                plain.append(p)
            else:
                hit = _try_pull(p)
                if hit is None:
                    return None
                pulled.append(hit)
        if not pulled:
            return None
        kinds = {k for k, _, _ in pulled}
        names = {v for _, v, _ in pulled}
        if len(kinds) != 1 or len(names) != 1:
            return None
        kind, var = pulled[0][0], pulled[0][1]
        if any(var in L.free_vars(p) for p in plain):
            return None
        merge_ok = (kind == "E") == isinstance(body, L.Or)
        if len(pulled) > 1 and not merge_ok:
            return None
        matrices = [m for _, _, m in pulled]
        if isinstance(body, L.Or):
            return kind, var, L.disj(plain + matrices)
        return kind, var, L.conj(plain + matrices)
    return None


def _find_innermost_quant(f):
    """Some quantified subformula with a quantifier-free body, or None."""
    if isinstance(f, L.Quant):
        hit = _find_innermost_quant(f.body)
        if hit is not None:
            return hit
        return f if _is_qf(f.body) else None
    for k in L.children(f):
        hit = _find_innermost_quant(k)
        if hit is not None:
            return hit
    return None


def _replace_subformula(f, target, replacement):
    if f == target:
        return replacement
    kids = L.children(f)
    if kids:
        return L.rebuild(f, [_replace_subformula(k, target, replacement) for k in kids])
    return f


def scott_normal_form(phi, table: PredicateTable, out_alphabet) -> SnfFormula:
    """Normalise an output sentence; fresh predicates become label bits."""

    def check_output_only(f):
        if isinstance(f, L.Quant):
            if f.sort != "out":
                raise PipelineOrder("scott_normal_form expects an output formula")
            check_output_only(f.body)
        else:
            for k in L.children(f):
                check_output_only(k)

    check_output_only(phi)
    phi = L.nnf(normalize_var_names(phi))

    psi_parts: list = []
    psi_list: list = []
    fresh: dict = {}  # canonical replaced subformula -> bit index

    def fresh_bit(xi) -> int:
        key = _canon_two_vars(xi, *_role_vars(xi))
        if key not in fresh:
            idx = len(fresh)
            fresh[key] = idx
            # axiom: the bit implies the replaced subformula
            body = key.body
            guarded = L.Implies(L.PBit(idx, L.Var("x")), body)
            if key.kind == "E":
                psi_list.append(guarded)
            else:
                psi_parts.append(guarded)
        return fresh[key]

    def _role_vars(xi):
        fv = sorted(L.free_vars(xi))
        outer = fv[0] if fv else None
        return outer, xi.var

    worklist = list(phi.parts) if isinstance(phi, L.And) else [phi]
    while worklist:
        c = worklist.pop(0)
        if isinstance(c, L.And):
            worklist = list(c.parts) + worklist
            continue
        if _is_qf(c):
            fv = sorted(L.free_vars(c))
            mapping = {v: "x" for v in fv}
            psi_parts.append(L.rename_vars(c, mapping) if mapping else c)
            continue
        if isinstance(c, L.Quant) and _is_qf(c.body):
            if c.kind == "A":
                psi_parts.append(_canon_two_vars(c.body, c.var, None))
            else:
                body = c.body
                mapping = {c.var: "y"} if c.var != "y" else {}
                psi_list.append(L.rename_vars(body, mapping) if mapping else body)
            continue
        if isinstance(c, L.Quant) and c.kind == "A":
            pulled = _try_pull(c.body)
            if pulled is not None and pulled[1] == c.var:
                pulled = None  # inner quantifier shadows the outer variable
            if pulled is not None:
                kind, var, matrix = pulled
                body = _canon_two_vars(matrix, c.var, var)
                if kind == "A":
                    psi_parts.append(body)
                else:
                    psi_list.append(body)
                continue
        # general case: replace an innermost quantified subformula by a bit
        xi = _find_innermost_quant(c)
        if xi is None:
            raise PipelineOrder("cannot normalise: no quantified subformula found")
        fv = sorted(L.free_vars(xi))
        var = fv[0] if fv else "x"
        idx = fresh_bit(xi)
        worklist.insert(0, _replace_subformula(c, xi, L.PBit(idx, L.Var(var))))

    n_bits = len(fresh)
    psi = L.conj(psi_parts) if psi_parts else L.TRUE
    return SnfFormula(
        psi=psi,
        psi_list=tuple(psi_list),
        in_alphabet=table.alphabet,
        base_out_alphabet=tuple(out_alphabet),
        n_bits=n_bits,
        table=table,
    )


# ---------------------------------------------------------------------------
# constraint compilation


UP, DOWN, SAME = "<", ">", "="  # direction of (x, y): x before, x after, equal


@dataclass
class McpInstance:
    """Existential and universal constraints over atomic pair types.

    An atomic type fixes the two output labels (through the label atoms that
    actually occur), the direction between the positions, and a truth value
    for every normalised input-predicate atom.  The universal part forbids
    the types falsifying the forall-forall body; each forall-exists body
    induces one witness requirement per position.  Both are evaluated
    lazily per type and memoised; ``c_forall``/``c_exists`` materialise the
    classic tuple view for small instances.
    """

    atoms: tuple  # derived predicate names, canonical order
    label_atoms: tuple  # ('lab', letter) / ('pbit', i) / ('xbit', i)
    psi: object
    psi_list: tuple
    predicates: PredicateTable
    in_alphabet: tuple
    out_alphabet: tuple
    snf: SnfFormula
    _sig_cache: dict = field(default_factory=dict)
    _eval_cache: dict = field(default_factory=dict)
    _viable: frozenset | None = None

    # -- signatures ---------------------------------------------------------

    def sig(self, letter) -> int:
        if letter not in self._sig_cache:
            bits = 0
            for i, at in enumerate(self.label_atoms):
                kind = at[0]
                if kind == "lab":
                    v = L.label_matches(at[1], letter)
                elif kind == "pbit":
                    v = isinstance(letter, PLetter) and bool(letter.bits[at[1]])
                else:
                    x = letter.base if isinstance(letter, PLetter) else letter
                    v = isinstance(x, Bit) and bool(x.bits[at[1]])
                if v:
                    bits |= 1 << i
            self._sig_cache[letter] = bits
        return self._sig_cache[letter]

    def rep_labels(self) -> tuple:
        """One representative output letter per signature, canonical order."""
        seen, reps = set(), []
        for letter in self.out_alphabet:
            s = self.sig(letter)
            if s not in seen:
                seen.add(s)
                reps.append(letter)
        return tuple(reps)

    # -- type elimination -----------------------------------------------------

    def viable_sigs(self) -> frozenset:
        """Greatest fixpoint of signature viability.

        A signature survives if some diagonal valuation passes the universal
        diagonal check and every witness requirement is met either on the
        diagonal or by a witness type over a surviving signature that the
        universal constraints allow.  Positions of models only ever carry
        surviving signatures, so an empty result proves unsatisfiability.
        """
        if getattr(self, "_viable", None) is not None:
            return self._viable
        m = len(self.atoms)
        if m > 12:
            self._viable = frozenset(self.sig(x) for x in self.out_alphabet)
            return self._viable
        sigs = sorted({self.sig(x) for x in self.out_alphabet})
        alive = set(sigs)
        while True:
            wit_ok = {}
            for s in alive:
                for i in range(len(self.psi_list)):
                    wit_ok[(i, s)] = any(
                        self.exists_witness(i, s, s2, d, b) and self.pair_allowed(s, s2, d, b)
                        for s2 in alive
                        for d in (UP, DOWN)
                        for b in range(1 << m)
                    )
            keep = set()
            for s in alive:
                for diag in range(1 << m):
                    if not self.diag_allowed(s, diag):
                        continue
                    if all(
                        self.exists_self(i, s, diag) or wit_ok[(i, s)]
                        for i in range(len(self.psi_list))
                    ):
                        keep.add(s)
                        break
            if keep == alive:
                break
            alive = keep
        self._viable = frozenset(alive)
        return self._viable

    def viable_rep_labels(self) -> tuple:
        viable = self.viable_sigs()
        return tuple(x for x in self.rep_labels() if self.sig(x) in viable)

    def surely_empty(self) -> bool:
        """True when type elimination leaves no usable output signature."""
        return not self.viable_sigs()

    # -- type evaluation ----------------------------------------------------

    def _eval_body(self, which, sigx, sigy, direction, bits) -> bool:
        key = (which, sigx, sigy, direction, bits)
        if key not in self._eval_cache:
            body = self.psi if which == -1 else self.psi_list[which]
            self._eval_cache[key] = self._ev(body, sigx, sigy, direction, bits)
        return self._eval_cache[key]

    def _ev(self, f, sigx, sigy, d, bits) -> bool:
        if isinstance(f, L.TrueF):
            return True
        if isinstance(f, L.FalseF):
            return False
        if isinstance(f, L.Not):
            return not self._ev(f.sub, sigx, sigy, d, bits)
        if isinstance(f, L.And):
            return all(self._ev(p, sigx, sigy, d, bits) for p in f.parts)
        if isinstance(f, L.Or):
            return any(self._ev(p, sigx, sigy, d, bits) for p in f.parts)
        if isinstance(f, L.Implies):
            return (not self._ev(f.left, sigx, sigy, d, bits)) or self._ev(f.right, sigx, sigy, d, bits)
        if isinstance(f, L.Iff):
            return self._ev(f.left, sigx, sigy, d, bits) == self._ev(f.right, sigx, sigy, d, bits)
        if isinstance(f, (L.OutLabel, L.PBit, L.XBit)):
            term = f.term
            if isinstance(term, L.OTerm):
                return False
            sig = sigx if term.name == "x" else sigy
            if isinstance(f, L.OutLabel):
                key = ("lab", f.label)
            elif isinstance(f, L.PBit):
                key = ("pbit", f.index)
            else:
                key = ("xbit", f.index)
            i = self.label_atoms.index(key)
            return bool(sig >> i & 1)
        if isinstance(f, L.LeqOut):
            a, b = f.t1.name, f.t2.name
            if a == b:
                return True
            if a == "x":
                return d in (UP, SAME)
            return d in (DOWN, SAME)
        if isinstance(f, L.Eq):
            if f.t1.name == f.t2.name:
                return True
            return d == SAME
        if isinstance(f, L.Pred):
            return bool(bits >> self.atoms.index(f.name) & 1)
        if isinstance(f, (L.InT, L.OutT)):
            # statically resolved earlier; keep a safe default
            return isinstance(f, L.InT) and isinstance(f.term, L.OTerm)
        raise PipelineOrder(f"unexpected node in a constraint body: {f!r}")

    # -- public checks, used by profile validity and the direct semantics ---

    def pair_allowed(self, sigx, sigy, direction, bits) -> bool:
        return self._eval_body(-1, sigx, sigy, direction, bits)

    def diag_allowed(self, sig, diag_bits) -> bool:
        return self._eval_body(-1, sig, sig, SAME, diag_bits)

    def exists_count(self) -> int:
        return len(self.psi_list)

    def exists_self(self, i, sig, diag_bits) -> bool:
        return self._eval_body(i, sig, sig, SAME, diag_bits)

    def exists_witness(self, i, sigx, sigy, direction, bits) -> bool:
        return self._eval_body(i, sigx, sigy, direction, bits)

    # -- direct satisfaction on an o-graph ----------------------------------

    def _pair_bits(self, u, i, j) -> int:
        bits = 0
        for k, name in enumerate(self.atoms):
            if (i, j) in selected_pairs(self.predicates.get(name), u):
                bits |= 1 << k
        return bits

    def holds(self, g: OGraph) -> bool:
        """Constraint satisfaction; matches the normal form on non-erasing graphs."""
        u = tuple(g.input)
        n = len(g.output)
        sigs = [self.sig(v) for v in g.output]
        diag = [self._pair_bits(u, g.origin[p], g.origin[p]) for p in range(n)]
        for p in range(n):
            if not self.diag_allowed(sigs[p], diag[p]):
                return False
            for q in range(n):
                if p == q:
                    continue
                d = UP if p < q else DOWN
                bits = self._pair_bits(u, g.origin[p], g.origin[q])
                if not self.pair_allowed(sigs[p], sigs[q], d, bits):
                    return False
        for i in range(len(self.psi_list)):
            for p in range(n):
                if self.exists_self(i, sigs[p], diag[p]):
                    continue
                ok = False
                for q in range(n):
                    if p == q:
                        continue
                    d = UP if p < q else DOWN
                    bits = self._pair_bits(u, g.origin[p], g.origin[q])
                    if self.exists_witness(i, sigs[p], sigs[q], d, bits):
                        ok = True
                        break
                if not ok:
                    return False
        return True

    # -- classic tuple views and dump ----------------------------------------

    def _pattern(self, bits) -> str:
        if not self.atoms:
            return "true"
        lits = [(n if bits >> i & 1 else "!" + n) for i, n in enumerate(self.atoms)]
        return "&".join(lits)

    def c_forall(self, max_items=20000):
        """Forbidden types as (label, label', dir, pattern) tuples."""
        out = []
        arrows = {UP: "^", DOWN: "v"}
        for gx, gy in itertools.product(self.out_alphabet, repeat=2):
            for d in (UP, DOWN):
                for bits in range(1 << len(self.atoms)):
                    if not self.pair_allowed(self.sig(gx), self.sig(gy), d, bits):
                        out.append((gx, gy, arrows[d], self._pattern(bits)))
                        if len(out) > max_items:
                            raise ValueError("constraint view too large; raise max_items")
        return out

    def c_forbid_diag(self, max_items=20000):
        out = []
        for gx in self.out_alphabet:
            for bits in range(1 << len(self.atoms)):
                if not self.diag_allowed(self.sig(gx), bits):
                    out.append((gx, self._pattern(bits)))
                    if len(out) > max_items:
                        raise ValueError("constraint view too large; raise max_items")
        return out

    def c_exists(self, max_items=20000):
        """Per requirement: (label, self-patterns, witness tuples)."""
        out = []
        arrows = {UP: "^", DOWN: "v"}
        for i in range(len(self.psi_list)):
            per_label = []
            for gx in self.out_alphabet:
                selfs = [
                    self._pattern(bits)
                    for bits in range(1 << len(self.atoms))
                    if self.exists_self(i, self.sig(gx), bits)
                ]
                wit = []
                for gy in self.out_alphabet:
                    for d in (UP, DOWN):
                        for bits in range(1 << len(self.atoms)):
                            if self.exists_witness(i, self.sig(gx), self.sig(gy), d, bits):
                                wit.append((gy, arrows[d], self._pattern(bits)))
                                if len(wit) > max_items:
                                    raise ValueError("constraint view too large")
                per_label.append((gx, tuple(selfs), tuple(wit)))
            out.append(tuple(per_label))
        return out

    def is_trivial(self) -> bool:
        """No forbidden type and no witness requirement."""
        if self.psi_list:
            return False
        m = 1 << len(self.atoms)
        for gx, gy in itertools.product(self.rep_labels(), repeat=2):
            sx, sy = self.sig(gx), self.sig(gy)
            for bits in range(m):
                if not self.diag_allowed(sx, bits):
                    return False
                for d in (UP, DOWN):
                    if not self.pair_allowed(sx, sy, d, bits):
                        return False
        return True

    def dump(self) -> str:
        lines = [
            "atoms: " + (" ".join(self.atoms) if self.atoms else "-"),
            "labels: " + " ".join(fmt_letter(x) for x in self.out_alphabet),
        ]
        for gx, p in self.c_forbid_diag():
            lines.append(f"forbid: {fmt_letter(gx)} {p}")
        for gx, gy, d, p in self.c_forall():
            lines.append(f"forall: {fmt_letter(gx)} {fmt_letter(gy)} {d} {p}")
        for i, per_label in enumerate(self.c_exists()):
            for gx, selfs, wit in per_label:
                sstr = ",".join(selfs) if selfs else "-"
                wstr = " ".join(f"({fmt_letter(gy)} {d} {p})" for gy, d, p in wit) if wit else "-"
                lines.append(f"exists[{i}]: {fmt_letter(gx)} self={sstr} wit={wstr}")
        return "\n".join(lines) + "\n"


def snf_dump(snf: SnfFormula) -> str:
    lines = [
        "in: " + " ".join(fmt_letter(x) for x in snf.in_alphabet),
        "out: " + " ".join(fmt_letter(x) for x in snf.base_out_alphabet),
        f"bits: {snf.n_bits}",
        f"psi: {snf.psi!r}",
    ]
    for i, b in enumerate(snf.psi_list):
        lines.append(f"psi[{i}]: {b!r}")
    return "\n".join(lines) + "\n"


_PATTERNS = {
    ("x",): "ux",
    ("y",): "uy",
    ("x", "x"): "xx",
    ("x", "y"): "xy",
    ("y", "x"): "yx",
    ("y", "y"): "yy",
    (): "00",
}


def compile_mcp(snf: SnfFormula) -> McpInstance:
    """Read the normal form as a constraint instance.

    Predicate atoms are normalised to canonical binary predicates evaluated
    at (o(x), o(y)) -- converses and diagonals become derived query automata
    -- and the bodies are then pure functions of an atomic type.
    """
    derived = PredicateTable(snf.table.alphabet)
    atom_names: list = []

    def derive(name, pattern) -> str:
        dname = f"{name}.{pattern}"
        if dname not in derived:
            q = snf.table.get(name)
            if pattern in ("xy", "00"):
                dq = q
            elif pattern == "yx":
                dq = qa_converse(q)
            elif pattern in ("xx", "ux"):
                dq = qa_first(q)
            elif pattern in ("yy", "uy"):
                dq = qa_second(q)
            else:
                raise PipelineOrder(f"bad pattern {pattern}")
            derived.add(dname, dq)
            atom_names.append(dname)
        return dname

    def norm(f):
        if isinstance(f, L.Quant):
            raise PipelineOrder("constraint bodies must be quantifier-free")
        kids = L.children(f)
        if kids:
            return L.rebuild(f, [norm(k) for k in kids])
        if isinstance(f, L.Pred):
            key = tuple(a.name for a in f.args)
            if key not in _PATTERNS:
                raise PipelineOrder(f"unexpected predicate arguments in {f!r}")
            dname = derive(f.name, _PATTERNS[key])
            return L.Pred(dname, (L.OTerm("x"), L.OTerm("y")))
        return f

    psi = norm(snf.psi)
    psi_list = tuple(norm(b) for b in snf.psi_list)

    label_atoms: list = []

    def note_labels(f):
        for a in L.atoms(f):
            if isinstance(a, L.OutLabel) and ("lab", a.label) not in label_atoms:
                label_atoms.append(("lab", a.label))
            elif isinstance(a, L.PBit) and ("pbit", a.index) not in label_atoms:
                label_atoms.append(("pbit", a.index))
            elif isinstance(a, L.XBit) and ("xbit", a.index) not in label_atoms:
                label_atoms.append(("xbit", a.index))

    note_labels(psi)
    for b in psi_list:
        note_labels(b)

    return McpInstance(
        atoms=tuple(atom_names),
        label_atoms=tuple(label_atoms),
        psi=psi,
        psi_list=psi_list,
        predicates=derived,
        in_alphabet=snf.in_alphabet,
        out_alphabet=snf.ext_out_alphabet(),
        snf=snf,
    )
