"""Formula ASTs for the transduction logic, parsing, and direct model checking.

The logic is the two-variable fragment over output positions: output labels,
the output order, an origin function into the input word, and binary input
predicates supplied as query automata.  Its data-word twin swaps the origin
for an ordered datum.  Quantifiers carry a sort: 'in', 'out', or 'any'
(untyped, ranging over both position sets).

Type-inconsistent atoms (e.g. an output-label test on an input term) are
legal and evaluate to false; translations rely on that convention.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .automata import PredicateTable, pred_letter_test, selected_pairs
from .structures import Bit, OGraph, PLetter, TypedDataWord


class LogicError(ValueError):
    pass


class ParseError(LogicError):
    def __init__(self, msg, pos=None):
        super().__init__(msg if pos is None else f"{msg} (at offset {pos})")
        self.pos = pos


class VariableLimit(ParseError):
    pass


class UnknownPredicate(ParseError):
    pass


class ArityError(ParseError):
    pass


class NotASentence(LogicError):
    pass


class NotDataFormula(LogicError):
    pass


class NotClosedUnderNegation(LogicError):
    pass


# ---------------------------------------------------------------------------
# terms and formulas


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class OTerm:
    """o^k(var) with k >= 1; on input positions the origin acts as identity."""

    name: str
    k: int = 1

    def __repr__(self):
        return "o(" * self.k + self.name + ")" * self.k


@dataclass(frozen=True)
class TrueF:
    def __repr__(self):
        return "true"


@dataclass(frozen=True)
class FalseF:
    def __repr__(self):
        return "false"


TRUE, FALSE = TrueF(), FalseF()


@dataclass(frozen=True)
class OutLabel:
    label: object
    term: object

    def __repr__(self):
        from .structures import fmt_letter

        return f"lab_{fmt_letter(self.label)}({self.term!r})"


@dataclass(frozen=True)
class PBit:
    """Test of a Scott-normalisation bit folded into the output label."""

    index: int
    term: object

    def __repr__(self):
        return f"P{self.index}({self.term!r})"


@dataclass(frozen=True)
class XBit:
    """Membership bit of a second-order variable, on either word."""

    index: int
    term: object

    def __repr__(self):
        return f"X{self.index}({self.term!r})"


@dataclass(frozen=True)
class LeqOut:
    """Output order; reused as the position order on data words."""

    t1: object
    t2: object

    def __repr__(self):
        return f"({self.t1!r} <=out {self.t2!r})"


@dataclass(frozen=True)
class Eq:
    t1: object
    t2: object

    def __repr__(self):
        return f"({self.t1!r} = {self.t2!r})"


@dataclass(frozen=True)
class InT:
    term: object

    def __repr__(self):
        return f"in({self.term!r})"


@dataclass(frozen=True)
class OutT:
    term: object

    def __repr__(self):
        return f"out({self.term!r})"


@dataclass(frozen=True)
class Pred:
    """Input predicate atom {name}(args); arity 0, 1 or 2."""

    name: str
    args: tuple

    def __repr__(self):
        return "{%s}(%s)" % (self.name, ", ".join(repr(a) for a in self.args))


@dataclass(frozen=True)
class Member:
    setvar: str
    term: object

    def __repr__(self):
        return f"{self.setvar}({self.term!r})"


@dataclass(frozen=True)
class Not:
    sub: object

    def __repr__(self):
        return f"!{self.sub!r}"


@dataclass(frozen=True)
class And:
    parts: tuple

    def __repr__(self):
        return "(" + " & ".join(repr(p) for p in self.parts) + ")"


@dataclass(frozen=True)
class Or:
    parts: tuple

    def __repr__(self):
        return "(" + " | ".join(repr(p) for p in self.parts) + ")"


@dataclass(frozen=True)
class Implies:
    left: object
    right: object

    def __repr__(self):
        return f"({self.left!r} -> {self.right!r})"


@dataclass(frozen=True)
class Iff:
    left: object
    right: object

    def __repr__(self):
        return f"({self.left!r} <-> {self.right!r})"


@dataclass(frozen=True)
class Quant:
    kind: str  # 'E' or 'A'
    sort: str  # 'in', 'out' or 'any'
    var: str
    body: object

    def __repr__(self):
        word = {"E": "exists", "A": "forall"}[self.kind]
        suffix = {"in": "_in", "out": "_out", "any": ""}[self.sort]
        return f"({word}{suffix} {self.var}. {self.body!r})"


@dataclass(frozen=True)
class EltFormula:
    """An existential second-order prefix over an ordinary sentence."""

    setvars: tuple
    body: object

    def __repr__(self):
        pre = "".join(f"exists2 {x}. " for x in self.setvars)
        return pre + repr(self.body)


def conj(parts) -> object:
    """Flattening conjunction with unit simplification."""
    flat = []
    for p in parts:
        if isinstance(p, TrueF):
            continue
        if isinstance(p, FalseF):
            return FALSE
        if isinstance(p, And):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(parts) -> object:
    flat = []
    for p in parts:
        if isinstance(p, FalseF):
            continue
        if isinstance(p, TrueF):
            return TRUE
        if isinstance(p, Or):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def children(f):
    if isinstance(f, Not):
        return (f.sub,)
    if isinstance(f, (And, Or)):
        return f.parts
    if isinstance(f, (Implies, Iff)):
        return (f.left, f.right)
    if isinstance(f, Quant):
        return (f.body,)
    return ()


def rebuild(f, kids):
    if isinstance(f, Not):
        return Not(kids[0])
    if isinstance(f, And):
        return And(tuple(kids))
    if isinstance(f, Or):
        return Or(tuple(kids))
    if isinstance(f, Implies):
        return Implies(kids[0], kids[1])
    if isinstance(f, Iff):
        return Iff(kids[0], kids[1])
    if isinstance(f, Quant):
        return Quant(f.kind, f.sort, f.var, kids[0])
    return f


def atoms(f):
    """All atom nodes, in syntactic order."""
    kids = children(f)
    if kids:
        out = []
        for k in kids:
            out.extend(atoms(k))
        return out
    return [f]


def atom_terms(f):
    if isinstance(f, (OutLabel, PBit, XBit, InT, OutT, Member)):
        return (getattr(f, "term"),)
    if isinstance(f, (LeqOut, Eq)):
        return (f.t1, f.t2)
    if isinstance(f, Pred):
        return f.args
    return ()


def free_vars(f, bound=frozenset()):
    if isinstance(f, Quant):
        return free_vars(f.body, bound | {f.var})
    kids = children(f)
    if kids:
        out = set()
        for k in kids:
            out |= free_vars(k, bound)
        return out
    out = set()
    for t in atom_terms(f):
        name = t.name if isinstance(t, (Var, OTerm)) else None
        if name is not None and name not in bound:
            out.add(name)
    return out


def var_names(f):
    """All first-order variable names occurring anywhere (bound or free)."""
    if isinstance(f, EltFormula):
        return var_names(f.body)
    names = set()
    if isinstance(f, Quant):
        names.add(f.var)
        return names | var_names(f.body)
    kids = children(f)
    if kids:
        for k in kids:
            names |= var_names(k)
        return names
    for t in atom_terms(f):
        if isinstance(t, (Var, OTerm)):
            names.add(t.name)
    return names


def rename_vars(f, mapping):
    """Bijective renaming of variable names, binders included."""

    def rt(t):
        if isinstance(t, Var):
            return Var(mapping.get(t.name, t.name))
        if isinstance(t, OTerm):
            return OTerm(mapping.get(t.name, t.name), t.k)
        return t

    if isinstance(f, Quant):
        return Quant(f.kind, f.sort, mapping.get(f.var, f.var), rename_vars(f.body, mapping))
    kids = children(f)
    if kids:
        return rebuild(f, [rename_vars(k, mapping) for k in kids])
    if isinstance(f, OutLabel):
        return OutLabel(f.label, rt(f.term))
    if isinstance(f, PBit):
        return PBit(f.index, rt(f.term))
    if isinstance(f, XBit):
        return XBit(f.index, rt(f.term))
    if isinstance(f, LeqOut):
        return LeqOut(rt(f.t1), rt(f.t2))
    if isinstance(f, Eq):
        return Eq(rt(f.t1), rt(f.t2))
    if isinstance(f, InT):
        return InT(rt(f.term))
    if isinstance(f, OutT):
        return OutT(rt(f.term))
    if isinstance(f, Pred):
        return Pred(f.name, tuple(rt(a) for a in f.args))
    if isinstance(f, Member):
        return Member(f.setvar, rt(f.term))
    return f


def subst_origin(f, var):
    """Substitute o(var) for var: each term over var gains one origin layer."""

    def rt(t):
        if isinstance(t, Var) and t.name == var:
            return OTerm(var, 1)
        if isinstance(t, OTerm) and t.name == var:
            return OTerm(var, t.k + 1)
        return t

    if isinstance(f, Quant):
        if f.var == var:  # shadowed
            return f
        return Quant(f.kind, f.sort, f.var, subst_origin(f.body, var))
    kids = children(f)
    if kids:
        return rebuild(f, [subst_origin(k, var) for k in kids])
    return rename_like(f, rt)


def rename_like(atom, rt):
    if isinstance(atom, OutLabel):
        return OutLabel(atom.label, rt(atom.term))
    if isinstance(atom, PBit):
        return PBit(atom.index, rt(atom.term))
    if isinstance(atom, XBit):
        return XBit(atom.index, rt(atom.term))
    if isinstance(atom, LeqOut):
        return LeqOut(rt(atom.t1), rt(atom.t2))
    if isinstance(atom, Eq):
        return Eq(rt(atom.t1), rt(atom.t2))
    if isinstance(atom, InT):
        return InT(rt(atom.term))
    if isinstance(atom, OutT):
        return OutT(rt(atom.term))
    if isinstance(atom, Pred):
        return Pred(atom.name, tuple(rt(a) for a in atom.args))
    if isinstance(atom, Member):
        return Member(atom.setvar, rt(atom.term))
    return atom


def nnf(f, neg=False):
    """Negation normal form; Implies and Iff are expanded."""
    if isinstance(f, TrueF):
        return FALSE if neg else TRUE
    if isinstance(f, FalseF):
        return TRUE if neg else FALSE
    if isinstance(f, Not):
        return nnf(f.sub, not neg)
    if isinstance(f, And):
        parts = [nnf(p, neg) for p in f.parts]
        return disj(parts) if neg else conj(parts)
    if isinstance(f, Or):
        parts = [nnf(p, neg) for p in f.parts]
        return conj(parts) if neg else disj(parts)
    if isinstance(f, Implies):
        return nnf(disj([Not(f.left), f.right]), neg)
    if isinstance(f, Iff):
        both = conj([f.left, f.right])
        neither = conj([Not(f.left), Not(f.right)])
        return nnf(disj([both, neither]), neg)
    if isinstance(f, Quant):
        kind = f.kind if not neg else ("E" if f.kind == "A" else "A")
        return Quant(kind, f.sort, f.var, nnf(f.body, neg))
    return Not(f) if neg else f


def negate(phi):
    """Negation; flips evaluate on every model."""
    if isinstance(phi, EltFormula):
        raise NotClosedUnderNegation("existential second-order sentences cannot be negated here")
    if isinstance(phi, TrueF):
        return FALSE
    if isinstance(phi, FalseF):
        return TRUE
    if isinstance(phi, Not):
        return phi.sub
    return Not(phi)


# ---------------------------------------------------------------------------
# parser


_TOKEN = re.compile(
    r"\s*(?:(?P<lop><=out|<->|->|[&|!=(){}.,])|(?P<id>[A-Za-z_][A-Za-z0-9_']*))"
)

_KEYWORDS = {
    "forall_out": ("A", "out"),
    "exists_out": ("E", "out"),
    "forall_in": ("A", "in"),
    "exists_in": ("E", "in"),
    "forall": ("A", "any"),
    "exists": ("E", "any"),
}
_RESERVED = set(_KEYWORDS) | {"true", "false", "not", "in", "out", "o", "exists2"}


class _Parser:
    def __init__(self, text, table):
        self.text = text
        self.table = table
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                if text[pos:].strip():
                    raise ParseError(f"unexpected character {text[pos:].strip()[0]!r}", pos)
                break
            self.toks.append((m.group("lop") or m.group("id"), m.start()))
            pos = m.end()
        self.i = 0
        self.setvars = []
        self.fovars = []

    def peek(self):
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def pos(self):
        return self.toks[self.i][1] if self.i < len(self.toks) else len(self.text)

    def take(self, expected=None):
        if self.i >= len(self.toks):
            raise ParseError(f"unexpected end of input, expected {expected!r}", len(self.text))
        tok, p = self.toks[self.i]
        if expected is not None and tok != expected:
            raise ParseError(f"expected {expected!r}, found {tok!r}", p)
        self.i += 1
        return tok

    def note_var(self, name, p):
        if name not in self.fovars:
            self.fovars.append(name)
            if len(self.fovars) > 2:
                raise VariableLimit(
                    f"third variable name {name!r}; the logic is two-variable", p
                )

    def parse(self):
        while self.peek() == "exists2":
            self.take()
            p = self.pos()
            name = self.take()
            if name in _RESERVED or not name.isidentifier():
                raise ParseError(f"bad set variable name {name!r}", p)
            if name in self.setvars:
                raise ParseError(f"duplicate set variable {name!r}", p)
            self.setvars.append(name)
            self.take(".")
        body = self.formula()
        if self.i < len(self.toks):
            raise ParseError(f"trailing input {self.peek()!r}", self.pos())
        if self.setvars:
            return EltFormula(tuple(self.setvars), body)
        return body

    def formula(self):
        return self.iff()

    def iff(self):
        f = self.impl()
        while self.peek() == "<->":
            self.take()
            f = Iff(f, self.impl())
        return f

    def impl(self):
        f = self.or_()
        if self.peek() == "->":
            self.take()
            return Implies(f, self.impl())
        return f

    def or_(self):
        f = self.and_()
        while self.peek() == "|":
            self.take()
            g = self.and_()
            f = Or(f.parts + (g,)) if isinstance(f, Or) else Or((f, g))
        return f

    def and_(self):
        f = self.unary()
        while self.peek() == "&":
            self.take()
            g = self.unary()
            f = And(f.parts + (g,)) if isinstance(f, And) else And((f, g))
        return f

    def unary(self):
        tok = self.peek()
        if tok in ("!", "not"):
            self.take()
            return Not(self.unary())
        if tok in _KEYWORDS:
            self.take()
            kind, sort = _KEYWORDS[tok]
            p = self.pos()
            var = self.take()
            if var in _RESERVED:
                raise ParseError(f"reserved word {var!r} cannot be a variable", p)
            self.note_var(var, p)
            self.take(".")
            return Quant(kind, sort, var, self.formula())
        if tok == "exists2":
            raise ParseError("exists2 is only allowed as a leading prefix", self.pos())
        return self.atom()

    def term(self):
        tok = self.peek()
        p = self.pos()
        if tok == "o":
            self.take()
            self.take("(")
            inner = self.term()
            self.take(")")
            if isinstance(inner, Var):
                return OTerm(inner.name, 1)
            return OTerm(inner.name, inner.k + 1)
        name = self.take()
        if name in _RESERVED or not name.isidentifier():
            raise ParseError(f"expected a variable, found {name!r}", p)
        self.note_var(name, p)
        return Var(name)

    def atom(self):
        tok = self.peek()
        p = self.pos()
        if tok == "(":
            self.take()
            f = self.formula()
            self.take(")")
            return f
        if tok == "true":
            self.take()
            return TRUE
        if tok == "false":
            self.take()
            return FALSE
        if tok == "{":
            self.take()
            name = self.take()
            self.take("}")
            self.take("(")
            args = []
            if self.peek() != ")":
                args.append(self.term())
                while self.peek() == ",":
                    self.take()
                    args.append(self.term())
            self.take(")")
            if self.table is not None and name not in self.table:
                raise UnknownPredicate(f"unknown predicate {name!r}", p)
            if len(args) > 2:
                raise ArityError(f"predicate {name!r} used with {len(args)} arguments", p)
            return Pred(name, tuple(args))
        if tok in ("in", "out"):
            self.take()
            self.take("(")
            t = self.term()
            self.take(")")
            return InT(t) if tok == "in" else OutT(t)
        if tok is not None and tok.startswith("lab_"):
            self.take()
            label = tok[4:]
            if not label:
                raise ParseError("empty label in lab_ atom", p)
            self.take("(")
            t = self.term()
            self.take(")")
            return OutLabel(label, t)
        if tok is not None and tok in self.setvars:
            self.take()
            self.take("(")
            t = self.term()
            self.take(")")
            return Member(tok, t)
        # bare term followed by = or <=out
        t1 = self.term()
        op = self.peek()
        if op == "=":
            self.take()
            return Eq(t1, self.term())
        if op == "<=out":
            self.take()
            return LeqOut(t1, self.term())
        raise ParseError(f"expected '=' or '<=out' after term, found {op!r}", self.pos())


def parse(text: str, table: PredicateTable | None = None):
    """Parse a sentence; returns a Formula, or an EltFormula for exists2 prefixes."""
    return _Parser(text, table).parse()


# ---------------------------------------------------------------------------
# semantics over o-graphs


def label_matches(spec_label, letter) -> bool:
    if letter == spec_label:
        return True
    if isinstance(letter, (Bit, PLetter)):
        return label_matches(spec_label, letter.base)
    return False


class _EvalCtx:
    def __init__(self, g: OGraph, table: PredicateTable):
        self.g = g
        self.table = table
        self.word = tuple(g.input)

    def pairs(self, name):
        return selected_pairs(self.table.get(name), self.word)


def evaluate(phi, g: OGraph, table: PredicateTable) -> bool:
    """Truth of a sentence on an o-graph; the origin acts as identity on inputs."""
    if isinstance(phi, EltFormula):
        return _eval_elt(phi, g, table)
    fv = free_vars(phi)
    if fv:
        raise NotASentence(f"free variables {sorted(fv)}")
    ctx = _EvalCtx(g, table)
    return _eval(phi, ctx, {}, {})


def _eval_elt(phi: EltFormula, g: OGraph, table: PredicateTable) -> bool:
    fv = free_vars(phi.body)
    if fv:
        raise NotASentence(f"free variables {sorted(fv)}")
    ctx = _EvalCtx(g, table)
    universe = [("in", i) for i in range(1, len(g.input) + 1)]
    universe += [("out", j) for j in range(1, len(g.output) + 1)]
    sets = {}

    def go(k):
        if k == len(phi.setvars):
            return _eval(phi.body, ctx, {}, sets)
        for mask in range(1 << len(universe)):
            sets[phi.setvars[k]] = {universe[i] for i in range(len(universe)) if mask >> i & 1}
            if go(k + 1):
                return True
        return False

    return go(0)


def _resolve(t, env, g):
    sort, pos = env[t.name]
    if isinstance(t, Var):
        return sort, pos
    # o^k: one application moves an output position to its origin, then stays
    if sort == "out":
        return "in", g.origin[pos - 1]
    return "in", pos


def _eval(f, ctx: _EvalCtx, env, sets) -> bool:
    g = ctx.g
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Not):
        return not _eval(f.sub, ctx, env, sets)
    if isinstance(f, And):
        return all(_eval(p, ctx, env, sets) for p in f.parts)
    if isinstance(f, Or):
        return any(_eval(p, ctx, env, sets) for p in f.parts)
    if isinstance(f, Implies):
        return (not _eval(f.left, ctx, env, sets)) or _eval(f.right, ctx, env, sets)
    if isinstance(f, Iff):
        return _eval(f.left, ctx, env, sets) == _eval(f.right, ctx, env, sets)
    if isinstance(f, Quant):
        if f.sort in ("in", "any"):
            dom = [("in", i) for i in range(1, len(g.input) + 1)]
        else:
            dom = []
        if f.sort in ("out", "any"):
            dom += [("out", j) for j in range(1, len(g.output) + 1)]
        sub = dict(env)
        if f.kind == "E":
            for val in dom:
                sub[f.var] = val
                if _eval(f.body, ctx, sub, sets):
                    return True
            return False
        for val in dom:
            sub[f.var] = val
            if not _eval(f.body, ctx, sub, sets):
                return False
        return True
    # atoms
    if isinstance(f, OutLabel):
        sort, pos = _resolve(f.term, env, g)
        return sort == "out" and label_matches(f.label, g.output[pos - 1])
    if isinstance(f, PBit):
        sort, pos = _resolve(f.term, env, g)
        if sort != "out":
            return False
        letter = g.output[pos - 1]
        return isinstance(letter, PLetter) and bool(letter.bits[f.index])
    if isinstance(f, XBit):
        sort, pos = _resolve(f.term, env, g)
        letter = g.output[pos - 1] if sort == "out" else g.input[pos - 1]
        if isinstance(letter, PLetter):
            letter = letter.base
        return isinstance(letter, Bit) and bool(letter.bits[f.index])
    if isinstance(f, LeqOut):
        s1, p1 = _resolve(f.t1, env, g)
        s2, p2 = _resolve(f.t2, env, g)
        return s1 == "out" and s2 == "out" and p1 <= p2
    if isinstance(f, Eq):
        s1, p1 = _resolve(f.t1, env, g)
        s2, p2 = _resolve(f.t2, env, g)
        return s1 == "out" and s2 == "out" and p1 == p2
    if isinstance(f, InT):
        sort, _ = _resolve(f.term, env, g)
        return sort == "in"
    if isinstance(f, OutT):
        sort, _ = _resolve(f.term, env, g)
        return sort == "out"
    if isinstance(f, Member):
        if f.setvar not in sets:
            raise LogicError(f"unbound set variable {f.setvar!r}")
        return _resolve(f.term, env, g) in sets[f.setvar]
    if isinstance(f, Pred):
        vals = [_resolve(a, env, g) for a in f.args]
        if any(sort != "in" for sort, _ in vals):
            return False
        pairs = ctx.pairs(f.name)
        if len(vals) == 2:
            return (vals[0][1], vals[1][1]) in pairs
        if len(vals) == 1:
            return (vals[0][1], vals[0][1]) in pairs
        return (1, 1) in pairs
    raise LogicError(f"cannot evaluate node {f!r}")


# ---------------------------------------------------------------------------
# semantics over typed data words


def _check_data_formula(f):
    if isinstance(f, (EltFormula,)):
        raise NotDataFormula("second-order prefix is not part of the data logic")
    if isinstance(f, Quant):
        if f.sort != "any":
            raise NotDataFormula(f"sorted quantifier {f.sort!r} in a data formula")
        _check_data_formula(f.body)
        return
    kids = children(f)
    if kids:
        for k in kids:
            _check_data_formula(k)
        return
    for t in atom_terms(f):
        if isinstance(t, OTerm):
            raise NotDataFormula("origin term in a data formula")
    if isinstance(f, (InT, OutT, Member, PBit, XBit)):
        raise NotDataFormula(f"atom {f!r} has no data-word meaning")


def evaluate_ld(psi, w: TypedDataWord, table: PredicateTable) -> bool:
    """Truth on a typed data word.

    Predicates run over the word of types induced by the ordered data
    classes, so they speak about the data preorder only.
    """
    _check_data_formula(psi)
    fv = free_vars(psi)
    if fv:
        raise NotASentence(f"free variables {sorted(fv)}")
    cw = w.class_word()
    n = len(w.letters)

    def ev(f, env):
        if isinstance(f, TrueF):
            return True
        if isinstance(f, FalseF):
            return False
        if isinstance(f, Not):
            return not ev(f.sub, env)
        if isinstance(f, And):
            return all(ev(p, env) for p in f.parts)
        if isinstance(f, Or):
            return any(ev(p, env) for p in f.parts)
        if isinstance(f, Implies):
            return (not ev(f.left, env)) or ev(f.right, env)
        if isinstance(f, Iff):
            return ev(f.left, env) == ev(f.right, env)
        if isinstance(f, Quant):
            sub = dict(env)
            vals = range(1, n + 1)
            if f.kind == "E":
                return any(ev(f.body, {**sub, f.var: i}) for i in vals)
            return all(ev(f.body, {**sub, f.var: i}) for i in vals)
        if isinstance(f, OutLabel):
            return label_matches(f.label, w.letters[env[f.term.name] - 1][0])
        if isinstance(f, LeqOut):
            return env[f.t1.name] <= env[f.t2.name]
        if isinstance(f, Eq):
            return env[f.t1.name] == env[f.t2.name]
        if isinstance(f, Pred):
            q = table.get(f.name)
            pairs = selected_pairs(q, cw)
            ds = [w.datum(env[a.name]) for a in f.args]
            if len(ds) == 2:
                return (ds[0], ds[1]) in pairs
            if len(ds) == 1:
                return (ds[0], ds[0]) in pairs
            return (1, 1) in pairs
        raise LogicError(f"cannot evaluate node {f!r}")

    return ev(psi, {})


# ---------------------------------------------------------------------------
# the translation between the two logics


def _split_untyped(f):
    if isinstance(f, Quant) and f.sort == "any":
        body = _split_untyped(f.body)
        left = Quant(f.kind, "in", f.var, body)
        right = Quant(f.kind, "out", f.var, body)
        return Or((left, right)) if f.kind == "E" else And((left, right))
    kids = children(f)
    if kids:
        return rebuild(f, [_split_untyped(k) for k in kids])
    return f


def _term_sort(t, env):
    """'in', 'out', or 'ill' (an origin applied to an input variable)."""
    sort = env[t.name]
    if isinstance(t, Var):
        return sort
    return "in" if sort == "out" else "ill"


def _drop_inconsistent(f, env):
    if isinstance(f, Quant):
        return Quant(f.kind, f.sort, f.var, _drop_inconsistent(f.body, {**env, f.var: f.sort}))
    kids = children(f)
    if kids:
        return rebuild(f, [_drop_inconsistent(k, env) for k in kids])
    if isinstance(f, OutLabel):
        return f if _term_sort(f.term, env) == "out" else FALSE
    if isinstance(f, (LeqOut, Eq)):
        ok = _term_sort(f.t1, env) == "out" and _term_sort(f.t2, env) == "out"
        return f if ok else FALSE
    if isinstance(f, Pred):
        ok = all(_term_sort(a, env) == "in" for a in f.args)
        return f if ok else FALSE
    if isinstance(f, InT):
        return TRUE if _term_sort(f.term, env) in ("in", "ill") else FALSE
    if isinstance(f, OutT):
        return TRUE if _term_sort(f.term, env) == "out" else FALSE
    return f


def _strip_origins(f):
    if isinstance(f, Quant):
        return Quant(f.kind, "any", f.var, _strip_origins(f.body))
    kids = children(f)
    if kids:
        return rebuild(f, [_strip_origins(k) for k in kids])
    return rename_like(f, lambda t: Var(t.name) if isinstance(t, OTerm) else t)


def simplify(f):
    """Constant propagation; keeps the shape otherwise."""
    if isinstance(f, Not):
        s = simplify(f.sub)
        if isinstance(s, TrueF):
            return FALSE
        if isinstance(s, FalseF):
            return TRUE
        return Not(s)
    if isinstance(f, And):
        return conj([simplify(p) for p in f.parts])
    if isinstance(f, Or):
        return disj([simplify(p) for p in f.parts])
    if isinstance(f, Implies):
        a, b = simplify(f.left), simplify(f.right)
        if isinstance(a, FalseF) or isinstance(b, TrueF):
            return TRUE
        if isinstance(a, TrueF):
            return b
        if isinstance(b, FalseF):
            return negate(a)
        return Implies(a, b)
    if isinstance(f, Iff):
        a, b = simplify(f.left), simplify(f.right)
        if isinstance(a, TrueF):
            return b
        if isinstance(b, TrueF):
            return a
        return Iff(a, b)
    if isinstance(f, Quant):
        body = simplify(f.body)
        if isinstance(body, (TrueF, FalseF)) and f.sort in ("in", "any"):
            # input domains are never empty, so constants lift through;
            # 'out' quantifiers stay guarded (the output may be empty)
            return body
        return Quant(f.kind, f.sort, f.var, body)
    return f


def lt_to_ld(phi):
    """Rewrite a transduction sentence into its data-word twin.

    Three phases: untyped quantifiers are split into input/output versions,
    type-inconsistent atoms collapse to false, and then origins vanish (the
    datum plays their role) while the output order becomes the position
    order.  For every non-erasing g: g |= phi iff t2d(g) |= result.
    """
    if isinstance(phi, EltFormula):
        raise LogicError("lt_to_ld expects a plain sentence")
    for a in atoms(phi):
        if isinstance(a, (Member, XBit, PBit)):
            raise LogicError(f"atom {a!r} is not part of the core logic")
    f = _split_untyped(phi)
    f = _drop_inconsistent(f, {})
    f = _strip_origins(f)
    return simplify(f)


def ld_to_lt(psi):
    """Rewrite a data-word sentence into a transduction sentence.

    Quantifiers become output-typed, the position order becomes the output
    order, and predicate arguments read the origin.  For every valid data
    word w: w |= psi iff t2d_inv(w) |= result.
    """
    _check_data_formula(psi)

    def go(f):
        if isinstance(f, Quant):
            return Quant(f.kind, "out", f.var, go(f.body))
        kids = children(f)
        if kids:
            return rebuild(f, [go(k) for k in kids])
        if isinstance(f, Pred):
            return Pred(f.name, tuple(OTerm(a.name, 1) for a in f.args))
        return f

    return go(psi)


# ---------------------------------------------------------------------------
# existential second-order reduction


@dataclass(frozen=True)
class EltProjection:
    """Strips the membership bits added by elt_reduce."""

    n_bits: int

    def project_letter(self, x):
        return x.base if isinstance(x, Bit) else x

    def project_graph(self, g: OGraph) -> OGraph:
        return OGraph(
            tuple(self.project_letter(x) for x in g.input),
            tuple(self.project_letter(x) for x in g.output),
            g.origin,
        )


def lift_table_with_bits(table: PredicateTable, n: int) -> PredicateTable:
    """The same predicates over the bit-extended input alphabet."""
    from .automata import nfa, query

    ext = tuple(Bit(s, bits) for s in table.alphabet for bits in _bit_tuples(n))
    out = PredicateTable(ext)
    for name, q in table.items():
        trans = []
        for p, sym, r in q.base.transitions:
            for bits in _bit_tuples(n):
                trans.append((p, Bit(sym, bits), r))
        base = nfa(ext, q.base.states, q.base.initial, q.base.final, trans)
        out.add(name, query(base, q.selecting_pairs))
    return out


def _bit_tuples(n):
    return [tuple((m >> i) & 1 for i in range(n)) for m in range(1 << n)]


def elt_reduce(phi: EltFormula, table: PredicateTable, out_alphabet):
    """Turn the second-order prefix into alphabet bits.

    Returns (formula, table, out_alphabet, projection).  Membership atoms
    become bit tests: a fresh unary input predicate on the input side, a
    label-bit test on the output side.  Models of the reduced sentence
    project exactly onto models of the input sentence.
    """
    if not isinstance(phi, EltFormula):
        return phi, table, tuple(out_alphabet), EltProjection(0)
    n = len(phi.setvars)
    new_table = lift_table_with_bits(table, n)
    xbit_names = []
    for i in range(n):
        keep = [s for s in new_table.alphabet if s.bits[i]]
        name = new_table.fresh_name(f"_xbit{i}")
        new_table.add(name, pred_letter_test(name, keep, new_table.alphabet))
        xbit_names.append(name)
    index = {x: i for i, x in enumerate(phi.setvars)}

    def go(f):
        if isinstance(f, Member):
            i = index[f.setvar]
            t = f.term
            return Or(
                (
                    And((InT(t), Pred(xbit_names[i], (t,)))),
                    And((OutT(t), XBit(i, t))),
                )
            )
        kids = children(f)
        if kids:
            return rebuild(f, [go(k) for k in kids])
        return f

    new_out = tuple(Bit(g, bits) for g in out_alphabet for bits in _bit_tuples(n))
    return go(phi.body), new_table, new_out, EltProjection(n)
