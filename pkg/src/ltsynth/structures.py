"""Origin graphs, typed data words, and the bijection between them.

An o-graph is an input word u (nonempty), an output word v, and an origin
mapping sending each output position to the input position that produced it.
Positions are 1-based throughout.  A non-erasing o-graph (every input
position is some output's origin) encodes bijectively as a typed data word:
the origin becomes the datum and the input label becomes the datum's type.
"""

from __future__ import annotations

import random
from dataclasses import dataclass


class StructureError(ValueError):
    """Invalid o-graph or typed data word."""


# ---------------------------------------------------------------------------
# letters
#
# Base letters are ordinary strings.  The compilation pipeline extends
# alphabets with structured letters: Copy(s) for the output-side copy of an
# input letter, Sharp() for the separator, Bit(base, bits) when second-order
# variables are turned into membership bits, and PLetter(base, bits) when
# Scott normalisation folds fresh unary predicates into the label.


@dataclass(frozen=True)
class Sharp:
    def __repr__(self):
        return "Sharp()"


SHARP = Sharp()


@dataclass(frozen=True)
class Copy:
    base: object

    def __repr__(self):
        return f"Copy({self.base!r})"


@dataclass(frozen=True)
class Bit:
    """A letter extended with one membership bit per set variable."""

    base: object
    bits: tuple

    def __repr__(self):
        return f"Bit({self.base!r}, {self.bits})"


@dataclass(frozen=True)
class PLetter:
    """A letter extended with one bit per fresh Scott predicate."""

    base: object
    bits: tuple

    def __repr__(self):
        return f"PLetter({self.base!r}, {self.bits})"


def fmt_letter(x) -> str:
    """Stable plain-text rendering of any letter."""
    if isinstance(x, Sharp):
        return "#sharp"
    if isinstance(x, Copy):
        return f"{fmt_letter(x.base)}'"
    if isinstance(x, Bit):
        return fmt_letter(x.base) + "".join(f"+X{i}" if b else f"-X{i}" for i, b in enumerate(x.bits))
    if isinstance(x, PLetter):
        return fmt_letter(x.base) + "".join(f"+P{i}" if b else f"-P{i}" for i, b in enumerate(x.bits))
    if isinstance(x, tuple):
        return "(" + ",".join(fmt_letter(p) for p in x) + ")"
    return str(x)


def base_letter(x):
    """Strip every extension layer down to the plain letter."""
    while isinstance(x, (Bit, PLetter)):
        x = x.base
    return x


# ---------------------------------------------------------------------------
# o-graphs


@dataclass(frozen=True)
class OGraph:
    input: tuple
    output: tuple
    origin: tuple  # of 1-based input positions, one per output position

    def __post_init__(self):
        if len(self.input) == 0:
            raise StructureError("empty input word")
        if len(self.origin) != len(self.output):
            raise StructureError("origin length differs from output length")
        for o in self.origin:
            if not isinstance(o, int) or not 1 <= o <= len(self.input):
                raise StructureError(f"origin {o!r} out of range 1..{len(self.input)}")

    def __repr__(self):
        i = " ".join(fmt_letter(x) for x in self.input)
        o = " ".join(fmt_letter(x) for x in self.output)
        return f"OGraph(in={i!r}, out={o!r}, orig={self.origin})"


def ograph(u, v, o) -> OGraph:
    """Constructor accepting strings or iterables for the two words."""
    return OGraph(tuple(u), tuple(v), tuple(o))


def is_non_erasing(g: OGraph) -> bool:
    """True iff every input position occurs as an origin."""
    return set(g.origin) == set(range(1, len(g.input) + 1))


# ---------------------------------------------------------------------------
# typed data words


@dataclass(frozen=True)
class TypedDataWord:
    letters: tuple  # of triples (gamma, datum, sigma)

    def __post_init__(self):
        if not self.letters:
            raise StructureError("empty data word (data size must be >= 1)")
        data = [d for _, d, _ in self.letters]
        for d in data:
            if not isinstance(d, int) or d < 1:
                raise StructureError(f"datum {d!r} is not a positive integer")
        m = max(data)
        if set(data) != set(range(1, m + 1)):
            raise StructureError("data values must form exactly {1..m}")
        types = {}
        for _, d, s in self.letters:
            if types.setdefault(d, s) != s:
                raise StructureError(f"datum {d} carries two types")

    @property
    def data_size(self) -> int:
        return max(d for _, d, _ in self.letters)

    def datum(self, i: int) -> int:
        return self.letters[i - 1][1]

    def class_word(self) -> tuple:
        """The word of types induced by the ordered data classes."""
        types = {d: s for _, d, s in self.letters}
        return tuple(types[j] for j in range(1, self.data_size + 1))

    def __repr__(self):
        body = " ".join(f"{fmt_letter(g)}:{d}:{fmt_letter(s)}" for g, d, s in self.letters)
        return f"TypedDataWord({body!r})"


def dataword(letters) -> TypedDataWord:
    return TypedDataWord(tuple(tuple(l) for l in letters))


def t2d(g: OGraph) -> TypedDataWord:
    """Encode a non-erasing o-graph as a typed data word."""
    if not is_non_erasing(g):
        raise StructureError("t2d requires a non-erasing o-graph")
    letters = tuple(
        (g.output[i], g.origin[i], g.input[g.origin[i] - 1]) for i in range(len(g.output))
    )
    return TypedDataWord(letters)


def t2d_inv(w: TypedDataWord) -> OGraph:
    """Decode a typed data word back into its non-erasing o-graph."""
    v = tuple(gamma for gamma, _, _ in w.letters)
    o = tuple(d for _, d, _ in w.letters)
    u = w.class_word()
    return OGraph(u, v, o)


# ---------------------------------------------------------------------------
# random generators (shared by round-trip tests)


def random_non_erasing(rng: random.Random, in_alphabet, out_alphabet, max_in=4, max_out=6) -> OGraph:
    n = rng.randint(1, max_in)
    u = tuple(rng.choice(list(in_alphabet)) for _ in range(n))
    m = rng.randint(n, max(n, max_out))
    v = tuple(rng.choice(list(out_alphabet)) for _ in range(m))
    # surjective origin: hit every input position once, pad with random picks
    origins = list(range(1, n + 1)) + [rng.randint(1, n) for _ in range(m - n)]
    rng.shuffle(origins)
    return OGraph(u, v, tuple(origins))


def random_dataword(rng: random.Random, in_alphabet, out_alphabet, max_len=6) -> TypedDataWord:
    n = rng.randint(1, max_len)
    m = rng.randint(1, n)
    data = list(range(1, m + 1)) + [rng.randint(1, m) for _ in range(n - m)]
    rng.shuffle(data)
    types = {d: rng.choice(list(in_alphabet)) for d in range(1, m + 1)}
    letters = [(rng.choice(list(out_alphabet)), d, types[d]) for d in data]
    return TypedDataWord(tuple(letters))


# ---------------------------------------------------------------------------
# text formats


def parse_ograph(text: str) -> OGraph:
    """Three-line format: ``in: a b``, ``out: c d``, ``orig: 1 2``."""
    fields = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        key, sep, rest = line.partition(":")
        if not sep or key.strip() not in ("in", "out", "orig"):
            raise StructureError(f"line {ln}: expected 'in:', 'out:' or 'orig:'")
        fields[key.strip()] = rest.split()
    if "in" not in fields or "orig" not in fields:
        raise StructureError("missing 'in:' or 'orig:' line")
    out = fields.get("out", [])
    try:
        orig = tuple(int(x) for x in fields["orig"])
    except ValueError as e:
        raise StructureError(f"bad origin value: {e}") from None
    return OGraph(tuple(fields["in"]), tuple(out), orig)


def format_ograph(g: OGraph) -> str:
    return (
        "in: " + " ".join(fmt_letter(x) for x in g.input) + "\n"
        "out: " + " ".join(fmt_letter(x) for x in g.output) + "\n"
        "orig: " + " ".join(str(o) for o in g.origin) + "\n"
    )


def parse_dataword(text: str) -> TypedDataWord:
    """Whitespace-separated triples ``gamma:datum:sigma``."""
    letters = []
    for tok in text.split():
        parts = tok.split(":")
        if len(parts) != 3:
            raise StructureError(f"bad data letter {tok!r} (want gamma:datum:sigma)")
        g, d, s = parts
        try:
            letters.append((g, int(d), s))
        except ValueError:
            raise StructureError(f"bad datum in {tok!r}") from None
    return TypedDataWord(tuple(letters))


def format_dataword(w: TypedDataWord) -> str:
    return " ".join(f"{fmt_letter(g)}:{d}:{fmt_letter(s)}" for g, d, s in w.letters) + "\n"
