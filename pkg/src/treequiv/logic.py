"""FO/MSO formulas: AST, parser, printer, quantifier rank, naive model checking.

Grammar (prefix quantifiers, right-associative ->, precedence ~ > & > | > ->):

    formula := quant | implies
    quant   := ("exists" | "forall") VAR "." formula
             | ("existsSet" | "forallSet") SETVAR "." formula
    atom    := NAME "(" term ("," term)* ")"      relation from the vocabulary
             | "L" INT "(" term ")"               label predicate
             | SETVAR "(" term ")"                set membership
             | term "=" term
             | "(" formula ")"

First-order variables start lowercase, set variables uppercase. "L" followed
only by digits is reserved for label predicates. Uppercase names are resolved
as relations when the vocabulary declares them, otherwise as set variables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

from .errors import ParseError
from .structures import Structure, Vocabulary


@dataclass(frozen=True)
class Rel:
    name: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Label:
    index: int
    arg: str


@dataclass(frozen=True)
class InSet:
    set_var: str
    arg: str


@dataclass(frozen=True)
class Eq:
    left: str
    right: str


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ExistsSet:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ForallSet:
    var: str
    body: "Formula"


Formula = (Rel | Label | InSet | Eq | Not | And | Or | Implies
           | Exists | Forall | ExistsSet | ForallSet)

_QUANTS = {"exists": Exists, "forall": Forall, "existsSet": ExistsSet, "forallSet": ForallSet}


# ---------------------------------------------------------------------------
# tokenizer / parser
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Tok:
    kind: str  # name, punct, end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if text.startswith("->", i):
            toks.append(_Tok("punct", "->", i))
            i += 2
            continue
        if c in "()=~&|,.":
            toks.append(_Tok("punct", c, i))
            i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("name", text[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", column=i + 1)
    toks.append(_Tok("end", "", n))
    return toks


def _is_label_name(name: str) -> bool:
    return len(name) > 1 and name[0] == "L" and name[1:].isdigit()


class _Parser:
    def __init__(self, toks: list[_Tok], voc: Vocabulary, mode: str):
        self.toks = toks
        self.i = 0
        self.voc = voc
        self.mode = mode

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.take()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, got {tok.text or 'end of input'!r}",
                             column=tok.pos + 1)
        return tok

    def fail(self, msg: str, tok: _Tok):
        raise ParseError(msg, column=tok.pos + 1)

    def formula(self) -> Formula:
        tok = self.peek()
        if tok.kind == "name" and tok.text in _QUANTS:
            self.take()
            var = self.take()
            if var.kind != "name":
                self.fail("expected a variable after quantifier", var)
            is_set_quant = tok.text.endswith("Set")
            if is_set_quant and self.mode == "fo":
                self.fail("set quantifier not allowed in FO mode", tok)
            if is_set_quant != var.text[0].isupper():
                self.fail(f"variable {var.text!r} has the wrong case for {tok.text}", var)
            self.expect(".")
            return _QUANTS[tok.text](var.text, self.formula())
        return self.implies()

    def implies(self) -> Formula:
        left = self.disj()
        if self.peek().text == "->":
            self.take()
            return Implies(left, self.implies_or_quant())
        return left

    def implies_or_quant(self) -> Formula:
        # the right-hand side of a connective may open a new quantifier block
        return self.formula()

    def disj(self) -> Formula:
        left = self.conj()
        while self.peek().text == "|":
            self.take()
            left = Or(left, self.conj())
        return left

    def conj(self) -> Formula:
        left = self.neg()
        while self.peek().text == "&":
            self.take()
            left = And(left, self.neg())
        return left

    def neg(self) -> Formula:
        if self.peek().text == "~":
            self.take()
            return Not(self.neg())
        return self.atom()

    def term(self) -> str:
        tok = self.take()
        if tok.kind != "name" or tok.text[0].isupper():
            self.fail("expected a first-order variable", tok)
        return tok.text

    def atom(self) -> Formula:
        tok = self.peek()
        if tok.text == "(":
            self.take()
            inner = self.formula()
            self.expect(")")
            return inner
        if tok.kind != "name":
            self.fail(f"unexpected {tok.text or 'end of input'!r}", tok)
        name = self.take().text
        if name in _QUANTS:
            self.fail(f"quantifier {name!r} cannot start an atom; parenthesize", tok)
        if self.peek().text == "(":
            self.take()
            args = [self.term()]
            while self.peek().text == ",":
                self.take()
                args.append(self.term())
            self.expect(")")
            if self.voc.has(name):
                if len(args) != self.voc.arity(name):
                    self.fail(f"relation {name} has arity {self.voc.arity(name)}, got {len(args)}", tok)
                return Rel(name, tuple(args))
            if _is_label_name(name):
                index = int(name[1:])
                if not (1 <= index <= self.voc.label_count):
                    self.fail(f"label {name} outside 1..L{self.voc.label_count}", tok)
                if len(args) != 1:
                    self.fail("label predicates are unary", tok)
                return Label(index, args[0])
            if name[0].isupper():
                if self.mode == "fo":
                    self.fail(f"set atom {name}(...) not allowed in FO mode", tok)
                if len(args) != 1:
                    self.fail("set membership is unary", tok)
                return InSet(name, args[0])
            self.fail(f"unknown relation symbol {name!r}", tok)
        if name[0].isupper():
            self.fail(f"set variable {name!r} cannot stand alone", tok)
        self.expect("=")
        return Eq(name, self.term())


def parse_formula(text: str, voc: Vocabulary, mode: str = "fo", *,
                  allow_free: bool = False) -> Formula:
    """Parse a formula; sentences only unless allow_free. mode is 'fo' or 'mso'."""
    if mode not in ("fo", "mso"):
        raise ValueError(f"mode must be 'fo' or 'mso', got {mode!r}")
    parser = _Parser(_tokenize(text), voc, mode)
    phi = parser.formula()
    trailing = parser.peek()
    if trailing.kind != "end":
        raise ParseError(f"trailing input starting at {trailing.text!r}", column=trailing.pos + 1)
    if not allow_free:
        fv, fsv = free_variables(phi)
        if fv or fsv:
            raise ParseError(f"free variables in sentence: {sorted(fv | fsv)}")
    return phi


def parse_formula_file(text: str) -> tuple[Formula, Vocabulary, str]:
    """Parse a sentence file: vocabulary directives, then the sentence.

    Directives (one per line, # comments allowed): `rel NAME ARITY` declares a
    relation, `labels K` the label count (default 0), `mode fo|mso` the logic
    (default fo). The final directive `formula TEXT` runs to end of file.
    Returns (sentence, vocabulary, mode).
    """
    rels: list[tuple[str, int]] = []
    label_count = 0
    mode = "fo"
    body: str | None = None
    lines = text.splitlines()
    for idx, raw in enumerate(lines):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        lineno = idx + 1
        if parts[0] == "rel":
            if len(parts) != 3:
                raise ParseError("expected: rel NAME ARITY", line=lineno)
            try:
                arity = int(parts[2])
            except ValueError:
                raise ParseError(f"arity must be an integer, got {parts[2]!r}", line=lineno) from None
            rels.append((parts[1], arity))
        elif parts[0] == "labels":
            if len(parts) != 2:
                raise ParseError("expected: labels K", line=lineno)
            try:
                label_count = int(parts[1])
            except ValueError:
                raise ParseError(f"label count must be an integer, got {parts[1]!r}", line=lineno) from None
        elif parts[0] == "mode":
            if len(parts) != 2 or parts[1] not in ("fo", "mso"):
                raise ParseError("expected: mode fo|mso", line=lineno)
            mode = parts[1]
        elif parts[0] == "formula":
            rest = [line[len("formula"):]]
            rest.extend(ln.split("#", 1)[0] for ln in lines[idx + 1:])
            body = "\n".join(rest)
            break
        else:
            raise ParseError(f"unknown directive {parts[0]!r}", line=lineno)
    if body is None:
        raise ParseError("sentence file has no formula directive")
    voc = Vocabulary(tuple(rels), label_count)
    return parse_formula(body, voc, mode), voc, mode


def format_formula_file(phi: Formula, voc: Vocabulary, mode: str = "fo") -> str:
    """Serialize a sentence with its vocabulary; round-trips through
    parse_formula_file."""
    lines = [f"rel {name} {arity}" for name, arity in voc.relations]
    lines.append(f"labels {voc.label_count}")
    lines.append(f"mode {mode}")
    lines.append(f"formula {format_formula(phi)}")
    return "\n".join(lines) + "\n"


def free_variables(phi: Formula) -> tuple[set, set]:
    """(free first-order variables, free set variables)."""
    fv: set = set()
    fsv: set = set()
    bound: list = []

    def walk(f: Formula, bound_fo: frozenset, bound_set: frozenset):
        if isinstance(f, Rel):
            fv.update(a for a in f.args if a not in bound_fo)
        elif isinstance(f, (Label,)):
            if f.arg not in bound_fo:
                fv.add(f.arg)
        elif isinstance(f, InSet):
            if f.arg not in bound_fo:
                fv.add(f.arg)
            if f.set_var not in bound_set:
                fsv.add(f.set_var)
        elif isinstance(f, Eq):
            fv.update(x for x in (f.left, f.right) if x not in bound_fo)
        elif isinstance(f, Not):
            walk(f.body, bound_fo, bound_set)
        elif isinstance(f, (And, Or, Implies)):
            walk(f.left, bound_fo, bound_set)
            walk(f.right, bound_fo, bound_set)
        elif isinstance(f, (Exists, Forall)):
            walk(f.body, bound_fo | {f.var}, bound_set)
        elif isinstance(f, (ExistsSet, ForallSet)):
            walk(f.body, bound_fo, bound_set | {f.var})
        else:
            raise TypeError(f"not a formula node: {f!r}")

    walk(phi, frozenset(), frozenset())
    return fv, fsv


def format_formula(phi: Formula) -> str:
    """Fully parenthesized rendering; parse(format(phi)) == phi."""
    if isinstance(phi, Rel):
        return f"{phi.name}({', '.join(phi.args)})"
    if isinstance(phi, Label):
        return f"L{phi.index}({phi.arg})"
    if isinstance(phi, InSet):
        return f"{phi.set_var}({phi.arg})"
    if isinstance(phi, Eq):
        return f"{phi.left} = {phi.right}"
    if isinstance(phi, Not):
        return f"~{_wrap(phi.body)}"
    if isinstance(phi, And):
        return f"({_wrap(phi.left)} & {_wrap(phi.right)})"
    if isinstance(phi, Or):
        return f"({_wrap(phi.left)} | {_wrap(phi.right)})"
    if isinstance(phi, Implies):
        return f"({_wrap(phi.left)} -> {_wrap(phi.right)})"
    if isinstance(phi, Exists):
        return f"exists {phi.var}. {format_formula(phi.body)}"
    if isinstance(phi, Forall):
        return f"forall {phi.var}. {format_formula(phi.body)}"
    if isinstance(phi, ExistsSet):
        return f"existsSet {phi.var}. {format_formula(phi.body)}"
    if isinstance(phi, ForallSet):
        return f"forallSet {phi.var}. {format_formula(phi.body)}"
    raise TypeError(f"not a formula node: {phi!r}")


def _wrap(phi: Formula) -> str:
    text = format_formula(phi)
    if isinstance(phi, (Exists, Forall, ExistsSet, ForallSet, Eq)):
        return f"({text})"
    return text


def quantifier_rank(phi: Formula) -> int:
    """Maximum quantifier nesting depth; FO and set quantifiers both count one."""
    if isinstance(phi, (Rel, Label, InSet, Eq)):
        return 0
    if isinstance(phi, Not):
        return quantifier_rank(phi.body)
    if isinstance(phi, (And, Or, Implies)):
        return max(quantifier_rank(phi.left), quantifier_rank(phi.right))
    if isinstance(phi, (Exists, Forall, ExistsSet, ForallSet)):
        return 1 + quantifier_rank(phi.body)
    raise TypeError(f"not a formula node: {phi!r}")


def uses_set_syntax(phi: Formula) -> bool:
    if isinstance(phi, (InSet, ExistsSet, ForallSet)):
        return True
    if isinstance(phi, Not):
        return uses_set_syntax(phi.body)
    if isinstance(phi, (And, Or, Implies)):
        return uses_set_syntax(phi.left) or uses_set_syntax(phi.right)
    if isinstance(phi, (Exists, Forall)):
        return uses_set_syntax(phi.body)
    return False


def _subsets(universe: tuple) -> Iterator[frozenset]:
    # all subsets, empty set first; set quantifiers range over this even when
    # the universe is empty (then the single subset is the empty set)
    for r in range(len(universe) + 1):
        for combo in itertools.combinations(universe, r):
            yield frozenset(combo)


def eval_formula(phi: Formula, a: Structure, assignment: dict | None = None) -> bool:
    """Naive Tarski semantics. Set quantifiers iterate all 2^|A| subsets, so keep
    structures small; callers bound sizes via their configured caps."""
    env: dict = dict(assignment or {})
    for var, val in env.items():
        if var[0].isupper():
            for e in val:
                if not a.has_element(e):
                    raise ValueError(f"assignment for {var} mentions non-element {e!r}")
        elif not a.has_element(val):
            raise ValueError(f"assignment for {var} is not an element: {val!r}")

    def ev(f: Formula) -> bool:
        if isinstance(f, Rel):
            try:
                t = tuple(env[x] for x in f.args)
            except KeyError as exc:
                raise ValueError(f"unbound variable {exc.args[0]!r}") from None
            return t in a.relations[f.name]
        if isinstance(f, Label):
            return a.label_of(_lookup(f.arg)) == f.index
        if isinstance(f, InSet):
            return _lookup(f.arg) in _lookup_set(f.set_var)
        if isinstance(f, Eq):
            return _lookup(f.left) == _lookup(f.right)
        if isinstance(f, Not):
            return not ev(f.body)
        if isinstance(f, And):
            return ev(f.left) and ev(f.right)
        if isinstance(f, Or):
            return ev(f.left) or ev(f.right)
        if isinstance(f, Implies):
            return (not ev(f.left)) or ev(f.right)
        if isinstance(f, (Exists, Forall)):
            want = isinstance(f, Exists)
            old = env.get(f.var, _MISSING)
            for e in a.universe:
                env[f.var] = e
                if ev(f.body) == want:
                    _restore(f.var, old)
                    return want
            _restore(f.var, old)
            return not want
        if isinstance(f, (ExistsSet, ForallSet)):
            want = isinstance(f, ExistsSet)
            old = env.get(f.var, _MISSING)
            for subset in _subsets(a.universe):
                env[f.var] = subset
                if ev(f.body) == want:
                    _restore(f.var, old)
                    return want
            _restore(f.var, old)
            return not want
        raise TypeError(f"not a formula node: {f!r}")

    def _lookup(var: str):
        try:
            return env[var]
        except KeyError:
            raise ValueError(f"unbound variable {var!r}") from None

    def _lookup_set(var: str) -> frozenset:
        val = _lookup(var)
        if not isinstance(val, frozenset):
            raise ValueError(f"{var!r} is bound to a point, used as a set")
        return val

    def _restore(var: str, old):
        if old is _MISSING:
            env.pop(var, None)
        else:
            env[var] = old

    return ev(phi)


_MISSING = object()
