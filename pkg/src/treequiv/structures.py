"""Finite relational structures: vocabularies, substructures, embeddings, enumeration,
and the line-oriented text format."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .errors import BudgetError, ParseError


@dataclass(frozen=True)
class Vocabulary:
    """Relation symbols with arities, plus label_count unary labels L1..Lk.

    Labels model the single per-element color slot (letters of words, node
    symbols of trees, vertex classes of cograph-style joins).
    """

    relations: tuple[tuple[str, int], ...] = ()
    label_count: int = 0

    def __post_init__(self):
        names = [name for name, _ in self.relations]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate relation symbol among {names}")
        for name, arity in self.relations:
            if arity < 1:
                raise ValueError(f"relation {name} needs arity >= 1, got {arity}")
        if self.label_count < 0:
            raise ValueError("label_count must be >= 0")

    def has(self, name: str) -> bool:
        return any(n == name for n, _ in self.relations)

    def arity(self, name: str) -> int:
        for n, a in self.relations:
            if n == name:
                return a
        raise KeyError(f"unknown relation symbol {name!r}")

    def with_unary(self, *names: str) -> "Vocabulary":
        """Vocabulary extended by fresh unary relation symbols (kernel W marks)."""
        for name in names:
            if self.has(name):
                raise ValueError(f"relation {name!r} already present")
        return Vocabulary(self.relations + tuple((n, 1) for n in names), self.label_count)


class Structure:
    """An immutable finite structure: ordered universe, relations, optional labels.

    Elements may be any hashable values (parsed structures use 1..n, evaluated
    operation trees use (node_token, local_id) pairs). The universe tuple fixes
    a deterministic iteration order; equality ignores that order.
    """

    __slots__ = ("voc", "universe", "relations", "labels", "_index", "_cache")

    def __init__(self, voc: Vocabulary, universe: Sequence, relations: Mapping[str, Iterable[tuple]] = (),
                 labels: Mapping = ()):
        universe = tuple(universe)
        index = {e: i for i, e in enumerate(universe)}
        if len(index) != len(universe):
            raise ValueError("universe contains duplicate elements")
        rels: dict[str, frozenset] = {name: frozenset() for name, _ in voc.relations}
        for name, tuples in dict(relations).items():
            if not voc.has(name):
                raise ValueError(f"relation {name!r} not in vocabulary")
            arity = voc.arity(name)
            ts = frozenset(tuple(t) for t in tuples)
            for t in ts:
                if len(t) != arity:
                    raise ValueError(f"tuple {t} has wrong arity for {name} (expected {arity})")
                for e in t:
                    if e not in index:
                        raise ValueError(f"tuple {t} of {name} mentions non-element {e!r}")
            rels[name] = ts
        labs = dict(labels)
        for e, l in labs.items():
            if e not in index:
                raise ValueError(f"label on non-element {e!r}")
            if not (1 <= l <= voc.label_count):
                raise ValueError(f"label {l} out of range 1..{voc.label_count}")
        self.voc = voc
        self.universe = universe
        self.relations = rels
        self.labels = labs
        self._index = index
        self._cache: dict = {}

    @property
    def size(self) -> int:
        return len(self.universe)

    def rel(self, name: str) -> frozenset:
        return self.relations[name]

    def label_of(self, e) -> int:
        """Label of e, or 0 when unlabeled."""
        return self.labels.get(e, 0)

    def has_element(self, e) -> bool:
        return e in self._index

    def __eq__(self, other):
        if not isinstance(other, Structure):
            return NotImplemented
        return (self.voc == other.voc
                and set(self.universe) == set(other.universe)
                and self.relations == other.relations
                and self.labels == other.labels)

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def __hash__(self):
        key = self._cache.get("hash")
        if key is None:
            key = hash((self.voc, frozenset(self.universe),
                        frozenset(self.relations.items()),
                        frozenset(self.labels.items())))
            self._cache["hash"] = key
        return key

    def __repr__(self):
        return f"Structure(|A|={self.size}, voc={[n for n, _ in self.voc.relations]}, labels={self.voc.label_count})"


def induced_substructure(a: Structure, elements: Iterable) -> Structure:
    """Substructure of a induced on the given elements, keeping a's universe order."""
    keep = set(elements)
    missing = [e for e in keep if not a.has_element(e)]
    if missing:
        raise ValueError(f"elements not in structure: {missing[:3]}")
    universe = tuple(e for e in a.universe if e in keep)
    rels = {name: frozenset(t for t in ts if all(x in keep for x in t))
            for name, ts in a.relations.items()}
    labels = {e: l for e, l in a.labels.items() if e in keep}
    return Structure(a.voc, universe, rels, labels)


def _extension_consistent(b: Structure, a: Structure, mapping: dict, e, img) -> bool:
    # labels must agree exactly (0 means unlabeled)
    if b.label_of(e) != a.label_of(img):
        return False
    assigned = mapping.keys()
    for name, arity in b.voc.relations:
        bts, ats = b.relations[name], a.relations[name]
        pool = list(assigned) + [e]
        for combo in itertools.product(pool, repeat=arity):
            if e not in combo:
                continue
            mapped = tuple(img if x == e else mapping[x] for x in combo)
            if (combo in bts) != (mapped in ats):
                return False
    return True


def is_embeddable(b: Structure, a: Structure) -> dict | None:
    """Induced-substructure embedding of b into a (injective, preserving and
    reflecting all relations and labels). Returns the mapping or None.

    Backtracking over b's universe order with per-step consistency checks;
    fine for the small sizes this package works at.
    """
    if b.voc != a.voc:
        raise ValueError("vocabulary mismatch between embedding arguments")
    if b.size > a.size:
        return None
    order = list(b.universe)
    mapping: dict = {}
    used: set = set()

    def place(i: int) -> bool:
        if i == len(order):
            return True
        e = order[i]
        for img in a.universe:
            if img in used:
                continue
            if _extension_consistent(b, a, mapping, e, img):
                mapping[e] = img
                used.add(img)
                if place(i + 1):
                    return True
                del mapping[e]
                used.discard(img)
        return False

    return dict(mapping) if place(0) else None


def is_isomorphic(a: Structure, b: Structure) -> bool:
    """Isomorphism check: equal sizes plus an induced embedding (which is then a bijection)."""
    if a.voc != b.voc or a.size != b.size:
        return False
    return is_embeddable(a, b) is not None


def _encode(voc: Vocabulary, n: int, rels: dict, labels: dict, perm: Sequence[int]):
    rel_part = tuple(
        tuple(sorted(tuple(perm[i] for i in t) for t in rels[name]))
        for name, _ in voc.relations)
    lab_part = tuple(sorted((perm[e], l) for e, l in labels.items()))
    return rel_part, lab_part


def canonical_key(s: Structure):
    """Lexicographically least relation/label encoding over all universe permutations."""
    n = s.size
    idx = {e: i for i, e in enumerate(s.universe)}
    rels = {name: frozenset(tuple(idx[x] for x in t) for t in ts) for name, ts in s.relations.items()}
    labels = {idx[e]: l for e, l in s.labels.items()}
    best = None
    for perm in itertools.permutations(range(n)):
        enc = _encode(s.voc, n, rels, labels, perm)
        if best is None or enc < best:
            best = enc
    return (n, best)


def _from_canonical(voc: Vocabulary, key) -> Structure:
    n, (rel_part, lab_part) = key
    rels = {name: rel_part[i] for i, (name, _) in enumerate(voc.relations)}
    return Structure(voc, range(1, n + 1),
                     {name: [tuple(x + 1 for x in t) for t in ts] for name, ts in rels.items()},
                     {e + 1: l for e, l in lab_part})


def enumerate_structures(voc: Vocabulary, max_size: int, *,
                         symmetric_irreflexive: Iterable[str] = (),
                         with_labels: bool = True,
                         max_candidates: int = 2_000_000,
                         filter_fn: Callable[[Structure], bool] | None = None) -> Iterator[Structure]:
    """All structures over voc with |A| <= max_size, one canonical representative
    per isomorphism class, sizes ascending.

    Relations named in symmetric_irreflexive (must be binary) range over simple
    symmetric loop-free assignments. Raises BudgetError before enumerating a size
    whose raw candidate count would exceed max_candidates.
    """
    sym = set(symmetric_irreflexive)
    for name in sym:
        if voc.arity(name) != 2:
            raise ValueError(f"symmetric_irreflexive needs a binary relation, {name} is not")
    for n in range(max_size + 1):
        raw = 1
        for name, arity in voc.relations:
            slots = (n * (n - 1)) // 2 if name in sym else n ** arity
            raw *= 2 ** slots
            if raw > max_candidates:
                raise BudgetError(
                    f"enumeration at size {n} needs {raw}+ raw candidates (cap {max_candidates})")
        if with_labels and voc.label_count:
            raw *= (voc.label_count + 1) ** n
            if raw > max_candidates:
                raise BudgetError(
                    f"enumeration at size {n} needs {raw}+ raw candidates (cap {max_candidates})")

        seen: set = set()
        domains = []
        for name, arity in voc.relations:
            if name in sym:
                pairs = list(itertools.combinations(range(n), 2))
                choices = [frozenset(sum(([p, (p[1], p[0])] for p in combo), []))
                           for r in range(len(pairs) + 1)
                           for combo in itertools.combinations(pairs, r)]
            else:
                tuples = list(itertools.product(range(n), repeat=arity))
                choices = [frozenset(combo)
                           for r in range(len(tuples) + 1)
                           for combo in itertools.combinations(tuples, r)]
            domains.append(choices)
        label_choices: list[dict]
        if with_labels and voc.label_count:
            label_choices = [dict(zip(range(n), assignment)) if n else {}
                             for assignment in itertools.product(range(voc.label_count + 1), repeat=n)]
            label_choices = [{e: l for e, l in lab.items() if l} for lab in label_choices]
        else:
            label_choices = [{}]

        for rel_combo in itertools.product(*domains) if domains else [()]:
            for labels in label_choices:
                s = Structure(voc, range(n),
                              {name: rel_combo[i] for i, (name, _) in enumerate(voc.relations)},
                              labels)
                key = canonical_key(s)
                if key in seen:
                    continue
                seen.add(key)
                rep = _from_canonical(voc, key)
                if filter_fn is None or filter_fn(rep):
                    yield rep


# ---------------------------------------------------------------------------
# text format
#
#   # comment
#   universe 4
#   labels 2            (optional; otherwise inferred from label lines)
#   rel E 2
#   E 1 2
#   E 2 1
#   label 1 2
# ---------------------------------------------------------------------------

def parse_structure(text: str) -> Structure:
    """Parse the line-oriented structure format; errors carry line numbers."""
    n: int | None = None
    declared: list[tuple[str, int]] = []
    arities: dict[str, int] = {}
    tuples: dict[str, set] = {}
    labels: dict[int, int] = {}
    label_count: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0]
        if head == "universe":
            if n is not None:
                raise ParseError("duplicate universe line", line=lineno)
            if len(parts) != 2 or not parts[1].isdigit():
                raise ParseError("expected: universe N", line=lineno)
            n = int(parts[1])
        elif head == "labels":
            if len(parts) != 2 or not parts[1].isdigit():
                raise ParseError("expected: labels K", line=lineno)
            label_count = int(parts[1])
        elif head == "rel":
            if len(parts) != 3 or not parts[2].isdigit():
                raise ParseError("expected: rel NAME ARITY", line=lineno)
            name, arity = parts[1], int(parts[2])
            if name in arities:
                raise ParseError(f"relation {name} declared twice", line=lineno)
            if name in ("universe", "rel", "label", "labels"):
                raise ParseError(f"reserved word {name!r} cannot name a relation", line=lineno)
            arities[name] = arity
            declared.append((name, arity))
            tuples[name] = set()
        elif head == "label":
            if n is None:
                raise ParseError("label line before universe line", line=lineno)
            if len(parts) != 3:
                raise ParseError("expected: label ELEMENT INDEX", line=lineno)
            try:
                e, l = int(parts[1]), int(parts[2])
            except ValueError:
                raise ParseError("label takes two integers", line=lineno) from None
            if not (1 <= e <= n):
                raise ParseError(f"element {e} outside universe 1..{n}", line=lineno)
            if e in labels:
                raise ParseError(f"element {e} labeled twice", line=lineno)
            if l < 1:
                raise ParseError(f"label index {l} must be >= 1", line=lineno)
            labels[e] = l
        elif head in arities:
            if n is None:
                raise ParseError("tuple line before universe line", line=lineno)
            if len(parts) != 1 + arities[head]:
                raise ParseError(
                    f"relation {head} has arity {arities[head]}, got {len(parts) - 1} arguments",
                    line=lineno)
            try:
                t = tuple(int(x) for x in parts[1:])
            except ValueError:
                raise ParseError("tuple arguments must be integers", line=lineno) from None
            for e in t:
                if not (1 <= e <= n):
                    raise ParseError(f"element {e} outside universe 1..{n}", line=lineno)
            if t in tuples[head]:
                raise ParseError(f"duplicate tuple {' '.join(map(str, t))} for {head}", line=lineno)
            tuples[head].add(t)
        else:
            raise ParseError(f"unknown directive or relation {head!r}", line=lineno)
    if n is None:
        raise ParseError("missing universe line", line=1)
    inferred = max(labels.values(), default=0)
    if label_count is None:
        label_count = inferred
    elif inferred > label_count:
        raise ParseError(f"label index {inferred} exceeds declared labels {label_count}", line=1)
    voc = Vocabulary(tuple(declared), label_count)
    return Structure(voc, range(1, n + 1), tuples, labels)


def format_structure(s: Structure) -> str:
    """Serialize to the text format, renumbering elements to 1..n in universe order."""
    idx = {e: i + 1 for i, e in enumerate(s.universe)}
    out = [f"universe {s.size}"]
    if s.voc.label_count:
        out.append(f"labels {s.voc.label_count}")
    for name, arity in s.voc.relations:
        out.append(f"rel {name} {arity}")
    for name, _ in s.voc.relations:
        for t in sorted(tuple(idx[x] for x in t) for t in s.relations[name]):
            out.append(f"{name} {' '.join(map(str, t))}")
    for e in s.universe:
        if e in s.labels:
            out.append(f"label {idx[e]} {s.labels[e]}")
    return "\n".join(out) + "\n"


def renumbered(s: Structure) -> Structure:
    """Copy of s with universe renamed to 0..n-1 preserving order (table storage form)."""
    idx = {e: i for i, e in enumerate(s.universe)}
    return Structure(s.voc, range(s.size),
                     {name: [tuple(idx[x] for x in t) for t in ts] for name, ts in s.relations.items()},
                     {idx[e]: l for e, l in s.labels.items()})
