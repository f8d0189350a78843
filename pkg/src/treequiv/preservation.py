"""Brute-force certification of preservation-under-substructures properties.

A k-crux of A for phi is a set C of at most k elements such that every
induced substructure of A containing C still models phi; the empty structure
is a substructure like any other, which is what makes "at least one element"
fail PSC(0) while every universal sentence passes it. PSC(k) holds (up to a
size bound) when every model has a k-crux; PCE(k) holds when every structure
covered in the k-ary sense by models of phi is itself a model. The two are
exact duals through negation, and the checkers here implement them by
independent code paths so the duality can be asserted as a test.

Verdicts are explicitly bounded: TRUE means "no counterexample with at most
max_size elements", never an unbounded claim.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .config import DEFAULT_CONFIG, RunConfig
from .errors import BudgetError
from .logic import (Exists, ExistsSet, Forall, ForallSet, Formula, Not,
                    eval_formula, format_formula, quantifier_rank)
from .structures import Structure, Vocabulary, enumerate_structures, induced_substructure


@dataclass(frozen=True)
class CruxCertificate:
    structure: Structure
    crux: tuple
    k: int
    supersets_checked: int

    def verify(self, phi: Formula) -> bool:
        """Re-run the exhaustive check this certificate claims."""
        base = set(self.crux)
        universe = self.structure.universe
        rest = [e for e in universe if e not in base]
        for r in range(len(rest) + 1):
            for extra in itertools.combinations(rest, r):
                s = tuple(e for e in universe if e in base or e in extra)
                if not eval_formula(phi, induced_substructure(self.structure, s)):
                    return False
        return True


@dataclass(frozen=True)
class PreservationVerdict:
    property: str                 # "psc" or "pce"
    formula: str
    k: int
    max_size: int
    holds: bool
    models_checked: int
    counterexample: Structure | None = None
    cover: tuple[Structure, ...] | None = None
    witness: tuple | None = None  # (structure, crux) sample for psc TRUE

    @property
    def status(self) -> str:
        return f"TRUE-UP-TO-{self.max_size}" if self.holds else "FALSE"


@dataclass(frozen=True)
class DualityReport:
    formula: str
    k: int
    max_size: int
    psc: PreservationVerdict
    pce: PreservationVerdict
    agree: bool


def _check_budget(max_size: int, config: RunConfig):
    if max_size > config.enum_max_size:
        raise BudgetError(
            f"max size {max_size} exceeds enumeration budget {config.enum_max_size}")
    if 2 ** max_size > config.enum_max_candidates:
        raise BudgetError(
            f"2^{max_size} substructure checks exceed the candidate cap")


def _model_cache(a: Structure, phi: Formula) -> dict[tuple, bool]:
    """phi-truth of every induced substructure (the empty one included), keyed
    by element tuple in universe order."""
    universe = a.universe
    cache: dict[tuple, bool] = {}
    for r in range(0, len(universe) + 1):
        for s in itertools.combinations(universe, r):
            cache[s] = eval_formula(phi, induced_substructure(a, s))
    return cache


def _crux_of(a: Structure, phi: Formula, k: int,
             cache: dict[tuple, bool]) -> tuple | None:
    """Smallest crux in (size, lexicographic) order, or None.

    C is a crux when every S with C <= S models phi (S may be empty, which
    only matters for C = the empty set); candidates are index combinations so
    the order is deterministic in universe order.
    """
    universe = a.universe
    n = len(universe)
    pos_of = {e: i for i, e in enumerate(universe)}
    bad = [frozenset(pos_of[e] for e in s) for s, val in cache.items() if not val]
    for size in range(0, min(k, n) + 1):
        for idx in itertools.combinations(range(n), size):
            c = set(idx)
            if not any(c <= s for s in bad):
                return tuple(universe[i] for i in idx)
    return None


def find_crux(phi: Formula, a: Structure, k: int, *,
              config: RunConfig = DEFAULT_CONFIG) -> CruxCertificate | None:
    """Deterministic exhaustive crux search: candidates ascending by size then
    lexicographic in universe order. Requires a |= phi."""
    _check_budget(a.size, config)
    if not eval_formula(phi, a):
        raise ValueError("find_crux requires the structure to model the formula")
    cache = _model_cache(a, phi)
    crux = _crux_of(a, phi, k, cache)
    if crux is None:
        return None
    return CruxCertificate(a, crux, k, supersets_checked=len(cache))


def psc_check(phi: Formula, voc: Vocabulary, k: int, max_size: int, *,
              config: RunConfig = DEFAULT_CONFIG,
              symmetric_irreflexive: tuple[str, ...] = (),
              class_filter=None,
              structures: list[Structure] | None = None) -> PreservationVerdict:
    """TRUE-UP-TO-max_size when every model of phi with at most max_size
    elements (one per isomorphism class) has a k-crux; FALSE with the first
    counterexample model otherwise. A pre-enumerated structure list can be
    shared across calls to avoid repeated enumeration."""
    _check_budget(max_size, config)
    text = format_formula(phi)
    checked = 0
    witness = None
    pool = structures if structures is not None else enumerate_structures(
        voc, max_size, symmetric_irreflexive=symmetric_irreflexive,
        max_candidates=config.enum_max_candidates, filter_fn=class_filter)
    for a in pool:
        if not eval_formula(phi, a):
            continue
        checked += 1
        cache = _model_cache(a, phi)
        crux = _crux_of(a, phi, k, cache)
        if crux is None:
            return PreservationVerdict("psc", text, k, max_size, False,
                                       checked, counterexample=a)
        if witness is None:
            witness = (a, crux)
    return PreservationVerdict("psc", text, k, max_size, True, checked,
                               witness=witness)


def _cover_of(a: Structure, phi: Formula, k: int,
              cache: dict[tuple, bool]) -> tuple[Structure, ...] | None:
    """A k-ary cover of a by phi-model substructures, or None when impossible.

    For each subset C of at most k elements a largest phi-model substructure
    containing C is selected; if some C has none, no cover exists at all.
    """
    universe = a.universe
    n = len(universe)
    members: list[tuple] = []
    by_size = sorted(cache, key=lambda s: (-len(s), s))
    for size in range(0, min(k, n) + 1):
        for idx in itertools.combinations(range(n), size):
            c = {universe[i] for i in idx}
            chosen = None
            for s in by_size:
                if cache[s] and c <= set(s):
                    chosen = s
                    break
            if chosen is None:
                return None
            if chosen not in members:
                members.append(chosen)
    return tuple(induced_substructure(a, s) for s in sorted(members))


def pce_check(phi: Formula, voc: Vocabulary, k: int, max_size: int, *,
              config: RunConfig = DEFAULT_CONFIG,
              symmetric_irreflexive: tuple[str, ...] = (),
              class_filter=None,
              structures: list[Structure] | None = None) -> PreservationVerdict:
    """TRUE-UP-TO-max_size when every structure of at most max_size elements
    that admits a k-ary cover by phi-model substructures is itself a model;
    FALSE with the first covered non-model and its cover otherwise."""
    _check_budget(max_size, config)
    text = format_formula(phi)
    checked = 0
    pool = structures if structures is not None else enumerate_structures(
        voc, max_size, symmetric_irreflexive=symmetric_irreflexive,
        max_candidates=config.enum_max_candidates, filter_fn=class_filter)
    for a in pool:
        if eval_formula(phi, a):
            continue
        checked += 1
        cache = _model_cache(a, phi)
        cover = _cover_of(a, phi, k, cache)
        if cover is not None:
            return PreservationVerdict("pce", text, k, max_size, False,
                                       checked, counterexample=a, cover=cover)
    return PreservationVerdict("pce", text, k, max_size, True, checked)


def _negate(phi: Formula) -> Formula:
    return phi.body if isinstance(phi, Not) else Not(phi)


def duality_check(phi: Formula, voc: Vocabulary, k: int, max_size: int, *,
                  config: RunConfig = DEFAULT_CONFIG,
                  symmetric_irreflexive: tuple[str, ...] = (),
                  structures: list[Structure] | None = None) -> DualityReport:
    """psc(phi, k, N) must agree with pce(~phi, k, N); a disagreement would be
    a bug in one of the two independent checkers."""
    if structures is None:
        structures = list(enumerate_structures(
            voc, max_size, symmetric_irreflexive=symmetric_irreflexive,
            max_candidates=config.enum_max_candidates))
    psc = psc_check(phi, voc, k, max_size, config=config,
                    symmetric_irreflexive=symmetric_irreflexive,
                    structures=structures)
    pce = pce_check(_negate(phi), voc, k, max_size, config=config,
                    symmetric_irreflexive=symmetric_irreflexive,
                    structures=structures)
    return DualityReport(format_formula(phi), k, max_size, psc, pce,
                         agree=psc.holds == pce.holds)


# ---------------------------------------------------------------------------
# syntactic sufficiency
# ---------------------------------------------------------------------------

def prenex_shape(phi: Formula) -> str | None:
    """Quantifier prefix as a string of E/A when phi is a prenex first-order
    sentence with quantifier-free matrix; None otherwise."""
    shape = []
    cur = phi
    while True:
        if isinstance(cur, Exists):
            shape.append("E")
            cur = cur.body
        elif isinstance(cur, Forall):
            shape.append("A")
            cur = cur.body
        elif isinstance(cur, (ExistsSet, ForallSet)):
            return None
        else:
            break
    if quantifier_rank(cur) != 0:
        return None
    return "".join(shape)


def is_existential_universal(phi: Formula, k: int) -> bool:
    """phi is (up to prenex shape) an exists^j forall^* sentence with j <= k.
    Such sentences are substructure-preserved with the j witnesses as crux."""
    shape = prenex_shape(phi)
    if shape is None:
        return False
    head = shape.rstrip("A")
    return set(head) <= {"E"} and len(head) <= k


def is_universal_existential(phi: Formula, k: int) -> bool:
    shape = prenex_shape(phi)
    if shape is None:
        return False
    head = shape.rstrip("E")
    return set(head) <= {"A"} and len(head) <= k


def geq_vertices_sentence(k: int) -> str:
    """Formula text for 'there are at least k vertices' (pure equality)."""
    if k <= 0:
        raise ValueError("k must be positive")
    if k == 1:
        return "exists x1. x1 = x1"
    names = [f"x{i}" for i in range(1, k + 1)]
    pairs = [f"~({a} = {b})" for a, b in itertools.combinations(names, 2)]
    body = " & ".join(pairs)
    out = body
    for v in reversed(names):
        out = f"exists {v}. {out}"
    return out
