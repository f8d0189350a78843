"""Brute-force rank-m equivalence types for FO and MSO.

The rank-m type of a structure (with optional distinguished parameters) is the
classical nested-set invariant: tp_0 is the atomic diagram over the current
points/sets expressed positionally (element identities never leak into types),
and tp_{j+1} collects the tp_j of all one-point extensions (FO), plus all
one-set extensions (MSO). Two structures satisfy the same rank-m sentences iff
their rank-m types are equal, which makes this module the trusted oracle for
everything else in the package.

Types are interned process-wide as small integers; fingerprints are canonical
level-by-level serializations of the reachable type DAG plus a sha256 digest.
Equality compares digests and verifies the full payload on digest match.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass

from .config import DEFAULT_CONFIG, RunConfig
from .errors import BudgetError, FingerprintCollisionError
from .structures import Structure


@dataclass(frozen=True, eq=False)
class TypeFingerprint:
    """Canonical serialization of a rank-m type with its digest."""

    mode: str
    rank: int
    nparams: int
    payload: bytes
    digest: bytes

    def __eq__(self, other):
        if not isinstance(other, TypeFingerprint):
            return NotImplemented
        if (self.mode, self.rank, self.nparams) != (other.mode, other.rank, other.nparams):
            return False
        if self.digest != other.digest:
            return False
        if self.payload != other.payload:
            raise FingerprintCollisionError(
                f"sha256 collision between distinct {self.mode} rank-{self.rank} types; "
                "results would be unsound, aborting")
        return True

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def __hash__(self):
        return hash((self.mode, self.rank, self.nparams, self.digest))

    @property
    def hexdigest(self) -> str:
        return self.digest.hex()

    def __repr__(self):
        return f"TypeFingerprint({self.mode}, m={self.rank}, params={self.nparams}, {self.digest.hex()[:12]})"


class _Interner:
    """Process-wide intern table for type nodes.

    Entry kinds: ("a", atom_key) at level 0, ("f", child_ids) for FO nodes,
    ("m", point_child_ids, set_child_ids) for MSO nodes. Ids are stable within
    a process only; fingerprints are the cross-run canonical form.
    """

    def __init__(self):
        self.ids: dict = {}
        self.defs: list = []
        self.levels: list[int] = []

    def _intern(self, key, level: int) -> int:
        got = self.ids.get(key)
        if got is not None:
            return got
        new = len(self.defs)
        self.ids[key] = new
        self.defs.append(key)
        self.levels.append(level)
        return new

    def atom(self, atom_key) -> int:
        return self._intern(("a", atom_key), 0)

    def fo_node(self, children: frozenset, level: int) -> int:
        return self._intern(("f", tuple(sorted(children))), level)

    def mso_node(self, point_children: frozenset, set_children: frozenset, level: int) -> int:
        return self._intern(("m", tuple(sorted(point_children)), tuple(sorted(set_children))), level)


_INTERNER = _Interner()


def _atomic_key(s: Structure, rel_tuples: dict, labels: dict,
                pts: tuple[int, ...], sets: tuple[int, ...]) -> tuple:
    """Positional atomic diagram of the listed point/set indices.

    pts hold element positions (indices into elems); sets are bitmasks over
    elems. The key records equalities among points, point labels, all relation
    atoms over the points, and point-in-set memberships, in a fixed order.
    """
    k = len(pts)
    eq_pattern = tuple(pts.index(p) for p in pts)
    lab = tuple(labels[p] for p in pts)
    rel_bits = []
    for name, arity in s.voc.relations:
        ts = rel_tuples[name]
        bits = 0
        for combo in itertools.product(range(k), repeat=arity):
            bits = (bits << 1) | (tuple(pts[i] for i in combo) in ts)
        rel_bits.append(bits)
    member_bits = 0
    for mask in sets:
        for p in pts:
            member_bits = (member_bits << 1) | ((mask >> p) & 1)
    return (eq_pattern, lab, tuple(rel_bits), member_bits)


def _indexed(s: Structure):
    idx = {e: i for i, e in enumerate(s.universe)}
    rel_tuples = {name: {tuple(idx[x] for x in t) for t in ts} for name, ts in s.relations.items()}
    labels = {i: s.label_of(e) for i, e in enumerate(s.universe)}
    return idx, rel_tuples, labels


def _type_id(s: Structure, m: int, mode: str, param_elems: tuple) -> int:
    idx, rel_tuples, labels = _indexed(s)
    elems = tuple(range(s.size))
    base_pts = tuple(idx[e] for e in param_elems)
    interner = _INTERNER

    def tp(k: int, pts: tuple, sets: tuple) -> int:
        if k == 0:
            return interner.atom(_atomic_key(s, rel_tuples, labels, pts, sets))
        point_kids = frozenset(tp(k - 1, pts + (b,), sets) for b in elems)
        if mode == "fo":
            return interner.fo_node(point_kids, k)
        set_kids = frozenset(tp(k - 1, pts, sets + (mask,)) for mask in range(1 << s.size))
        return interner.mso_node(point_kids, set_kids, k)

    return tp(m, base_pts, ())


def _fingerprint_of(root_id: int, mode: str, m: int, nparams: int) -> TypeFingerprint:
    """Canonical level-by-level dump of the type DAG reachable from root_id.

    Level-0 entries are sorted atom keys; level-j entries are defs over the
    canonical indices of level-(j-1). Independent of intern-id numbering, so
    fingerprints agree across runs and processes.
    """
    interner = _INTERNER
    reachable: set[int] = set()
    stack = [root_id]
    while stack:
        tid = stack.pop()
        if tid in reachable:
            continue
        reachable.add(tid)
        entry = interner.defs[tid]
        if entry[0] == "f":
            stack.extend(entry[1])
        elif entry[0] == "m":
            stack.extend(entry[1])
            stack.extend(entry[2])
    by_level: dict[int, list[int]] = {}
    for tid in reachable:
        by_level.setdefault(interner.levels[tid], []).append(tid)
    canon_index: dict[int, int] = {}
    level_dumps = []
    for level in range(0, m + 1):
        ids = by_level.get(level, [])
        rendered = []
        for tid in ids:
            entry = interner.defs[tid]
            if entry[0] == "a":
                rendered.append((tid, ("a",) + entry[1]))
            elif entry[0] == "f":
                rendered.append((tid, ("f", tuple(sorted(canon_index[c] for c in entry[1])))))
            else:
                rendered.append((tid, ("m", tuple(sorted(canon_index[c] for c in entry[1])),
                                 tuple(sorted(canon_index[c] for c in entry[2])))))
        rendered.sort(key=lambda pair: pair[1])
        for pos, (tid, _) in enumerate(rendered):
            canon_index[tid] = pos
        level_dumps.append(tuple(d for _, d in rendered))
    payload = repr((mode, m, nparams, tuple(level_dumps))).encode("ascii")
    digest = hashlib.sha256(payload).digest()
    return TypeFingerprint(mode, m, nparams, payload, digest)


def _check_caps(s: Structure, m: int, mode: str, config: RunConfig):
    cap = config.oracle_cap(mode)
    if s.size > cap:
        raise BudgetError(
            f"{mode} type oracle: structure size {s.size} exceeds cap {cap} at rank {m} "
            "(raise the cap or lower the rank)")
    if mode == "mso" and m > config.mso_max_rank:
        raise BudgetError(f"mso rank {m} exceeds configured max rank {config.mso_max_rank}")
    if m < 0:
        raise ValueError("rank must be >= 0")


def structure_type(s: Structure, m: int, mode: str, *, params: tuple = (),
                   config: RunConfig = DEFAULT_CONFIG) -> TypeFingerprint:
    """Rank-m type fingerprint of s with optional distinguished parameters."""
    if mode not in ("fo", "mso"):
        raise ValueError(f"mode must be 'fo' or 'mso', got {mode!r}")
    _check_caps(s, m, mode, config)
    for e in params:
        if not s.has_element(e):
            raise ValueError(f"parameter {e!r} is not an element")
    key = ("type", mode, m, tuple(params))
    cached = s._cache.get(key)
    if cached is None:
        root = _type_id(s, m, mode, tuple(params))
        cached = _fingerprint_of(root, mode, m, len(params))
        s._cache[key] = cached
    return cached


def fo_type(s: Structure, m: int, *, params: tuple = (),
            config: RunConfig = DEFAULT_CONFIG) -> TypeFingerprint:
    return structure_type(s, m, "fo", params=params, config=config)


def mso_type(s: Structure, m: int, *, params: tuple = (),
             config: RunConfig = DEFAULT_CONFIG) -> TypeFingerprint:
    return structure_type(s, m, "mso", params=params, config=config)


def equiv(a: Structure, b: Structure, m: int, mode: str = "fo", *,
          config: RunConfig = DEFAULT_CONFIG) -> bool:
    """Do a and b agree on all rank-m sentences of the given logic?"""
    if a.voc != b.voc:
        raise ValueError("equivalence needs a shared vocabulary")
    return structure_type(a, m, mode, config=config) == structure_type(b, m, mode, config=config)
