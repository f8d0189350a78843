"""Composition tables: rank-m types of op results from rank-m types of inputs.

Tables are built lazily. Every equivalence class that shows up stores its
smallest seen representative (a small concrete structure with anchors); a table
miss applies the operation to representatives and asks the oracle for the
result's type, so each (inputs -> output) entry is computed once per process
and reused everywhere.

Type keys follow a per-kind parameter policy: graph and word classes are plain
sentence-level types, tree classes are pointed by (root, last_top_child). The
unranked fold mirrors evaluation exactly: chi_1 is the unary application
(identity for union/join/concat, root creation for tree building) and
chi_{j+1} = step(chi_j, delta(A_{j+1})), where step is binary application
(child attachment for tree building).

Instances of Annotator are not thread-safe; share nothing across threads.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

from .config import DEFAULT_CONFIG, RunConfig
from .errors import BudgetError, ParseError, UnsupportedShapeError
from .eftypes import TypeFingerprint, structure_type
from .optrees import (AlphabetSpec, CustomOp, Node, OpSymbol, TreeBuild, Value,
                      apply_op, attach_child, evaluate, format_tree, fresh_token,
                      instantiate_leaf, post_order)
from .structures import Structure, format_structure, parse_structure


@dataclass(frozen=True)
class NodeAnnotation:
    """Per-node annotation: composed type of the evaluated subtree plus the
    automaton state reached at the node."""

    delta1: TypeFingerprint
    delta2: str


@dataclass
class CompositionTable:
    """Memoized type maps for one operation at one (mode, rank)."""

    op: str
    unary: dict = field(default_factory=dict)
    step: dict = field(default_factory=dict)
    full: dict = field(default_factory=dict)

    def entry_count(self) -> int:
        return len(self.unary) + len(self.step) + len(self.full)


def _disjointify(values: list[Value]) -> list[Value]:
    out = []
    for i, v in enumerate(values):
        s = v.structure
        remap = {e: (i, e) for e in s.universe}
        out.append(Value(
            Structure(s.voc, [remap[e] for e in s.universe],
                      {name: [tuple(remap[x] for x in t) for t in ts]
                       for name, ts in s.relations.items()},
                      {remap[e]: l for e, l in s.labels.items()}),
            tuple(remap[e] for e in v.anchors)))
    return out


def _renumber_value(v: Value) -> Value:
    s = v.structure
    idx = {e: i for i, e in enumerate(s.universe)}
    return Value(
        Structure(s.voc, range(s.size),
                  {name: [tuple(idx[x] for x in t) for t in ts]
                   for name, ts in s.relations.items()},
                  {idx[e]: l for e, l in s.labels.items()}),
        tuple(idx[e] for e in v.anchors))


class Annotator:
    """Holds the composition tables, class representatives, and the fold logic
    for one (alphabet, mode, rank)."""

    def __init__(self, spec: AlphabetSpec, m: int, mode: str,
                 config: RunConfig = DEFAULT_CONFIG):
        if mode not in ("fo", "mso"):
            raise ValueError(f"mode must be 'fo' or 'mso', got {mode!r}")
        self.spec = spec
        self.m = m
        self.mode = mode
        self.config = config
        self.tables: dict[str, CompositionTable] = {name: CompositionTable(name) for name in spec.ops}
        self.reps: dict[TypeFingerprint, Value] = {}
        self.rep_trees: dict[TypeFingerprint, Node | None] = {}
        self.unpointed: dict[TypeFingerprint, TypeFingerprint] = {}
        self._leaf_fps: dict[str, TypeFingerprint] = {}
        self._shrinking = False
        self.shrink_count = 0

    # -- typing ------------------------------------------------------------

    def type_params(self, v: Value) -> tuple:
        return v.anchors if self.spec.kind == "tree" else ()

    def value_fp(self, v: Value) -> TypeFingerprint:
        return structure_type(v.structure, self.m, self.mode,
                              params=self.type_params(v), config=self.config)

    def unpointed_fp(self, fp: TypeFingerprint) -> TypeFingerprint:
        """Sentence-level (parameter-free) class of the classes' structures."""
        if fp.nparams == 0:
            return fp
        got = self.unpointed.get(fp)
        if got is None:
            rep = self.reps[fp]
            got = structure_type(rep.structure, self.m, self.mode, config=self.config)
            self.unpointed[fp] = got
        return got

    def register(self, fp: TypeFingerprint, v: Value, tree: Node | None):
        """Record v as a representative of class fp, keeping the smallest."""
        old = self.reps.get(fp)
        if old is None or v.structure.size < old.structure.size:
            self.reps[fp] = _renumber_value(v)
            self.rep_trees[fp] = tree
            self.unpointed.pop(fp, None)

    def leaf_fp(self, symbol: str) -> TypeFingerprint:
        fp = self._leaf_fps.get(symbol)
        if fp is None:
            val = instantiate_leaf(self.spec, symbol, fresh_token())
            fp = self.value_fp(val)
            self._leaf_fps[symbol] = fp
            self.register(fp, val, Node(fresh_token(), symbol))
        return fp

    # -- table application ---------------------------------------------------

    def _materialize(self, op: OpSymbol, in_fps: tuple[TypeFingerprint, ...],
                     how: str) -> TypeFingerprint:
        """Compute a missing table entry from representatives."""
        missing = [f for f in in_fps if f not in self.reps]
        if missing:
            raise KeyError(f"no representative recorded for class {missing[0]!r}")
        vals = _disjointify([self.reps[f] for f in in_fps])
        token = fresh_token()
        if how == "step" and isinstance(op.kind, TreeBuild):
            out = attach_child(self.spec, op, vals[0], vals[1], token)
        elif how == "unary" and not isinstance(op.kind, TreeBuild):
            out = vals[0]
        else:
            out = apply_op(self.spec, op, vals, token)
        cap = self.config.oracle_cap(self.mode)
        if out.structure.size > cap:
            out = self._shrink_and_retry(op, in_fps, how, out, cap)
        fp = self.value_fp(out)
        self.register(fp, out, self._build_tree(op, in_fps, how, fp))
        return fp

    def _build_tree(self, op: OpSymbol, in_fps: tuple, how: str,
                    out_fp: TypeFingerprint) -> Node | None:
        trees = [self.rep_trees.get(f) for f in in_fps]
        if any(t is None for t in trees):
            return None
        if how == "step" and isinstance(op.kind, TreeBuild):
            grown = trees[0]
            if grown.symbol != op.name:
                return None
            return Node(grown.token, grown.symbol, grown.children + (trees[1],))
        return Node(fresh_token(), op.name, tuple(trees))

    def _shrink_and_retry(self, op: OpSymbol, in_fps: tuple, how: str,
                          oversized: Value, cap: int) -> Value:
        """Try to shrink input representatives via their build trees, then retry."""
        if not self._shrinking:
            self._shrinking = True
            try:
                from .reduction import shrink_representative
                improved = False
                for f in in_fps:
                    if shrink_representative(self, f):
                        improved = True
                if improved:
                    self.shrink_count += 1
                    vals = _disjointify([self.reps[f] for f in in_fps])
                    token = fresh_token()
                    if how == "step" and isinstance(op.kind, TreeBuild):
                        out = attach_child(self.spec, op, vals[0], vals[1], token)
                    elif how == "unary" and not isinstance(op.kind, TreeBuild):
                        out = vals[0]
                    else:
                        out = apply_op(self.spec, op, vals, token)
                    if out.structure.size <= cap:
                        return out
            finally:
                self._shrinking = False
        raise BudgetError(
            f"composition for op {op.name} at {self.mode} rank {self.m}: representative "
            f"output has {oversized.structure.size} elements, cap is {cap} "
            "(raise the cap or lower the rank)")

    def apply_unary(self, op: OpSymbol, fp: TypeFingerprint) -> TypeFingerprint:
        if not isinstance(op.kind, TreeBuild):
            return fp
        table = self.tables[op.name].unary
        got = table.get(fp)
        if got is None:
            got = self._materialize(op, (fp,), "unary")
            table[fp] = got
        return got

    def apply_step(self, op: OpSymbol, acc: TypeFingerprint,
                   nxt: TypeFingerprint) -> TypeFingerprint:
        table = self.tables[op.name].step
        key = (acc, nxt)
        got = table.get(key)
        if got is None:
            got = self._materialize(op, key, "step")
            table[key] = got
        return got

    def apply_full(self, op: OpSymbol, fps: tuple[TypeFingerprint, ...]) -> TypeFingerprint:
        table = self.tables[op.name].full
        got = table.get(fps)
        if got is None:
            got = self._materialize(op, fps, "full")
            table[fps] = got
        return got

    def compose(self, op: OpSymbol, fps: tuple[TypeFingerprint, ...]) -> TypeFingerprint:
        """Class of op(A_1..A_n) given input classes, via the unranked fold or
        the ranked full table."""
        if isinstance(op.kind, CustomOp) and not op.ranked:
            raise UnsupportedShapeError(f"unranked custom op {op.name} has no fold rule")
        if op.ranked:
            return self.apply_full(op, fps)
        acc = self.apply_unary(op, fps[0])
        for f in fps[1:]:
            acc = self.apply_step(op, acc, f)
        return acc

    def prefix_classes(self, op: OpSymbol, fps: tuple[TypeFingerprint, ...]) -> list[TypeFingerprint]:
        """chi_1..chi_r of the unranked fold (chi_i = class of op over the first i inputs)."""
        if op.ranked:
            raise ValueError("prefix classes are only defined for unranked symbols")
        out = [self.apply_unary(op, fps[0])]
        for f in fps[1:]:
            out.append(self.apply_step(op, out[-1], f))
        return out

    # -- whole-tree annotation ----------------------------------------------

    def annotate(self, t: Node, aut) -> dict[int, NodeAnnotation]:
        """delta1 (composed subtree class) and delta2 (automaton state) per node token."""
        states = aut.run(t).states
        ann: dict[int, NodeAnnotation] = {}
        fps: dict[int, TypeFingerprint] = {}
        for node in post_order(t):
            if node.is_leaf:
                fp = self.leaf_fp(node.symbol)
            else:
                op = self.spec.ops[node.symbol]
                fp = self.compose(op, tuple(fps[c.token] for c in node.children))
            fps[node.token] = fp
            ann[node.token] = NodeAnnotation(fp, states[node.token])
        return ann

    def table_sizes(self) -> dict[str, int]:
        return {name: tab.entry_count() for name, tab in self.tables.items()}


def annotate(t: Node, spec: AlphabetSpec, m: int, mode: str, aut=None, *,
             config: RunConfig = DEFAULT_CONFIG,
             annotator: Annotator | None = None) -> dict[int, NodeAnnotation]:
    """Annotate every node of t with (delta1, delta2). aut defaults to the
    arity-validity automaton of the alphabet."""
    from .automata import default_validity_automaton
    if aut is None:
        aut = default_validity_automaton(spec)
    ann = annotator or Annotator(spec, m, mode, config)
    return ann.annotate(t, aut)


@dataclass(frozen=True)
class SoundnessResult:
    ok: bool
    composed: TypeFingerprint
    oracle: TypeFingerprint


def soundness_check(t: Node, spec: AlphabetSpec, m: int, mode: str, *,
                    config: RunConfig = DEFAULT_CONFIG,
                    annotator: Annotator | None = None) -> SoundnessResult:
    """Compare the composed root class against the oracle type of evaluate(t).
    The evaluated structure must be within the oracle cap."""
    ann = annotator or Annotator(spec, m, mode, config)
    from .automata import default_validity_automaton
    notes = ann.annotate(t, default_validity_automaton(spec))
    composed = ann.unpointed_fp(notes[t.token].delta1)
    res = evaluate(t, spec)
    oracle = structure_type(res.structure, m, mode, config=config)
    return SoundnessResult(composed == oracle, composed, oracle)


# ---------------------------------------------------------------------------
# empirical congruence verification
# ---------------------------------------------------------------------------

@dataclass
class FvcVerifyReport:
    op: str
    mode: str
    rank: int
    trials: int
    performed: int
    classes: int
    passed: bool
    counterexample: tuple[str, str] | None = None


def _sample_pool(spec: AlphabetSpec, m: int, mode: str, rng, config: RunConfig,
                 pool_size: int) -> list[tuple[Node, Value]]:
    """Small evaluated trees over the alphabet (leaves plus shallow applications)."""
    from .corpus import random_tree
    cap = config.oracle_cap(mode)
    pool: list[tuple[Node, Value]] = []
    for name in sorted(spec.leaves):
        node = Node(fresh_token(), name)
        res = evaluate(node, spec)
        pool.append((node, Value(res.structure, res.anchors)))
    guard = 0
    while len(pool) < pool_size and guard < pool_size * 20:
        guard += 1
        t = random_tree(spec, rng, max_leaves=4, max_eval_size=max(2, cap - 1))
        res = evaluate(t, spec)
        if res.structure.size <= max(2, cap - 1):
            pool.append((t, Value(res.structure, res.anchors)))
    return pool


def verify_fvc(spec: AlphabetSpec, opname: str, m: int, mode: str, *,
               trials: int = 100, seed: int = 0,
               config: RunConfig = DEFAULT_CONFIG,
               pool: list[tuple[Node, Value]] | None = None) -> FvcVerifyReport:
    """Sample same-class input pairs, apply the operation directly (no tables),
    and require oracle-equal outputs. This is the independent congruence check
    behind every table: swap one argument for a same-type argument and the
    result type must not move."""
    import random
    op = spec.op(opname)
    rng = random.Random(seed)
    ann = Annotator(spec, m, mode, config)
    cap = config.oracle_cap(mode)
    if pool is None:
        pool = _sample_pool(spec, m, mode, rng, config, pool_size=36)
    classes: dict[TypeFingerprint, list[tuple[Node, Value]]] = {}
    for t, v in pool:
        classes.setdefault(ann.value_fp(v), []).append((t, v))
    rich = [members for members in classes.values() if len(members) >= 2]
    report = FvcVerifyReport(opname, mode, m, trials, 0, len(classes), True)
    if not rich:
        return report
    arity = op.rho
    performed = 0
    attempts = 0
    while performed < trials and attempts < trials * 30:
        attempts += 1
        members = rng.choice(rich)
        (ta, va), (tb, vb) = rng.sample(members, 2)
        slot = rng.randrange(arity)
        partners = [rng.choice(pool) for _ in range(arity - 1)]
        args_a = partners[:slot] + [(ta, va)] + partners[slot:]
        args_b = partners[:slot] + [(tb, vb)] + partners[slot:]
        size_a = sum(v.structure.size for _, v in args_a) + (1 if isinstance(op.kind, TreeBuild) else 0)
        size_b = sum(v.structure.size for _, v in args_b) + (1 if isinstance(op.kind, TreeBuild) else 0)
        if size_a > cap or size_b > cap:
            continue
        out_a = apply_op(spec, op, _disjointify([v for _, v in args_a]), fresh_token())
        out_b = apply_op(spec, op, _disjointify([v for _, v in args_b]), fresh_token())
        performed += 1
        if ann.value_fp(out_a) != ann.value_fp(out_b):
            report.performed = performed
            report.passed = False
            tree_a = Node(fresh_token(), opname, tuple(t for t, _ in args_a))
            tree_b = Node(fresh_token(), opname, tuple(t for t, _ in args_b))
            report.counterexample = (format_tree(tree_a), format_tree(tree_b))
            return report
    report.performed = performed
    return report


# ---------------------------------------------------------------------------
# persistence (length-prefixed binary, versioned)
# ---------------------------------------------------------------------------

MAGIC = b"TQFT"
VERSION = 1


def alphabet_digest(spec: AlphabetSpec) -> bytes:
    parts = [spec.kind, repr(spec.voc.relations), str(spec.voc.label_count),
             str(spec.word_order)]
    for name in sorted(spec.leaves):
        parts.append(name)
        parts.append(format_structure(spec.leaves[name]))
    for name in sorted(spec.ops):
        op = spec.ops[name]
        if isinstance(op.kind, CustomOp):
            raise ValueError("alphabets with custom ops cannot be persisted")
        parts.append(f"{name}|{op.kind!r}|{op.rho}|{op.ranked}")
    return hashlib.sha256("\n".join(parts).encode()).digest()


def _w_bytes(out: list[bytes], data: bytes):
    out.append(struct.pack("<I", len(data)))
    out.append(data)


def _w_fp(out: list[bytes], fp: TypeFingerprint):
    out.append(struct.pack("<BHH", 0 if fp.mode == "fo" else 1, fp.rank, fp.nparams))
    _w_bytes(out, fp.payload)


def _w_value(out: list[bytes], v: Value):
    _w_bytes(out, format_structure(v.structure).encode())
    idx = {e: i for i, e in enumerate(v.structure.universe)}
    out.append(struct.pack("<H", len(v.anchors)))
    for a in v.anchors:
        out.append(struct.pack("<I", idx[a]))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ParseError("truncated table file")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def bytes_(self) -> bytes:
        (n,) = self.unpack("<I")
        return self.take(n)

    def fp(self) -> TypeFingerprint:
        mode_b, rank, nparams = self.unpack("<BHH")
        payload = self.bytes_()
        return TypeFingerprint("fo" if mode_b == 0 else "mso", rank, nparams,
                               payload, hashlib.sha256(payload).digest())

    def value(self, voc) -> Value:
        s = parse_structure(self.bytes_().decode())
        if s.voc.relations != voc.relations:
            raise ParseError("table representative vocabulary mismatch")
        s = Structure(voc, s.universe, s.relations, s.labels)
        (n,) = self.unpack("<H")
        anchors = tuple(s.universe[self.unpack("<I")[0]] for _ in range(n))
        return Value(s, anchors)


def save_tables(ann: Annotator, path: str):
    """Serialize tables and representatives; deterministic for fixed content."""
    out: list[bytes] = [MAGIC, struct.pack("<HBH", VERSION, 0 if ann.mode == "fo" else 1, ann.m)]
    out.append(alphabet_digest(ann.spec))
    reps = sorted(ann.reps.items(), key=lambda kv: kv[0].payload)
    out.append(struct.pack("<I", len(reps)))
    for fp, v in reps:
        _w_fp(out, fp)
        _w_value(out, v)
    unp = sorted(ann.unpointed.items(), key=lambda kv: kv[0].payload)
    out.append(struct.pack("<I", len(unp)))
    for fp, ufp in unp:
        _w_fp(out, fp)
        _w_fp(out, ufp)
    out.append(struct.pack("<I", len(ann.tables)))
    for name in sorted(ann.tables):
        tab = ann.tables[name]
        _w_bytes(out, name.encode())
        out.append(struct.pack("<I", len(tab.unary)))
        for fp, ofp in sorted(tab.unary.items(), key=lambda kv: kv[0].payload):
            _w_fp(out, fp)
            _w_fp(out, ofp)
        out.append(struct.pack("<I", len(tab.step)))
        for (fa, fb), ofp in sorted(tab.step.items(),
                                    key=lambda kv: (kv[0][0].payload, kv[0][1].payload)):
            _w_fp(out, fa)
            _w_fp(out, fb)
            _w_fp(out, ofp)
        out.append(struct.pack("<I", len(tab.full)))
        for fps, ofp in sorted(tab.full.items(),
                               key=lambda kv: tuple(f.payload for f in kv[0])):
            out.append(struct.pack("<H", len(fps)))
            for f in fps:
                _w_fp(out, f)
            _w_fp(out, ofp)
    blob = b"".join(out)
    with open(path, "wb") as fh:
        fh.write(blob)


def load_tables(spec: AlphabetSpec, m: int, mode: str, path: str, *,
                config: RunConfig = DEFAULT_CONFIG) -> Annotator:
    """Load tables saved by save_tables; refuses version/alphabet/rank mismatches."""
    with open(path, "rb") as fh:
        rd = _Reader(fh.read())
    if rd.take(4) != MAGIC:
        raise ParseError(f"{path}: not a composition table file")
    version, mode_b, rank = rd.unpack("<HBH")
    if version != VERSION:
        raise ParseError(f"{path}: table format version {version}, expected {VERSION}")
    if ("fo" if mode_b == 0 else "mso") != mode or rank != m:
        raise ParseError(f"{path}: table is for {'fo' if mode_b == 0 else 'mso'} rank {rank}, "
                         f"requested {mode} rank {m}")
    if rd.take(32) != alphabet_digest(spec):
        raise ParseError(f"{path}: table was built for a different alphabet")
    ann = Annotator(spec, m, mode, config)
    (nreps,) = rd.unpack("<I")
    for _ in range(nreps):
        fp = rd.fp()
        ann.reps[fp] = rd.value(spec.voc)
        ann.rep_trees[fp] = None
    (nunp,) = rd.unpack("<I")
    for _ in range(nunp):
        fp = rd.fp()
        ann.unpointed[fp] = rd.fp()
    (nops,) = rd.unpack("<I")
    for _ in range(nops):
        name = rd.bytes_().decode()
        if name not in ann.tables:
            raise ParseError(f"{path}: table for unknown op {name!r}")
        tab = ann.tables[name]
        (n,) = rd.unpack("<I")
        for _ in range(n):
            fp = rd.fp()
            tab.unary[fp] = rd.fp()
        (n,) = rd.unpack("<I")
        for _ in range(n):
            fa, fb = rd.fp(), rd.fp()
            tab.step[(fa, fb)] = rd.fp()
        (n,) = rd.unpack("<I")
        for _ in range(n):
            (k,) = rd.unpack("<H")
            fps = tuple(rd.fp() for _ in range(k))
            tab.full[fps] = rd.fp()
    if rd.pos != len(rd.data):
        raise ParseError(f"{path}: trailing bytes in table file")
    return ann
