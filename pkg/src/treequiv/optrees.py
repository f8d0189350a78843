"""Operation alphabets and operation trees.

An alphabet binds leaf symbols to small base structures and internal symbols to
structure-building operations: disjoint union, label-driven graph join, word
concatenation, and tree building (fresh labeled root over a child forest).
Unranked symbols with ranking rho accept arities rho + i*(rho-1); ranked
symbols accept exactly their declared arity.

Every tree node carries a unique integer token. Evaluated elements are
(token, local_id) pairs, so evaluation is reproducible, splices preserve
element identities along untouched subtrees, and provenance (element ->
introducing node token) is total.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterator

from .errors import ArityError, ParseError
from .structures import Structure, Vocabulary, format_structure, parse_structure

_token_counter = itertools.count(1)


def fresh_token() -> int:
    return next(_token_counter)


# ---------------------------------------------------------------------------
# operation kinds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DisjointUnion:
    pass


@dataclass(frozen=True)
class CographJoin:
    """Join driven by a 0/1 matrix over labels: an edge is added between an
    element labeled l in an earlier argument and one labeled k in a later
    argument iff matrix[l-1][k-1] == 1; the edge relation is symmetric."""

    matrix: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class TreeBuild:
    """Fresh root labeled `label`, argument roots become its ordered children."""

    label: int


@dataclass(frozen=True)
class WordConcat:
    pass


@dataclass(frozen=True, eq=False)
class CustomOp:
    """Test-only operation with an explicit apply callable. dimension declares
    how many coordinates of input types the output depends on; only 1 is
    accepted (product-like operators are rejected at alphabet construction)."""

    name: str
    apply: Callable
    dimension: int = 1


OpKind = DisjointUnion | CographJoin | TreeBuild | WordConcat | CustomOp


@dataclass(frozen=True)
class OpSymbol:
    name: str
    kind: OpKind
    rho: int
    ranked: bool = False

    def allows_arity(self, n: int) -> bool:
        if self.ranked:
            return n == self.rho
        return n >= self.rho and (n - self.rho) % (self.rho - 1) == 0


@dataclass(frozen=True)
class Value:
    """An evaluated structure with its anchor tuple (the distinguished
    parameters used by composition): () for graphs, (first, last) for words,
    (root, last_top_child) for trees (root repeated when childless)."""

    structure: Structure
    anchors: tuple = ()


# ---------------------------------------------------------------------------
# alphabet
# ---------------------------------------------------------------------------

GRAPH_RELS = (("E", 2),)
WORD_RELS = (("succ", 2),)
WORD_ORDER_RELS = (("lt", 2),)
TREE_RELS = (("child", 2), ("nextSibling", 2))


def _word_anchors(s: Structure, rel: str) -> tuple:
    """Validate a nonempty successor path and return (first, last)."""
    if s.size == 0:
        raise ValueError("word leaves must be nonempty")
    succ = s.relations[rel]
    out: dict = {}
    inc: dict = {}
    for u, v in succ:
        if u in out or v in inc:
            raise ValueError("word leaf is not a path (branching successor)")
        out[u] = v
        inc[v] = u
    firsts = [e for e in s.universe if e not in inc]
    lasts = [e for e in s.universe if e not in out]
    if len(firsts) != 1 or len(lasts) != 1:
        raise ValueError("word leaf is not a single path")
    first = firsts[0]
    seen, cur = 1, first
    while cur in out:
        cur = out[cur]
        seen += 1
    if seen != s.size or cur != lasts[0]:
        raise ValueError("word leaf successor relation is not connected")
    return (first, lasts[0])


def _tree_anchors(s: Structure) -> tuple:
    """Validate a rooted ordered tree (child + nextSibling, all nodes labeled)
    and return (root, last_top_child-or-root)."""
    if s.size == 0:
        raise ValueError("tree leaves must be nonempty")
    child = s.relations["child"]
    sib = s.relations["nextSibling"]
    parent: dict = {}
    kids: dict = {}
    for p, c in child:
        if c in parent:
            raise ValueError("tree leaf node has two parents")
        parent[c] = p
        kids.setdefault(p, set()).add(c)
    roots = [e for e in s.universe if e not in parent]
    if len(roots) != 1:
        raise ValueError("tree leaf must have exactly one root")
    root = roots[0]
    reach = {root}
    frontier = [root]
    while frontier:
        nxt = frontier.pop()
        for c in kids.get(nxt, ()):
            if c in reach:
                raise ValueError("tree leaf child relation has a cycle")
            reach.add(c)
            frontier.append(c)
    if len(reach) != s.size:
        raise ValueError("tree leaf child relation is not connected")
    sib_next: dict = {}
    sib_prev: dict = {}
    for a, b in sib:
        if a in sib_next or b in sib_prev:
            raise ValueError("tree leaf sibling order is not a chain")
        if parent.get(a) != parent.get(b) or a not in parent:
            raise ValueError("nextSibling must link siblings")
        sib_next[a] = b
        sib_prev[b] = a
    for p, cs in kids.items():
        heads = [c for c in cs if c not in sib_prev]
        if len(heads) != 1:
            raise ValueError("children of a node must form one sibling chain")
        count, cur = 1, heads[0]
        while cur in sib_next:
            cur = sib_next[cur]
            count += 1
        if count != len(cs):
            raise ValueError("children of a node must form one sibling chain")
    for e in s.universe:
        if s.label_of(e) == 0:
            raise ValueError("every tree node needs a label (its symbol)")
    if root not in kids:
        return (root, root)
    cur = next(c for c in kids[root] if c not in sib_prev)
    while cur in sib_next:
        cur = sib_next[cur]
    return (root, cur)


class AlphabetSpec:
    """Validated alphabet: vocabulary, structural kind, leaf bindings, operations."""

    def __init__(self, kind: str, voc: Vocabulary, leaves: dict[str, Structure],
                 ops: dict[str, OpSymbol], *, word_order: bool = False):
        if kind not in ("graph", "word", "tree"):
            raise ValueError(f"alphabet kind must be graph/word/tree, got {kind!r}")
        self.kind = kind
        self.voc = voc
        self.word_order = word_order
        expected = {"graph": GRAPH_RELS,
                    "word": WORD_ORDER_RELS if word_order else WORD_RELS,
                    "tree": TREE_RELS}[kind]
        for name, arity in expected:
            if not voc.has(name) or voc.arity(name) != arity:
                raise ValueError(f"{kind} alphabet needs relation {name}/{arity}")
        self.leaves = dict(leaves)
        self.ops = dict(ops)
        overlap = set(self.leaves) & set(self.ops)
        if overlap:
            raise ValueError(f"names used as both leaf and op: {sorted(overlap)}")
        if "leaf" in self.leaves or "leaf" in self.ops:
            raise ValueError("'leaf' is a reserved word")
        for name, op in self.ops.items():
            if name != op.name:
                raise ValueError(f"op registered under wrong name: {name} vs {op.name}")
            if op.rho < 1:
                raise ValueError(f"op {name}: rho must be >= 1")
            if not op.ranked and op.rho < 2:
                raise ValueError(f"unranked op {name} needs rho >= 2")
            k = op.kind
            if isinstance(k, DisjointUnion) and kind != "graph":
                raise ValueError(f"union op {name} requires a graph alphabet")
            if isinstance(k, CographJoin):
                if kind != "graph":
                    raise ValueError(f"cograph op {name} requires a graph alphabet")
                n = len(k.matrix)
                if n != voc.label_count or any(len(row) != n for row in k.matrix):
                    raise ValueError(f"cograph op {name}: matrix must be {voc.label_count}x{voc.label_count}")
                if any(bit not in (0, 1) for row in k.matrix for bit in row):
                    raise ValueError(f"cograph op {name}: matrix entries must be 0/1")
            if isinstance(k, WordConcat) and kind != "word":
                raise ValueError(f"concat op {name} requires a word alphabet")
            if isinstance(k, TreeBuild):
                if kind != "tree":
                    raise ValueError(f"treebuild op {name} requires a tree alphabet")
                if not (1 <= k.label <= voc.label_count):
                    raise ValueError(f"treebuild op {name}: label {k.label} outside 1..{voc.label_count}")
            if isinstance(k, CustomOp) and k.dimension != 1:
                raise ValueError(
                    f"op {name}: dimension {k.dimension} output types would depend on "
                    "tuples of input types; product-like operators are rejected")
        self._leaf_anchors: dict[str, tuple] = {}
        for name, s in self.leaves.items():
            if s.voc != voc:
                raise ValueError(f"leaf {name}: vocabulary differs from the alphabet's")
            if s.size > 3:
                raise ValueError(f"leaf {name}: leaf structures are capped at 3 elements, got {s.size}")
            if kind == "word":
                self._leaf_anchors[name] = _word_anchors(s, "lt" if word_order else "succ")
                if word_order and not _is_strict_order(s):
                    raise ValueError(f"leaf {name}: lt must be a strict total order")
            elif kind == "tree":
                self._leaf_anchors[name] = _tree_anchors(s)
            else:
                self._leaf_anchors[name] = ()

    def leaf_anchor(self, name: str) -> tuple:
        return self._leaf_anchors[name]

    def op(self, name: str) -> OpSymbol:
        try:
            return self.ops[name]
        except KeyError:
            raise KeyError(f"unknown operation symbol {name!r}") from None


def _is_strict_order(s: Structure) -> bool:
    lt = s.relations["lt"]
    for e in s.universe:
        if (e, e) in lt:
            return False
    for a, b in lt:
        if (b, a) in lt:
            return False
        for c in s.universe:
            if (b, c) in lt and (a, c) not in lt:
                return False
    for a, b in itertools.combinations(s.universe, 2):
        if (a, b) not in lt and (b, a) not in lt:
            return False
    return True


# ---------------------------------------------------------------------------
# trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Node:
    """Operation tree node. Leaves have no children and a leaf symbol."""

    token: int
    symbol: str
    children: tuple["Node", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


def leaf(symbol: str) -> Node:
    return Node(fresh_token(), symbol)


def op_node(symbol: str, *children: Node) -> Node:
    return Node(fresh_token(), symbol, tuple(children))


def post_order(t: Node) -> list[Node]:
    out: list[Node] = []
    stack: list[tuple[Node, bool]] = [(t, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            out.append(node)
        else:
            stack.append((node, True))
            for c in reversed(node.children):
                stack.append((c, False))
    return out


def iter_nodes(t: Node) -> Iterator[tuple[tuple[int, ...], Node]]:
    """Preorder (address, node) pairs; addresses are child-index paths."""
    stack: list[tuple[tuple[int, ...], Node]] = [((), t)]
    while stack:
        addr, node = stack.pop()
        yield addr, node
        for i in range(len(node.children) - 1, -1, -1):
            stack.append((addr + (i,), node.children[i]))


def node_at(t: Node, address: tuple[int, ...]) -> Node:
    cur = t
    for i in address:
        if not (0 <= i < len(cur.children)):
            raise ValueError(f"invalid address {address}")
        cur = cur.children[i]
    return cur


def count_nodes(t: Node) -> int:
    return len(post_order(t))


def leaf_count(t: Node) -> int:
    return sum(1 for n in post_order(t) if n.is_leaf)


def tree_height(t: Node) -> int:
    """Edges on the longest root-to-leaf path."""
    depth: dict[int, int] = {}
    for node in post_order(t):
        depth[node.token] = 1 + max((depth[c.token] for c in node.children), default=-1)
    return depth[t.token]


def max_degree(t: Node) -> int:
    return max((len(n.children) for n in post_order(t)), default=0)


def validate_tree(t: Node, spec: AlphabetSpec, *, relaxed: bool = False):
    """Check symbols, arity discipline, and token uniqueness. relaxed drops the
    arity check (internal representative trees may hold partial applications)."""
    seen: set[int] = set()
    for node in post_order(t):
        if node.token in seen:
            raise ValueError(f"duplicate node token {node.token}; trees must not share nodes")
        seen.add(node.token)
        if node.is_leaf:
            if node.symbol not in spec.leaves:
                raise ParseError(f"unknown leaf symbol {node.symbol!r}")
        else:
            if node.symbol not in spec.ops:
                raise ParseError(f"unknown operation symbol {node.symbol!r}")
            op = spec.ops[node.symbol]
            n = len(node.children)
            if not relaxed and not op.allows_arity(n):
                raise ArityError(
                    f"op {node.symbol} (rho={op.rho}{', ranked' if op.ranked else ''}) "
                    f"does not allow arity {n}")


def subtree_replace(t: Node, address: tuple[int, ...], replacement: Node) -> Node:
    """Replace the subtree at address, preserving spine tokens."""
    if not address:
        return replacement
    spine: list[Node] = [t]
    cur = t
    for i in address:
        if not (0 <= i < len(cur.children)):
            raise ValueError(f"invalid address {address}")
        cur = cur.children[i]
        spine.append(cur)
    new = replacement
    for depth in range(len(address) - 1, -1, -1):
        parent = spine[depth]
        i = address[depth]
        new = Node(parent.token, parent.symbol,
                   parent.children[:i] + (new,) + parent.children[i + 1:])
    return new


def clone_fresh(t: Node) -> Node:
    """Structural copy with brand-new tokens everywhere."""
    built: dict[int, Node] = {}
    for node in post_order(t):
        built[node.token] = Node(fresh_token(), node.symbol,
                                 tuple(built[c.token] for c in node.children))
    return built[t.token]


# ---------------------------------------------------------------------------
# s-expression parsing / printing
# ---------------------------------------------------------------------------

def parse_tree(text: str, spec: AlphabetSpec) -> Node:
    """Parse '(leaf SYM)' / '(SYM tree+)' s-expressions, validating arities."""
    toks: list[tuple[str, int, int]] = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c.isspace():
            col += 1
            i += 1
        elif c in "()":
            toks.append((c, line, col))
            col += 1
            i += 1
        elif c == "#":
            while i < len(text) and text[i] != "\n":
                i += 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "()#":
                j += 1
            toks.append((text[i:j], line, col))
            col += j - i
            i = j

    pos = 0

    def take() -> tuple[str, int, int]:
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("unexpected end of input", line=line)
        tok = toks[pos]
        pos += 1
        return tok

    stack: list[tuple[str, int, int, list[Node]]] = []
    result: Node | None = None
    while True:
        tok, ln, cl = take()
        if tok != "(":
            raise ParseError(f"expected '(' , got {tok!r}", line=ln, column=cl)
        head, hln, hcl = take()
        if head in ("(", ")"):
            raise ParseError("expected a symbol after '('", line=hln, column=hcl)
        if head == "leaf":
            sym, sln, scl = take()
            if sym in ("(", ")"):
                raise ParseError("expected a leaf symbol", line=sln, column=scl)
            if sym not in spec.leaves:
                raise ParseError(f"unknown leaf symbol {sym!r}", line=sln, column=scl)
            close, cln, ccl = take()
            if close != ")":
                raise ParseError("leaf takes exactly one symbol", line=cln, column=ccl)
            node = Node(fresh_token(), sym)
        else:
            if head not in spec.ops:
                raise ParseError(f"unknown operation symbol {head!r}", line=hln, column=hcl)
            stack.append((head, hln, hcl, []))
            continue
        # a node is complete; close parent frames that are ready
        while True:
            if not stack:
                if pos != len(toks):
                    extra = toks[pos]
                    raise ParseError("trailing input after tree", line=extra[1], column=extra[2])
                return node
            if pos < len(toks) and toks[pos][0] == ")":
                head, hln, hcl, kids = stack.pop()
                kids.append(node)
                pos += 1
                op = spec.ops[head]
                if not op.allows_arity(len(kids)):
                    raise ArityError(
                        f"op {head} (rho={op.rho}{', ranked' if op.ranked else ''}) does not "
                        f"allow arity {len(kids)} (line {hln})")
                node = Node(fresh_token(), head, tuple(kids))
                continue
            stack[-1][3].append(node)
            break


def format_tree(t: Node) -> str:
    parts: list[str] = []
    stack: list[object] = [t]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
            continue
        node = item
        if node.is_leaf:
            parts.append(f"(leaf {node.symbol})")
        else:
            parts.append(f"({node.symbol}")
            stack.append(")")
            for c in reversed(node.children):
                stack.append(c)
                stack.append(" ")
    return "".join(parts)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalResult:
    structure: Structure
    provenance: dict
    anchors: tuple


def instantiate_leaf(spec: AlphabetSpec, symbol: str, token: int) -> Value:
    base = spec.leaves[symbol]
    remap = {e: (token, e) for e in base.universe}
    s = Structure(base.voc, [remap[e] for e in base.universe],
                  {name: [tuple(remap[x] for x in t) for t in ts]
                   for name, ts in base.relations.items()},
                  {remap[e]: l for e, l in base.labels.items()})
    return Value(s, tuple(remap[e] for e in spec.leaf_anchor(symbol)))


def apply_op(spec: AlphabetSpec, op: OpSymbol, values: list[Value], token: int) -> Value:
    """Apply op to already-evaluated arguments (universes must be disjoint).
    Used for table representatives and small-scale checks; evaluate() below is
    the streaming path for whole trees."""
    k = op.kind
    if isinstance(k, CustomOp):
        return k.apply(spec, values, token)
    universe: list = []
    rels: dict[str, list] = {name: [] for name, _ in spec.voc.relations}
    labels: dict = {}
    for v in values:
        universe.extend(v.structure.universe)
        for name, ts in v.structure.relations.items():
            rels[name].extend(ts)
        labels.update(v.structure.labels)
    if isinstance(k, DisjointUnion):
        anchors: tuple = ()
    elif isinstance(k, CographJoin):
        edges = rels["E"]
        for (i, vi), (j, vj) in itertools.combinations(enumerate(values), 2):
            for u in vi.structure.universe:
                lu = vi.structure.label_of(u)
                if lu == 0:
                    raise ValueError(f"cograph op {op.name}: unlabeled element {u!r}")
                row = k.matrix[lu - 1]
                for w in vj.structure.universe:
                    lw = vj.structure.label_of(w)
                    if lw == 0:
                        raise ValueError(f"cograph op {op.name}: unlabeled element {w!r}")
                    if row[lw - 1]:
                        edges.append((u, w))
                        edges.append((w, u))
        anchors = ()
    elif isinstance(k, WordConcat):
        rel = "lt" if spec.word_order else "succ"
        links = rels[rel]
        if spec.word_order:
            for vi, vj in itertools.combinations(values, 2):
                for u in vi.structure.universe:
                    for w in vj.structure.universe:
                        links.append((u, w))
        else:
            for vi, vj in zip(values, values[1:]):
                links.append((vi.anchors[1], vj.anchors[0]))
        anchors = (values[0].anchors[0], values[-1].anchors[1])
    elif isinstance(k, TreeBuild):
        root = (token, "r")
        universe.append(root)
        labels[root] = k.label
        kid_roots = [v.anchors[0] for v in values]
        rels["child"].extend((root, r) for r in kid_roots)
        rels["nextSibling"].extend(zip(kid_roots, kid_roots[1:]))
        anchors = (root, kid_roots[-1] if kid_roots else root)
    else:
        raise TypeError(f"unknown op kind {k!r}")
    return Value(Structure(spec.voc, universe, rels, labels), anchors)


def attach_child(spec: AlphabetSpec, op: OpSymbol, grown: Value, extra: Value, token: int) -> Value:
    """Fold step for TreeBuild: add extra as a new last top-level child of grown's root."""
    if not isinstance(op.kind, TreeBuild):
        raise TypeError("attach_child only applies to TreeBuild symbols")
    root, last = grown.anchors
    universe = list(grown.structure.universe) + list(extra.structure.universe)
    rels = {name: list(ts) for name, ts in grown.structure.relations.items()}
    for name, ts in extra.structure.relations.items():
        rels[name].extend(ts)
    labels = dict(grown.structure.labels)
    labels.update(extra.structure.labels)
    new_child = extra.anchors[0]
    rels["child"].append((root, new_child))
    if last != root:
        rels["nextSibling"].append((last, new_child))
    return Value(Structure(spec.voc, universe, rels, labels), (root, new_child))


def eval_sizes(t: Node, spec: AlphabetSpec) -> dict[int, int]:
    """Evaluated-structure size per subtree, keyed by node token (no evaluation)."""
    sizes: dict[int, int] = {}
    for node in post_order(t):
        if node.is_leaf:
            sizes[node.token] = spec.leaves[node.symbol].size
        else:
            extra = 1 if isinstance(spec.ops[node.symbol].kind, TreeBuild) else 0
            sizes[node.token] = sum(sizes[c.token] for c in node.children) + extra
    return sizes


def evaluate(t: Node, spec: AlphabetSpec, *, validate: bool = True) -> EvalResult:
    """Evaluate a whole tree in one streaming pass.

    Work is proportional to the output structure (plus one visit per node), so
    deep combs of cheap operations stay linear. Custom ops fall back to direct
    per-node application.
    """
    if validate:
        validate_tree(t, spec)
    if any(isinstance(spec.ops[n.symbol].kind, CustomOp)
           for n in post_order(t) if not n.is_leaf):
        return _evaluate_custom(t, spec)

    universe: list = []
    rels: dict[str, list] = {name: [] for name, _ in spec.voc.relations}
    labels: dict = {}
    prov: dict = {}
    spans: dict[int, tuple[int, int]] = {}
    anchors: dict[int, tuple] = {}

    succ_rel = None
    if spec.kind == "word":
        succ_rel = "lt" if spec.word_order else "succ"

    for node in post_order(t):
        if node.is_leaf:
            start = len(universe)
            val = instantiate_leaf(spec, node.symbol, node.token)
            universe.extend(val.structure.universe)
            for name, ts in val.structure.relations.items():
                rels[name].extend(ts)
            labels.update(val.structure.labels)
            for e in val.structure.universe:
                prov[e] = node.token
            spans[node.token] = (start, len(universe))
            anchors[node.token] = val.anchors
            continue
        op = spec.ops[node.symbol]
        kids = node.children
        start = spans[kids[0].token][0]
        k = op.kind
        if isinstance(k, DisjointUnion):
            anchors[node.token] = ()
        elif isinstance(k, CographJoin):
            edges = rels["E"]
            for ci, cj in itertools.combinations(kids, 2):
                si, sj = spans[ci.token], spans[cj.token]
                for u in universe[si[0]:si[1]]:
                    lu = labels.get(u, 0)
                    if lu == 0:
                        raise ValueError(f"cograph op {op.name}: unlabeled element {u!r}")
                    row = k.matrix[lu - 1]
                    for w in universe[sj[0]:sj[1]]:
                        lw = labels.get(w, 0)
                        if lw == 0:
                            raise ValueError(f"cograph op {op.name}: unlabeled element {w!r}")
                        if row[lw - 1]:
                            edges.append((u, w))
                            edges.append((w, u))
            anchors[node.token] = ()
        elif isinstance(k, WordConcat):
            links = rels[succ_rel]
            if spec.word_order:
                for ci, cj in itertools.combinations(kids, 2):
                    si, sj = spans[ci.token], spans[cj.token]
                    for u in universe[si[0]:si[1]]:
                        for w in universe[sj[0]:sj[1]]:
                            links.append((u, w))
            else:
                for ci, cj in zip(kids, kids[1:]):
                    links.append((anchors[ci.token][1], anchors[cj.token][0]))
            anchors[node.token] = (anchors[kids[0].token][0], anchors[kids[-1].token][1])
        elif isinstance(k, TreeBuild):
            root = (node.token, "r")
            universe.append(root)
            labels[root] = k.label
            prov[root] = node.token
            kid_roots = [anchors[c.token][0] for c in kids]
            rels["child"].extend((root, r) for r in kid_roots)
            rels["nextSibling"].extend(zip(kid_roots, kid_roots[1:]))
            anchors[node.token] = (root, kid_roots[-1] if kid_roots else root)
        else:
            raise TypeError(f"unknown op kind {k!r}")
        spans[node.token] = (start, len(universe))

    s = Structure(spec.voc, universe, rels, labels)
    return EvalResult(s, prov, anchors[t.token])


def _evaluate_custom(t: Node, spec: AlphabetSpec) -> EvalResult:
    vals: dict[int, Value] = {}
    prov: dict = {}
    for node in post_order(t):
        if node.is_leaf:
            val = instantiate_leaf(spec, node.symbol, node.token)
            for e in val.structure.universe:
                prov[e] = node.token
        else:
            val = apply_op(spec, spec.ops[node.symbol],
                           [vals[c.token] for c in node.children], node.token)
            for e in val.structure.universe:
                prov.setdefault(e, node.token)
        vals[node.token] = val
    root = vals[t.token]
    return EvalResult(root.structure, prov, root.anchors)


def to_order_encoding(spec: AlphabetSpec) -> AlphabetSpec:
    """Convert a successor-word alphabet to the linear-order encoding: leaves get
    lt = transitive closure of succ, concat then adds all cross pairs."""
    if spec.kind != "word" or spec.word_order:
        raise ValueError("to_order_encoding expects a successor-word alphabet")
    voc = Vocabulary(WORD_ORDER_RELS, spec.voc.label_count)
    leaves: dict[str, Structure] = {}
    for name, s in spec.leaves.items():
        first, _ = spec.leaf_anchor(name)
        succ = {u: v for u, v in s.relations["succ"]}
        chain = [first]
        while chain[-1] in succ:
            chain.append(succ[chain[-1]])
        lt = [(chain[i], chain[j]) for i in range(len(chain)) for j in range(i + 1, len(chain))]
        leaves[name] = Structure(voc, s.universe, {"lt": lt}, s.labels)
    return AlphabetSpec("word", voc, leaves, spec.ops, word_order=True)


# ---------------------------------------------------------------------------
# alphabet files
#
#   kind graph            (optional; inferred from ops when missing)
#   labels 2              (optional; inferred otherwise)
#   leaf a  leaf_a.str
#   op u union 2
#   op j cograph 2 10;01
#   op cat concat 2
#   op build treebuild 2 1
#   op pair treebuild 2 ranked 1
# ---------------------------------------------------------------------------

_OP_KIND_NAMES = ("union", "cograph", "treebuild", "concat")


def parse_alphabet(text: str, *, read_file: Callable[[str], str]) -> AlphabetSpec:
    """Parse an alphabet file; read_file resolves leaf structure file names."""
    kind: str | None = None
    label_count: int | None = None
    word_order = False
    leaf_lines: list[tuple[int, str, str]] = []
    op_lines: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "order":
            if len(parts) != 1:
                raise ParseError("expected: order (no arguments)", line=lineno)
            word_order = True
        elif parts[0] == "kind":
            if len(parts) != 2 or parts[1] not in ("graph", "word", "tree"):
                raise ParseError("expected: kind graph|word|tree", line=lineno)
            kind = parts[1]
        elif parts[0] == "labels":
            if len(parts) != 2 or not parts[1].isdigit():
                raise ParseError("expected: labels K", line=lineno)
            label_count = int(parts[1])
        elif parts[0] == "leaf":
            if len(parts) != 3:
                raise ParseError("expected: leaf NAME FILE", line=lineno)
            leaf_lines.append((lineno, parts[1], parts[2]))
        elif parts[0] == "op":
            if len(parts) < 4:
                raise ParseError("expected: op NAME KIND RHO [ranked] [params]", line=lineno)
            op_lines.append((lineno, parts[1:]))
        else:
            raise ParseError(f"unknown directive {parts[0]!r}", line=lineno)

    parsed_ops: list[tuple[int, str, str, int, bool, str | None]] = []
    for lineno, parts in op_lines:
        name, kname = parts[0], parts[1]
        if kname not in _OP_KIND_NAMES:
            raise ParseError(f"unknown op kind {kname!r}", line=lineno)
        if not parts[2].isdigit():
            raise ParseError("op rho must be an integer", line=lineno)
        rho = int(parts[2])
        rest = parts[3:]
        ranked = False
        if rest and rest[0] == "ranked":
            ranked = True
            rest = rest[1:]
        param = rest[0] if rest else None
        if len(rest) > 1:
            raise ParseError("too many op parameters", line=lineno)
        parsed_ops.append((lineno, name, kname, rho, ranked, param))

    inferred = {"union": "graph", "cograph": "graph", "concat": "word", "treebuild": "tree"}
    kinds_used = {inferred[k] for _, _, k, _, _, _ in parsed_ops}
    if kind is None:
        if len(kinds_used) > 1:
            raise ParseError(f"ops imply conflicting alphabet kinds {sorted(kinds_used)}", line=1)
        kind = next(iter(kinds_used), "graph")
    elif kinds_used - {kind}:
        raise ParseError(f"ops imply kinds {sorted(kinds_used)} but alphabet kind is {kind}", line=1)

    leaf_structs: dict[str, Structure] = {}
    max_label = 0
    for lineno, name, fname in leaf_lines:
        if name in leaf_structs:
            raise ParseError(f"leaf {name} declared twice", line=lineno)
        try:
            s = parse_structure(read_file(fname))
        except OSError as exc:
            raise ParseError(f"cannot read leaf file {fname!r}: {exc}", line=lineno) from None
        leaf_structs[name] = s
        max_label = max(max_label, s.voc.label_count)

    for lineno, name, kname, rho, ranked, param in parsed_ops:
        if kname == "cograph" and param:
            max_label = max(max_label, len(param.split(";")))
        if kname == "treebuild":
            if param is None or not param.isdigit():
                raise ParseError("treebuild op needs a label index parameter", line=lineno)
            max_label = max(max_label, int(param))
    if label_count is None:
        label_count = max_label
    elif max_label > label_count:
        raise ParseError(f"labels {label_count} declared but label {max_label} used", line=1)

    if word_order and kind != "word":
        raise ParseError("the order directive applies to word alphabets only", line=1)
    rels = {"graph": GRAPH_RELS,
            "word": WORD_ORDER_RELS if word_order else WORD_RELS,
            "tree": TREE_RELS}[kind]
    voc = Vocabulary(tuple(rels), label_count)

    leaves: dict[str, Structure] = {}
    for lineno, name, fname in leaf_lines:
        s = leaf_structs[name]
        for rname, _ in s.voc.relations:
            if not voc.has(rname):
                raise ParseError(
                    f"leaf {name}: relation {rname} not in the {kind} vocabulary", line=lineno)
        try:
            leaves[name] = Structure(voc, s.universe,
                                     {rn: s.relations.get(rn, frozenset()) for rn, _ in voc.relations},
                                     s.labels)
        except ValueError as exc:
            raise ParseError(f"leaf {name}: {exc}", line=lineno) from None

    ops: dict[str, OpSymbol] = {}
    for lineno, name, kname, rho, ranked, param in parsed_ops:
        if name in ops:
            raise ParseError(f"op {name} declared twice", line=lineno)
        if kname == "union":
            opkind: OpKind = DisjointUnion()
        elif kname == "concat":
            opkind = WordConcat()
        elif kname == "treebuild":
            opkind = TreeBuild(int(param))
        else:
            if param is None:
                raise ParseError("cograph op needs a matrix parameter like 10;01", line=lineno)
            rows = param.split(";")
            if any(len(r) != len(rows) for r in rows) or any(c not in "01" for r in rows for c in r):
                raise ParseError("cograph matrix must be square rows of 0/1", line=lineno)
            if len(rows) != label_count:
                raise ParseError(
                    f"cograph matrix is {len(rows)}x{len(rows)} but alphabet has {label_count} labels",
                    line=lineno)
            opkind = CographJoin(tuple(tuple(int(c) for c in r) for r in rows))
        try:
            ops[name] = OpSymbol(name, opkind, rho, ranked)
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None

    try:
        return AlphabetSpec(kind, voc, leaves, ops, word_order=word_order)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def format_alphabet(spec: AlphabetSpec) -> tuple[str, dict[str, str]]:
    """Serialize an alphabet as (alphabet text, {leaf file name: structure
    text}); round-trips through parse_alphabet. Custom ops have no file form."""
    lines = [f"kind {spec.kind}"]
    if spec.word_order:
        lines.append("order")
    lines.append(f"labels {spec.voc.label_count}")
    leaf_files: dict[str, str] = {}
    for name in sorted(spec.leaves):
        fname = f"leaf_{name}.str"
        lines.append(f"leaf {name} {fname}")
        leaf_files[fname] = format_structure(spec.leaves[name])
    for name in sorted(spec.ops):
        op = spec.ops[name]
        k = op.kind
        if isinstance(k, DisjointUnion):
            part = ("union", None)
        elif isinstance(k, WordConcat):
            part = ("concat", None)
        elif isinstance(k, TreeBuild):
            part = ("treebuild", str(k.label))
        elif isinstance(k, CographJoin):
            part = ("cograph", ";".join("".join(str(c) for c in row) for row in k.matrix))
        else:
            raise ValueError(f"op {name}: custom operations have no file form")
        pieces = ["op", name, part[0], str(op.rho)]
        if op.ranked:
            pieces.append("ranked")
        if part[1] is not None:
            pieces.append(part[1])
        lines.append(" ".join(pieces))
    return "\n".join(lines) + "\n", leaf_files
