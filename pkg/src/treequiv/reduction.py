"""Tree surgery that preserves rank-m classes: height and degree reduction,
kernel extraction with protected elements, and scale-shifted regeneration.

All transformations splice or duplicate subtrees whose composed annotations
(delta1 = subtree class, delta2 = automaton state) coincide, so the root's
class and automaton state are invariant by the table congruences; every public
entry point re-checks this and (when sizes permit) asks the oracle directly.

Traversals are iterative throughout: input trees may be deep combs with 1e5
nodes, far beyond the interpreter's recursion limit.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

from .automata import TreeAutomaton, default_validity_automaton, trivial_automaton
from .config import DEFAULT_CONFIG, RunConfig
from .errors import InfeasibleScaleError, UnsupportedShapeError
from .eftypes import TypeFingerprint, structure_type
from .fvc import Annotator, NodeAnnotation
from .optrees import (AlphabetSpec, Node, TreeBuild, clone_fresh, count_nodes,
                      eval_sizes, evaluate, max_degree, node_at,
                      post_order, subtree_replace, tree_height, validate_tree)
from .structures import Structure, Vocabulary, induced_substructure

_EMBED_CHECK_LIMIT = 20000


# ---------------------------------------------------------------------------
# shared scanning helpers
# ---------------------------------------------------------------------------

def _word_id_sequence(s: Structure, keep: set | None) -> list:
    """Element ids of a successor word in word order, optionally filtered."""
    succ = dict(s.rel("succ"))
    with_pred = {b for _, b in s.rel("succ")}
    starts = [e for e in s.universe if e not in with_pred]
    if len(starts) != 1:
        return list(s.universe) if keep is None else [e for e in s.universe if e in keep]
    seq = []
    cur = starts[0]
    while cur is not None:
        if keep is None or cur in keep:
            seq.append(cur)
        cur = succ.get(cur)
    return seq


def _tree_order_view(s: Structure, keep: set | None):
    """Document order and kept-ancestor sets of a child/nextSibling structure.

    Returns (preorder id list, {id: frozenset of kept proper ancestors}),
    both restricted to keep (None = everything), or None when the child
    relation is not a forest covering the universe — callers then fall back
    to plain induced-substructure comparison.
    """
    parent: dict = {}
    children: dict = {e: [] for e in s.universe}
    for p, c in s.rel("child"):
        if c in parent or p not in children or c not in children:
            return None
        parent[c] = p
        children[p].append(c)
    nxt = dict(s.rel("nextSibling"))
    with_prev = {b for _, b in s.rel("nextSibling")}
    pos = {e: i for i, e in enumerate(s.universe)}

    def ordered(kids: list) -> list:
        if len(kids) <= 1:
            return kids
        kidset = set(kids)
        starts = [e for e in kids if e not in with_prev]
        if len(starts) == 1:
            seq = []
            cur = starts[0]
            while cur in kidset and len(seq) < len(kids):
                seq.append(cur)
                cur = nxt.get(cur)
            if len(seq) == len(kids):
                return seq
        return sorted(kids, key=pos.get)

    roots = ordered([e for e in s.universe if e not in parent])
    doc: list = []
    anc: dict = {}
    kept_path: list = []
    visited = 0
    stack: list[tuple] = [(r, False) for r in reversed(roots)]
    while stack:
        e, exiting = stack.pop()
        if exiting:
            kept_path.pop()
            continue
        visited += 1
        if keep is None or e in keep:
            doc.append(e)
            anc[e] = frozenset(kept_path)
            kept_path.append(e)
            stack.append((e, True))
        for c in reversed(ordered(children[e])):
            stack.append((c, False))
    if visited != s.size:
        return None
    return doc, anc


def _embeds_literally(small: Structure, big: Structure, spec: AlphabetSpec) -> bool:
    """Identity-witnessed containment of small in big.

    For graphs and order-encoded words this is literal induced substructure.
    Successor words and child/nextSibling trees are not closed under induced
    substructures (splicing or pumping re-points one successor/child edge at
    the seam), so there the check is containment under the canonical order
    encoding: the surviving ids must appear in big in the same word order,
    respectively with the same ancestor sets and document order.
    """
    if not set(small.universe) <= set(big.universe):
        return False
    if spec.kind == "word" and not spec.word_order:
        return (_word_id_sequence(big, set(small.universe))
                == _word_id_sequence(small, None)
                and all(big.label_of(e) == small.label_of(e) for e in small.universe))
    if spec.kind == "tree":
        small_view = _tree_order_view(small, None)
        big_view = _tree_order_view(big, set(small.universe))
        if small_view is not None and big_view is not None:
            return (big_view == small_view
                    and all(big.label_of(e) == small.label_of(e)
                            for e in small.universe))
    return induced_substructure(big, small.universe) == small


def _prot_counts(t: Node, protected: frozenset[int]) -> dict[int, int]:
    counts: dict[int, int] = {}
    for node in post_order(t):
        counts[node.token] = ((node.token in protected)
                              + sum(counts[c.token] for c in node.children))
    return counts


def _pair_of(notes: dict[int, NodeAnnotation], token: int) -> tuple:
    a = notes[token]
    return (a.delta1, a.delta2)


def _resolve_addresses(t: Node, targets: set[int]) -> dict[int, tuple[int, ...]]:
    """Addresses of the target tokens; the shared path list keeps this O(n)
    even on very deep trees (full tuples are materialized only on hits)."""
    found: dict[int, tuple[int, ...]] = {}
    if t.token in targets:
        found[t.token] = ()
    path: list[int] = []
    frames: list[list] = [[t, 0]]
    while frames and len(found) < len(targets):
        node, i = frames[-1]
        if i < len(node.children):
            frames[-1][1] = i + 1
            child = node.children[i]
            path.append(i)
            if child.token in targets:
                found[child.token] = tuple(path)
            frames.append([child, 0])
        else:
            frames.pop()
            if frames:
                path.pop()
    return found


def _vertical_scan(t: Node, notes: dict[int, NodeAnnotation], prot: dict[int, int],
                   *, collect_all: bool = False):
    """DFS over root-to-leaf paths tracking (delta1, delta2) pair repeats.

    Returns (best_splice, candidates): best_splice is the minimal key
    (depth_a, pre_a, -depth_b, pre_b, a_token, b_token) over pairs where the
    splice a <- b is protection-eligible (shallowest eligible ancestor first);
    candidates (when collect_all) holds (gain, a_token, b_token) for both the
    nearest and the farthest same-pair ancestor of each node, without the
    protection filter (pumping removes nothing).
    """
    best: tuple | None = None
    candidates: list[tuple[int, int, int]] = []
    # per pair value: parallel stacks of ancestor entries and negated
    # protection counts (non-increasing down a path, so bisect applies)
    stacks: dict[tuple, tuple[list, list]] = {}
    path: list[tuple] = []
    pre = 0
    stack: list[tuple[Node, int, bool]] = [(t, 0, False)]
    while stack:
        node, depth, exiting = stack.pop()
        if exiting:
            entries, keys = stacks[path.pop()]
            entries.pop()
            keys.pop()
            continue
        p = _pair_of(notes, node.token)
        if p not in stacks:
            stacks[p] = ([], [])
        entries, keys = stacks[p]
        pv = prot[node.token]
        if entries:
            idx = bisect.bisect_left(keys, -pv)
            if idx < len(entries) and entries[idx][3] == pv:
                a = entries[idx]
                cand = (a[0], a[1], -depth, pre, a[2], node.token)
                if best is None or cand < best:
                    best = cand
            if collect_all:
                candidates.append((node.token, entries[-1][2], entries[0][2]))
        entries.append((depth, pre, node.token, pv))
        keys.append(-pv)
        path.append(p)
        pre += 1
        stack.append((node, depth, True))
        for c in reversed(node.children):
            stack.append((c, depth + 1, False))
    return best, candidates


def _path_pair_stats(t: Node, notes: dict[int, NodeAnnotation]) -> int:
    """eta1: maximum number of distinct (delta1, delta2) pairs on a root-leaf path."""
    eta = 0
    counts: dict[tuple, int] = {}
    distinct = 0
    path: list[tuple] = []
    stack: list[tuple[Node, bool]] = [(t, False)]
    while stack:
        node, exiting = stack.pop()
        if exiting:
            p = path.pop()
            counts[p] -= 1
            if counts[p] == 0:
                distinct -= 1
        else:
            p = _pair_of(notes, node.token)
            if counts.get(p, 0) == 0:
                distinct += 1
            counts[p] = counts.get(p, 0) + 1
            path.append(p)
            eta = max(eta, distinct)
            stack.append((node, True))
            for c in reversed(node.children):
                stack.append((c, False))
    return eta


def _node_prefix_pairs(ann: Annotator, aut: TreeAutomaton, node: Node,
                       notes: dict[int, NodeAnnotation]) -> list[tuple]:
    op = ann.spec.ops[node.symbol]
    fps = tuple(notes[c.token].delta1 for c in node.children)
    chis = ann.prefix_classes(op, fps)
    hs = aut.horizontal_prefixes(node.symbol, [notes[c.token].delta2 for c in node.children])
    return list(zip(chis, hs))


def _eta2(t: Node, ann: Annotator, aut: TreeAutomaton,
          notes: dict[int, NodeAnnotation]) -> int:
    eta = 0
    for node in post_order(t):
        if node.is_leaf or ann.spec.ops[node.symbol].ranked:
            continue
        pairs = _node_prefix_pairs(ann, aut, node, notes)
        eta = max(eta, len(set(pairs)))
    return eta


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class ReductionReport:
    operation: str
    mode: str
    rank: int
    nodes_before: int
    nodes_after: int
    eval_size_before: int
    eval_size_after: int
    height_before: int
    height_after: int
    degree_before: int
    degree_after: int
    splices: int
    eta1: int
    eta2: int
    protected_count: int
    automaton_accepted: bool
    delta1_preserved: bool
    embedding_checked: bool
    embedding_ok: bool | None
    oracle_checked: bool
    oracle_equivalent: bool | None

    def all_flags_ok(self) -> bool:
        return (self.automaton_accepted and self.delta1_preserved
                and self.embedding_ok is not False
                and self.oracle_equivalent is not False)


def _certify(op_name: str, t_before: Node, t_after: Node, spec: AlphabetSpec,
             ann: Annotator, aut: TreeAutomaton, protected: frozenset[int],
             splices: int, config: RunConfig) -> ReductionReport:
    notes_before = ann.annotate(t_before, aut)
    notes_after = ann.annotate(t_after, aut)
    sizes_before = eval_sizes(t_before, spec)
    sizes_after = eval_sizes(t_after, spec)
    size_b, size_a = sizes_before[t_before.token], sizes_after[t_after.token]
    run_after = aut.run(t_after)
    d1_before = notes_before[t_before.token].delta1
    d1_after = notes_after[t_after.token].delta1
    embedding_checked = size_b <= _EMBED_CHECK_LIMIT and size_a <= _EMBED_CHECK_LIMIT
    embedding_ok: bool | None = None
    oracle_checked = False
    oracle_equivalent: bool | None = None
    if embedding_checked:
        big = evaluate(t_before, spec, validate=False).structure
        small = evaluate(t_after, spec, validate=False).structure
        lo, hi = (small, big) if small.size <= big.size else (big, small)
        embedding_ok = _embeds_literally(lo, hi, spec)
        cap = config.oracle_cap(ann.mode)
        if big.size <= cap and small.size <= cap:
            oracle_checked = True
            oracle_equivalent = (structure_type(big, ann.m, ann.mode, config=config)
                                 == structure_type(small, ann.m, ann.mode, config=config))
    return ReductionReport(
        operation=op_name, mode=ann.mode, rank=ann.m,
        nodes_before=count_nodes(t_before), nodes_after=count_nodes(t_after),
        eval_size_before=size_b, eval_size_after=size_a,
        height_before=tree_height(t_before), height_after=tree_height(t_after),
        degree_before=max_degree(t_before), degree_after=max_degree(t_after),
        splices=splices,
        eta1=_path_pair_stats(t_after, notes_after),
        eta2=_eta2(t_after, ann, aut, notes_after),
        protected_count=len(protected),
        automaton_accepted=run_after.accepted,
        delta1_preserved=d1_before == d1_after,
        embedding_checked=embedding_checked, embedding_ok=embedding_ok,
        oracle_checked=oracle_checked, oracle_equivalent=oracle_equivalent)


# ---------------------------------------------------------------------------
# height reduction
# ---------------------------------------------------------------------------

def _height_pass(t: Node, ann: Annotator, aut: TreeAutomaton,
                 protected: frozenset[int]) -> tuple[Node, int]:
    """Splice repeated-pair path segments until no eligible repeat remains."""
    splices = 0
    while True:
        notes = ann.annotate(t, aut)
        prot = _prot_counts(t, protected)
        best, _ = _vertical_scan(t, notes, prot)
        if best is None:
            break
        a_token, b_token = best[4], best[5]
        addrs = _resolve_addresses(t, {a_token, b_token})
        sub = node_at(t, addrs[b_token])
        t = subtree_replace(t, addrs[a_token], sub)
        splices += 1
    return t, splices


def height_reduce(t: Node, spec: AlphabetSpec, m: int, mode: str,
                  aut: TreeAutomaton | None = None,
                  protected: frozenset[int] = frozenset(), *,
                  config: RunConfig = DEFAULT_CONFIG,
                  annotator: Annotator | None = None) -> tuple[Node, ReductionReport]:
    """Shrink tree height by splicing t_{>=a} <- t_{>=b} whenever a strict
    ancestor a and descendant b carry the same (delta1, delta2) pair and the
    splice keeps every protected node."""
    validate_tree(t, spec)
    if aut is None:
        aut = default_validity_automaton(spec)
    if not aut.run(t).accepted:
        raise ValueError("input tree is not accepted by the automaton")
    _check_protected(t, protected)
    ann = annotator or Annotator(spec, m, mode, config)
    reduced, splices = _height_pass(t, ann, aut, protected)
    return reduced, _certify("height_reduce", t, reduced, spec, ann, aut,
                             protected, splices, config)


# ---------------------------------------------------------------------------
# degree reduction
# ---------------------------------------------------------------------------

def _check_degree_shapes(t: Node, spec: AlphabetSpec):
    for node in post_order(t):
        if node.is_leaf:
            continue
        op = spec.ops[node.symbol]
        if not op.ranked and op.rho > 2:
            raise UnsupportedShapeError(
                f"degree reduction handles unranked symbols with rho = 2 only; "
                f"{node.symbol} has rho = {op.rho}")


def _degree_pass(t: Node, ann: Annotator, aut: TreeAutomaton,
                 protected: frozenset[int]) -> tuple[Node, int]:
    """Drop child blocks between repeated (prefix class, h-state) pairs.

    Classes and states of every node are unchanged by construction, so one
    bottom-up rebuild suffices and annotations stay valid throughout.
    """
    notes = ann.annotate(t, aut)
    prot = _prot_counts(t, protected)
    splices = 0
    rebuilt: dict[int, Node] = {}
    for node in post_order(t):
        if node.is_leaf:
            rebuilt[node.token] = node
            continue
        kids = [rebuilt[c.token] for c in node.children]
        op = ann.spec.ops[node.symbol]
        if not op.ranked and op.rho == 2 and len(kids) > 2:
            while True:
                pairs = _node_prefix_pairs(ann, aut,
                                           Node(node.token, node.symbol, tuple(kids)), notes)
                r = len(kids)
                found = None
                for l in range(1, r):          # positions 1..r-1
                    for k in range(r - 1, l, -1):
                        if pairs[l - 1] == pairs[k - 1] and \
                                all(prot[c.token] == 0 for c in kids[l:k]):
                            found = (l, k)
                            break
                    if found:
                        break
                if not found:
                    break
                l, k = found
                del kids[l:k]
                splices += 1
        new_children = tuple(kids)
        if new_children == node.children:
            rebuilt[node.token] = node
        else:
            rebuilt[node.token] = Node(node.token, node.symbol, new_children)
    return rebuilt[t.token], splices


def degree_reduce(t: Node, spec: AlphabetSpec, m: int, mode: str,
                  aut: TreeAutomaton | None = None,
                  protected: frozenset[int] = frozenset(), *,
                  config: RunConfig = DEFAULT_CONFIG,
                  annotator: Annotator | None = None) -> tuple[Node, ReductionReport]:
    """Shrink node arities at unranked rho=2 symbols by removing child blocks
    between equal fold-prefix pairs (protected subtrees never removed)."""
    validate_tree(t, spec)
    _check_degree_shapes(t, spec)
    if aut is None:
        aut = default_validity_automaton(spec)
    if not aut.run(t).accepted:
        raise ValueError("input tree is not accepted by the automaton")
    _check_protected(t, protected)
    ann = annotator or Annotator(spec, m, mode, config)
    reduced, splices = _degree_pass(t, ann, aut, protected)
    return reduced, _certify("degree_reduce", t, reduced, spec, ann, aut,
                             protected, splices, config)


def _check_protected(t: Node, protected: frozenset[int]):
    if protected:
        tokens = {n.token for n in post_order(t)}
        missing = protected - tokens
        if missing:
            raise ValueError(f"protected node tokens not in tree: {sorted(missing)[:3]}")


def _alternate_reduce(t: Node, ann: Annotator, aut: TreeAutomaton,
                      protected: frozenset[int]) -> tuple[Node, int]:
    """Alternate height and degree passes until a fixpoint."""
    total = 0
    while True:
        before = count_nodes(t)
        t, s1 = _height_pass(t, ann, aut, protected)
        t, s2 = _degree_pass(t, ann, aut, protected)
        total += s1 + s2
        if count_nodes(t) >= before:
            break
    return t, total


def has_eligible_vertical_repeat(t: Node, spec: AlphabetSpec, m: int, mode: str,
                                 aut: TreeAutomaton | None = None,
                                 protected: frozenset[int] = frozenset(), *,
                                 config: RunConfig = DEFAULT_CONFIG,
                                 annotator: Annotator | None = None) -> bool:
    """True when some root-to-leaf path still carries a repeated (delta1,
    delta2) pair whose splice would keep every protected node."""
    if aut is None:
        aut = default_validity_automaton(spec)
    ann = annotator or Annotator(spec, m, mode, config)
    notes = ann.annotate(t, aut)
    best, _ = _vertical_scan(t, notes, _prot_counts(t, protected))
    return best is not None


def has_eligible_prefix_repeat(t: Node, spec: AlphabetSpec, m: int, mode: str,
                               aut: TreeAutomaton | None = None,
                               protected: frozenset[int] = frozenset(), *,
                               config: RunConfig = DEFAULT_CONFIG,
                               annotator: Annotator | None = None) -> bool:
    """True when some unranked rho=2 node still has equal prefix pairs at two
    positions below its arity, with a protection-free block between them."""
    if aut is None:
        aut = default_validity_automaton(spec)
    ann = annotator or Annotator(spec, m, mode, config)
    notes = ann.annotate(t, aut)
    prot = _prot_counts(t, protected)
    for node in post_order(t):
        if node.is_leaf:
            continue
        op = ann.spec.ops[node.symbol]
        if op.ranked or op.rho != 2 or len(node.children) <= 2:
            continue
        pairs = _node_prefix_pairs(ann, aut, node, notes)
        r = len(node.children)
        for l in range(1, r - 1):
            for k in range(l + 1, r):
                if pairs[l - 1] == pairs[k - 1] and \
                        all(prot[c.token] == 0 for c in node.children[l:k]):
                    return True
    return False


# ---------------------------------------------------------------------------
# representative shrinking (used by the composition tables on cap overflow)
# ---------------------------------------------------------------------------

def shrink_representative(ann: Annotator, fp: TypeFingerprint) -> bool:
    """Try to find a smaller representative for class fp by reducing its build
    tree. Build trees may contain partial applications (relaxed arities), so
    tree-language membership is irrelevant and a trivial automaton is used.
    Returns True when a strictly smaller representative was registered."""
    tree = ann.rep_trees.get(fp)
    if tree is None or tree.is_leaf:
        return False
    aut = trivial_automaton(ann.spec)
    reduced, _ = _alternate_reduce(tree, ann, aut, frozenset())
    if count_nodes(reduced) >= count_nodes(tree):
        return False
    res = evaluate(reduced, ann.spec, validate=False)
    from .optrees import Value
    val = Value(res.structure, res.anchors)
    current = ann.reps[fp]
    if val.structure.size >= current.structure.size:
        return False
    if val.structure.size > ann.config.oracle_cap(ann.mode):
        return False
    if ann.value_fp(val) != fp:
        # a congruence violation would surface here; keep the old representative
        return False
    ann.register(fp, val, reduced)
    return True


# ---------------------------------------------------------------------------
# kernel extraction
# ---------------------------------------------------------------------------

@dataclass
class KernelCertificate:
    mode: str
    rank: int
    w_indices: dict
    tree: Node
    automaton_accepted: bool
    literal_substructure: bool
    w_contained: bool
    size_before: int
    size_after: int
    size_bound: int
    size_within_bound: bool
    delta1_preserved: bool
    oracle_checked: bool
    oracle_equivalent: bool | None
    reports: list = field(default_factory=list)

    def all_conditions_ok(self) -> bool:
        return (self.automaton_accepted and self.literal_substructure
                and self.w_contained and self.size_within_bound
                and self.delta1_preserved
                and self.oracle_equivalent is not False)


def _expand_for_w(t: Node, spec: AlphabetSpec, aut: TreeAutomaton, w_elements: list,
                  prov: dict) -> tuple[Node, AlphabetSpec, TreeAutomaton, frozenset[int]]:
    """Mark W through fresh unary relations _W1.._Wk on rebound leaves, and
    return the rebuilt tree, expanded alphabet/automaton, and protected tokens.

    W elements introduced by internal tree-building nodes cannot be rebound
    through a leaf, so they are protected without a mark.
    """
    w_names = tuple(f"_W{i}" for i in range(1, len(w_elements) + 1))
    voc2 = spec.voc.with_unary(*w_names)
    leaves2 = {
        name: Structure(voc2, s.universe,
                        {**{rn: s.relations[rn] for rn, _ in spec.voc.relations},
                         **{wn: frozenset() for wn in w_names}},
                        s.labels)
        for name, s in spec.leaves.items()}
    protected = frozenset(prov[w] for w in w_elements)
    by_token: dict[int, list[tuple[int, object]]] = {}
    for i, w in enumerate(w_elements, start=1):
        by_token.setdefault(prov[w], []).append((i, w))
    leaf_map = dict(aut.leaf_states)
    extra_leaf_states = []
    replacements: dict[int, Node] = {}
    for node in post_order(t):
        if node.token not in by_token or not node.is_leaf:
            continue
        marks = by_token[node.token]
        base = leaves2[node.symbol]
        rels = {rn: ts for rn, ts in base.relations.items()}
        for i, w in marks:
            local = w[1]
            if not base.has_element(local):
                raise ValueError(f"element {w!r} does not belong to leaf {node.symbol}")
            rels[f"_W{i}"] = frozenset({(local,)})
        fresh_name = "_w" + "_".join(str(i) for i, _ in sorted(marks))
        if fresh_name in leaves2:
            fresh_name += f"_{node.token}"
        leaves2[fresh_name] = Structure(voc2, base.universe, rels, base.labels)
        if node.symbol in leaf_map:
            extra_leaf_states.append((fresh_name, leaf_map[node.symbol]))
        replacements[node.token] = Node(node.token, fresh_name)
    # rebuild the tree with the renamed leaves, preserving every token
    rebuilt: dict[int, Node] = {}
    for node in post_order(t):
        if node.is_leaf:
            rebuilt[node.token] = replacements.get(node.token, node)
        else:
            kids = tuple(rebuilt[c.token] for c in node.children)
            rebuilt[node.token] = node if kids == node.children else Node(node.token, node.symbol, kids)
    spec2 = AlphabetSpec(spec.kind, voc2, leaves2, spec.ops, word_order=spec.word_order)
    aut2 = TreeAutomaton(aut.states, aut.accepting,
                         aut.leaf_states + tuple(extra_leaf_states), aut.hdfas)
    return rebuilt[t.token], spec2, aut2, protected


def _empirical_size_bound(eta1: int, eta2: int, n_protected: int,
                          spec: AlphabetSpec, t: Node) -> int:
    """Size bound from realized pair counts: after reduction, any root-leaf
    path has at most (|P|+1)*eta1 nodes and any node at most
    (|P|+1)*(eta2+1) children (ranked arities taken as-is)."""
    ranked_max = max((spec.ops[n.symbol].rho for n in post_order(t)
                      if not n.is_leaf and spec.ops[n.symbol].ranked), default=0)
    height_bound = max(1, (n_protected + 1) * max(eta1, 1))
    degree_bound = max(2, (n_protected + 1) * (max(eta2, 1) + 1), ranked_max)
    leaf_max = max((s.size for s in spec.leaves.values()), default=1)
    nodes_bound = degree_bound ** (height_bound + 1)
    return nodes_bound * (leaf_max + 1)


def kernelize(t: Node, spec: AlphabetSpec, m: int, mode: str,
              aut: TreeAutomaton | None = None, w: frozenset = frozenset(), *,
              config: RunConfig = DEFAULT_CONFIG) -> tuple[Structure, KernelCertificate]:
    """Extract a small substructure B of A = evaluate(t) with B equivalent to A
    at rank m, W inside B, and the reduced tree still in the automaton's
    language. Returns (B, certificate)."""
    validate_tree(t, spec)
    if aut is None:
        aut = default_validity_automaton(spec)
    if not aut.run(t).accepted:
        raise ValueError("input tree is not accepted by the automaton")
    res = evaluate(t, spec)
    a_struct = res.structure
    order = {e: i for i, e in enumerate(a_struct.universe)}
    for e in w:
        if e not in order:
            raise ValueError(f"protected element {e!r} is not in the evaluated universe")
    w_elements = sorted(w, key=order.get)
    w_indices = {e: i for i, e in enumerate(w_elements, start=1)}

    if w_elements:
        t2, spec2, aut2, protected = _expand_for_w(t, spec, aut, w_elements, res.provenance)
    else:
        t2, spec2, aut2, protected = t, spec, aut, frozenset()
    _check_degree_shapes(t2, spec2)

    ann = Annotator(spec2, m, mode, config)
    notes_before = ann.annotate(t2, aut2)
    d1_before = notes_before[t2.token].delta1

    reduced, splices = _alternate_reduce(t2, ann, aut2, protected)

    notes_after = ann.annotate(reduced, aut2)
    run_after = aut2.run(reduced)
    b_expanded = evaluate(reduced, spec2, validate=False).structure
    b_struct = Structure(spec.voc, b_expanded.universe,
                         {rn: b_expanded.relations[rn] for rn, _ in spec.voc.relations},
                         b_expanded.labels)

    literal = _embeds_literally(b_struct, a_struct, spec)
    w_contained = all(e in set(b_struct.universe) for e in w_elements)
    eta1 = _path_pair_stats(reduced, notes_after)
    eta2 = _eta2(reduced, ann, aut2, notes_after)
    bound = _empirical_size_bound(eta1, eta2, len(protected), spec2, reduced)
    cap = config.oracle_cap(mode)
    oracle_checked = a_struct.size <= cap and b_struct.size <= cap
    oracle_equivalent: bool | None = None
    if oracle_checked:
        oracle_equivalent = (structure_type(a_struct, m, mode, config=config)
                             == structure_type(b_struct, m, mode, config=config))
    cert = KernelCertificate(
        mode=mode, rank=m, w_indices=w_indices, tree=reduced,
        automaton_accepted=run_after.accepted,
        literal_substructure=literal,
        w_contained=w_contained,
        size_before=a_struct.size, size_after=b_struct.size,
        size_bound=bound, size_within_bound=b_struct.size <= bound,
        delta1_preserved=notes_after[reduced.token].delta1 == d1_before,
        oracle_checked=oracle_checked, oracle_equivalent=oracle_equivalent,
        reports=[("splices", splices), ("eta1", eta1), ("eta2", eta2)])
    return b_struct, cert


# ---------------------------------------------------------------------------
# scale generation (logical fractals)
# ---------------------------------------------------------------------------

@dataclass
class ScaleReport:
    mode: str
    rank: int
    direction: str
    size_before: int
    size_after: int
    interval: tuple[int, int]
    steps: int
    granularity: int
    automaton_accepted: bool
    delta1_preserved: bool
    embedding_checked: bool
    embedding_ok: bool | None
    oracle_checked: bool
    oracle_equivalent: bool | None

    def all_flags_ok(self) -> bool:
        return (self.automaton_accepted and self.delta1_preserved
                and self.embedding_ok is not False
                and self.oracle_equivalent is not False)


def _horizontal_candidates(t: Node, ann: Annotator, aut: TreeAutomaton,
                           notes: dict[int, NodeAnnotation], sizes: dict[int, int],
                           prot: dict[int, int], *, for_removal: bool):
    """(amount, node_token, l, k) for block moves at unranked rho=2 nodes.
    Pump blocks may end at the last position; removal blocks may not and must
    be free of protected nodes."""
    out = []
    for node in post_order(t):
        if node.is_leaf:
            continue
        op = ann.spec.ops[node.symbol]
        if op.ranked or op.rho != 2 or len(node.children) < 2:
            continue
        pairs = _node_prefix_pairs(ann, aut, node, notes)
        r = len(node.children)
        top = r - 1 if for_removal else r
        for l in range(1, top):
            for k in range(l + 1, top + 1):
                if pairs[l - 1] != pairs[k - 1]:
                    continue
                block = node.children[l:k]
                if for_removal and any(prot[c.token] for c in block):
                    continue
                amount = sum(sizes[c.token] for c in block)
                if amount > 0:
                    out.append((amount, node.token, l, k))
    return out


def _apply_vertical_pump(t: Node, a_token: int, b_token: int, j: int) -> Node:
    addrs = _resolve_addresses(t, {a_token, b_token})
    addr_a, addr_b = addrs[a_token], addrs[b_token]
    rel = addr_b[len(addr_a):]
    context = node_at(t, addr_a)
    wrapped = context
    for _ in range(j):
        wrapped = subtree_replace(clone_fresh(context), rel, wrapped)
    return subtree_replace(t, addr_a, wrapped)


def _apply_horizontal_pump(t: Node, node_token: int, l: int, k: int, j: int) -> Node:
    addr = _resolve_addresses(t, {node_token})[node_token]
    node = node_at(t, addr)
    block = node.children[l:k]
    copies = []
    for _ in range(j):
        copies.extend(clone_fresh(c) for c in block)
    new = Node(node.token, node.symbol,
               node.children[:k] + tuple(copies) + node.children[k:])
    return subtree_replace(t, addr, new)


def _apply_horizontal_removal(t: Node, node_token: int, l: int, k: int) -> Node:
    addr = _resolve_addresses(t, {node_token})[node_token]
    node = node_at(t, addr)
    new = Node(node.token, node.symbol, node.children[:l] + node.children[k:])
    return subtree_replace(t, addr, new)


def scale_generate(t: Node, spec: AlphabetSpec, m: int, mode: str,
                   lo: int, hi: int, aut: TreeAutomaton | None = None,
                   protected: frozenset[int] = frozenset(), *,
                   config: RunConfig = DEFAULT_CONFIG,
                   annotator: Annotator | None = None) -> tuple[Node, ScaleReport]:
    """Produce t' with evaluate(t') equivalent to evaluate(t) at rank m and
    |evaluate(t')| inside [lo, hi], by pumping repeated contexts / child blocks
    (upward) or splicing them out (downward).

    Raises InfeasibleScaleError with nearby achievable sizes when no pump or
    splice schedule can land in the interval.
    """
    validate_tree(t, spec)
    if lo < 0 or lo > hi:
        raise ValueError(f"invalid interval [{lo}, {hi}]")
    if aut is None:
        aut = default_validity_automaton(spec)
    if not aut.run(t).accepted:
        raise ValueError("input tree is not accepted by the automaton")
    _check_protected(t, protected)
    ann = annotator or Annotator(spec, m, mode, config)
    t0 = t
    size0 = eval_sizes(t, spec)[t.token]
    d1_before = ann.annotate(t, aut)[t.token].delta1

    steps = 0
    granularity = 0
    if size0 < lo:
        direction = "up"
        t, steps, granularity = _scale_up(t, ann, aut, lo, hi, size0)
    elif size0 > hi:
        direction = "down"
        t, steps, granularity = _scale_down(t, ann, aut, protected, lo, hi, size0)
    else:
        direction = "none"

    size1 = eval_sizes(t, spec)[t.token]
    notes_after = ann.annotate(t, aut)
    run_after = aut.run(t)
    embedding_checked = size0 <= _EMBED_CHECK_LIMIT and size1 <= _EMBED_CHECK_LIMIT
    embedding_ok: bool | None = None
    oracle_checked = False
    oracle_equivalent: bool | None = None
    if embedding_checked:
        big = evaluate(t0, spec, validate=False).structure
        new = evaluate(t, spec, validate=False).structure
        lo_s, hi_s = (new, big) if new.size <= big.size else (big, new)
        embedding_ok = _embeds_literally(lo_s, hi_s, spec)
        cap = config.oracle_cap(mode)
        if big.size <= cap and new.size <= cap:
            oracle_checked = True
            oracle_equivalent = (structure_type(big, m, mode, config=config)
                                 == structure_type(new, m, mode, config=config))
    report = ScaleReport(
        mode=mode, rank=m, direction=direction,
        size_before=size0, size_after=size1, interval=(lo, hi),
        steps=steps, granularity=granularity,
        automaton_accepted=run_after.accepted,
        delta1_preserved=notes_after[t.token].delta1 == d1_before,
        embedding_checked=embedding_checked, embedding_ok=embedding_ok,
        oracle_checked=oracle_checked, oracle_equivalent=oracle_equivalent)
    return t, report


def _scale_up(t: Node, ann: Annotator, aut: TreeAutomaton,
              lo: int, hi: int, size0: int) -> tuple[Node, int, int]:
    notes = ann.annotate(t, aut)
    sizes = eval_sizes(t, ann.spec)
    prot = _prot_counts(t, frozenset())
    _, verticals = _vertical_scan(t, notes, prot, collect_all=True)
    candidates: list[tuple[int, tuple]] = []
    for b_token, near_a, far_a in verticals:
        for a_token in {near_a, far_a}:
            inc = sizes[a_token] - sizes[b_token]
            if inc > 0:
                candidates.append((inc, ("v", a_token, b_token)))
    for amount, node_token, l, k in _horizontal_candidates(
            t, ann, aut, notes, sizes, prot, for_removal=False):
        candidates.append((amount, ("h", node_token, l, k)))
    candidates.sort(key=lambda c: (c[0], c[1]))
    achievable: set[int] = {size0}
    for inc, spot in candidates:
        j_min = -(-(lo - size0) // inc)
        if size0 + j_min * inc <= hi:
            if spot[0] == "v":
                return _apply_vertical_pump(t, spot[1], spot[2], j_min), j_min, inc
            return _apply_horizontal_pump(t, spot[1], spot[2], spot[3], j_min), j_min, inc
        achievable.add(size0 + j_min * inc)
        achievable.add(size0 + max(j_min - 1, 0) * inc)
    raise InfeasibleScaleError(
        f"no pump schedule reaches [{lo}, {hi}] from size {size0}",
        tuple(achievable))


def _scale_down(t: Node, ann: Annotator, aut: TreeAutomaton,
                protected: frozenset[int], lo: int, hi: int,
                size0: int) -> tuple[Node, int, int]:
    steps = 0
    granularity = 0
    size = size0
    while size > hi:
        notes = ann.annotate(t, aut)
        sizes = eval_sizes(t, ann.spec)
        prot = _prot_counts(t, protected)
        _, verticals = _vertical_scan(t, notes, prot, collect_all=True)
        candidates: list[tuple[int, tuple]] = []
        for b_token, near_a, far_a in verticals:
            for a_token in {near_a, far_a}:
                dec = sizes[a_token] - sizes[b_token]
                # splice removes t_a minus t_b: protected nodes must survive
                if dec > 0 and prot[a_token] == prot[b_token]:
                    candidates.append((dec, ("v", a_token, b_token)))
        for amount, node_token, l, k in _horizontal_candidates(
                t, ann, aut, notes, sizes, prot, for_removal=True):
            candidates.append((amount, ("h", node_token, l, k)))
        if not candidates:
            raise InfeasibleScaleError(
                f"no eligible splice below size {size}; interval [{lo}, {hi}] unreachable",
                (size,))
        landing = [c for c in candidates if lo <= size - c[0] <= hi]
        if landing:
            dec, spot = max(landing, key=lambda c: (c[0], c[1]))
        else:
            progress = [c for c in candidates if size - c[0] > hi]
            if not progress:
                best_small = min(c[0] for c in candidates)
                raise InfeasibleScaleError(
                    f"every splice overshoots [{lo}, {hi}] from size {size}",
                    (size, size - best_small))
            dec, spot = max(progress, key=lambda c: (c[0], c[1]))
        if spot[0] == "v":
            addrs = _resolve_addresses(t, {spot[1], spot[2]})
            t = subtree_replace(t, addrs[spot[1]], node_at(t, addrs[spot[2]]))
        else:
            t = _apply_horizontal_removal(t, spot[1], spot[2], spot[3])
        size -= dec
        steps += 1
        granularity = dec
    return t, steps, granularity
