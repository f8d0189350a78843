"""Fixed alphabets and seeded corpora for tests and the CLI corpus generator.

Everything here is deterministic given the seed; the acceptance suite freezes
against these generators.
"""

from __future__ import annotations

import random

from .errors import BudgetError
from .optrees import (AlphabetSpec, CographJoin, DisjointUnion, Node, OpSymbol,
                      TreeBuild, WordConcat, eval_sizes, evaluate, leaf, op_node)
from .structures import Structure, Vocabulary

GRAPH_VOC = Vocabulary((("E", 2),), 2)
WORD_VOC = Vocabulary((("succ", 2),), 2)
ORDER_WORD_VOC = Vocabulary((("lt", 2),), 2)
TREE_VOC = Vocabulary((("child", 2), ("nextSibling", 2)), 2)


def _vertex(label: int) -> Structure:
    return Structure(GRAPH_VOC, (0,), {"E": frozenset()}, {0: label})


def _edge_pair(l1: int, l2: int) -> Structure:
    return Structure(GRAPH_VOC, (0, 1), {"E": frozenset({(0, 1), (1, 0)})},
                     {0: l1, 1: l2})


def union_alphabet() -> AlphabetSpec:
    """Vertex/edge leaves with two labels under binary-unranked disjoint union."""
    return AlphabetSpec(
        "graph", GRAPH_VOC,
        {"a": _vertex(1), "b": _vertex(2), "e": _edge_pair(1, 2)},
        {"union": OpSymbol("union", DisjointUnion(), 2, False)})


def cograph_alphabet() -> AlphabetSpec:
    """Two-label cograph operators: plain union, complete join, and the
    label-sensitive join that connects differently labeled elements only."""
    return AlphabetSpec(
        "graph", GRAPH_VOC,
        {"a": _vertex(1), "b": _vertex(2)},
        {"union": OpSymbol("union", DisjointUnion(), 2, False),
         "join": OpSymbol("join", CographJoin(((1, 1), (1, 1))), 2, False),
         "xjoin": OpSymbol("xjoin", CographJoin(((0, 1), (1, 0))), 2, False)})


def word_alphabet(*, order: bool = False) -> AlphabetSpec:
    """Two-letter words under concatenation; order=True uses the linear-order
    encoding (lt) instead of successor."""
    voc = ORDER_WORD_VOC if order else WORD_VOC
    rel = "lt" if order else "succ"
    la = Structure(voc, (0,), {rel: frozenset()}, {0: 1})
    lb = Structure(voc, (0,), {rel: frozenset()}, {0: 2})
    return AlphabetSpec("word", voc, {"a": la, "b": lb},
                        {"cat": OpSymbol("cat", WordConcat(), 2, False)},
                        word_order=order)


def tree_alphabet() -> AlphabetSpec:
    """Ordered-tree builders: unranked attach ops for both root labels plus a
    ranked binary variant (exercises full composition tables)."""
    single_a = Structure(TREE_VOC, (0,), {"child": frozenset(), "nextSibling": frozenset()}, {0: 1})
    single_b = Structure(TREE_VOC, (0,), {"child": frozenset(), "nextSibling": frozenset()}, {0: 2})
    return AlphabetSpec(
        "tree", TREE_VOC,
        {"a": single_a, "b": single_b},
        {"builda": OpSymbol("builda", TreeBuild(1), 2, False),
         "buildb": OpSymbol("buildb", TreeBuild(2), 2, False),
         "pair": OpSymbol("pair", TreeBuild(1), 2, True)})


def standard_alphabets() -> dict[str, AlphabetSpec]:
    return {"union": union_alphabet(), "cograph": cograph_alphabet(),
            "word": word_alphabet(), "tree": tree_alphabet()}


# ---------------------------------------------------------------------------
# random generation
# ---------------------------------------------------------------------------

def random_tree(spec: AlphabetSpec, rng: random.Random, *,
                max_leaves: int = 6, max_eval_size: int | None = None) -> Node:
    """Random well-formed op tree with at most max_leaves leaves. When
    max_eval_size is set, retries with fewer leaves until the evaluated
    structure fits; single leaves always fit their own size."""
    leaf_names = sorted(spec.leaves)
    op_names = sorted(spec.ops)
    budget = max(1, max_leaves)
    for _ in range(40):
        t = _random_tree_once(spec, rng, leaf_names, op_names, budget)
        if max_eval_size is None or eval_sizes(t, spec)[t.token] <= max_eval_size:
            return t
        budget = max(1, budget - 1)
    return leaf(rng.choice(leaf_names))


def _random_tree_once(spec, rng, leaf_names, op_names, max_leaves) -> Node:
    n = rng.randint(1, max_leaves)
    forest = [leaf(rng.choice(leaf_names)) for _ in range(n)]
    guard = 0
    while len(forest) > 1 and guard < 200:
        guard += 1
        name = rng.choice(op_names)
        op = spec.ops[name]
        if op.ranked:
            if op.rho > len(forest):
                continue
            arity = op.rho
        else:
            allowed = [a for a in range(op.rho, len(forest) + 1)
                       if op.allows_arity(a)]
            if not allowed:
                continue
            arity = rng.choice(allowed[:3])
        picked = [forest.pop(rng.randrange(len(forest))) for _ in range(arity)]
        forest.append(op_node(name, *picked))
    while len(forest) > 1:
        # no op could consume the rest; fold pairs with the first binary op
        name = next(n2 for n2 in op_names if spec.ops[n2].allows_arity(2))
        b = forest.pop()
        a = forest.pop()
        forest.append(op_node(name, a, b))
    return forest[0]


def left_comb(spec: AlphabetSpec, opname: str, leaf_name: str, leaves: int) -> Node:
    """(op (op (... ) x) x) with the given leaf repeated; `leaves` >= 1."""
    t = leaf(leaf_name)
    for _ in range(leaves - 1):
        t = op_node(opname, t, leaf(leaf_name))
    return t


def flat_node(spec: AlphabetSpec, opname: str, leaf_name: str, arity: int) -> Node:
    return op_node(opname, *[leaf(leaf_name) for _ in range(arity)])


# ---------------------------------------------------------------------------
# corpora
# ---------------------------------------------------------------------------

def fvc_corpus(seed: int = 0, count: int = 500, *,
               max_leaves: int = 10, max_eval_size: int = 8) -> list[tuple[str, AlphabetSpec, Node]]:
    """Seeded op trees cycling over the four standard alphabets; every
    evaluated structure fits the oracle caps."""
    rng = random.Random(seed)
    specs = standard_alphabets()
    names = sorted(specs)
    out = []
    for i in range(count):
        name = names[i % len(names)]
        spec = specs[name]
        t = random_tree(spec, rng, max_leaves=max_leaves, max_eval_size=max_eval_size)
        out.append((name, spec, t))
    return out


def kernel_corpus(seed: int = 0, count: int = 200, *,
                  k_values: tuple[int, ...] = (0, 1, 2),
                  oracle_cap: int = 10) -> list[tuple[str, AlphabetSpec, Node, frozenset]]:
    """Seeded kernelization instances (alphabet name, spec, tree, W) with
    |W| cycling over k_values. Most instances stay under the oracle cap; a
    tail of larger combs exercises the compositional-only path."""
    rng = random.Random(seed)
    specs = {"union": union_alphabet(), "cograph": cograph_alphabet(),
             "oword": word_alphabet(order=True), "tree": tree_alphabet()}
    names = sorted(specs)
    out = []
    for i in range(count):
        name = names[i % len(names)]
        spec = specs[name]
        k = k_values[i % len(k_values)]
        big = i % 8 == 7
        if big:
            opname = {"union": "union", "cograph": "union",
                      "oword": "cat", "tree": "builda"}[name]
            t = left_comb(spec, opname, sorted(spec.leaves)[0], rng.randint(12, 20))
        else:
            t = random_tree(spec, rng, max_leaves=6,
                            max_eval_size=max(k + 1, oracle_cap - 2))
        universe = evaluate(t, spec).structure.universe
        if len(universe) < k:
            t = left_comb(spec, sorted(spec.ops)[0], sorted(spec.leaves)[0], k + 2)
            universe = evaluate(t, spec).structure.universe
        w = frozenset(rng.sample(list(universe), k)) if k else frozenset()
        out.append((name, spec, t, w))
    return out


def scale_corpus(seed: int = 0, count: int = 50) -> list[tuple[str, AlphabetSpec, Node, int, int]]:
    """Seeded scaling instances (name, spec, tree, lo, hi). Combs over uniform
    leaves guarantee pumpable/splicable repeats; window width is at least the
    largest leaf size, so some pump schedule always lands inside."""
    rng = random.Random(seed)
    specs = {"union": union_alphabet(), "cograph": cograph_alphabet(),
             "word": word_alphabet(), "oword": word_alphabet(order=True),
             "tree": tree_alphabet()}
    names = sorted(specs)
    combs = {"cograph": ("join", "a"), "oword": ("cat", "a"),
             "tree": ("builda", "a"), "union": ("union", "a"), "word": ("cat", "b")}
    out = []
    for i in range(count):
        name = names[i % len(names)]
        spec = specs[name]
        opname, leaf_name = combs[name]
        width = max(s.size for s in spec.leaves.values()) + rng.randint(1, 3)
        direction = ("up", "down", "none")[i % 3]
        if direction == "up":
            # rank-2 repeats on word combs need length past 2^2, so start at 5
            size = rng.randint(5, 8)
            t = left_comb(spec, opname, leaf_name, size)
            base = eval_sizes(t, spec)[t.token]
            lo = base + rng.randint(2, 10)
        elif direction == "down":
            size = rng.randint(14, 24)
            t = left_comb(spec, opname, leaf_name, size)
            base = eval_sizes(t, spec)[t.token]
            lo = max(6, base // 3)
        else:
            size = rng.randint(3, 8)
            t = left_comb(spec, opname, leaf_name, size)
            base = eval_sizes(t, spec)[t.token]
            lo = max(1, base - 1)
        out.append((name, spec, t, lo, lo + width))
    return out


# ---------------------------------------------------------------------------
# random sentences
# ---------------------------------------------------------------------------

def random_sentence(rng: random.Random, voc: Vocabulary, max_rank: int,
                    mode: str = "fo", *, max_atoms: int = 6) -> str:
    """Random closed formula text of quantifier rank <= max_rank (and at least
    one), parseable by parse_formula(voc, mode)."""
    counter = [0]
    set_counter = [0]

    def atom(fo_vars, set_vars):
        choices = []
        for name, arity in voc.relations:
            if len(fo_vars) >= 1:
                args = [rng.choice(fo_vars) for _ in range(arity)]
                choices.append(f"{name}({', '.join(args)})")
        for li in range(1, voc.label_count + 1):
            if fo_vars:
                choices.append(f"L{li}({rng.choice(fo_vars)})")
        if len(fo_vars) >= 2:
            choices.append(f"{rng.choice(fo_vars)} = {rng.choice(fo_vars)}")
        if mode == "mso" and set_vars and fo_vars:
            choices.append(f"{rng.choice(set_vars)}({rng.choice(fo_vars)})")
        return rng.choice(choices) if choices else "~(true)"

    def build(rank, fo_vars, set_vars, depth):
        need_var = not fo_vars
        if rank <= 0 or (not need_var and depth > 3):
            f = atom(fo_vars, set_vars)
            if rng.random() < 0.4 and fo_vars:
                g = atom(fo_vars, set_vars)
                con = rng.choice(["&", "|", "->"])
                return f"({f} {con} {g})"
            if rng.random() < 0.2:
                return f"~{f}" if f.startswith(("L", "X")) else f"~({f})"
            return f
        roll = rng.random()
        if need_var or roll < 0.55:
            q = rng.choice(["exists", "forall"])
            if mode == "mso" and not need_var and rng.random() < 0.3:
                set_counter[0] += 1
                v = f"X{set_counter[0]}"
                body = build(rank - 1, fo_vars, set_vars + [v], depth + 1)
                return f"{q}Set {v}. {body}"
            counter[0] += 1
            v = f"x{counter[0]}"
            body = build(rank - 1, fo_vars + [v], set_vars, depth + 1)
            return f"{q} {v}. {body}"
        if roll < 0.8:
            con = rng.choice(["&", "|", "->"])
            left = build(rank - 1 if rng.random() < 0.5 else rank, fo_vars, set_vars, depth + 1)
            right = build(rank - 1, fo_vars, set_vars, depth + 1)
            return f"(({left}) {con} ({right}))"
        return f"~({build(rank - 1, fo_vars, set_vars, depth + 1)})"

    rank = rng.randint(1, max_rank)
    return build(rank, [], [], 0)
