"""Operation trees: parsing, validation, evaluation semantics, alphabet files."""

import pytest

from treequiv.errors import ArityError, ParseError
from treequiv.optrees import (AlphabetSpec, CustomOp, DisjointUnion, OpSymbol,
                              clone_fresh, count_nodes, eval_sizes, evaluate,
                              format_alphabet, format_tree, instantiate_leaf,
                              iter_nodes, leaf, leaf_count, max_degree,
                              node_at, op_node, parse_alphabet, parse_tree,
                              post_order, subtree_replace, to_order_encoding,
                              tree_height, validate_tree)
from treequiv.structures import Structure, Vocabulary, canonical_key


def shape(t):
    return [(addr, n.symbol) for addr, n in iter_nodes(t)]


def test_parse_format_roundtrip(specs):
    texts = {
        "union": "(union (leaf a) (union (leaf b) (leaf e)))",
        "cograph": "(xjoin (join (leaf a) (leaf b)) (leaf a))",
        "word": "(cat (leaf a) (cat (leaf b) (leaf a)))",
        "tree": "(builda (leaf a) (pair (leaf b) (leaf a)))",
    }
    for name, text in texts.items():
        t = parse_tree(text, specs[name])
        assert format_tree(t) == text
        assert shape(parse_tree(format_tree(t), specs[name])) == shape(t)


def test_parse_comments_and_whitespace(specs):
    t = parse_tree("# header\n(union\n  (leaf a) # first\n  (leaf b))\n",
                   specs["union"])
    assert format_tree(t) == "(union (leaf a) (leaf b))"


def test_unranked_arity_flexible(specs):
    t = parse_tree("(union (leaf a) (leaf a) (leaf a))", specs["union"])
    assert len(t.children) == 3
    assert evaluate(t, specs["union"]).structure.size == 3


def test_ranked_arity_strict(specs):
    with pytest.raises(ArityError):
        parse_tree("(pair (leaf a) (leaf b) (leaf a))", specs["tree"])
    with pytest.raises(ArityError):
        parse_tree("(pair (leaf a))", specs["tree"])


def test_parse_errors(specs):
    spec = specs["union"]
    for bad in ["(union (leaf a) (leaf q))",       # unknown leaf
                "(frob (leaf a) (leaf b))",         # unknown op
                "(union (leaf a) (leaf b)",         # unbalanced
                "(union (leaf a) (leaf b)) extra",  # trailing
                "leaf a",                           # no parens
                "(union (leaf a))"]:                # arity below rho
        with pytest.raises((ParseError, ArityError)):
            parse_tree(bad, spec)


def test_validate_rejects_shared_nodes(specs):
    shared = leaf("a")
    t = op_node("union", shared, shared)
    with pytest.raises(ValueError, match="token"):
        validate_tree(t, specs["union"])


def test_validate_relaxed_allows_partial(specs):
    t = op_node("union", leaf("a"))
    with pytest.raises(ArityError):
        validate_tree(t, specs["union"])
    validate_tree(t, specs["union"], relaxed=True)


def test_tree_measures(specs):
    t = parse_tree("(union (leaf a) (union (leaf b) (leaf e)) (leaf a))",
                   specs["union"])
    assert count_nodes(t) == 6
    assert leaf_count(t) == 4
    assert tree_height(t) == 2
    assert max_degree(t) == 3
    assert [n.symbol for n in post_order(t)][-1] == "union"
    assert node_at(t, (1, 0)).symbol == "b"
    with pytest.raises(ValueError):
        node_at(t, (5,))


def test_union_semantics(specs):
    t = parse_tree("(union (leaf a) (leaf e))", specs["union"])
    s = evaluate(t, specs["union"]).structure
    assert s.size == 3
    assert len(s.relations["E"]) == 2  # one symmetric edge from the pair leaf
    assert sorted(s.labels.values()) == [1, 1, 2]


def test_cograph_semantics(specs):
    spec = specs["cograph"]
    full = evaluate(parse_tree("(join (leaf a) (leaf b))", spec), spec).structure
    assert len(full.relations["E"]) == 2
    same = evaluate(parse_tree("(xjoin (leaf a) (leaf a))", spec), spec).structure
    assert len(same.relations["E"]) == 0
    diff = evaluate(parse_tree("(xjoin (leaf a) (leaf b))", spec), spec).structure
    assert len(diff.relations["E"]) == 2
    # join of joins: K4 minus nothing (all four connected pairwise)
    k4 = evaluate(parse_tree("(join (join (leaf a) (leaf b)) (join (leaf a) (leaf b)))",
                             spec), spec).structure
    assert len(k4.relations["E"]) == 12


def test_word_semantics(specs):
    spec = specs["word"]
    res = evaluate(parse_tree("(cat (leaf a) (leaf b) (leaf a))", spec), spec)
    s = res.structure
    assert s.size == 3
    succ = dict(s.relations["succ"])
    first, last = res.anchors
    assert succ[first] in succ  # chain of length 2
    assert len(s.relations["succ"]) == 2
    assert s.labels[first] == 1 and s.labels[last] == 1


def test_word_order_semantics(specs):
    spec = specs["oword"]
    res = evaluate(parse_tree("(cat (leaf a) (leaf b) (leaf a))", spec), spec)
    s = res.structure
    assert s.size == 3
    assert len(s.relations["lt"]) == 3  # strict total order on 3 elements


def test_tree_semantics(specs):
    spec = specs["tree"]
    res = evaluate(parse_tree("(builda (leaf a) (buildb (leaf b) (leaf a)))", spec),
                   spec)
    s = res.structure
    assert s.size == 5  # three leaves plus two fresh build roots
    root, last_child = res.anchors
    assert s.labels[root] == 1
    children = [c for p, c in s.relations["child"] if p == root]
    assert len(children) == 2 and last_child in children
    assert len(s.relations["nextSibling"]) == 2
    inner_root = [c for c in children if c != last_child or s.labels[c] == 2]
    assert any(s.labels[c] == 2 for c in children)


def test_childless_build(specs):
    spec = AlphabetSpec(
        "tree", specs["tree"].voc, dict(specs["tree"].leaves),
        {**specs["tree"].ops,
         "mk": OpSymbol("mk", specs["tree"].ops["builda"].kind, 1, True)})
    res = evaluate(parse_tree("(mk (leaf a))", spec), spec)
    assert res.structure.size == 2
    assert res.anchors[0] != res.anchors[1]


def test_eval_sizes_matches_evaluate(specs):
    for name, text in [("union", "(union (leaf e) (union (leaf a) (leaf b)))"),
                       ("tree", "(builda (leaf a) (pair (leaf b) (leaf a)))")]:
        spec = specs[name]
        t = parse_tree(text, spec)
        sizes = eval_sizes(t, spec)
        for node in post_order(t):
            sub = evaluate(node, spec).structure
            assert sizes[node.token] == sub.size


def test_subtree_replace_preserves_spine(specs):
    spec = specs["union"]
    t = parse_tree("(union (leaf a) (union (leaf b) (leaf e)))", spec)
    replacement = leaf("a")
    t2 = subtree_replace(t, (1, 0), replacement)
    assert t2.token == t.token
    assert node_at(t2, (1,)).token == node_at(t, (1,)).token
    assert node_at(t2, (1, 0)).token == replacement.token
    assert node_at(t2, (1, 0)).symbol == "a"
    assert node_at(t, (1, 0)).symbol == "b"  # original untouched
    assert subtree_replace(t, (), replacement) is replacement
    with pytest.raises(ValueError):
        subtree_replace(t, (7,), replacement)


def test_clone_fresh_disjoint_tokens(specs):
    t = parse_tree("(union (leaf a) (union (leaf b) (leaf e)))", specs["union"])
    c = clone_fresh(t)
    assert shape(c) == shape(t)
    assert {n.token for n in post_order(t)}.isdisjoint(
        {n.token for n in post_order(c)})
    validate_tree(op_node("union", t, c), specs["union"], relaxed=True)


def test_instantiate_leaf_fresh_elements(specs):
    v1 = instantiate_leaf(specs["union"], "e", 101)
    v2 = instantiate_leaf(specs["union"], "e", 102)
    assert set(v1.structure.universe).isdisjoint(v2.structure.universe)
    assert canonical_key(v1.structure) == canonical_key(v2.structure)


def test_alphabet_spec_validation(specs):
    gvoc = Vocabulary((("E", 2),), 2)
    vtx = Structure(gvoc, (0,), {"E": frozenset()}, {0: 1})
    union = OpSymbol("union", DisjointUnion(), 2, False)
    with pytest.raises(ValueError, match="reserved"):
        AlphabetSpec("graph", gvoc, {"leaf": vtx}, {"union": union})
    with pytest.raises(ValueError, match="rho"):
        AlphabetSpec("graph", gvoc, {"a": vtx},
                     {"u": OpSymbol("u", DisjointUnion(), 1, False)})
    with pytest.raises(ValueError, match="kind must be"):
        AlphabetSpec("hypergraph", gvoc, {"a": vtx}, {"union": union})
    big = Structure(gvoc, (0, 1, 2, 3), {"E": frozenset()},
                    {0: 1, 1: 1, 2: 1, 3: 1})
    with pytest.raises(ValueError, match="capped"):
        AlphabetSpec("graph", gvoc, {"a": big}, {"union": union})
    with pytest.raises(ValueError, match="product-like"):
        AlphabetSpec("graph", gvoc, {"a": vtx},
                     {"z": OpSymbol("z", CustomOp("z", lambda vs, tok: vs[0], 2),
                                    2, False)})


def test_parse_alphabet_file(specs):
    files = {
        "v.str": "universe 1\nlabels 2\nrel E 2\nlabel 1 1\n",
    }
    text = "kind graph\nlabels 2\nleaf a v.str\nop union union 2\n"
    spec = parse_alphabet(text, read_file=files.__getitem__)
    assert spec.kind == "graph"
    assert set(spec.leaves) == {"a"}
    assert spec.ops["union"].rho == 2 and not spec.ops["union"].ranked
    t = parse_tree("(union (leaf a) (leaf a))", spec)
    assert evaluate(t, spec).structure.size == 2


def test_parse_alphabet_order_directive():
    files = {"v.str": "universe 1\nlabels 2\nrel lt 2\nlabel 1 1\n"}
    text = "kind word\norder\nlabels 2\nleaf a v.str\nop cat concat 2\n"
    spec = parse_alphabet(text, read_file=files.__getitem__)
    assert spec.word_order
    with pytest.raises(ParseError):
        parse_alphabet("kind graph\norder\nlabels 2\n",
                       read_file=files.__getitem__)


def test_parse_alphabet_errors():
    files = {"v.str": "universe 1\nlabels 2\nrel E 2\nlabel 1 1\n"}
    for bad in ["frobnicate graph\n",
                "kind graph\nlabels 2\nleaf a v.str\nop union union two\n",
                "kind graph\nlabels 2\nleaf a v.str\nop union frob 2\n",
                "kind graph\nlabels 2\nleaf a missing.str\nop union union 2\n"]:
        with pytest.raises((ParseError, KeyError)):
            parse_alphabet(bad, read_file=files.__getitem__)


def test_format_alphabet_roundtrip(specs):
    for name in ("union", "cograph", "word", "oword", "tree"):
        spec = specs[name]
        text, files = format_alphabet(spec)
        back = parse_alphabet(text, read_file=files.__getitem__)
        assert back.kind == spec.kind
        assert back.word_order == spec.word_order
        assert set(back.leaves) == set(spec.leaves)
        assert set(back.ops) == set(spec.ops)
        for lname in spec.leaves:
            assert canonical_key(back.leaves[lname]) == canonical_key(spec.leaves[lname])
        for oname, op in spec.ops.items():
            bop = back.ops[oname]
            assert (bop.rho, bop.ranked, type(bop.kind)) == (op.rho, op.ranked,
                                                             type(op.kind))


def test_to_order_encoding(specs):
    ospec = to_order_encoding(specs["word"])
    assert ospec.word_order
    t = parse_tree("(cat (leaf a) (leaf b) (leaf a))", ospec)
    s = evaluate(t, ospec).structure
    assert len(s.relations["lt"]) == 3
    with pytest.raises(ValueError):
        to_order_encoding(specs["oword"])
    with pytest.raises(ValueError):
        to_order_encoding(specs["union"])
