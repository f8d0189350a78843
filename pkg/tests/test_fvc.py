"""Composition tables: soundness against the oracle, congruence sampling,
persistence."""

import pytest

from treequiv.automata import default_validity_automaton
from treequiv.config import RunConfig
from treequiv.eftypes import structure_type
from treequiv.errors import ParseError
from treequiv.fvc import (Annotator, alphabet_digest, annotate, load_tables,
                          save_tables, soundness_check, verify_fvc)
from treequiv.optrees import (AlphabetSpec, CustomOp, OpSymbol, Structure,
                              Value, evaluate, instantiate_leaf, leaf, op_node,
                              parse_tree)
from treequiv.structures import Vocabulary

TREES = {
    "union": ["(leaf a)", "(union (leaf a) (leaf b))",
              "(union (leaf e) (union (leaf a) (leaf a)))",
              "(union (leaf a) (leaf b) (leaf e))"],
    "cograph": ["(join (leaf a) (leaf b))",
                "(xjoin (join (leaf a) (leaf a)) (leaf b))",
                "(union (join (leaf a) (leaf b)) (xjoin (leaf a) (leaf b)))"],
    "word": ["(cat (leaf a) (leaf b))",
             "(cat (leaf a) (cat (leaf b) (leaf a)) (leaf b))"],
    "tree": ["(builda (leaf a) (leaf b))",
             "(buildb (pair (leaf a) (leaf b)) (leaf a))",
             "(builda (leaf a) (leaf b) (leaf a))"],
}


def test_annotate_root_matches_oracle(specs, cfg):
    for name, texts in TREES.items():
        spec = specs[name]
        m = 1 if name == "tree" else 2
        ann = Annotator(spec, m, "fo", cfg)
        aut = default_validity_automaton(spec)
        for text in texts:
            t = parse_tree(text, spec)
            notes = ann.annotate(t, aut)
            composed = ann.unpointed_fp(notes[t.token].delta1)
            oracle = structure_type(evaluate(t, spec).structure, m, "fo",
                                    config=cfg)
            assert composed == oracle, f"{name}: {text}"
            assert notes[t.token].delta2 == "ok"


def test_soundness_check(specs, cfg):
    for name, texts in TREES.items():
        spec = specs[name]
        m = 1 if name == "tree" else 2
        for text in texts:
            res = soundness_check(parse_tree(text, spec), spec, m, "fo",
                                  config=cfg)
            assert res.ok and res.composed == res.oracle


def test_soundness_mso(specs, cfg):
    res = soundness_check(parse_tree("(cat (leaf a) (leaf b))", specs["word"]),
                          specs["word"], 2, "mso", config=cfg)
    assert res.ok


def test_annotate_convenience_and_delta2(specs, cfg):
    spec = specs["union"]
    t = parse_tree("(union (leaf a) (leaf b))", spec)
    notes = annotate(t, spec, 2, "fo", config=cfg)
    assert set(notes) == {n.token for n in [t, *t.children]}
    assert all(n.delta2 == "ok" for n in notes.values())
    # partial-arity internal node lands in the sink under the validity automaton
    bad = op_node("union", leaf("a"))
    notes2 = annotate(bad, spec, 2, "fo", config=cfg)
    assert notes2[bad.token].delta2 != "ok"


def test_tables_are_shared_and_reused(specs, cfg):
    spec = specs["union"]
    ann = Annotator(spec, 2, "fo", cfg)
    aut = default_validity_automaton(spec)
    t1 = parse_tree("(union (leaf a) (leaf b))", spec)
    ann.annotate(t1, aut)
    before = ann.table_sizes()
    notes_a = ann.annotate(t1, aut)
    assert ann.table_sizes() == before  # same tree, no new entries
    t2 = parse_tree("(union (leaf b) (leaf a))", spec)
    notes_b = ann.annotate(t2, aut)
    assert notes_a[t1.token].delta1 == notes_b[t2.token].delta1


def test_leaf_fp_matches_value_fp(specs, cfg):
    spec = specs["tree"]
    ann = Annotator(spec, 1, "fo", cfg)
    v = instantiate_leaf(spec, "a", 7)
    assert ann.leaf_fp("a") == ann.value_fp(v)


def test_prefix_classes_consistent_with_fold(specs, cfg):
    spec = specs["tree"]
    ann = Annotator(spec, 1, "fo", cfg)
    op = spec.op("builda")
    fps = tuple(ann.leaf_fp(s) for s in ("a", "b", "a"))
    prefixes = ann.prefix_classes(op, fps)
    assert len(prefixes) == 3
    acc = ann.apply_unary(op, fps[0])
    assert prefixes[0] == acc
    for fp, expect in zip(fps[1:], prefixes[1:]):
        acc = ann.apply_step(op, acc, fp)
        assert acc == expect
    assert ann.compose(op, fps) == prefixes[-1]


def test_verify_fvc_standard_ops(specs):
    cases = [("union", "union", 2, "fo"), ("cograph", "xjoin", 2, "fo"),
             ("word", "cat", 2, "fo"), ("word", "cat", 1, "mso"),
             ("tree", "builda", 1, "fo")]
    for alpha, opname, m, mode in cases:
        rep = verify_fvc(specs[alpha], opname, m, mode, trials=15, seed=1)
        assert rep.passed, f"{alpha}/{opname}"
        assert rep.performed > 0
        assert rep.counterexample is None


def _parity_alphabet():
    voc = Vocabulary((("E", 2),), 2)
    vtx = Structure(voc, (0,), {"E": frozenset()}, {0: 1})

    def apply(spec, values, token):
        universe = [e for v in values for e in v.structure.universe]
        edges = [t for v in values for t in v.structure.relations["E"]]
        labels = {}
        for v in values:
            labels.update(v.structure.labels)
        if len(universe) >= 4 and len(universe) % 2 == 0:
            edges.append((universe[0], universe[0]))
        return Value(Structure(voc, universe, {"E": edges}, labels), ())

    return AlphabetSpec("graph", voc, {"a": vtx},
                        {"pu": OpSymbol("pu", CustomOp("pu", apply), 2, False)})


def test_verify_fvc_catches_noncongruent_op():
    # the op inspects total size, which rank-2 types do not determine
    spec = _parity_alphabet()
    pool = []
    for text in ["(leaf a)", "(pu (leaf a) (leaf a))",
                 "(pu (leaf a) (leaf a) (leaf a))"]:
        t = parse_tree(text, spec)
        res = evaluate(t, spec)
        pool.append((t, Value(res.structure, res.anchors)))
    rep = verify_fvc(spec, "pu", 2, "fo", trials=10, seed=0, pool=pool)
    assert not rep.passed
    assert rep.counterexample is not None
    ca, cb = rep.counterexample
    assert ca.startswith("(pu ") and cb.startswith("(pu ")


def test_save_load_roundtrip(specs, cfg, tmp_path):
    spec = specs["union"]
    ann = Annotator(spec, 2, "fo", cfg)
    aut = default_validity_automaton(spec)
    t = parse_tree("(union (leaf e) (union (leaf a) (leaf b)))", spec)
    notes = ann.annotate(t, aut)
    path = str(tmp_path / "tables.bin")
    save_tables(ann, path)
    loaded = load_tables(spec, 2, "fo", path, config=cfg)
    assert loaded.table_sizes() == ann.table_sizes()
    assert set(loaded.reps) == set(ann.reps)
    notes2 = loaded.annotate(t, aut)
    assert notes2[t.token].delta1 == notes[t.token].delta1
    # deterministic bytes
    path2 = str(tmp_path / "tables2.bin")
    save_tables(ann, path2)
    assert open(path, "rb").read() == open(path2, "rb").read()


def test_load_refusals(specs, cfg, tmp_path):
    spec = specs["union"]
    ann = Annotator(spec, 2, "fo", cfg)
    ann.annotate(parse_tree("(union (leaf a) (leaf b))", spec),
                 default_validity_automaton(spec))
    path = str(tmp_path / "t.bin")
    save_tables(ann, path)
    with pytest.raises(ParseError, match="rank"):
        load_tables(spec, 3, "fo", path, config=cfg)
    with pytest.raises(ParseError):
        load_tables(spec, 2, "mso", path, config=cfg)
    with pytest.raises(ParseError, match="different alphabet"):
        load_tables(specs["cograph"], 2, "fo", path, config=cfg)
    bad = str(tmp_path / "bad.bin")
    with open(bad, "wb") as fh:
        fh.write(b"NOPE" + open(path, "rb").read()[4:])
    with pytest.raises(ParseError, match="not a composition table"):
        load_tables(spec, 2, "fo", bad, config=cfg)
    trunc = str(tmp_path / "trunc.bin")
    with open(trunc, "wb") as fh:
        fh.write(open(path, "rb").read()[:40])
    with pytest.raises(ParseError):
        load_tables(spec, 2, "fo", trunc, config=cfg)


def test_alphabet_digest(specs):
    from treequiv.corpus import union_alphabet
    assert alphabet_digest(specs["union"]) == alphabet_digest(union_alphabet())
    assert alphabet_digest(specs["union"]) != alphabet_digest(specs["cograph"])
    assert alphabet_digest(specs["word"]) != alphabet_digest(specs["oword"])
    with pytest.raises(ValueError, match="custom"):
        alphabet_digest(_parity_alphabet())
