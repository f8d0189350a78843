"""Formula parsing, rank computation, naive model checking, sentence files."""

import itertools
import random

import pytest

from treequiv.corpus import random_sentence
from treequiv.errors import ParseError
from treequiv.logic import (Not, eval_formula, format_formula, format_formula_file,
                            free_variables, parse_formula, parse_formula_file,
                            quantifier_rank, uses_set_syntax)
from treequiv.structures import Vocabulary, enumerate_structures, is_isomorphic

from conftest import clique, cycle, graph, ugraph, word

GVOC = Vocabulary((("E", 2),), 0)
LVOC = Vocabulary((("E", 2),), 2)


def test_rank_examples():
    assert quantifier_rank(parse_formula("E(x, y)", GVOC, allow_free=True)) == 0
    assert quantifier_rank(parse_formula("exists x. exists y. E(x, y)", GVOC)) == 2
    phi = parse_formula("(exists x. E(x, x)) & (forall y. exists z. E(y, z))", GVOC)
    assert quantifier_rank(phi) == 2
    mso = parse_formula("existsSet X. forall x. X(x)", GVOC, "mso")
    assert quantifier_rank(mso) == 2
    assert uses_set_syntax(mso)


def test_parse_format_round_trip():
    texts = [
        "exists x. exists y. (E(x, y) & ~(x = y))",
        "forall x. (E(x, x) -> exists y. E(x, y))",
        "existsSet X. forall x. (X(x) | ~X(x))",
    ]
    for text in texts:
        mode = "mso" if "Set" in text else "fo"
        phi = parse_formula(text, GVOC, mode)
        assert parse_formula(format_formula(phi), GVOC, mode) == phi


def test_label_predicates():
    phi = parse_formula("exists x. L2(x)", LVOC)
    w = word("ab")
    assert eval_formula(phi, w)
    assert not eval_formula(parse_formula("forall x. L2(x)", LVOC), w)


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_formula("exists x. E(x, y)", GVOC)          # free variable
    with pytest.raises(ParseError):
        parse_formula("existsSet X. X(X)", GVOC, "mso")   # set used as point
    with pytest.raises(ParseError):
        parse_formula("existsSet X. exists x. X(x)", GVOC, "fo")  # set syntax in fo
    with pytest.raises(ParseError):
        parse_formula("exists x. F(x, x)", GVOC)          # unknown relation
    with pytest.raises(ParseError):
        parse_formula("exists x. E(x, x) E", GVOC)        # trailing input


def test_eval_fixed_cases():
    has_edge = parse_formula("exists x. exists y. (E(x, y) & ~(x = y))", GVOC)
    assert eval_formula(has_edge, clique(3))
    assert not eval_formula(has_edge, graph(3, []))
    # C4 is 2-colorable, C3 is not (MSO rank 3)
    two_col = parse_formula(
        "existsSet X. forall x. forall y. (E(x, y) -> "
        "((X(x) & ~X(y)) | (X(y) & ~X(x))))", GVOC, "mso")
    assert eval_formula(two_col, cycle(4))
    assert not eval_formula(two_col, cycle(3))


def test_eval_on_empty_structure():
    empty = graph(0, [])
    assert not eval_formula(parse_formula("exists x. x = x", GVOC), empty)
    assert eval_formula(parse_formula("forall x. E(x, x)", GVOC), empty)


def test_eval_iso_invariant_enumerated():
    phi = parse_formula("forall x. exists y. E(x, y)", GVOC)
    pool = [s for s in enumerate_structures(GVOC, 3, symmetric_irreflexive=("E",))]
    perms = []
    for s in pool:
        if s.size < 2:
            continue
        u = list(s.universe)
        rot = {u[i]: u[(i + 1) % len(u)] for i in range(len(u))}
        t = type(s)(s.voc, tuple(sorted(rot[e] for e in u)),
                    {n: frozenset(tuple(rot[x] for x in tu) for tu in ts)
                     for n, ts in s.relations.items()},
                    {rot[e]: l for e, l in s.labels.items()})
        perms.append((s, t))
    assert perms
    for s, t in perms:
        assert is_isomorphic(s, t)
        assert eval_formula(phi, s) == eval_formula(phi, t)


def test_negation_duality_random():
    rng = random.Random(5)
    pool = list(enumerate_structures(GVOC, 3))[:20]
    for i in range(50):
        mode = "mso" if i % 4 == 0 else "fo"
        phi = parse_formula(random_sentence(rng, GVOC, 2, mode), GVOC, mode)
        s = pool[i % len(pool)]
        assert eval_formula(Not(phi), s) == (not eval_formula(phi, s))


def test_free_variables():
    phi = parse_formula("E(x, y) & (exists z. E(z, y))", GVOC, allow_free=True)
    fv, fsv = free_variables(phi)
    assert fv == {"x", "y"}
    assert fsv == set()


def test_formula_file_round_trip():
    rng = random.Random(7)
    for i in range(30):
        mode = "mso" if i % 3 == 0 else "fo"
        phi = parse_formula(random_sentence(rng, LVOC, 2, mode), LVOC, mode)
        text = format_formula_file(phi, LVOC, mode)
        phi2, voc2, mode2 = parse_formula_file(text)
        assert (phi2, voc2, mode2) == (phi, LVOC, mode)


def test_formula_file_multiline_and_comments():
    text = """# header comment
rel E 2
labels 0
mode fo
formula exists x.
  exists y. E(x, y)  # trailing comment
"""
    phi, voc, mode = parse_formula_file(text)
    assert format_formula(phi) == "exists x. exists y. E(x, y)"
    assert voc == GVOC and mode == "fo"


def test_formula_file_errors():
    with pytest.raises(ParseError):
        parse_formula_file("rel E 2\n")                      # missing formula
    with pytest.raises(ParseError):
        parse_formula_file("rel E two\nformula exists x. x = x\n")
    with pytest.raises(ParseError):
        parse_formula_file("mode foo\nformula exists x. x = x\n")
