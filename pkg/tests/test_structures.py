"""Structures: parsing, canonical forms, substructures, embedding, enumeration."""

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treequiv.errors import BudgetError, ParseError
from treequiv.structures import (Structure, Vocabulary, canonical_key,
                                 enumerate_structures, format_structure,
                                 induced_substructure, is_embeddable, is_isomorphic,
                                 parse_structure)

from conftest import clique, cycle, graph, ugraph


def test_parse_format_round_trip():
    s = graph(3, [(1, 2), (2, 3)], labels={1: 1, 3: 2}, label_count=2)
    assert parse_structure(format_structure(s)) == s


def test_parse_empty_structure():
    s = parse_structure("universe 0\nrel E 2\n")
    assert s.size == 0
    assert parse_structure(format_structure(s)) == s


def test_parse_rejects_out_of_range():
    with pytest.raises(ParseError):
        parse_structure("universe 2\nrel E 2\nE 1 3\n")
    with pytest.raises(ParseError):
        parse_structure("universe 1\nlabels 1\nrel E 2\nlabel 1 2\n")


def test_induced_substructure_path():
    # path a-b-c restricted to {a,b} keeps the single edge
    p3 = ugraph(3, [(1, 2), (2, 3)])
    sub = induced_substructure(p3, (1, 2))
    assert sub.size == 2
    assert sub.relations["E"] == frozenset({(1, 2), (2, 1)})


def test_induced_substructure_identity_and_idempotent():
    t = clique(3)
    assert induced_substructure(t, t.universe) == t
    once = induced_substructure(t, (1, 3))
    assert induced_substructure(once, (1, 3)) == once
    assert once.relations["E"] == frozenset({(1, 3), (3, 1)})


def test_is_embeddable_examples():
    k2 = ugraph(2, [(1, 2)])
    two_k1 = graph(2, [])
    assert is_embeddable(k2, two_k1) is None
    p3 = ugraph(3, [(1, 2), (2, 3)])
    emb = is_embeddable(p3, cycle(4))
    assert emb is not None
    # the embedding is induced: endpoints of the path stay non-adjacent
    e = cycle(4).relations["E"]
    assert (emb[1], emb[3]) not in e


def test_is_embeddable_matches_subset_enumeration():
    small = [graph(2, []), ugraph(2, [(1, 2)]), ugraph(3, [(1, 2)]),
             ugraph(3, [(1, 2), (2, 3)]), clique(3)]
    hosts = [cycle(4), clique(4), graph(4, []), ugraph(4, [(1, 2), (3, 4)])]
    for b, a in itertools.product(small, hosts):
        got = is_embeddable(b, a) is not None
        expect = any(
            is_isomorphic(induced_substructure(a, s), b)
            for s in itertools.combinations(a.universe, b.size))
        assert got == expect, (b, a)


def test_enumerate_simple_graphs_counts():
    # 8 simple graphs up to isomorphism at sizes 0..3: 1, 1, 2, 4
    voc = Vocabulary((("E", 2),), 0)
    out = list(enumerate_structures(voc, 3, symmetric_irreflexive=("E",)))
    by_size = {}
    for s in out:
        by_size[s.size] = by_size.get(s.size, 0) + 1
    assert by_size == {0: 1, 1: 1, 2: 2, 3: 4}
    assert len(out) == 8


def test_enumerate_pairwise_non_isomorphic():
    voc = Vocabulary((("E", 2),), 0)
    out = list(enumerate_structures(voc, 3, symmetric_irreflexive=("E",)))
    for a, b in itertools.combinations(out, 2):
        if a.size == b.size:
            assert not is_isomorphic(a, b)


def test_enumerate_budget_guard():
    voc = Vocabulary((("E", 2),), 0)
    with pytest.raises(BudgetError):
        list(enumerate_structures(voc, 6, max_candidates=1000))


def test_canonical_key_iso_invariant_fixed():
    a = ugraph(3, [(1, 2)])
    b = ugraph(3, [(2, 3)])
    assert canonical_key(a) == canonical_key(b)
    assert canonical_key(a) != canonical_key(clique(3))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.data())
def test_canonical_key_permutation_invariant(n, data):
    rng = random.Random(data.draw(st.integers(0, 10 ** 6)))
    edges = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1)
             if i != j and rng.random() < 0.4]
    s = graph(n, edges)
    perm = list(range(1, n + 1))
    rng.shuffle(perm)
    mapped = {i + 1: perm[i] for i in range(n)}
    t = graph(n, [(mapped[i], mapped[j]) for i, j in edges])
    assert canonical_key(s) == canonical_key(t)
    assert is_isomorphic(s, t)


def test_vocabulary_with_unary():
    voc = Vocabulary((("E", 2),), 1)
    voc2 = voc.with_unary("_W1")
    assert voc2.has("_W1")
    assert voc2.label_count == 1
    assert ("E", 2) in voc2.relations
