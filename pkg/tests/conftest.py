"""Shared fixtures: small structures, standard alphabets, a fast config."""

import pytest

from treequiv.config import RunConfig
from treequiv.corpus import (cograph_alphabet, tree_alphabet, union_alphabet,
                             word_alphabet)
from treequiv.structures import Vocabulary, parse_structure


@pytest.fixture(scope="session")
def cfg():
    return RunConfig()


@pytest.fixture(scope="session")
def graph_voc():
    return Vocabulary((("E", 2),), 0)


@pytest.fixture(scope="session")
def specs():
    return {
        "union": union_alphabet(),
        "cograph": cograph_alphabet(),
        "word": word_alphabet(),
        "oword": word_alphabet(order=True),
        "tree": tree_alphabet(),
    }


def graph(n: int, edges: list[tuple[int, int]], labels: dict[int, int] | None = None,
          label_count: int = 0) -> "Structure":
    lines = [f"universe {n}"]
    if label_count:
        lines.append(f"labels {label_count}")
    lines.append("rel E 2")
    for i, j in edges:
        lines.append(f"E {i} {j}")
    for e, l in (labels or {}).items():
        lines.append(f"label {e} {l}")
    return parse_structure("\n".join(lines) + "\n")


def ugraph(n: int, edges: list[tuple[int, int]]) -> "Structure":
    both = [(i, j) for i, j in edges] + [(j, i) for i, j in edges]
    return graph(n, both)


def word(s: str) -> "Structure":
    n = len(s)
    lines = [f"universe {n}", "labels 2", "rel succ 2"]
    for i in range(1, n):
        lines.append(f"succ {i} {i + 1}")
    for i, ch in enumerate(s, 1):
        lines.append(f"label {i} {1 if ch == 'a' else 2}")
    return parse_structure("\n".join(lines) + "\n")


def clique(n: int) -> "Structure":
    return graph(n, [(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j])


def cycle(n: int) -> "Structure":
    return ugraph(n, [(i, i % n + 1) for i in range(1, n + 1)])
