"""Deterministic bottom-up tree automata over operation alphabets.

Unranked symbols read their child states through a per-operation horizontal
DFA: start in the op's start h-state, step once per child state in order, and
map the final h-state to the node's state through the output map. Missing
transitions fall into an implicit rejecting sink, so runs are total.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseError
from .optrees import AlphabetSpec, Node, post_order

SINK = "_sink"
HSINK = "_hsink"


@dataclass(frozen=True)
class HorizontalDfa:
    start: str
    steps: tuple[tuple[str, str, str], ...]   # (h, child_state, h')
    outs: tuple[tuple[str, str], ...]         # (h, node_state)

    def step_map(self) -> dict:
        return {(h, q): h2 for h, q, h2 in self.steps}

    def out_map(self) -> dict:
        return dict(self.outs)


@dataclass(frozen=True)
class TreeAutomaton:
    states: tuple[str, ...]
    accepting: frozenset[str]
    leaf_states: tuple[tuple[str, str], ...]  # (leaf symbol, state)
    hdfas: tuple[tuple[str, HorizontalDfa], ...]  # (op symbol, dfa)

    def __post_init__(self):
        if not set(self.accepting) <= set(self.states):
            raise ValueError("accepting states must be declared states")
        for sym, q in self.leaf_states:
            if q not in self.states:
                raise ValueError(f"leaf transition to undeclared state {q!r}")
        for _, dfa in self.hdfas:
            for h, q, h2 in dfa.steps:
                if q not in self.states:
                    raise ValueError(f"hstep on undeclared state {q!r}")
            for h, q in dfa.outs:
                if q not in self.states:
                    raise ValueError(f"hout to undeclared state {q!r}")

    def leaf_map(self) -> dict:
        return dict(self.leaf_states)

    def run(self, t: Node) -> "RunResult":
        leaf_map = self.leaf_map()
        hmaps = {sym: (dfa.start, dfa.step_map(), dfa.out_map()) for sym, dfa in self.hdfas}
        states: dict[int, str] = {}
        for node in post_order(t):
            if node.is_leaf:
                states[node.token] = leaf_map.get(node.symbol, SINK)
                continue
            entry = hmaps.get(node.symbol)
            if entry is None:
                states[node.token] = SINK
                continue
            h, step, out = entry
            for c in node.children:
                h = step.get((h, states[c.token]), HSINK)
            states[node.token] = out.get(h, SINK)
        return RunResult(states[t.token], states, states[t.token] in self.accepting)

    def horizontal_prefixes(self, opsym: str, child_states: list[str]) -> list[str]:
        """h-states after each child prefix (length = len(child_states))."""
        for sym, dfa in self.hdfas:
            if sym == opsym:
                h = dfa.start
                step = dfa.step_map()
                out: list[str] = []
                for q in child_states:
                    h = step.get((h, q), HSINK)
                    out.append(h)
                return out
        return [HSINK] * len(child_states)


@dataclass(frozen=True)
class RunResult:
    root_state: str
    states: dict
    accepted: bool


def default_validity_automaton(spec: AlphabetSpec) -> TreeAutomaton:
    """Accepts exactly the arity-respecting trees of the alphabet.

    For an unranked op with ranking rho, h-states count children up to rho and
    then cycle with period rho-1, accepting at counts rho + i*(rho-1). Ranked
    ops accept exactly their fixed arity.
    """
    leaf_states = tuple((name, "ok") for name in sorted(spec.leaves))
    hdfas = []
    for name in sorted(spec.ops):
        op = spec.ops[name]
        if op.ranked:
            top = op.rho
            steps = tuple((f"c{i}", "ok", f"c{i + 1}") for i in range(top))
            outs = ((f"c{top}", "ok"),)
        else:
            top = op.rho + max(op.rho - 2, 0)
            steps_list = []
            for i in range(top + 1):
                nxt = i + 1
                if nxt > top:
                    nxt = op.rho
                steps_list.append((f"c{i}", "ok", f"c{nxt}"))
            steps = tuple(steps_list)
            outs = ((f"c{op.rho}", "ok"),)
        hdfas.append((name, HorizontalDfa("c0", steps, outs)))
    return TreeAutomaton(("ok",), frozenset(("ok",)), leaf_states, tuple(hdfas))


def trivial_automaton(spec: AlphabetSpec) -> TreeAutomaton:
    """Single-state automaton accepting every tree (used for internal shrinking,
    where tree-language membership is irrelevant)."""
    leaf_states = tuple((name, "ok") for name in sorted(spec.leaves))
    hdfas = tuple((name, HorizontalDfa("h", (("h", "ok", "h"),), (("h", "ok"),)))
                  for name in sorted(spec.ops))
    return TreeAutomaton(("ok",), frozenset(("ok",)), leaf_states, hdfas)


# ---------------------------------------------------------------------------
# file format
#
#   states ok bad
#   accept ok
#   leaf a ok
#   hdfa u h0
#   hstep u h0 ok h1
#   hstep u h1 ok h1
#   hout u h1 ok
# ---------------------------------------------------------------------------

def parse_automaton(text: str, spec: AlphabetSpec) -> TreeAutomaton:
    states: list[str] | None = None
    accept: list[str] | None = None
    leaf_states: dict[str, str] = {}
    starts: dict[str, str] = {}
    steps: dict[str, dict] = {}
    outs: dict[str, dict] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0]
        if head == "states":
            if states is not None:
                raise ParseError("duplicate states line", line=lineno)
            if len(parts) < 2:
                raise ParseError("states line needs at least one state", line=lineno)
            states = parts[1:]
            if len(set(states)) != len(states):
                raise ParseError("duplicate state name", line=lineno)
            if SINK in states or HSINK in states:
                raise ParseError(f"{SINK}/{HSINK} are reserved", line=lineno)
        elif head == "accept":
            if accept is not None:
                raise ParseError("duplicate accept line", line=lineno)
            accept = parts[1:]
        elif head == "leaf":
            if len(parts) != 3:
                raise ParseError("expected: leaf SYMBOL STATE", line=lineno)
            sym, q = parts[1], parts[2]
            if sym not in spec.leaves:
                raise ParseError(f"unknown leaf symbol {sym!r}", line=lineno)
            if sym in leaf_states:
                raise ParseError(f"leaf transition for {sym} declared twice", line=lineno)
            leaf_states[sym] = q
        elif head == "hdfa":
            if len(parts) != 3:
                raise ParseError("expected: hdfa OP STARTH", line=lineno)
            sym = parts[1]
            if sym not in spec.ops:
                raise ParseError(f"unknown op symbol {sym!r}", line=lineno)
            if sym in starts:
                raise ParseError(f"hdfa for {sym} declared twice", line=lineno)
            starts[sym] = parts[2]
            steps[sym] = {}
            outs[sym] = {}
        elif head == "hstep":
            if len(parts) != 5:
                raise ParseError("expected: hstep OP H STATE H2", line=lineno)
            sym, h, q, h2 = parts[1:]
            if sym not in starts:
                raise ParseError(f"hstep before hdfa line for {sym}", line=lineno)
            if (h, q) in steps[sym]:
                raise ParseError(f"nondeterministic hstep: ({h},{q}) declared twice", line=lineno)
            steps[sym][(h, q)] = h2
        elif head == "hout":
            if len(parts) != 4:
                raise ParseError("expected: hout OP H STATE", line=lineno)
            sym, h, q = parts[1:]
            if sym not in starts:
                raise ParseError(f"hout before hdfa line for {sym}", line=lineno)
            if h in outs[sym]:
                raise ParseError(f"hout for ({sym},{h}) declared twice", line=lineno)
            outs[sym][h] = q
        else:
            raise ParseError(f"unknown directive {head!r}", line=lineno)
    if states is None:
        raise ParseError("missing states line", line=1)
    if accept is None:
        raise ParseError("missing accept line", line=1)
    state_set = set(states)
    for q in accept:
        if q not in state_set:
            raise ParseError(f"accepting state {q!r} not declared")
    for sym, q in leaf_states.items():
        if q not in state_set:
            raise ParseError(f"leaf state {q!r} not declared")
    for sym in steps:
        for (h, q), h2 in steps[sym].items():
            if q not in state_set:
                raise ParseError(f"hstep on undeclared state {q!r}")
        for h, q in outs[sym].items():
            if q not in state_set:
                raise ParseError(f"hout to undeclared state {q!r}")
    hdfas = tuple((sym, HorizontalDfa(starts[sym],
                                      tuple(sorted((h, q, h2) for (h, q), h2 in steps[sym].items())),
                                      tuple(sorted(outs[sym].items()))))
                  for sym in sorted(starts))
    return TreeAutomaton(tuple(states), frozenset(accept), tuple(sorted(leaf_states.items())), hdfas)
