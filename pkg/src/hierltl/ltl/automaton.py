"""Tableau translation of LTL into generalized Büchi automata.

Words are sequences of region names with exactly one region per position, so
a guard is a conjunction of literals and at most one positive literal can
ever be satisfied.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

from .syntax import (
    FALSE, TRUE, Always, And, Atom, Const, Eventually, Formula, Implies, Next, Not, Or, Release,
    Until, atoms_of, to_text,
)


def nnf(f: Formula, negate: bool = False) -> Formula:
    """Negation normal form over And, Or, Next, Until, Release and literals."""
    if isinstance(f, Const):
        return Const(f.value != negate)
    if isinstance(f, Atom):
        return Not(f) if negate else f
    if isinstance(f, Not):
        return nnf(f.arg, not negate)
    if isinstance(f, Next):
        return Next(nnf(f.arg, negate))
    if isinstance(f, Eventually):
        return nnf(Until(TRUE, f.arg), negate)
    if isinstance(f, Always):
        return nnf(Release(FALSE, f.arg), negate)
    if isinstance(f, Implies):
        return nnf(Or(Not(f.left), f.right), negate)
    left, right = nnf(f.left, negate), nnf(f.right, negate)
    dual = {And: Or, Or: And, Until: Release, Release: Until}
    op = dual[type(f)] if negate else type(f)
    return op(left, right)


@dataclass(frozen=True)
class Guard:
    """Letters ``w`` with ``w`` equal to every positive and no negative atom."""

    positive: frozenset[str] = frozenset()
    negative: frozenset[str] = frozenset()

    def admits(self, letter: str) -> bool:
        return all(p == letter for p in self.positive) and letter not in self.negative

    def __str__(self) -> str:
        lits = sorted(self.positive) + [f"!{a}" for a in sorted(self.negative)]
        return " && ".join(lits) if lits else "true"


@dataclass(frozen=True)
class BuchiAutomaton:
    states: tuple[int, ...]
    initial: int
    edges: Mapping[int, tuple[tuple[Guard, int], ...]]
    acceptance: tuple[frozenset[int], ...]
    atoms: frozenset[str] = field(default=frozenset())

    def __post_init__(self):
        object.__setattr__(self, "_memo", {})

    def successors(self, state: int, letter: str) -> tuple[int, ...]:
        key = (state, letter)
        hit = self._memo.get(key)
        if hit is None:
            hit = self._memo[key] = tuple(t for g, t in self.edges.get(state, ()) if g.admits(letter))
        return hit

    def dump(self) -> str:
        lines = [f"states {len(self.states)}", f"initial {self.initial}"]
        for k, acc in enumerate(self.acceptance):
            lines.append(f"accept[{k}] " + " ".join(map(str, sorted(acc))))
        for s in self.states:
            for g, t in self.edges.get(s, ()):
                lines.append(f"{s} -> {t} : {g}")
        return "\n".join(lines) + "\n"


@dataclass
class _Node:
    incoming: set
    new: set
    old: frozenset
    nxt: frozenset


@lru_cache(maxsize=4096)
def _order(f: Formula) -> str:
    return to_text(f)


def _is_literal(f):
    return isinstance(f, (Atom, Const)) or isinstance(f, Not)


def _contradicts(lit, old) -> bool:
    if lit == FALSE:
        return True
    if isinstance(lit, Atom):
        if Not(lit) in old:
            return True
        # two distinct regions cannot hold at the same position
        return any(isinstance(o, Atom) and o != lit for o in old)
    if isinstance(lit, Not):
        return lit.arg in old
    return False


def ltl_to_buchi(formula: Formula) -> BuchiAutomaton:
    """Translate ``formula`` with the classic on-the-fly tableau.

    State 0 is a fresh initial state; every other state is a tableau node
    whose literals become the guard of all edges entering it. One acceptance
    set is produced per until-subformula.
    """
    root = nnf(formula)
    init = 0
    done: list[tuple[frozenset, frozenset, set]] = []  # (old, next, incoming)
    index: dict[tuple[frozenset, frozenset], int] = {}
    work = [_Node({init}, {root}, frozenset(), frozenset())]
    while work:
        node = work.pop()
        if not node.new:
            key = (node.old, node.nxt)
            if key in index:
                done[index[key]][2].update(node.incoming)
                continue
            index[key] = len(done)
            done.append((node.old, node.nxt, set(node.incoming)))
            work.append(_Node({len(done)}, set(node.nxt), frozenset(), frozenset()))
            continue
        # deterministic choice keeps state numbering independent of hash seeds
        f = min(node.new, key=_order)
        node.new.discard(f)
        if f in node.old:
            work.append(node)
            continue
        if _is_literal(f):
            if _contradicts(f, node.old):
                continue
            work.append(_Node(node.incoming, node.new, node.old | {f}, node.nxt))
        elif isinstance(f, And):
            work.append(_Node(node.incoming, node.new | ({f.left, f.right} - node.old), node.old | {f}, node.nxt))
        elif isinstance(f, Next):
            work.append(_Node(node.incoming, node.new, node.old | {f}, node.nxt | {f.arg}))
        else:
            if isinstance(f, Or):
                first, second, carry = {f.left}, {f.right}, frozenset()
            elif isinstance(f, Until):
                first, second, carry = {f.left}, {f.right}, frozenset([f])
            else:  # Release
                first, second, carry = {f.right}, {f.left, f.right}, frozenset([f])
            old = node.old | {f}
            work.append(_Node(set(node.incoming), node.new | (first - old), old, node.nxt | carry))
            work.append(_Node(set(node.incoming), node.new | (second - old), old, node.nxt))

    # node k of ``done`` becomes automaton state k + 1
    states = tuple(range(len(done) + 1))
    edges: dict[int, list[tuple[Guard, int]]] = {s: [] for s in states}
    for k, (old, _, incoming) in enumerate(done):
        pos = frozenset(f.name for f in old if isinstance(f, Atom))
        neg = frozenset(f.arg.name for f in old if isinstance(f, Not))
        guard = Guard(pos, neg)
        for src in sorted(incoming):
            edges[src].append((guard, k + 1))

    untils = sorted({f for old, _, _ in done for f in old if isinstance(f, Until)}, key=_order)
    acceptance = tuple(
        frozenset(k + 1 for k, (old, _, _) in enumerate(done) if u not in old or u.right in old)
        for u in untils
    ) or (frozenset(states),)
    return BuchiAutomaton(states, init, {s: tuple(e) for s, e in edges.items()}, acceptance,
                          atoms_of(formula))
