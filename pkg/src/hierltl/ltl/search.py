"""Product of a region transition system with a Büchi automaton and lasso search."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Mapping, Sequence

from .automaton import BuchiAutomaton


class NoAcceptingPath(RuntimeError):
    """The formula cannot be satisfied by any path of the transition system."""


@dataclass(frozen=True)
class RoiTransitionSystem:
    regions: tuple[str, ...]
    moves: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        known = set(self.regions)
        if len(known) != len(self.regions):
            raise ValueError("duplicate region names")
        for src, dst in self.moves.items():
            if src not in known or not set(dst) <= known:
                raise ValueError(f"transition from {src!r} leaves the region set")

    @classmethod
    def complete(cls, regions: Iterable[str]) -> "RoiTransitionSystem":
        regions = tuple(regions)
        return cls(regions, {r: regions for r in regions})

    @classmethod
    def from_adjacency(cls, regions: Iterable[str], adjacency: Mapping[str, Iterable[str]]):
        regions = tuple(regions)
        return cls(regions, {r: tuple(adjacency.get(r, ())) for r in regions})

    def successors(self, region: str) -> tuple[str, ...]:
        return self.moves.get(region, ())


@dataclass(frozen=True)
class AcceptingPath:
    prefix: tuple[str, ...]
    suffix: tuple[str, ...]

    def __post_init__(self):
        if not self.suffix:
            raise ValueError("suffix must be nonempty")

    def __str__(self) -> str:
        return " ".join(self.prefix) + " (" + " ".join(self.suffix) + ")^w"

    def respects(self, ts: RoiTransitionSystem) -> bool:
        return all(b in ts.successors(a) for a, b in consecutive_pairs(self))


def consecutive_pairs(path: AcceptingPath) -> list[tuple[str, str]]:
    """Distinct consecutive pairs, including the prefix/suffix seam and the wrap."""
    word = path.prefix + path.suffix + path.suffix[:1]
    seen: dict[tuple[str, str], None] = {}
    for pair in zip(word, word[1:]):
        seen.setdefault(pair, None)
    return list(seen)


# -- generic product search --------------------------------------------------

State = Hashable


def _product(aut: BuchiAutomaton, init: Iterable, succ: Callable, label: Callable):
    """Degeneralized product: states are ``(system state, automaton state, counter)``."""
    acc = aut.acceptance
    k = len(acc)

    def advance(q, c):
        return (c + 1) % k if q in acc[c] else c

    starts = [(x, q, 0) for x in init for q in aut.successors(aut.initial, label(x))]

    def successors(s):
        x, q, c = s
        c2 = advance(q, c)
        return [(y, r, c2) for y in succ(x) for r in aut.successors(q, label(y))]

    def accepting(s):
        return s[2] == 0 and s[1] in acc[0]

    return starts, successors, accepting


def nested_dfs(starts, successors, accepting):
    """Return ``(stem, cycle)`` for some accepting lasso, or None.

    ``stem`` ends in the accepting seed; ``cycle`` starts at the seed and its
    last state has the seed as a successor.
    """
    outer: set = set()
    inner: set = set()

    def find_cycle(seed):
        stack = [(seed, iter(successors(seed)))]
        while stack:
            s, it = stack[-1]
            for t in it:
                if t == seed:
                    return [x for x, _ in stack]
                if t not in inner:
                    inner.add(t)
                    stack.append((t, iter(successors(t))))
                    break
            else:
                stack.pop()
        return None

    for s0 in starts:
        if s0 in outer:
            continue
        outer.add(s0)
        stack = [(s0, iter(successors(s0)))]
        while stack:
            s, it = stack[-1]
            for t in it:
                if t not in outer:
                    outer.add(t)
                    stack.append((t, iter(successors(t))))
                    break
            else:
                stack.pop()
                if accepting(s):
                    cycle = find_cycle(s)
                    if cycle is not None:
                        return [x for x, _ in stack] + [s], cycle
    return None


def _bfs(starts, successors):
    parent = {}
    order = []
    queue = deque()
    for s in starts:
        if s not in parent:
            parent[s] = None
            queue.append(s)
    while queue:
        s = queue.popleft()
        order.append(s)
        for t in successors(s):
            if t not in parent:
                parent[t] = s
                queue.append(t)
    return parent, order


def _trace(parent, s):
    out = []
    while s is not None:
        out.append(s)
        s = parent[s]
    return out[::-1]


def shortest_lasso(starts, successors, accepting):
    """Lasso through an accepting state minimizing total length, then cycle length."""
    parent, order = _bfs(starts, successors)
    best = None
    for a in order:
        if not accepting(a):
            continue
        stem = _trace(parent, a)
        if best is not None and len(stem) > best[0][0]:
            continue
        back, _ = _bfs(successors(a), successors)
        if a not in back:
            continue
        cycle = [a] + _trace(back, a)[:-1]
        key = (len(stem) - 1 + len(cycle), len(cycle))
        if best is None or key < best[0]:
            best = (key, stem, cycle)
    if best is None:
        return None
    return best[1], best[2]


def _normalize(prefix: list, suffix: list) -> AcceptingPath:
    # shortest period of the suffix
    n = len(suffix)
    for p in range(1, n + 1):
        if n % p == 0 and suffix == suffix[:p] * (n // p):
            suffix = suffix[:p]
            break
    # roll the loop start back while the same word results
    while prefix and prefix[-1] == suffix[-1]:
        suffix = [prefix.pop()] + suffix[:-1]
    return AcceptingPath(tuple(prefix), tuple(suffix))


def _region_cycles(ts: RoiTransitionSystem, length: int):
    """Region sequences of ``length`` whose wrap-around also respects ``ts``."""
    paths = [[r] for r in ts.regions]
    for _ in range(length - 1):
        paths = [p + [r] for p in paths for r in ts.successors(p[-1])]
    return [p for p in paths if p[0] in ts.successors(p[-1])]


def _strong_components(nodes, successors):
    """Tarjan's algorithm, iterative; returns a list of components."""
    index, low, on_stack = {}, {}, set()
    stack, out = [], []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(successors(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    low[work[-1][0]] = min(low[work[-1][0]], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.append(w)
                        if w == v:
                            break
                    out.append(comp)
    return out


def _cycle_acceptors(aut: BuchiAutomaton, cycle: Sequence[str]) -> set:
    """Automaton states from which reading ``cycle`` forever is accepted.

    The returned states are those entered on the first letter of the cycle.
    """
    n = len(cycle)
    nodes = [(0, q) for q in aut.states]

    def successors(v):
        i, q = v
        j = (i + 1) % n
        return [(j, r) for r in aut.successors(q, cycle[j])]

    seen = set(nodes)
    order = list(nodes)
    for v in order:
        for w in successors(v):
            if w not in seen:
                seen.add(w)
                order.append(w)
    good = set()
    for comp in _strong_components(order, successors):
        members = set(comp)
        looping = len(comp) > 1 or comp[0] in successors(comp[0])
        if looping and all(any(q in acc for _, q in comp) for acc in aut.acceptance):
            good |= members
    # backward closure
    preds: dict = {}
    for v in order:
        for w in successors(v):
            preds.setdefault(w, []).append(v)
    queue = deque(good)
    while queue:
        w = queue.popleft()
        for v in preds.get(w, ()):
            if v not in good:
                good.add(v)
                queue.append(v)
    return {q for i, q in good if i == 0}


def _shortest_prefix(ts, aut, initial, cycle):
    """Shortest region prefix ``p`` with ``p cycle cycle ...`` accepted, or None."""
    ok = _cycle_acceptors(aut, cycle)
    if not ok:
        return None
    head = cycle[0]
    if head == initial and any(q in ok for q in aut.successors(aut.initial, head)):
        return []
    starts = [(initial, q) for q in aut.successors(aut.initial, initial)]

    def successors(v):
        r, q = v
        return [(r2, q2) for r2 in ts.successors(r) for q2 in aut.successors(q, r2)]

    parent, order = _bfs(starts, successors)
    for v in order:
        r, q = v
        if head in ts.successors(r) and any(q2 in ok for q2 in aut.successors(q, head)):
            return [s[0] for s in _trace(parent, v)]
    return None


def find_accepting_path(ts: RoiTransitionSystem, aut: BuchiAutomaton, initial: str,
                        cycle_limit: int = 50_000) -> AcceptingPath:
    """Accepting prefix/suffix path of ``ts`` starting at region ``initial``.

    Nested DFS on the product decides whether a path exists. The returned
    path then has the shortest suffix, and among those the shortest prefix,
    provided no more than ``cycle_limit`` candidate suffixes need checking;
    otherwise the shortest lasso of the degeneralized product is returned.
    """
    if initial not in ts.regions:
        raise ValueError(f"unknown initial region {initial!r}")
    starts, successors, accepting = _product(aut, [initial], ts.successors, lambda r: r)
    if nested_dfs(starts, successors, accepting) is None:
        raise NoAcceptingPath(f"no path from {initial!r} satisfies the formula")
    stem, cycle = shortest_lasso(starts, successors, accepting)
    found = _normalize([s[0] for s in stem[:-1]], [s[0] for s in cycle])

    checked = 0
    for length in range(1, len(found.suffix) + 1):
        checked += len(ts.regions) ** length
        if checked > cycle_limit:
            break
        best = None
        for cyc in _region_cycles(ts, length):
            prefix = _shortest_prefix(ts, aut, initial, cyc)
            if prefix is not None and (best is None or len(prefix) < len(best[0])):
                best = (prefix, cyc)
        if best is not None:
            return _normalize(*best)
    return found


def accepts_lasso(aut: BuchiAutomaton, prefix: Sequence[str], suffix: Sequence[str]) -> bool:
    """Whether ``aut`` accepts ``prefix suffix suffix ...`` (product with the word)."""
    word = tuple(prefix) + tuple(suffix)
    n, loop = len(word), len(prefix)

    def succ(i):
        return (i + 1 if i + 1 < n else loop,)

    starts, successors, accepting = _product(aut, [0], succ, word.__getitem__)
    return nested_dfs(starts, successors, accepting) is not None
