"""Per-plan abstractions over interval symbols, valid sets and refinement.

A plan is a sequence of grid cells. Each abstraction keeps a tree of boxes
per free cell (the cell lifted over the remaining state dimensions); the
leaves are the symbols. Transitions of a symbol under an input are all the
leaves met by the reachability over-box, plus ``SINK`` when the box leaves
the workspace or touches an obstacle cell.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .grid import Workspace
from .intervals import Box, GridPartition
from .reach import DEFAULT_STEPS, SystemModel, over_approximate_many, simulate_flow

SINK = -1
Cell = tuple[int, ...]


class SplitDepthError(ValueError):
    pass


class BudgetExhausted(RuntimeError):
    def __init__(self, message: str, stats: dict):
        super().__init__(message)
        self.stats = stats


class ContractViolation(RuntimeError):
    pass


def _levels(parts: int) -> int:
    return max(0, math.ceil(math.log2(parts))) if parts > 1 else 0


class SymbolStore:
    """Refinable symbols for every free cell of a grid partition.

    The partition covers the first ``partition.dim`` state dimensions; the
    remaining ones span the full state-space range. Symbol ids are never
    reused, and a split replaces a leaf by its children in the cell's leaf
    list so that iteration order stays stable.
    """

    def __init__(self, partition: GridPartition, state_space: Box, obstacles: Iterable[Cell] = (),
                 initial_split: Sequence[int] | None = None):
        self.partition = partition
        self.state_space = state_space
        self.obstacles = frozenset(tuple(c) for c in obstacles)
        self.m = partition.dim
        self.n = state_space.dim
        self._lo: list[np.ndarray] = []
        self._hi: list[np.ndarray] = []
        self._cell: list[Cell] = []
        self._depth: list[tuple[int, ...]] = []
        self._children: dict[int, tuple[int, ...]] = {}
        self.roots: dict[Cell, int] = {}
        self._leaves: dict[Cell, list[int]] = {}
        self._arrays: dict[Cell, tuple] = {}
        for cell in partition.cells():
            if cell in self.obstacles:
                continue
            box = self.lifted(cell)
            root = self._new(box.lo, box.hi, cell, (0,) * self.n)
            self.roots[cell] = root
            self._leaves[cell] = [root]
            if initial_split is not None and np.prod(initial_split) > 1:
                self.split(root, initial_split, max_depth=None)

    def _new(self, lo, hi, cell, depth) -> int:
        self._lo.append(np.array(lo, dtype=float))
        self._hi.append(np.array(hi, dtype=float))
        self._cell.append(cell)
        self._depth.append(depth)
        return len(self._lo) - 1

    def __len__(self) -> int:
        return sum(len(v) for v in self._leaves.values())

    def lifted(self, cell: Cell) -> Box:
        b = self.partition.cell_box(cell)
        return Box(np.concatenate([b.lo, self.state_space.lo[self.m:]]),
                   np.concatenate([b.hi, self.state_space.hi[self.m:]]))

    def box(self, sid: int) -> Box:
        return Box(self._lo[sid], self._hi[sid])

    def cell_of(self, sid: int) -> Cell:
        return self._cell[sid]

    def depth(self, sid: int) -> tuple[int, ...]:
        return self._depth[sid]

    def is_leaf(self, sid: int) -> bool:
        return 0 <= sid < len(self._lo) and sid not in self._children

    def leaves(self, cell: Cell) -> list[int]:
        return list(self._leaves.get(tuple(cell), ()))

    def leaf_arrays(self, cell: Cell):
        """``(ids, lo, hi)`` arrays for the current leaves of ``cell``."""
        cell = tuple(cell)
        hit = self._arrays.get(cell)
        if hit is None:
            ids = np.array(self._leaves[cell], dtype=int)
            hit = (ids, np.array([self._lo[i] for i in ids]), np.array([self._hi[i] for i in ids]))
            self._arrays[cell] = hit
        return hit

    def can_split(self, sid: int, parts: Sequence[int], max_depth: int | None) -> bool:
        if max_depth is None:
            return True
        return all(d + _levels(p) <= max_depth for d, p in zip(self._depth[sid], parts))

    def split(self, sid: int, parts: Sequence[int], max_depth: int | None = 6) -> list[int]:
        if not self.is_leaf(sid):
            raise KeyError(f"{sid} is not a current leaf")
        parts = [int(p) for p in parts]
        if not self.can_split(sid, parts, max_depth):
            raise SplitDepthError(f"symbol {sid} is at the maximum split depth")
        cell = self._cell[sid]
        depth = tuple(d + _levels(p) for d, p in zip(self._depth[sid], parts))
        edges = []
        for lo, hi, p in zip(self._lo[sid], self._hi[sid], parts):
            e = lo + (hi - lo) * (np.arange(p + 1) / p)
            e[0], e[-1] = lo, hi
            edges.append(e)
        kids = []
        for idx in np.ndindex(*parts):
            lo = [e[i] for e, i in zip(edges, idx)]
            hi = [e[i + 1] for e, i in zip(edges, idx)]
            kids.append(self._new(lo, hi, cell, depth))
        self._children[sid] = tuple(kids)
        leaves = self._leaves[cell]
        at = leaves.index(sid)
        leaves[at:at + 1] = kids
        self._arrays.pop(cell, None)
        return kids

    def locate(self, z) -> int | None:
        """Leaf holding ``z`` under the half-open convention, or None."""
        z = np.asarray(z, dtype=float)
        cell = self.partition.locate(z[: self.m])
        if cell is None or cell in self.obstacles:
            return None
        if not (np.all(self.state_space.lo[self.m:] <= z[self.m:])
                and np.all(z[self.m:] <= self.state_space.hi[self.m:])):
            return None
        node = self.roots[cell]
        top = self._hi[node]
        while node in self._children:
            for kid in self._children[node]:
                lo, hi = self._lo[kid], self._hi[kid]
                if np.all(lo <= z) and np.all((z < hi) | ((z == hi) & (hi == top))):
                    node = kid
                    break
            else:  # rounding at a shared face; fall back to closed membership
                node = next(k for k in self._children[node]
                            if np.all(self._lo[k] <= z) and np.all(z <= self._hi[k]))
        return node

    def query(self, lo, hi) -> set[int]:
        """Leaves whose closed box meets ``[lo, hi]``, plus ``SINK`` if it leaves free space."""
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        ranges = self.partition.index_range(Box(lo[: self.m], hi[: self.m]))
        out: set[int] = set()
        if ranges is None or np.any(lo[self.m:] < self.state_space.lo[self.m:]) \
                or np.any(hi[self.m:] > self.state_space.hi[self.m:]):
            out.add(SINK)
            if ranges is None:
                clipped_lo = np.maximum(lo[: self.m], self.partition.workspace.lo)
                clipped_hi = np.minimum(hi[: self.m], self.partition.workspace.hi)
                if np.any(clipped_lo > clipped_hi):
                    return out
                ranges = self.partition.index_range(Box(clipped_lo, clipped_hi))
        for cell in np.ndindex(*[b - a + 1 for a, b in ranges]):
            cell = tuple(a + i for (a, _), i in zip(ranges, cell))
            if cell in self.obstacles:
                out.add(SINK)
                continue
            ids, llo, lhi = self.leaf_arrays(cell)
            hit = np.all(llo <= hi, axis=1) & np.all(lhi >= lo, axis=1)
            out.update(int(i) for i in ids[hit])
        return out


def wrap_pieces(lo, hi, periodic: dict, state_space: Box) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a box along periodic dimensions into pieces inside ``(lo_d, lo_d + period]``.

    A piece touching the lower end also yields the identified upper point,
    since states are normalised into the half-open range.
    """
    pieces = [(np.array(lo, float), np.array(hi, float))]
    for d, period in periodic.items():
        base = state_space.lo[d]
        top = base + period
        out = []
        for plo, phi in pieces:
            if phi[d] - plo[d] >= period:
                ranges = [(base, top)]
            else:
                shift = period * math.floor((plo[d] - base) / period)
                a, b = plo[d] - shift, phi[d] - shift
                ranges = [(a, b)] if b <= top else [(a, top), (base, b - period)]
            extra = [(top, top) for a, _ in ranges if a <= base]
            for a, b in ranges + extra:
                nlo, nhi = plo.copy(), phi.copy()
                nlo[d], nhi[d] = a, b
                out.append((nlo, nhi))
        pieces = out
    return pieces


def normalize_state(z, periodic: dict, state_space: Box) -> np.ndarray:
    z = np.array(z, dtype=float)
    for d, period in periodic.items():
        base = state_space.lo[d]
        # into (base, base + period]
        z[..., d] = base + period - np.mod(base + period - z[..., d], period)
    return z


def coverage(leaf_lo: np.ndarray, leaf_hi: np.ndarray, valid_mask: np.ndarray, dims: int) -> np.ndarray:
    """For each leaf, whether its projection on the first ``dims`` axes is
    covered by the union of projections of the leaves flagged in ``valid_mask``."""
    n = leaf_lo.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)
    if valid_mask.all():
        return np.ones(n, dtype=bool)
    if not valid_mask.any():
        return np.zeros(n, dtype=bool)
    lo, hi = leaf_lo[:, :dims], leaf_hi[:, :dims]
    edges = [np.unique(np.concatenate([lo[:, d], hi[:, d]])) for d in range(dims)]
    first = np.stack([np.searchsorted(edges[d], lo[:, d]) for d in range(dims)], axis=1)
    last = np.stack([np.searchsorted(edges[d], hi[:, d]) for d in range(dims)], axis=1)
    grid = np.zeros([max(len(e) - 1, 1) for e in edges], dtype=bool)
    for i in np.flatnonzero(valid_mask):
        grid[tuple(slice(a, b) for a, b in zip(first[i], last[i]))] = True
    out = np.empty(n, dtype=bool)
    for i in range(n):
        region = grid[tuple(slice(a, b) for a, b in zip(first[i], last[i]))]
        out[i] = region.size > 0 and bool(region.all()) if np.all(last[i] > first[i]) else _degenerate(
            grid, first[i], last[i])
    return out


def _degenerate(grid, first, last):
    # a flat projection is covered if a neighbouring elementary cell is
    sl = tuple(slice(max(a - 1, 0), max(b, a + 1) if b > a else min(a + 1, s))
               for a, b, s in zip(first, last, grid.shape))
    return bool(grid[sl].any())


@dataclass
class RefinementQueue:
    """Least-refined-first choice of plan steps, oldest first on ties."""

    size: int
    order: list[int] = field(default_factory=list)
    refined: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.order = list(range(self.size))
        self.refined = [0] * self.size

    def pick(self, k: int, eligible: Callable[[int], bool] = lambda j: True) -> int | None:
        candidates = [j for j in self.order if k <= j < self.size and eligible(j)]
        if not candidates:
            return None
        least = min(self.refined[j] for j in candidates)
        return next(j for j in candidates if self.refined[j] == least)

    def record(self, j: int) -> None:
        self.refined[j] += 1
        self.order.remove(j)
        self.order.append(j)


@dataclass
class Drive:
    input_index: int
    control: np.ndarray
    leaf: int


@dataclass
class Rotate:
    omega: float
    duration: float
    target_leaf: int
    target_heading: float


class AbstractionState:
    """Abstraction of ``system`` attached to one plan.

    ``projected`` switches to the relaxed validity used for planar plans of
    systems with extra state dimensions (the unicycle heading): a target
    symbol is acceptable when its planar footprint is covered by footprints
    of valid symbols, and the robot turns in place to reach one of them.
    """

    def __init__(self, system: SystemModel, workspace: Workspace, plan: Sequence[Cell], inputs,
                 tau: float, *, disturbance: Box | None = None, projected: bool = False,
                 initial_split: Sequence[int] | None = None, split_policy: str = "uniform",
                 max_depth: int = 6, steps: int = DEFAULT_STEPS, heading_dim: int = 2,
                 turn_control: int = 1, batch: int = 4096):
        self.system = system
        self.workspace = workspace
        self.plan = [tuple(int(i) for i in c) for c in plan]
        if not self.plan:
            raise ValueError("empty plan")
        for c in self.plan:
            if not workspace.is_free(c):
                raise ValueError(f"plan cell {c} is not free")
        if len(set(self.plan)) != len(self.plan):
            raise ValueError("plan visits a cell twice")
        self.inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        if self.inputs.shape[1] != system.p:
            raise ValueError("input dimension does not match the system")
        self.tau = float(tau)
        self.disturbance = system.disturbance_space if disturbance is None else disturbance
        self.projected = projected
        if split_policy not in ("uniform", "longest"):
            raise ValueError(f"unknown split policy {split_policy!r}")
        self.split_policy = split_policy
        self.max_depth = max_depth
        self.steps = steps
        self.heading_dim = heading_dim
        self.turn_control = turn_control
        self.batch = batch
        self.periodic = dict(system.periodic)
        self.store = SymbolStore(workspace.partition, system.state_space, workspace.obstacles, initial_split)
        self.m = workspace.partition.dim
        r = len(self.plan) - 1
        self.valid: list[set[int]] = [set() for _ in range(r)] + [set(self.store.leaves(self.plan[-1]))]
        self.controller: dict[int, int] = {}
        self._over: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
        self._centre: dict[tuple[int, int], np.ndarray] = {}
        self._targets: dict[tuple[int, int], frozenset[int]] = {}
        self._incoming: dict[int, set[tuple[int, int]]] = {}
        self.reach_calls = 0

    # -- transitions -------------------------------------------------------

    @property
    def r(self) -> int:
        return len(self.plan) - 1

    def _compute_over(self, pairs: list[tuple[int, int]]) -> None:
        todo = [p for p in pairs if p not in self._over]
        for start in range(0, len(todo), self.batch):
            chunk = todo[start:start + self.batch]
            zlo = np.array([self.store._lo[s] for s, _ in chunk])
            zhi = np.array([self.store._hi[s] for s, _ in chunk])
            u = self.inputs[[i for _, i in chunk]]
            lo, hi = over_approximate_many(self.system, zlo, zhi, u, self.disturbance, self.tau, self.steps)
            self.reach_calls += len(chunk)
            for key, a, b in zip(chunk, lo, hi):
                self._over[key] = (a, b)

    def _compute_centre(self, pairs: list[tuple[int, int]]) -> None:
        todo = [p for p in pairs if p not in self._centre]
        for start in range(0, len(todo), self.batch):
            chunk = todo[start:start + self.batch]
            z0 = np.array([0.5 * (self.store._lo[s] + self.store._hi[s]) for s, _ in chunk])
            u = self.inputs[[i for _, i in chunk]]
            z = simulate_flow(self.system, z0, u, self.disturbance.center, self.tau, self.steps)
            for key, v in zip(chunk, z):
                self._centre[key] = v

    def over_box(self, leaf: int, ui: int) -> Box:
        self._compute_over([(leaf, ui)])
        lo, hi = self._over[(leaf, ui)]
        return Box(lo, hi)

    def transitions(self, leaf: int, ui: int) -> frozenset[int]:
        """All symbols (and possibly ``SINK``) met by the over-box of ``leaf`` under input ``ui``."""
        if not self.store.is_leaf(leaf):
            raise KeyError(f"{leaf} is not a current symbol")
        if not 0 <= ui < len(self.inputs):
            raise IndexError(f"input index {ui} out of range")
        key = (leaf, ui)
        hit = self._targets.get(key)
        if hit is not None:
            return hit
        self._compute_over([key])
        lo, hi = self._over[key]
        found: set[int] = set()
        for plo, phi in wrap_pieces(lo, hi, self.periodic, self.system.state_space):
            found |= self.store.query(plo, phi)
        hit = frozenset(found)
        self._targets[key] = hit
        for t in hit:
            self._incoming.setdefault(t, set()).add(key)
        return hit

    def _forget(self, sid: int) -> None:
        for key in self._incoming.pop(sid, ()):
            self._targets.pop(key, None)
        for ui in range(len(self.inputs)):
            self._targets.pop((sid, ui), None)
            self._over.pop((sid, ui), None)
            self._centre.pop((sid, ui), None)

    # -- valid sets --------------------------------------------------------

    def acceptable(self, k: int) -> set[int]:
        """Symbols of plan step ``k`` that a transition may end in."""
        if not self.projected or k == self.r:
            return set(self.valid[k])
        ids, lo, hi = self.store.leaf_arrays(self.plan[k])
        mask = np.isin(ids, list(self.valid[k]))
        return {int(i) for i in ids[coverage(lo, hi, mask, self.m)]}

    def initial_covered(self) -> bool:
        """Whether every state of the first plan cell is handled."""
        leaves = self.store.leaves(self.plan[0])
        if self.r == 0:
            return True
        if not self.projected:
            return self.valid[0] == set(leaves)
        return len(self.acceptable(0)) == len(leaves)

    def valid_set_step(self, k: int) -> tuple[set[int], dict[int, int]]:
        """Recompute the valid set of plan step ``k < r`` and its controller entries."""
        if not 0 <= k < self.r:
            raise IndexError(f"step {k} has no successor in the plan")
        target = self.acceptable(k + 1)
        leaves = self.store.leaves(self.plan[k])
        for s in leaves:
            self.controller.pop(s, None)
        if not target:
            self.valid[k] = set()
            return set(), {}
        nxt_box = self.workspace.partition.cell_box(self.plan[k + 1])
        pairs = [(s, ui) for s in leaves for ui in range(len(self.inputs))]
        self._compute_centre(pairs)
        # the centre's successor lies in the over-box; if it is clearly
        # outside the next cell no symbol there can absorb the whole box
        ends = np.array([self._centre[p][: self.m] for p in pairs])
        near = np.all(ends >= nxt_box.lo - 1e-9, axis=1) & np.all(ends <= nxt_box.hi + 1e-9, axis=1)
        hopeful = [p for p, ok in zip(pairs, near) if ok]
        self._compute_over([p for p in hopeful if p not in self._targets])
        good = set(hopeful)
        valid, chosen = set(), {}
        for s in leaves:
            for ui in range(len(self.inputs)):
                if (s, ui) in good and self.transitions(s, ui) <= target:
                    valid.add(s)
                    chosen[s] = ui
                    break
        self.valid[k] = valid
        self.controller.update(chosen)
        return valid, chosen

    def split_parts(self, sid: int) -> list[int]:
        if self.split_policy == "uniform":
            return [2] * self.store.n
        b = self.store.box(sid)
        width = b.width / self.system.state_space.width
        parts = [1] * self.store.n
        parts[int(np.argmax(width))] = 2
        return parts

    def splittable(self, sid: int) -> bool:
        return self.store.can_split(sid, self.split_parts(sid), self.max_depth)

    def split_leaf(self, sid: int) -> list[int]:
        kids = self.store.split(sid, self.split_parts(sid), self.max_depth)
        self._forget(sid)
        if self.store.cell_of(sid) == self.plan[-1]:
            self.valid[-1] = set(self.store.leaves(self.plan[-1]))
        return kids

    def invalid_leaves(self, k: int) -> list[int]:
        return [s for s in self.store.leaves(self.plan[k]) if s not in self.valid[k]]

    # -- controller use ----------------------------------------------------

    def lookup(self, z) -> int | None:
        z = normalize_state(z, self.periodic, self.system.state_space)
        return self.store.locate(z)

    def concretize(self, k: int, z) -> Drive | Rotate:
        """Control decision at plan step ``k`` for the measured state ``z``."""
        if not 0 <= k < self.r:
            raise IndexError(f"no control at plan step {k}")
        z = normalize_state(z, self.periodic, self.system.state_space)
        leaf = self.store.locate(z)
        cell = self.plan[k]
        if leaf is None or self.store.cell_of(leaf) != cell:
            raise ContractViolation(f"state {z} is not in plan cell {cell} at step {k}")
        if leaf in self.valid[k]:
            ui = self.controller[leaf]
            return Drive(ui, self.inputs[ui].copy(), leaf)
        ids, lo, hi = self.store.leaf_arrays(cell)
        valid_mask = np.isin(ids, list(self.valid[k]))
        inside = valid_mask & np.all(lo <= z, axis=1) & np.all(z <= hi, axis=1)
        if inside.any():
            s = int(ids[np.flatnonzero(inside)[0]])
            ui = self.controller[s]
            return Drive(ui, self.inputs[ui].copy(), s)
        if self.projected:
            m = self.m
            over = valid_mask & np.all(lo[:, :m] <= z[:m], axis=1) & np.all(z[:m] <= hi[:, :m], axis=1)
            if over.any():
                h = self.heading_dim
                best = None
                for i in np.flatnonzero(over):
                    mid = 0.5 * (lo[i, h] + hi[i, h])
                    delta = math.remainder(mid - z[h], 2 * math.pi)
                    if best is None or abs(delta) < abs(best[0]) - 1e-12:
                        best = (delta, int(ids[i]), mid)
                delta, s, mid = best
                rate = float(self.system.control_space.hi[self.turn_control])
                return Rotate(math.copysign(rate, delta), abs(delta) / rate, s, mid)
        raise ContractViolation(f"state {z} at step {k} is outside every valid symbol of {cell}")


@dataclass
class SynthesizedController:
    abstraction: AbstractionState
    iterations: int
    splits: int
    seconds: float

    @property
    def plan(self) -> list[Cell]:
        return self.abstraction.plan

    def concretize(self, k: int, z) -> Drive | Rotate:
        return self.abstraction.concretize(k, z)

    def lookup(self, z) -> int | None:
        return self.abstraction.lookup(z)

    def stats(self) -> dict:
        a = self.abstraction
        return {"iterations": self.iterations, "splits": self.splits, "seconds": self.seconds,
                "symbols": sum(len(a.store.leaves(c)) for c in a.plan), "reach_calls": a.reach_calls}


def refine_plan(abs_: AbstractionState, max_iterations: int = 200,
                on_iteration: Callable[[AbstractionState, int, int], None] | None = None,
                clock: Callable[[], float] = time.perf_counter) -> SynthesizedController:
    """Backward valid-set computation with refinement of the least refined cells.

    ``on_iteration(state, k, j)`` is called after every refinement round.
    Raises ``BudgetExhausted`` when ``max_iterations`` rounds do not suffice
    or no refinable symbol remains.
    """
    start = clock()
    r = abs_.r
    queue = RefinementQueue(r)
    iterations = splits = 0

    def stats():
        return {"iterations": iterations, "splits": splits, "seconds": clock() - start}

    for k in range(r - 1, -1, -1):
        abs_.valid_set_step(k)
        while not abs_.valid[k] or (k == 0 and not abs_.initial_covered()):
            if iterations >= max_iterations:
                raise BudgetExhausted(f"refinement budget of {max_iterations} iterations exhausted "
                                      f"at plan step {k}", stats())

            def eligible(j):
                return any(abs_.splittable(s) for s in abs_.invalid_leaves(j))

            j = queue.pick(k, eligible)
            if j is None:
                raise BudgetExhausted(f"no refinable symbol left at plan step {k} "
                                      f"(maximum depth {abs_.max_depth})", stats())
            for s in abs_.invalid_leaves(j):
                if abs_.splittable(s):
                    abs_.split_leaf(s)
                    splits += 1
            queue.record(j)
            for l in range(j, k - 1, -1):
                abs_.valid_set_step(l)
            iterations += 1
            if on_iteration is not None:
                on_iteration(abs_, k, j)
    return SynthesizedController(abs_, iterations, splits, clock() - start)


def brute_force_valid_sets(abs_: AbstractionState, down_to: int = 0) -> list[set[int] | None]:
    """Valid sets straight from the definition, for plan steps ``>= down_to``.

    Every (symbol, input) pair of the plan cells is evaluated afresh and its
    over-box compared with every leaf of the store; nothing is shared with
    the cached path except the reachability engine itself.
    """
    store = abs_.store
    sys = abs_.system
    part = abs_.workspace.partition
    m = store.m
    all_ids = np.array([s for c in store.roots for s in store.leaves(c)])
    all_lo = np.array([store.box(s).lo for s in all_ids])
    all_hi = np.array([store.box(s).hi for s in all_ids])
    obstacle_boxes = [part.cell_box(c) for c in abs_.workspace.obstacles]
    out: list[set[int] | None] = [None] * (abs_.r + 1)
    out[abs_.r] = set(store.leaves(abs_.plan[-1]))

    def successors(lo, hi):
        hit = set()
        for plo, phi in wrap_pieces(lo, hi, abs_.periodic, sys.state_space):
            if np.any(plo[:m] < part.workspace.lo) or np.any(phi[:m] > part.workspace.hi):
                hit.add(SINK)
            if any(np.all(cb.lo <= phi[:m]) and np.all(plo[:m] <= cb.hi) for cb in obstacle_boxes):
                hit.add(SINK)
            meet = np.all(all_lo <= phi, axis=1) & np.all(plo <= all_hi, axis=1)
            hit.update(int(i) for i in all_ids[meet])
        return hit

    nu = len(abs_.inputs)
    for k in range(abs_.r - 1, down_to - 1, -1):
        nxt = out[k + 1]
        if abs_.projected and k + 1 < abs_.r:
            nxt = _covered_by_subtraction(store, abs_.plan[k + 1], nxt, m)
        leaves = store.leaves(abs_.plan[k])
        if not leaves:
            out[k] = set()
            continue
        zlo = np.repeat([store.box(s).lo for s in leaves], nu, axis=0)
        zhi = np.repeat([store.box(s).hi for s in leaves], nu, axis=0)
        u = np.tile(abs_.inputs, (len(leaves), 1))
        lo, hi = over_approximate_many(sys, zlo, zhi, u, abs_.disturbance, abs_.tau, abs_.steps)
        out[k] = {s for i, s in enumerate(leaves)
                  if any(successors(lo[i * nu + j], hi[i * nu + j]) <= nxt for j in range(nu))}
    return out


def _covered_by_subtraction(store: SymbolStore, cell: Cell, valid: set[int], m: int) -> set[int]:
    # footprint coverage by repeated box subtraction, independent of ``coverage``
    pieces = [store.box(s).project(range(m)) for s in valid]
    out = set()
    for s in store.leaves(cell):
        rest = [store.box(s).project(range(m))]
        for p in pieces:
            rest = [q for r in rest for q in _subtract(r, p)]
            if not rest:
                break
        if not rest:
            out.add(s)
    return out


def _subtract(a: Box, b: Box) -> list[Box]:
    """Closures of the pieces of ``a`` minus the interior of ``b`` with positive volume."""
    lo, hi = a.lo.copy(), a.hi.copy()
    if np.any(b.hi <= lo) or np.any(b.lo >= hi):
        return [a] if np.all(hi > lo) else []
    out = []
    for d in range(a.dim):
        if b.lo[d] > lo[d]:
            nhi = hi.copy()
            nhi[d] = b.lo[d]
            out.append(Box(lo.copy(), nhi))
            lo[d] = b.lo[d]
        if b.hi[d] < hi[d]:
            nlo = lo.copy()
            nlo[d] = b.hi[d]
            out.append(Box(nlo, hi.copy()))
            hi[d] = b.hi[d]
    return [p for p in out if np.all(p.hi > p.lo)]
