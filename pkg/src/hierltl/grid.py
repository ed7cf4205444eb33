"""Workspace transition system over grid cells and discrete plans between regions."""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .intervals import GridPartition

Cell = tuple[int, ...]
Weight = Callable[[Cell, Cell], float]


class PlanInfeasible(RuntimeError):
    def __init__(self, start: Cell, goal: Cell, label: str = ""):
        what = label or f"{start} -> {goal}"
        super().__init__(f"plan infeasible: no obstacle-free path for {what}")
        self.start, self.goal = start, goal


@dataclass(frozen=True)
class Workspace:
    partition: GridPartition
    obstacles: frozenset = field(default_factory=frozenset)
    rois: Mapping[str, Cell] = field(default_factory=dict)

    def __post_init__(self):
        obstacles = frozenset(tuple(int(i) for i in c) for c in self.obstacles)
        object.__setattr__(self, "obstacles", obstacles)
        object.__setattr__(self, "rois", {k: tuple(int(i) for i in v) for k, v in self.rois.items()})
        for c in obstacles:
            self.partition.check(c)
        for name, c in self.rois.items():
            self.partition.check(c)
            if c in obstacles:
                raise ValueError(f"region {name!r} lies on an obstacle cell {c}")

    def is_free(self, cell: Cell) -> bool:
        return self.partition.is_valid(cell) and tuple(cell) not in self.obstacles

    def roi_cells(self) -> set[Cell]:
        return set(self.rois.values())


def neighbors(ws: Workspace, cell: Sequence[int]) -> list[Cell]:
    """The cell itself and its facet neighbours, minus obstacles.

    Neighbours come in the fixed order -x, +x, -y, +y (and so on for higher
    dimensions), which makes plan tie-breaking reproducible.
    """
    cell = tuple(int(i) for i in cell)
    ws.partition.check(cell)
    if cell in ws.obstacles:
        return []
    out = [cell]
    for d in range(len(cell)):
        for step in (-1, 1):
            nb = cell[:d] + (cell[d] + step,) + cell[d + 1:]
            if ws.is_free(nb):
                out.append(nb)
    return out


def _moves(ws: Workspace, cell: Cell, blocked: frozenset):
    return [c for c in neighbors(ws, cell)[1:] if c not in blocked]


def shortest_plan(ws: Workspace, start: Sequence[int], goal: Sequence[int],
                  weights: Weight | None = None, blocked: Iterable[Cell] = ()) -> list[Cell]:
    """Shortest obstacle-free cell sequence from ``start`` to ``goal``.

    Unit costs use breadth-first search; ``weights(a, b)`` switches to
    Dijkstra. Cells in ``blocked`` are never entered as intermediate cells.
    """
    start = tuple(int(i) for i in start)
    goal = tuple(int(i) for i in goal)
    for c in (start, goal):
        ws.partition.check(c)
        if c in ws.obstacles:
            raise PlanInfeasible(start, goal, f"{start} -> {goal} (endpoint {c} is an obstacle)")
    if start == goal:
        return [start]
    blocked = frozenset(tuple(c) for c in blocked) - {start, goal}
    parent = {start: None}
    if weights is None:
        queue = deque([start])
        while queue and goal not in parent:
            c = queue.popleft()
            for nb in _moves(ws, c, blocked):
                if nb not in parent:
                    parent[nb] = c
                    queue.append(nb)
    else:
        dist = {start: 0.0}
        heap = [(0.0, 0, start)]
        tick = 1
        done = set()
        while heap:
            d, _, c = heapq.heappop(heap)
            if c in done:
                continue
            done.add(c)
            if c == goal:
                break
            for nb in _moves(ws, c, blocked):
                w = float(weights(c, nb))
                if w <= 0:
                    raise ValueError("transition weights must be positive")
                if nb not in dist or d + w < dist[nb]:
                    dist[nb] = d + w
                    parent[nb] = c
                    heapq.heappush(heap, (d + w, tick, nb))
                    tick += 1
    if goal not in parent:
        raise PlanInfeasible(start, goal)
    plan = [goal]
    while parent[plan[-1]] is not None:
        plan.append(parent[plan[-1]])
    return plan[::-1]


def obstacle_penalty(ws: Workspace, penalty: float = 1.0) -> Weight:
    """Unit cost plus ``penalty`` for entering a cell that touches an obstacle or the border."""
    def weight(a: Cell, b: Cell) -> float:
        near = any(
            not ws.is_free(b[:d] + (b[d] + s,) + b[d + 1:])
            for d in range(len(b)) for s in (-1, 1)
        )
        return 1.0 + (penalty if near else 0.0)
    return weight


def plans_for_path(ws: Workspace, pairs: Iterable[tuple[str, str]], weights: Weight | None = None,
                   avoid_other_regions: bool = False) -> dict[tuple[str, str], list[Cell]]:
    """One plan per distinct region pair, in first-occurrence order."""
    plans: dict[tuple[str, str], list[Cell]] = {}
    for src, dst in pairs:
        if (src, dst) in plans:
            continue
        for name in (src, dst):
            if name not in ws.rois:
                raise KeyError(f"unknown region {name!r}")
        blocked = ws.roi_cells() if avoid_other_regions else ()
        try:
            plans[(src, dst)] = shortest_plan(ws, ws.rois[src], ws.rois[dst], weights, blocked)
        except PlanInfeasible as err:
            raise PlanInfeasible(err.start, err.goal, f"{src} -> {dst}") from None
    return plans
