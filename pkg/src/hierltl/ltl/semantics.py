"""Direct evaluation of formulas on ultimately periodic words."""
from __future__ import annotations

from functools import lru_cache
from typing import Sequence

from .syntax import (
    Always, And, Atom, Const, Eventually, Formula, Implies, Next, Not, Or, Release, Until,
)


def evaluate_on_lasso(formula: Formula, prefix: Sequence[str], suffix: Sequence[str]) -> bool:
    """Truth of ``formula`` on the word ``prefix suffix suffix ...``.

    Each position carries exactly one region name. Only the finitely many
    distinct positions are evaluated; until-like operators are solved as least
    fixpoints and release-like ones as greatest fixpoints over the successor
    map, which wraps the last suffix position back to the first.
    """
    if not suffix:
        raise ValueError("suffix must be nonempty")
    word = tuple(prefix) + tuple(suffix)
    n = len(word)
    loop = len(prefix)
    succ = [i + 1 if i + 1 < n else loop for i in range(n)]

    @lru_cache(maxsize=None)
    def values(f: Formula) -> tuple[bool, ...]:
        if isinstance(f, Const):
            return (f.value,) * n
        if isinstance(f, Atom):
            return tuple(w == f.name for w in word)
        if isinstance(f, Not):
            return tuple(not v for v in values(f.arg))
        if isinstance(f, And):
            return tuple(a and b for a, b in zip(values(f.left), values(f.right)))
        if isinstance(f, Or):
            return tuple(a or b for a, b in zip(values(f.left), values(f.right)))
        if isinstance(f, Implies):
            return tuple((not a) or b for a, b in zip(values(f.left), values(f.right)))
        if isinstance(f, Next):
            arg = values(f.arg)
            return tuple(arg[succ[i]] for i in range(n))
        if isinstance(f, (Until, Eventually)):
            hold = values(f.left) if isinstance(f, Until) else (True,) * n
            goal = values(f.right if isinstance(f, Until) else f.arg)
            return _fixpoint(hold, goal, succ, least=True)
        if isinstance(f, (Release, Always)):
            trigger = values(f.left) if isinstance(f, Release) else (False,) * n
            keep = values(f.right if isinstance(f, Release) else f.arg)
            return _fixpoint(trigger, keep, succ, least=False)
        raise TypeError(f"not a formula: {f!r}")

    return values(formula)[0]


def _fixpoint(a, b, succ, least):
    n = len(succ)
    cur = [not least] * n
    while True:
        if least:  # a U b
            new = [b[i] or (a[i] and cur[succ[i]]) for i in range(n)]
        else:  # a R b
            new = [b[i] and (a[i] or cur[succ[i]]) for i in range(n)]
        if new == cur:
            return tuple(cur)
        cur = new
