"""
From a temporal-logic task to region plans
==========================================

The office robot must visit room 2 and room 4 infinitely often, see room 3
at least once, and avoid room 3 until it has reached room 4.
"""

from hierltl.grid import plans_for_path
from hierltl.ltl.automaton import ltl_to_buchi
from hierltl.ltl.search import consecutive_pairs, find_accepting_path
from hierltl.ltl.semantics import evaluate_on_lasso
from hierltl.ltl.syntax import parse_ltl, size, to_text
from hierltl.pipeline import load_scenario

scn = load_scenario("office")
task = parse_ltl(scn.formula, scn.regions)
print("formula:", to_text(task), f"(size {size(task)})")

###############################################################################
# Tableau translation into a generalized Büchi automaton.

aut = ltl_to_buchi(task)
print(f"{len(aut.states)} states, {len(aut.acceptance)} acceptance sets")

###############################################################################
# Product with the region transition system and lasso search.

path = find_accepting_path(scn.transitions, aut, scn.initial)
print("accepting path:", path)
print("satisfies the task:", evaluate_on_lasso(task, path.prefix, path.suffix))

###############################################################################
# Each distinct consecutive pair becomes a shortest obstacle-free grid plan.

for (src, dst), plan in plans_for_path(scn.workspace, consecutive_pairs(path)).items():
    print(f"{src} -> {dst}: {len(plan)} cells")
