"""
Refining an abstraction along a short corridor
==============================================

A unicycle has to cross three cells of a 4 x 2 grid and turn into the
cell above. Symbols start as whole cells with four heading ranges and are
split until every planar position of the first cell is controllable.
"""

import numpy as np

from hierltl.grid import Workspace
from hierltl.intervals import Box, GridPartition
from hierltl.models import unicycle_model
from hierltl.pipeline import discretize_inputs, suggest_tau
from hierltl.reach import simulate_flow
from hierltl.refine import AbstractionState, Drive, refine_plan

ws = Workspace(GridPartition(Box([0, 0], [4, 2]), (4, 2)))
robot = unicycle_model(state_space=Box([0, 0, -np.pi], [4, 2, np.pi]))
inputs = discretize_inputs(robot.control_space, (5, 5))
tau = suggest_tau(ws.partition.cell_size, 0.5)
plan = [(0, 0), (1, 0), (2, 0), (2, 1)]


def report(state, k, j):
    sizes = [len(state.store.leaves(c)) for c in state.plan]
    print(f"  step {k}: refined cell {j}, symbols per cell {sizes}")


abstraction = AbstractionState(robot, ws, plan, inputs, tau, projected=True, initial_split=[1, 1, 4])
ctrl = refine_plan(abstraction, on_iteration=report)
print(ctrl.stats())

###############################################################################
# Closed loop from a few random starts. A state whose heading is not yet
# controllable first turns in place.

rng = np.random.default_rng(1)
for z in rng.uniform([0, 0, -np.pi], [1, 1, np.pi], size=(3, 3)):
    cells = []
    for k in range(len(plan) - 1):
        cmd = ctrl.concretize(k, z)
        if not isinstance(cmd, Drive):
            z = z.copy()
            z[2] = cmd.target_heading
            cmd = ctrl.concretize(k, z)
        z = simulate_flow(robot, z, cmd.control, np.zeros(3), tau)
        cells.append(ws.partition.locate(z[:2]))
    print("visited", cells)
