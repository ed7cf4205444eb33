"""
The office scenario end to end
==============================

All three layers on the office floor, one closed-loop run, and the
exported artifacts. Synthesis of the five plans takes a few minutes.
"""

import sys
from pathlib import Path

import numpy as np

from hierltl import export
from hierltl.pipeline import load_scenario, run_pipeline, simulate

out = Path(sys.argv[1] if len(sys.argv) > 1 else "office_out")
scn = load_scenario("office")
print(f"sampling period {scn.tau} s, {len(scn.inputs)} control values")


def progress(pair, ctrl):
    s = ctrl.stats()
    print(f"  {pair[0]} -> {pair[1]}: {s['iterations']} iterations, {s['symbols']} symbols, {s['seconds']:.0f} s")


bundle = run_pipeline(scn, on_plan=progress)
print("path:", bundle.path)

###############################################################################
# One prefix and one suffix iteration from a random state in room 1.

store = bundle.controllers[bundle.pairs[0]].abstraction.store
start = store.lifted(scn.workspace.rois[scn.initial])
z0 = np.random.default_rng(scn.seed).uniform(start.lo, start.hi)
rec = simulate(bundle, scn, z0, suffix_iterations=1)
print(f"{len(rec)} trace rows, {rec.modes.count('rotate')} turns in place, "
      f"{len(rec.cell_mismatches())} off-plan samples")

###############################################################################
# Controller tables, the trace and a drawing of the floor.

files = export.export_bundle(bundle, scn.workspace, out, [rec])
export.write_trajectory_csv(rec, out / "trajectory.csv", scn.state_names, scn.control_names)
for f in files:
    print("wrote", f)
