"""Command-line interface.

Exit codes: 0 success, 1 other errors (I/O, bad scenario), 2 usage,
3 specification layer, 4 planning layer, 5 synthesis layer,
6 controller contract violation during simulation.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import export
from .intervals import Box
from .ltl.automaton import ltl_to_buchi
from .ltl.syntax import LtlSyntaxError, parse_ltl, size, to_text
from .models import polynomial_model, unicycle_model
from .pipeline import PipelineError, ScenarioError, load_scenario, run_pipeline, simulate
from .reach import ReachError, over_approximate
from .refine import ContractViolation

EXIT_OTHER, EXIT_USAGE, EXIT_CONTRACT = 1, 2, 6
LAYER_EXIT = {1: 3, 2: 4, 3: 5}


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _progress(quiet):
    if quiet:
        return None

    def report(pair, ctrl):
        s = ctrl.stats()
        print(f"  {pair[0]} -> {pair[1]}: {s['iterations']} iterations, {s['symbols']} symbols, "
              f"{s['seconds']:.1f} s", file=sys.stderr)
    return report


def cmd_parse_ltl(args) -> int:
    atoms = [a for a in args.atoms.split(",") if a]
    f = parse_ltl(args.formula, atoms)
    print(to_text(f))
    print(f"size {size(f)}")
    if args.automaton:
        sys.stdout.write(ltl_to_buchi(f).dump())
    return 0


def cmd_plan(args) -> int:
    scn = load_scenario(args.scenario)
    bundle = run_pipeline(scn, layers=2)
    print(f"path {bundle.path}")
    for (src, dst), plan in bundle.plans.items():
        cells = " ".join(",".join(map(str, c)) for c in plan)
        print(f"{src} -> {dst} ({len(plan)} cells): {cells}")
    return 0


def cmd_reach(args) -> int:
    systems = {"unicycle": unicycle_model, "polynomial": polynomial_model}
    sysm = systems[args.system]()
    zbox = Box(args.lo, args.hi)
    dbox = Box(args.dlo, args.dhi) if args.dlo is not None else sysm.disturbance_space
    res = over_approximate(sysm, zbox, args.input, dbox, args.tau, args.steps)
    print("lo " + " ".join(repr(float(v)) for v in res.over_box.lo))
    print("hi " + " ".join(repr(float(v)) for v in res.over_box.hi))
    return 0


def _synthesize(args):
    scn = load_scenario(args.scenario)
    return scn, run_pipeline(scn, on_plan=_progress(args.quiet))


def cmd_synthesize(args) -> int:
    scn, bundle = _synthesize(args)
    print(f"path {bundle.path}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for (src, dst), ctrl in bundle.controllers.items():
        export.write_controller_json(ctrl, out / f"controller_{src}_{dst}.json", (src, dst))
    print(f"wrote {len(bundle.controllers)} controllers to {out}")
    return 0


def _initial_state(scn, bundle, args):
    if args.z0 is not None:
        return np.array(args.z0)
    first = (bundle.path.prefix or bundle.path.suffix)[0]
    store = next(iter(bundle.controllers.values())).abstraction.store
    box = store.lifted(scn.workspace.rois[first])
    return np.random.default_rng(scn.seed if args.seed is None else args.seed).uniform(box.lo, box.hi)


def cmd_simulate(args) -> int:
    scn, bundle = _synthesize(args)
    rec = simulate(bundle, scn, _initial_state(scn, bundle, args), args.suffix_iterations,
                   args.disturbance, args.seed)
    export.write_trajectory_csv(rec, args.out, scn.state_names, scn.control_names)
    print(f"wrote {len(rec)} rows to {args.out}")
    return 0


def cmd_export(args) -> int:
    scn, bundle = _synthesize(args)
    rec = simulate(bundle, scn, _initial_state(scn, bundle, args), args.suffix_iterations,
                   args.disturbance, args.seed)
    out = Path(args.out)
    written = export.export_bundle(bundle, scn.workspace, out, [rec] if scn.workspace.partition.dim == 2 else [])
    export.write_trajectory_csv(rec, out / "trajectory.csv", scn.state_names, scn.control_names)
    print(f"wrote {len(written) + 1} files to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hierltl", description="LTL motion planning with refined interval abstractions")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("parse-ltl", help="parse a formula and optionally print its automaton")
    s.add_argument("formula")
    s.add_argument("--atoms", required=True, help="comma-separated region names")
    s.add_argument("--automaton", action="store_true", help="print the Büchi automaton")
    s.set_defaults(run=cmd_parse_ltl)

    s = sub.add_parser("plan", help="accepting path and grid plans of a scenario")
    s.add_argument("scenario", help="TOML file or built-in name (office)")
    s.set_defaults(run=cmd_plan)

    s = sub.add_parser("reach", help="one-step interval over-approximation")
    s.add_argument("--system", choices=["unicycle", "polynomial"], default="unicycle")
    s.add_argument("--lo", type=_floats, required=True)
    s.add_argument("--hi", type=_floats, required=True)
    s.add_argument("--input", type=_floats, required=True)
    s.add_argument("--dlo", type=_floats)
    s.add_argument("--dhi", type=_floats)
    s.add_argument("--tau", type=float, required=True)
    s.add_argument("--steps", type=int, default=64)
    s.set_defaults(run=cmd_reach)

    for name, fn, default, helptext in [
        ("synthesize", cmd_synthesize, "controllers", "synthesize and write controller JSON files"),
        ("simulate", cmd_simulate, "trajectory.csv", "synthesize and write a closed-loop CSV trace"),
        ("export", cmd_export, "out", "write controllers, a trace and an SVG drawing"),
    ]:
        s = sub.add_parser(name, help=helptext)
        s.add_argument("scenario", help="TOML file or built-in name (office)")
        s.add_argument("--out", default=default)
        s.add_argument("--quiet", action="store_true")
        if name != "synthesize":
            s.add_argument("--z0", type=_floats, help="initial state (default: seeded random in the first region)")
            s.add_argument("--seed", type=int)
            s.add_argument("--disturbance", choices=["zero", "extreme", "random"], default="zero")
            s.add_argument("--suffix-iterations", type=int, default=1)
        s.set_defaults(run=fn)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except PipelineError as err:
        print(f"error: {err}", file=sys.stderr)
        return LAYER_EXIT[err.layer]
    except LtlSyntaxError as err:
        print(f"error: {err}", file=sys.stderr)
        return LAYER_EXIT[1]
    except ContractViolation as err:
        print(f"error: controller contract violated: {err}", file=sys.stderr)
        return EXIT_CONTRACT
    except (ScenarioError, ReachError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
