"""Scenario loading, the three-layer synthesis pipeline and closed-loop simulation."""
from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .grid import PlanInfeasible, Workspace, plans_for_path
from .intervals import Box, GridPartition
from .ltl.automaton import ltl_to_buchi
from .ltl.search import AcceptingPath, NoAcceptingPath, RoiTransitionSystem, consecutive_pairs, find_accepting_path
from .ltl.syntax import LtlSyntaxError, parse_ltl
from .models import linear_model, unicycle_model
from .reach import DEFAULT_STEPS, SystemModel, integrate
from .refine import (
    AbstractionState, BudgetExhausted, ContractViolation, Drive, Rotate, SynthesizedController,
    normalize_state, refine_plan,
)

LAYER_NAMES = {1: "specification", 2: "planning", 3: "synthesis"}


class PipelineError(RuntimeError):
    """Failure of one layer; ``layer`` is 1, 2 or 3."""

    def __init__(self, layer: int, message: str):
        super().__init__(f"layer {layer} ({LAYER_NAMES[layer]}): {message}")
        self.layer = layer


class ScenarioError(ValueError):
    pass


def suggest_tau(cell_size: Sequence[float], max_speed: float, slack: float = 1.2) -> float:
    """Time to cross the largest cell side at ``max_speed``, times ``slack``."""
    if max_speed <= 0:
        raise ValueError("max_speed must be positive")
    return slack * max(float(c) for c in cell_size) / max_speed


def discretize_inputs(controls: Box, counts: Sequence[int]) -> np.ndarray:
    """Uniform grid over ``controls`` including the endpoints; a count of 1 gives the midpoint.

    Rows are ordered lexicographically with the last control varying fastest.
    """
    counts = [int(c) for c in counts]
    if len(counts) != controls.dim:
        raise ValueError("one count per control dimension is required")
    if any(c < 1 for c in counts):
        raise ValueError("counts must be at least 1")
    axes = [np.linspace(lo, hi, c) if c > 1 else np.array([(lo + hi) / 2])
            for lo, hi, c in zip(controls.lo, controls.hi, counts)]
    return np.array(np.meshgrid(*axes, indexing="ij")).reshape(controls.dim, -1).T.copy()


# -- scenarios ---------------------------------------------------------------

def _box(pairs) -> Box:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ScenarioError(f"expected a list of [lo, hi] pairs, got {pairs!r}")
    return Box(arr[:, 0], arr[:, 1])


@dataclass
class Scenario:
    name: str
    workspace: Workspace
    system: SystemModel
    formula: str
    initial: str
    inputs: np.ndarray
    tau: float
    transitions: RoiTransitionSystem
    projected: bool = False
    initial_split: tuple[int, ...] | None = None
    split_policy: str = "uniform"
    max_iterations: int = 200
    max_depth: int = 6
    steps: int = DEFAULT_STEPS
    seed: int = 0
    state_names: tuple[str, ...] = ()
    control_names: tuple[str, ...] = ()

    @property
    def regions(self) -> tuple[str, ...]:
        return tuple(self.workspace.rois)


def _system(spec: Mapping) -> tuple[SystemModel, tuple, tuple]:
    kind = spec.get("name")
    if kind == "unicycle":
        controls = _box(spec.get("controls", [[-0.5, 0.5], [-0.3, 0.3]]))
        dist = _box(spec.get("disturbance", [[0, 0]] * 3))
        states = _box(spec["states"]) if "states" in spec else None
        kwargs = {"state_space": states} if states is not None else {}
        return (unicycle_model(dist, control_space=controls, **kwargs),
                ("x", "y", "theta"), ("v", "omega"))
    if kind == "linear":
        states = _box(spec["states"])
        controls = _box(spec["controls"])
        dist = _box(spec.get("disturbance", [[0, 0]] * states.dim))
        model = linear_model(spec["A"], spec["B"], states, controls, dist, spec.get("E"))
        return (model, tuple(f"z{i}" for i in range(model.n)), tuple(f"u{i}" for i in range(model.p)))
    raise ScenarioError(f"unknown system {kind!r}")


def scenario_from_dict(doc: Mapping) -> Scenario:
    try:
        wdoc = doc["workspace"]
        bounds = _box(wdoc["bounds"])
        partition = GridPartition(bounds, wdoc["counts"])
        obstacles = frozenset(tuple(c) for c in wdoc.get("obstacles", []))
        workspace = Workspace(partition, obstacles, {k: tuple(v) for k, v in wdoc.get("rois", {}).items()})
        system, snames, cnames = _system(doc["system"])
        if system.n < partition.dim:
            raise ScenarioError("the grid has more dimensions than the state")
        regions = tuple(workspace.rois)
        moves = doc.get("transitions")
        ts = (RoiTransitionSystem.from_adjacency(regions, moves) if moves is not None
              else RoiTransitionSystem.complete(regions))
        spec = doc["specification"]
        syn = doc.get("synthesis", {})
        counts = syn.get("input_counts", [5] * system.p)
        inputs = discretize_inputs(system.control_space, counts)
        tau = syn.get("tau", "auto")
        if tau == "auto":
            speed = float(syn.get("max_speed", np.max(np.abs([system.control_space.lo[0],
                                                                system.control_space.hi[0]]))))
            tau = suggest_tau(partition.cell_size, speed, float(syn.get("slack", 1.2)))
        split = syn.get("initial_split")
        return Scenario(
            name=doc.get("name", "scenario"),
            workspace=workspace,
            system=system,
            formula=spec["formula"],
            initial=spec["initial"],
            inputs=inputs,
            tau=float(tau),
            transitions=ts,
            projected=bool(syn.get("projected", False)),
            initial_split=tuple(split) if split is not None else None,
            split_policy=syn.get("split_policy", "uniform"),
            max_iterations=int(syn.get("max_iterations", 200)),
            max_depth=int(syn.get("max_depth", 6)),
            steps=int(syn.get("steps", DEFAULT_STEPS)),
            seed=int(doc.get("simulation", {}).get("seed", 0)),
            state_names=snames,
            control_names=cnames,
        )
    except KeyError as err:
        raise ScenarioError(f"missing scenario key {err}") from None


def load_scenario(source: str | Path) -> Scenario:
    """Read a TOML scenario file, or a built-in scenario by name (``office``)."""
    path = Path(source)
    if path.suffix != ".toml" and not path.exists():
        ref = resources.files("hierltl") / "scenarios" / f"{source}.toml"
        if not ref.is_file():
            raise ScenarioError(f"no scenario file or built-in scenario named {source!r}")
        return scenario_from_dict(tomllib.loads(ref.read_text()))
    with open(path, "rb") as fh:
        return scenario_from_dict(tomllib.load(fh))


# -- orchestration -----------------------------------------------------------

@dataclass
class SynthesisBundle:
    path: AcceptingPath
    pairs: list[tuple[str, str]]
    plans: dict[tuple[str, str], list[tuple[int, ...]]]
    controllers: dict[tuple[str, str], SynthesizedController] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)


def solve_specification(scn: Scenario) -> AcceptingPath:
    try:
        formula = parse_ltl(scn.formula, scn.regions)
        return find_accepting_path(scn.transitions, ltl_to_buchi(formula), scn.initial)
    except (LtlSyntaxError, NoAcceptingPath, ValueError) as err:
        raise PipelineError(1, str(err)) from err


def run_pipeline(scn: Scenario, layers: int = 3,
                 on_plan: Callable[[tuple[str, str], SynthesizedController], None] | None = None
                 ) -> SynthesisBundle:
    """Run the specification, planning and synthesis layers in order (up to ``layers``)."""
    t0 = time.perf_counter()
    path = solve_specification(scn)
    t1 = time.perf_counter()
    pairs = consecutive_pairs(path)
    bundle = SynthesisBundle(path, pairs, {}, timings={"specification": t1 - t0})
    if layers < 2:
        return bundle
    try:
        bundle.plans = plans_for_path(scn.workspace, pairs)
    except (PlanInfeasible, KeyError) as err:
        raise PipelineError(2, str(err)) from err
    bundle.timings["planning"] = time.perf_counter() - t1
    if layers < 3:
        return bundle
    for pair in pairs:
        abs_ = AbstractionState(
            scn.system, scn.workspace, bundle.plans[pair], scn.inputs, scn.tau,
            projected=scn.projected, initial_split=scn.initial_split,
            split_policy=scn.split_policy, max_depth=scn.max_depth, steps=scn.steps,
        )
        try:
            ctrl = refine_plan(abs_, scn.max_iterations)
        except BudgetExhausted as err:
            raise PipelineError(3, f"{pair[0]} -> {pair[1]}: {err}") from err
        bundle.controllers[pair] = ctrl
        bundle.timings[f"{pair[0]}->{pair[1]}"] = ctrl.seconds
        if on_plan is not None:
            on_plan(pair, ctrl)
    return bundle


# -- simulation --------------------------------------------------------------

@dataclass
class TrajectoryRecord:
    """One row per integration segment end; ``states[0]`` is the initial state."""

    times: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    inputs: list[np.ndarray] = field(default_factory=list)
    modes: list[str] = field(default_factory=list)
    plans: list[str] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)
    samples: list[tuple[str, int, tuple[int, ...] | None, tuple[int, ...]]] = field(default_factory=list)

    def append(self, t, z, u, mode, plan, step):
        self.times.append(float(t))
        self.states.append(np.array(z, dtype=float))
        self.inputs.append(np.array(u, dtype=float))
        self.modes.append(mode)
        self.plans.append(plan)
        self.steps.append(int(step))

    def __len__(self) -> int:
        return len(self.times)

    def cell_mismatches(self) -> list[tuple]:
        """Samples whose cell differs from the plan's cell at that step."""
        return [s for s in self.samples if s[2] != s[3]]


class DisturbancePolicy:
    """Disturbance schedule for one sampling period.

    ``zero`` uses the origin (clipped into the box), ``extreme`` the upper
    corner, and ``random`` a seeded piecewise-constant signal resampled every
    quarter period.
    """

    def __init__(self, kind: str, box: Box, seed: int = 0):
        if kind not in ("zero", "extreme", "random"):
            raise ValueError(f"unknown disturbance policy {kind!r}")
        self.kind, self.box = kind, box
        self.rng = np.random.default_rng(seed)

    def schedule(self) -> np.ndarray:
        if self.kind == "zero":
            return np.clip(np.zeros(self.box.dim), self.box.lo, self.box.hi)[None]
        if self.kind == "extreme":
            return self.box.hi[None].copy()
        return self.rng.uniform(self.box.lo, self.box.hi, size=(4, self.box.dim))


def _flow(sysm: SystemModel, z, u, sched: np.ndarray, duration: float, steps: int) -> np.ndarray:
    K = len(sched)
    sub = max(1, steps // K)
    for dk in sched:
        z = integrate(lambda s, x, dk=dk: sysm.field(x, u, dk), z, duration / K, sub)
    return z


def _rotate(sysm, z, cmd: Rotate, sched, steps, turn_control, heading_dim, period):
    """Turn in place until the heading crosses ``cmd.target_heading``."""
    u = np.zeros(sysm.p)
    u[turn_control] = cmd.omega
    dt = max(cmd.duration, 1e-9) / steps
    d = sched[0]
    start = math.remainder(z[heading_dim] - cmd.target_heading, period)
    elapsed = 0.0
    if start == 0.0:
        return z, u, 0.0
    # generous cap: half a turn more than planned
    limit = cmd.duration + 0.5 * period / abs(cmd.omega)
    while elapsed < limit:
        z = integrate(lambda s, x: sysm.field(x, u, d), z, dt, 1)
        elapsed += dt
        now = math.remainder(z[heading_dim] - cmd.target_heading, period)
        if now == 0.0 or (now > 0) != (start > 0):
            break
    return z, u, elapsed


def simulate(bundle: SynthesisBundle, scn: Scenario, z0, suffix_iterations: int = 1,
             disturbance: str = "zero", seed: int | None = None, heading_dim: int = 2,
             turn_control: int = 1, raise_on_violation: bool = True) -> TrajectoryRecord:
    """Closed-loop run through the prefix and ``suffix_iterations`` full laps of the suffix cycle."""
    z = np.array(z0, dtype=float)
    first = bundle.path.prefix[0] if bundle.path.prefix else bundle.path.suffix[0]
    lifted = next(iter(bundle.controllers.values())).abstraction.store.lifted(scn.workspace.rois[first])
    if not lifted.contains(z):
        raise ValueError(f"initial state {z} is not in the lifted cell of {first}")
    # close the loop so the leg back to the start of the suffix runs too
    word = list(bundle.path.prefix) + list(bundle.path.suffix) * suffix_iterations + [bundle.path.suffix[0]]
    legs = list(zip(word, word[1:]))
    policy = DisturbancePolicy(disturbance, scn.system.disturbance_space, scn.seed if seed is None else seed)
    period = scn.system.periodic.get(heading_dim, 2 * math.pi)
    rec = TrajectoryRecord()
    t = 0.0
    rec.append(t, z, np.zeros(scn.system.p), "start", f"{legs[0][0]}->{legs[0][1]}" if legs else "", 0)
    partition = scn.workspace.partition
    for leg in legs:
        ctrl = bundle.controllers[leg]
        plan = ctrl.plan
        name = f"{leg[0]}->{leg[1]}"
        for k in range(len(plan) - 1):
            rec.samples.append((name, k, partition.locate(z[: partition.dim]), plan[k]))
            try:
                cmd = ctrl.concretize(k, z)
                sched = policy.schedule()
                if isinstance(cmd, Rotate):
                    z, u, dt = _rotate(scn.system, z, cmd, sched, scn.steps, turn_control, heading_dim, period)
                    z = normalize_state(z, scn.system.periodic, scn.system.state_space)
                    t += dt
                    rec.append(t, z, u, "rotate", name, k)
                    cmd = ctrl.concretize(k, z)
                    if not isinstance(cmd, Drive):
                        raise ContractViolation(f"state {z} still invalid after rotating")
                z = _flow(scn.system, z, cmd.control, sched, scn.tau, scn.steps)
                z = normalize_state(z, scn.system.periodic, scn.system.state_space)
            except ContractViolation as err:
                if raise_on_violation:
                    raise ContractViolation(f"{name} step {k}: {err}; trace has {len(rec)} rows") from err
                return rec
            t += scn.tau
            rec.append(t, z, cmd.control, "drive", name, k + 1)
        rec.samples.append((name, len(plan) - 1, partition.locate(z[: partition.dim]), plan[-1]))
    return rec
