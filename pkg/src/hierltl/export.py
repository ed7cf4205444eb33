"""CSV trajectories, JSON controller tables and SVG workspace drawings."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable
from xml.sax.saxutils import escape

from .grid import Workspace
from .refine import SynthesizedController

CONTROLLER_FORMAT = "hierltl-controller/1"


def trajectory_rows(rec, state_names: Iterable[str], control_names: Iterable[str]):
    header = ["t", *state_names, *control_names, "mode", "plan", "step"]
    rows = []
    for t, z, u, mode, plan, step in zip(rec.times, rec.states, rec.inputs, rec.modes, rec.plans, rec.steps):
        rows.append([repr(float(t)), *(repr(float(v)) for v in z), *(repr(float(v)) for v in u), mode, plan, step])
    return header, rows


def write_trajectory_csv(rec, path, state_names=("x", "y", "theta"), control_names=("v", "omega")) -> None:
    header, rows = trajectory_rows(rec, state_names, control_names)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def controller_document(ctrl: SynthesizedController, pair: tuple[str, str] | None = None) -> dict:
    """Plain-data view of one plan's controller.

    ``leaves`` lists every symbol of every plan cell with its box, the plan
    step it belongs to, whether it is valid and the chosen input index
    (null where no input is stored).
    """
    a = ctrl.abstraction
    leaves = []
    for k, cell in enumerate(a.plan):
        for sid in a.store.leaves(cell):
            box = a.store.box(sid)
            ui = a.controller.get(sid)
            leaves.append({
                "id": int(sid),
                "step": k,
                "lo": [float(v) for v in box.lo],
                "hi": [float(v) for v in box.hi],
                "valid": sid in a.valid[k],
                "input": None if ui is None else int(ui),
            })
    return {
        "format": CONTROLLER_FORMAT,
        "pair": list(pair) if pair else None,
        "plan": [list(c) for c in a.plan],
        "tau": a.tau,
        "inputs": [[float(v) for v in u] for u in a.inputs],
        "projected": a.projected,
        "iterations": ctrl.iterations,
        "splits": ctrl.splits,
        "leaves": leaves,
    }


def controller_json(ctrl: SynthesizedController, pair=None) -> str:
    return json.dumps(controller_document(ctrl, pair), sort_keys=True, indent=1) + "\n"


def write_controller_json(ctrl: SynthesizedController, path, pair=None) -> None:
    Path(path).write_text(controller_json(ctrl, pair))


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def workspace_svg(ws: Workspace, controllers: Iterable[SynthesizedController] = (),
                  trajectories: Iterable = (), scale: float = 20.0) -> str:
    """SVG with the grid, black obstacles, labelled regions, shaded valid
    footprints and trajectory polylines (y pointing up)."""
    part = ws.partition
    if part.dim != 2:
        raise ValueError("only planar workspaces can be drawn")
    (x0, x1), (y0, y1) = zip(part.workspace.lo, part.workspace.hi)
    W, H = (x1 - x0) * scale, (y1 - y0) * scale

    def X(x):
        return _fmt((x - x0) * scale)

    def Y(y):
        return _fmt((y1 - y) * scale)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(W)}" height="{_fmt(H)}" '
           f'viewBox="0 0 {_fmt(W)} {_fmt(H)}">',
           f'<rect x="0" y="0" width="{_fmt(W)}" height="{_fmt(H)}" fill="white"/>']
    footprints = set()
    for ctrl in controllers:
        a = ctrl.abstraction
        for k in range(len(a.plan) - 1):
            for sid in a.valid[k]:
                b = a.store.box(sid)
                footprints.add((b.lo[0], b.lo[1], b.hi[0], b.hi[1]))
    for xl, yl, xh, yh in sorted(footprints):
        out.append(f'<rect x="{X(xl)}" y="{Y(yh)}" width="{_fmt((xh - xl) * scale)}" '
                   f'height="{_fmt((yh - yl) * scale)}" fill="#4a90d9" fill-opacity="0.15"/>')
    for cell in sorted(ws.obstacles):
        b = part.cell_box(cell)
        out.append(f'<rect x="{X(b.lo[0])}" y="{Y(b.hi[1])}" width="{_fmt((b.hi[0] - b.lo[0]) * scale)}" '
                   f'height="{_fmt((b.hi[1] - b.lo[1]) * scale)}" fill="black"/>')
    for name, cell in ws.rois.items():
        b = part.cell_box(cell)
        out.append(f'<rect x="{X(b.lo[0])}" y="{Y(b.hi[1])}" width="{_fmt((b.hi[0] - b.lo[0]) * scale)}" '
                   f'height="{_fmt((b.hi[1] - b.lo[1]) * scale)}" fill="#f5a623" fill-opacity="0.5"/>')
        c = b.center
        out.append(f'<text x="{X(c[0])}" y="{Y(c[1])}" font-size="{_fmt(0.6 * scale)}" '
                   f'text-anchor="middle" dominant-baseline="middle">{escape(name)}</text>')
    for e in part.edges[0]:
        out.append(f'<line x1="{X(e)}" y1="0" x2="{X(e)}" y2="{_fmt(H)}" stroke="#999" stroke-width="0.5"/>')
    for e in part.edges[1]:
        out.append(f'<line x1="0" y1="{Y(e)}" x2="{_fmt(W)}" y2="{Y(e)}" stroke="#999" stroke-width="0.5"/>')
    for rec in trajectories:
        pts = " ".join(f"{X(z[0])},{Y(z[1])}" for z in rec.states)
        if pts:
            out.append(f'<polyline points="{pts}" fill="none" stroke="#d0021b" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_bundle(bundle, ws: Workspace, directory, trajectories=()) -> list[Path]:
    """One controller JSON per plan plus a combined ``workspace.svg``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for (src, dst), ctrl in bundle.controllers.items():
        p = directory / f"controller_{src}_{dst}.json"
        write_controller_json(ctrl, p, (src, dst))
        written.append(p)
    svg = directory / "workspace.svg"
    svg.write_text(workspace_svg(ws, bundle.controllers.values(), trajectories))
    written.append(svg)
    return written

