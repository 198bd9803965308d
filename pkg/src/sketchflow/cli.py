"""Command-line entry points.

Subcommands: run (full pipeline), mesh (geometry only), warp (one-shot
forward warp), simulate (snapshots only), flow (single frame's flow field),
serve (local session service). Exit codes: 0 success, 1 validation or input
error, 2 runtime simulation failure. Progress goes to stderr; result paths
print on stdout. No subcommand writes any file before its inputs validate.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import geometry, imaging, scene as scene_mod
from .errors import (NonFiniteState, ParseError, PipelineError, SketchflowError,
                     ValidationError)
from .flowfield import read_flo, write_flo
from .scene import apply_overrides, load_scene, merge_body_flows, parse_scene_dict

log = logging.getLogger("sketchflow")


def _load_scene_with_overrides(scene_path: str, overrides):
    path = Path(scene_path)
    if not path.is_file():
        raise FileNotFoundError(f"scene file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("scene document must be a JSON object")
    if overrides:
        doc = apply_overrides(doc, overrides)
    return parse_scene_dict(doc, base_dir=path.parent)


def cmd_run(args) -> int:
    """Parse the scene, apply --set overrides, run the whole pipeline."""
    try:
        scene = _load_scene_with_overrides(args.scene, args.set or [])
    except (FileNotFoundError, ParseError, ValidationError) as exc:
        log.error("%s", exc)
        return 1
    try:
        report = scene_mod.run_pipeline(scene, out_dir=args.out)
    except PipelineError as exc:
        if isinstance(exc.__cause__, NonFiniteState):
            log.error("simulation failed: %s", exc)
            return 2
        log.error("%s", exc)
        return 1
    print(str(Path(report.output_dir) / "report.json"))
    return 0


def cmd_mesh(args) -> int:
    """Mesh one mask and write the result as JSON plus a wireframe PNG."""
    mask_path = Path(args.mask)
    if not mask_path.is_file():
        log.error("mask file not found: %s", mask_path)
        return 1
    try:
        mask = geometry.load_mask(mask_path)
        mesh = geometry.mesh_from_mask(mask, spacing=args.spacing,
                                       max_area=args.max_area,
                                       min_angle=args.min_angle)
    except (SketchflowError, ValueError) as exc:
        log.error("meshing failed: %s", exc)
        return 1
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "vertices": [[float(x), float(y)] for x, y in mesh.rest_positions],
        "triangles": [[int(a), int(b), int(c)] for a, b, c in mesh.triangles],
        "boundary_edges": [[int(u), int(v)] for u, v in mesh.boundary_edges],
        "total_area": mesh.total_area,
    }
    out.write_text(json.dumps(doc, indent=2) + "\n")
    _wireframe_png(mask, mesh, out.with_suffix(".png"))
    print(str(out))
    return 0


def _wireframe_png(mask, mesh, path):
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6.0, 6.0 * mask.height / max(mask.width, 1)))
    ax = fig.subplots()
    ax.imshow(mask.bits, cmap="gray", origin="upper",
              extent=(0, mask.width, mask.height, 0))
    ax.triplot(mesh.rest_positions[:, 0], mesh.rest_positions[:, 1],
               mesh.triangles, color="tab:orange", linewidth=0.6)
    ax.set_xlim(0, mask.width)
    ax.set_ylim(mask.height, 0)
    ax.set_aspect("equal")
    ax.set_title(f"{len(mesh.rest_positions)} vertices, {len(mesh.triangles)} triangles")
    fig.tight_layout()
    fig.savefig(path, dpi=110)


def cmd_warp(args) -> int:
    """Forward-warp an image by a .flo field, weighting by flow magnitude."""
    image_path = Path(args.image)
    flow_path = Path(args.flow)
    for p in (image_path, flow_path):
        if not p.is_file():
            log.error("file not found: %s", p)
            return 1
    try:
        image = imaging.load_png(image_path)
        with open(flow_path, "rb") as fh:
            flow = read_flo(fh)
    except SketchflowError as exc:
        log.error("%s", exc)
        return 1
    if (image.width, image.height) != (flow.width, flow.height):
        log.error("dimension mismatch: image %dx%d vs flow %dx%d",
                  image.width, image.height, flow.width, flow.height)
        return 1
    weights = imaging.flow_magnitude_weights(flow)
    warped = imaging.forward_warp(image, flow, weights, alpha=args.alpha,
                                  background=args.background)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    imaging.save_png(warped, out)
    print(str(out))
    return 0


def cmd_simulate(args) -> int:
    """Run the simulation only and dump per-frame vertex positions as JSON."""
    try:
        scene = _load_scene_with_overrides(args.scene, args.set or [])
    except (FileNotFoundError, ParseError, ValidationError) as exc:
        log.error("%s", exc)
        return 1
    try:
        compiled = scene_mod.compile_scene(scene)
        from . import dynamics
        snapshots = dynamics.simulate(compiled.bodies, list(scene.strokes), scene.sim)
    except NonFiniteState as exc:
        log.error("simulation failed: %s", exc)
        return 2
    except SketchflowError as exc:
        log.error("%s", exc)
        return 1
    out = Path(args.snapshots)
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "times": [s.time for s in snapshots],
        "bodies": [
            {"frames": [np.asarray(s.positions[i]).tolist() for s in snapshots]}
            for i in range(len(compiled.bodies))
        ],
    }
    out.write_text(json.dumps(doc) + "\n")
    print(str(out))
    return 0


def cmd_flow(args) -> int:
    """Simulate up to --frame and write that frame's flow field."""
    try:
        scene = _load_scene_with_overrides(args.scene, args.set or [])
    except (FileNotFoundError, ParseError, ValidationError) as exc:
        log.error("%s", exc)
        return 1
    if args.frame < 1 or args.frame > scene.sim.frame_count:
        log.error("frame %d outside 1..%d", args.frame, scene.sim.frame_count)
        return 1
    try:
        compiled = scene_mod.compile_scene(scene)
        from . import dynamics
        stop_at = args.frame

        def until(frame, _snap):
            return frame < stop_at

        snapshots = dynamics.simulate(compiled.bodies, list(scene.strokes),
                                      scene.sim, on_frame=until)
    except NonFiniteState as exc:
        log.error("simulation failed: %s", exc)
        return 2
    except SketchflowError as exc:
        log.error("%s", exc)
        return 1
    field = merge_body_flows(compiled, snapshots[args.frame].positions)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "wb") as fh:
        write_flo(field, fh)
    print(str(out))
    return 0


def cmd_serve(args) -> int:
    """Run the local session service on 127.0.0.1."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host="127.0.0.1", port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchflow",
        description="Physics-driven 2D animation: masks to meshes, simulation, "
                    "optical flow, and warped sketch frames.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline on a scene file")
    p.add_argument("--scene", required=True, help="path to the scene JSON file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="dotted-path override, e.g. sim.frame_count=8 (repeatable)")
    p.add_argument("--out", default=None,
                   help="output directory (default: scene's output.dir)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("mesh", help="triangulate one mask and write mesh JSON + wireframe PNG")
    p.add_argument("--mask", required=True, help="8-bit grayscale mask PNG (foreground >= 128)")
    p.add_argument("--out", required=True, help="output mesh JSON path (PNG lands alongside)")
    p.add_argument("--spacing", type=float, default=geometry.DEFAULT_SPACING,
                   help=f"boundary sample spacing in pixels (default {geometry.DEFAULT_SPACING})")
    p.add_argument("--max-area", type=float, default=geometry.DEFAULT_MAX_AREA,
                   help=f"max triangle area in px^2 (default {geometry.DEFAULT_MAX_AREA})")
    p.add_argument("--min-angle", type=float, default=geometry.DEFAULT_MIN_ANGLE,
                   help=f"min triangle angle in degrees, <= {geometry.MAX_MIN_ANGLE} "
                        f"(default {geometry.DEFAULT_MIN_ANGLE})")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("warp", help="forward-warp an image by a .flo flow field")
    p.add_argument("--image", required=True, help="input PNG")
    p.add_argument("--flow", required=True, help="input .flo file")
    p.add_argument("--out", required=True, help="output PNG")
    p.add_argument("--alpha", type=float, default=imaging.DEFAULT_ALPHA,
                   help=f"softmax sharpness, dimensionless (default {imaging.DEFAULT_ALPHA})")
    p.add_argument("--background", type=float, default=1.0,
                   help="fill value in [0,1] for unreached pixels (default 1.0 = white)")
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("simulate", help="simulate only; write snapshots JSON")
    p.add_argument("--scene", required=True, help="path to the scene JSON file")
    p.add_argument("--snapshots", required=True, help="output snapshots JSON path")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="dotted-path override (repeatable)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("flow", help="write one frame's flow field as .flo")
    p.add_argument("--scene", required=True, help="path to the scene JSON file")
    p.add_argument("--frame", type=int, required=True, help="frame index, 1-based")
    p.add_argument("--out", required=True, help="output .flo path")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="dotted-path override (repeatable)")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("serve", help="start the local authoring session service")
    p.add_argument("--port", type=int, default=8631,
                   help="TCP port on 127.0.0.1 (default 8631)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SketchflowError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
