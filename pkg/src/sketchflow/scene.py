"""Declarative scene documents and end-to-end pipeline orchestration.

A scene is a strict JSON document (unknown keys rejected, every violation
reported with its JSON path) describing the reference image, the bodies to
mesh and simulate, force strokes, rig points, integration settings, and
which artifacts to emit.

The pipeline runs geometry -> simulation -> per-frame flow rasterization ->
sketch extraction and blur -> forward warping, then writes the requested
outputs plus a run report (report.json, per-frame stats as report.csv, and
a flow-magnitude figure report.png). Everything is deterministic: running a
scene twice produces byte-identical flow and image files.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics, geometry, imaging
from .dynamics import RigPoint, SimBody, SimParams
from .elastics import Material, material_from_young_poisson
from .errors import (NonFiniteState, ParseError, PipelineError, SketchflowError,
                     ValidationError)
from .flowfield import FlowField, rasterize_displacement, write_flo
from .imaging import ImageBuffer
from .strokes import (DEFAULT_EMIT_RATE, DEFAULT_PARTICLE_SPEED, DEFAULT_RADIUS,
                      ForceStroke)

log = logging.getLogger(__name__)

DEFAULT_MATERIAL = {"young": 300.0, "poisson": 0.3}
DEFAULT_DENSITY = 1.0


@dataclass(frozen=True)
class MeshParams:
    spacing: float = geometry.DEFAULT_SPACING
    max_area: float = geometry.DEFAULT_MAX_AREA
    min_angle: float = geometry.DEFAULT_MIN_ANGLE


@dataclass(frozen=True)
class BodySpec:
    mask_path: Path
    material: Material
    mesh: MeshParams


@dataclass(frozen=True)
class RigSpec:
    body: int
    kind: str
    anchor: tuple
    amplitude: float = 0.0
    frequency: float = 1.0
    direction: tuple = (0.0, 1.0)
    keyframes: tuple = ()


@dataclass(frozen=True)
class OutputConfig:
    directory: Path = Path("out")
    emit_flows: bool = True
    emit_sketches: bool = True
    emit_warped: bool = True
    blur_sigma: float = 1.0
    alpha: float = imaging.DEFAULT_ALPHA
    background: float = 1.0


@dataclass(frozen=True)
class Scene:
    image_path: Path
    bodies: tuple
    strokes: tuple
    rigs: tuple
    sim: SimParams
    output: OutputConfig


# --- validation helpers ------------------------------------------------------


def _fail(path, message):
    raise ValidationError(path, message)


def _number(doc, path, minimum=None, maximum=None, strict_min=False):
    if isinstance(doc, bool) or not isinstance(doc, (int, float)):
        _fail(path, f"expected number, got {type(doc).__name__}")
    value = float(doc)
    if not np.isfinite(value):
        _fail(path, "number must be finite")
    if minimum is not None:
        if strict_min and value <= minimum:
            _fail(path, f"must be > {minimum}, got {value}")
        if not strict_min and value < minimum:
            _fail(path, f"must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        _fail(path, f"must be <= {maximum}, got {value}")
    return value


def _integer(doc, path, minimum=None):
    if isinstance(doc, bool) or not isinstance(doc, int):
        _fail(path, f"expected integer, got {type(doc).__name__}")
    if minimum is not None and doc < minimum:
        _fail(path, f"must be >= {minimum}, got {doc}")
    return int(doc)


def _boolean(doc, path):
    if not isinstance(doc, bool):
        _fail(path, f"expected boolean, got {type(doc).__name__}")
    return doc


def _string(doc, path):
    if not isinstance(doc, str):
        _fail(path, f"expected string, got {type(doc).__name__}")
    return doc


def _obj(doc, path, allowed):
    if not isinstance(doc, dict):
        _fail(path, f"expected object, got {type(doc).__name__}")
    for key in doc:
        if key not in allowed:
            _fail(f"{path}.{key}" if path else key, "unknown key")
    return doc


def _point(doc, path):
    if not isinstance(doc, (list, tuple)) or len(doc) != 2:
        _fail(path, "expected a [x, y] pair")
    return (_number(doc[0], f"{path}[0]"), _number(doc[1], f"{path}[1]"))


def _resolve_file(raw, path, base_dir):
    p = Path(raw)
    if not p.is_absolute():
        p = Path(base_dir) / p
    if not p.is_file():
        raise FileNotFoundError(f"{path}: no such file: {p}")
    return p


def parse_material_fragment(doc, path, density):
    doc = _obj(doc, path, {"mu", "lambda", "young", "poisson"})
    has_lame = "mu" in doc or "lambda" in doc
    has_young = "young" in doc or "poisson" in doc
    if has_lame and has_young:
        _fail(path, "give either mu/lambda or young/poisson, not both")
    if has_lame:
        if "mu" not in doc or "lambda" not in doc:
            _fail(path, "mu and lambda must be given together")
        mu = _number(doc["mu"], f"{path}.mu", minimum=0.0, strict_min=True)
        lam = _number(doc["lambda"], f"{path}.lambda", minimum=0.0)
        return Material(mu=mu, lam=lam, density=density)
    young = _number(doc.get("young", DEFAULT_MATERIAL["young"]),
                    f"{path}.young", minimum=0.0, strict_min=True)
    poisson = _number(doc.get("poisson", DEFAULT_MATERIAL["poisson"]), f"{path}.poisson")
    if poisson < 0 or poisson >= 0.5:
        _fail(f"{path}.poisson", f"must lie in [0, 0.5), got {poisson}")
    return material_from_young_poisson(young, poisson, density)


def parse_body_fragment(doc, path, mask_path) -> BodySpec:
    """Body spec from a document fragment, with the mask path supplied."""
    doc = _obj(doc, path, {"mask", "density", "material", "mesh"})
    density = _number(doc.get("density", DEFAULT_DENSITY), f"{path}.density",
                      minimum=0.0, strict_min=True)
    material = parse_material_fragment(doc.get("material", dict(DEFAULT_MATERIAL)),
                                       f"{path}.material", density)
    mesh_doc = _obj(doc.get("mesh", {}), f"{path}.mesh",
                    {"spacing", "max_area", "min_angle"})
    mesh = MeshParams(
        spacing=_number(mesh_doc.get("spacing", geometry.DEFAULT_SPACING),
                        f"{path}.mesh.spacing", minimum=0.0, strict_min=True),
        max_area=_number(mesh_doc.get("max_area", geometry.DEFAULT_MAX_AREA),
                         f"{path}.mesh.max_area", minimum=0.0, strict_min=True),
        min_angle=_number(mesh_doc.get("min_angle", geometry.DEFAULT_MIN_ANGLE),
                          f"{path}.mesh.min_angle", minimum=0.0,
                          maximum=geometry.MAX_MIN_ANGLE),
    )
    return BodySpec(mask_path=Path(mask_path), material=material, mesh=mesh)


def _parse_body(doc, path, base_dir):
    if not isinstance(doc, dict):
        _fail(path, f"expected object, got {type(doc).__name__}")
    if "mask" not in doc:
        _fail(f"{path}.mask", "required")
    mask_path = _resolve_file(_string(doc["mask"], f"{path}.mask"), f"{path}.mask", base_dir)
    return parse_body_fragment(doc, path, mask_path)


def parse_stroke_fragment(doc, path):
    doc = _obj(doc, path, {"kind", "path", "strength", "radius", "particle_speed",
                           "emit_rate", "active"})
    kind = _string(doc.get("kind", ""), f"{path}.kind")
    if kind not in ("wind", "repel", "attract"):
        _fail(f"{path}.kind", f"must be wind, repel, or attract, got {kind!r}")
    raw_path = doc.get("path")
    if not isinstance(raw_path, list) or not raw_path:
        _fail(f"{path}.path", "expected a non-empty list of [x, y] points")
    pts = [_point(p, f"{path}.path[{i}]") for i, p in enumerate(raw_path)]
    if kind == "wind" and len(pts) < 2:
        _fail(f"{path}.path", "wind strokes need at least 2 points")
    strength = _number(doc.get("strength"), f"{path}.strength", minimum=0.0)
    radius = _number(doc.get("radius", DEFAULT_RADIUS), f"{path}.radius",
                     minimum=0.0, strict_min=True)
    speed = _number(doc.get("particle_speed", DEFAULT_PARTICLE_SPEED),
                    f"{path}.particle_speed", minimum=0.0, strict_min=True)
    rate = _number(doc.get("emit_rate", DEFAULT_EMIT_RATE), f"{path}.emit_rate",
                   minimum=0.0)
    active = (0.0, float("inf"))
    if "active" in doc:
        raw = doc["active"]
        if not isinstance(raw, list) or len(raw) != 2:
            _fail(f"{path}.active", "expected [t_start, t_end]")
        active = (_number(raw[0], f"{path}.active[0]", minimum=0.0),
                  _number(raw[1], f"{path}.active[1]"))
        if not active[0] < active[1]:
            _fail(f"{path}.active", "t_start must be < t_end")
    try:
        return ForceStroke(kind=kind, path=np.array(pts), strength=strength,
                           radius=radius, particle_speed=speed, emit_rate=rate,
                           active=active)
    except ValueError as exc:
        _fail(path, str(exc))


def parse_rig_fragment(doc, path, body_count):
    doc = _obj(doc, path, {"body", "kind", "anchor", "amplitude", "frequency",
                           "direction", "keyframes"})
    body = _integer(doc.get("body", 0), f"{path}.body", minimum=0)
    if body >= body_count:
        _fail(f"{path}.body", f"body index {body} out of range ({body_count} bodies)")
    kind = _string(doc.get("kind", ""), f"{path}.kind")
    if kind not in ("fixed", "wavy", "trajectory"):
        _fail(f"{path}.kind", f"must be fixed, wavy, or trajectory, got {kind!r}")
    if "anchor" not in doc:
        _fail(f"{path}.anchor", "required")
    anchor = _point(doc["anchor"], f"{path}.anchor")
    amplitude = _number(doc.get("amplitude", 0.0), f"{path}.amplitude", minimum=0.0)
    frequency = _number(doc.get("frequency", 1.0), f"{path}.frequency",
                        minimum=0.0, strict_min=True)
    direction = (0.0, 1.0)
    if "direction" in doc:
        direction = _point(doc["direction"], f"{path}.direction")
        norm = float(np.hypot(*direction))
        if norm == 0.0:
            _fail(f"{path}.direction", "must be non-zero")
        direction = (direction[0] / norm, direction[1] / norm)
    keyframes = ()
    if kind == "trajectory":
        raw = doc.get("keyframes")
        if not isinstance(raw, list) or not raw:
            _fail(f"{path}.keyframes", "trajectory rigs need [t, [x, y]] keyframes")
        parsed = []
        for i, entry in enumerate(raw):
            if not isinstance(entry, list) or len(entry) != 2:
                _fail(f"{path}.keyframes[{i}]", "expected [t, [x, y]]")
            t = _number(entry[0], f"{path}.keyframes[{i}][0]")
            parsed.append((t, _point(entry[1], f"{path}.keyframes[{i}][1]")))
        times = [t for t, _ in parsed]
        if any(b <= a for a, b in zip(times, times[1:])):
            _fail(f"{path}.keyframes", "keyframe times must strictly increase")
        keyframes = tuple(parsed)
    return RigSpec(body=body, kind=kind, anchor=anchor, amplitude=amplitude,
                   frequency=frequency, direction=direction, keyframes=keyframes)


def parse_sim_fragment(doc, path):
    doc = _obj(doc, path, {"dt", "fps", "frame_count", "damping", "gravity"})
    gravity = (0.0, 0.0)
    if "gravity" in doc:
        gravity = _point(doc["gravity"], f"{path}.gravity")
    try:
        return SimParams(
            dt=_number(doc.get("dt", 0.001), f"{path}.dt", minimum=0.0, strict_min=True),
            fps=_number(doc.get("fps", 24.0), f"{path}.fps", minimum=0.0, strict_min=True),
            frame_count=_integer(doc.get("frame_count", 48), f"{path}.frame_count",
                                 minimum=1),
            damping=_number(doc.get("damping", 0.5), f"{path}.damping", minimum=0.0),
            gravity=gravity,
        )
    except ValueError as exc:
        _fail(path, str(exc))


def parse_output_fragment(doc, path, base_dir):
    doc = _obj(doc, path, {"dir", "emit_flows", "emit_sketches", "emit_warped",
                           "blur_sigma", "alpha", "background"})
    directory = Path(_string(doc.get("dir", "out"), f"{path}.dir"))
    if not directory.is_absolute():
        directory = Path(base_dir) / directory
    return OutputConfig(
        directory=directory,
        emit_flows=_boolean(doc.get("emit_flows", True), f"{path}.emit_flows"),
        emit_sketches=_boolean(doc.get("emit_sketches", True), f"{path}.emit_sketches"),
        emit_warped=_boolean(doc.get("emit_warped", True), f"{path}.emit_warped"),
        blur_sigma=_number(doc.get("blur_sigma", 1.0), f"{path}.blur_sigma", minimum=0.0),
        alpha=_number(doc.get("alpha", imaging.DEFAULT_ALPHA), f"{path}.alpha",
                      minimum=0.0),
        background=_number(doc.get("background", 1.0), f"{path}.background",
                           minimum=0.0, maximum=1.0),
    )


def parse_scene_dict(doc: dict, base_dir=".") -> Scene:
    """Validate a decoded scene document; every failure carries a JSON path."""
    _obj(doc, "", {"image", "bodies", "strokes", "rigs", "sim", "output"})
    if "image" not in doc:
        _fail("image", "required")
    image_path = _resolve_file(_string(doc["image"], "image"), "image", base_dir)
    raw_bodies = doc.get("bodies")
    if not isinstance(raw_bodies, list) or not raw_bodies:
        _fail("bodies", "at least one body is required")
    bodies = tuple(_parse_body(b, f"bodies[{i}]", base_dir)
                   for i, b in enumerate(raw_bodies))
    raw_strokes = doc.get("strokes", [])
    if not isinstance(raw_strokes, list):
        _fail("strokes", "expected a list")
    strokes = tuple(parse_stroke_fragment(s, f"strokes[{i}]") for i, s in enumerate(raw_strokes))
    raw_rigs = doc.get("rigs", [])
    if not isinstance(raw_rigs, list):
        _fail("rigs", "expected a list")
    rigs = tuple(parse_rig_fragment(r, f"rigs[{i}]", len(bodies)) for i, r in enumerate(raw_rigs))
    sim = parse_sim_fragment(doc.get("sim", {}), "sim")
    output = parse_output_fragment(doc.get("output", {}), "output", base_dir)
    scene = Scene(image_path=image_path, bodies=bodies, strokes=strokes,
                  rigs=rigs, sim=sim, output=output)
    _validate_assets(scene)
    return scene


def parse_scene(text: str, base_dir=".") -> Scene:
    """Parse scene JSON text. ParseError on syntax, ValidationError on schema."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("scene document must be a JSON object")
    return parse_scene_dict(doc, base_dir)


def load_scene(path) -> Scene:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"scene file not found: {path}")
    return parse_scene(path.read_text(), base_dir=path.parent)


def _validate_assets(scene: Scene):
    image = imaging.load_png(scene.image_path)
    for i, spec in enumerate(scene.bodies):
        mask = geometry.load_mask(spec.mask_path)
        if (mask.width, mask.height) != (image.width, image.height):
            _fail(f"bodies[{i}].mask",
                  f"mask {mask.width}x{mask.height} does not match image "
                  f"{image.width}x{image.height}")
        if not mask.bits.any():
            _fail(f"bodies[{i}].mask", "mask has no foreground pixel")
    for i, rig in enumerate(scene.rigs):
        mask = geometry.load_mask(scene.bodies[rig.body].mask_path)
        if not mask.contains_point(*rig.anchor):
            _fail(f"rigs[{i}].anchor",
                  f"anchor {rig.anchor} lies outside body {rig.body}'s mask")


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply dotted-path key=value overrides to a raw scene document.

    Paths address nested objects and list items, e.g. ``sim.frame_count=8``
    or ``bodies[0].material.young=5``. Values parse as JSON when possible
    and fall back to plain strings.
    """
    for item in overrides:
        if "=" not in item:
            raise ValidationError(item, "override must look like path=value")
        dotted, raw_value = item.split("=", 1)
        try:
            value = json.loads(raw_value)
        except json.JSONDecodeError:
            value = raw_value
        target = doc
        parts = []
        for piece in dotted.split("."):
            name, _, rest = piece.partition("[")
            parts.append((name, None))
            while rest:
                idx, _, rest = rest.partition("]")
                parts.append((None, int(idx)))
                rest = rest.lstrip("[")
        for name, idx in parts[:-1]:
            if name is not None:
                if not isinstance(target, dict):
                    raise ValidationError(dotted, f"cannot descend into {name!r}")
                target = target.setdefault(name, {})
            else:
                if not isinstance(target, list) or idx >= len(target):
                    raise ValidationError(dotted, f"index {idx} out of range")
                target = target[idx]
        name, idx = parts[-1]
        if name is not None:
            if not isinstance(target, dict):
                raise ValidationError(dotted, "cannot assign into a non-object")
            target[name] = value
        else:
            if not isinstance(target, list) or idx >= len(target):
                raise ValidationError(dotted, f"index {idx} out of range")
            target[idx] = value
    return doc


# --- compilation and pipeline -------------------------------------------------


@dataclass
class CompiledScene:
    scene: Scene
    image: ImageBuffer
    masks: list
    bodies: list = field(default_factory=list)

    @property
    def canvas(self):
        return self.image.width, self.image.height


def compile_scene(scene: Scene) -> CompiledScene:
    """Load assets, build meshes, and resolve rig anchors to vertices."""
    image = imaging.load_png(scene.image_path)
    masks = [geometry.load_mask(spec.mask_path) for spec in scene.bodies]
    return compile_from_assets(scene, image, masks)


def compile_from_assets(scene: Scene, image: ImageBuffer, masks: list,
                        meshes: list = None) -> CompiledScene:
    """Compile with already-decoded assets (the session service path).

    ``meshes`` short-circuits re-triangulation when the caller has a valid
    cache; meshing is deterministic, so cached and fresh meshes agree.
    """
    compiled = CompiledScene(scene=scene, image=image, masks=masks)
    for i, (spec, mask) in enumerate(zip(scene.bodies, masks)):
        if meshes is not None:
            mesh = meshes[i]
        else:
            mesh = geometry.mesh_from_mask(mask, spec.mesh.spacing, spec.mesh.max_area,
                                           spec.mesh.min_angle)
        compiled.bodies.append(SimBody(mesh=mesh, material=spec.material, rigs=[]))
    for i, rig in enumerate(scene.rigs):
        body = compiled.bodies[rig.body]
        vertex = body.mesh.nearest_vertex(*rig.anchor)
        rest = body.mesh.rest_positions[vertex]
        if rig.kind == "trajectory":
            point = RigPoint(vertex=vertex, kind="trajectory", anchor=rest,
                             trajectory=tuple((t, np.asarray(p)) for t, p in rig.keyframes))
        else:
            point = RigPoint(vertex=vertex, kind=rig.kind, anchor=rest,
                             amplitude=rig.amplitude, frequency=rig.frequency,
                             direction=np.asarray(rig.direction))
        body.rigs.append(point)
    return compiled


def merge_body_flows(compiled: CompiledScene, positions: list) -> FlowField:
    """Rasterize all bodies onto one canvas, painter's order (later wins)."""
    width, height = compiled.canvas
    u = np.zeros((height, width))
    v = np.zeros((height, width))
    covered = np.zeros((height, width), dtype=bool)
    for i, body in enumerate(compiled.bodies):
        bu, bv, bc = rasterize_displacement(body.mesh, positions[i], width, height)
        overlap = covered & bc
        if overlap.any():
            log.warning("body %d rest mesh overlaps an earlier body on %d pixels",
                        i, int(overlap.sum()))
        u[bc] = bu[bc]
        v[bc] = bv[bc]
        covered |= bc
    return FlowField(width, height, u.astype(np.float32), v.astype(np.float32))


@dataclass
class PipelineReport:
    frame_count: int
    body_count: int
    vertex_counts: list
    triangle_counts: list
    flow_files: int
    frame_files: int
    sketch_files: int
    max_flow_per_frame: list
    mean_flow_per_frame: list
    timings: dict
    settings: dict
    output_dir: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _report_figure(report: PipelineReport, path):
    from matplotlib.figure import Figure

    fig = Figure(figsize=(7.0, 4.0))
    ax = fig.subplots()
    frames = np.arange(1, report.frame_count + 1)
    ax.plot(frames, report.max_flow_per_frame, label="max |flow| (px)")
    ax.plot(frames, report.mean_flow_per_frame, label="mean |flow| (px)")
    ax.set_xlabel("frame")
    ax.set_ylabel("displacement (px)")
    ax.set_title("flow magnitude per frame")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)


def write_outputs(compiled: CompiledScene, snapshots, out_dir=None) -> PipelineReport:
    """Emit flows / sketches / warped frames plus the run report.

    Reusable from cached snapshots (the session service) and the headless
    path alike, so both produce identical bytes for the same scene.
    """
    scene = compiled.scene
    cfg = scene.output
    out = Path(out_dir) if out_dir is not None else cfg.directory
    out.mkdir(parents=True, exist_ok=True)
    width, height = compiled.canvas
    timings = {}
    t0 = time.perf_counter()
    fields = []
    for k in range(1, len(snapshots)):
        fields.append(merge_body_flows(compiled, snapshots[k].positions))
    timings["rasterize_s"] = time.perf_counter() - t0

    flow_files = 0
    if cfg.emit_flows:
        t0 = time.perf_counter()
        for k, f in enumerate(fields, start=1):
            with open(out / f"flow_{k:04d}.flo", "wb") as fh:
                write_flo(f, fh)
            flow_files += 1
        timings["write_flows_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sketch = imaging.extract_sketch(compiled.image)
    blurred = imaging.gaussian_blur(sketch, cfg.blur_sigma)
    timings["sketch_s"] = time.perf_counter() - t0
    sketch_files = 0
    if cfg.emit_sketches:
        imaging.save_png(blurred, out / "sketch_0000.png")
        sketch_files = 1

    frame_files = 0
    if cfg.emit_warped:
        t0 = time.perf_counter()
        for k, flow in enumerate(fields, start=1):
            try:
                weights = imaging.flow_magnitude_weights(flow)
                warped = imaging.forward_warp(blurred, flow, weights,
                                              alpha=cfg.alpha,
                                              background=cfg.background)
            except SketchflowError as exc:
                raise PipelineError("warp", str(exc), frame=k) from exc
            imaging.save_png(warped, out / f"frame_{k:04d}.png")
            frame_files += 1
        timings["warp_s"] = time.perf_counter() - t0

    mags = [f.magnitude() for f in fields]
    report = PipelineReport(
        frame_count=len(fields),
        body_count=len(compiled.bodies),
        vertex_counts=[len(b.mesh.rest_positions) for b in compiled.bodies],
        triangle_counts=[len(b.mesh.triangles) for b in compiled.bodies],
        flow_files=flow_files,
        frame_files=frame_files,
        sketch_files=sketch_files,
        max_flow_per_frame=[float(m.max()) for m in mags],
        mean_flow_per_frame=[float(m.mean()) for m in mags],
        timings=timings,
        settings={
            "dt": scene.sim.dt,
            "fps": scene.sim.fps,
            "frame_count": scene.sim.frame_count,
            "damping": scene.sim.damping,
            "gravity": list(scene.sim.gravity),
            "blur_sigma": cfg.blur_sigma,
            "alpha": cfg.alpha,
            "background": cfg.background,
        },
        output_dir=str(out),
    )
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    with open(out / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "time_s", "max_flow_px", "mean_flow_px"])
        for k in range(len(fields)):
            writer.writerow([k + 1, snapshots[k + 1].time,
                             report.max_flow_per_frame[k],
                             report.mean_flow_per_frame[k]])
    _report_figure(report, out / "report.png")
    return report


def run_pipeline(scene: Scene, out_dir=None, on_frame=None) -> PipelineReport:
    """Full headless run: meshes, simulation, flows, sketches, warped frames."""
    t0 = time.perf_counter()
    try:
        compiled = compile_scene(scene)
    except SketchflowError as exc:
        raise PipelineError("geometry", str(exc)) from exc
    mesh_time = time.perf_counter() - t0
    t0 = time.perf_counter()
    try:
        snapshots = dynamics.simulate(compiled.bodies, list(scene.strokes),
                                      scene.sim, on_frame=on_frame)
    except NonFiniteState as exc:
        raise PipelineError("simulate", str(exc), frame=exc.frame) from exc
    sim_time = time.perf_counter() - t0
    report = write_outputs(compiled, snapshots, out_dir=out_dir)
    report.timings["mesh_s"] = mesh_time
    report.timings["simulate_s"] = sim_time
    out = Path(report.output_dir)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return report
