"""Local session service for the authoring UI.

JSON envelopes travel over a WebSocket at /ws:

    {"kind": "request"|"response"|"event", "op": <name>,
     "session": <id or null>, "revision": <int or null>, "body": {...}}

Responses echo the request's op and carry the session's current revision;
events carry the revision of the state they describe. Failures come back as
a response whose body is {"error": {"type", "path", "message"}}. The full
protocol reference lives in docs/protocol.md.

Ops: create_session, mutate, get_scene, simulate, cancel, export.

Concurrency: one message loop per socket and at most one simulation per
session. Simulations run on a worker thread and stream frame events through
the outgoing queue, so the loop stays responsive mid-run; any mutate during
a run cancels it (terminal event "cancelled"). Revisions increase
monotonically; a mutate citing an old revision is rejected (StaleRevision).
"""

from __future__ import annotations

import asyncio
import base64
import copy
import io
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from threading import Event

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from PIL import Image

from . import dynamics, imaging, scene as scene_mod
from .errors import (BadImage, DimensionMismatch, NonFiniteState, SketchflowError,
                     StaleRevision, StaleSimulation, ValidationError)
from .geometry import Mask, mesh_from_mask
from .imaging import ImageBuffer
from .scene import Scene, compile_from_assets, write_outputs

log = logging.getLogger(__name__)

PREVIEW_MAX_SIDE = 256
_TOP_KEYS = ("bodies", "strokes", "rigs", "sim", "output")


@dataclass
class Session:
    id: str
    image: ImageBuffer
    masks: list
    doc: dict
    revision: int = 0
    meshes: list = None
    mesh_keys: list = None
    snapshots: list = None
    sim_frames: int = 0
    sim_revision: int = -1
    cancel_flag: Event = None
    running: bool = False

    @property
    def cache_valid(self) -> bool:
        return self.snapshots is not None and self.sim_revision == self.revision


class SessionStore:
    """In-process session registry; ids are sequential and opaque."""

    def __init__(self):
        self.sessions = {}
        self._counter = 0

    def create(self, image: ImageBuffer, masks: list) -> Session:
        self._counter += 1
        sid = f"s{self._counter:04d}"
        doc = {
            "bodies": [{"density": scene_mod.DEFAULT_DENSITY,
                        "material": dict(scene_mod.DEFAULT_MATERIAL),
                        "mesh": {}} for _ in masks],
            "strokes": [],
            "rigs": [],
            "sim": {},
            "output": {},
        }
        session = Session(id=sid, image=image, masks=masks, doc=doc)
        self.sessions[sid] = session
        return session

    def get(self, sid) -> Session:
        if not sid or sid not in self.sessions:
            raise ValidationError("session", f"unknown session {sid!r}")
        return self.sessions[sid]


# --- scene assembly from session state ---------------------------------------


def _scene_from_doc(session: Session, doc: dict, base_dir=".") -> Scene:
    """Validate the session document and build a Scene over in-memory assets."""
    for key in doc:
        if key not in _TOP_KEYS:
            raise ValidationError(key, "unknown key")
    bodies_doc = doc.get("bodies", [])
    if len(bodies_doc) != len(session.masks):
        raise ValidationError("bodies", f"expected {len(session.masks)} bodies "
                                        f"(one per mask), got {len(bodies_doc)}")
    bodies = tuple(
        scene_mod.parse_body_fragment(b, f"bodies[{i}]", Path(f"mask_{i:04d}.png"))
        for i, b in enumerate(bodies_doc))
    strokes = tuple(scene_mod.parse_stroke_fragment(s, f"strokes[{i}]")
                    for i, s in enumerate(doc.get("strokes", [])))
    rigs = tuple(scene_mod.parse_rig_fragment(r, f"rigs[{i}]", len(bodies))
                 for i, r in enumerate(doc.get("rigs", [])))
    for i, rig in enumerate(rigs):
        if not session.masks[rig.body].contains_point(*rig.anchor):
            raise ValidationError(f"rigs[{i}].anchor",
                                  f"anchor {rig.anchor} lies outside body {rig.body}'s mask")
    sim = scene_mod.parse_sim_fragment(doc.get("sim", {}), "sim")
    output = scene_mod.parse_output_fragment(doc.get("output", {}), "output", base_dir)
    return Scene(image_path=Path("image.png"), bodies=bodies, strokes=strokes,
                 rigs=rigs, sim=sim, output=output)


def _merge_patch(doc: dict, patch: dict) -> dict:
    """Patch semantics: sim/output merge per key, bodies merge per index,
    strokes/rigs replace wholesale."""
    merged = copy.deepcopy(doc)
    if not isinstance(patch, dict):
        raise ValidationError("patch", "expected an object")
    for key, value in patch.items():
        if key not in _TOP_KEYS:
            raise ValidationError(f"patch.{key}", "unknown key")
        if key in ("sim", "output"):
            if not isinstance(value, dict):
                raise ValidationError(f"patch.{key}", "expected an object")
            merged[key].update(copy.deepcopy(value))
        elif key == "bodies":
            if not isinstance(value, list) or len(value) != len(merged["bodies"]):
                raise ValidationError("patch.bodies",
                                      f"expected {len(merged['bodies'])} entries")
            for i, frag in enumerate(value):
                if not isinstance(frag, dict):
                    raise ValidationError(f"patch.bodies[{i}]", "expected an object")
                merged["bodies"][i].update(copy.deepcopy(frag))
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _ensure_meshes(session: Session, scene: Scene):
    keys = [(b.mesh.spacing, b.mesh.max_area, b.mesh.min_angle) for b in scene.bodies]
    if session.meshes is None or session.mesh_keys != keys:
        session.meshes = [
            mesh_from_mask(mask, *key) for mask, key in zip(session.masks, keys)]
        session.mesh_keys = keys
        return True
    return False


def _compile(session: Session, scene: Scene):
    _ensure_meshes(session, scene)
    return compile_from_assets(scene, session.image, session.masks,
                               meshes=session.meshes)


def _mesh_payload(session: Session) -> list:
    return [{"vertices": np.asarray(m.rest_positions).tolist(),
             "triangles": np.asarray(m.triangles).tolist()}
            for m in session.meshes]


# --- envelopes ----------------------------------------------------------------


def _response(op, session_id, revision, body) -> dict:
    return {"kind": "response", "op": op, "session": session_id,
            "revision": revision, "body": body}


def _event(op, session_id, revision, body) -> dict:
    return {"kind": "event", "op": op, "session": session_id,
            "revision": revision, "body": body}


def _error_body(exc) -> dict:
    return {"error": {
        "type": type(exc).__name__,
        "path": getattr(exc, "path", None),
        "message": str(exc),
    }}


def _decode_image(b64: str) -> ImageBuffer:
    try:
        raw = base64.b64decode(b64)
    except Exception as exc:
        raise BadImage(f"invalid base64 image payload: {exc}") from exc
    return imaging.decode_png(raw)


def _decode_mask(b64: str) -> Mask:
    try:
        raw = base64.b64decode(b64)
        img = Image.open(io.BytesIO(raw)).convert("L")
        img.load()
    except Exception as exc:
        raise BadImage(f"cannot decode mask: {exc}") from exc
    return Mask.from_array(np.asarray(img) >= 128)


def _preview_png(image: ImageBuffer) -> str:
    factor = max(1, int(np.ceil(max(image.width, image.height) / PREVIEW_MAX_SIDE)))
    small = image.samples[::factor, ::factor, :]
    return base64.b64encode(imaging.encode_png(ImageBuffer.from_array(small))).decode()


# --- op handlers ---------------------------------------------------------------


class _SocketWorker:
    """Per-connection state: outgoing queue and the event loop handle."""

    def __init__(self, store: SessionStore, websocket: WebSocket):
        self.store = store
        self.websocket = websocket
        self.queue = asyncio.Queue()
        self.loop = asyncio.get_running_loop()
        # events produced while handling a request; sent after its response
        self.deferred = []

    def push(self, envelope: dict):
        self.queue.put_nowait(envelope)

    def defer(self, envelope: dict):
        self.deferred.append(envelope)

    def flush_deferred(self):
        for envelope in self.deferred:
            self.push(envelope)
        self.deferred.clear()

    def push_threadsafe(self, envelope: dict):
        self.loop.call_soon_threadsafe(self.queue.put_nowait, envelope)

    async def drain(self):
        while True:
            envelope = await self.queue.get()
            await self.websocket.send_text(json.dumps(envelope))

    # -- ops ------------------------------------------------------------

    def op_create_session(self, body) -> tuple:
        image = _decode_image(body.get("image", ""))
        masks = [_decode_mask(b) for b in body.get("masks", [])]
        if not masks:
            raise ValidationError("masks", "at least one mask is required")
        for i, mask in enumerate(masks):
            if (mask.width, mask.height) != (image.width, image.height):
                raise DimensionMismatch(
                    f"mask {i} is {mask.width}x{mask.height}, image is "
                    f"{image.width}x{image.height}")
        session = self.store.create(image, masks)
        scene = _scene_from_doc(session, session.doc)
        _ensure_meshes(session, scene)
        return session, {"session": session.id, "meshes": _mesh_payload(session)}

    def op_mutate(self, session: Session, body) -> dict:
        cited = body.get("revision")
        if cited != session.revision:
            raise StaleRevision(
                f"patch cites revision {cited}, session is at {session.revision}")
        merged = _merge_patch(session.doc, body.get("patch", {}))
        scene = _scene_from_doc(session, merged)  # validates before commit
        if session.running and session.cancel_flag is not None:
            session.cancel_flag.set()
        session.doc = merged
        session.revision += 1
        rebuilt = _ensure_meshes(session, scene)
        if rebuilt:
            self.defer(_event("meshes", session.id, session.revision,
                              {"meshes": _mesh_payload(session)}))
        return {"revision": session.revision}

    def op_get_scene(self, session: Session, body) -> dict:
        return {"scene": copy.deepcopy(session.doc), "revision": session.revision}

    def op_simulate(self, session: Session, body) -> dict:
        if session.running:
            raise ValidationError("simulate", "a simulation is already running")
        scene = _scene_from_doc(session, session.doc)
        if body.get("frames") is not None:
            frames = body["frames"]
            if not isinstance(frames, int) or frames < 1:
                raise ValidationError("frames", "must be a positive integer")
            scene = replace(scene, sim=replace(scene.sim, frame_count=frames))
        preview = bool(body.get("preview", False))
        compiled = _compile(session, scene)
        blurred = None
        if preview:
            sketch = imaging.extract_sketch(compiled.image)
            blurred = imaging.gaussian_blur(sketch, scene.output.blur_sigma)
        cancel = Event()
        session.cancel_flag = cancel
        session.running = True
        rev = session.revision
        sid = session.id

        def on_frame(frame, snap):
            if cancel.is_set():
                return False
            payload = {"frame": frame, "time": snap.time,
                       "positions": [np.asarray(p).tolist() for p in snap.positions]}
            if preview:
                flow = scene_mod.merge_body_flows(compiled, snap.positions)
                weights = imaging.flow_magnitude_weights(flow)
                warped = imaging.forward_warp(blurred, flow, weights,
                                              alpha=scene.output.alpha,
                                              background=scene.output.background)
                payload["preview"] = _preview_png(warped)
            self.push_threadsafe(_event("frame", sid, rev, payload))
            return True

        def run():
            return dynamics.simulate(compiled.bodies, list(scene.strokes),
                                     scene.sim, on_frame=on_frame)

        async def runner():
            try:
                snapshots = await self.loop.run_in_executor(None, run)
            except NonFiniteState as exc:
                session.running = False
                self.push(_event("failed", sid, rev,
                                 {"message": str(exc), "frame": exc.frame,
                                  "substep": exc.substep}))
                return
            except SketchflowError as exc:
                session.running = False
                self.push(_event("failed", sid, rev, {"message": str(exc)}))
                return
            session.running = False
            if cancel.is_set():
                self.push(_event("cancelled", sid, rev, {}))
            else:
                session.snapshots = snapshots
                session.sim_frames = len(snapshots) - 1
                session.sim_revision = rev
                self.push(_event("done", sid, rev,
                                 {"frames": len(snapshots) - 1}))

        asyncio.ensure_future(runner())
        return {"started": True, "frames": scene.sim.frame_count}

    def op_cancel(self, session: Session, body) -> dict:
        was_running = session.running
        if session.cancel_flag is not None:
            session.cancel_flag.set()
        return {"cancelled": was_running}

    def op_export(self, session: Session, body) -> dict:
        if session.running:
            raise StaleSimulation("a simulation is still running")
        if not session.cache_valid:
            raise StaleSimulation(
                "no simulation cached for the current revision; run simulate first")
        out_dir = body.get("dir")
        if not out_dir:
            raise ValidationError("dir", "required")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        imaging.save_png(session.image, out / "image.png")
        doc = copy.deepcopy(session.doc)
        for i, mask in enumerate(session.masks):
            name = f"mask_{i:04d}.png"
            imaging.save_png(ImageBuffer.from_array(
                mask.bits.astype(np.float64)[:, :, None]), out / name)
            doc["bodies"][i]["mask"] = name
        doc["image"] = "image.png"
        # the cache holds exactly sim_frames frames; pin that in the export
        doc["sim"]["frame_count"] = session.sim_frames
        doc.setdefault("output", {})["dir"] = "."
        (out / "scene.json").write_text(json.dumps(doc, indent=2) + "\n")
        exported = scene_mod.load_scene(out / "scene.json")
        compiled = compile_from_assets(exported, session.image, session.masks,
                                       meshes=session.meshes)
        report = write_outputs(compiled, session.snapshots, out_dir=out)
        return {"report": report.to_dict(), "scene": str(out / "scene.json")}


async def _handle_socket(store: SessionStore, websocket: WebSocket):
    await websocket.accept()
    worker = _SocketWorker(store, websocket)
    drain_task = asyncio.ensure_future(worker.drain())
    try:
        while True:
            text = await websocket.receive_text()
            op = None
            sid = None
            try:
                envelope = json.loads(text)
                op = envelope.get("op")
                sid = envelope.get("session")
                body = envelope.get("body") or {}
                if op == "create_session":
                    session, result = worker.op_create_session(body)
                    worker.push(_response(op, session.id, session.revision, result))
                    continue
                session = store.get(sid)
                handler = {
                    "mutate": worker.op_mutate,
                    "get_scene": worker.op_get_scene,
                    "simulate": worker.op_simulate,
                    "cancel": worker.op_cancel,
                    "export": worker.op_export,
                }.get(op)
                if handler is None:
                    raise ValidationError("op", f"unknown op {op!r}")
                result = handler(session, body)
                worker.push(_response(op, session.id, session.revision, result))
                worker.flush_deferred()
            except SketchflowError as exc:
                worker.deferred.clear()
                revision = None
                if sid in store.sessions:
                    revision = store.sessions[sid].revision
                worker.push(_response(op or "unknown", sid, revision,
                                      _error_body(exc)))
            except json.JSONDecodeError as exc:
                worker.push(_response("unknown", None, None,
                                      _error_body(ValidationError("", f"bad JSON: {exc}"))))
    except WebSocketDisconnect:
        pass
    finally:
        drain_task.cancel()
        for session in store.sessions.values():
            if session.cancel_flag is not None:
                session.cancel_flag.set()


def create_app() -> FastAPI:
    app = FastAPI(title="sketchflow session service")
    store = SessionStore()
    app.state.store = store

    @app.get("/health")
    def health():
        return {"ok": True}

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await _handle_socket(store, websocket)

    return app
