/**
 * Editor state and the actions behind every UI gesture.
 *
 * The server is the source of truth: local stroke/rig lists mirror the
 * last acknowledged scene document, drafts live only until their mutate is
 * acknowledged, and a stale-revision rejection refreshes the scene and
 * replays the draft once. Every server validation error becomes a visible,
 * dismissible message; none are dropped.
 */

import {
  Envelope,
  FrameEventBody,
  MeshPayload,
  Point,
  RigKind,
  RigSpec,
  SceneDoc,
  SimSpec,
  StrokeKind,
  StrokeSpec,
} from "./protocol.js";
import { decimate } from "./decimate.js";
import { MaskBitmap, maskContains } from "./masks.js";
import { frameBody, ServiceError, SessionClient } from "./session.js";

export type Tool = "select" | StrokeKind | RigKind;

export interface UiError {
  text: string;
  path: string | null;
  kind: string;
}

export interface StrokeStyle {
  strength: number;
  radius: number;
  particleSpeed: number;
  emitRate: number;
}

export interface WavyStyle {
  amplitude: number;
  frequency: number;
  direction: Point;
}

export interface ReceivedFrame {
  frame: number;
  time: number;
  positions: Point[][];
  preview?: string;
}

export interface Playback {
  frames: ReceivedFrame[];
  current: number; // 0 = rest pose, k = k-th received frame
  playing: boolean;
  running: boolean;
  cancelled: boolean;
  staleFrames: boolean;
}

export interface EditorState {
  tool: Tool;
  strokes: StrokeSpec[];
  rigs: RigSpec[];
  sim: SimSpec;
  material: { young: number; poisson: number };
  meshes: MeshPayload[];
  draft: Point[] | null;
  playback: Playback;
  errors: UiError[];
  warnings: string[];
}

export const DECIMATE_TOLERANCE = 2.0;

/** Plane-strain Lame parameters from (E, nu); mirrors the server formulas. */
export function lameFromYoungPoisson(young: number, poisson: number): {
  mu: number;
  lambda: number;
} {
  return {
    mu: young / (2 * (1 + poisson)),
    lambda: (young * poisson) / ((1 + poisson) * (1 - 2 * poisson)),
  };
}

export function initialState(): EditorState {
  return {
    tool: "wind",
    strokes: [],
    rigs: [],
    sim: {},
    material: { young: 300.0, poisson: 0.3 },
    meshes: [],
    draft: null,
    playback: {
      frames: [],
      current: 0,
      playing: false,
      running: false,
      cancelled: false,
      staleFrames: false,
    },
    errors: [],
    warnings: [],
  };
}

export class Editor {
  state: EditorState = initialState();
  strokeStyle: StrokeStyle = {
    strength: 30,
    radius: 40,
    particleSpeed: 200,
    emitRate: 30,
  };
  wavyStyle: WavyStyle = { amplitude: 3, frequency: 2, direction: [0, 1] };
  masks: MaskBitmap[] = [];

  private subscribers: Array<(s: EditorState) => void> = [];

  constructor(readonly client: SessionClient) {
    client.on("frame", (env) => this.onFrame(frameBody(env)));
    client.on("done", () => this.onDone());
    client.on("cancelled", () => this.onCancelled());
    client.on("failed", (env) => this.onFailed(env));
    client.on("meshes", (env) => {
      this.state.meshes = env.body["meshes"] as unknown as MeshPayload[];
      this.notify();
    });
  }

  subscribe(cb: (s: EditorState) => void): void {
    this.subscribers.push(cb);
  }

  private notify(): void {
    for (const cb of this.subscribers) {
      cb(this.state);
    }
  }

  private pushError(err: ServiceError): void {
    this.state.errors.push({ text: err.message, path: err.path, kind: err.type });
    this.notify();
  }

  dismissError(index: number): void {
    this.state.errors.splice(index, 1);
    this.notify();
  }

  warn(text: string): void {
    this.state.warnings.push(text);
    this.notify();
  }

  setTool(tool: Tool): void {
    this.state.tool = tool;
    this.notify();
  }

  async bootstrap(meshes: MeshPayload[], masks: MaskBitmap[]): Promise<void> {
    this.state.meshes = meshes;
    this.masks = masks;
    this.notify();
  }

  /** Mutate; on a stale revision, refresh the scene and replay once. */
  private async mutateWithReplay(patch: Record<string, unknown>): Promise<boolean> {
    try {
      await this.client.mutate(patch);
      return true;
    } catch (exc) {
      if (exc instanceof ServiceError && exc.type === "StaleRevision") {
        await this.reloadScene();
        try {
          await this.client.mutate(patch);
          return true;
        } catch (again) {
          if (again instanceof ServiceError) {
            this.pushError(again);
            return false;
          }
          throw again;
        }
      }
      if (exc instanceof ServiceError) {
        this.pushError(exc);
        return false;
      }
      throw exc;
    }
  }

  async reloadScene(): Promise<SceneDoc> {
    const doc = await this.client.getScene();
    this.state.strokes = doc.strokes;
    this.state.rigs = doc.rigs;
    this.state.sim = doc.sim;
    const material = doc.bodies[0]?.material;
    if (material && material.young !== undefined && material.poisson !== undefined) {
      this.state.material = { young: material.young, poisson: material.poisson };
    }
    this.notify();
    return doc;
  }

  // -- strokes ---------------------------------------------------------

  beginStroke(point: Point): void {
    this.state.draft = [point];
    this.notify();
  }

  extendStroke(point: Point): void {
    this.state.draft?.push(point);
    this.notify();
  }

  /** Decimate the pointer path and commit it as a stroke of the active kind. */
  async commitStroke(): Promise<boolean> {
    const draft = this.state.draft;
    this.state.draft = null;
    if (!draft || draft.length === 0) {
      return false;
    }
    const kind = this.state.tool;
    if (kind !== "wind" && kind !== "repel" && kind !== "attract") {
      return false;
    }
    let path = decimate(draft, DECIMATE_TOLERANCE);
    if (kind === "wind" && path.length < 2) {
      this.warn("wind strokes need a drag to define a direction");
      this.notify();
      return false;
    }
    if (kind !== "wind" && path.length >= 2) {
      const len = path.reduce((acc, p, i) => {
        if (i === 0) return 0;
        const q = path[i - 1]!;
        return acc + Math.hypot(p[0] - q[0], p[1] - q[1]);
      }, 0);
      if (len < DECIMATE_TOLERANCE) {
        path = [path[0]!]; // a click, not a drag: single-point stroke
      }
    }
    const stroke: StrokeSpec = {
      kind,
      path,
      strength: this.strokeStyle.strength,
      radius: this.strokeStyle.radius,
      particle_speed: this.strokeStyle.particleSpeed,
      emit_rate: this.strokeStyle.emitRate,
    };
    const next = this.state.strokes.concat([stroke]);
    const ok = await this.mutateWithReplay({ strokes: next });
    if (ok) {
      this.state.strokes = next;
      this.invalidateRun();
    }
    this.notify();
    return ok;
  }

  // -- rigs -------------------------------------------------------------

  /** Place a rig at a click; clicks outside every mask warn and send nothing. */
  async placeRig(point: Point, kind: RigKind): Promise<boolean> {
    const body = this.masks.findIndex((m) => maskContains(m, point[0], point[1]));
    if (body < 0) {
      this.warn("rig anchors must land inside a body's mask");
      return false;
    }
    const rig: RigSpec = { kind, anchor: point, body };
    if (kind === "wavy") {
      rig.amplitude = this.wavyStyle.amplitude;
      rig.frequency = this.wavyStyle.frequency;
      rig.direction = this.wavyStyle.direction;
    }
    if (kind === "trajectory") {
      rig.keyframes = [[0, point]];
    }
    const next = this.state.rigs.concat([rig]);
    const ok = await this.mutateWithReplay({ rigs: next });
    if (ok) {
      this.state.rigs = next;
      this.invalidateRun();
    }
    this.notify();
    return ok;
  }

  // -- material ----------------------------------------------------------

  async setMaterial(young: number, poisson: number): Promise<boolean> {
    const bodies = this.masks.map(() => ({ material: { young, poisson } }));
    const ok = await this.mutateWithReplay({ bodies });
    if (ok) {
      this.state.material = { young, poisson };
      this.invalidateRun();
    }
    this.notify();
    return ok;
  }

  async setSim(sim: SimSpec): Promise<boolean> {
    const ok = await this.mutateWithReplay({ sim: sim as Record<string, unknown> });
    if (ok) {
      this.state.sim = { ...this.state.sim, ...sim };
      this.invalidateRun();
    }
    this.notify();
    return ok;
  }

  // -- playback -----------------------------------------------------------

  private invalidateRun(): void {
    // edits mid-run cancel on the server; mark received frames stale either way
    if (this.state.playback.running) {
      this.state.playback.cancelled = true;
    }
    if (this.state.playback.frames.length > 0) {
      this.state.playback.staleFrames = true;
    }
  }

  async run(frames?: number, preview = false): Promise<boolean> {
    const playback = this.state.playback;
    if (playback.running) {
      return false;
    }
    playback.frames = [];
    playback.current = 0;
    playback.playing = false;
    playback.cancelled = false;
    playback.staleFrames = false;
    playback.running = true;
    this.notify();
    try {
      await this.client.simulate(frames, preview);
      return true;
    } catch (exc) {
      playback.running = false;
      if (exc instanceof ServiceError) {
        this.pushError(exc);
        return false;
      }
      throw exc;
    }
  }

  private onFrame(body: FrameEventBody): void {
    this.state.playback.frames.push({
      frame: body.frame,
      time: body.time,
      positions: body.positions,
      preview: body.preview,
    });
    this.notify();
  }

  private onDone(): void {
    this.state.playback.running = false;
    this.notify();
  }

  private onCancelled(): void {
    this.state.playback.running = false;
    this.state.playback.cancelled = true;
    this.state.playback.playing = false;
    this.state.playback.staleFrames = true;
    this.notify();
  }

  private onFailed(env: Envelope): void {
    this.state.playback.running = false;
    this.state.playback.playing = false;
    const frame = env.body["frame"];
    const substep = env.body["substep"];
    const message = env.body["message"];
    this.state.errors.push({
      text: `simulation failed at frame ${String(frame)}, substep ${String(substep)}: ${String(message)}`,
      path: null,
      kind: "SimulationFailed",
    });
    this.notify();
  }

  /** Seek the timeline; clamps to the frames received so far (0 = rest). */
  scrub(frame: number): void {
    const received = this.state.playback.frames.length;
    this.state.playback.current = Math.max(0, Math.min(frame, received));
    this.notify();
  }

  togglePlay(): void {
    if (this.state.playback.frames.length === 0) {
      return;
    }
    this.state.playback.playing = !this.state.playback.playing;
    this.notify();
  }

  advancePlayhead(): void {
    const playback = this.state.playback;
    if (!playback.playing || playback.frames.length === 0) {
      return;
    }
    playback.current = playback.current >= playback.frames.length
      ? 1
      : playback.current + 1;
    this.notify();
  }

  /** Vertex positions to draw at the current playhead (null = rest pose). */
  currentPositions(): Point[][] | null {
    const playback = this.state.playback;
    if (playback.current === 0) {
      return null;
    }
    const frame = playback.frames[playback.current - 1];
    return frame ? frame.positions : null;
  }

  async exportScene(dir: string): Promise<boolean> {
    try {
      await this.client.exportTo(dir);
      return true;
    } catch (exc) {
      if (exc instanceof ServiceError) {
        this.pushError(exc);
        return false;
      }
      throw exc;
    }
  }
}
