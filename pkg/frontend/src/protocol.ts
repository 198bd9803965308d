/**
 * Wire format shared with the session service: JSON envelopes over a
 * WebSocket. See docs/protocol.md in the repository root; this module is
 * the single place that knows the envelope shape.
 */

export type EnvelopeKind = "request" | "response" | "event";

export interface Envelope {
  kind: EnvelopeKind;
  op: string;
  session: string | null;
  revision: number | null;
  body: Record<string, unknown>;
}

export interface ServerError {
  type: string;
  path: string | null;
  message: string;
}

export type StrokeKind = "wind" | "repel" | "attract";
export type RigKind = "fixed" | "wavy" | "trajectory";
export type Point = [number, number];

export interface StrokeSpec {
  kind: StrokeKind;
  path: Point[];
  strength: number;
  radius?: number;
  particle_speed?: number;
  emit_rate?: number;
  active?: [number, number];
}

export interface RigSpec {
  kind: RigKind;
  anchor: Point;
  body?: number;
  amplitude?: number;
  frequency?: number;
  direction?: Point;
  keyframes?: Array<[number, Point]>;
}

export interface SimSpec {
  dt?: number;
  fps?: number;
  frame_count?: number;
  damping?: number;
  gravity?: Point;
}

export interface MaterialSpec {
  young?: number;
  poisson?: number;
  mu?: number;
  lambda?: number;
}

export interface BodySpec {
  density?: number;
  material?: MaterialSpec;
  mesh?: { spacing?: number; max_area?: number; min_angle?: number };
}

export interface SceneDoc {
  bodies: BodySpec[];
  strokes: StrokeSpec[];
  rigs: RigSpec[];
  sim: SimSpec;
  output: Record<string, unknown>;
}

export interface MeshPayload {
  vertices: Point[];
  triangles: Array<[number, number, number]>;
}

export interface FrameEventBody {
  frame: number;
  time: number;
  positions: Point[][];
  preview?: string;
}

export function makeRequest(
  op: string,
  session: string | null,
  body: Record<string, unknown>,
): Envelope {
  return { kind: "request", op, session, revision: null, body };
}

export function encodeEnvelope(env: Envelope): string {
  return JSON.stringify(env);
}

export function decodeEnvelope(text: string): Envelope {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (exc) {
    throw new Error(`malformed envelope: ${String(exc)}`);
  }
  if (typeof raw !== "object" || raw === null) {
    throw new Error("envelope must be a JSON object");
  }
  const env = raw as Partial<Envelope>;
  if (env.kind !== "request" && env.kind !== "response" && env.kind !== "event") {
    throw new Error(`bad envelope kind: ${String(env.kind)}`);
  }
  if (typeof env.op !== "string") {
    throw new Error("envelope op must be a string");
  }
  return {
    kind: env.kind,
    op: env.op,
    session: typeof env.session === "string" ? env.session : null,
    revision: typeof env.revision === "number" ? env.revision : null,
    body: (env.body ?? {}) as Record<string, unknown>,
  };
}

export function errorOf(env: Envelope): ServerError | null {
  const err = env.body["error"];
  if (typeof err !== "object" || err === null) {
    return null;
  }
  const e = err as Record<string, unknown>;
  return {
    type: typeof e["type"] === "string" ? (e["type"] as string) : "UnknownError",
    path: typeof e["path"] === "string" ? (e["path"] as string) : null,
    message: typeof e["message"] === "string" ? (e["message"] as string) : "",
  };
}

export function emptySceneDoc(bodyCount: number): SceneDoc {
  return {
    bodies: Array.from({ length: bodyCount }, () => ({})),
    strokes: [],
    rigs: [],
    sim: {},
    output: {},
  };
}
