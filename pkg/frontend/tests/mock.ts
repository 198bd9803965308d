/**
 * Scripted in-memory stand-in for the session service, implementing the
 * envelope semantics the Python side tests against: FIFO responses,
 * optimistic revisions, wholesale stroke/rig replacement, per-key sim and
 * output merges, deferred mesh events, and manual frame-event pacing.
 */

import {
  decodeEnvelope,
  encodeEnvelope,
  Envelope,
  MeshPayload,
  SceneDoc,
  ServerError,
} from "../src/protocol.js";
import { Transport } from "../src/transport.js";

export type Validator = (patch: Record<string, unknown>) => ServerError | null;

const DEFAULT_MESH: MeshPayload = {
  vertices: [[0, 0], [10, 0], [0, 10]],
  triangles: [[0, 1, 2]],
};

export class MockServer implements Transport {
  doc: SceneDoc = { bodies: [{}], strokes: [], rigs: [], sim: {}, output: {} };
  revision = 0;
  sessionId: string | null = null;
  validator: Validator = () => null;
  meshes: MeshPayload[] = [DEFAULT_MESH];
  simulationRunning = false;
  cacheValid = false;
  simRevision = -1;
  exports: string[] = [];
  sent: Envelope[] = [];

  private messageCb: ((text: string) => void) | null = null;

  onMessage(cb: (text: string) => void): void {
    this.messageCb = cb;
  }

  onClose(): void {}

  close(): void {}

  private deliver(env: Envelope): void {
    this.messageCb?.(encodeEnvelope(env));
  }

  private respond(op: string, body: Record<string, unknown>): void {
    this.deliver({ kind: "response", op, session: this.sessionId,
                   revision: this.revision, body });
  }

  private respondError(op: string, err: ServerError): void {
    this.respond(op, { error: err as unknown as Record<string, unknown> });
  }

  event(op: string, body: Record<string, unknown>, revision = this.revision): void {
    this.deliver({ kind: "event", op, session: this.sessionId, revision, body });
  }

  pushFrame(frame: number, positions: number[][][] = [[[1, 2]]]): void {
    this.event("frame", { frame, time: frame / 24, positions }, this.simRevision);
  }

  finish(outcome: "done" | "cancelled" | "failed",
         body: Record<string, unknown> = {}): void {
    this.simulationRunning = false;
    if (outcome === "done") {
      this.cacheValid = true;
    }
    this.event(outcome, body, this.simRevision);
  }

  send(text: string): void {
    const env = decodeEnvelope(text);
    this.sent.push(env);
    const body = env.body;
    switch (env.op) {
      case "create_session": {
        this.sessionId = "m0001";
        this.revision = 0;
        this.respond(env.op, { session: this.sessionId, meshes: this.meshes });
        return;
      }
      case "mutate": {
        const cited = body["revision"];
        if (cited !== this.revision) {
          this.respondError(env.op, {
            type: "StaleRevision",
            path: null,
            message: `patch cites revision ${String(cited)}, session is at ${this.revision}`,
          });
          return;
        }
        const patch = (body["patch"] ?? {}) as Record<string, unknown>;
        const err = this.validator(patch);
        if (err) {
          this.respondError(env.op, err);
          return;
        }
        let meshesRebuilt = false;
        for (const [key, value] of Object.entries(patch)) {
          if (key === "strokes" || key === "rigs") {
            (this.doc as unknown as Record<string, unknown>)[key] =
              JSON.parse(JSON.stringify(value));
          } else if (key === "sim" || key === "output") {
            Object.assign(
              (this.doc as unknown as Record<string, Record<string, unknown>>)[key]!,
              value as Record<string, unknown>);
          } else if (key === "bodies") {
            const patches = value as Array<Record<string, unknown>>;
            patches.forEach((fragment, index) => {
              if ("mesh" in fragment) {
                meshesRebuilt = true;
              }
              Object.assign(
                this.doc.bodies[index] as Record<string, unknown>, fragment);
            });
          }
        }
        if (this.simulationRunning) {
          this.simulationRunning = false;
          this.finish("cancelled");
        }
        this.revision += 1;
        this.cacheValid = false;
        this.respond(env.op, { revision: this.revision });
        if (meshesRebuilt) {
          this.event("meshes", { meshes: this.meshes });
        }
        return;
      }
      case "get_scene": {
        this.respond(env.op, {
          scene: JSON.parse(JSON.stringify(this.doc)),
          revision: this.revision,
        });
        return;
      }
      case "simulate": {
        if (this.simulationRunning) {
          this.respondError(env.op, {
            type: "ValidationError", path: "simulate",
            message: "a simulation is already running",
          });
          return;
        }
        this.simulationRunning = true;
        this.simRevision = this.revision;
        this.respond(env.op, { started: true, frames: body["frames"] ?? 48 });
        return;
      }
      case "cancel": {
        const was = this.simulationRunning;
        if (was) {
          this.finish("cancelled");
        }
        this.respond(env.op, { cancelled: was });
        return;
      }
      case "export": {
        if (!this.cacheValid || this.simRevision !== this.revision) {
          this.respondError(env.op, {
            type: "StaleSimulation", path: null,
            message: "no simulation cached for the current revision",
          });
          return;
        }
        this.exports.push(String(body["dir"]));
        this.respond(env.op, { report: {}, scene: `${String(body["dir"])}/scene.json` });
        return;
      }
      default:
        this.respondError(env.op, {
          type: "ValidationError", path: "op",
          message: `unknown op '${env.op}'`,
        });
    }
  }
}
