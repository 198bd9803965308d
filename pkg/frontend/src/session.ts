/**
 * Session client: request/response correlation, event fan-out, and the
 * revision bookkeeping that backs optimistic concurrency.
 *
 * The server answers requests in order, so correlation is FIFO; every
 * response carries the session's current revision, which this client
 * adopts as the one to cite in the next mutate. Incoming messages are
 * processed through a serialized queue so handler re-entry cannot
 * reorder state updates.
 */

import {
  decodeEnvelope,
  encodeEnvelope,
  Envelope,
  errorOf,
  FrameEventBody,
  makeRequest,
  MeshPayload,
  SceneDoc,
  ServerError,
} from "./protocol.js";
import { Transport } from "./transport.js";

export class ServiceError extends Error {
  readonly type: string;
  readonly path: string | null;

  constructor(err: ServerError) {
    super(err.message);
    this.type = err.type;
    this.path = err.path;
  }
}

interface Pending {
  op: string;
  resolve: (env: Envelope) => void;
  reject: (err: Error) => void;
}

export type EventName = "frame" | "done" | "cancelled" | "failed" | "meshes";

export class SessionClient {
  sessionId: string | null = null;
  /** Last revision acknowledged by the server; mutations always cite it. */
  revision = 0;

  private pending: Pending[] = [];
  private listeners = new Map<EventName, Array<(env: Envelope) => void>>();
  private inbox: string[] = [];
  private draining = false;

  constructor(private transport: Transport) {
    transport.onMessage((text) => {
      this.inbox.push(text);
      this.drain();
    });
  }

  on(event: EventName, cb: (env: Envelope) => void): void {
    const list = this.listeners.get(event) ?? [];
    list.push(cb);
    this.listeners.set(event, list);
  }

  private drain(): void {
    if (this.draining) {
      return; // already inside the queue; the loop below will pick it up
    }
    this.draining = true;
    try {
      while (this.inbox.length > 0) {
        const text = this.inbox.shift()!;
        this.dispatch(decodeEnvelope(text));
      }
    } finally {
      this.draining = false;
    }
  }

  private dispatch(env: Envelope): void {
    if (env.kind === "response") {
      if (typeof env.revision === "number") {
        this.revision = env.revision;
      }
      const pending = this.pending.shift();
      if (!pending) {
        return; // response with no outstanding request; drop
      }
      const err = errorOf(env);
      if (err) {
        pending.reject(new ServiceError(err));
      } else {
        pending.resolve(env);
      }
      return;
    }
    if (env.kind === "event") {
      const list = this.listeners.get(env.op as EventName) ?? [];
      for (const cb of list) {
        cb(env);
      }
    }
  }

  request(op: string, body: Record<string, unknown>): Promise<Envelope> {
    const env = makeRequest(op, this.sessionId, body);
    return new Promise((resolve, reject) => {
      this.pending.push({ op, resolve, reject });
      this.transport.send(encodeEnvelope(env));
    });
  }

  async createSession(imageB64: string, maskB64s: string[]): Promise<MeshPayload[]> {
    const env = await this.request("create_session", {
      image: imageB64,
      masks: maskB64s,
    });
    this.sessionId = env.body["session"] as string;
    return env.body["meshes"] as unknown as MeshPayload[];
  }

  /** Mutate citing the last acknowledged revision. */
  mutate(patch: Record<string, unknown>): Promise<Envelope> {
    return this.request("mutate", { revision: this.revision, patch });
  }

  async getScene(): Promise<SceneDoc> {
    const env = await this.request("get_scene", {});
    return env.body["scene"] as unknown as SceneDoc;
  }

  simulate(frames?: number, preview = false): Promise<Envelope> {
    const body: Record<string, unknown> = { preview };
    if (frames !== undefined) {
      body["frames"] = frames;
    }
    return this.request("simulate", body);
  }

  cancel(): Promise<Envelope> {
    return this.request("cancel", {});
  }

  exportTo(dir: string): Promise<Envelope> {
    return this.request("export", { dir });
  }
}

export function frameBody(env: Envelope): FrameEventBody {
  return env.body as unknown as FrameEventBody;
}
