/**
 * Browser bootstrap: file pickers, the two-layer canvas, tool panel,
 * timeline scrubber, and keyboard shortcuts. All state changes flow
 * through the Editor; this module only reflects them.
 *
 * Keyboard: space = play/pause; 1..6 = wind / repel / attract / fixed /
 * wavy / select; ? toggles the help overlay.
 */

import { Editor, lameFromYoungPoisson, Tool } from "./editor.js";
import { maskFromImageData, MaskBitmap } from "./masks.js";
import { Point, StrokeSpec } from "./protocol.js";
import { drawRig, drawStroke, drawWireframe } from "./render.js";
import { SessionClient } from "./session.js";
import { WebSocketTransport } from "./transport.js";

const TOOL_KEYS: Record<string, Tool> = {
  "1": "wind",
  "2": "repel",
  "3": "attract",
  "4": "fixed",
  "5": "wavy",
  "6": "select",
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

async function fileToDataUrl(file: File): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve(String(reader.result));
    reader.onerror = () => reject(reader.error);
    reader.readAsDataURL(file);
  });
}

async function loadImage(src: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error("image decode failed"));
    img.src = src;
  });
}

function imageToMask(img: HTMLImageElement): MaskBitmap {
  const canvas = document.createElement("canvas");
  canvas.width = img.naturalWidth;
  canvas.height = img.naturalHeight;
  const ctx = canvas.getContext("2d")!;
  ctx.drawImage(img, 0, 0);
  return maskFromImageData(ctx.getImageData(0, 0, canvas.width, canvas.height));
}

class App {
  editor: Editor | null = null;
  image: HTMLImageElement | null = null;
  previewImage: HTMLImageElement | null = null;
  scale = 1;

  readonly imageLayer = el<HTMLCanvasElement>("image-layer");
  readonly overlay = el<HTMLCanvasElement>("overlay-layer");
  readonly status = el<HTMLDivElement>("status");
  readonly errorBox = el<HTMLDivElement>("errors");
  readonly timeline = el<HTMLInputElement>("timeline");

  constructor() {
    el<HTMLButtonElement>("connect").addEventListener("click", () => {
      void this.connect();
    });
    el<HTMLButtonElement>("run").addEventListener("click", () => {
      void this.editor?.run(undefined, true);
    });
    el<HTMLButtonElement>("export").addEventListener("click", () => {
      const dir = el<HTMLInputElement>("export-dir").value || "studio-export";
      void this.editor?.exportScene(dir);
    });
    this.timeline.addEventListener("input", () => {
      this.editor?.scrub(Number(this.timeline.value));
    });
    for (const id of ["wind", "repel", "attract", "fixed", "wavy", "select"]) {
      el<HTMLButtonElement>(`tool-${id}`).addEventListener("click", () => {
        this.editor?.setTool(id as Tool);
      });
    }
    const young = el<HTMLInputElement>("young");
    const poisson = el<HTMLInputElement>("poisson");
    el<HTMLButtonElement>("apply-material").addEventListener("click", () => {
      // the slider is log10(E); surfacing raw E keeps the range usable
      void this.editor?.setMaterial(Math.pow(10, Number(young.value)),
                                    Number(poisson.value));
    });
    const reflectMaterial = () => {
      const e = Math.pow(10, Number(young.value));
      const nu = Number(poisson.value);
      el<HTMLSpanElement>("young-value").textContent = e.toFixed(1);
      const lame = lameFromYoungPoisson(e, nu);
      el<HTMLSpanElement>("mu-value").textContent = lame.mu.toFixed(1);
      el<HTMLSpanElement>("lambda-value").textContent = lame.lambda.toFixed(1);
    };
    young.addEventListener("input", reflectMaterial);
    poisson.addEventListener("input", reflectMaterial);
    const strength = el<HTMLInputElement>("strength");
    const radius = el<HTMLInputElement>("radius");
    const applyStyle = () => {
      if (this.editor) {
        this.editor.strokeStyle.strength = Number(strength.value);
        this.editor.strokeStyle.radius = Number(radius.value);
      }
    };
    strength.addEventListener("input", applyStyle);
    radius.addEventListener("input", applyStyle);

    document.addEventListener("keydown", (event) => {
      if (event.target instanceof HTMLInputElement) {
        return;
      }
      if (event.code === "Space") {
        event.preventDefault();
        this.editor?.togglePlay();
      }
      const tool = TOOL_KEYS[event.key];
      if (tool) {
        this.editor?.setTool(tool);
      }
      if (event.key === "?") {
        el<HTMLDivElement>("help").classList.toggle("hidden");
      }
    });

    this.bindPointer();
    window.setInterval(() => {
      this.editor?.advancePlayhead();
    }, 1000 / 24);
  }

  canvasPoint(event: PointerEvent): Point {
    const rect = this.overlay.getBoundingClientRect();
    return [(event.clientX - rect.left) / this.scale,
            (event.clientY - rect.top) / this.scale];
  }

  bindPointer(): void {
    let down = false;
    this.overlay.addEventListener("pointerdown", (event) => {
      if (!this.editor) {
        return;
      }
      const p = this.canvasPoint(event);
      const tool = this.editor.state.tool;
      if (tool === "wind" || tool === "repel" || tool === "attract") {
        down = true;
        this.editor.beginStroke(p);
      } else if (tool === "fixed" || tool === "wavy" || tool === "trajectory") {
        void this.editor.placeRig(p, tool);
      }
    });
    this.overlay.addEventListener("pointermove", (event) => {
      if (down && this.editor) {
        this.editor.extendStroke(this.canvasPoint(event));
        this.redraw();
      }
    });
    this.overlay.addEventListener("pointerup", () => {
      if (down && this.editor) {
        down = false;
        void this.editor.commitStroke();
      }
    });
  }

  async connect(): Promise<void> {
    const imageFile = el<HTMLInputElement>("image-file").files?.[0];
    const maskFiles = el<HTMLInputElement>("mask-files").files;
    if (!imageFile || !maskFiles || maskFiles.length === 0) {
      this.status.textContent = "pick an illustration and at least one mask";
      return;
    }
    const port = el<HTMLInputElement>("port").value || "8631";
    const client = new SessionClient(
      new WebSocketTransport(`ws://127.0.0.1:${port}/ws`));
    const editor = new Editor(client);
    editor.subscribe(() => this.reflect());

    const imageUrl = await fileToDataUrl(imageFile);
    this.image = await loadImage(imageUrl);
    const maskB64: string[] = [];
    const maskBitmaps: MaskBitmap[] = [];
    for (const file of Array.from(maskFiles)) {
      const url = await fileToDataUrl(file);
      maskB64.push(url.split(",", 2)[1]!);
      maskBitmaps.push(imageToMask(await loadImage(url)));
    }
    const meshes = await client.createSession(imageUrl.split(",", 2)[1]!, maskB64);
    await editor.bootstrap(meshes, maskBitmaps);
    this.editor = editor;

    this.scale = Math.max(1, Math.floor(640 / this.image.naturalWidth));
    for (const layer of [this.imageLayer, this.overlay]) {
      layer.width = this.image.naturalWidth * this.scale;
      layer.height = this.image.naturalHeight * this.scale;
    }
    this.status.textContent = `session ${client.sessionId ?? "?"} connected`;
    this.reflect();
  }

  reflect(): void {
    if (!this.editor) {
      return;
    }
    const state = this.editor.state;
    this.timeline.max = String(state.playback.frames.length);
    this.timeline.value = String(state.playback.current);
    el<HTMLSpanElement>("frame-label").textContent =
      `${state.playback.current}/${state.playback.frames.length}` +
      (state.playback.cancelled ? " (cancelled)" : "") +
      (state.playback.staleFrames ? " [stale]" : "");
    this.errorBox.replaceChildren();
    state.errors.forEach((err, index) => {
      const row = document.createElement("div");
      row.className = "error";
      row.textContent = (err.path ? `${err.path}: ` : "") + err.text;
      const dismiss = document.createElement("button");
      dismiss.textContent = "x";
      dismiss.addEventListener("click", () => this.editor?.dismissError(index));
      row.appendChild(dismiss);
      this.errorBox.appendChild(row);
    });
    for (const warning of state.warnings.splice(0)) {
      this.status.textContent = warning;
    }
    const current = state.playback.frames[state.playback.current - 1];
    if (current?.preview) {
      const img = new Image();
      img.onload = () => {
        this.previewImage = img;
        this.redraw();
      };
      img.src = `data:image/png;base64,${current.preview}`;
    } else {
      this.previewImage = null;
    }
    this.redraw();
  }

  redraw(): void {
    if (!this.editor || !this.image) {
      return;
    }
    const state = this.editor.state;
    const base = this.imageLayer.getContext("2d")!;
    base.imageSmoothingEnabled = false;
    base.clearRect(0, 0, this.imageLayer.width, this.imageLayer.height);
    const shown = this.previewImage ?? this.image;
    base.drawImage(shown, 0, 0, this.imageLayer.width, this.imageLayer.height);

    const ctx = this.overlay.getContext("2d")!;
    ctx.clearRect(0, 0, this.overlay.width, this.overlay.height);
    const positions = this.editor.currentPositions();
    state.meshes.forEach((mesh, index) => {
      drawWireframe(ctx, mesh, positions ? positions[index] ?? null : null, this.scale);
    });
    for (const stroke of state.strokes) {
      drawStroke(ctx, stroke, this.scale);
    }
    if (state.draft && state.draft.length > 1) {
      const draft: StrokeSpec = {
        kind: state.tool === "repel" || state.tool === "attract" ? state.tool : "wind",
        path: state.draft,
        strength: 0,
      };
      drawStroke(ctx, draft, this.scale);
    }
    for (const rig of state.rigs) {
      drawRig(ctx, rig, this.scale);
    }
  }
}

new App();
