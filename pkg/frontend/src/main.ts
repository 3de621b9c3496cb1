/** Single-page wiring: scene browser, canvas editor, compare view. */

import { ApiClient, ServiceError } from "./api.js";
import { drawBox, drawDesignedPath, drawOverlay, rectToBox } from "./draw.js";
import { contextToImage } from "./heatmap.js";
import { DesignSession } from "./session.js";
import type { Method, SceneSummary, TransformResponse } from "./types.js";
import { METHODS, METHOD_COLORS } from "./types.js";

const api = new ApiClient("");

const el = {
  scenes: document.getElementById("scene-list") as HTMLUListElement,
  canvas: document.getElementById("editor") as HTMLCanvasElement,
  scrubber: document.getElementById("scrubber") as HTMLInputElement,
  frameLabel: document.getElementById("frame-label") as HTMLSpanElement,
  sceneLabel: document.getElementById("scene-label") as HTMLSpanElement,
  methods: document.getElementById("methods") as HTMLDivElement,
  seed: document.getElementById("seed") as HTMLInputElement,
  steps: document.getElementById("steps") as HTMLInputElement,
  submit: document.getElementById("submit") as HTMLButtonElement,
  undo: document.getElementById("undo") as HTMLButtonElement,
  clear: document.getElementById("clear") as HTMLButtonElement,
  banners: document.getElementById("banners") as HTMLDivElement,
  legend: document.getElementById("legend") as HTMLDivElement,
  status: document.getElementById("status") as HTMLSpanElement,
  showTruth: document.getElementById("show-truth") as HTMLInputElement,
};

let session: DesignSession | null = null;
let online = false;
let drag: { x: number; y: number } | null = null;

function banner(text: string): void {
  const div = document.createElement("div");
  div.className = "banner";
  div.textContent = text;
  const close = document.createElement("button");
  close.textContent = "x";
  close.onclick = () => div.remove();
  div.appendChild(close);
  el.banners.appendChild(div);
}

function selectedMethods(): Method[] {
  return [...el.methods.querySelectorAll<HTMLInputElement>("input:checked")].map(
    (box) => box.value as Method,
  );
}

function refreshControls(): void {
  const invalid = session === null || session.validationError() !== null;
  el.submit.disabled = !online || invalid || selectedMethods().length === 0;
  el.submit.title = online ? (session?.validationError() ?? "") : "service offline";
  el.status.textContent = online ? "service: online" : "service: offline";
  el.status.className = online ? "ok" : "down";
}

function redraw(): void {
  const ctx = el.canvas.getContext("2d");
  if (ctx === null || session === null) return;
  const { width, height } = el.canvas;
  ctx.clearRect(0, 0, width, height);

  const img = contextToImage(session.scene.context0);
  const off = document.createElement("canvas");
  off.width = img.width;
  off.height = img.height;
  off.getContext("2d")!.putImageData(new ImageData(img.data, img.width, img.height), 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, width, height);

  const frame = session.scrubber;
  if (el.showTruth.checked) {
    const truth = session.scene.b_tgt[frame];
    if (truth !== undefined) {
      drawBox(ctx, [truth[0]!, truth[1]!, truth[2]!, truth[3]!], "#ffffff", true, 1);
    }
  }
  for (const method of session.overlayMethods()) {
    const response = session.overlay(method);
    if (response !== null) drawOverlay(ctx, method, response, frame);
  }
  drawDesignedPath(ctx, session.previewPath());
  for (const key of session.keyframes) {
    drawBox(ctx, key.box, "#f4d35e", key.frame !== 0, key.frame === frame ? 3 : 1);
  }
  renderLegend();
}

function renderLegend(): void {
  el.legend.textContent = "";
  if (session === null) return;
  const frame = session.scrubber;
  for (const method of session.overlayMethods()) {
    const response = session.overlay(method);
    if (response === null) continue;
    const row = document.createElement("div");
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.background = METHOD_COLORS[method];
    row.appendChild(swatch);
    const iou = response.per_frame_iou?.[frame];
    const mean = response.mean_iou;
    row.appendChild(
      document.createTextNode(
        `${method}  frame IoU ${iou === undefined || iou === null ? "n/a" : iou.toFixed(3)}` +
          `  mean ${mean === null || mean === undefined ? "n/a" : mean.toFixed(3)}`,
      ),
    );
    el.legend.appendChild(row);
  }
}

async function loadScene(summary: SceneSummary): Promise<void> {
  try {
    const detail = await api.getScene(summary.id);
    session = new DesignSession(detail);
    el.sceneLabel.textContent = `${detail.id}  T=${detail.frames}  camera=${detail.path_kind}`;
    el.scrubber.max = String(detail.frames - 1);
    el.scrubber.value = "0";
    el.frameLabel.textContent = `frame 0 / ${detail.frames - 1}`;
    redraw();
    refreshControls();
  } catch (err) {
    banner(err instanceof Error ? err.message : String(err));
  }
}

async function submit(): Promise<void> {
  if (session === null) return;
  const active = session;
  for (const method of selectedMethods()) {
    const sampler = {
      num_steps: Number(el.steps.value) || 28,
      seed: Number(el.seed.value) || 0,
    };
    const request = active.buildRequest(method, sampler);
    const sequence = active.beginRequest(method);
    api
      .transform(request)
      .then((response: TransformResponse) => {
        if (active.acceptResponse(method, sequence, response)) redraw();
      })
      .catch((err) => {
        active.failRequest(method, sequence);
        if (err instanceof ServiceError) banner(`${method}: ${err.message}`);
        else banner(`${method}: request failed`);
      });
  }
}

function wireEditor(): void {
  el.canvas.addEventListener("mousedown", (ev) => {
    const rect = el.canvas.getBoundingClientRect();
    drag = { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  });
  el.canvas.addEventListener("mouseup", (ev) => {
    if (drag === null || session === null) return;
    const rect = el.canvas.getBoundingClientRect();
    const x1 = ev.clientX - rect.left;
    const y1 = ev.clientY - rect.top;
    const tiny = Math.abs(x1 - drag.x) < 4 && Math.abs(y1 - drag.y) < 4;
    if (!tiny) {
      const box = rectToBox(drag.x, drag.y, x1, y1, el.canvas.width, el.canvas.height);
      session.putKeyframe(session.scrubber, box);
      redraw();
      refreshControls();
    }
    drag = null;
  });
  el.scrubber.addEventListener("input", () => {
    if (session === null) return;
    const frame = session.setScrubber(Number(el.scrubber.value));
    el.frameLabel.textContent = `frame ${frame} / ${session.frames - 1}`;
    redraw();
  });
  el.undo.addEventListener("click", () => {
    session?.undo();
    redraw();
    refreshControls();
  });
  el.clear.addEventListener("click", () => {
    session?.clearKeyframes();
    session?.clearOverlays();
    redraw();
    refreshControls();
  });
  el.submit.addEventListener("click", () => void submit());
  el.methods.addEventListener("change", refreshControls);
  el.showTruth.addEventListener("change", redraw);
}

function renderMethodBoxes(): void {
  for (const method of METHODS) {
    const label = document.createElement("label");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.value = method;
    box.checked = method === "interpolation";
    label.appendChild(box);
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.background = METHOD_COLORS[method];
    label.appendChild(swatch);
    label.appendChild(document.createTextNode(method));
    el.methods.appendChild(label);
  }
}

async function boot(): Promise<void> {
  renderMethodBoxes();
  wireEditor();
  online = await api.health();
  refreshControls();
  setInterval(async () => {
    online = await api.health();
    refreshControls();
  }, 5000);
  try {
    const listing = await api.listScenes();
    for (const summary of listing.scenes) {
      const item = document.createElement("li");
      item.textContent = `${summary.id} (${summary.path_kind})`;
      item.onclick = () => void loadScene(summary);
      el.scenes.appendChild(item);
    }
  } catch (err) {
    banner(err instanceof Error ? err.message : String(err));
  }
}

void boot();
