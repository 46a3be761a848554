/**
 * DOM wiring: renders the Editor state onto a canvas and forwards pointer
 * and button events. All mask math lives in the imported modules; this file
 * only draws and dispatches, so it is exercised by hand, not by unit tests.
 */

import { InpaintClient } from "./apiClient.js";
import { Editor } from "./editor.js";
import { MaskLayer, Point, StrokeMode } from "./maskLayer.js";

const OVERLAY_ALPHA = 115; // translucent red over missing pixels

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("editor-canvas");
const ctx = canvas.getContext("2d")!;
const fileInput = el<HTMLInputElement>("image-file");
const maskFileInput = el<HTMLInputElement>("mask-file");
const baseUrlInput = el<HTMLInputElement>("base-url");
const radiusInput = el<HTMLInputElement>("brush-radius");
const radiusLabel = el<HTMLSpanElement>("brush-radius-label");
const modeSelect = el<HTMLSelectElement>("brush-mode");
const undoButton = el<HTMLButtonElement>("undo");
const redoButton = el<HTMLButtonElement>("redo");
const submitButton = el<HTMLButtonElement>("submit");
const exportButton = el<HTMLButtonElement>("export-mask");
const statusLine = el<HTMLDivElement>("status");
const errorBanner = el<HTMLDivElement>("error-banner");
const resultPane = el<HTMLImageElement>("result-image");
const resultMeta = el<HTMLDivElement>("result-meta");

let editor = new Editor(new InpaintClient(baseUrlInput.value || "http://127.0.0.1:8000"));
let bitmap: ImageBitmap | null = null;
let pendingPoints: Point[] = [];
let pointerDown = false;

function currentMode(): StrokeMode {
  return modeSelect.value === "erase" ? "erase" : "mask";
}

function drawOverlay(mask: MaskLayer): void {
  const overlay = ctx.createImageData(mask.width, mask.height);
  for (let i = 0; i < mask.data.length; i++) {
    if (mask.data[i] === 0) {
      overlay.data[i * 4] = 255;
      overlay.data[i * 4 + 3] = OVERLAY_ALPHA;
    }
  }
  const off = new OffscreenCanvas(mask.width, mask.height);
  const offCtx = off.getContext("2d")!;
  offCtx.putImageData(overlay, 0, 0);
  ctx.drawImage(off, 0, 0);
}

function render(): void {
  const mask = editor.maskLayer;
  if (!bitmap || !mask) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  ctx.drawImage(bitmap, 0, 0);
  if (pendingPoints.length > 0) {
    const preview = mask.clone();
    preview.applyStroke({ points: pendingPoints, radius: editor.brushRadius, mode: currentMode() });
    drawOverlay(preview);
  } else {
    drawOverlay(mask);
  }
  undoButton.disabled = !editor.canUndo();
  redoButton.disabled = !editor.canRedo();
  submitButton.disabled = editor.requestInFlight;
  errorBanner.textContent = editor.errorMessage ?? "";
  errorBanner.style.display = editor.errorMessage ? "block" : "none";
  const missing = (100 * mask.missingRatio()).toFixed(1);
  statusLine.textContent = `${mask.width}x${mask.height}, ${missing}% masked`;
}

function canvasPoint(ev: PointerEvent): Point {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * canvas.width,
    y: ((ev.clientY - rect.top) / rect.height) * canvas.height,
  };
}

canvas.addEventListener("pointerdown", (ev) => {
  if (!editor.maskLayer) return;
  pointerDown = true;
  canvas.setPointerCapture(ev.pointerId);
  pendingPoints = [canvasPoint(ev)];
  render();
});

canvas.addEventListener("pointermove", (ev) => {
  if (!pointerDown) return;
  pendingPoints.push(canvasPoint(ev));
  render();
});

function finishStroke(): void {
  if (!pointerDown) return;
  pointerDown = false;
  if (pendingPoints.length > 0) {
    editor.paintStroke(pendingPoints, currentMode());
  }
  pendingPoints = [];
  render();
}

canvas.addEventListener("pointerup", finishStroke);
canvas.addEventListener("pointercancel", finishStroke);

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  bitmap = await createImageBitmap(file);
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  editor.loadImage(bitmap.width, bitmap.height, file);
  resultPane.removeAttribute("src");
  resultMeta.textContent = "";
  render();
});

maskFileInput.addEventListener("change", async () => {
  const file = maskFileInput.files?.[0];
  if (!file) return;
  try {
    await editor.importMask(new Uint8Array(await file.arrayBuffer()));
  } catch (err) {
    errorBanner.textContent = err instanceof Error ? err.message : String(err);
    errorBanner.style.display = "block";
    return;
  }
  render();
});

baseUrlInput.addEventListener("change", () => {
  const old = editor;
  editor = new Editor(new InpaintClient(baseUrlInput.value));
  // keep the session: re-load the current image if one is up
  const img = old.sourceImage;
  if (img && bitmap) {
    editor.loadImage(img.width, img.height, img.blob);
  }
  render();
});

radiusInput.addEventListener("input", () => {
  editor.brushRadius = Number(radiusInput.value);
  radiusLabel.textContent = radiusInput.value;
});

undoButton.addEventListener("click", () => {
  editor.undo();
  render();
});

redoButton.addEventListener("click", () => {
  editor.redo();
  render();
});

exportButton.addEventListener("click", async () => {
  if (!editor.maskLayer) return;
  const bytes = await editor.exportMask();
  const url = URL.createObjectURL(new Blob([bytes.slice()], { type: "image/png" }));
  const a = document.createElement("a");
  a.href = url;
  a.download = "mask.png";
  a.click();
  URL.revokeObjectURL(url);
});

submitButton.addEventListener("click", async () => {
  submitButton.disabled = true;
  const ok = await editor.submitAndDisplay();
  if (ok && editor.lastResult) {
    const res = editor.lastResult;
    resultPane.src = URL.createObjectURL(res.blob);
    resultMeta.textContent = `model ${res.modelId}, ${res.processingMs.toFixed(1)} ms`;
  }
  render();
});

render();
