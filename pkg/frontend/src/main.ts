// DOM bootstrap: canvas rendering and event wiring around the Editor core.

import { Editor } from "./editor.js";
import { Point } from "./mask.js";

const editor = new Editor();

const canvas = document.getElementById("canvas") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const fileInput = document.getElementById("file") as HTMLInputElement;
const brushSize = document.getElementById("brush-size") as HTMLInputElement;
const brushMode = document.getElementById("brush-mode") as HTMLSelectElement;
const undoButton = document.getElementById("undo") as HTMLButtonElement;
const redoButton = document.getElementById("redo") as HTMLButtonElement;
const submitButton = document.getElementById("submit") as HTMLButtonElement;
const resetButton = document.getElementById("show-original") as HTMLButtonElement;
const serviceUrlInput = document.getElementById("service-url") as HTMLInputElement;
const tintToggle = document.getElementById("toggle-tint") as HTMLInputElement;
const dotsToggle = document.getElementById("toggle-dots") as HTMLInputElement;
const banner = document.getElementById("banner") as HTMLDivElement;
const status = document.getElementById("status") as HTMLDivElement;

let resultBitmap: ImageBitmap | null = null;
let showResult = false;
let stroke: Point[] = [];
let drawing = false;

editor.serviceUrl = serviceUrlInput.value;

function render(): void {
  const image = editor.image;
  if (!image || !editor.mask) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  canvas.width = image.width;
  canvas.height = image.height;
  const base = showResult && resultBitmap ? resultBitmap : image.bitmap;
  if (base) ctx.drawImage(base, 0, 0);

  if (editor.overlays.maskTint && !showResult) {
    const tint = ctx.createImageData(image.width, image.height);
    const mask = editor.mask.data;
    for (let i = 0; i < mask.length; i++) {
      if (mask[i]) {
        tint.data[i * 4] = 255;
        tint.data[i * 4 + 3] = 110;
      }
    }
    void createImageBitmap(tint).then((bitmap) => {
      ctx.drawImage(bitmap, 0, 0);
      drawDots();
    });
    return;
  }
  drawDots();
}

function drawDots(): void {
  if (!editor.overlays.landmarks || !dotsToggle.checked) return;
  ctx.fillStyle = "#19d27c";
  for (const dot of editor.landmarkDots(canvas.width, canvas.height)) {
    ctx.beginPath();
    ctx.arc(dot.x, dot.y, 2.5, 0, Math.PI * 2);
    ctx.fill();
  }
}

function updateChrome(): void {
  banner.textContent = editor.banner ?? "";
  banner.style.display = editor.banner ? "block" : "none";
  status.textContent = editor.hint ?? (editor.pending ? "inpainting..." : "");
  submitButton.disabled = editor.pending || !editor.image;
  undoButton.disabled = !editor.canUndo();
}

function canvasPoint(event: PointerEvent): Point {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((event.clientX - rect.left) / rect.width) * canvas.width,
    y: ((event.clientY - rect.top) / rect.height) * canvas.height,
  };
}

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  const bytes = new Uint8Array(await file.arrayBuffer());
  const bitmap = await createImageBitmap(file);
  editor.loadImage({ width: bitmap.width, height: bitmap.height, bytes, name: file.name, bitmap });
  resultBitmap = null;
  showResult = false;
  render();
  updateChrome();
});

canvas.addEventListener("pointerdown", (event) => {
  drawing = true;
  stroke = [canvasPoint(event)];
  canvas.setPointerCapture(event.pointerId);
});

canvas.addEventListener("pointermove", (event) => {
  if (!drawing) return;
  stroke.push(canvasPoint(event));
  // live preview: stamp incrementally on a throwaway copy is overkill for a
  // mouth-sized mask; just re-stamp the in-progress stroke each frame
  const preview = editor.mask?.clone();
  if (preview && editor.image) {
    preview.stampPath(stroke, Number(brushSize.value),
      brushMode.value === "paint" ? 1 : 0);
    const saved = editor.mask!.data.slice();
    editor.mask!.data.set(preview.data);
    showResult = false;
    render();
    editor.mask!.data.set(saved);
  }
});

canvas.addEventListener("pointerup", () => {
  if (!drawing) return;
  drawing = false;
  const applied = editor.paintStroke(stroke, {
    radius: Number(brushSize.value),
    mode: brushMode.value === "paint" ? "paint" : "erase",
  });
  stroke = [];
  if (applied) showResult = false;
  render();
  updateChrome();
});

undoButton.addEventListener("click", () => {
  editor.undo();
  showResult = false;
  render();
  updateChrome();
});

redoButton.addEventListener("click", () => {
  editor.redo();
  showResult = false;
  render();
  updateChrome();
});

resetButton.addEventListener("click", () => {
  showResult = false;
  render();
});

serviceUrlInput.addEventListener("change", () => {
  editor.serviceUrl = serviceUrlInput.value;
});

tintToggle.addEventListener("change", () => {
  editor.overlays.maskTint = tintToggle.checked;
  render();
});

dotsToggle.addEventListener("change", () => {
  render();
});

submitButton.addEventListener("click", async () => {
  let outcome = await editor.submit();
  if (outcome.status === "empty-mask") {
    if (!window.confirm("The mask is empty; submit anyway?")) return;
    outcome = await editor.submit({ confirmedEmpty: true });
  }
  updateChrome();
  if (outcome.status === "ok") {
    const binary = atob(outcome.result.image_b64);
    const bytes = new Uint8Array(binary.length);
    for (let i = 0; i < binary.length; i++) bytes[i] = binary.charCodeAt(i);
    resultBitmap = await createImageBitmap(new Blob([bytes], { type: "image/png" }));
    showResult = true;
    render();
    status.textContent = `done in ${outcome.result.latency_ms.toFixed(0)} ms` +
      (outcome.result.warnings.length ? ` (${outcome.result.warnings.join("; ")})` : "");
  }
  updateChrome();
});

updateChrome();
