// Editor core: all state transitions of the mask-drawing workflow, free of
// DOM dependencies so the logic runs identically in the browser and in node
// tests. Rendering and event wiring live in main.ts.

import { ApiError, InpaintResponse, submitInpaint } from "./api.js";
import { MaskBuffer, Point } from "./mask.js";
import { encodeMaskPng } from "./png.js";
import { UndoStack } from "./undo.js";

export interface Brush {
  radius: number;
  mode: "paint" | "erase";
}

export interface LoadedImage {
  width: number;
  height: number;
  /** original file bytes, forwarded untouched to the service */
  bytes: Uint8Array;
  name: string;
  /** drawable source in the browser; absent in tests */
  bitmap?: CanvasImageSource;
}

export interface Overlays {
  maskTint: boolean;
  landmarks: boolean;
}

export type SubmitOutcome =
  | { status: "ok"; result: InpaintResponse }
  | { status: "error"; message: string }
  | { status: "busy" }
  | { status: "empty-mask" }
  | { status: "no-image" };

export class Editor {
  image: LoadedImage | null = null;
  mask: MaskBuffer | null = null;
  brush: Brush = { radius: 16, mode: "paint" };
  overlays: Overlays = { maskTint: true, landmarks: false };
  lastResult: InpaintResponse | null = null;
  banner: string | null = null;
  hint: string | null = null;
  serviceUrl = "http://127.0.0.1:8080";

  private undoStack: UndoStack;
  private submitPending = false;

  constructor(undoDepth = 20) {
    this.undoStack = new UndoStack(undoDepth);
  }

  get pending(): boolean {
    return this.submitPending;
  }

  loadImage(image: LoadedImage): void {
    this.image = image;
    this.mask = new MaskBuffer(image.width, image.height);
    this.undoStack.clear();
    this.lastResult = null;
    this.banner = null;
    this.hint = null;
  }

  /** Apply one completed stroke; returns false when ignored. */
  paintStroke(path: Point[], brush?: Partial<Brush>): boolean {
    if (!this.image || !this.mask) {
      this.hint = "load an image before painting";
      return false;
    }
    if (path.length === 0) return false;
    const radius = brush?.radius ?? this.brush.radius;
    const mode = brush?.mode ?? this.brush.mode;
    this.undoStack.push(this.mask.data); // one snapshot per completed stroke
    this.mask.stampPath(path, radius, mode === "paint" ? 1 : 0);
    return true;
  }

  undo(): boolean {
    if (!this.mask) return false;
    const snapshot = this.undoStack.undo(this.mask.data);
    if (!snapshot) return false;
    this.mask.restore(snapshot);
    return true;
  }

  redo(): boolean {
    if (!this.mask) return false;
    const snapshot = this.undoStack.redo(this.mask.data);
    if (!snapshot) return false;
    this.mask.restore(snapshot);
    return true;
  }

  canUndo(): boolean {
    return this.undoStack.canUndo();
  }

  /** Single-channel PNG, white = hole, dimensions equal to the image. */
  exportMask(): Uint8Array {
    if (!this.image || !this.mask) {
      throw new Error("no image loaded");
    }
    return encodeMaskPng(this.mask.width, this.mask.height, this.mask.data);
  }

  /**
   * Submit the image and mask to the service. An empty mask is refused with
   * "empty-mask" unless the caller confirmed it; only one submission may be
   * in flight. Errors land in the banner and leave all state untouched.
   */
  async submit(options?: { confirmedEmpty?: boolean }): Promise<SubmitOutcome> {
    if (!this.image || !this.mask) return { status: "no-image" };
    if (this.submitPending) return { status: "busy" };
    if (this.mask.isEmpty() && !options?.confirmedEmpty) {
      return { status: "empty-mask" };
    }
    this.submitPending = true;
    try {
      const result = await submitInpaint(
        this.serviceUrl, this.image.bytes, this.image.name, this.exportMask());
      this.lastResult = result;
      this.overlays.landmarks = true;
      this.banner = null;
      return { status: "ok", result };
    } catch (err) {
      const message = err instanceof ApiError ? err.message
        : err instanceof Error ? err.message : String(err);
      this.banner = message;
      return { status: "error", message };
    } finally {
      this.submitPending = false;
    }
  }

  /**
   * Landmark dot positions in display pixels: normalized (x, y) scale to
   * (x * width, y * height) of the displayed image.
   */
  landmarkDots(displayWidth: number, displayHeight: number): Point[] {
    if (!this.lastResult) return [];
    const dots: Point[] = [];
    const values = this.lastResult.landmarks;
    for (let i = 0; i < values.length; i += 2) {
      dots.push({ x: values[i] * displayWidth, y: values[i + 1] * displayHeight });
    }
    return dots;
  }
}
