/**
 * Editor state machine, kept free of DOM so it is unit-testable. The DOM
 * layer in main.ts renders this state and forwards pointer events.
 *
 * Invariants: the mask layer always has the source image's dims, and the
 * mask is always exactly what replaying the stroke history produces.
 */

import { ApiError, InpaintClient } from "./apiClient.js";
import { MaskLayer, Point, StrokeMode } from "./maskLayer.js";
import { maskFromPngBytes, maskToPngBytes } from "./png.js";
import { StrokeHistory } from "./undo.js";

export interface SourceImage {
  width: number;
  height: number;
  blob: Blob;
}

export interface ResultImage {
  blob: Blob;
  modelId: string;
  processingMs: number;
}

export class Editor {
  brushRadius = 16;

  private readonly client: InpaintClient;
  private image: SourceImage | null = null;
  private mask: MaskLayer | null = null;
  private history: StrokeHistory | null = null;
  private result: ResultImage | null = null;
  private inFlight = false;
  private error: string | null = null;

  constructor(client: InpaintClient) {
    this.client = client;
  }

  get sourceImage(): SourceImage | null {
    return this.image;
  }

  get maskLayer(): MaskLayer | null {
    return this.mask;
  }

  get lastResult(): ResultImage | null {
    return this.result;
  }

  get requestInFlight(): boolean {
    return this.inFlight;
  }

  get errorMessage(): string | null {
    return this.error;
  }

  loadImage(width: number, height: number, blob: Blob): void {
    this.image = { width, height, blob };
    this.mask = MaskLayer.allExisting(width, height);
    this.history = new StrokeHistory(this.mask);
    this.result = null;
    this.error = null;
  }

  /** No-op before an image is loaded. */
  paintStroke(points: Point[], mode: StrokeMode = "mask"): void {
    if (!this.mask || !this.history || points.length === 0) return;
    const stroke = { points, radius: this.brushRadius, mode };
    this.mask.applyStroke(stroke);
    this.history.push(stroke);
  }

  undo(): boolean {
    if (!this.history || !this.history.undo()) return false;
    this.mask = this.history.replay();
    return true;
  }

  redo(): boolean {
    if (!this.history || !this.history.redo()) return false;
    this.mask = this.history.replay();
    return true;
  }

  canUndo(): boolean {
    return this.history?.canUndo() ?? false;
  }

  canRedo(): boolean {
    return this.history?.canRedo() ?? false;
  }

  /** Encode the current mask in the wire format (255 existing, 0 missing). */
  async exportMask(): Promise<Uint8Array> {
    if (!this.mask) throw new Error("no image loaded");
    return maskToPngBytes(this.mask);
  }

  /**
   * Replace the mask from an encoded payload. The decoded dims must match
   * the loaded image; history restarts from the imported layer.
   */
  async importMask(bytes: Uint8Array): Promise<void> {
    if (!this.image || !this.history) throw new Error("no image loaded");
    const layer = await maskFromPngBytes(bytes);
    if (layer.width !== this.image.width || layer.height !== this.image.height) {
      throw new Error(
        `mask dims ${layer.width}x${layer.height} do not match image ` +
          `${this.image.width}x${this.image.height}`,
      );
    }
    this.mask = layer;
    this.history.rebase(layer);
  }

  /**
   * Send the image + mask to the service. Returns true when a result came
   * back. A second call while one is pending is refused, and every failure
   * leaves the image and mask untouched with the message in errorMessage.
   */
  async submitAndDisplay(): Promise<boolean> {
    if (this.inFlight) return false;
    if (!this.image || !this.mask) {
      this.error = "load an image before submitting";
      return false;
    }
    if (this.mask.countMissing() === 0) {
      this.error = "mask is empty: paint over the region to remove";
      return false;
    }
    this.inFlight = true;
    this.error = null;
    try {
      const maskPng = await maskToPngBytes(this.mask);
      const res = await this.client.inpaint(this.image.blob, maskPng);
      this.result = { blob: res.blob, modelId: res.modelId, processingMs: res.processingMs };
      return true;
    } catch (err) {
      if (err instanceof ApiError) {
        this.error = `${err.code}: ${err.message}`;
      } else if (err instanceof Error) {
        this.error = err.message;
      } else {
        this.error = String(err);
      }
      return false;
    } finally {
      this.inFlight = false;
    }
  }
}
