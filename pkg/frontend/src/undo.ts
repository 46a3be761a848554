import { MaskLayer, Stroke, cloneStroke } from "./maskLayer.js";

/**
 * Stroke-stack history. The mask is always a pure function of the base
 * layer plus the applied stroke list, so undo/redo never mutate pixels
 * directly: they move strokes between stacks and replay.
 */
export class StrokeHistory {
  private applied: Stroke[] = [];
  private undone: Stroke[] = [];
  private base: MaskLayer;

  constructor(base: MaskLayer) {
    this.base = base.clone();
  }

  /** Replace the starting layer (mask import); history is meaningless across
   * a base swap, so both stacks clear. */
  rebase(base: MaskLayer): void {
    this.base = base.clone();
    this.applied = [];
    this.undone = [];
  }

  push(stroke: Stroke): void {
    this.applied.push(cloneStroke(stroke));
    this.undone = [];
  }

  undo(): boolean {
    const s = this.applied.pop();
    if (!s) return false;
    this.undone.push(s);
    return true;
  }

  redo(): boolean {
    const s = this.undone.pop();
    if (!s) return false;
    this.applied.push(s);
    return true;
  }

  canUndo(): boolean {
    return this.applied.length > 0;
  }

  canRedo(): boolean {
    return this.undone.length > 0;
  }

  strokeCount(): number {
    return this.applied.length;
  }

  /** Rebuild the mask from the base layer and the applied strokes. */
  replay(): MaskLayer {
    const layer = this.base.clone();
    for (const s of this.applied) {
      layer.applyStroke(s);
    }
    return layer;
  }
}
