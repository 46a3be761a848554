/**
 * Editor-side binary mask. Cell value 1 means the pixel exists (keep), 0
 * means missing (to be synthesized), the same convention as the wire
 * format, where existing pixels are stored as 255.
 */

export interface Point {
  x: number;
  y: number;
}

export type StrokeMode = "mask" | "erase";

export interface Stroke {
  points: Point[];
  radius: number;
  mode: StrokeMode;
}

export class MaskLayer {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array;

  constructor(width: number, height: number, data?: Uint8Array) {
    if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
      throw new Error(`invalid mask dims ${width}x${height}`);
    }
    if (data !== undefined && data.length !== width * height) {
      throw new Error(`data length ${data.length} != ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.data = data ?? new Uint8Array(width * height).fill(1);
  }

  /** All pixels existing, nothing painted. */
  static allExisting(width: number, height: number): MaskLayer {
    return new MaskLayer(width, height);
  }

  clone(): MaskLayer {
    return new MaskLayer(this.width, this.height, this.data.slice());
  }

  equals(other: MaskLayer): boolean {
    if (other.width !== this.width || other.height !== this.height) return false;
    for (let i = 0; i < this.data.length; i++) {
      if (this.data[i] !== other.data[i]) return false;
    }
    return true;
  }

  get(x: number, y: number): number {
    return this.data[y * this.width + x];
  }

  countMissing(): number {
    let n = 0;
    for (let i = 0; i < this.data.length; i++) {
      if (this.data[i] === 0) n++;
    }
    return n;
  }

  missingRatio(): number {
    return this.countMissing() / this.data.length;
  }

  /** Stamp a filled disk; value 0 paints missing, 1 erases back to existing. */
  stampDisk(cx: number, cy: number, radius: number, value: 0 | 1): void {
    const r2 = radius * radius;
    const x0 = Math.max(0, Math.floor(cx - radius));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + radius));
    const y0 = Math.max(0, Math.floor(cy - radius));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + radius));
    for (let y = y0; y <= y1; y++) {
      const dy = y - cy;
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        if (dx * dx + dy * dy <= r2) {
          this.data[y * this.width + x] = value;
        }
      }
    }
  }

  /**
   * Stamp disks along the whole path so fast pointer moves leave no gaps:
   * consecutive samples are interpolated at sub-pixel steps.
   */
  applyStroke(stroke: Stroke): void {
    const value: 0 | 1 = stroke.mode === "mask" ? 0 : 1;
    const pts = stroke.points;
    if (pts.length === 0) return;
    this.stampDisk(pts[0].x, pts[0].y, stroke.radius, value);
    for (let i = 1; i < pts.length; i++) {
      const a = pts[i - 1];
      const b = pts[i];
      const dist = Math.hypot(b.x - a.x, b.y - a.y);
      const steps = Math.max(1, Math.ceil(dist));
      for (let s = 1; s <= steps; s++) {
        const t = s / steps;
        this.stampDisk(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, stroke.radius, value);
      }
    }
  }
}

export function cloneStroke(stroke: Stroke): Stroke {
  return {
    points: stroke.points.map((p) => ({ x: p.x, y: p.y })),
    radius: stroke.radius,
    mode: stroke.mode,
  };
}
