// Binary mask raster: one byte per pixel, 1 = hole, 0 = keep.
// Pure data model, shared by the browser UI and the node test suite.

export interface Point {
  x: number;
  y: number;
}

export class MaskBuffer {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array;

  constructor(width: number, height: number, data?: Uint8Array) {
    if (width < 1 || height < 1) {
      throw new Error(`mask dimensions must be positive, got ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    if (data) {
      if (data.length !== width * height) {
        throw new Error(`mask data length ${data.length} != ${width * height}`);
      }
      this.data = data;
    } else {
      this.data = new Uint8Array(width * height);
    }
  }

  get(x: number, y: number): number {
    return this.data[y * this.width + x];
  }

  /** Stamp a filled disk (pixels with dx^2 + dy^2 <= r^2). */
  stampDisk(cx: number, cy: number, radius: number, value: 0 | 1): void {
    const r = Math.max(0, Math.round(radius));
    const r2 = r * r;
    const x0 = Math.max(0, Math.round(cx) - r);
    const x1 = Math.min(this.width - 1, Math.round(cx) + r);
    const y0 = Math.max(0, Math.round(cy) - r);
    const y1 = Math.min(this.height - 1, Math.round(cy) + r);
    for (let y = y0; y <= y1; y++) {
      const dy = y - Math.round(cy);
      for (let x = x0; x <= x1; x++) {
        const dx = x - Math.round(cx);
        if (dx * dx + dy * dy <= r2) {
          this.data[y * this.width + x] = value;
        }
      }
    }
  }

  /** Stamp disks along a pointer path, interpolating gaps at <= 1 px steps. */
  stampPath(path: Point[], radius: number, value: 0 | 1): void {
    if (path.length === 0) return;
    this.stampDisk(path[0].x, path[0].y, radius, value);
    for (let i = 1; i < path.length; i++) {
      const a = path[i - 1];
      const b = path[i];
      const steps = Math.max(1, Math.ceil(Math.hypot(b.x - a.x, b.y - a.y)));
      for (let s = 1; s <= steps; s++) {
        const t = s / steps;
        this.stampDisk(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, radius, value);
      }
    }
  }

  count(): number {
    let n = 0;
    for (const v of this.data) n += v;
    return n;
  }

  isEmpty(): boolean {
    return this.count() === 0;
  }

  clone(): MaskBuffer {
    return new MaskBuffer(this.width, this.height, this.data.slice());
  }

  /** Overwrite contents from a snapshot of identical dimensions. */
  restore(snapshot: Uint8Array): void {
    if (snapshot.length !== this.data.length) {
      throw new Error("snapshot size does not match the mask");
    }
    this.data.set(snapshot);
  }

  equals(other: MaskBuffer): boolean {
    if (other.width !== this.width || other.height !== this.height) return false;
    for (let i = 0; i < this.data.length; i++) {
      if (this.data[i] !== other.data[i]) return false;
    }
    return true;
  }
}
