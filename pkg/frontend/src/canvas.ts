// Pointer math for the drawing surface. The server works in 0..255 canvas
// units; outbound coordinates are clamped there no matter how the canvas
// element is scaled on screen.

import type { Point } from "./protocol.js";

export const CANVAS_UNITS = 255;

export interface DisplayRect {
  left: number;
  top: number;
  width: number;
  height: number;
}

function clamp(v: number): number {
  return Math.min(CANVAS_UNITS, Math.max(0, v));
}

export function toCanvasPoint(clientX: number, clientY: number, rect: DisplayRect): Point {
  const x = ((clientX - rect.left) / rect.width) * CANVAS_UNITS;
  const y = ((clientY - rect.top) / rect.height) * CANVAS_UNITS;
  return [clamp(x), clamp(y)];
}

// Accumulates one stroke between pointer-down and pointer-up. Points are
// sampled at whatever rate the display delivers events; the server does the
// simplification.
export class StrokeRecorder {
  private points: Point[] | null = null;

  get active(): boolean {
    return this.points !== null;
  }

  begin(p: Point): void {
    this.points = [p];
  }

  extend(p: Point): void {
    if (this.points) {
      this.points.push(p);
    }
  }

  /** Finish the stroke; returns its points (always >= 1) or null if idle. */
  end(): Point[] | null {
    const pts = this.points;
    this.points = null;
    return pts;
  }

  current(): Point[] {
    return this.points ?? [];
  }
}
