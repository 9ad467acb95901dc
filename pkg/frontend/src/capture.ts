/**
 * Pointer-to-stroke capture.
 *
 * Samples are buffered at whatever rate the device delivers them (with
 * pressure where available) and decimated once, on pointer-up, so the wire
 * stroke is compact but endpoints and direction changes survive. The class
 * is DOM-free: the app layer converts PointerEvents to samples.
 */

import { decimatePolyline, Sample } from "./geometry.js";
import type { StrokePayload } from "./protocol.js";

export const DECIMATION_TOLERANCE_PX = 0.75;

export interface BrushSettings {
  width: number;
  color: [number, number, number, number];
}

export class StrokeCapture {
  private samples: Sample[] = [];
  private active = false;

  get isActive(): boolean {
    return this.active;
  }

  /** The raw samples so far, for live ink preview while drawing. */
  get preview(): readonly Sample[] {
    return this.samples;
  }

  begin(sample: Sample): void {
    this.samples = [sample];
    this.active = true;
  }

  extend(sample: Sample): void {
    if (!this.active) return;
    this.samples.push(sample);
  }

  /** Decimate and emit the wire payload; a tap yields a 1-point stroke. */
  finish(brush: BrushSettings): StrokePayload | null {
    if (!this.active || this.samples.length === 0) {
      this.cancel();
      return null;
    }
    const kept = decimatePolyline(this.samples, DECIMATION_TOLERANCE_PX);
    this.cancel();
    return {
      points: kept.map((s) => [s.x, s.y, s.t, s.pressure]),
      width: brush.width,
      color: brush.color,
    };
  }

  cancel(): void {
    this.samples = [];
    this.active = false;
  }
}
