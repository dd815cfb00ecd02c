/**
 * Timeline segment model: draggable in/out points on a video timeline.
 *
 * Granularity is 0.1 s (the corpus' one-decimal convention) with keyboard
 * nudging. Handles clamp to [0, duration] and can never cross.
 */

export const GRANULARITY = 0.1;

/** Snap a time to the 0.1 s grid (stable against float noise). */
export function quantize(t: number): number {
  return Math.round(t * 10) / 10;
}

export class TimelineSpan {
  private inPoint: number;
  private outPoint: number;

  constructor(
    readonly duration: number,
    inPoint = 0,
    outPoint = duration
  ) {
    if (!(duration > 0)) {
      throw new Error(`duration must be positive, got ${duration}`);
    }
    this.inPoint = 0;
    this.outPoint = quantize(duration);
    this.setIn(inPoint);
    this.setOut(outPoint);
  }

  get inTime(): number {
    return this.inPoint;
  }

  get outTime(): number {
    return this.outPoint;
  }

  /** Move the in point; clamped to [0, out - granularity]. */
  setIn(t: number): void {
    const snapped = quantize(t);
    this.inPoint = Math.min(Math.max(0, snapped), quantize(this.outPoint - GRANULARITY));
  }

  /** Move the out point; clamped to [in + granularity, duration]. */
  setOut(t: number): void {
    const snapped = quantize(t);
    this.outPoint = Math.max(
      Math.min(quantize(this.duration), snapped),
      quantize(this.inPoint + GRANULARITY)
    );
  }

  /** Keyboard nudge by whole grid steps (negative = left). */
  nudgeIn(steps: number): void {
    this.setIn(quantize(this.inPoint + steps * GRANULARITY));
  }

  nudgeOut(steps: number): void {
    this.setOut(quantize(this.outPoint + steps * GRANULARITY));
  }

  /** Wire form, one-decimal endpoints. */
  toSpan(): [number, number] {
    return [this.inPoint, this.outPoint];
  }

  /** Rehydrate a submitted span; re-opened handles match within 0.1 s. */
  static fromSpan(duration: number, span: [number, number]): TimelineSpan {
    return new TimelineSpan(duration, span[0], span[1]);
  }
}
