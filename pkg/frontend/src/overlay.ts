/**
 * Pixel-level helpers for comparison overlays.
 *
 * The server paints overlay PNGs with exact colors: agreement (detected in
 * both masks) yellow, false alarms red, misses green, everything else a
 * dimmed copy of the base image (dimming halves channel values, so it can
 * never collide with the three saturated highlight colors).
 */

export const AGREE_COLOR: readonly [number, number, number] = [255, 255, 0];
export const FALSE_ALARM_COLOR: readonly [number, number, number] = [255, 0, 0];
export const MISSED_COLOR: readonly [number, number, number] = [0, 200, 0];

export interface OverlayCounts {
  agree: number;
  falseAlarm: number;
  missed: number;
  background: number;
  total: number;
}

function matches(
  rgba: Uint8Array | Uint8ClampedArray,
  offset: number,
  color: readonly [number, number, number],
): boolean {
  return (
    rgba[offset] === color[0] &&
    rgba[offset + 1] === color[1] &&
    rgba[offset + 2] === color[2]
  );
}

/** Classify every pixel of an RGBA buffer (canvas ImageData / pngjs layout). */
export function classifyOverlay(
  rgba: Uint8Array | Uint8ClampedArray,
  width: number,
  height: number,
): OverlayCounts {
  const expected = width * height * 4;
  if (rgba.length !== expected) {
    throw new Error(`rgba buffer holds ${rgba.length} bytes, expected ${expected} for ${width}x${height}`);
  }
  const counts: OverlayCounts = {
    agree: 0,
    falseAlarm: 0,
    missed: 0,
    background: 0,
    total: width * height,
  };
  for (let offset = 0; offset < expected; offset += 4) {
    if (matches(rgba, offset, AGREE_COLOR)) counts.agree += 1;
    else if (matches(rgba, offset, FALSE_ALARM_COLOR)) counts.falseAlarm += 1;
    else if (matches(rgba, offset, MISSED_COLOR)) counts.missed += 1;
    else counts.background += 1;
  }
  return counts;
}

export function highlightedPercent(counts: OverlayCounts): number {
  if (counts.total === 0) return 0;
  return (100 * (counts.agree + counts.falseAlarm + counts.missed)) / counts.total;
}

export function sameBytes(a: Uint8Array, b: Uint8Array): boolean {
  if (a.length !== b.length) return false;
  for (let i = 0; i < a.length; i += 1) {
    if (a[i] !== b[i]) return false;
  }
  return true;
}

function pct(n: number, total: number): string {
  return total === 0 ? "0.0" : ((100 * n) / total).toFixed(1);
}

/** One-line legend for the overlay viewer. */
export function legendLine(counts: OverlayCounts): string {
  return (
    `agree ${pct(counts.agree, counts.total)}% · ` +
    `false alarm ${pct(counts.falseAlarm, counts.total)}% · ` +
    `missed ${pct(counts.missed, counts.total)}%`
  );
}
