import { describe, expect, it } from "vitest";

import {
  AGREE_COLOR,
  FALSE_ALARM_COLOR,
  MISSED_COLOR,
  classifyOverlay,
  highlightedPercent,
  legendLine,
  sameBytes,
} from "../src/overlay.js";

function rgbaOf(pixels: ReadonlyArray<readonly [number, number, number]>): Uint8Array {
  const out = new Uint8Array(pixels.length * 4);
  pixels.forEach(([r, g, b], i) => {
    out[i * 4] = r;
    out[i * 4 + 1] = g;
    out[i * 4 + 2] = b;
    out[i * 4 + 3] = 255;
  });
  return out;
}

describe("classifyOverlay", () => {
  it("counts each highlight color and the dimmed background", () => {
    const rgba = rgbaOf([AGREE_COLOR, FALSE_ALARM_COLOR, MISSED_COLOR, [26, 60, 24]]);
    const counts = classifyOverlay(rgba, 2, 2);
    expect(counts).toEqual({ agree: 1, falseAlarm: 1, missed: 1, background: 1, total: 4 });
  });

  it("does not confuse near-miss colors with highlights", () => {
    // one channel off each: must all land in background
    const rgba = rgbaOf([
      [255, 255, 1],
      [254, 0, 0],
      [0, 201, 0],
      [0, 0, 0],
    ]);
    const counts = classifyOverlay(rgba, 4, 1);
    expect(counts.background).toBe(4);
    expect(counts.agree + counts.falseAlarm + counts.missed).toBe(0);
  });

  it("rejects a buffer whose length disagrees with the dimensions", () => {
    expect(() => classifyOverlay(new Uint8Array(12), 2, 2)).toThrow(/expected 16/);
  });
});

describe("highlightedPercent", () => {
  it("reports the highlighted fraction of all pixels", () => {
    const counts = { agree: 3, falseAlarm: 1, missed: 0, background: 12, total: 16 };
    expect(highlightedPercent(counts)).toBeCloseTo(25.0, 10);
  });

  it("is zero on an empty image", () => {
    expect(highlightedPercent({ agree: 0, falseAlarm: 0, missed: 0, background: 0, total: 0 })).toBe(0);
  });
});

describe("sameBytes", () => {
  it("accepts identical buffers and rejects any difference", () => {
    const a = new Uint8Array([1, 2, 3]);
    expect(sameBytes(a, new Uint8Array([1, 2, 3]))).toBe(true);
    expect(sameBytes(a, new Uint8Array([1, 2, 4]))).toBe(false);
    expect(sameBytes(a, new Uint8Array([1, 2]))).toBe(false);
  });
});

describe("legendLine", () => {
  it("formats one-decimal percentages per class", () => {
    const counts = { agree: 1, falseAlarm: 1, missed: 0, background: 6, total: 8 };
    expect(legendLine(counts)).toBe("agree 12.5% · false alarm 12.5% · missed 0.0%");
  });
});
