import { describe, expect, it } from "vitest";

import {
  buildCurve,
  linearScale,
  plottedPointCount,
  relativeTime,
  valueExtent,
} from "../src/curves.js";
import { SeriesPoint } from "../src/types.js";

const DT = 0.1;

function row(frame: number, sep: number, ttc: number | null, ttcLong: number | null): SeriesPoint {
  return { frame, sep, ttc, ttc_long: ttcLong };
}

describe("buildCurve", () => {
  it("splits on nulls and never plots them", () => {
    const series = [
      row(10, 5.0, 2.0, null),
      row(11, 4.5, 1.5, null),
      row(12, 4.0, null, null),
      row(13, 3.5, 1.0, 8.0),
      row(14, 3.0, 0.8, 7.0),
    ];
    const ttc = buildCurve(series, "ttc", DT, "ttc");
    expect(ttc.segments.length).toBe(2);
    expect(ttc.segments[0].map((p) => p.v)).toEqual([2.0, 1.5]);
    expect(ttc.segments[1].map((p) => p.v)).toEqual([1.0, 0.8]);
    expect(plottedPointCount(ttc)).toBe(4); // the null row contributed nothing

    const ttcLong = buildCurve(series, "ttc_long", DT, "ttc_long");
    expect(plottedPointCount(ttcLong)).toBe(2);
    for (const seg of ttcLong.segments) {
      for (const p of seg) expect(Number.isFinite(p.v)).toBe(true);
    }
  });

  it("uses relative time in seconds from the window start", () => {
    const series = [row(50, 1, 1, 1), row(51, 1, 1, 1), row(53, 1, 1, 1)];
    const curve = buildCurve(series, "sep", DT, "sep");
    expect(curve.segments[0].map((p) => p.t)).toEqual([0, DT, 3 * DT]);
    expect(relativeTime(series, 53, DT)).toBeCloseTo(0.3, 12);
  });

  it("tracks the minimum plotted point", () => {
    const series = [row(0, 3, 2.2, null), row(1, 2, 0.7, null), row(2, 4, null, null)];
    const curve = buildCurve(series, "ttc", DT, "ttc");
    expect(curve.min).not.toBeNull();
    expect(curve.min!.v).toBeCloseTo(0.7, 12);
    expect(curve.min!.t).toBeCloseTo(0.1, 12);
  });

  it("all-null series yields an empty curve with no min marker", () => {
    const series = [row(0, 1, null, null), row(1, 1, null, null)];
    const curve = buildCurve(series, "ttc_long", DT, "ttc_long");
    expect(curve.segments).toEqual([]);
    expect(curve.min).toBeNull();
    expect(valueExtent(curve)).toEqual([0, 1]);
  });
});

describe("linearScale", () => {
  it("maps the domain onto the range", () => {
    const s = linearScale([0, 10], [100, 200]);
    expect(s.apply(0)).toBe(100);
    expect(s.apply(10)).toBe(200);
    expect(s.apply(5)).toBe(150);
  });

  it("inverted ranges work for screen-y", () => {
    const s = linearScale([0, 1], [300, 20]);
    expect(s.apply(0)).toBe(300);
    expect(s.apply(1)).toBe(20);
  });
});

describe("valueExtent", () => {
  it("pads the extent and respects the cap", () => {
    const series = [row(0, 1, 2.0, null), row(1, 1, 50.0, null)];
    const curve = buildCurve(series, "ttc", DT, "ttc");
    const [lo, hi] = valueExtent(curve, 10.0);
    expect(lo).toBeLessThanOrEqual(2.0);
    expect(hi).toBeLessThanOrEqual(11.0); // capped before padding
  });
});
