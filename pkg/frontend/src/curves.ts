/** Metric-curve geometry, kept free of DOM so it is directly testable.
 *
 * Null samples (the "not closing" case) become gaps: a curve is a list of
 * contiguous segments and a null is never turned into a plotted point.
 * The x axis is relative time in seconds from the start of the evidence
 * window.
 */

import { SeriesPoint } from "./types.js";

export interface CurvePoint {
  t: number; // relative seconds
  v: number;
}

export type Segment = CurvePoint[];

export interface Curve {
  label: string;
  segments: Segment[];
  /** Smallest plotted value and its time, if anything was plotted. */
  min: CurvePoint | null;
}

export type MetricKey = "sep" | "ttc" | "ttc_long";

/** Split one metric of the series into gap-separated segments. */
export function buildCurve(
  series: SeriesPoint[],
  key: MetricKey,
  dt: number,
  label: string,
): Curve {
  const t0 = series.length ? series[0].frame : 0;
  const segments: Segment[] = [];
  let current: Segment = [];
  let min: CurvePoint | null = null;
  for (const row of series) {
    const raw = row[key];
    if (raw === null || raw === undefined || !isFinite(raw)) {
      if (current.length) segments.push(current);
      current = [];
      continue;
    }
    const point = { t: (row.frame - t0) * dt, v: raw };
    current.push(point);
    if (min === null || point.v < min.v) min = point;
  }
  if (current.length) segments.push(current);
  return { label, segments, min };
}

/** Relative time of a frame id on the curve axis. */
export function relativeTime(series: SeriesPoint[], frame: number, dt: number): number {
  const t0 = series.length ? series[0].frame : 0;
  return (frame - t0) * dt;
}

export interface LinearScale {
  domain: [number, number];
  range: [number, number];
  apply(v: number): number;
}

export function linearScale(domain: [number, number], range: [number, number]): LinearScale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  return {
    domain,
    range,
    apply: (v: number) => r0 + ((v - d0) / span) * (r1 - r0),
  };
}

/** Value extent over every plotted point, padded; empty curves get [0, 1]. */
export function valueExtent(curve: Curve, cap?: number): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const seg of curve.segments) {
    for (const p of seg) {
      const v = cap !== undefined ? Math.min(p.v, cap) : p.v;
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (lo === Infinity) return [0, 1];
  if (lo === hi) {
    const pad = Math.abs(lo) * 0.1 || 0.5;
    return [lo - pad, hi + pad];
  }
  const pad = (hi - lo) * 0.08;
  return [lo - pad, hi + pad];
}

/** Total number of plotted points (used to assert the no-null invariant). */
export function plottedPointCount(curve: Curve): number {
  return curve.segments.reduce((n, seg) => n + seg.length, 0);
}
