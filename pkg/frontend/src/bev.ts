/** BEV box geometry and the world-to-screen transform.
 *
 * Boxes are drawn at exactly the pose/dims/yaw served by the API; the only
 * client-side math is the rigid corner expansion and a fit-to-window scale
 * (uniform, y flipped for screen coordinates).
 */

import { TrackletWindow, WindowPoint } from "./types.js";

export type Corner = [number, number];

/** Four corners, counterclockwise from front-left, in world meters. */
export function boxCorners(x: number, y: number, yaw: number, dx: number, dy: number): Corner[] {
  const c = Math.cos(yaw);
  const s = Math.sin(yaw);
  const hx = dx / 2;
  const hy = dy / 2;
  const local: Corner[] = [
    [hx, hy],
    [-hx, hy],
    [-hx, -hy],
    [hx, -hy],
  ];
  return local.map(([ex, ey]) => [x + ex * c - ey * s, y + ex * s + ey * c]);
}

export interface Bounds {
  minX: number;
  maxX: number;
  minY: number;
  maxY: number;
}

/** World-extent of every box corner over all frames of all windows. */
export function windowBounds(windows: TrackletWindow[]): Bounds {
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const w of windows) {
    for (const p of w.points) {
      for (const [cx, cy] of boxCorners(p.x, p.y, p.yaw, p.dx, p.dy)) {
        if (cx < minX) minX = cx;
        if (cx > maxX) maxX = cx;
        if (cy < minY) minY = cy;
        if (cy > maxY) maxY = cy;
      }
    }
  }
  if (minX === Infinity) return { minX: 0, maxX: 1, minY: 0, maxY: 1 };
  return { minX, maxX, minY, maxY };
}

export interface WorldTransform {
  scale: number; // pixels per meter
  toScreen(x: number, y: number): Corner;
}

/** Uniform fit-to-window transform with a pixel margin; world +y goes up. */
export function fitTransform(
  bounds: Bounds,
  width: number,
  height: number,
  margin = 24,
): WorldTransform {
  const spanX = Math.max(bounds.maxX - bounds.minX, 1e-6);
  const spanY = Math.max(bounds.maxY - bounds.minY, 1e-6);
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  const cx = (bounds.minX + bounds.maxX) / 2;
  const cy = (bounds.minY + bounds.maxY) / 2;
  return {
    scale,
    toScreen(x: number, y: number): Corner {
      return [width / 2 + (x - cx) * scale, height / 2 - (y - cy) * scale];
    },
  };
}

/** The window point rendered at a given frame, if the track covers it. */
export function pointAtFrame(window: TrackletWindow, frame: number): WindowPoint | null {
  for (const p of window.points) {
    if (p.frame === frame) return p;
  }
  return null;
}

/** Union of frame ids across windows, sorted (the playback timeline). */
export function timelineFrames(windows: TrackletWindow[]): number[] {
  const all = new Set<number>();
  for (const w of windows) {
    for (const p of w.points) all.add(p.frame);
  }
  return [...all].sort((a, b) => a - b);
}
