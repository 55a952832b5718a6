// Screen-stroke unprojection: each 2D sample snaps to the nearest visible
// cloud point under its cursor, so sketches land on the scanned surface
// without any camera state on the server.

import type { Vec3 } from "./types.js";

export interface Camera {
  position: Vec3;
  target: Vec3;
  up: Vec3;
  fovDeg: number;       // vertical field of view
  width: number;        // viewport pixels
  height: number;
}

export interface ScreenSample {
  x: number;
  y: number;
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function normalize(a: Vec3): Vec3 {
  const n = Math.hypot(a[0], a[1], a[2]);
  return [a[0] / n, a[1] / n, a[2] / n];
}

/** Camera basis: view direction, right, and orthonormal up. */
export function cameraBasis(cam: Camera) {
  const forward = normalize(sub(cam.target, cam.position));
  const right = normalize(cross(forward, cam.up));
  const up = cross(right, forward);
  return { forward, right, up };
}

/**
 * Perspective-project a point; returns pixel coordinates plus view depth.
 * Points behind the camera report depth <= 0 and must be treated as hidden.
 */
export function projectPoint(cam: Camera, p: Vec3): { x: number; y: number; depth: number } {
  const { forward, right, up } = cameraBasis(cam);
  const rel = sub(p, cam.position);
  const depth = dot(rel, forward);
  if (depth <= 1e-12) {
    return { x: NaN, y: NaN, depth };
  }
  const halfH = Math.tan((cam.fovDeg * Math.PI) / 360);
  const halfW = halfH * (cam.width / cam.height);
  const xn = dot(rel, right) / (depth * halfW);
  const yn = dot(rel, up) / (depth * halfH);
  return {
    x: (xn * 0.5 + 0.5) * cam.width,
    y: (0.5 - yn * 0.5) * cam.height,
    depth,
  };
}

export interface UnprojectOptions {
  tolerancePx?: number;       // screen-space snap radius (default 8)
  duplicateEps?: number;      // collapse resolved points closer than this
}

/**
 * Resolve a screen stroke to a 3D polyline over the visible cloud.
 *
 * Each sample snaps to the frontmost cloud point within the pixel tolerance;
 * samples over empty background are dropped, and consecutive duplicates
 * collapse.  Returns the polyline (possibly empty when nothing resolves).
 */
export function unprojectStroke(
  samples: ScreenSample[],
  cam: Camera,
  cloud: Vec3[],
  options: UnprojectOptions = {},
): Vec3[] {
  const tol = options.tolerancePx ?? 8;
  const eps = options.duplicateEps ?? 1e-9;
  const projected = cloud.map((p) => projectPoint(cam, p));
  const out: Vec3[] = [];
  for (const s of samples) {
    let bestIdx = -1;
    let bestDepth = Infinity;
    for (let i = 0; i < cloud.length; i++) {
      const pr = projected[i];
      if (!(pr.depth > 0)) continue;
      const dx = pr.x - s.x;
      const dy = pr.y - s.y;
      if (dx * dx + dy * dy > tol * tol) continue;
      if (pr.depth < bestDepth) {
        bestDepth = pr.depth;
        bestIdx = i;
      }
    }
    if (bestIdx < 0) continue;
    const p = cloud[bestIdx];
    const last = out[out.length - 1];
    if (last && Math.hypot(p[0] - last[0], p[1] - last[1], p[2] - last[2]) <= eps) {
      continue;
    }
    out.push([p[0], p[1], p[2]]);
  }
  return out;
}
