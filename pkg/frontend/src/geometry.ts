/** Polyline and polygon helpers shared by capture, lasso, and overlays. */

export interface Sample {
  x: number;
  y: number;
  t: number;
  pressure: number;
}

function segmentDistance(
  px: number,
  py: number,
  ax: number,
  ay: number,
  bx: number,
  by: number,
): number {
  const dx = bx - ax;
  const dy = by - ay;
  const len2 = dx * dx + dy * dy;
  let u = len2 === 0 ? 0 : ((px - ax) * dx + (py - ay) * dy) / len2;
  u = Math.max(0, Math.min(1, u));
  return Math.hypot(px - (ax + u * dx), py - (ay + u * dy));
}

/**
 * Ramer-Douglas-Peucker decimation. Endpoints always survive; every dropped
 * sample lies within `tolerance` px of the simplified polyline.
 */
export function decimatePolyline<T extends { x: number; y: number }>(
  points: T[],
  tolerance = 0.75,
): T[] {
  if (points.length <= 2) return points.slice();
  const keep = new Uint8Array(points.length);
  keep[0] = keep[points.length - 1] = 1;
  const stack: [number, number][] = [[0, points.length - 1]];
  while (stack.length > 0) {
    const [lo, hi] = stack.pop()!;
    const a = points[lo];
    const b = points[hi];
    let worst = -1;
    let worstDist = tolerance;
    for (let i = lo + 1; i < hi; i++) {
      const d = segmentDistance(points[i].x, points[i].y, a.x, a.y, b.x, b.y);
      if (d > worstDist) {
        worstDist = d;
        worst = i;
      }
    }
    if (worst >= 0) {
      keep[worst] = 1;
      stack.push([lo, worst], [worst, hi]);
    }
  }
  return points.filter((_, i) => keep[i] === 1);
}

/** Shortest distance from a point to a polyline. */
export function distanceToPolyline(
  x: number,
  y: number,
  line: { x: number; y: number }[],
): number {
  if (line.length === 1) return Math.hypot(x - line[0].x, y - line[0].y);
  let best = Infinity;
  for (let i = 0; i + 1 < line.length; i++) {
    best = Math.min(
      best,
      segmentDistance(x, y, line[i].x, line[i].y, line[i + 1].x, line[i + 1].y),
    );
  }
  return best;
}

/** Even-odd crossing test, same arithmetic as the server's lasso resolve. */
export function pointInPolygon(
  x: number,
  y: number,
  polygon: [number, number][],
): boolean {
  let inside = false;
  const n = polygon.length;
  for (let i = 0; i < n; i++) {
    const [x1, y1] = polygon[i];
    const [x2, y2] = polygon[(i + 1) % n];
    if (
      (y1 > y) !== (y2 > y) &&
      x < ((x2 - x1) * (y - y1)) / (y2 - y1 + 1e-300) + x1
    ) {
      inside = !inside;
    }
  }
  return inside;
}

export function centroid(points: { x: number; y: number }[]): { x: number; y: number } {
  let sx = 0;
  let sy = 0;
  for (const p of points) {
    sx += p.x;
    sy += p.y;
  }
  return { x: sx / points.length, y: sy / points.length };
}
