/**
 * Piecewise-linear transfer functions and the opacity-map editor logic.
 *
 * Control points are (t, value) pairs on [0, 1] with required endpoints at
 * t = 0 and t = 1 and strictly increasing t; evaluation clamps the query
 * and interpolates linearly.  Editor operations preserve those invariants
 * under every gesture: drags clamp between neighbors, endpoints cannot be
 * deleted and keep their t fixed.
 */

export type OpacityPoint = { t: number; alpha: number };
export type ColorPoint = { t: number; rgb: [number, number, number] };

const T_EPS = 1e-4;

export function evalPiecewise(ts: number[], vals: number[], v: number): number {
  const x = Math.min(1, Math.max(0, v));
  if (x <= ts[0]) return vals[0];
  if (x >= ts[ts.length - 1]) return vals[vals.length - 1];
  let lo = 0;
  let hi = ts.length - 1;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if (ts[mid] <= x) lo = mid;
    else hi = mid;
  }
  const u = (x - ts[lo]) / (ts[lo + 1] - ts[lo]);
  return vals[lo] + u * (vals[lo + 1] - vals[lo]);
}

export class OpacityMap {
  points: OpacityPoint[];

  constructor(points: OpacityPoint[]) {
    if (points.length < 2) throw new Error("opacity map needs >= 2 points");
    this.points = points.map((p) => ({ t: p.t, alpha: p.alpha }));
    this.validate();
  }

  validate(): void {
    const pts = this.points;
    if (Math.abs(pts[0].t) > 1e-9 || Math.abs(pts[pts.length - 1].t - 1) > 1e-9) {
      throw new Error("opacity map must span t=0..1");
    }
    for (let i = 1; i < pts.length; i++) {
      if (pts[i].t <= pts[i - 1].t) throw new Error("opacity t must be strictly increasing");
    }
    for (const p of pts) {
      if (p.alpha < 0 || p.alpha > 1) throw new Error("alpha out of [0,1]");
    }
  }

  eval(v: number): number {
    return evalPiecewise(this.points.map((p) => p.t), this.points.map((p) => p.alpha), v);
  }

  clone(): OpacityMap {
    return new OpacityMap(this.points);
  }
}

export class ColorMap {
  readonly ts: number[];
  readonly rgb: number[][];

  constructor(table: number[][], readonly name = "") {
    // rows are [t, r, g, b]
    this.ts = table.map((row) => row[0]);
    this.rgb = table.map((row) => [row[1], row[2], row[3]]);
  }

  eval(v: number): [number, number, number] {
    return [
      evalPiecewise(this.ts, this.rgb.map((c) => c[0]), v),
      evalPiecewise(this.ts, this.rgb.map((c) => c[1]), v),
      evalPiecewise(this.ts, this.rgb.map((c) => c[2]), v),
    ];
  }
}

export interface TransferFunction {
  color: ColorMap;
  opacity: OpacityMap;
}

/** Shared interchange format: {color: [[t,r,g,b]...], opacity: [[t,a]...]}. */
export function tfToJson(tf: TransferFunction): string {
  const color = tf.color.ts.map((t, i) => [t, ...tf.color.rgb[i]]);
  const opacity = tf.opacity.points.map((p) => [p.t, p.alpha]);
  return JSON.stringify({ color, opacity });
}

export function tfFromJson(text: string): TransferFunction {
  const data = JSON.parse(text) as { color: number[][]; opacity: number[][] };
  return {
    color: new ColorMap(data.color),
    opacity: new OpacityMap(data.opacity.map(([t, alpha]) => ({ t, alpha }))),
  };
}

// ---------------------------------------------------------------- editor ops

/** Drag point i to (t, alpha); t clamps between neighbors, endpoints stay put. */
export function dragPoint(map: OpacityMap, i: number, t: number, alpha: number): OpacityMap {
  const out = map.clone();
  const pts = out.points;
  if (i < 0 || i >= pts.length) return map;
  let clampedT: number;
  if (i === 0) clampedT = 0;
  else if (i === pts.length - 1) clampedT = 1;
  else {
    clampedT = Math.min(Math.max(t, pts[i - 1].t + T_EPS), pts[i + 1].t - T_EPS);
  }
  pts[i] = { t: clampedT, alpha: Math.min(1, Math.max(0, alpha)) };
  out.validate();
  return out;
}

/** Insert a point on the curve at t (ignored too close to an existing knot). */
export function insertPoint(map: OpacityMap, t: number): OpacityMap {
  if (t <= T_EPS || t >= 1 - T_EPS) return map;
  const out = map.clone();
  const pts = out.points;
  for (const p of pts) {
    if (Math.abs(p.t - t) < 2 * T_EPS) return map;
  }
  const alpha = map.eval(t);
  let at = pts.length - 1;
  for (let i = 1; i < pts.length; i++) {
    if (pts[i].t > t) {
      at = i;
      break;
    }
  }
  pts.splice(at, 0, { t, alpha });
  out.validate();
  return out;
}

/** Delete an interior point; endpoint deletion is refused. */
export function deletePoint(map: OpacityMap, i: number): OpacityMap {
  if (i <= 0 || i >= map.points.length - 1) return map;
  const out = map.clone();
  out.points.splice(i, 1);
  out.validate();
  return out;
}
