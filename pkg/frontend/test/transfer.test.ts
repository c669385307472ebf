import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  ColorMap,
  OpacityMap,
  deletePoint,
  dragPoint,
  evalPiecewise,
  insertPoint,
  tfFromJson,
  tfToJson,
} from "../src/transfer";

const ASSETS = join(__dirname, "assets");

describe("piecewise-linear evaluation", () => {
  const tent = new OpacityMap([
    { t: 0, alpha: 0 }, { t: 0.5, alpha: 1 }, { t: 1, alpha: 0 },
  ]);

  it("interpolates linearly and hits knots exactly", () => {
    expect(tent.eval(0.5)).toBe(1);
    expect(tent.eval(0.75)).toBeCloseTo(0.5, 12);
    expect(tent.eval(0.25)).toBeCloseTo(0.5, 12);
  });

  it("clamps out-of-range queries", () => {
    expect(tent.eval(-2)).toBe(0);
    expect(tent.eval(3)).toBe(0);
  });

  it("matches a dense scan against the shared formula", () => {
    const ts = [0, 0.2, 0.7, 1];
    const vals = [0.1, 0.9, 0.3, 0.6];
    for (let k = 0; k <= 100; k++) {
      const v = k / 100;
      let expected = vals[3];
      for (let i = 0; i < 3; i++) {
        if (v <= ts[i + 1]) {
          const u = (v - ts[i]) / (ts[i + 1] - ts[i]);
          expected = vals[i] + u * (vals[i + 1] - vals[i]);
          break;
        }
      }
      expect(evalPiecewise(ts, vals, v)).toBeCloseTo(expected, 12);
    }
  });

  it("rejects maps without full-range endpoints", () => {
    expect(() => new OpacityMap([{ t: 0.1, alpha: 0 }, { t: 1, alpha: 1 }])).toThrow();
    expect(() => new OpacityMap([{ t: 0, alpha: 0 }, { t: 0, alpha: 1 }, { t: 1, alpha: 0 }])).toThrow();
  });
});

describe("interchange format", () => {
  it("round-trips the CLI-written transfer functions", () => {
    for (let k = 0; k < 5; k++) {
      const text = readFileSync(join(ASSETS, `pair${k}_tf.json`), "utf8");
      const tf = tfFromJson(text);
      const back = tfFromJson(tfToJson(tf));
      for (let i = 0; i <= 50; i++) {
        const v = i / 50;
        expect(back.opacity.eval(v)).toBeCloseTo(tf.opacity.eval(v), 12);
        const a = tf.color.eval(v);
        const b = back.color.eval(v);
        for (let c = 0; c < 3; c++) expect(b[c]).toBeCloseTo(a[c], 12);
      }
    }
  });
});

describe("editor operations", () => {
  const base = () => new OpacityMap([
    { t: 0, alpha: 0.2 }, { t: 0.4, alpha: 0.8 }, { t: 1, alpha: 0 },
  ]);

  it("dragging an interior point past its neighbor clamps at the neighbor", () => {
    const dragged = dragPoint(base(), 1, 0.99, 0.5);
    expect(dragged.points[1].t).toBeLessThan(1);
    expect(dragged.points[1].t).toBeGreaterThan(0.9);
    const draggedLow = dragPoint(base(), 1, -5, 2);
    expect(draggedLow.points[1].t).toBeGreaterThan(0);
    expect(draggedLow.points[1].alpha).toBe(1);
  });

  it("endpoints keep their t but can change alpha", () => {
    const m = dragPoint(base(), 0, 0.7, 0.9);
    expect(m.points[0].t).toBe(0);
    expect(m.points[0].alpha).toBeCloseTo(0.9, 12);
  });

  it("inserting on the curve preserves the curve value", () => {
    const m = base();
    const inserted = insertPoint(m, 0.2);
    expect(inserted.points.length).toBe(4);
    const idx = inserted.points.findIndex((p) => Math.abs(p.t - 0.2) < 1e-9);
    expect(idx).toBeGreaterThan(0);
    expect(inserted.points[idx].alpha).toBeCloseTo(m.eval(0.2), 12);
  });

  it("refuses to delete endpoints", () => {
    const m = base();
    expect(deletePoint(m, 0)).toBe(m);
    expect(deletePoint(m, m.points.length - 1)).toBe(m);
    expect(deletePoint(m, 1).points.length).toBe(2);
  });

  it("survives 10,000 fuzzed gestures with invariants intact", () => {
    // deterministic linear congruential generator
    let seed = 123456789;
    const rand = () => {
      seed = (1103515245 * seed + 12345) % 2147483648;
      return seed / 2147483648;
    };
    let map = base();
    for (let step = 0; step < 10000; step++) {
      const op = rand();
      if (op < 0.5) {
        const i = Math.floor(rand() * map.points.length);
        map = dragPoint(map, i, rand() * 2 - 0.5, rand() * 2 - 0.5);
      } else if (op < 0.8) {
        map = insertPoint(map, rand());
      } else {
        map = deletePoint(map, Math.floor(rand() * map.points.length));
      }
      // invariants: endpoints, strict ordering, alpha range
      const pts = map.points;
      expect(pts[0].t).toBe(0);
      expect(pts[pts.length - 1].t).toBe(1);
      for (let i = 1; i < pts.length; i++) {
        expect(pts[i].t).toBeGreaterThan(pts[i - 1].t);
      }
      for (const p of pts) {
        expect(p.alpha).toBeGreaterThanOrEqual(0);
        expect(p.alpha).toBeLessThanOrEqual(1);
      }
      map.validate();
    }
  });
});
