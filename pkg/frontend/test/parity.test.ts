import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { cameraBasis, Vec3 } from "../src/camera";
import { renderFrame } from "../src/cpu_renderer";
import { decodeModel, GaussianModel } from "../src/model";
import { ColorMap, dragPoint, insertPoint, OpacityMap, tfFromJson } from "../src/transfer";
import { decodePng } from "./png";

const ASSETS = join(__dirname, "assets");
const PARITY_TOL = 2 / 255;

function loadModel(name = "model.vegs"): GaussianModel {
  const buf = readFileSync(join(ASSETS, name));
  return decodeModel(buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength));
}

interface PairMeta {
  tf: string;
  image: string;
  azimuth_deg: number;
  elevation_deg: number;
  radius: number;
  fov_deg: number;
  res: number;
  background: [number, number, number];
}

function renderPair(model: GaussianModel, meta: PairMeta, tfFile: string) {
  const tf = tfFromJson(readFileSync(join(ASSETS, tfFile), "utf8"));
  const lo = model.bboxMin;
  const hi = model.bboxMax;
  const center: Vec3 = [(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2];
  const az = (meta.azimuth_deg * Math.PI) / 180;
  const el = (meta.elevation_deg * Math.PI) / 180;
  const fov = (meta.fov_deg * Math.PI) / 180;
  const ce = Math.cos(el);
  const position: Vec3 = [
    center[0] + meta.radius * ce * Math.cos(az),
    center[1] + meta.radius * Math.sin(el),
    center[2] + meta.radius * ce * Math.sin(az),
  ];
  const cam = cameraBasis(position, center, fov, meta.res, meta.res);
  const diag = Math.hypot(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]);
  const near = Math.max(1e-4 * diag, meta.radius - diag);
  return renderFrame(model, tf, cam, meta.res, meta.res, fov, meta.background, near);
}

function golden01(x: Float32Array): Float32Array {
  return x.map((v) => Math.min(1, Math.max(0, v))) as Float32Array;
}

function meanAbsDiff(a: Float32Array, bPng: Float32Array): number {
  let acc = 0;
  for (let i = 0; i < a.length; i++) {
    acc += Math.abs(Math.min(1, Math.max(0, a[i])) - bPng[i]);
  }
  return acc / a.length;
}

describe("viewer parity against CLI renders", () => {
  const pairs: PairMeta[] = JSON.parse(readFileSync(join(ASSETS, "pairs.json"), "utf8"));
  const model = loadModel();

  for (const [k, meta] of pairs.entries()) {
    it(`pair ${k} (${meta.tf}) stays within 2/255 mean abs`, () => {
      const frame = renderPair(model, meta, meta.tf);
      const golden = decodePng(readFileSync(join(ASSETS, meta.image)));
      expect(golden.width).toBe(meta.res);
      const diff = meanAbsDiff(frame.rgb, golden.rgb);
      expect(diff).toBeLessThan(PARITY_TOL);
    });
  }

  it("colormap swap changes colors but not the alpha silhouette", () => {
    const meta = pairs[0];
    const tfA = tfFromJson(readFileSync(join(ASSETS, pairs[0].tf), "utf8"));
    const tfGray = { color: new ColorMap([[0, 0, 0, 0], [1, 1, 1, 1]]), opacity: tfA.opacity };
    const lo = model.bboxMin;
    const hi = model.bboxMax;
    const center: Vec3 = [(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2];
    const fov = (meta.fov_deg * Math.PI) / 180;
    const cam = cameraBasis([center[0], center[1], center[2] + meta.radius], center,
                            fov, meta.res, meta.res);
    const a = renderFrame(model, tfA, cam, meta.res, meta.res, fov, [1, 1, 1]);
    const b = renderFrame(model, tfGray, cam, meta.res, meta.res, fov, [1, 1, 1]);
    let worst = 0;
    for (let i = 0; i < a.alpha.length; i++) worst = Math.max(worst, Math.abs(a.alpha[i] - b.alpha[i]));
    expect(worst).toBeLessThanOrEqual(1 / 255);
    expect(meanAbsDiff(a.rgb, b.rgb)).toBeGreaterThan(0);
  });

  it("frames are independent of splat order in the file", () => {
    const meta = pairs[0];
    const shuffled = loadModel();
    // deterministic Fisher-Yates on all per-splat arrays
    let seed = 42;
    const rand = () => {
      seed = (1103515245 * seed + 12345) % 2147483648;
      return seed / 2147483648;
    };
    const n = shuffled.count;
    for (let i = n - 1; i > 0; i--) {
      const j = Math.floor(rand() * (i + 1));
      for (const [arr, w] of [
        [shuffled.position, 3], [shuffled.logScale, 3], [shuffled.rotation, 4],
        [shuffled.rawValue, 1], [shuffled.rawWeight, 1], [shuffled.normal, 3],
        [shuffled.rawKa, 1], [shuffled.rawKd, 1], [shuffled.rawKs, 1], [shuffled.rawBeta, 1],
      ] as [Float32Array, number][]) {
        for (let c = 0; c < w; c++) {
          const tmp = arr[w * i + c];
          arr[w * i + c] = arr[w * j + c];
          arr[w * j + c] = tmp;
        }
      }
    }
    const a = renderPair(loadModel(), meta, meta.tf);
    const b = renderPair(shuffled, meta, meta.tf);
    // grid-initialized splats contain exact depth ties, whose blend order is
    // permutation-dependent at floating-point level; visually identical
    let worst = 0;
    for (let i = 0; i < a.rgb.length; i++) worst = Math.max(worst, Math.abs(a.rgb[i] - b.rgb[i]));
    expect(worst).toBeLessThan(1e-3);
    expect(meanAbsDiff(a.rgb, golden01(b.rgb))).toBeLessThan(1e-5);
  });

  it("the VQ bundle renders like its decompressed twin", () => {
    const meta = pairs[1];
    const a = renderPair(loadModel("model.vq.vegs"), meta, meta.tf);
    const b = renderPair(loadModel("model.vq.decoded.vegs"), meta, meta.tf);
    let worst = 0;
    for (let i = 0; i < a.rgb.length; i++) worst = Math.max(worst, Math.abs(a.rgb[i] - b.rgb[i]));
    expect(worst).toBeLessThan(1e-6);
  });
});

describe("editor round trip through the interchange format", () => {
  it("the scripted authored TF matches the committed asset and the CLI frame", () => {
    // the same gesture sequence that produced assets/authored_tf.json
    let map = new OpacityMap([{ t: 0, alpha: 0 }, { t: 1, alpha: 1 }]);
    map = dragPoint(map, 0, 0, 0.1);
    map = dragPoint(map, 1, 1, 0.0);
    map = insertPoint(map, 0.25);
    map = dragPoint(map, 1, 0.25, 0.85);
    map = insertPoint(map, 0.6);
    map = dragPoint(map, 2, 0.6, 0.2);

    const committed = tfFromJson(readFileSync(join(ASSETS, "authored_tf.json"), "utf8"));
    expect(map.points.length).toBe(committed.opacity.points.length);
    for (let i = 0; i < map.points.length; i++) {
      expect(map.points[i].t).toBeCloseTo(committed.opacity.points[i].t, 9);
      expect(map.points[i].alpha).toBeCloseTo(committed.opacity.points[i].alpha, 9);
    }

    const model = loadModel();
    const meta: PairMeta = {
      tf: "authored_tf.json", image: "authored_cli.png",
      azimuth_deg: 45, elevation_deg: 20, radius: 4.5, fov_deg: 50, res: 128,
      background: [1, 1, 1],
    };
    const frame = renderPair(model, meta, meta.tf);
    const golden = decodePng(readFileSync(join(ASSETS, meta.image)));
    expect(meanAbsDiff(frame.rgb, golden.rgb)).toBeLessThan(PARITY_TOL);
  });
});
