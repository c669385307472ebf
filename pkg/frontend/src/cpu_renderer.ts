/**
 * CPU reference renderer: the same math as the training-side rasterizer
 * (per-splat TF shading with a camera headlight, EWA projection with the
 * 1.3 frustum clamp and +0.3 dilation, depth-sorted front-to-back blending
 * with the 0.99 alpha clamp, 1/255 skip and 1e-4 termination), used for
 * golden-image parity tests and as the non-interactive fallback path.
 */

import { CameraBasis } from "./camera";
import { GaussianModel } from "./model";
import { TransferFunction } from "./transfer";

export const ALPHA_CLAMP = 0.99;
export const ALPHA_SKIP = 1 / 255;
export const TRANS_STOP = 1e-4;
export const DILATION = 0.3;
export const FRUSTUM_LIMIT = 1.3;
export const RECT_MARGIN_PX = 0.5;
export const BETA_MIN = 1.0;
export const BETA_MAX = 128.0;

function sigmoid(x: number): number {
  return 1 / (1 + Math.exp(-x));
}

export interface ShadedSplat {
  index: number;
  color: [number, number, number];
  alphaBase: number;
}

export function shadeSplats(model: GaussianModel, tf: TransferFunction,
                            cameraPos: [number, number, number]): ShadedSplat[] {
  const out: ShadedSplat[] = [];
  for (let i = 0; i < model.count; i++) {
    const v = sigmoid(model.rawValue[i]);
    const w = sigmoid(model.rawWeight[i]);
    const alphaBase = tf.opacity.eval(v) * w;
    if (alphaBase < ALPHA_SKIP) continue; // low-opacity cull
    const [cr, cg, cb] = tf.color.eval(v);

    const lx0 = cameraPos[0] - model.position[3 * i];
    const ly0 = cameraPos[1] - model.position[3 * i + 1];
    const lz0 = cameraPos[2] - model.position[3 * i + 2];
    const ln = Math.hypot(lx0, ly0, lz0);
    const lx = lx0 / ln, ly = ly0 / ln, lz = lz0 / ln;

    const nx0 = model.normal[3 * i], ny0 = model.normal[3 * i + 1], nz0 = model.normal[3 * i + 2];
    const nn = Math.max(Math.hypot(nx0, ny0, nz0), 1e-30);
    const s = Math.abs((nx0 * lx + ny0 * ly + nz0 * lz) / nn);

    const ka = sigmoid(model.rawKa[i]);
    const kd = sigmoid(model.rawKd[i]);
    const ks = sigmoid(model.rawKs[i]);
    const beta = Math.min(BETA_MAX, Math.max(BETA_MIN, Math.exp(model.rawBeta[i])));
    const diff = ka + kd * s;
    const spec = s > 0 ? ks * Math.pow(s, beta) : 0;
    out.push({
      index: i,
      color: [diff * cr + spec, diff * cg + spec, diff * cb + spec],
      alphaBase,
    });
  }
  return out;
}

export interface ProjectedSplat extends ShadedSplat {
  meanX: number;
  meanY: number;
  depth: number;
  conicA: number;
  conicB: number;
  conicC: number;
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

export function projectSplats(model: GaussianModel, shaded: ShadedSplat[], cam: CameraBasis,
                              width: number, height: number, fovY: number,
                              near = 1e-4): ProjectedSplat[] {
  const f = cam.focalPx;
  const tanY = Math.tan(0.5 * fovY);
  const tanX = tanY * (width / height);
  const limX = FRUSTUM_LIMIT * tanX;
  const limY = FRUSTUM_LIMIT * tanY;
  const out: ProjectedSplat[] = [];
  for (const sp of shaded) {
    const i = sp.index;
    const px = model.position[3 * i] - cam.position[0];
    const py = model.position[3 * i + 1] - cam.position[1];
    const pz = model.position[3 * i + 2] - cam.position[2];
    const tx = cam.right[0] * px + cam.right[1] * py + cam.right[2] * pz;
    const tyv = cam.up[0] * px + cam.up[1] * py + cam.up[2] * pz;
    const tz = cam.forward[0] * px + cam.forward[1] * py + cam.forward[2] * pz;
    if (tz <= near) continue;

    const txz = tx / tz;
    const tyz = tyv / tz;
    const txc = Math.min(limX, Math.max(-limX, txz)) * tz;
    const tyc = Math.min(limY, Math.max(-limY, tyz)) * tz;

    const meanX = 0.5 * width + f * txz;
    const meanY = 0.5 * height - f * tyz;

    // Sigma_3D = R diag(exp(logScale)^2) R^T from the normalized quaternion
    let qw = model.rotation[4 * i], qx = model.rotation[4 * i + 1];
    let qy = model.rotation[4 * i + 2], qz = model.rotation[4 * i + 3];
    const qn = Math.hypot(qw, qx, qy, qz);
    qw /= qn; qx /= qn; qy /= qn; qz /= qn;
    const r00 = 1 - 2 * (qy * qy + qz * qz), r01 = 2 * (qx * qy - qw * qz), r02 = 2 * (qx * qz + qw * qy);
    const r10 = 2 * (qx * qy + qw * qz), r11 = 1 - 2 * (qx * qx + qz * qz), r12 = 2 * (qy * qz - qw * qx);
    const r20 = 2 * (qx * qz - qw * qy), r21 = 2 * (qy * qz + qw * qx), r22 = 1 - 2 * (qx * qx + qy * qy);
    const s0 = Math.exp(model.logScale[3 * i]) ** 2;
    const s1 = Math.exp(model.logScale[3 * i + 1]) ** 2;
    const s2 = Math.exp(model.logScale[3 * i + 2]) ** 2;
    // Sigma = sum_k s_k r_k r_k^T with r_k the k-th rotation column
    const sxx = s0 * r00 * r00 + s1 * r01 * r01 + s2 * r02 * r02;
    const sxy = s0 * r00 * r10 + s1 * r01 * r11 + s2 * r02 * r12;
    const sxz = s0 * r00 * r20 + s1 * r01 * r21 + s2 * r02 * r22;
    const syy = s0 * r10 * r10 + s1 * r11 * r11 + s2 * r12 * r12;
    const syz = s0 * r10 * r20 + s1 * r11 * r21 + s2 * r12 * r22;
    const szz = s0 * r20 * r20 + s1 * r21 * r21 + s2 * r22 * r22;

    // M = J W, J at the clamped view position, y flipped for pixel rows
    const invZ = 1 / tz;
    const invZ2 = invZ * invZ;
    const j00 = f * invZ, j02 = -f * txc * invZ2;
    const j11 = -f * invZ, j12 = f * tyc * invZ2;
    const rt = cam.right, up = cam.up, fw = cam.forward;
    const m0x = j00 * rt[0] + j02 * fw[0], m0y = j00 * rt[1] + j02 * fw[1], m0z = j00 * rt[2] + j02 * fw[2];
    const m1x = j11 * up[0] + j12 * fw[0], m1y = j11 * up[1] + j12 * fw[1], m1z = j11 * up[2] + j12 * fw[2];

    const v0x = sxx * m0x + sxy * m0y + sxz * m0z;
    const v0y = sxy * m0x + syy * m0y + syz * m0z;
    const v0z = sxz * m0x + syz * m0y + szz * m0z;
    const v1x = sxx * m1x + sxy * m1y + sxz * m1z;
    const v1y = sxy * m1x + syy * m1y + syz * m1z;
    const v1z = sxz * m1x + syz * m1y + szz * m1z;
    const covA = m0x * v0x + m0y * v0y + m0z * v0z + DILATION;
    const covB = m0x * v1x + m0y * v1y + m0z * v1z;
    const covC = m1x * v1x + m1y * v1y + m1z * v1z + DILATION;

    const det = covA * covC - covB * covB;
    if (det <= 0) continue;
    const invDet = 1 / det;
    const mid = 0.5 * (covA + covC);
    const lamMax = mid + Math.sqrt(Math.max(mid * mid - det, 0));

    const ratio = Math.max(sp.alphaBase, ALPHA_SKIP) / ALPHA_SKIP;
    const rCut = Math.sqrt(Math.max(lamMax, 0) * 2 * Math.log(ratio)) + RECT_MARGIN_PX;
    const x0 = Math.max(0, Math.ceil(meanX - rCut - 0.5));
    const x1 = Math.min(width, Math.floor(meanX + rCut - 0.5) + 1);
    const y0 = Math.max(0, Math.ceil(meanY - rCut - 0.5));
    const y1 = Math.min(height, Math.floor(meanY + rCut - 0.5) + 1);
    if (x1 <= x0 || y1 <= y0) continue;

    out.push({
      ...sp,
      meanX, meanY, depth: tz,
      conicA: covC * invDet, conicB: -covB * invDet, conicC: covA * invDet,
      x0, x1, y0, y1,
    });
  }
  return out;
}

export interface RenderedFrame {
  width: number;
  height: number;
  rgb: Float32Array; // 3 * width * height, row-major
  alpha: Float32Array;
}

export function renderFrame(model: GaussianModel, tf: TransferFunction, cam: CameraBasis,
                            width: number, height: number, fovY: number,
                            background: [number, number, number],
                            near = 1e-4): RenderedFrame {
  const shaded = shadeSplats(model, tf, cam.position);
  const splats = projectSplats(model, shaded, cam, width, height, fovY, near);
  splats.sort((a, b) => a.depth - b.depth || a.index - b.index);

  const rgb = new Float32Array(3 * width * height);
  const trans = new Float32Array(width * height).fill(1);
  const done = new Uint8Array(width * height);

  for (const sp of splats) {
    const pm = Math.log(ALPHA_SKIP / sp.alphaBase);
    for (let py = sp.y0; py < sp.y1; py++) {
      const dy = py + 0.5 - sp.meanY;
      for (let px = sp.x0; px < sp.x1; px++) {
        const p = py * width + px;
        if (done[p]) continue;
        const dx = px + 0.5 - sp.meanX;
        const pw = -0.5 * (sp.conicA * dx * dx + sp.conicC * dy * dy) - sp.conicB * dx * dy;
        if (pw < pm) continue;
        let alpha = sp.alphaBase * Math.exp(pw);
        if (alpha > ALPHA_CLAMP) alpha = ALPHA_CLAMP;
        const t = trans[p];
        const testT = t * (1 - alpha);
        if (testT < TRANS_STOP) {
          done[p] = 1;
          continue;
        }
        const wgt = alpha * t;
        rgb[3 * p] += sp.color[0] * wgt;
        rgb[3 * p + 1] += sp.color[1] * wgt;
        rgb[3 * p + 2] += sp.color[2] * wgt;
        trans[p] = testT;
      }
    }
  }
  const alphaPlane = new Float32Array(width * height);
  for (let p = 0; p < width * height; p++) {
    const t = trans[p];
    rgb[3 * p] += t * background[0];
    rgb[3 * p + 1] += t * background[1];
    rgb[3 * p + 2] += t * background[2];
    alphaPlane[p] = 1 - t;
  }
  return { width, height, rgb, alpha: alphaPlane };
}
