/**
 * Model file decoding.
 *
 * Layout (little-endian): 64-byte header = magic "VEGS", version u32,
 * count u32, flags u32 (bit 0: vector-quantized), bbox as 6 f32, zero pad.
 * Uncompressed payload: structure-of-arrays f32 fields in declared order
 * (position xyz, log scale xyz, rotation wxyz, raw value, raw weight,
 * normal xyz, k_a, k_d, k_s, raw beta).  VQ payload: positions, codebook
 * size u32, codebook (K x 16 f32), per-splat u32 indices; decoding expands
 * the codebook so both layouts produce the same in-memory model.
 */

export const FLOATS_PER_GAUSSIAN = 19;
export const ATTRIBUTE_DIM = 16;
const HEADER_BYTES = 64;
const MAGIC = 0x53474556; // "VEGS" little-endian
const FLAG_VQ = 1;

export interface GaussianModel {
  count: number;
  position: Float32Array; // 3n
  logScale: Float32Array; // 3n
  rotation: Float32Array; // 4n, (w, x, y, z)
  rawValue: Float32Array;
  rawWeight: Float32Array;
  normal: Float32Array; // 3n
  rawKa: Float32Array;
  rawKd: Float32Array;
  rawKs: Float32Array;
  rawBeta: Float32Array;
  bboxMin: [number, number, number];
  bboxMax: [number, number, number];
}

export class ModelFormatError extends Error {}

function readF32(view: DataView, offset: number, count: number): Float32Array {
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) out[i] = view.getFloat32(offset + 4 * i, true);
  return out;
}

export function decodeModel(buffer: ArrayBuffer): GaussianModel {
  if (buffer.byteLength < HEADER_BYTES) {
    throw new ModelFormatError("model file too small for its header");
  }
  const view = new DataView(buffer);
  if (view.getUint32(0, true) !== MAGIC) {
    throw new ModelFormatError("not a VEGS model file (bad magic)");
  }
  const version = view.getUint32(4, true);
  if (version !== 1) {
    throw new ModelFormatError(`unsupported model version ${version}`);
  }
  const count = view.getUint32(8, true);
  const flags = view.getUint32(12, true);
  const bboxMin: [number, number, number] = [
    view.getFloat32(16, true), view.getFloat32(20, true), view.getFloat32(24, true),
  ];
  const bboxMax: [number, number, number] = [
    view.getFloat32(28, true), view.getFloat32(32, true), view.getFloat32(36, true),
  ];

  if (flags & FLAG_VQ) {
    return decodeVq(view, count, bboxMin, bboxMax);
  }

  const expected = HEADER_BYTES + count * FLOATS_PER_GAUSSIAN * 4;
  if (buffer.byteLength !== expected) {
    throw new ModelFormatError(
      `model file is ${buffer.byteLength} bytes, expected ${expected} for ${count} splats`,
    );
  }
  let off = HEADER_BYTES;
  const take = (n: number) => {
    const arr = readF32(view, off, n);
    off += 4 * n;
    return arr;
  };
  return {
    count,
    position: take(3 * count),
    logScale: take(3 * count),
    rotation: take(4 * count),
    rawValue: take(count),
    rawWeight: take(count),
    normal: take(3 * count),
    rawKa: take(count),
    rawKd: take(count),
    rawKs: take(count),
    rawBeta: take(count),
    bboxMin,
    bboxMax,
  };
}

function decodeVq(
  view: DataView,
  count: number,
  bboxMin: [number, number, number],
  bboxMax: [number, number, number],
): GaussianModel {
  let off = HEADER_BYTES;
  if (view.byteLength < off + count * 12 + 4) {
    throw new ModelFormatError("truncated vector-quantized model file");
  }
  const position = readF32(view, off, 3 * count);
  off += 12 * count;
  const k = view.getUint32(off, true);
  off += 4;
  const expected = off + k * ATTRIBUTE_DIM * 4 + count * 4;
  if (view.byteLength !== expected) {
    throw new ModelFormatError(
      `VQ model file is ${view.byteLength} bytes, expected ${expected}`,
    );
  }
  const codebook = readF32(view, off, k * ATTRIBUTE_DIM);
  off += k * ATTRIBUTE_DIM * 4;

  const model: GaussianModel = {
    count,
    position,
    logScale: new Float32Array(3 * count),
    rotation: new Float32Array(4 * count),
    rawValue: new Float32Array(count),
    rawWeight: new Float32Array(count),
    normal: new Float32Array(3 * count),
    rawKa: new Float32Array(count),
    rawKd: new Float32Array(count),
    rawKs: new Float32Array(count),
    rawBeta: new Float32Array(count),
    bboxMin,
    bboxMax,
  };
  for (let i = 0; i < count; i++) {
    const idx = view.getUint32(off + 4 * i, true);
    if (idx >= k) throw new ModelFormatError(`codebook index ${idx} out of range`);
    const c = idx * ATTRIBUTE_DIM;
    model.logScale[3 * i] = codebook[c];
    model.logScale[3 * i + 1] = codebook[c + 1];
    model.logScale[3 * i + 2] = codebook[c + 2];
    model.rotation[4 * i] = codebook[c + 3];
    model.rotation[4 * i + 1] = codebook[c + 4];
    model.rotation[4 * i + 2] = codebook[c + 5];
    model.rotation[4 * i + 3] = codebook[c + 6];
    model.rawValue[i] = codebook[c + 7];
    model.rawWeight[i] = codebook[c + 8];
    model.normal[3 * i] = codebook[c + 9];
    model.normal[3 * i + 1] = codebook[c + 10];
    model.normal[3 * i + 2] = codebook[c + 11];
    model.rawKa[i] = codebook[c + 12];
    model.rawKd[i] = codebook[c + 13];
    model.rawKs[i] = codebook[c + 14];
    model.rawBeta[i] = codebook[c + 15];
  }
  return model;
}

export interface ViewerManifest {
  model: string;
  count: number;
  raw_range: [number, number];
  bbox: { min: number[]; max: number[] };
  default_colormap: string;
  colormaps: Record<string, number[][]>;
  camera: { fov_y: number; radius: number; target: number[] };
}
