/**
 * WebGPU splat renderer: instanced quads in a CPU-sorted depth order,
 * blended front to back with the under operator, then a background pass.
 * The model buffers are uploaded once and never mutated; transfer-function
 * edits only rewrite a small uniform table, so they take effect next frame.
 */

import { CameraBasis } from "../camera";
import { GaussianModel } from "../model";
import { TransferFunction } from "../transfer";
import { BACKGROUND_SHADER, SPLAT_SHADER } from "./shaders";

const MAX_TF_POINTS = 64;
const SPLAT_FLOATS = 20; // std430-padded layout in the shader

export class GpuRenderer {
  private device: GPUDevice;
  private context: GPUCanvasContext;
  private splatBuffer: GPUBuffer;
  private orderBuffer: GPUBuffer;
  private uniformBuffer: GPUBuffer;
  private tfBuffer: GPUBuffer;
  private bgBuffer: GPUBuffer;
  private pipeline: GPURenderPipeline;
  private bgPipeline: GPURenderPipeline;
  private bindGroup: GPUBindGroup;
  private bgBindGroup: GPUBindGroup;
  private count: number;
  private depths: Float32Array<ArrayBuffer>;
  private indices: Uint32Array<ArrayBuffer>;
  private lastSortAz = Infinity;
  private lastSortEl = Infinity;
  readonly model: GaussianModel;

  private constructor(device: GPUDevice, context: GPUCanvasContext, format: GPUTextureFormat,
                      model: GaussianModel) {
    this.device = device;
    this.context = context;
    this.model = model;
    this.count = model.count;
    this.depths = new Float32Array(this.count);
    this.indices = new Uint32Array(this.count);

    this.splatBuffer = device.createBuffer({
      size: Math.max(this.count, 1) * SPLAT_FLOATS * 4,
      usage: GPUBufferUsage.STORAGE | GPUBufferUsage.COPY_DST,
    });
    device.queue.writeBuffer(this.splatBuffer, 0, packSplats(model));

    this.orderBuffer = device.createBuffer({
      size: Math.max(this.count, 1) * 4,
      usage: GPUBufferUsage.STORAGE | GPUBufferUsage.COPY_DST,
    });
    this.uniformBuffer = device.createBuffer({
      size: 20 * 4,
      usage: GPUBufferUsage.UNIFORM | GPUBufferUsage.COPY_DST,
    });
    this.tfBuffer = device.createBuffer({
      size: MAX_TF_POINTS * 2 * 4 + MAX_TF_POINTS * 4 * 4,
      usage: GPUBufferUsage.UNIFORM | GPUBufferUsage.COPY_DST,
    });
    this.bgBuffer = device.createBuffer({
      size: 16,
      usage: GPUBufferUsage.UNIFORM | GPUBufferUsage.COPY_DST,
    });

    const module = device.createShaderModule({ code: SPLAT_SHADER });
    this.pipeline = device.createRenderPipeline({
      layout: "auto",
      vertex: { module, entryPoint: "vs_main" },
      fragment: {
        module,
        entryPoint: "fs_main",
        targets: [{
          format,
          blend: {
            color: { srcFactor: "one-minus-dst-alpha", dstFactor: "one" },
            alpha: { srcFactor: "one-minus-dst-alpha", dstFactor: "one" },
          },
        }],
      },
      primitive: { topology: "triangle-strip" },
    });
    const bgModule = device.createShaderModule({ code: BACKGROUND_SHADER });
    this.bgPipeline = device.createRenderPipeline({
      layout: "auto",
      vertex: { module: bgModule, entryPoint: "vs_main" },
      fragment: {
        module: bgModule,
        entryPoint: "fs_main",
        targets: [{
          format,
          blend: {
            color: { srcFactor: "one-minus-dst-alpha", dstFactor: "one" },
            alpha: { srcFactor: "one-minus-dst-alpha", dstFactor: "one" },
          },
        }],
      },
      primitive: { topology: "triangle-strip" },
    });
    this.bindGroup = device.createBindGroup({
      layout: this.pipeline.getBindGroupLayout(0),
      entries: [
        { binding: 0, resource: { buffer: this.uniformBuffer } },
        { binding: 1, resource: { buffer: this.splatBuffer } },
        { binding: 2, resource: { buffer: this.orderBuffer } },
        { binding: 3, resource: { buffer: this.tfBuffer } },
      ],
    });
    this.bgBindGroup = device.createBindGroup({
      layout: this.bgPipeline.getBindGroupLayout(0),
      entries: [{ binding: 0, resource: { buffer: this.bgBuffer } }],
    });
  }

  static async create(canvas: HTMLCanvasElement, model: GaussianModel): Promise<GpuRenderer> {
    if (!navigator.gpu) throw new Error("WebGPU is not available in this browser");
    const adapter = await navigator.gpu.requestAdapter();
    if (!adapter) throw new Error("no WebGPU adapter found");
    const device = await adapter.requestDevice();
    const context = canvas.getContext("webgpu");
    if (!context) throw new Error("could not create a WebGPU canvas context");
    const format = navigator.gpu.getPreferredCanvasFormat();
    context.configure({ device, format, alphaMode: "opaque" });
    return new GpuRenderer(device, context, format, model);
  }

  setTransferFunction(tf: TransferFunction): void {
    const data = new Float32Array(MAX_TF_POINTS * 2 + MAX_TF_POINTS * 4);
    const nOp = Math.min(tf.opacity.points.length, MAX_TF_POINTS);
    for (let i = 0; i < nOp; i++) {
      data[2 * i] = tf.opacity.points[i].t;
      data[2 * i + 1] = tf.opacity.points[i].alpha;
    }
    const colorBase = MAX_TF_POINTS * 2;
    const nCol = Math.min(tf.color.ts.length, MAX_TF_POINTS);
    for (let i = 0; i < nCol; i++) {
      data[colorBase + 4 * i] = tf.color.ts[i];
      data[colorBase + 4 * i + 1] = tf.color.rgb[i][0];
      data[colorBase + 4 * i + 2] = tf.color.rgb[i][1];
      data[colorBase + 4 * i + 3] = tf.color.rgb[i][2];
    }
    this.device.queue.writeBuffer(this.tfBuffer, 0, data);
    this.tfCounts = [nOp, nCol];
  }

  private tfCounts: [number, number] = [2, 2];

  /** Full re-sort whenever the orbit rotated more than one degree. */
  private maybeSort(cam: CameraBasis, azimuth: number, elevation: number): void {
    const deg = Math.PI / 180;
    if (Math.abs(azimuth - this.lastSortAz) < deg
        && Math.abs(elevation - this.lastSortEl) < deg) return;
    this.lastSortAz = azimuth;
    this.lastSortEl = elevation;
    const m = this.model;
    for (let i = 0; i < this.count; i++) {
      this.depths[i] =
        cam.forward[0] * (m.position[3 * i] - cam.position[0])
        + cam.forward[1] * (m.position[3 * i + 1] - cam.position[1])
        + cam.forward[2] * (m.position[3 * i + 2] - cam.position[2]);
      this.indices[i] = i;
    }
    const depths = this.depths;
    this.indices.sort((a, b) => depths[a] - depths[b]);
    this.device.queue.writeBuffer(this.orderBuffer, 0, this.indices);
  }

  render(cam: CameraBasis, width: number, height: number, fovY: number,
         background: [number, number, number], specular: boolean,
         azimuth: number, elevation: number): void {
    this.maybeSort(cam, azimuth, elevation);
    const u = new ArrayBuffer(20 * 4);
    const f = new Float32Array(u);
    const ui = new Uint32Array(u);
    f.set(cam.right, 0);
    f[3] = width;
    f.set(cam.up, 4);
    f[7] = height;
    f.set(cam.forward, 8);
    f[11] = cam.focalPx;
    f.set(cam.position, 12);
    f[15] = Math.tan(0.5 * fovY);
    ui[16] = this.tfCounts[0];
    ui[17] = this.tfCounts[1];
    ui[18] = specular ? 1 : 0;
    this.device.queue.writeBuffer(this.uniformBuffer, 0, u);
    this.device.queue.writeBuffer(this.bgBuffer, 0, new Float32Array([...background, 1]));

    const encoder = this.device.createCommandEncoder();
    const pass = encoder.beginRenderPass({
      colorAttachments: [{
        view: this.context.getCurrentTexture().createView(),
        clearValue: { r: 0, g: 0, b: 0, a: 0 },
        loadOp: "clear",
        storeOp: "store",
      }],
    });
    pass.setPipeline(this.pipeline);
    pass.setBindGroup(0, this.bindGroup);
    pass.draw(4, this.count);
    pass.setPipeline(this.bgPipeline);
    pass.setBindGroup(0, this.bgBindGroup);
    pass.draw(4);
    pass.end();
    this.device.queue.submit([encoder.finish()]);
  }
}

export function packSplats(model: GaussianModel): Float32Array<ArrayBuffer> {
  const out = new Float32Array(model.count * SPLAT_FLOATS);
  for (let i = 0; i < model.count; i++) {
    const o = i * SPLAT_FLOATS;
    out[o] = model.position[3 * i];
    out[o + 1] = model.position[3 * i + 1];
    out[o + 2] = model.position[3 * i + 2];
    out[o + 3] = model.rawValue[i];
    out[o + 4] = model.logScale[3 * i];
    out[o + 5] = model.logScale[3 * i + 1];
    out[o + 6] = model.logScale[3 * i + 2];
    out[o + 7] = model.rawWeight[i];
    out[o + 8] = model.rotation[4 * i];
    out[o + 9] = model.rotation[4 * i + 1];
    out[o + 10] = model.rotation[4 * i + 2];
    out[o + 11] = model.rotation[4 * i + 3];
    out[o + 12] = model.normal[3 * i];
    out[o + 13] = model.normal[3 * i + 1];
    out[o + 14] = model.normal[3 * i + 2];
    out[o + 15] = model.rawKa[i];
    out[o + 16] = model.rawKd[i];
    out[o + 17] = model.rawKs[i];
    out[o + 18] = model.rawBeta[i];
  }
  return out;
}
