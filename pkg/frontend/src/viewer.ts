/**
 * Viewer shell: loads a bundle (model.vegs + manifest.json), owns the UI
 * state (colormap pick, opacity editor, orbit camera, lighting toggle) and
 * drives the render loop.  The model buffers are immutable after load;
 * every transfer-function edit only touches the small TF table.
 */

import { applyOrbitDrag, applyZoom, orbitCamera, OrbitState } from "./camera";
import { OpacityEditor } from "./editor";
import { GpuRenderer } from "./gpu/renderer";
import { decodeModel, GaussianModel, ViewerManifest } from "./model";
import { ColorMap, OpacityMap, tfToJson, TransferFunction } from "./transfer";

export interface ViewerState {
  model: GaussianModel;
  manifest: ViewerManifest;
  colormapName: string;
  opacity: OpacityMap;
  orbit: OrbitState;
  background: [number, number, number];
  specular: boolean;
  stats: { frameMs: number; visibleSplats: number };
}

export async function loadBundle(baseUrl: string): Promise<{ state: ViewerState }> {
  const manifestResp = await fetch(`${baseUrl}/manifest.json`);
  if (!manifestResp.ok) throw new Error(`failed to fetch manifest: ${manifestResp.status}`);
  const manifest = (await manifestResp.json()) as ViewerManifest;
  const modelResp = await fetch(`${baseUrl}/${manifest.model}`);
  if (!modelResp.ok) throw new Error(`failed to fetch model: ${modelResp.status}`);
  const model = decodeModel(await modelResp.arrayBuffer());
  if (model.count !== manifest.count) {
    throw new Error(`manifest count ${manifest.count} != model count ${model.count}`);
  }
  const state: ViewerState = {
    model,
    manifest,
    colormapName: manifest.default_colormap,
    opacity: new OpacityMap([{ t: 0, alpha: 0 }, { t: 1, alpha: 1 }]),
    orbit: {
      azimuth: 0.6,
      elevation: 0.35,
      radius: manifest.camera.radius,
      target: manifest.camera.target as [number, number, number],
      fovY: manifest.camera.fov_y,
      width: 0,
      height: 0,
      fittedRadius: manifest.camera.radius,
    },
    background: [1, 1, 1],
    specular: true,
    stats: { frameMs: 0, visibleSplats: 0 },
  };
  return { state };
}

function currentTf(state: ViewerState): TransferFunction {
  return {
    color: new ColorMap(state.manifest.colormaps[state.colormapName], state.colormapName),
    opacity: state.opacity,
  };
}

function countVisible(state: ViewerState): number {
  const m = state.model;
  let n = 0;
  for (let i = 0; i < m.count; i++) {
    const v = 1 / (1 + Math.exp(-m.rawValue[i]));
    const w = 1 / (1 + Math.exp(-m.rawWeight[i]));
    if (state.opacity.eval(v) * w >= 1 / 255) n++;
  }
  return n;
}

export async function startViewer(root: HTMLElement, bundleUrl: string): Promise<void> {
  const { state } = await loadBundle(bundleUrl);

  const canvas = document.createElement("canvas");
  canvas.width = 1024;
  canvas.height = 1024;
  canvas.className = "view";
  state.orbit.width = canvas.width;
  state.orbit.height = canvas.height;

  const panel = document.createElement("div");
  panel.className = "panel";
  const [lo, hi] = state.manifest.raw_range;
  panel.innerHTML = `
    <h1>value-embedded splats</h1>
    <div class="row">${state.model.count.toLocaleString()} splats,
      field range ${lo.toPrecision(4)} .. ${hi.toPrecision(4)}</div>
    <label class="row">colormap
      <select id="cmap"></select>
    </label>
    <div class="row">opacity map <span class="hint">(drag; click curve to add;
      double-click to remove)</span></div>
    <canvas id="opacity" width="360" height="150"></canvas>
    <label class="row"><input type="checkbox" id="lighting" checked> specular lighting</label>
    <button id="export">export transfer function</button>
    <div class="row" id="stats"></div>
  `;
  root.append(canvas, panel);

  const select = panel.querySelector<HTMLSelectElement>("#cmap")!;
  for (const name of Object.keys(state.manifest.colormaps).sort()) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    opt.selected = name === state.colormapName;
    select.append(opt);
  }

  const renderer = await GpuRenderer.create(canvas, state.model);
  renderer.setTransferFunction(currentTf(state));

  const editorCanvas = panel.querySelector<HTMLCanvasElement>("#opacity")!;
  const editor = new OpacityEditor(editorCanvas, state.opacity,
                                   new ColorMap(state.manifest.colormaps[state.colormapName]));
  editor.onChange = (map) => {
    state.opacity = map;
    renderer.setTransferFunction(currentTf(state));
    state.stats.visibleSplats = countVisible(state);
  };

  select.addEventListener("change", () => {
    state.colormapName = select.value;
    editor.setColormap(new ColorMap(state.manifest.colormaps[state.colormapName]));
    renderer.setTransferFunction(currentTf(state));
  });

  const lighting = panel.querySelector<HTMLInputElement>("#lighting")!;
  lighting.addEventListener("change", () => (state.specular = lighting.checked));

  panel.querySelector<HTMLButtonElement>("#export")!.addEventListener("click", () => {
    const blob = new Blob([tfToJson(currentTf(state))], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "transfer_function.json";
    a.click();
    URL.revokeObjectURL(a.href);
  });

  // orbit gestures
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("pointerdown", (e) => {
    dragging = true;
    lastX = e.clientX;
    lastY = e.clientY;
    canvas.setPointerCapture(e.pointerId);
  });
  canvas.addEventListener("pointerup", () => (dragging = false));
  canvas.addEventListener("pointermove", (e) => {
    if (!dragging) return;
    const dAz = (e.clientX - lastX) * 0.005;
    const dEl = (e.clientY - lastY) * 0.005;
    lastX = e.clientX;
    lastY = e.clientY;
    state.orbit = applyOrbitDrag(state.orbit, dAz, dEl);
  });
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    state.orbit = applyZoom(state.orbit, Math.exp(e.deltaY * 0.001));
  }, { passive: false });

  state.stats.visibleSplats = countVisible(state);
  const statsEl = panel.querySelector<HTMLDivElement>("#stats")!;

  const loop = () => {
    const t0 = performance.now();
    const cam = orbitCamera(state.orbit);
    renderer.render(cam, canvas.width, canvas.height, state.orbit.fovY,
                    state.background, state.specular,
                    state.orbit.azimuth, state.orbit.elevation);
    state.stats.frameMs = performance.now() - t0;
    statsEl.textContent =
      `${state.stats.frameMs.toFixed(1)} ms/frame, ${state.stats.visibleSplats.toLocaleString()} visible`;
    requestAnimationFrame(loop);
  };
  requestAnimationFrame(loop);
}
