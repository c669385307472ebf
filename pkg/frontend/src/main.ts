/** Entry point: feature-detect WebGPU and start the viewer or show a
 * static error page. The bundle directory defaults to ./bundle and can be
 * overridden with ?bundle=<url>. */

import { startViewer } from "./viewer";

function errorPage(root: HTMLElement, message: string): void {
  root.innerHTML = `
    <div class="error">
      <h1>viewer unavailable</h1>
      <p>${message}</p>
      <p>This viewer needs a browser with WebGPU (Chrome 113+, Edge 113+,
      or Firefox Nightly with <code>dom.webgpu.enabled</code>).</p>
    </div>`;
}

async function boot(): Promise<void> {
  const root = document.getElementById("app")!;
  if (!("gpu" in navigator)) {
    errorPage(root, "WebGPU is not available in this browser.");
    return;
  }
  const params = new URLSearchParams(window.location.search);
  const bundle = params.get("bundle") ?? "./bundle";
  try {
    await startViewer(root, bundle);
  } catch (err) {
    errorPage(root, err instanceof Error ? err.message : String(err));
  }
}

boot();
