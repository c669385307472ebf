/**
 * Canvas opacity-map editor: control points are draggable, clicking the
 * curve inserts a point, right-click / double-click deletes (endpoints
 * refused).  All state transitions go through the pure editor operations
 * in transfer.ts, so the ordering/endpoint invariants always hold.
 */

import { OpacityMap, dragPoint, insertPoint, deletePoint } from "./transfer";
import { ColorMap } from "./transfer";

const POINT_RADIUS = 6;

export class OpacityEditor {
  map: OpacityMap;
  onChange: (map: OpacityMap) => void = () => {};
  private dragging = -1;

  constructor(private canvas: HTMLCanvasElement, initial: OpacityMap,
              private colormap: ColorMap | null = null) {
    this.map = initial.clone();
    canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    canvas.addEventListener("pointerup", () => (this.dragging = -1));
    canvas.addEventListener("pointerleave", () => (this.dragging = -1));
    canvas.addEventListener("dblclick", (e) => this.deleteAt(e));
    canvas.addEventListener("contextmenu", (e) => {
      e.preventDefault();
      this.deleteAt(e);
    });
    this.draw();
  }

  setColormap(cm: ColorMap): void {
    this.colormap = cm;
    this.draw();
  }

  setMap(map: OpacityMap): void {
    this.map = map.clone();
    this.draw();
  }

  private toCanvas(t: number, alpha: number): [number, number] {
    return [t * this.canvas.width, (1 - alpha) * this.canvas.height];
  }

  private fromCanvas(x: number, y: number): [number, number] {
    return [x / this.canvas.width, 1 - y / this.canvas.height];
  }

  private hit(e: MouseEvent): number {
    const rect = this.canvas.getBoundingClientRect();
    const x = (e.clientX - rect.left) * (this.canvas.width / rect.width);
    const y = (e.clientY - rect.top) * (this.canvas.height / rect.height);
    for (let i = 0; i < this.map.points.length; i++) {
      const [px, py] = this.toCanvas(this.map.points[i].t, this.map.points[i].alpha);
      if (Math.hypot(px - x, py - y) <= POINT_RADIUS + 3) return i;
    }
    return -1;
  }

  private pointerDown(e: PointerEvent): void {
    if (e.button !== 0) return;
    const idx = this.hit(e);
    if (idx >= 0) {
      this.dragging = idx;
      this.canvas.setPointerCapture(e.pointerId);
      return;
    }
    const rect = this.canvas.getBoundingClientRect();
    const [t] = this.fromCanvas(
      (e.clientX - rect.left) * (this.canvas.width / rect.width),
      (e.clientY - rect.top) * (this.canvas.height / rect.height),
    );
    const next = insertPoint(this.map, t);
    if (next !== this.map) {
      this.map = next;
      this.changed();
      // grab the fresh point for immediate dragging
      this.dragging = this.map.points.findIndex((p) => Math.abs(p.t - t) < 1e-6);
    }
  }

  private pointerMove(e: PointerEvent): void {
    if (this.dragging < 0) return;
    const rect = this.canvas.getBoundingClientRect();
    const [t, alpha] = this.fromCanvas(
      (e.clientX - rect.left) * (this.canvas.width / rect.width),
      (e.clientY - rect.top) * (this.canvas.height / rect.height),
    );
    this.map = dragPoint(this.map, this.dragging, t, alpha);
    this.changed();
  }

  private deleteAt(e: MouseEvent): void {
    const idx = this.hit(e);
    if (idx < 0) return;
    const next = deletePoint(this.map, idx);
    if (next !== this.map) {
      this.map = next;
      this.dragging = -1;
      this.changed();
    }
  }

  private changed(): void {
    this.draw();
    this.onChange(this.map);
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);

    // colormap strip behind the curve
    if (this.colormap) {
      for (let x = 0; x < width; x++) {
        const [r, g, b] = this.colormap.eval(x / (width - 1));
        ctx.fillStyle = `rgb(${Math.round(r * 255)},${Math.round(g * 255)},${Math.round(b * 255)})`;
        ctx.fillRect(x, height - 8, 1, 8);
      }
    }

    ctx.strokeStyle = "#3a86ff";
    ctx.lineWidth = 2;
    ctx.beginPath();
    const pts = this.map.points;
    for (let i = 0; i < pts.length; i++) {
      const [x, y] = this.toCanvas(pts[i].t, pts[i].alpha);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.stroke();

    for (let i = 0; i < pts.length; i++) {
      const [x, y] = this.toCanvas(pts[i].t, pts[i].alpha);
      ctx.fillStyle = i === 0 || i === pts.length - 1 ? "#8d99ae" : "#ef476f";
      ctx.beginPath();
      ctx.arc(x, y, POINT_RADIUS, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}
