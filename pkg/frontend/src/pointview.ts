// Zoomable xy scatter of the raw point list. Progressive enhancement over
// the projection image: wheel zooms around the cursor, drag pans.

import type { EventPoints } from './api.js';

export class PointView {
  private ctx: CanvasRenderingContext2D;
  private points: [number, number, number, number][] = [];
  private scale = 1;
  private offsetX = 0;
  private offsetY = 0;
  private dragging = false;
  private lastX = 0;
  private lastY = 0;
  private radiusMm = 292;

  constructor(private readonly canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext('2d');
    if (!ctx) throw new Error('canvas 2d context unavailable');
    this.ctx = ctx;
    canvas.addEventListener('wheel', (e) => this.onWheel(e), { passive: false });
    canvas.addEventListener('mousedown', (e) => {
      this.dragging = true;
      this.lastX = e.offsetX;
      this.lastY = e.offsetY;
    });
    canvas.addEventListener('mousemove', (e) => {
      if (!this.dragging) return;
      this.offsetX += e.offsetX - this.lastX;
      this.offsetY += e.offsetY - this.lastY;
      this.lastX = e.offsetX;
      this.lastY = e.offsetY;
      this.draw();
    });
    window.addEventListener('mouseup', () => {
      this.dragging = false;
    });
  }

  show(payload: EventPoints): void {
    this.points = payload.points;
    this.scale = 1;
    this.offsetX = 0;
    this.offsetY = 0;
    this.draw();
  }

  clear(): void {
    this.points = [];
    this.draw();
  }

  private onWheel(e: WheelEvent): void {
    e.preventDefault();
    const factor = e.deltaY < 0 ? 1.2 : 1 / 1.2;
    const next = Math.min(Math.max(this.scale * factor, 0.5), 40);
    // zoom around the cursor position
    this.offsetX = e.offsetX - (e.offsetX - this.offsetX) * (next / this.scale);
    this.offsetY = e.offsetY - (e.offsetY - this.offsetY) * (next / this.scale);
    this.scale = next;
    this.draw();
  }

  private draw(): void {
    const { width, height } = this.canvas;
    this.ctx.fillStyle = '#ffffff';
    this.ctx.fillRect(0, 0, width, height);

    const base = Math.min(width, height) / (2 * this.radiusMm);
    const s = base * this.scale;
    const cx = width / 2 + this.offsetX;
    const cy = height / 2 + this.offsetY;

    // chamber outline
    this.ctx.strokeStyle = '#bbbbbb';
    this.ctx.beginPath();
    this.ctx.arc(cx, cy, this.radiusMm * s, 0, 2 * Math.PI);
    this.ctx.stroke();

    if (!this.points.length) return;
    let qMax = 0;
    for (const p of this.points) qMax = Math.max(qMax, p[3]);
    for (const [x, y, , q] of this.points) {
      const shade = qMax > 0 ? Math.round(220 * (1 - q / qMax)) : 0;
      this.ctx.fillStyle = `rgb(${shade},${shade},${shade})`;
      const px = cx + x * s;
      const py = cy - y * s; // screen y grows downward
      this.ctx.fillRect(px - 1.5, py - 1.5, 3, 3);
    }
  }
}
