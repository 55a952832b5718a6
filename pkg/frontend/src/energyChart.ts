// Minimal canvas line chart for the streamed optimization energy.

import type { OptimizeIterate } from "./types.js";

export class EnergyChart {
  private series: number[] = [];

  constructor(private canvas: HTMLCanvasElement) {}

  /** Append iterates from a progress event, keeping revision order. */
  push(iterates: OptimizeIterate[]): void {
    for (const it of iterates) {
      this.series.push(it.total);
    }
    this.draw();
  }

  reset(): void {
    this.series = [];
    this.draw();
  }

  values(): readonly number[] {
    return this.series;
  }

  private draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    if (this.series.length < 2) return;
    const max = Math.max(...this.series);
    const min = Math.min(...this.series);
    const span = max - min || 1;
    ctx.strokeStyle = "#3fa7d6";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    this.series.forEach((v, i) => {
      const x = (i / (this.series.length - 1)) * (width - 8) + 4;
      const y = height - 4 - ((v - min) / span) * (height - 8);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }
}
