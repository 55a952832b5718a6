// Studio wiring: one canvas, a stage panel, label list, symmetry toggle,
// stroke capture (shift-drag so plain drag stays camera orbit), and the live
// energy chart fed by the event stream.

import { SessionClient } from "./api.js";
import { EnergyChart } from "./energyChart.js";
import { SceneView } from "./renderer.js";
import type { LabelJson, OptimizeIterate, StageName, StrokeIntent, Vec3 } from "./types.js";
import { STAGES } from "./types.js";
import { unprojectStroke, type ScreenSample } from "./unproject.js";

const DEFAULT_PARAMS = {
  k: 32,
  sigma_t: 0.04,
  regularity_tol: 0.08,
  growth: { s_max: 8.0, min_points: 5, corner_ratio: 0.6 },
  alignment_radius: 0.08,
  weights: "scan",
  lambda_merge: 0.9,
};

class Studio {
  client = new SessionClient("");
  view: SceneView;
  chart: EnergyChart;
  cloud: Vec3[] = [];
  pendingMirrored = new Set<number>();
  strokeIntent: StrokeIntent = "bridge";
  private capturing: ScreenSample[] | null = null;
  private lastEventRevision = -1;
  private statusEl: HTMLElement;

  constructor() {
    const canvas = document.getElementById("scene") as HTMLCanvasElement;
    this.view = new SceneView(canvas);
    this.chart = new EnergyChart(document.getElementById("energy") as HTMLCanvasElement);
    this.statusEl = document.getElementById("status")!;
    this.wireUpload();
    this.wireStagePanel();
    this.wireStrokeCapture(canvas);
    this.wireSymmetry();
    this.wireVisibility();
  }

  private status(text: string): void {
    this.statusEl.textContent = text;
  }

  private wireUpload(): void {
    const input = document.getElementById("cloud-file") as HTMLInputElement;
    input.addEventListener("change", async () => {
      const file = input.files?.[0];
      if (!file) return;
      const id = await this.client.createSession(file, file.name);
      this.status(`session ${id}`);
      this.cloud = await this.loadCloudPreview(file);
      this.view.setCloud(this.cloud);
    });
  }

  /** Parse xyz uploads client-side for rendering (ply preview via detect stage). */
  private async loadCloudPreview(file: File): Promise<Vec3[]> {
    if (!file.name.endsWith(".xyz")) return [];
    const text = await file.text();
    const pts: Vec3[] = [];
    for (const line of text.split("\n")) {
      const cols = line.trim().split(/\s+/).map(Number);
      if (cols.length >= 3 && cols.every((v) => Number.isFinite(v))) {
        pts.push([cols[0], cols[1], cols[2]]);
      }
    }
    return pts;
  }

  private wireStagePanel(): void {
    for (const stage of STAGES) {
      const btn = document.getElementById(`run-${stage}`) as HTMLButtonElement;
      btn.addEventListener("click", () => void this.runStage(stage));
    }
  }

  private async runStage(stage: StageName): Promise<void> {
    this.status(`running ${stage}...`);
    try {
      const out = await this.client.advanceStage(stage, DEFAULT_PARAMS);
      this.status(`${stage} done (rev ${out.revision})`);
    } catch (err) {
      this.status(String(err));   // conflicts surface inline, state stays
      return;
    }
    await this.refresh(stage);
  }

  private async refresh(stage: StageName): Promise<void> {
    if (stage === "extract" || stage === "optimize") {
      const art = await this.client.segments().catch(() => null);
      const curves = art?.curves
        ?? (await this.client.artifact<{ curves: any[] }>(stage)).curves;
      this.view.setCurves(curves, this.pendingMirrored);
    }
    if (stage === "regularize") {
      this.renderLabels((await this.client.artifact<{ labels: LabelJson[] }>("regularize")).labels);
    }
    if (stage === "optimize") {
      await this.consumeEvents();
    }
    if (stage === "complete") {
      const net = await this.client.network();
      this.view.setCurves(net.curves);
      this.view.setJunctions(net.junctions);
      this.status(`network: ${net.curves.length} curves, ${net.junctions.length} junctions`);
    }
  }

  private async consumeEvents(): Promise<void> {
    const events = await this.client.events(this.lastEventRevision);
    for (const ev of events) {
      this.lastEventRevision = Math.max(this.lastEventRevision, ev.revision);
      if (ev.type === "optimize-progress") {
        this.chart.push((ev.payload as { iterates: OptimizeIterate[] }).iterates);
      }
    }
  }

  private renderLabels(labels: LabelJson[]): void {
    const list = document.getElementById("labels")!;
    list.innerHTML = "";
    for (const label of labels) {
      const row = document.createElement("li");
      row.textContent = `${label.kind} [${label.members.join(",")}] `;
      for (const action of ["accept", "reject"] as const) {
        const btn = document.createElement("button");
        btn.textContent = action;
        btn.addEventListener("click", () => {
          void this.client.confirmLabels(
            action === "accept" ? [label.id] : [],
            action === "reject" ? [label.id] : [],
          );
          row.classList.toggle("rejected", action === "reject");
        });
        row.appendChild(btn);
      }
      list.appendChild(row);
    }
  }

  private wireStrokeCapture(canvas: HTMLCanvasElement): void {
    const intentSelect = document.getElementById("stroke-intent") as HTMLSelectElement;
    intentSelect.addEventListener("change", () => {
      this.strokeIntent = intentSelect.value as StrokeIntent;
    });
    canvas.addEventListener("pointerdown", (ev) => {
      if (!ev.shiftKey) return;            // plain drag orbits the camera
      this.capturing = [{ x: ev.offsetX, y: ev.offsetY }];
      this.view.controls.enabled = false;
    });
    canvas.addEventListener("pointermove", (ev) => {
      this.capturing?.push({ x: ev.offsetX, y: ev.offsetY });
    });
    canvas.addEventListener("pointerup", () => {
      const samples = this.capturing;
      this.capturing = null;
      this.view.controls.enabled = true;
      if (!samples || samples.length < 2) return;
      void this.submitStroke(samples);
    });
  }

  private async submitStroke(samples: ScreenSample[]): Promise<void> {
    const cam = this.view.cameraState(
      (this.view.renderer.domElement as HTMLCanvasElement).width,
      (this.view.renderer.domElement as HTMLCanvasElement).height);
    const polyline = unprojectStroke(samples, cam, this.cloud);
    if (polyline.length < 2) {
      this.status("stroke discarded: nothing under the cursor");
      return;
    }
    const out = await this.client.applyStroke(this.strokeIntent, polyline);
    this.status(out.warning ?? `stroke applied, curves ${JSON.stringify(out.affected)}`);
    await this.refresh("extract");
  }

  private wireSymmetry(): void {
    const toggle = document.getElementById("symmetry") as HTMLInputElement;
    toggle.addEventListener("change", async () => {
      const out = await this.client.setSymmetry(toggle.checked);
      this.pendingMirrored = new Set<number>(out.mirrored ?? []);
      await this.refresh("extract");
      this.status(toggle.checked
        ? `mirrored ${this.pendingMirrored.size} curves (pending accept)`
        : "symmetry off");
    });
  }

  private wireVisibility(): void {
    for (const layer of ["cloud", "features", "curves", "junctions"] as const) {
      const box = document.getElementById(`show-${layer}`) as HTMLInputElement;
      box?.addEventListener("change", () => this.view.setVisibility(layer, box.checked));
    }
  }
}

new Studio();
