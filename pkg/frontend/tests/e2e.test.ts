// End-to-end smoke: spawn the real session service, load the cube cloud,
// advance every stage, draw one bridge stroke across the seeded gap through
// the UI's own unprojection math, and check the completed network.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SessionClient } from "../src/api.js";
import type { NetworkArtifact, SegmentsArtifact, Vec3 } from "../src/types.js";
import { projectPoint, unprojectStroke, type Camera } from "../src/unproject.js";

const PORT = 18923;
const BASE = `http://127.0.0.1:${PORT}`;
const DIAG = Math.sqrt(3);

const PARAMS = {
  k: 32,
  sigma_t: 0.04,
  regularity_tol: 0.08,
  growth: { s_max: 8.0, min_points: 5, corner_ratio: 0.6 },
  completion_radius: 0.15 * DIAG,
  alignment_radius: 0.08,
  weights: "scan",
  lambda_merge: 0.9,
};

function havePython(): boolean {
  return spawnSync("python3", ["-c", "import curvenet, uvicorn"]).status === 0;
}

let service: ChildProcess | null = null;
let cloudPath = "";

async function waitForService(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const res = await fetch(`${BASE}/docs`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("session service did not come up");
}

function parseXyz(path: string): Vec3[] {
  const pts: Vec3[] = [];
  for (const line of readFileSync(path, "utf8").split("\n")) {
    const cols = line.trim().split(/\s+/).map(Number);
    if (cols.length >= 3 && cols.slice(0, 3).every(Number.isFinite)) {
      pts.push([cols[0], cols[1], cols[2]]);
    }
  }
  return pts;
}

describe.skipIf(!havePython())("studio e2e against the live service", () => {
  beforeAll(async () => {
    const dir = mkdtempSync(join(tmpdir(), "curvenet-e2e-"));
    cloudPath = join(dir, "cube.xyz");
    const gen = spawnSync("python3", [
      "-m", "curvenet.cli", "synth", "--shape", "cube", "--samples", "20000",
      "--noise", "0.003", "--seed", "0",
      "--hole", `0.5,0,0,${0.08 * DIAG}`,
      "--out", cloudPath,
    ]);
    expect(gen.status).toBe(0);
    service = spawn("python3", ["-m", "uvicorn", "curvenet.service:app",
      "--port", String(PORT), "--log-level", "warning"], { stdio: "ignore" });
    await waitForService();
  }, 120_000);

  afterAll(() => {
    service?.kill();
  });

  it("bridges the seeded gap with a sketched stroke and completes 8 junctions", async () => {
    const cloud = parseXyz(cloudPath);
    expect(cloud.length).toBeGreaterThan(15000);

    const client = new SessionClient(BASE);
    await client.createSession(readFileSync(cloudPath), "cube.xyz");

    for (const stage of ["detect", "extract", "regularize"] as const) {
      await client.advanceStage(stage, PARAMS);
    }
    const before = (await client.segments()).curves.length;

    // sketch over the gap on the bottom-front edge, viewed from outside
    const cam: Camera = {
      position: [0.5, -3.0, 0.6],
      target: [0.5, 0.5, 0.5],
      up: [0, 0, 1],
      fovDeg: 45,
      width: 1000,
      height: 800,
    };
    const strokeWorld: Vec3[] = [];
    for (let t = 0; t <= 1.001; t += 0.05) {
      strokeWorld.push([0.3 + 0.4 * t, 0, 0]);
    }
    const samples = strokeWorld
      .map((p) => projectPoint(cam, p))
      .map(({ x, y }) => ({ x, y }));
    const polyline = unprojectStroke(samples, cam, cloud);
    expect(polyline.length).toBeGreaterThanOrEqual(2);

    const strokeOut = await client.applyStroke("bridge", polyline);
    expect(strokeOut.affected.length).toBe(1);           // one merged curve
    const after: SegmentsArtifact = await client.segments();
    expect(after.curves.length).toBe(before - 1);
    const merged = after.curves[strokeOut.affected[0]];
    expect(merged.provenance).toContain("stroke");

    for (const stage of ["regularize", "optimize", "complete"] as const) {
      await client.advanceStage(stage, PARAMS);
    }
    const network: NetworkArtifact = await client.network();
    expect(network.junctions.length).toBe(8);

    // the streamed optimize energies are non-increasing within each inner run
    const events = await client.events();
    const progress = events.filter((e) => e.type === "optimize-progress");
    expect(progress.length).toBeGreaterThan(0);
    for (const ev of progress) {
      const totals = (ev.payload as { iterates: { total: number }[] }).iterates
        .map((it) => it.total);
      for (let i = 1; i < totals.length; i++) {
        expect(totals[i]).toBeLessThanOrEqual(totals[i - 1] * (1 + 1e-12) + 1e-15);
      }
    }
  }, 120_000);
});
