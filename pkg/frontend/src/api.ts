// Typed client for the curvenet session service. All geometry edits
// round-trip through these endpoints; the UI never mutates geometry locally.

import type {
  NetworkArtifact, SegmentsArtifact, SessionEvent, StageName, StrokeIntent, Vec3,
} from "./types.js";

export class ConflictError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ConflictError";
  }
}

export class SessionClient {
  readonly base: string;
  sessionId: string | null = null;
  revision = 0;

  constructor(base = "") {
    this.base = base.replace(/\/$/, "");
  }

  private async request(path: string, init?: RequestInit): Promise<any> {
    const res = await fetch(this.base + path, init);
    if (res.status === 409) {
      throw new ConflictError(await res.text());
    }
    if (!res.ok) {
      throw new Error(`${init?.method ?? "GET"} ${path} -> ${res.status}: ${await res.text()}`);
    }
    return res.json();
  }

  private async mutate(path: string, body: Record<string, unknown>): Promise<any> {
    const out = await this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ ...body, revision: this.revision }),
    });
    if (typeof out.revision === "number") {
      this.revision = out.revision;
    }
    return out;
  }

  async createSession(cloud: Blob | Uint8Array, filename: string): Promise<string> {
    const form = new FormData();
    const blob = cloud instanceof Blob ? cloud : new Blob([cloud as BlobPart]);
    form.append("cloud", blob, filename);
    const out = await this.request("/sessions", { method: "POST", body: form });
    this.sessionId = out.id;
    this.revision = out.revision;
    return out.id;
  }

  async advanceStage(stage: StageName, params: Record<string, unknown> = {}) {
    return this.mutate(`/sessions/${this.sessionId}/stages/${stage}`, { params });
  }

  async applyStroke(intent: StrokeIntent, points: Vec3[]) {
    return this.mutate(`/sessions/${this.sessionId}/strokes`, { intent, points });
  }

  async setSymmetry(enabled: boolean, plane?: { point: Vec3; normal: Vec3 }, accept?: number[]) {
    return this.mutate(`/sessions/${this.sessionId}/symmetry`, { enabled, plane, accept });
  }

  async confirmLabels(accept: string[], reject: string[]) {
    return this.mutate(`/sessions/${this.sessionId}/labels`, { accept, reject });
  }

  async artifact<T = unknown>(stage: StageName): Promise<T> {
    return this.request(`/sessions/${this.sessionId}/artifacts/${stage}`);
  }

  async segments(): Promise<SegmentsArtifact> {
    return this.artifact<SegmentsArtifact>("extract");
  }

  async network(): Promise<NetworkArtifact> {
    return this.artifact<NetworkArtifact>("complete");
  }

  /** Fetch the event log past `since`, parsed from the SSE wire format. */
  async events(since = -1): Promise<SessionEvent[]> {
    const res = await fetch(`${this.base}/sessions/${this.sessionId}/events?since=${since}`);
    if (!res.ok) {
      throw new Error(`events -> ${res.status}`);
    }
    return parseEventStream(await res.text());
  }
}

/** Parse a complete server-sent-event body into ordered session events. */
export function parseEventStream(text: string): SessionEvent[] {
  const events: SessionEvent[] = [];
  for (const chunk of text.split("\n\n")) {
    const dataLines = chunk
      .split("\n")
      .filter((line) => line.startsWith("data: "))
      .map((line) => line.slice(6));
    if (!dataLines.length) continue;
    try {
      events.push(JSON.parse(dataLines.join("\n")) as SessionEvent);
    } catch {
      // ignore partial trailing chunks
    }
  }
  return events;
}

/** Merge freshly received events into a log, keeping revision order. */
export function mergeEvents(log: SessionEvent[], incoming: SessionEvent[]): SessionEvent[] {
  const merged = [...log];
  for (const ev of incoming) {
    const last = merged[merged.length - 1];
    if (!last || ev.revision >= last.revision) {
      merged.push(ev);
    }
  }
  return merged;
}
