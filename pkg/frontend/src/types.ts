// Payload shapes of the curvenet session service (the pipeline JSON schema).

export type Vec3 = [number, number, number];

export type Provenance = "detected" | "stroke" | "mirrored" | "synthesized-junction";

export interface CurveJson {
  id: number;
  closed: boolean;
  points: Vec3[];
  provenance: Provenance[];
}

export interface JunctionJson {
  position: Vec3;
  ends: [number, "head" | "tail"][];
}

export interface NetworkArtifact {
  curves: CurveJson[];
  junctions: JunctionJson[];
  open_ends: [number, "head" | "tail"][];
}

export interface FeatureArtifact {
  count: number;
  indices: number[];
  variations: number[];
}

export interface SegmentsArtifact {
  curves: CurveJson[];
  stats: Record<string, number | boolean>;
}

export interface LabelJson {
  id: string;
  kind: "Line" | "Circle" | "CoplanarGroup" | "ParallelPair" | "SymmetricPair";
  members: number[];
  params: Record<string, unknown>;
}

export interface OptimizeIterate {
  outer: number;
  iterate: number;
  total: number;
  terms: Record<string, number>;
}

export interface SessionEvent {
  type: string;
  revision: number;
  payload: Record<string, unknown>;
}

export type StageName = "detect" | "extract" | "regularize" | "optimize" | "complete";

export const STAGES: StageName[] = ["detect", "extract", "regularize", "optimize", "complete"];

export type StrokeIntent = "bridge" | "new-curve" | "erase";
