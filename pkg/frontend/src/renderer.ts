// three.js scene: point-sprite cloud, provenance-colored curves, junction
// markers. Red detected curves and green strokes mirror the session's
// editing vocabulary; mirrored curves render dashed-looking gray-blue until
// accepted.

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";
import type { CurveJson, JunctionJson, Provenance, Vec3 } from "./types.js";

const PROVENANCE_COLORS: Record<Provenance, number> = {
  "detected": 0xd63333,
  "stroke": 0x2faf4e,
  "mirrored": 0x7a8fd4,
  "synthesized-junction": 0xd6a433,
};

export class SceneView {
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  readonly renderer: THREE.WebGLRenderer;
  readonly controls: OrbitControls;
  private cloudObject: THREE.Points | null = null;
  private curveGroup = new THREE.Group();
  private junctionGroup = new THREE.Group();
  private featureObject: THREE.Points | null = null;

  constructor(canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.camera = new THREE.PerspectiveCamera(50, canvas.width / canvas.height, 0.001, 100);
    this.camera.position.set(2.2, 1.6, 2.2);
    this.controls = new OrbitControls(this.camera, canvas);
    this.scene.background = new THREE.Color(0x10141a);
    this.scene.add(this.curveGroup, this.junctionGroup);
    const loop = () => {
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
      requestAnimationFrame(loop);
    };
    requestAnimationFrame(loop);
  }

  setCloud(points: Vec3[]): void {
    if (this.cloudObject) this.scene.remove(this.cloudObject);
    const geo = new THREE.BufferGeometry();
    geo.setAttribute("position", new THREE.Float32BufferAttribute(points.flat(), 3));
    this.cloudObject = new THREE.Points(
      geo, new THREE.PointsMaterial({ color: 0x5f6b7a, size: 0.004 }));
    this.scene.add(this.cloudObject);
    const box = new THREE.Box3().setFromObject(this.cloudObject);
    box.getCenter(this.controls.target);
  }

  setFeaturePoints(cloud: Vec3[], indices: number[]): void {
    if (this.featureObject) this.scene.remove(this.featureObject);
    const pts = indices.map((i) => cloud[i]);
    const geo = new THREE.BufferGeometry();
    geo.setAttribute("position", new THREE.Float32BufferAttribute(pts.flat(), 3));
    this.featureObject = new THREE.Points(
      geo, new THREE.PointsMaterial({ color: 0x3fa7d6, size: 0.007 }));
    this.scene.add(this.featureObject);
  }

  setCurves(curves: CurveJson[], pendingMirrored: Set<number> = new Set()): void {
    this.curveGroup.clear();
    for (const curve of curves) {
      // split the polyline into runs of equal provenance so each run can
      // carry its own color
      let runStart = 0;
      for (let i = 1; i <= curve.points.length; i++) {
        const boundary = i === curve.points.length
          || curve.provenance[i] !== curve.provenance[runStart];
        if (!boundary) continue;
        const run = curve.points.slice(Math.max(0, runStart - 1), i + 1);
        const prov = curve.provenance[runStart];
        const color = pendingMirrored.has(curve.id)
          ? 0x4a5a9a : PROVENANCE_COLORS[prov] ?? 0xffffff;
        const geo = new THREE.BufferGeometry();
        geo.setAttribute("position", new THREE.Float32BufferAttribute(run.flat(), 3));
        this.curveGroup.add(new THREE.Line(
          geo, new THREE.LineBasicMaterial({ color, linewidth: 2 })));
        runStart = i;
      }
      if (curve.closed && curve.points.length > 1) {
        const closing = [curve.points[curve.points.length - 1], curve.points[0]];
        const geo = new THREE.BufferGeometry();
        geo.setAttribute("position", new THREE.Float32BufferAttribute(closing.flat(), 3));
        this.curveGroup.add(new THREE.Line(
          geo, new THREE.LineBasicMaterial({ color: PROVENANCE_COLORS.detected })));
      }
    }
  }

  setJunctions(junctions: JunctionJson[]): void {
    this.junctionGroup.clear();
    const geo = new THREE.SphereGeometry(0.012, 12, 12);
    const mat = new THREE.MeshBasicMaterial({ color: 0xffd23f });
    for (const j of junctions) {
      const marker = new THREE.Mesh(geo, mat);
      marker.position.set(...j.position);
      this.junctionGroup.add(marker);
    }
  }

  setVisibility(layer: "cloud" | "features" | "curves" | "junctions", visible: boolean): void {
    if (layer === "cloud" && this.cloudObject) this.cloudObject.visible = visible;
    if (layer === "features" && this.featureObject) this.featureObject.visible = visible;
    if (layer === "curves") this.curveGroup.visible = visible;
    if (layer === "junctions") this.junctionGroup.visible = visible;
  }

  /** Current camera state in the shape the unprojection math expects. */
  cameraState(width: number, height: number) {
    return {
      position: this.camera.position.toArray() as Vec3,
      target: this.controls.target.toArray() as Vec3,
      up: this.camera.up.toArray() as Vec3,
      fovDeg: this.camera.fov,
      width,
      height,
    };
  }
}
