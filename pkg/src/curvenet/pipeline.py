"""Batch pipeline: staged execution with deterministic JSON artifacts.

Stages run in the fixed order detect -> extract -> regularize -> optimize ->
complete.  Every stage writes one canonical JSON artifact (stable key order,
native floats) so runs with identical configuration are byte-identical and
artifacts can be diffed or reused as checkpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
import json
import time

import numpy as np

from . import cloud as cloudmod
from .cloud import PointCloud, FeaturePointSet, load_point_cloud
from .extract import (CurveSegment, ExtractionStats, GrowthParams, extract_segments,
                      PROVENANCE_NAMES, PROVENANCE_CODES)
from .regularity import (RegularityLabel, SymmetryPlane, classify_circle, classify_line,
                         complete_by_symmetry, detect_groups_and_pairs, fit_symmetry_plane)
from .optimize import (Weights, build_problem, default_weights, optimize, refit_labels,
                       energy_and_gradient)
from .network import CurveNetwork, Junction, complete_network

STAGES = ("detect", "extract", "regularize", "optimize", "complete")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    input: str
    stages: list[str]
    output_dir: str
    format: str | None = None
    k: int = 16
    sigma_t: float = 0.04
    growth: GrowthParams = field(default_factory=GrowthParams)
    regularity_tol: float = 0.02
    group_tol: float | None = None    # coplanar/pair tolerance; defaults to
                                      # min(regularity_tol, 0.03)
    weights: Weights = field(default_factory=lambda: default_weights("scan"))
    lambda_merge: float = 0.9
    completion_radius: float | None = None    # absolute; default 0.1 * bbox diagonal
    alignment_radius: float | None = None     # absolute; default 2 * median spacing
    symmetry_enabled: bool = False
    symmetry_plane: SymmetryPlane | None = None
    mirror_tol: float = 0.02                  # counterpart threshold, fraction of diagonal
    seed: int = 0
    resume: bool = False
    max_iters: int = 200
    outer_iters: int = 5
    grad_tol: float | None = None

    _KEYS = {"input", "stages", "output_dir", "format", "k", "sigma_t", "growth",
             "regularity_tol", "group_tol", "weights", "lambda_merge",
             "completion_radius", "alignment_radius", "symmetry", "mirror_tol",
             "seed", "resume", "max_iters", "outer_iters", "grad_tol"}

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        unknown = set(data) - cls._KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for req in ("input", "stages", "output_dir"):
            if req not in data:
                raise ConfigError(f"missing required config key {req!r}")
        stages = list(data["stages"])
        if tuple(stages) != STAGES[:len(stages)] or not stages:
            raise ConfigError(f"stages must be a non-empty prefix of {list(STAGES)}")
        try:
            growth = GrowthParams(**data.get("growth", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad growth params: {exc}") from exc
        wspec = data.get("weights", "scan")
        try:
            weights = default_weights(wspec) if isinstance(wspec, str) else Weights(**wspec)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad weights: {exc}") from exc
        sym = data.get("symmetry", {}) or {}
        if set(sym) - {"enabled", "plane"}:
            raise ConfigError(f"unknown symmetry keys: {sorted(set(sym) - {'enabled', 'plane'})}")
        plane = None
        if sym.get("plane"):
            try:
                plane = SymmetryPlane(point=np.array(sym["plane"]["point"], dtype=float),
                                      normal=np.array(sym["plane"]["normal"], dtype=float))
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"bad symmetry plane: {exc}") from exc
        cfg = cls(
            input=str(data["input"]), stages=stages, output_dir=str(data["output_dir"]),
            format=data.get("format"), k=int(data.get("k", 16)),
            sigma_t=float(data.get("sigma_t", 0.04)), growth=growth,
            regularity_tol=float(data.get("regularity_tol", 0.02)),
            group_tol=data.get("group_tol"), weights=weights,
            lambda_merge=float(data.get("lambda_merge", 0.9)),
            completion_radius=data.get("completion_radius"),
            alignment_radius=data.get("alignment_radius"),
            symmetry_enabled=bool(sym.get("enabled", False)), symmetry_plane=plane,
            mirror_tol=float(data.get("mirror_tol", 0.02)),
            seed=int(data.get("seed", 0)), resume=bool(data.get("resume", False)),
            max_iters=int(data.get("max_iters", 200)),
            outer_iters=int(data.get("outer_iters", 5)),
            grad_tol=data.get("grad_tol"),
        )
        for name, value in (("k", cfg.k), ("sigma_t", cfg.sigma_t),
                            ("regularity_tol", cfg.regularity_tol),
                            ("lambda_merge", cfg.lambda_merge), ("mirror_tol", cfg.mirror_tol)):
            if value <= 0 and name != "sigma_t":
                raise ConfigError(f"{name} must be positive")
        return cfg

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)


# --- canonical JSON -----------------------------------------------------------

def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonify(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def dump_json(obj, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonify(obj), fh, sort_keys=True, indent=1)
        fh.write("\n")


def curve_to_json(seg: CurveSegment, cid: int) -> dict:
    return {"id": cid, "closed": bool(seg.closed),
            "points": seg.points.tolist(),
            "provenance": [PROVENANCE_NAMES[int(p)] for p in seg.provenance]}


def curve_from_json(data: dict) -> CurveSegment:
    prov = np.array([PROVENANCE_CODES[p] for p in data["provenance"]], dtype=np.uint8)
    return CurveSegment(np.array(data["points"], dtype=float),
                        closed=bool(data["closed"]), provenance=prov)


def label_to_json(lab: RegularityLabel, lid: str) -> dict:
    params = {}
    for key, value in lab.params.items():
        params[key] = _jsonify(value)
    return {"id": lid, "kind": lab.kind, "members": list(lab.members), "params": params}


def label_from_json(data: dict) -> RegularityLabel:
    params = dict(data["params"])
    for key in ("t", "center", "normal", "point", "offset"):
        if key in params and isinstance(params[key], list):
            params[key] = np.array(params[key], dtype=float)
    params["id"] = data["id"]
    return RegularityLabel(kind=data["kind"], members=tuple(data["members"]), params=params)


def network_to_json(net: CurveNetwork) -> dict:
    return {
        "curves": [curve_to_json(c, i) for i, c in enumerate(net.curves)],
        "junctions": [{"position": j.position.tolist(),
                       "ends": [[c, e] for c, e in j.ends]} for j in net.junctions],
        "adjacency": [{"curve": c, "end": e, "junction": jid}
                      for (c, e), jid in sorted(net.adjacency.items())],
        "open_ends": [[c, e] for c, e in net.open_ends],
        "notes": list(net.notes),
    }


def network_from_json(data: dict) -> CurveNetwork:
    curves = [curve_from_json(c) for c in data["curves"]]
    junctions = [Junction(position=np.array(j["position"], dtype=float),
                          ends=[(int(c), str(e)) for c, e in j["ends"]])
                 for j in data["junctions"]]
    adjacency = {(int(a["curve"]), str(a["end"])): int(a["junction"])
                 for a in data["adjacency"]}
    return CurveNetwork(curves=curves, junctions=junctions, adjacency=adjacency,
                        open_ends=[(int(c), str(e)) for c, e in data["open_ends"]],
                        notes=list(data.get("notes", [])))


# --- staged execution ---------------------------------------------------------

ARTIFACT_FILES = {"detect": "features.json", "extract": "segments.json",
                  "regularize": "labels.json", "optimize": "optimized.json",
                  "complete": "network.json"}


@dataclass
class PipelineState:
    cloud: PointCloud
    config: PipelineConfig
    features: FeaturePointSet | None = None
    segments: list[CurveSegment] | None = None
    labels: list[RegularityLabel] | None = None
    optimized: list[CurveSegment] | None = None
    history: list | None = None
    network: CurveNetwork | None = None

    def completion_radius(self) -> float:
        if self.config.completion_radius is not None:
            return float(self.config.completion_radius)
        return 0.1 * self.cloud.bbox_diagonal


def detect_labels(segments: list[CurveSegment], tol: float,
                  bbox_diagonal: float,
                  group_tol: float | None = None) -> list[RegularityLabel]:
    """Classify every segment and all pairs/groups; assign stable label ids.

    `tol` applies to single-curve labels (line, circle); `group_tol` to
    coplanar groups and pairs, whose deviation scales (bbox diagonal, pair
    length) make a lax tolerance admit spurious constraint planes.
    """
    if group_tol is None:
        group_tol = min(tol, 0.03)
    labels: list[RegularityLabel] = []
    for i, seg in enumerate(segments):
        lab = classify_line(seg, tol) if not seg.closed else classify_circle(seg, tol)
        if lab is not None:
            lab.members = (i,)
            labels.append(lab)
    labels.extend(detect_groups_and_pairs(segments, group_tol, bbox_diagonal))
    for n, lab in enumerate(labels):
        lab.params["id"] = f"{lab.kind.lower()}-{n}"
    return labels


def _stage_detect(state: PipelineState) -> dict:
    cfg = state.config
    state.features = cloudmod.detect_feature_points(state.cloud, cfg.k, cfg.sigma_t)
    return {"stage": "detect", "k": cfg.k, "sigma_t": cfg.sigma_t,
            "count": len(state.features),
            "indices": state.features.indices.tolist(),
            "variations": state.features.variations.tolist(),
            "median_spacing": state.cloud.median_spacing(),
            "bbox_diagonal": state.cloud.bbox_diagonal}


def _load_detect(state: PipelineState, data: dict) -> None:
    state.features = FeaturePointSet(indices=np.array(data["indices"], dtype=int),
                                     variations=np.array(data["variations"], dtype=float),
                                     threshold=float(data["sigma_t"]), k=int(data["k"]))


def _stage_extract(state: PipelineState) -> dict:
    cfg = state.config
    stats = ExtractionStats()
    segments = extract_segments(state.features, state.cloud, cfg.growth, stats)
    mirrored = 0
    if cfg.symmetry_enabled:
        plane = cfg.symmetry_plane
        if plane is None:
            gtol = cfg.group_tol if cfg.group_tol is not None else min(cfg.regularity_tol, 0.03)
            pairs = [l for l in detect_groups_and_pairs(segments, gtol,
                                                        state.cloud.bbox_diagonal)
                     if l.kind == "SymmetricPair"]
            if not pairs:
                raise StageError("extract", "symmetry enabled but no symmetric pairs "
                                            "detected and no plane supplied")
            plane = fit_symmetry_plane(segments, pairs)
        new_curves = complete_by_symmetry(segments, plane,
                                          cfg.mirror_tol * state.cloud.bbox_diagonal)
        segments = segments + new_curves
        mirrored = len(new_curves)
    state.segments = segments
    return {"stage": "extract",
            "curves": [curve_to_json(s, i) for i, s in enumerate(segments)],
            "stats": {"segments": stats.segments, "dropped_short": stats.dropped_short,
                      "consumed_points": stats.consumed_points, "mirrored": mirrored}}


def _load_extract(state: PipelineState, data: dict) -> None:
    state.segments = [curve_from_json(c) for c in data["curves"]]


def _stage_regularize(state: PipelineState) -> dict:
    cfg = state.config
    state.labels = detect_labels(state.segments, cfg.regularity_tol,
                                 state.cloud.bbox_diagonal, cfg.group_tol)
    return {"stage": "regularize",
            "labels": [label_to_json(l, l.params["id"]) for l in state.labels]}


def _load_regularize(state: PipelineState, data: dict) -> None:
    state.labels = [label_from_json(l) for l in data["labels"]]


def _stage_optimize(state: PipelineState) -> dict:
    cfg = state.config
    problem = build_problem(state.segments, cfg.weights, state.labels,
                            cloud=state.cloud, features=state.features,
                            alignment_radius=cfg.alignment_radius,
                            tol=cfg.regularity_tol)
    result = optimize(problem, max_iters=cfg.max_iters, grad_tol=cfg.grad_tol,
                      outer_iters=cfg.outer_iters)
    state.optimized = result.segments
    state.history = result.history
    # refit label parameters on the final geometry for reporting
    final_x = np.vstack([s.points for s in result.segments]).ravel()
    refit_labels(problem, final_x)
    refit = []
    for term in problem.labels:
        entry = {"id": term.label_id, "kind": term.kind, "members": list(term.members),
                 "mu": term.mu}
        if term.kind == "Circle":
            pts = final_x.reshape(-1, 3)[term.data["slice"]]
            from .regularity import fit_circle
            center, radius, normal = fit_circle(pts)
            entry.update({"center": center.tolist(), "radius": radius,
                          "normal": normal.tolist()})
        elif term.kind == "Line":
            entry["t"] = term.data["t"].tolist()
        refit.append(entry)
    return {"stage": "optimize",
            "curves": [curve_to_json(s, i) for i, s in enumerate(result.segments)],
            "history": result.history,
            "initial_total": result.initial.total,
            "final_total": result.final.total,
            "final_terms": result.final.per_term,
            "line_search_failed": result.line_search_failed,
            "outer_iterations": result.outer_iterations,
            "labels_refit": refit}


def _load_optimize(state: PipelineState, data: dict) -> None:
    state.optimized = [curve_from_json(c) for c in data["curves"]]
    state.history = data["history"]


def _stage_complete(state: PipelineState) -> dict:
    cfg = state.config
    radius = state.completion_radius()
    curves = state.optimized if state.optimized is not None else state.segments
    state.network = complete_network(curves, lam=cfg.lambda_merge, s_max=radius,
                                     bridge_angle=45.0)
    out = network_to_json(state.network)
    out["stage"] = "complete"
    out["completion_radius"] = radius
    out["lambda"] = cfg.lambda_merge
    # classify the completed curves: gaps bridged and loops closed during
    # completion can reveal regularities the pre-optimization pass missed
    final_labels = []
    for i, seg in enumerate(state.network.curves):
        lab = classify_line(seg, cfg.regularity_tol) if not seg.closed \
            else classify_circle(seg, cfg.regularity_tol)
        if lab is not None:
            lab.members = (i,)
            final_labels.append(label_to_json(lab, f"final-{lab.kind.lower()}-{i}"))
    out["curve_labels"] = final_labels
    return out


def _load_complete(state: PipelineState, data: dict) -> None:
    state.network = network_from_json(data)


_STAGE_FUNCS = {"detect": (_stage_detect, _load_detect),
                "extract": (_stage_extract, _load_extract),
                "regularize": (_stage_regularize, _load_regularize),
                "optimize": (_stage_optimize, _load_optimize),
                "complete": (_stage_complete, _load_complete)}

_STAGE_NEEDS = {"detect": (), "extract": ("features",), "regularize": ("segments",),
                "optimize": ("segments", "labels"), "complete": ("optimized",)}


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute the configured stage prefix; returns the summary report."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        cloud = load_point_cloud(config.input, config.format)
    except FileNotFoundError as exc:
        raise StageError("load", f"input not found: {config.input}") from exc
    except Exception as exc:
        raise StageError("load", str(exc)) from exc
    state = PipelineState(cloud=cloud, config=config)

    report = {"input": config.input, "seed": config.seed, "stages": [],
              "n_points": len(cloud), "bbox_diagonal": cloud.bbox_diagonal}
    for stage in config.stages:
        run_fn, load_fn = _STAGE_FUNCS[stage]
        artifact_path = out_dir / ARTIFACT_FILES[stage]
        t0 = time.perf_counter()
        if config.resume and artifact_path.exists():
            with open(artifact_path, "r", encoding="utf-8") as fh:
                load_fn(state, json.load(fh))
            report["stages"].append({"stage": stage, "reused": True,
                                     "seconds": time.perf_counter() - t0})
            continue
        for need in _STAGE_NEEDS[stage]:
            value = getattr(state, need)
            if value is None and need == "optimized":
                value = state.segments
            if value is None:
                raise StageError(stage, f"missing prerequisite artifact {need!r}")
        try:
            artifact = run_fn(state)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(stage, str(exc)) from exc
        dump_json(artifact, artifact_path)
        entry = {"stage": stage, "reused": False, "seconds": time.perf_counter() - t0}
        if stage == "detect":
            entry["feature_points"] = len(state.features)
        elif stage == "extract":
            entry["segments"] = len(state.segments)
        elif stage == "regularize":
            entry["labels"] = len(state.labels)
        elif stage == "optimize":
            entry["final_total"] = artifact["final_total"]
        elif stage == "complete":
            entry["curves"] = len(state.network.curves)
            entry["junctions"] = len(state.network.junctions)
        report["stages"].append(entry)
    dump_json(report, out_dir / "report.json")
    return report
