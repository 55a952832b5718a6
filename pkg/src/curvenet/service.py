"""Interactive session service: the staged pipeline behind an HTTP JSON API.

A session owns one uploaded cloud and a linear history of stage artifacts.
The companion UI drives it by advancing stages, sketching guidance strokes,
confirming regularity labels, and toggling symmetry completion; progress and
results stream back as server-sent events ordered by revision.
"""

from __future__ import annotations

import asyncio
import json
import secrets
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request, UploadFile
from fastapi.responses import StreamingResponse

from .cloud import PointCloud, load_point_cloud
from .extract import (CurveSegment, ExtractionStats, GrowthParams, STROKE,
                      extract_segments, _point_polyline_distances)
from .regularity import (SymmetryPlane, complete_by_symmetry,
                         detect_groups_and_pairs, fit_symmetry_plane,
                         resample_polyline, apply_resample)
from .optimize import Weights, build_problem, default_weights, optimize
from .network import complete_network
from . import cloud as cloudmod
from .pipeline import (curve_to_json, detect_labels, label_to_json,
                       network_to_json, _jsonify)

STAGE_ORDER = ("detect", "extract", "regularize", "optimize", "complete")


@dataclass
class Session:
    id: str
    cloud: PointCloud
    revision: int = 0
    artifacts: dict = field(default_factory=dict)        # stage -> artifact json
    segments: list = field(default_factory=list)         # working curve list
    labels: list = field(default_factory=list)
    accepted: set = field(default_factory=set)
    rejected_fingerprints: set = field(default_factory=set)
    mirrored_pending: list = field(default_factory=list)  # curve indices awaiting accept
    features: object = None
    network: object = None
    events: list = field(default_factory=list)
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)
    params: dict = field(default_factory=dict)

    def bump(self) -> int:
        self.revision += 1
        return self.revision

    def emit(self, kind: str, payload) -> None:
        self.events.append({"type": kind, "revision": self.revision,
                            "payload": _jsonify(payload)})

    def stage_done(self, stage: str) -> bool:
        return stage in self.artifacts

    def completion_radius(self) -> float:
        override = self.params.get("completion_radius")
        return float(override) if override else 0.1 * self.cloud.bbox_diagonal

    def growth(self) -> GrowthParams:
        return GrowthParams(**self.params.get("growth", {}))


SESSIONS: dict[str, Session] = {}


def _get_session(sid: str) -> Session:
    if sid not in SESSIONS:
        raise HTTPException(404, f"unknown session {sid!r}")
    return SESSIONS[sid]


def _check_revision(session: Session, body: dict) -> None:
    expect = body.get("revision")
    if expect is not None and int(expect) != session.revision:
        raise HTTPException(409, f"revision conflict: session at {session.revision}, "
                                 f"request carries {expect}")


def create_app() -> FastAPI:
    app = FastAPI(title="curvenet session service")

    @app.post("/sessions")
    async def create_session(cloud: UploadFile):
        data = await cloud.read()
        suffix = Path(cloud.filename or "cloud.xyz").suffix or ".xyz"
        with tempfile.NamedTemporaryFile(suffix=suffix, delete=False) as fh:
            fh.write(data)
            tmp = fh.name
        try:
            parsed = load_point_cloud(tmp, suffix.lstrip(".").lower())
        except Exception as exc:
            raise HTTPException(400, f"cannot parse cloud: {exc}") from exc
        finally:
            Path(tmp).unlink(missing_ok=True)
        sid = secrets.token_hex(8)
        SESSIONS[sid] = Session(id=sid, cloud=parsed)
        SESSIONS[sid].emit("created", {"points": len(parsed)})
        return {"id": sid, "revision": 0, "points": len(parsed)}

    @app.post("/sessions/{sid}/stages/{stage}")
    async def advance_stage(sid: str, stage: str, request: Request):
        session = _get_session(sid)
        body = {}
        raw = await request.body()
        if raw:
            try:
                body = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise HTTPException(400, f"bad JSON body: {exc}") from exc
        if stage not in STAGE_ORDER:
            raise HTTPException(404, f"unknown stage {stage!r}")
        async with session.lock:
            _check_revision(session, body)
            idx = STAGE_ORDER.index(stage)
            for prev in STAGE_ORDER[:idx]:
                if not session.stage_done(prev):
                    raise HTTPException(409, f"stage {stage!r} requires {prev!r} first")
            params = body.get("params", {})
            session.params.update(params)
            try:
                artifact = _run_stage(session, stage)
            except HTTPException:
                raise
            except Exception as exc:
                session.emit("error", {"stage": stage, "detail": str(exc)})
                raise HTTPException(422, f"stage {stage!r} failed: {exc}") from exc
            session.artifacts[stage] = artifact
            rev = session.bump()
            session.emit("stage", {"stage": stage, "summary": _stage_summary(stage, artifact)})
            return {"revision": rev, "stage": stage,
                    "summary": _stage_summary(stage, artifact)}

    @app.get("/sessions/{sid}/artifacts/{stage}")
    async def get_artifact(sid: str, stage: str):
        session = _get_session(sid)
        if stage not in session.artifacts:
            raise HTTPException(404, f"stage {stage!r} has not run")
        return session.artifacts[stage]

    @app.post("/sessions/{sid}/strokes")
    async def apply_stroke(sid: str, request: Request):
        session = _get_session(sid)
        body = json.loads(await request.body())
        async with session.lock:
            _check_revision(session, body)
            if not session.stage_done("extract"):
                raise HTTPException(409, "strokes need the extract stage first")
            intent = body.get("intent")
            points = np.asarray(body.get("points", []), dtype=float)
            if points.ndim != 2 or points.shape[0] < 2 or points.shape[1] != 3 \
                    or not np.all(np.isfinite(points)):
                raise HTTPException(400, "stroke needs >= 2 finite 3D points")
            if intent not in ("bridge", "new-curve", "erase"):
                raise HTTPException(400, f"unknown stroke intent {intent!r}")
            affected, warning = _apply_stroke(session, intent, points)
            rev = session.bump()
            session.emit("stroke", {"intent": intent, "affected": affected,
                                    "warning": warning})
            out = {"revision": rev, "affected": affected}
            if warning:
                out["warning"] = warning
            return out

    @app.post("/sessions/{sid}/symmetry")
    async def set_symmetry(sid: str, request: Request):
        session = _get_session(sid)
        body = json.loads(await request.body())
        async with session.lock:
            _check_revision(session, body)
            if not session.segments:
                raise HTTPException(409, "symmetry needs extracted segments")
            result = _set_symmetry(session, body)
            rev = session.bump()
            session.emit("symmetry", result)
            return {"revision": rev, **result}

    @app.post("/sessions/{sid}/labels")
    async def confirm_labels(sid: str, request: Request):
        session = _get_session(sid)
        body = json.loads(await request.body())
        async with session.lock:
            _check_revision(session, body)
            if not session.labels:
                raise HTTPException(409, "no labels detected yet")
            known = {l.params["id"] for l in session.labels}
            accept = body.get("accept", [])
            reject = body.get("reject", [])
            for lid in list(accept) + list(reject):
                if lid not in known:
                    raise HTTPException(404, f"unknown label id {lid!r}")
            by_id = {l.params["id"]: l for l in session.labels}
            for lid in accept:
                session.accepted.add(lid)
                session.rejected_fingerprints.discard(by_id[lid].fingerprint())
            for lid in reject:
                session.accepted.discard(lid)
                session.rejected_fingerprints.add(by_id[lid].fingerprint())
            rev = session.bump()
            session.emit("labels", {"accepted": sorted(session.accepted),
                                    "rejected": len(session.rejected_fingerprints)})
            return {"revision": rev, "accepted": sorted(session.accepted)}

    @app.get("/sessions/{sid}/events")
    async def events(sid: str, since: int = -1, follow: bool = False):
        session = _get_session(sid)

        async def stream():
            sent = 0
            for ev in session.events:
                if ev["revision"] > since:
                    yield f"event: {ev['type']}\ndata: {json.dumps(ev, sort_keys=True)}\n\n"
                    sent += 1
            if follow:
                seen = len(session.events)
                for _ in range(600):
                    await asyncio.sleep(0.1)
                    while seen < len(session.events):
                        ev = session.events[seen]
                        seen += 1
                        yield f"event: {ev['type']}\ndata: {json.dumps(ev, sort_keys=True)}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def _stage_summary(stage, artifact):
    keys = {"detect": ("count",), "extract": ("stats",),
            "regularize": (), "optimize": ("final_total", "initial_total"),
            "complete": ()}
    summary = {k: artifact[k] for k in keys.get(stage, ()) if k in artifact}
    if stage == "regularize":
        summary["labels"] = len(artifact["labels"])
    if stage == "complete":
        summary["curves"] = len(artifact["curves"])
        summary["junctions"] = len(artifact["junctions"])
    return summary


def _run_stage(session: Session, stage: str) -> dict:
    p = session.params
    if stage == "detect":
        session.features = cloudmod.detect_feature_points(
            session.cloud, int(p.get("k", 16)), float(p.get("sigma_t", 0.04)))
        return {"stage": "detect", "count": len(session.features),
                "indices": session.features.indices.tolist(),
                "variations": session.features.variations.tolist()}
    if stage == "extract":
        stats = ExtractionStats()
        session.segments = extract_segments(session.features, session.cloud,
                                            session.growth(), stats)
        return {"stage": "extract", "stats": stats.__dict__,
                "curves": [curve_to_json(s, i) for i, s in enumerate(session.segments)]}
    if stage == "regularize":
        tol = float(p.get("regularity_tol", 0.02))
        labels = detect_labels(session.segments, tol, session.cloud.bbox_diagonal,
                               p.get("group_tol"))
        labels = [l for l in labels
                  if l.fingerprint() not in session.rejected_fingerprints]
        session.labels = labels
        session.accepted = {l.params["id"] for l in labels}   # default accept all
        return {"stage": "regularize",
                "labels": [label_to_json(l, l.params["id"]) for l in labels]}
    if stage == "optimize":
        weights = p.get("weights", "scan")
        weights = default_weights(weights) if isinstance(weights, str) else Weights(**weights)
        active = [l for l in session.labels if l.params["id"] in session.accepted]
        problem = build_problem(session.segments, weights, active,
                                cloud=session.cloud, features=session.features,
                                alignment_radius=p.get("alignment_radius"),
                                tol=float(p.get("regularity_tol", 0.02)))
        result = optimize(problem, max_iters=int(p.get("max_iters", 200)),
                          outer_iters=int(p.get("outer_iters", 5)))
        session.segments = result.segments
        by_outer: dict[int, list] = {}
        for h in result.history:
            by_outer.setdefault(h["outer"], []).append(h)
        for outer in sorted(by_outer):
            session.emit("optimize-progress", {
                "outer": outer, "iterates": by_outer[outer],
                "total": by_outer[outer][-1]["total"]})
        return {"stage": "optimize", "history": result.history,
                "initial_total": result.initial.total, "final_total": result.final.total,
                "curves": [curve_to_json(s, i) for i, s in enumerate(result.segments)]}
    if stage == "complete":
        session.network = complete_network(session.segments,
                                           lam=float(p.get("lambda_merge", 0.9)),
                                           s_max=session.completion_radius())
        out = network_to_json(session.network)
        out["stage"] = "complete"
        return out
    raise ValueError(stage)


def _invalidate_downstream(session: Session, from_stage: str) -> None:
    idx = STAGE_ORDER.index(from_stage)
    for stage in STAGE_ORDER[idx:]:
        session.artifacts.pop(stage, None)
    session.artifacts["extract"] = {
        "stage": "extract", "stats": {"edited": True},
        "curves": [curve_to_json(s, i) for i, s in enumerate(session.segments)]}


def _apply_stroke(session: Session, intent: str, points: np.ndarray):
    radius = session.growth().radius(session.cloud)
    snap_radius = 2.0 * session.completion_radius()
    median = session.cloud.median_spacing()
    affected: list[int] = []
    warning = None

    if intent == "bridge":
        ends = []
        for ci, seg in enumerate(session.segments):
            if seg.closed:
                continue
            ends.append(((ci, "head"), seg.points[0]))
            ends.append(((ci, "tail"), seg.points[-1]))
        best = [None, None]
        for slot, tip in ((0, points[0]), (1, points[-1])):
            for key, pos in ends:
                d = float(np.linalg.norm(pos - tip))
                if d <= snap_radius and (best[slot] is None or d < best[slot][0]):
                    best[slot] = (d, key)
        if best[0] is None or best[1] is None or best[0][1][0] == best[1][1][0]:
            return [], "bridge endpoints found no snappable curve ends"
        (ca, enda), (cb, endb) = best[0][1], best[1][1]
        a, b = session.segments[ca], session.segments[cb]
        pts_a = a.points if enda == "tail" else a.points[::-1]
        prov_a = a.provenance if enda == "tail" else a.provenance[::-1]
        pts_b = b.points if endb == "head" else b.points[::-1]
        prov_b = b.provenance if endb == "head" else b.provenance[::-1]
        # resample the stroke at the cloud's median spacing
        m = max(2, int(np.ceil(_polyline_len(points) / max(median, 1e-12))))
        ia, wa = resample_polyline(points, m)
        stroke = apply_resample(points, ia, wa)
        interior = stroke[1:-1] if len(stroke) > 2 else np.zeros((0, 3))
        new_pts = np.vstack([pts_a, interior, pts_b])
        new_prov = np.concatenate([prov_a, np.full(len(interior), STROKE, dtype=np.uint8), prov_b])
        merged = CurveSegment(new_pts, closed=False, provenance=new_prov)
        keep = [s for i, s in enumerate(session.segments) if i not in (ca, cb)]
        keep.append(merged)
        session.segments = keep
        affected = [len(keep) - 1]
    elif intent == "new-curve":
        m = max(2, int(np.ceil(_polyline_len(points) / max(median, 1e-12))))
        ia, wa = resample_polyline(points, m)
        stroke = apply_resample(points, ia, wa)
        if session.features is not None and len(session.features):
            fpos = session.features.positions(session.cloud)
            from scipy.spatial import cKDTree
            tree = cKDTree(fpos)
            d, idx = tree.query(stroke)
            snap = d <= radius
            stroke[snap] = fpos[idx[snap]]
        dedup = [stroke[0]]
        for q in stroke[1:]:
            if np.linalg.norm(q - dedup[-1]) > 1e-9:
                dedup.append(q)
        seg = CurveSegment(np.array(dedup),
                           provenance=np.full(len(dedup), STROKE, dtype=np.uint8))
        session.segments.append(seg)
        affected = [len(session.segments) - 1]
    else:  # erase
        keep, removed = [], []
        for i, seg in enumerate(session.segments):
            frac = float(np.mean(_point_polyline_distances(seg.points, points) <= radius))
            if frac > 0.5:
                removed.append(i)
            else:
                keep.append(seg)
        session.segments = keep
        affected = removed

    _invalidate_downstream(session, "regularize")
    return affected, warning


def _polyline_len(points: np.ndarray) -> float:
    return float(np.linalg.norm(np.diff(points, axis=0), axis=1).sum())


def _set_symmetry(session: Session, body: dict) -> dict:
    enabled = bool(body.get("enabled", False))
    accept = set(body.get("accept", []))
    if accept:
        session.mirrored_pending = [i for i in session.mirrored_pending
                                    if i not in accept]
    if not enabled:
        if session.mirrored_pending:
            keep = [s for i, s in enumerate(session.segments)
                    if i not in set(session.mirrored_pending)]
            session.segments = keep
            session.mirrored_pending = []
            _invalidate_downstream(session, "regularize")
        return {"enabled": False, "mirrored": []}
    plane_spec = body.get("plane")
    if plane_spec:
        plane = SymmetryPlane(point=np.array(plane_spec["point"], dtype=float),
                              normal=np.array(plane_spec["normal"], dtype=float))
    else:
        tol = float(session.params.get("regularity_tol", 0.02))
        gtol = session.params.get("group_tol") or min(tol, 0.03)
        pairs = [l for l in detect_groups_and_pairs(session.segments, gtol,
                                                    session.cloud.bbox_diagonal)
                 if l.kind == "SymmetricPair"]
        if not pairs:
            raise HTTPException(422, "cannot fit symmetry plane: no symmetric pairs "
                                     "detected and no plane supplied")
        plane = fit_symmetry_plane(session.segments, pairs)
    tol_abs = float(session.params.get("mirror_tol", 0.02)) * session.cloud.bbox_diagonal
    new_curves = complete_by_symmetry(session.segments, plane, tol_abs)
    start = len(session.segments)
    session.segments = session.segments + new_curves
    session.mirrored_pending = list(range(start, start + len(new_curves)))
    if new_curves:
        _invalidate_downstream(session, "regularize")
    return {"enabled": True,
            "plane": {"point": plane.point.tolist(), "normal": plane.normal.tolist()},
            "mirrored": session.mirrored_pending}


app = create_app()


def main() -> None:
    import uvicorn

    uvicorn.run(app, host="127.0.0.1", port=8008)


if __name__ == "__main__":
    main()
