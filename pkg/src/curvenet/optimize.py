"""Joint optimization of all curve points under data and regularity energies.

The objective is a weighted sum of fidelity (stay near initial positions),
alignment (pull toward variation-weighted feature centroids), and smoothness
(small second differences), augmented with per-label regularity penalties
(line, circle, coplanar, symmetry, parallelism) scaled by multipliers.  The
inner minimization is L-BFGS with analytic gradients; an outer loop refits
label parameters from the current geometry and doubles the multiplier of any
label whose residual still exceeds its target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .cloud import PointCloud, FeaturePointSet
from .extract import CurveSegment
from .regularity import (RegularityLabel, chord_weights, fit_circle, fit_plane,
                         resample_polyline)

TERM_NAMES = ("fidelity", "alignment", "smooth",
              "line", "circle", "coplanar", "symmetry", "parallel")

_KIND_TO_TERM = {"Line": "line", "Circle": "circle", "CoplanarGroup": "coplanar",
                 "SymmetricPair": "symmetry", "ParallelPair": "parallel"}


class NonFiniteEnergyError(ArithmeticError):
    def __init__(self, term):
        super().__init__(f"non-finite energy in term {term!r}")
        self.term = term


@dataclass
class Weights:
    fidelity: float = 0.1
    alignment: float = 1.0
    smooth: float = 1.0

    def __post_init__(self):
        if min(self.fidelity, self.alignment, self.smooth) < 0:
            raise ValueError("weights must be non-negative")
        if self.fidelity <= 0 and self.alignment <= 0:
            raise ValueError("fidelity or alignment must be positive (translation gauge)")


def default_weights(preset: str) -> Weights:
    """Weight presets: `scan` for noisy captures, `synthetic` for clean data."""
    if preset == "scan":
        return Weights(0.1, 1.0, 1.0)
    if preset == "synthetic":
        return Weights(0.1, 1.0, 0.5)
    raise ValueError(f"unknown weight preset {preset!r}")


@dataclass
class LabelTerm:
    """A regularity label resolved against the flat variable layout."""

    kind: str
    members: tuple[int, ...]
    mu: float = 1.0
    mu_cap: float = 64.0
    reversed_second: bool = False
    target_rms: float = 0.0
    scale: float = 1.0
    data: dict = field(default_factory=dict)   # refit geometry parameters
    label_id: str = ""


@dataclass
class EnergyBreakdown:
    total: float
    per_term: dict[str, float]
    per_label: list[dict]

    def as_dict(self) -> dict:
        return {"total": self.total,
                "terms": dict(self.per_term),
                "labels": [dict(l) for l in self.per_label]}


@dataclass
class OptimizationProblem:
    segments: list[CurveSegment]
    initial: np.ndarray          # (N, 3)
    targets: np.ndarray          # (N, 3)
    weights: Weights
    labels: list[LabelTerm]
    offsets: np.ndarray          # per-segment start into the flat point list
    bbox_diagonal: float
    _smooth_idx: tuple = field(default=None, repr=False)

    @property
    def n_points(self) -> int:
        return len(self.initial)

    def segment_slice(self, i: int) -> slice:
        start = int(self.offsets[i])
        stop = int(self.offsets[i + 1]) if i + 1 < len(self.segments) else self.n_points
        return slice(start, stop)

    def smooth_indices(self):
        if self._smooth_idx is None:
            i0, i1, i2 = [], [], []
            for s, seg in enumerate(self.segments):
                sl = self.segment_slice(s)
                idx = np.arange(sl.start, sl.stop)
                n = len(idx)
                if seg.closed:
                    j = np.arange(n)
                    i0.append(idx[(j - 1) % n]); i1.append(idx[j]); i2.append(idx[(j + 1) % n])
                elif n >= 3:
                    j = np.arange(1, n - 1)
                    i0.append(idx[j - 1]); i1.append(idx[j]); i2.append(idx[j + 1])
            if i0:
                object.__setattr__(self, "_smooth_idx",
                                   (np.concatenate(i0), np.concatenate(i1), np.concatenate(i2)))
            else:
                empty = np.zeros(0, dtype=int)
                object.__setattr__(self, "_smooth_idx", (empty, empty, empty))
        return self._smooth_idx


def alignment_targets(cloud: PointCloud, features: FeaturePointSet,
                      segments: list[CurveSegment], radius: float) -> np.ndarray:
    """Variation-weighted centroid of feature points near each curve point.

    Curve points with no feature point within `radius` target themselves,
    which makes their alignment pull vanish.
    """
    pts = np.vstack([s.points for s in segments])
    targets = pts.copy()
    if len(features) == 0:
        return targets
    fpos = features.positions(cloud)
    fsig = features.variations
    tree = cKDTree(fpos)
    hits = tree.query_ball_point(pts, radius)
    for i, idx in enumerate(hits):
        if not idx:
            continue
        w = fsig[idx]
        tw = w.sum()
        if tw > 0:
            targets[i] = (w[:, None] * fpos[idx]).sum(axis=0) / tw
    return targets


def build_problem(segments: list[CurveSegment], weights: Weights,
                  labels: list[RegularityLabel] | None = None,
                  cloud: PointCloud | None = None,
                  features: FeaturePointSet | None = None,
                  alignment_radius: float | None = None,
                  tol: float = 0.02,
                  target_factor: float = 0.25,
                  mu_cap: float = 64.0,
                  pair_mu_cap: float = 4.0) -> OptimizationProblem:
    """Assemble the stacked problem; label parameters are fitted on first refit.

    Pair labels (symmetry, parallelism) couple absolute positions of two
    curves through a resampled correspondence, so their multipliers are capped
    much lower than the within-curve shape terms: escalating an imperfect pair
    constraint drags both curves rather than regularizing them.
    """
    counts = [len(s) for s in segments]
    offsets = np.concatenate([[0], np.cumsum(counts)])[:-1]
    initial = np.vstack([s.points for s in segments])
    if cloud is not None and features is not None:
        if alignment_radius is None:
            alignment_radius = 2.0 * cloud.median_spacing()
        targets = alignment_targets(cloud, features, segments, alignment_radius)
        diag = cloud.bbox_diagonal
    else:
        targets = initial.copy()
        diag = float(np.linalg.norm(initial.max(axis=0) - initial.min(axis=0)))

    terms: list[LabelTerm] = []
    for li, lab in enumerate(labels or []):
        members = tuple(lab.members)
        if lab.kind in ("ParallelPair", "SymmetricPair"):
            scale = 0.5 * sum(segments[m].arc_length() for m in members)
        elif lab.kind == "Line":
            scale = segments[members[0]].arc_length()
        elif lab.kind == "Circle":
            scale = float(lab.params.get("radius", segments[members[0]].arc_length() / (2 * np.pi)))
        else:
            scale = diag
        terms.append(LabelTerm(
            kind=lab.kind, members=members,
            mu_cap=pair_mu_cap if lab.kind in ("ParallelPair", "SymmetricPair") else mu_cap,
            reversed_second=bool(lab.params.get("reversed", False)),
            target_rms=target_factor * tol * scale, scale=scale,
            label_id=lab.params.get("id", f"{lab.kind.lower()}-{li}")))

    problem = OptimizationProblem(segments=segments, initial=initial, targets=targets,
                                  weights=weights, labels=terms, offsets=offsets,
                                  bbox_diagonal=diag)
    refit_labels(problem, initial)
    return problem


def _pair_maps(problem: OptimizationProblem, term: LabelTerm, pts: np.ndarray):
    i, j = term.members
    sa, sb = problem.segment_slice(i), problem.segment_slice(j)
    pa, pb = pts[sa], pts[sb]
    m = max(len(pa), len(pb))
    aa, wa = resample_polyline(pa, m)
    ab, wb = resample_polyline(pb, m)
    ia = aa + sa.start
    ib = ab + sb.start
    if term.reversed_second:
        ib, wb = ib[::-1].copy(), wb[::-1].copy()
    return ia, wa, ib, wb


def _interp(x, idx, w):
    return (1.0 - w)[:, None] * x[idx] + w[:, None] * x[idx + 1]


def refit_labels(problem: OptimizationProblem, x: np.ndarray) -> None:
    """Refit every label's geometric parameters from the current point positions."""
    pts = x.reshape(-1, 3)
    for term in problem.labels:
        if term.kind == "Line":
            sl = problem.segment_slice(term.members[0])
            term.data = {"t": chord_weights(pts[sl]), "slice": sl}
        elif term.kind == "Circle":
            sl = problem.segment_slice(term.members[0])
            center, radius, _ = fit_circle(pts[sl])
            term.data = {"center": center, "radius": radius, "slice": sl}
            term.scale = radius
        elif term.kind == "CoplanarGroup":
            idx = np.concatenate([np.arange(problem.segment_slice(m).start,
                                            problem.segment_slice(m).stop)
                                  for m in term.members])
            normal, point, _ = fit_plane(pts[idx])
            term.data = {"indices": idx, "normal": normal, "point": point}
        elif term.kind == "ParallelPair":
            ia, wa, ib, wb = _pair_maps(problem, term, pts)
            u = _interp(pts, ia, wa)
            v = _interp(pts, ib, wb)
            term.data = {"ia": ia, "wa": wa, "ib": ib, "wb": wb,
                         "offset": (v - u).mean(axis=0)}
        elif term.kind == "SymmetricPair":
            ia, wa, ib, wb = _pair_maps(problem, term, pts)
            u = _interp(pts, ia, wa)
            v = _interp(pts, ib, wb)
            mean_diff = (u - v).mean(axis=0)
            ln = np.linalg.norm(mean_diff)
            normal = term.data.get("normal", np.array([1.0, 0.0, 0.0])) \
                if ln < 1e-12 else mean_diff / ln
            term.data = {"ia": ia, "wa": wa, "ib": ib, "wb": wb,
                         "normal": normal, "center": 0.5 * (u + v).mean(axis=0)}
        else:
            raise ValueError(f"unknown label kind {term.kind!r}")


def energy_and_gradient(problem: OptimizationProblem,
                        x: np.ndarray) -> tuple[EnergyBreakdown, np.ndarray]:
    """Total augmented energy and its exact analytic gradient at x (flat or (N,3))."""
    pts = x.reshape(-1, 3)
    if pts.shape != problem.initial.shape:
        raise ValueError(f"variable shape {pts.shape} does not match problem {problem.initial.shape}")
    w = problem.weights
    grad = np.zeros_like(pts)
    per_term = {name: 0.0 for name in TERM_NAMES}
    per_label = []

    r = pts - problem.initial
    per_term["fidelity"] = float(np.sum(r * r))
    grad += 2.0 * w.fidelity * r

    r = pts - problem.targets
    per_term["alignment"] = float(np.sum(r * r))
    grad += 2.0 * w.alignment * r

    i0, i1, i2 = problem.smooth_indices()
    if len(i0):
        lap = pts[i0] - 2.0 * pts[i1] + pts[i2]
        per_term["smooth"] = float(np.sum(lap * lap))
        coef = 2.0 * w.smooth
        np.add.at(grad, i0, coef * lap)
        np.add.at(grad, i1, -2.0 * coef * lap)
        np.add.at(grad, i2, coef * lap)

    for term in problem.labels:
        mu = term.mu
        if term.kind == "Line":
            sl = term.data["slice"]
            t = term.data["t"]
            seg = pts[sl]
            res = t[:, None] * seg[0] + (1.0 - t)[:, None] * seg[-1] - seg
            e = float(np.sum(res * res))
            g = np.zeros_like(seg)
            g -= 2.0 * res
            g[0] += 2.0 * (t[:, None] * res).sum(axis=0)
            g[-1] += 2.0 * ((1.0 - t)[:, None] * res).sum(axis=0)
            grad[sl] += mu * g
            name = "line"
        elif term.kind == "Circle":
            sl = term.data["slice"]
            q = pts[sl] - term.data["center"]
            s = np.einsum("ij,ij->i", q, q) - term.data["radius"] ** 2
            e = float(np.sum(s * s))
            grad[sl] += mu * 4.0 * s[:, None] * q
            name = "circle"
        elif term.kind == "CoplanarGroup":
            idx = term.data["indices"]
            n = term.data["normal"]
            d = (pts[idx] - term.data["point"]) @ n
            e = float(np.sum(d * d))
            np.add.at(grad, idx, mu * 2.0 * d[:, None] * n)
            name = "coplanar"
        elif term.kind == "ParallelPair":
            ia, wa, ib, wb = term.data["ia"], term.data["wa"], term.data["ib"], term.data["wb"]
            res = _interp(pts, ia, wa) - _interp(pts, ib, wb) + term.data["offset"]
            e = float(np.sum(res * res))
            gu = mu * 2.0 * res
            np.add.at(grad, ia, (1.0 - wa)[:, None] * gu)
            np.add.at(grad, ia + 1, wa[:, None] * gu)
            np.add.at(grad, ib, -(1.0 - wb)[:, None] * gu)
            np.add.at(grad, ib + 1, -wb[:, None] * gu)
            name = "parallel"
        elif term.kind == "SymmetricPair":
            ia, wa, ib, wb = term.data["ia"], term.data["wa"], term.data["ib"], term.data["wb"]
            n = term.data["normal"]
            mid = 0.5 * (_interp(pts, ia, wa) + _interp(pts, ib, wb))
            s = (mid - term.data["center"]) @ n
            e = float(np.sum(s * s))
            gmid = mu * s[:, None] * n      # = mu * 2*s*n * dmid/du with dmid/du = 1/2
            np.add.at(grad, ia, (1.0 - wa)[:, None] * gmid)
            np.add.at(grad, ia + 1, wa[:, None] * gmid)
            np.add.at(grad, ib, (1.0 - wb)[:, None] * gmid)
            np.add.at(grad, ib + 1, wb[:, None] * gmid)
            name = "symmetry"
        per_term[name] += e
        per_label.append({"id": term.label_id, "kind": term.kind, "raw": e, "mu": mu})

    total = (w.fidelity * per_term["fidelity"] + w.alignment * per_term["alignment"]
             + w.smooth * per_term["smooth"]
             + sum(l["mu"] * l["raw"] for l in per_label))
    for name, value in per_term.items():
        if not np.isfinite(value):
            raise NonFiniteEnergyError(name)
    return EnergyBreakdown(total=float(total), per_term=per_term,
                           per_label=per_label), grad.ravel()


def _label_residual_rms(term: LabelTerm, raw: float) -> float:
    if term.kind == "Circle":
        n = term.data["slice"].stop - term.data["slice"].start
        return float(np.sqrt(raw / max(n, 1)) / max(2.0 * term.data["radius"], 1e-30))
    if term.kind == "Line":
        n = term.data["slice"].stop - term.data["slice"].start
    elif term.kind == "CoplanarGroup":
        n = len(term.data["indices"])
    else:
        n = len(term.data["ia"])
    return float(np.sqrt(raw / max(n, 1)))


@dataclass
class OptimizeResult:
    segments: list[CurveSegment]
    history: list[dict]
    initial: EnergyBreakdown
    final: EnergyBreakdown
    line_search_failed: bool = False
    outer_iterations: int = 0


def optimize(problem: OptimizationProblem, max_iters: int = 200,
             grad_tol: float | None = None, outer_iters: int = 5) -> OptimizeResult:
    """Run the outer refit / inner L-BFGS loop and return optimized segments.

    History entries record the energy breakdown at every accepted inner
    iterate, grouped by outer iteration; totals are non-increasing within
    each inner run.
    """
    if grad_tol is None:
        grad_tol = 1e-6 * problem.bbox_diagonal
    x = problem.initial.ravel().copy()
    history: list[dict] = []
    initial_bd: EnergyBreakdown | None = None
    final_bd: EnergyBreakdown | None = None
    ls_failed = False
    outer_done = 0

    def fun(xv):
        bd, g = energy_and_gradient(problem, xv)
        return bd.total, g

    for outer in range(max(outer_iters, 1)):
        refit_labels(problem, x)
        bd, _ = energy_and_gradient(problem, x)
        if initial_bd is None:
            initial_bd = bd
        iterate = {"n": 0}
        history.append({"outer": outer, "iterate": 0, "total": bd.total,
                        "terms": dict(bd.per_term)})

        def callback(xk):
            iterate["n"] += 1
            b, _ = energy_and_gradient(problem, xk)
            history.append({"outer": outer, "iterate": iterate["n"], "total": b.total,
                            "terms": dict(b.per_term)})

        res = minimize(fun, x, jac=True, method="L-BFGS-B", callback=callback,
                       options={"maxiter": max_iters, "maxcor": 10,
                                "gtol": grad_tol, "ftol": 1e-14})
        if not res.success and "LNSRCH" in str(res.message).upper():
            ls_failed = True
        x = res.x
        outer_done = outer + 1

        final_bd, _ = energy_and_gradient(problem, x)
        if not problem.labels:
            break
        violated = False
        for term, lab in zip(problem.labels, final_bd.per_label):
            if _label_residual_rms(term, lab["raw"]) > term.target_rms and term.mu < term.mu_cap:
                term.mu = min(term.mu * 2.0, term.mu_cap)
                violated = True
        if not violated:
            break

    pts = x.reshape(-1, 3)
    out_segments = []
    for i, seg in enumerate(problem.segments):
        sl = problem.segment_slice(i)
        out_segments.append(CurveSegment(pts[sl].copy(), closed=seg.closed,
                                         provenance=seg.provenance.copy()))
    return OptimizeResult(segments=out_segments, history=history,
                          initial=initial_bd, final=final_bd,
                          line_search_failed=ls_failed, outer_iterations=outer_done)
