"""Detection of structural regularities among curve segments.

Classifies individual segments as lines or circles, finds coplanar groups,
parallel pairs, and mirror-symmetric pairs, and fits the global reflection
plane used for symmetry completion.  Detection is threshold-based; the labels
it emits are meant to be confirmed (interactively or by configuration) before
they are enforced during optimization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import itertools

import numpy as np

from .extract import CurveSegment, MIRRORED


@dataclass
class RegularityLabel:
    kind: str                 # Line | Circle | CoplanarGroup | ParallelPair | SymmetricPair
    members: tuple[int, ...]  # segment ids
    params: dict = field(default_factory=dict)

    def fingerprint(self) -> str:
        return f"{self.kind}:{','.join(map(str, sorted(self.members)))}"


@dataclass
class SymmetryPlane:
    point: np.ndarray    # (3,)
    normal: np.ndarray   # (3,), unit

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=np.float64)
        n = np.asarray(self.normal, dtype=np.float64)
        ln = np.linalg.norm(n)
        if ln < 1e-12:
            raise ValueError("degenerate symmetry plane normal")
        self.normal = n / ln

    def reflect(self, pts: np.ndarray) -> np.ndarray:
        d = (pts - self.point) @ self.normal
        return pts - 2.0 * d[:, None] * self.normal


def fit_plane(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Least-squares plane; returns (unit normal, centroid, max |deviation|)."""
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[-1]
    dev = np.abs(centered @ normal)
    return normal, centroid, float(dev.max())


def chord_weights(points: np.ndarray) -> np.ndarray:
    """For each point, the weight t minimizing |t*first + (1-t)*last - point|^2."""
    chord = points[0] - points[-1]
    len2 = float(chord @ chord)
    if len2 < 1e-300:
        return np.zeros(len(points))
    return (points - points[-1]) @ chord / len2


def classify_line(segment: CurveSegment, tol: float = 0.02) -> RegularityLabel | None:
    """Label an open segment as a straight line if every point sits near its chord."""
    if segment.closed or len(segment) < 3:
        return None
    pts = segment.points
    t = chord_weights(pts)
    if t.min() < -0.1 or t.max() > 1.1:
        return None
    recon = np.outer(t, pts[0]) + np.outer(1.0 - t, pts[-1])
    residual = np.linalg.norm(recon - pts, axis=1)
    length = segment.arc_length()
    if residual.max() > tol * length:
        return None
    return RegularityLabel("Line", (0,), {"t": t, "max_residual": float(residual.max())})


def fit_circle(pts: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    """Plane fit followed by an in-plane algebraic (Kasa) circle fit.

    Returns (center 3D, radius, unit plane normal).
    """
    normal, centroid, _ = fit_plane(pts)
    # in-plane orthonormal basis
    seed = np.array([1.0, 0.0, 0.0])
    if abs(normal @ seed) > 0.9:
        seed = np.array([0.0, 1.0, 0.0])
    u = np.cross(normal, seed)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    local = (pts - centroid) @ np.column_stack([u, v])
    x, y = local[:, 0], local[:, 1]
    a = np.column_stack([x, y, np.ones(len(x))])
    b = x * x + y * y
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    cx, cy = sol[0] / 2.0, sol[1] / 2.0
    r2 = sol[2] + cx * cx + cy * cy
    radius = float(np.sqrt(max(r2, 1e-300)))
    center = centroid + cx * u + cy * v
    return center, radius, normal


def classify_circle(segment: CurveSegment, tol: float = 0.02) -> RegularityLabel | None:
    """Label a closed segment as a circle if radial and planar deviations are small."""
    if not segment.closed or len(segment) < 6:
        return None
    pts = segment.points
    center, radius, normal = fit_circle(pts)
    if radius <= 0:
        return None
    radial = np.abs(np.linalg.norm(pts - center, axis=1) - radius)
    planar = np.abs((pts - center) @ normal)
    if radial.max() > tol * radius or planar.max() > tol * radius:
        return None
    return RegularityLabel("Circle", (0,), {
        "center": center, "radius": radius, "normal": normal,
        "max_residual": float(max(radial.max(), planar.max())),
    })


def resample_polyline(points: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform arc-length resampling as a linear map of the input vertices.

    Returns (base indices a, weights w): sample_k = (1-w_k)*P[a_k] + w_k*P[a_k+1].
    """
    edges = np.linalg.norm(np.diff(points, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(edges)])
    total = cum[-1]
    if total <= 0:
        raise ValueError("cannot resample a zero-length polyline")
    targets = np.linspace(0.0, total, m)
    a = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(points) - 2)
    w = (targets - cum[a]) / np.where(edges[a] > 0, edges[a], 1.0)
    return a, np.clip(w, 0.0, 1.0)


def apply_resample(points: np.ndarray, a: np.ndarray, w: np.ndarray) -> np.ndarray:
    return (1.0 - w)[:, None] * points[a] + w[:, None] * points[a + 1]


def _mean_tangent(points: np.ndarray) -> np.ndarray:
    d = points[-1] - points[0]
    n = np.linalg.norm(d)
    return d / n if n > 0 else np.zeros(3)


def _pair_correspondence(pa: np.ndarray, pb: np.ndarray):
    """Resample both polylines to a common count; yields (qa, qb, reversed_b)."""
    m = max(len(pa), len(pb))
    aa, wa = resample_polyline(pa, m)
    qa = apply_resample(pa, aa, wa)
    ab, wb = resample_polyline(pb, m)
    qb = apply_resample(pb, ab, wb)
    yield qa, qb, False
    yield qa, qb[::-1], True


def detect_groups_and_pairs(segments: list[CurveSegment], tol: float = 0.02,
                            bbox_diagonal: float | None = None) -> list[RegularityLabel]:
    """Find coplanar groups, parallel pairs, and symmetric pairs among segments.

    Pair detection considers open segments only (closed curves lack a canonical
    point correspondence).  Coplanar groups need at least 3 members because two
    non-skew polylines are trivially coplanar.
    """
    labels: list[RegularityLabel] = []
    if bbox_diagonal is None:
        allpts = np.vstack([s.points for s in segments]) if segments else np.zeros((1, 3))
        bbox_diagonal = float(np.linalg.norm(allpts.max(axis=0) - allpts.min(axis=0)))
    open_ids = [i for i, s in enumerate(segments) if not s.closed]

    # --- coplanar groups: expand from coplanar seed pairs, keep maximal sets
    group_sets: list[tuple[int, ...]] = []
    for i, j in itertools.combinations(range(len(segments)), 2):
        pts = np.vstack([segments[i].points, segments[j].points])
        _, _, dev = fit_plane(pts)
        if dev > tol * bbox_diagonal:
            continue
        members = [i, j]
        for k in range(len(segments)):
            if k in members:
                continue
            trial = np.vstack([segments[m].points for m in members] + [segments[k].points])
            _, _, dev = fit_plane(trial)
            if dev <= tol * bbox_diagonal:
                members.append(k)
        members = tuple(sorted(members))
        if len(members) >= 3 and members not in group_sets:
            group_sets.append(members)
    # drop strict subsets, then near-identical fitted planes (one group per plane)
    group_sets = [g for g in group_sets
                  if not any(set(g) < set(h) for h in group_sets if h != g)]
    kept: list[tuple] = []
    for g in sorted(group_sets, key=lambda g: (-len(g), g)):
        pts = np.vstack([segments[m].points for m in g])
        normal, centroid, dev = fit_plane(pts)
        duplicate = False
        for _, n2, c2 in kept:
            if abs(normal @ n2) > 0.996 and abs((centroid - c2) @ n2) < 0.5 * tol * bbox_diagonal:
                duplicate = True
                break
        if not duplicate:
            kept.append((g, normal, centroid))
            labels.append(RegularityLabel("CoplanarGroup", g, {
                "normal": normal, "point": centroid, "max_residual": float(dev)}))

    # --- parallel and symmetric pairs over open segments
    for i, j in itertools.combinations(open_ids, 2):
        si, sj = segments[i], segments[j]
        li, lj = si.arc_length(), sj.arc_length()
        pair_len = 0.5 * (li + lj)
        if pair_len <= 0:
            continue

        # parallel: similar length and direction, near-constant offset
        if abs(li - lj) < 0.2 * max(li, lj):
            ti, tj = _mean_tangent(si.points), _mean_tangent(sj.points)
            if np.degrees(np.arccos(np.clip(abs(ti @ tj), -1, 1))) < 10.0:
                best = None
                for qa, qb, rev in _pair_correspondence(si.points, sj.points):
                    offsets = qb - qa
                    d = offsets.mean(axis=0)
                    dev = float(np.linalg.norm(offsets - d, axis=1).mean())
                    if best is None or dev < best[0]:
                        best = (dev, d, rev)
                dev, d, rev = best
                if dev <= tol * pair_len:
                    labels.append(RegularityLabel("ParallelPair", (i, j), {
                        "offset": d, "reversed": rev, "mean_residual": dev}))

        # symmetric: reflecting one curve across the midpoint plane (normal along
        # the mean difference) must land on the other
        if abs(li - lj) >= 0.2 * max(li, lj):
            continue
        best = None
        for qa, qb, rev in _pair_correspondence(si.points, sj.points):
            diff = qa - qb
            mean_diff = diff.mean(axis=0)
            ln = np.linalg.norm(mean_diff)
            if ln < 1e-9 * max(pair_len, 1e-30):
                continue
            normal = mean_diff / ln
            mid = 0.5 * (qa + qb)
            center = mid.mean(axis=0)
            plane = SymmetryPlane(point=center, normal=normal)
            dev = float(np.sqrt(np.mean(np.sum((plane.reflect(qa) - qb) ** 2, axis=1))))
            if best is None or dev < best[0]:
                best = (dev, normal, center, rev)
        if best is not None:
            dev, normal, center, rev = best
            if dev <= tol * pair_len:
                labels.append(RegularityLabel("SymmetricPair", (i, j), {
                    "normal": normal, "point": center, "reversed": rev,
                    "mean_residual": dev}))
    return labels


def fit_symmetry_plane(segments: list[CurveSegment],
                       pairs: list[RegularityLabel]) -> SymmetryPlane:
    """Least-squares reflection plane over all paired, resampled points.

    For corresponding points (p, q) with midpoints m and differences v = p - q,
    the summed squared reflection residual reduces to
    sum(|v_perp|^2) + 4 * sum(((m - mbar) . n)^2), so the optimal unit normal is
    the smallest eigenvector of 4*M - V (M the centered midpoint scatter, V the
    difference scatter) and the plane passes through the mean midpoint.
    """
    mids, diffs = [], []
    for lab in pairs:
        i, j = lab.members
        pa, pb = segments[i].points, segments[j].points
        m = max(len(pa), len(pb))
        aa, wa = resample_polyline(pa, m)
        qa = apply_resample(pa, aa, wa)
        ab, wb = resample_polyline(pb, m)
        qb = apply_resample(pb, ab, wb)
        if lab.params.get("reversed", False):
            qb = qb[::-1]
        mids.append(0.5 * (qa + qb))
        diffs.append(qa - qb)
    if not mids:
        raise ValueError("no symmetric pairs to fit a plane from")
    mid = np.vstack(mids)
    v = np.vstack(diffs)
    center = mid.mean(axis=0)
    mc = mid - center
    m_scatter = mc.T @ mc
    v_scatter = v.T @ v
    w, vecs = np.linalg.eigh(4.0 * m_scatter - v_scatter)
    return SymmetryPlane(point=center, normal=vecs[:, 0])


def reflection_residual(segments, pairs, plane: SymmetryPlane) -> float:
    """Summed squared residual of reflecting each pair's first curve onto its second."""
    total = 0.0
    for lab in pairs:
        i, j = lab.members
        pa, pb = segments[i].points, segments[j].points
        m = max(len(pa), len(pb))
        aa, wa = resample_polyline(pa, m)
        qa = apply_resample(pa, aa, wa)
        ab, wb = resample_polyline(pb, m)
        qb = apply_resample(pb, ab, wb)
        if lab.params.get("reversed", False):
            qb = qb[::-1]
        total += float(np.sum((plane.reflect(qa) - qb) ** 2))
    return total


def mirror_curve(curve: CurveSegment, plane: SymmetryPlane) -> CurveSegment:
    """Reflected copy of a curve; point order kept, provenance set to mirrored."""
    pts = plane.reflect(curve.points)
    return CurveSegment(pts, closed=curve.closed,
                        provenance=np.full(len(pts), MIRRORED, dtype=np.uint8))


def complete_by_symmetry(segments: list[CurveSegment], plane: SymmetryPlane,
                         counterpart_tol: float) -> list[CurveSegment]:
    """Mirror every curve whose reflection has no nearby counterpart.

    A counterpart exists when the mean distance from the mirrored curve to the
    closest existing curve is below `counterpart_tol` (absolute units).
    Returns only the newly created mirrored curves.
    """
    from .extract import _point_polyline_distances

    new_curves = []
    for seg in segments:
        mirrored = mirror_curve(seg, plane)
        best = np.inf
        for other in segments:
            d = _point_polyline_distances(mirrored.points, other.points).mean()
            best = min(best, float(d))
            if best <= counterpart_tol:
                break
        if best > counterpart_tol:
            new_curves.append(mirrored)
    return new_curves
