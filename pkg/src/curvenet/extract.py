"""Polyline growing through the feature point set.

Segments are grown greedily outward from high-variation seeds.  An end stops
extending when the best candidate would turn the polyline by 30 degrees or
more, which keeps a single segment from wandering across a sharp corner into
a different feature region.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .cloud import PointCloud, FeaturePointSet

# provenance codes for curve points
DETECTED = 0
STROKE = 1
MIRRORED = 2
JUNCTION = 3

PROVENANCE_NAMES = {DETECTED: "detected", STROKE: "stroke",
                    MIRRORED: "mirrored", JUNCTION: "synthesized-junction"}
PROVENANCE_CODES = {v: k for k, v in PROVENANCE_NAMES.items()}

_MIN_CLOSED_POINTS = 6


class SegmentTooShortError(ValueError):
    """Growth consumed fewer than min_points; carries the consumed feature indices."""

    def __init__(self, consumed):
        super().__init__(f"grown segment too short ({len(consumed)} points)")
        self.consumed = consumed


@dataclass
class GrowthParams:
    angle_max: float = 30.0     # degrees; extension stops at turns >= this
    s_max: float = 3.0          # candidate radius, in multiples of median spacing
    min_points: int = 4
    step_weight: float = 0.05   # distance tie-break against alignment in the step cost
    tangent_window: int = 6     # points used for the smoothed reference direction
    corner_ratio: float = 1.0   # block growth where local feature spread is this
                                # isotropic (svd s2/s1); 1.0 disables the guard

    def __post_init__(self):
        if not 0 < self.angle_max < 180:
            raise ValueError("angle_max must be in (0, 180)")
        if self.s_max <= 0:
            raise ValueError("s_max must be positive")
        if self.min_points < 2:
            raise ValueError("min_points must be >= 2")

    def radius(self, cloud: PointCloud) -> float:
        return self.s_max * cloud.median_spacing()


@dataclass
class CurveSegment:
    """Ordered polyline, open or closed, with per-point provenance."""

    points: np.ndarray                      # (n, 3) float64
    closed: bool = False
    provenance: np.ndarray | None = None    # (n,) uint8 codes

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
            raise ValueError("segment needs at least 2 points of dimension 3")
        object.__setattr__(self, "points", pts)
        if self.provenance is None:
            self.provenance = np.full(len(pts), DETECTED, dtype=np.uint8)
        else:
            self.provenance = np.asarray(self.provenance, dtype=np.uint8)
            if len(self.provenance) != len(pts):
                raise ValueError("provenance length mismatch")

    def __len__(self):
        return len(self.points)

    def arc_length(self) -> float:
        edges = np.diff(self.points, axis=0)
        total = float(np.linalg.norm(edges, axis=1).sum())
        if self.closed:
            total += float(np.linalg.norm(self.points[0] - self.points[-1]))
        return total

    def reversed(self) -> "CurveSegment":
        return CurveSegment(self.points[::-1].copy(), self.closed, self.provenance[::-1].copy())


def _turn_angle(v1: np.ndarray, v2: np.ndarray) -> float:
    """Angle in degrees between successive edge directions (0 = straight on)."""
    n1 = np.linalg.norm(v1)
    n2 = np.linalg.norm(v2)
    if n1 < 1e-300 or n2 < 1e-300:
        return 0.0
    c = np.clip(np.dot(v1, v2) / (n1 * n2), -1.0, 1.0)
    return float(np.degrees(np.arccos(c)))


def _reference_direction(chain, positions, window):
    """Smoothed forward direction at the chain tail (line fit over recent points)."""
    m = min(window, len(chain))
    if m < 2:
        return None
    recent = positions[chain[-m:]]
    centered = recent - recent.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    d = vt[0]
    hint = recent[-1] - recent[0]
    if d @ hint < 0:
        d = -d
    n = np.linalg.norm(d)
    return d / n if n > 0 else None


def _local_axis(tip, neighbors):
    """Principal direction of the feature points around a bare seed (sign-free)."""
    if len(neighbors) < 2:
        return None
    pts = np.vstack([tip[None, :], neighbors])
    centered = pts - pts.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] <= 0:
        return None
    return vt[0]


def _grow_one_direction(chain, positions, tree, available, radius, params,
                        min_step):
    """Extend `chain` (list of feature-set slots) at its tail until blocked.

    A candidate must turn less than angle_max off the last edge (the hard
    termination rule); among eligible candidates the cost is dominated by the
    angle off the smoothed recent direction with only a small distance
    tie-break, so the walk takes long well-aligned strides instead of
    zigzagging across a noisy feature band.
    """
    angle_max = params.angle_max
    recent = max(10, 2 * params.tangent_window)
    while True:
        tip = positions[chain[-1]]
        if len(chain) > recent:
            # stop when the walk returns to its own earlier portion (loop)
            older = positions[chain[:-recent]]
            if np.min(np.linalg.norm(older - tip, axis=1)) < 0.5 * radius:
                return
        prev_dir = None
        if len(chain) >= 2:
            prev_dir = tip - positions[chain[-2]]
        ref_dir = _reference_direction(chain, positions, params.tangent_window)
        cand = [j for j in tree.query_ball_point(tip, radius) if available[j]]
        if not cand:
            return
        axis = None
        if ref_dir is None:
            axis = _local_axis(tip, positions[sorted(cand)])
        best_j, best_cost = -1, np.inf
        for j in sorted(cand):
            step = positions[j] - tip
            dist = np.linalg.norm(step)
            if dist < min_step:
                if dist < 1e-12:
                    # coincident duplicate: consume silently, never a vertex
                    available[j] = False
                continue
            if prev_dir is not None and _turn_angle(prev_dir, step) >= angle_max:
                continue
            if ref_dir is None:
                if axis is None:
                    cost = dist
                else:
                    theta = min(_turn_angle(axis, step), _turn_angle(-axis, step))
                    cost = (1.0 - np.cos(np.radians(theta))) \
                        + params.step_weight * dist / radius
            else:
                # the smoothed reference lags on curved features, so the hard
                # cut stays loose; junction-zone suppression and end trimming
                # handle corner wraps
                theta = _turn_angle(ref_dir, step)
                if theta >= max(angle_max, 60.0):
                    continue
                cost = (1.0 - np.cos(np.radians(theta))) \
                    + params.step_weight * dist / radius
            if cost < best_cost:
                best_cost, best_j = cost, j
        if best_j < 0:
            return
        available[best_j] = False
        chain.append(best_j)


def junction_zone_mask(positions: np.ndarray, radius: float,
                       ratio: float) -> np.ndarray:
    """Feature points whose local feature spread is closer to a blob than a band.

    The ratio is the second-to-first singular value of the centered feature
    neighborhood; points above the threshold sit where several feature bands
    meet (corners, T crossings) and growing through them produces hooks.
    """
    tree = cKDTree(positions)
    mask = np.zeros(len(positions), dtype=bool)
    for i in range(len(positions)):
        idx = tree.query_ball_point(positions[i], radius)
        if len(idx) < 3:
            continue
        q = positions[idx] - positions[idx].mean(axis=0)
        s = np.linalg.svd(q, compute_uv=False)
        if s[0] > 0 and s[1] / s[0] > ratio:
            mask[i] = True
    return mask


def grow_polyline(features: FeaturePointSet, cloud: PointCloud, seed: int,
                  params: GrowthParams,
                  consumed: np.ndarray | None = None,
                  blocked: np.ndarray | None = None) -> CurveSegment:
    """Grow a polyline bidirectionally from a seed feature point.

    `seed` is a cloud index that must be in the feature set.  `consumed`, if
    given, marks feature-set slots already used by other segments; it is
    updated in place with the points this call consumes.  `blocked` slots are
    never stepped on (junction zones) but are not consumed either.
    """
    slot_of = {int(ci): si for si, ci in enumerate(features.indices)}
    if seed not in slot_of:
        raise ValueError(f"seed {seed} is not a feature point")
    positions = features.positions(cloud)
    if consumed is None:
        consumed = np.zeros(len(features), dtype=bool)
    available = ~consumed
    if blocked is not None:
        available &= ~blocked
    tree = cKDTree(positions)
    radius = params.radius(cloud)

    min_step = 0.5 * cloud.median_spacing()
    start = slot_of[seed]
    before = available.copy()
    available[start] = False
    chain = [start]
    _grow_one_direction(chain, positions, tree, available, radius, params, min_step)
    chain.reverse()
    _grow_one_direction(chain, positions, tree, available, radius, params, min_step)

    consumed[before & ~available] = True
    if len(chain) < params.min_points:
        raise SegmentTooShortError([int(features.indices[s]) for s in chain])

    pts = positions[chain]
    closed = False
    if len(chain) >= _MIN_CLOSED_POINTS:
        gap = pts[0] - pts[-1]                      # closing edge: tail -> head
        cap = params.angle_max + 10.0
        if np.linalg.norm(gap) <= radius:
            # compatible tangents by either the raw end edges (exact on clean
            # data) or the smoothed directions (robust on noisy bands)
            raw_ok = (_turn_angle(pts[-1] - pts[-2], gap) < cap
                      and _turn_angle(gap, pts[1] - pts[0]) < cap)
            tail_dir = _reference_direction(chain, positions, params.tangent_window)
            head_dir = _reference_direction(chain[::-1], positions, params.tangent_window)
            smooth_ok = (tail_dir is not None and head_dir is not None
                         and _turn_angle(tail_dir, gap) < cap
                         and _turn_angle(gap, -head_dir) < cap)
            closed = raw_ok or smooth_ok
    return CurveSegment(pts, closed=closed)


def _point_polyline_distances(query: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Distance from each query point to a polyline (exact point-to-segment)."""
    a = poly[:-1]
    d = poly[1:] - a
    len2 = np.einsum("ij,ij->i", d, d)
    len2 = np.where(len2 < 1e-300, 1.0, len2)
    # t: (q, segments)
    diff = query[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("qsj,sj->qs", diff, d) / len2[None, :], 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * d[None, :, :]
    dist = np.linalg.norm(query[:, None, :] - proj, axis=2)
    return dist.min(axis=1)


@dataclass
class ExtractionStats:
    segments: int = 0
    dropped_short: int = 0
    consumed_points: int = 0
    trimmed_points: int = 0


def _trim_hooked_ends(pts: np.ndarray, angle_max: float, min_points: int,
                      max_trim: int = 6) -> tuple[np.ndarray, int]:
    """Drop end points whose edge bends sharply off the adjacent run.

    Growth through cluttered regions can curl the last few points of a chain
    sideways; such hooks corrupt endpoint tangents downstream.
    """
    limit = 1.2 * angle_max
    trimmed = 0
    for _ in range(2 * max_trim):
        if len(pts) <= max(min_points, 4):
            break
        w = min(6, len(pts) - 1)
        head_edge = pts[1] - pts[0]
        head_chord = pts[w] - pts[1]
        if _turn_angle(head_edge, head_chord) >= limit:
            pts = pts[1:]
            trimmed += 1
            continue
        tail_edge = pts[-1] - pts[-2]
        tail_chord = pts[-2] - pts[-1 - w]
        if _turn_angle(tail_chord, tail_edge) >= limit:
            pts = pts[:-1]
            trimmed += 1
            continue
        break
    return pts, trimmed


def extract_segments(features: FeaturePointSet, cloud: PointCloud,
                     params: GrowthParams,
                     stats: ExtractionStats | None = None) -> list[CurveSegment]:
    """Grow segments from successive highest-variation seeds until no features remain.

    After each growth, every feature point within the candidate radius of the
    grown polyline is retired so each feature point feeds at most one segment.
    """
    if stats is None:
        stats = ExtractionStats()
    if len(features) == 0:
        return []
    positions = features.positions(cloud)
    tree = cKDTree(positions)
    radius = params.radius(cloud)
    consumed = np.zeros(len(features), dtype=bool)
    blocked = None
    if params.corner_ratio < 1.0:
        blocked = junction_zone_mask(positions, radius, params.corner_ratio)
    # seed order: sigma descending, cloud index ascending
    order = np.lexsort((features.indices, -features.variations))
    segments: list[CurveSegment] = []

    for slot in order:
        if consumed[slot] or (blocked is not None and blocked[slot]):
            continue
        seed = int(features.indices[slot])
        try:
            seg = grow_polyline(features, cloud, seed, params, consumed, blocked)
        except SegmentTooShortError:
            seg = None
            stats.dropped_short += 1
        if seg is not None and not seg.closed:
            pts, ntrim = _trim_hooked_ends(seg.points, params.angle_max, params.min_points)
            if ntrim:
                stats.trimmed_points += ntrim
                seg = CurveSegment(pts, closed=False)
        if seg is not None:
            segments.append(seg)
            # retire everything hugging the new polyline
            near = set()
            for i in tree.query_ball_point(seg.points, 1.5 * radius):
                near.update(i)
            near = np.array(sorted(near), dtype=int)
            if len(near):
                live = near[~consumed[near]]
                if len(live):
                    close = _point_polyline_distances(positions[live], seg.points) <= radius
                    consumed[live[close]] = True
    stats.segments = len(segments)
    stats.consumed_points = int(consumed.sum())
    return segments
