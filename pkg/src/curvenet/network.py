"""Completion of optimized segments into a connected curve network.

Open curve ends are clustered by a connection cost that favors close,
well-aligned partners; clusters resolve into corner junctions (least-squares
intersection of tangent lines), T-junctions (extension onto the interior of
another curve), or plain continuations where two ends simply bridge a gap in
the data and their curves are joined into one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .extract import CurveSegment, JUNCTION


class DegenerateCornerError(ValueError):
    """All tangent lines parallel; the corner point is not determined."""


class NotReachableError(ValueError):
    """No forward intersection with the target curve within range."""


@dataclass
class EndpointDescriptor:
    segment: int
    end: str                 # "head" | "tail"
    position: np.ndarray
    tangent: np.ndarray      # unit, pointing outward (direction of extension)


@dataclass
class InteriorPoint:
    segment: int
    index: int
    position: np.ndarray


@dataclass
class Junction:
    position: np.ndarray
    ends: list[tuple[int, str]]


@dataclass
class CurveNetwork:
    curves: list[CurveSegment]
    junctions: list[Junction]
    adjacency: dict[tuple[int, str], int] = field(default_factory=dict)
    open_ends: list[tuple[int, str]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def endpoint_tangent(segment: CurveSegment, end: str, window: int = 3) -> np.ndarray:
    """Outward unit tangent at a segment end, from a line fit over the last edges."""
    pts = segment.points
    m = min(window + 1, len(pts))
    if end == "head":
        chunk = pts[:m]
        outward_hint = pts[0] - pts[m - 1]
    elif end == "tail":
        chunk = pts[-m:]
        outward_hint = pts[-1] - pts[-m]
    else:
        raise ValueError(f"end must be 'head' or 'tail', got {end!r}")
    centered = chunk - chunk.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    d = vt[0]
    if d @ outward_hint < 0:
        d = -d
    n = np.linalg.norm(d)
    if n < 1e-12:
        raise ValueError("degenerate segment end (coincident points)")
    return d / n


def make_endpoint(segments: list[CurveSegment], seg_id: int, end: str,
                  window: int = 3) -> EndpointDescriptor:
    seg = segments[seg_id]
    pos = seg.points[0] if end == "head" else seg.points[-1]
    return EndpointDescriptor(seg_id, end, pos.copy(), endpoint_tangent(seg, end, window))


def solve_corner(ends: list[EndpointDescriptor]) -> np.ndarray:
    """Least-squares intersection of the endpoint tangent lines.

    Minimizes sum |(I - t t^T)(p - p_i)|^2, the squared distances from the
    corner to each line.  Raises DegenerateCornerError when all tangents are
    parallel (rank-deficient normal matrix).
    """
    if len(ends) < 2:
        raise ValueError("need at least two ends to solve a corner")
    a = np.zeros((3, 3))
    b = np.zeros(3)
    for e in ends:
        proj = np.eye(3) - np.outer(e.tangent, e.tangent)
        a += proj
        b += proj @ e.position
    w = np.linalg.eigvalsh(a)
    if w[0] < 1e-9 * max(w[-1], 1e-30):
        raise DegenerateCornerError("all endpoint tangents are parallel")
    return np.linalg.solve(a, b)


def extend_to_interior(end: EndpointDescriptor, target: CurveSegment,
                       max_dist: float) -> tuple[int, np.ndarray, float]:
    """Best split point on the target polyline along the endpoint's tangent ray.

    The split point minimizes perpendicular deviation from the ray
    {p + s*t, s >= 0}, restricted to the forward half-space, and must lie
    within `max_dist` of the endpoint.  Returns (subsegment index, point,
    interpolation parameter).
    """
    p, t = end.position, end.tangent
    proj = np.eye(3) - np.outer(t, t)
    pts = target.points
    n_sub = len(pts) - 1 + (1 if target.closed else 0)
    best = None
    for i in range(n_sub):
        a = pts[i]
        bpt = pts[(i + 1) % len(pts)]
        seg_vec = bpt - a
        # feasible tau range for the forward half-space (linear constraint)
        f0 = (a - p) @ t
        f1 = seg_vec @ t
        lo, hi = 0.0, 1.0
        if abs(f1) < 1e-300:
            if f0 <= 0:
                continue
        elif f1 > 0:
            lo = max(lo, -f0 / f1)
        else:
            hi = min(hi, -f0 / f1)
        if lo >= hi:
            continue
        u = proj @ (a - p)
        v = proj @ seg_vec
        vv = v @ v
        tau = -(u @ v) / vv if vv > 1e-300 else lo
        tau = min(max(tau, lo), hi)
        pt = a + tau * seg_vec
        perp = np.linalg.norm(proj @ (pt - p))
        if best is None or perp < best[0] - 1e-15:
            best = (perp, i, pt, tau)
    if best is None:
        raise NotReachableError("target lies entirely behind the endpoint")
    perp, i, pt, tau = best
    if np.linalg.norm(pt - p) > max_dist:
        raise NotReachableError("forward intersection beyond reach")
    return i, pt, float(tau)


def connection_cost(p: EndpointDescriptor, q, s_max: float) -> float:
    """Connection cost F = (dist / s_max) / (2 + cos theta).

    For endpoint-endpoint pairs theta measures how far the two outward
    tangents are from pointing at each other (0 when the curves continue one
    another); for endpoint-interior pairs it is the angle between the
    endpoint's tangent and the direction to the interior point.
    """
    q_seg = q.segment
    if q_seg == p.segment:
        raise ValueError("connection cost is undefined within a single segment")
    d = float(np.linalg.norm(q.position - p.position))
    if d == 0.0:
        return 0.0
    if isinstance(q, EndpointDescriptor):
        cos_theta = float(np.clip(-(p.tangent @ q.tangent), -1.0, 1.0))
    else:
        cos_theta = float(np.clip(p.tangent @ (q.position - p.position) / d, -1.0, 1.0))
    return (d / s_max) / (2.0 + cos_theta)


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _cluster_key(member):
    # endpoints sort before interior refs; then by segment / end / index
    if member[0] == "e":
        return (member[1], 0 if member[2] == "head" else 1, -1)
    return (member[1], 2, member[2])


def build_clusters(curves: list[CurveSegment], lam: float, s_max: float,
                   interior_stride: int = 3, tangent_window: int = 3,
                   diameter_cap: float | None = None):
    """Best-partner claiming followed by greedy single-linkage cluster merging.

    Returns (ends, interiors, clusters, merge_log, pair_cost).  Every recorded
    merge has cost below `lam`; the log carries (cost, cluster_a, cluster_b)
    tuples so the greedy sequence can be replayed and checked.  A junction is
    a single point, so merged clusters are kept spatially compact: merges that
    would spread members wider than `diameter_cap` (default 2 * s_max) are
    refused even when their linkage cost is below the threshold.
    """
    if diameter_cap is None:
        diameter_cap = 2.0 * s_max
    ends = {}
    for i, seg in enumerate(curves):
        if seg.closed:
            continue
        for end in ("head", "tail"):
            ends[(i, end)] = make_endpoint(curves, i, end, tangent_window)

    # interior candidates: far enough from their own curve's ends that they are
    # genuine T targets rather than stand-ins for a nearby endpoint
    interiors = {}
    for i, seg in enumerate(curves):
        n = len(seg)
        if seg.closed:
            for j in range(0, n, interior_stride):
                interiors[(i, j)] = InteriorPoint(i, j, seg.points[j].copy())
            continue
        arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(seg.points, axis=0), axis=1))])
        total = arc[-1]
        for j in range(1, n - 1, interior_stride):
            if arc[j] > s_max and total - arc[j] > s_max:
                interiors[(i, j)] = InteriorPoint(i, j, seg.points[j].copy())

    def pair_cost(ep_key, member):
        p = ends[(ep_key[1], ep_key[2])]
        if member[0] == "e":
            q = ends[(member[1], member[2])]
        else:
            q = interiors[(member[1], member[2])]
        if q.segment == p.segment:
            return np.inf
        return connection_cost(p, q, s_max)

    ep_members = [("e", k[0], k[1]) for k in sorted(ends)]
    in_members = [("i", k[0], k[1]) for k in sorted(interiors)]
    all_members = ep_members + in_members

    def member_pos(m):
        return ends[(m[1], m[2])].position if m[0] == "e" else interiors[(m[1], m[2])].position

    # step 1: each endpoint claims its single best partner below the threshold
    uf = _UnionFind()
    claimed = set()
    for em in ep_members:
        best = None
        for cand in all_members:
            if cand == em:
                continue
            c = pair_cost(em, cand)
            if np.linalg.norm(member_pos(em) - member_pos(cand)) > diameter_cap:
                continue
            if c < lam and (best is None or (c, _cluster_key(cand)) < (best[0], _cluster_key(best[1]))):
                best = (c, cand)
        if best is not None:
            uf.union(em, best[1])
            claimed.add(em)
            claimed.add(best[1])

    # step 2: greedy single-linkage merging of clusters while the cost stays below lam
    def clusters_of():
        groups = {}
        for m in sorted(claimed, key=_cluster_key):
            groups.setdefault(uf.find(m), []).append(m)
        return list(groups.values())

    def cluster_cost(ca, cb):
        best = np.inf
        for m in ca:
            if m[0] == "e":
                for q in cb:
                    best = min(best, pair_cost(m, q))
        for m in cb:
            if m[0] == "e":
                for q in ca:
                    best = min(best, pair_cost(m, q))
        return best

    def diameter(members):
        pos = np.array([member_pos(m) for m in members])
        if len(pos) < 2:
            return 0.0
        return float(max(np.linalg.norm(pos[i] - pos[j])
                         for i in range(len(pos)) for j in range(i + 1, len(pos))))

    merge_log = []
    while True:
        cl = clusters_of()
        best = None
        for i in range(len(cl)):
            for j in range(i + 1, len(cl)):
                c = cluster_cost(cl[i], cl[j])
                if c >= lam:
                    continue
                if diameter(cl[i] + cl[j]) > diameter_cap:
                    continue
                if best is None or c < best[0] - 1e-15:
                    best = (c, i, j)
        if best is None:
            break
        merge_log.append((best[0], tuple(cl[best[1]]), tuple(cl[best[2]])))
        uf.union(cl[best[1]][0], cl[best[2]][0])

    return ends, interiors, clusters_of(), merge_log, pair_cost


def _oriented(seg: CurveSegment, end_last: str):
    """Points/provenance ordered so the named end comes last."""
    if end_last == "tail":
        return seg.points, seg.provenance
    return seg.points[::-1], seg.provenance[::-1]


def bridge_continuations(curves: list[CurveSegment], lam: float, s_max: float,
                         bridge_angle: float, tangent_window: int,
                         notes: list[str]) -> list[CurveSegment]:
    """Join pairs of curve ends that continue one another across a data gap.

    Repeatedly picks the globally cheapest endpoint pair whose outward
    tangents are anti-aligned within `bridge_angle` and whose connection cost
    is below `lam`, inserting a straight resampled connector.  A pair formed
    by the two ends of one long curve closes that curve instead.
    """
    curves = list(curves)

    def spacing(seg):
        e = np.linalg.norm(np.diff(seg.points, axis=0), axis=1)
        return float(e.mean()) if len(e) else s_max

    while True:
        descs = {}
        for i, seg in enumerate(curves):
            if seg is None or seg.closed:
                continue
            for end in ("head", "tail"):
                descs[(i, end)] = make_endpoint(curves, i, end, tangent_window)
        best = None
        keys = sorted(descs)
        for ai in range(len(keys)):
            for bi in range(ai + 1, len(keys)):
                a, b = descs[keys[ai]], descs[keys[bi]]
                anti = np.degrees(np.arccos(np.clip(-(a.tangent @ b.tangent), -1.0, 1.0)))
                if anti >= bridge_angle:
                    continue
                if a.segment == b.segment:
                    # broken loop: close it if it is long relative to the gap
                    gap = np.linalg.norm(a.position - b.position)
                    arc = curves[a.segment].arc_length()
                    cost = (gap / s_max) / 3.0
                    if cost < lam and arc > 4.0 * gap:
                        if best is None or cost < best[0] - 1e-15:
                            best = (cost, keys[ai], keys[bi], True)
                    continue
                cost = connection_cost(a, b, s_max)
                if cost < lam and (best is None or cost < best[0] - 1e-15):
                    best = (cost, keys[ai], keys[bi], False)
        if best is None:
            return [c for c in curves if c is not None]
        _, ka, kb, same = best
        if same:
            seg = curves[ka[0]]
            curves[ka[0]] = CurveSegment(seg.points.copy(), closed=True,
                                         provenance=seg.provenance.copy())
            notes.append(f"closed broken loop on curve of length {seg.arc_length():.3g}")
            continue
        (ca, enda), (cb, endb) = ka, kb
        pts_a, prov_a = _oriented(curves[ca], enda)
        pts_b, prov_b = _oriented(curves[cb], endb)
        pts_b, prov_b = pts_b[::-1], prov_b[::-1]     # bridged end of B first
        gap = pts_b[0] - pts_a[-1]
        glen = np.linalg.norm(gap)
        step = 0.5 * (spacing(curves[ca]) + spacing(curves[cb]))
        n_conn = int(max(0, round(glen / max(step, 1e-12)) - 1))
        conn = [pts_a[-1] + gap * (k / (n_conn + 1)) for k in range(1, n_conn + 1)]
        new_pts = np.vstack([pts_a] + ([np.array(conn)] if conn else []) + [pts_b])
        new_prov = np.concatenate([prov_a, np.full(len(conn), JUNCTION, dtype=np.uint8), prov_b])
        joined = CurveSegment(new_pts, closed=False, provenance=new_prov)
        curves[ca] = _smooth_joined(joined)
        curves[cb] = None


def _smooth_joined(seg: CurveSegment) -> CurveSegment:
    """Relax the kinks where a straight connector meets the joined curves."""
    from .optimize import Weights, build_problem, optimize

    problem = build_problem([seg], Weights(fidelity=1.0, alignment=0.0, smooth=1.0))
    result = optimize(problem, max_iters=40, outer_iters=1)
    return result.segments[0]


def complete_network(segments: list[CurveSegment], lam: float = 0.9,
                     s_max: float = 1.0, interior_stride: int = 3,
                     bridge_angle: float = 45.0, tangent_window: int = 3,
                     degree_cap: int = 6) -> CurveNetwork:
    """Bridge continuation gaps, then cluster curve ends into junctions.

    Every merge performed has cost below `lam`.  Pairs of ends whose tangents
    continue one another (within `bridge_angle`) are joined into single curves
    across their gap first; the remaining ends cluster into corner junctions
    (least-squares tangent intersection) or T junctions (extension onto the
    interior of another curve).
    """
    notes: list[str] = []
    curves = bridge_continuations(
        [CurveSegment(s.points.copy(), s.closed, s.provenance.copy()) for s in segments],
        lam, s_max, bridge_angle, tangent_window, notes)
    ends, interiors, clusters, _, pair_cost = build_clusters(
        curves, lam, s_max, interior_stride, tangent_window)

    # ---- resolution -------------------------------------------------------
    # handle maps track curve splits and extensions during junction building
    end_map = {k: k for k in ends}               # (seg, end) -> (curve, end)
    interior_map = {k: (k[0], k[1]) for k in interiors}
    alive = [True] * len(curves)

    def curve_spacing(ci):
        pts = curves[ci].points
        e = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        return float(e.mean()) if len(e) else s_max

    def remap_end(orig):
        return end_map.get(orig)

    junction_clusters = clusters
    junctions: list[Junction] = []

    def extend_curve_to(ci, end, point):
        """Append synthesized samples from a curve end out to `point`."""
        seg = curves[ci]
        tip = seg.points[0] if end == "head" else seg.points[-1]
        delta = point - tip
        dist = np.linalg.norm(delta)
        spacing = curve_spacing(ci)
        n_new = int(max(1, round(dist / max(spacing, 1e-12)))) if dist > 1e-12 * max(s_max, 1.0) else 0
        extra = [tip + delta * (k / n_new) for k in range(1, n_new + 1)]
        if not extra:
            return
        extra = np.array(extra)
        prov = np.full(len(extra), JUNCTION, dtype=np.uint8)
        if end == "head":
            pts = np.vstack([extra[::-1], seg.points])
            pv = np.concatenate([prov, seg.provenance])
            shift = len(extra)
        else:
            pts = np.vstack([seg.points, extra])
            pv = np.concatenate([seg.provenance, prov])
            shift = 0
        curves[ci] = CurveSegment(pts, closed=False, provenance=pv)
        if shift:
            for orig, cur in interior_map.items():
                if cur[0] == ci:
                    interior_map[orig] = (ci, cur[1] + shift)

    def split_curve(ci, sub_idx, point, tau):
        """Split curve ci at the interpolated point.

        Returns the list of (curve id, end) handles that sit at the split
        point.  A split landing on an existing open end does not split at all;
        a closed curve cut once becomes a single open curve with both ends at
        the junction.
        """
        seg = curves[ci]
        pts = seg.points
        eps = 1e-7 * max(s_max, 1.0)
        if seg.closed:
            order = np.arange(len(pts))
            rolled = np.roll(order, -(sub_idx + 1) % len(pts))
            ring = pts[rolled]
            prov = seg.provenance[rolled]
            parts_pts, parts_prov, head_pad = [ring], [prov], 0
            if np.linalg.norm(ring[0] - point) > eps:
                parts_pts.insert(0, point[None, :])
                parts_prov.insert(0, np.array([JUNCTION], dtype=np.uint8))
                head_pad = 1
            if np.linalg.norm(ring[-1] - point) > eps:
                parts_pts.append(point[None, :])
                parts_prov.append(np.array([JUNCTION], dtype=np.uint8))
            new_id = len(curves)
            curves.append(CurveSegment(np.vstack(parts_pts), closed=False,
                                       provenance=np.concatenate(parts_prov)))
            alive.append(True)
            alive[ci] = False
            for orig, cur in list(interior_map.items()):
                if cur[0] == ci:
                    pos = int(np.where(rolled == cur[1])[0][0])
                    interior_map[orig] = (new_id, pos + head_pad)
            return [(new_id, "head"), (new_id, "tail")]

        at_head = sub_idx == 0 and np.linalg.norm(point - pts[0]) <= eps
        at_tail = sub_idx == len(pts) - 2 and np.linalg.norm(point - pts[-1]) <= eps
        if at_head:
            return [(ci, "head")]
        if at_tail:
            return [(ci, "tail")]

        left_pts = pts[:sub_idx + 1]
        left_prov = seg.provenance[:sub_idx + 1]
        if np.linalg.norm(left_pts[-1] - point) > eps:
            left_pts = np.vstack([left_pts, point[None, :]])
            left_prov = np.concatenate([left_prov, [JUNCTION]])
        right_pts = pts[sub_idx + 1:]
        right_prov = seg.provenance[sub_idx + 1:]
        if np.linalg.norm(right_pts[0] - point) > eps:
            right_pts = np.vstack([point[None, :], right_pts])
            right_prov = np.concatenate([[JUNCTION], right_prov])
        if len(left_pts) < 2 or len(right_pts) < 2:
            return [(ci, "head" if sub_idx == 0 else "tail")]
        lid = len(curves)
        curves.append(CurveSegment(left_pts, closed=False,
                                   provenance=np.asarray(left_prov, dtype=np.uint8)))
        alive.append(True)
        rid = len(curves)
        curves.append(CurveSegment(right_pts, closed=False,
                                   provenance=np.asarray(right_prov, dtype=np.uint8)))
        alive.append(True)
        alive[ci] = False
        for orig, cur in list(end_map.items()):
            if cur is not None and cur[0] == ci:
                end_map[orig] = (lid, "head") if cur[1] == "head" else (rid, "tail")
        for orig, cur in list(interior_map.items()):
            if cur[0] == ci:
                interior_map[orig] = (lid, cur[1]) if cur[1] <= sub_idx else (rid, cur[1] - sub_idx)
        return [(lid, "tail"), (rid, "head")]

    def resolve_endpoint_cluster(eps_members):
        live = []
        for m in eps_members:
            cur = remap_end((m[1], m[2]))
            if cur is not None and alive[cur[0]]:
                live.append((m, cur))
        if len(live) < 2:
            for m, cur in live:
                notes.append(f"unresolved singleton end {cur}")
            return
        if len(live) == 2 and live[0][1][0] == live[1][1][0]:
            notes.append(f"self-loop guard: both ends of curve {live[0][1][0]}")
            return
        descs = [make_endpoint(curves, cur[0], cur[1], tangent_window) for _, cur in live]
        try:
            corner = solve_corner(descs)
        except DegenerateCornerError:
            corner = np.mean([d.position for d in descs], axis=0)
        span = max(np.linalg.norm(d.position - corner) for d in descs)
        if span > 3.0 * s_max:
            notes.append("corner rejected: solution far outside cluster span")
            corner = np.mean([d.position for d in descs], axis=0)
        jid = len(junctions)
        junctions.append(Junction(position=corner, ends=[]))
        for _, cur in live:
            extend_curve_to(cur[0], cur[1], corner)
            junctions[jid].ends.append(cur)

    for cl in junction_clusters:
        eps = [m for m in cl if m[0] == "e"]
        ins = [m for m in cl if m[0] == "i"]
        live_eps = [m for m in eps
                    if remap_end((m[1], m[2])) is not None and alive[remap_end((m[1], m[2]))[0]]]
        if not live_eps:
            continue
        if len(live_eps) > degree_cap:
            notes.append(f"cluster of {len(live_eps)} ends exceeds degree cap; split at lam/2")
            sub_uf = _UnionFind()
            for a in live_eps:
                for b in live_eps:
                    if a < b and pair_cost(a, b) < lam / 2.0:
                        sub_uf.union(a, b)
            groups = {}
            for m in live_eps:
                groups.setdefault(sub_uf.find(m), []).append(m)
            for g in groups.values():
                if len(g) >= 2:
                    resolve_endpoint_cluster(g)
            continue
        if not ins:
            resolve_endpoint_cluster(eps)
            continue
        # T-junction: lowest-cost (endpoint, interior) pair defines the target
        best = None
        for m in live_eps:
            for q in sorted(ins, key=_cluster_key):
                c = pair_cost(m, q)
                if best is None or c < best[0] - 1e-15:
                    best = (c, m, q)
        _, em, qm = best
        cur_end = remap_end((em[1], em[2]))
        tci, tidx = interior_map[(qm[1], qm[2])]
        if not alive[tci] or cur_end is None or tci == cur_end[0]:
            notes.append(f"unresolved T cluster at {em}")
            continue
        desc = make_endpoint(curves, cur_end[0], cur_end[1], tangent_window)
        try:
            sub_idx, point, tau = extend_to_interior(desc, curves[tci], 2.0 * s_max)
        except NotReachableError:
            sub_idx, tau = tidx, 0.0
            point = curves[tci].points[tidx].copy()
            if sub_idx >= len(curves[tci]) - 1:
                sub_idx = len(curves[tci]) - 2
                tau = 1.0
        target_ends = split_curve(tci, sub_idx, point, tau)
        jid = len(junctions)
        junctions.append(Junction(position=point, ends=list(target_ends)))
        for m in live_eps:
            cur = remap_end((m[1], m[2]))
            if cur is None or not alive[cur[0]]:
                continue
            extend_curve_to(cur[0], cur[1], point)
            junctions[jid].ends.append(cur)

    # ---- assemble output with dense ids -----------------------------------
    id_map = {}
    out_curves = []
    for ci, seg in enumerate(curves):
        if alive[ci]:
            id_map[ci] = len(out_curves)
            out_curves.append(seg)
    out_junctions = []
    adjacency = {}
    for j in junctions:
        ends_list = [(id_map[c], e) for c, e in j.ends
                     if c in id_map and (id_map[c], e) not in adjacency]
        if len(ends_list) < 2:
            notes.append("junction dropped: fewer than two live ends")
            continue
        out_junctions.append(Junction(position=j.position, ends=ends_list))
        for ce in ends_list:
            adjacency[ce] = len(out_junctions) - 1
    open_ends = []
    for ci, seg in enumerate(out_curves):
        if seg.closed:
            continue
        for end in ("head", "tail"):
            if (ci, end) not in adjacency:
                open_ends.append((ci, end))
    return CurveNetwork(curves=out_curves, junctions=out_junctions,
                        adjacency=adjacency, open_ends=open_ends, notes=notes)
