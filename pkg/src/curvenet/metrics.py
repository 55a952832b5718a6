"""Distances between an extracted curve network and a ground-truth wireframe."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .network import CurveNetwork
from .synthetic import Wireframe


def sample_polyline(points: np.ndarray, step: float, closed: bool = False) -> np.ndarray:
    """Points along a polyline at roughly `step` spacing (vertices included)."""
    pts = np.vstack([points, points[:1]]) if closed else points
    out = [pts[0][None, :]]
    for a, b in zip(pts[:-1], pts[1:]):
        d = np.linalg.norm(b - a)
        n = max(1, int(np.ceil(d / step)))
        t = np.arange(1, n + 1) / n
        out.append(a[None, :] + t[:, None] * (b - a)[None, :])
    return np.vstack(out)


def _wire_bbox_diag(truth: Wireframe) -> float:
    pts = []
    for a, b in truth.edges:
        pts += [a, b]
    for c, r, _ in truth.circles:
        pts += [c - r, c + r]
    arr = np.array(pts)
    return float(np.linalg.norm(arr.max(axis=0) - arr.min(axis=0)))


def network_metrics(network: CurveNetwork, truth: Wireframe,
                    step: float | None = None) -> dict:
    """Symmetric Hausdorff / mean distances, junction error, per-curve assignment."""
    if not network.curves or (not truth.edges and not truth.circles):
        raise ValueError("network and truth must both be non-empty")
    if step is None:
        step = _wire_bbox_diag(truth) / 1000.0
    truth_pts = truth.sample(step)

    net_samples = [sample_polyline(c.points, step, c.closed) for c in network.curves]
    net_pts = np.vstack(net_samples)

    truth_tree = cKDTree(truth_pts)
    net_tree = cKDTree(net_pts)
    d_net_to_truth, _ = truth_tree.query(net_pts)
    d_truth_to_net, _ = net_tree.query(truth_pts)

    # nearest truth primitive per curve (edges first, then circles)
    prim_pts, prim_ids = [], []
    for i, (a, b) in enumerate(truth.edges):
        p = Wireframe(edges=[(a, b)]).sample(step)
        prim_pts.append(p)
        prim_ids.append(np.full(len(p), i))
    for j, circ in enumerate(truth.circles):
        p = Wireframe(circles=[circ]).sample(step)
        prim_pts.append(p)
        prim_ids.append(np.full(len(p), len(truth.edges) + j))
    prim_tree = cKDTree(np.vstack(prim_pts))
    prim_ids = np.concatenate(prim_ids)
    assignment = []
    for samples in net_samples:
        d, idx = prim_tree.query(samples)
        ids, counts = np.unique(prim_ids[idx], return_counts=True)
        assignment.append(int(ids[np.argmax(counts)]))

    truth_junctions = truth.corner_count()
    return {
        "hausdorff": float(max(d_net_to_truth.max(), d_truth_to_net.max())),
        "hausdorff_network_to_truth": float(d_net_to_truth.max()),
        "hausdorff_truth_to_network": float(d_truth_to_net.max()),
        "mean_distance": float(0.5 * (d_net_to_truth.mean() + d_truth_to_net.mean())),
        "junction_count": len(network.junctions),
        "truth_junction_count": truth_junctions,
        "junction_count_error": len(network.junctions) - truth_junctions,
        "curve_count": len(network.curves),
        "per_curve_assignment": assignment,
        "sample_step": step,
    }
