import numpy as np
import pytest

from curvenet.cloud import PointCloud, FeaturePointSet
from curvenet.extract import CurveSegment
from curvenet.regularity import RegularityLabel
from curvenet.optimize import (NonFiniteEnergyError, Weights, alignment_targets,
                               build_problem, default_weights, energy_and_gradient,
                               optimize)


def random_problem(rng, n_curves=3, n_points=20, weights=None, labels=None,
                   close_second=True):
    segs = []
    for i in range(n_curves):
        base = rng.normal(0, 1, 3)
        d = rng.normal(0, 1, 3)
        d /= np.linalg.norm(d)
        t = np.linspace(0, 1, n_points)
        pts = base + np.outer(t, d) + rng.normal(0, 0.05, (n_points, 3))
        segs.append(CurveSegment(pts, closed=(close_second and i == 1)))
    problem = build_problem(segs, weights or Weights(0.3, 0.8, 0.5), labels or [])
    problem.targets = problem.initial + rng.normal(0, 0.05, problem.initial.shape)
    return problem


def fd_gradient(problem, x, h):
    g = np.zeros_like(x)
    for k in range(len(x)):
        xp = x.copy(); xp[k] += h
        xm = x.copy(); xm[k] -= h
        g[k] = (energy_and_gradient(problem, xp)[0].total
                - energy_and_gradient(problem, xm)[0].total) / (2 * h)
    return g


ALL_LABELS = [
    ("line", lambda: [RegularityLabel("Line", (0,), {})]),
    ("circle", lambda: [RegularityLabel("Circle", (1,), {"radius": 1.0})]),
    ("coplanar", lambda: [RegularityLabel("CoplanarGroup", (0, 2), {})]),
    ("parallel", lambda: [RegularityLabel("ParallelPair", (0, 2), {"reversed": False})]),
    ("symmetry", lambda: [RegularityLabel("SymmetricPair", (0, 2), {"reversed": True})]),
]


@pytest.mark.parametrize("name,make_labels", ALL_LABELS)
def test_gradient_each_label_term(name, make_labels):
    rng = np.random.default_rng(hash(name) % 2**32)
    for trial in range(5):
        problem = random_problem(rng, labels=make_labels(),
                                 weights=Weights(0.0, 1e-9, 0.0))
        x = problem.initial.ravel() + rng.normal(0, 0.03, problem.initial.size)
        _, g = energy_and_gradient(problem, x)
        h = 1e-6 * problem.bbox_diagonal
        gfd = fd_gradient(problem, x, h)
        denom = max(np.abs(gfd).max(), 1e-12)
        assert np.abs(g - gfd).max() / denom < 1e-5


def test_gradient_combined_objective():
    rng = np.random.default_rng(99)
    labels = [factory() [0] for _, factory in ALL_LABELS]
    for trial in range(5):
        problem = random_problem(rng, labels=list(labels))
        x = problem.initial.ravel() + rng.normal(0, 0.03, problem.initial.size)
        _, g = energy_and_gradient(problem, x)
        gfd = fd_gradient(problem, x, 1e-6 * problem.bbox_diagonal)
        assert np.abs(g - gfd).max() / max(np.abs(gfd).max(), 1e-12) < 1e-5


def test_zero_residual_is_stationary():
    t = np.linspace(0, 1, 15)
    seg = CurveSegment(np.column_stack([t, np.zeros(15), np.zeros(15)]))
    problem = build_problem([seg], Weights(0.5, 1.0, 1.0))
    bd, g = energy_and_gradient(problem, problem.initial.ravel())
    assert bd.total == pytest.approx(0.0, abs=1e-16)
    assert np.linalg.norm(g) < 1e-10


def test_breakdown_total_matches_weighted_sum():
    rng = np.random.default_rng(4)
    labels = [factory()[0] for _, factory in ALL_LABELS]
    problem = random_problem(rng, labels=labels)
    for term in problem.labels:
        term.mu = rng.uniform(0.5, 8.0)
    x = problem.initial.ravel() + rng.normal(0, 0.05, problem.initial.size)
    bd, _ = energy_and_gradient(problem, x)
    w = problem.weights
    expected = (w.fidelity * bd.per_term["fidelity"]
                + w.alignment * bd.per_term["alignment"]
                + w.smooth * bd.per_term["smooth"]
                + sum(l["mu"] * l["raw"] for l in bd.per_label))
    assert bd.total == pytest.approx(expected, rel=1e-10)
    assert all(v >= 0 for v in bd.per_term.values())


def test_dimension_mismatch_rejected():
    problem = random_problem(np.random.default_rng(0))
    with pytest.raises(ValueError):
        energy_and_gradient(problem, np.zeros(7))


def test_non_finite_energy_reports_term():
    problem = random_problem(np.random.default_rng(1))
    x = problem.initial.ravel().copy()
    x[0] = np.inf
    with pytest.raises(NonFiniteEnergyError):
        energy_and_gradient(problem, x)


def test_rigid_invariance_of_total():
    rng = np.random.default_rng(13)
    labels = [factory()[0] for _, factory in ALL_LABELS]
    segs = []
    for i in range(3):
        t = np.linspace(0, 1, 20)
        pts = rng.normal(0, 1, 3) + np.outer(t, [1, 0, 0]) + rng.normal(0, 0.04, (20, 3))
        segs.append(CurveSegment(pts, closed=(i == 1)))
    from curvenet.optimize import refit_labels

    problem = build_problem(segs, Weights(0.3, 0.8, 0.5), list(labels))
    problem.targets = problem.initial + rng.normal(0, 0.03, problem.initial.shape)
    x = problem.initial.ravel() + rng.normal(0, 0.02, problem.initial.size)
    refit_labels(problem, x)
    bd0, _ = energy_and_gradient(problem, x)

    theta = 0.9
    rot = np.array([[np.cos(theta), -np.sin(theta), 0],
                    [np.sin(theta), np.cos(theta), 0], [0, 0, 1]])
    shift = np.array([4.0, -2.0, 0.5])
    moved = [CurveSegment(s.points @ rot.T + shift, closed=s.closed) for s in segs]
    problem2 = build_problem(moved, Weights(0.3, 0.8, 0.5), list(labels))
    problem2.targets = problem.targets @ rot.T + shift
    x2 = (x.reshape(-1, 3) @ rot.T + shift).ravel()
    refit_labels(problem2, x2)
    bd1, _ = energy_and_gradient(problem2, x2)
    assert bd1.total == pytest.approx(bd0.total, rel=1e-8)


def test_alignment_targets_cases():
    # single neighbor -> the neighbor itself; two equal-weight -> midpoint;
    # weighted triple -> hand-computed weighted mean
    cloud_pts = np.array([[0.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0], [5, 5, 5]])
    cloud = PointCloud(cloud_pts)
    feats = FeaturePointSet(indices=np.array([0, 1, 2]),
                            variations=np.array([0.1, 0.2, 0.3]),
                            threshold=0.04, k=4)
    seg = CurveSegment(np.array([[0.4, 0.2, 0.0], [10.0, 10.0, 10.0]]))
    targets = alignment_targets(cloud, feats, [seg], radius=2.0)
    expected = (0.1 * cloud_pts[0] + 0.2 * cloud_pts[1] + 0.3 * cloud_pts[2]) / 0.6
    assert np.allclose(targets[0], expected, atol=1e-12)
    assert np.allclose(targets[1], seg.points[1])   # no features near -> self

    feats1 = FeaturePointSet(indices=np.array([1]), variations=np.array([0.5]),
                             threshold=0.04, k=4)
    t1 = alignment_targets(cloud, feats1, [seg], radius=2.0)
    assert np.allclose(t1[0], cloud_pts[1])

    feats2 = FeaturePointSet(indices=np.array([0, 1]), variations=np.array([0.2, 0.2]),
                             threshold=0.04, k=4)
    t2 = alignment_targets(cloud, feats2, [seg], radius=2.0)
    assert np.allclose(t2[0], [0.5, 0, 0])


def test_pure_fidelity_returns_initial():
    rng = np.random.default_rng(3)
    problem = random_problem(rng, weights=Weights(1.0, 0.0, 0.0))
    problem.targets = problem.initial.copy()
    result = optimize(problem)
    pts = np.vstack([s.points for s in result.segments])
    assert np.allclose(pts, problem.initial, atol=1e-12)


def test_descent_and_zigzag_smoothing():
    zig = np.column_stack([np.arange(30) * 0.1,
                           0.2 * (-1.0) ** np.arange(30), np.zeros(30)])
    seg = CurveSegment(zig)
    problem = build_problem([seg], Weights(1e-4, 1e-4, 10.0))
    result = optimize(problem)
    smooth_history = [h["terms"]["smooth"] for h in result.history]
    for prev, cur in zip(smooth_history, smooth_history[1:]):
        assert cur <= prev * (1 + 1e-9) + 1e-12
    totals = [h["total"] for h in result.history]
    for prev, cur in zip(totals, totals[1:]):
        assert cur <= prev * (1 + 1e-12) + 1e-15
    # converged toward the chord: residual perpendicular spread collapsed
    out = result.segments[0].points
    assert np.abs(out[:, 1]).max() < 0.02


def test_noisy_line_label_residual_reduction():
    rng = np.random.default_rng(42)
    t = np.linspace(0, 1, 40)
    noise = rng.normal(0, 0.01, (40, 2))
    seg = CurveSegment(np.column_stack([t, noise[:, 0], noise[:, 1]]))

    def max_line_residual(pts):
        c = pts.mean(axis=0)
        _, _, vt = np.linalg.svd(pts - c, full_matrices=False)
        d = vt[0]
        perp = (pts - c) - np.outer((pts - c) @ d, d)
        return np.linalg.norm(perp, axis=1).max()

    pre = max_line_residual(seg.points)
    problem = build_problem([seg], Weights(0.1, 1.0, 1.0),
                            [RegularityLabel("Line", (0,), {})],
                            target_factor=0.02)
    problem.targets = problem.initial.copy()
    result = optimize(problem, outer_iters=8)
    post = max_line_residual(result.segments[0].points)
    assert post <= 0.1 * pre


def test_perfect_circle_label_zero_energy():
    ang = 2 * np.pi * np.arange(24) / 24
    seg = CurveSegment(np.column_stack([np.cos(ang), np.sin(ang), np.zeros(24)]),
                       closed=True)
    problem = build_problem([seg], Weights(0.5, 1.0, 0.1),
                            [RegularityLabel("Circle", (0,), {"radius": 1.0})])
    bd, _ = energy_and_gradient(problem, problem.initial.ravel())
    assert bd.per_term["circle"] == pytest.approx(0.0, abs=1e-12)


def test_default_weights_presets():
    scan = default_weights("scan")
    assert (scan.fidelity, scan.alignment, scan.smooth) == (0.1, 1.0, 1.0)
    synth = default_weights("synthetic")
    assert (synth.fidelity, synth.alignment, synth.smooth) == (0.1, 1.0, 0.5)
    for w in (scan, synth):
        assert min(w.fidelity, w.alignment, w.smooth) > 0
    with pytest.raises(ValueError):
        default_weights("bogus")


def test_weights_gauge_validation():
    with pytest.raises(ValueError):
        Weights(0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Weights(-1.0, 1.0, 1.0)


def test_optimize_final_not_above_initial():
    rng = np.random.default_rng(21)
    labels = [factory()[0] for _, factory in ALL_LABELS]
    problem = random_problem(rng, labels=labels)
    result = optimize(problem)
    assert result.final.total <= result.initial.total * (1 + 1e-12)
