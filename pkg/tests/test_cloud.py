import numpy as np
import pytest

from curvenet.cloud import (EmptyCloudError, MalformedRecordError, PointCloud,
                            all_variations, detect_feature_points, load_point_cloud,
                            neighborhood, neighborhood_of_points, save_ply, save_xyz,
                            surface_variation)
from curvenet.synthetic import SyntheticSpec, generate_synthetic

from oracles import cube_wireframe_distance, sigma_brute


def test_xyz_three_points(tmp_path):
    path = tmp_path / "tri.xyz"
    path.write_text("0 0 0\n1 0 0\n0 1 0\n")
    cloud = load_point_cloud(path)
    assert len(cloud) == 3
    assert cloud.normals is None
    assert cloud.bbox_diagonal == pytest.approx(np.sqrt(2))


def test_xyz_order_preserved(tmp_path):
    path = tmp_path / "f.xyz"
    path.write_text("3 0 0\n1 0 0\n2 0 0\n")
    cloud = load_point_cloud(path)
    assert cloud.points[:, 0].tolist() == [3.0, 1.0, 2.0]


def test_xyz_malformed_token_reports_line(tmp_path):
    path = tmp_path / "bad.xyz"
    path.write_text("0 0 0\n1 oops 0\n")
    with pytest.raises(MalformedRecordError) as err:
        load_point_cloud(path)
    assert err.value.line_no == 2


def test_xyz_bad_column_count(tmp_path):
    path = tmp_path / "bad.xyz"
    path.write_text("0 0 0 1\n")
    with pytest.raises(MalformedRecordError):
        load_point_cloud(path)


def test_empty_cloud_rejected(tmp_path):
    path = tmp_path / "empty.xyz"
    path.write_text("\n")
    with pytest.raises(EmptyCloudError):
        load_point_cloud(path)


@pytest.mark.parametrize("binary", [True, False])
def test_ply_round_trip_with_normals(tmp_path, binary):
    rng = np.random.default_rng(3)
    pts = rng.normal(0, 1, (50, 3))
    normals = rng.normal(0, 1, (50, 3))
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    cloud = PointCloud(pts, normals)
    path = tmp_path / "c.ply"
    save_ply(path, cloud, binary=binary)
    back = load_point_cloud(path)
    assert len(back) == 50
    assert back.normals is not None
    # float32 storage
    assert np.allclose(back.points, pts, atol=1e-6)
    assert np.allclose(back.normals, normals, atol=1e-6)
    assert np.allclose(np.linalg.norm(back.normals, axis=1), 1.0, atol=1e-6)


def test_xyz_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    cloud = PointCloud(rng.normal(0, 1, (20, 3)))
    path = tmp_path / "c.xyz"
    save_xyz(path, cloud)
    back = load_point_cloud(path)
    assert np.allclose(back.points, cloud.points, atol=1e-7)


def test_ply_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ply"
    path.write_bytes(b"not a ply file\n")
    with pytest.raises(MalformedRecordError):
        load_point_cloud(path)


def test_neighborhood_coplanar_lambda1_zero():
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.normal(0, 1, 30), rng.normal(0, 1, 30), np.zeros(30)])
    cloud = PointCloud(pts)
    stats = neighborhood(cloud, 0, 12)
    assert stats.eigenvalues[0] < 1e-10


def test_neighborhood_isotropic_offsets():
    pts = np.array([[0, 0, 0], [1, 0, 0], [-1, 0, 0], [0, 1, 0],
                    [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    stats = neighborhood(PointCloud(pts), 0, 7)
    assert np.allclose(stats.eigenvalues, stats.eigenvalues[0])
    assert stats.eigenvalues[0] == pytest.approx(2.0 / 7.0)
    assert surface_variation(stats) == pytest.approx(1.0 / 3.0)


def test_neighborhood_matches_charpoly_oracle():
    rng = np.random.default_rng(7)
    for _ in range(25):
        pts = rng.normal(0, 1, (16, 3)) * rng.uniform(0.2, 3.0, 3)
        stats = neighborhood_of_points(pts)
        expected = sigma_brute(pts)
        assert surface_variation(stats) == pytest.approx(expected, abs=1e-8)


def test_neighborhood_k_out_of_range():
    cloud = PointCloud(np.random.default_rng(1).normal(0, 1, (5, 3)))
    with pytest.raises(ValueError):
        neighborhood(cloud, 0, 6)
    with pytest.raises(ValueError):
        neighborhood(cloud, 0, 0)


def test_eigenvalue_sum_equals_trace():
    rng = np.random.default_rng(9)
    for _ in range(10):
        pts = rng.normal(0, 1, (20, 3))
        stats = neighborhood_of_points(pts)
        centered = pts - pts.mean(axis=0)
        cov = centered.T @ centered / len(pts)
        assert stats.eigenvalues.sum() == pytest.approx(np.trace(cov), abs=1e-10)


def test_sigma_degenerate_is_zero():
    pts = np.zeros((8, 3))
    assert surface_variation(neighborhood_of_points(pts)) == 0.0


def test_sigma_direct_substitution():
    from curvenet.cloud import NeighborhoodStats
    stats = NeighborhoodStats(np.array([1.0, 4.0, 5.0]), np.eye(3), np.zeros(3))
    assert surface_variation(stats) == pytest.approx(0.1)


def test_sigma_scale_rotation_translation_invariant():
    rng = np.random.default_rng(11)
    pts = rng.normal(0, 1, (200, 3))
    cloud = PointCloud(pts)
    base = all_variations(cloud, 12)
    # scale
    for s in (0.1, 7.3):
        scaled = all_variations(PointCloud(pts * s), 12)
        assert np.allclose(scaled, base, atol=1e-9)
    # rigid motion
    theta = 0.83
    rot = np.array([[np.cos(theta), -np.sin(theta), 0],
                    [np.sin(theta), np.cos(theta), 0], [0, 0, 1]])
    moved = all_variations(PointCloud(pts @ rot.T + np.array([5.0, -2.0, 11.0])), 12)
    assert np.allclose(moved, base, atol=1e-9)


def test_detect_plane_gives_empty_set():
    rng = np.random.default_rng(2)
    pts = np.column_stack([rng.random(2000), rng.random(2000), np.zeros(2000)])
    feats = detect_feature_points(PointCloud(pts), 16, 0.04)
    assert len(feats) == 0


def test_detect_negative_threshold_selects_all():
    rng = np.random.default_rng(2)
    cloud = PointCloud(rng.normal(0, 1, (100, 3)))
    feats = detect_feature_points(cloud, 8, -1.0)
    assert len(feats) == 100


def test_detect_monotone_in_threshold():
    rng = np.random.default_rng(5)
    cloud = PointCloud(rng.normal(0, 1, (300, 3)))
    prev = None
    for sigma_t in (0.0, 0.05, 0.1, 0.2, 0.3):
        feats = set(detect_feature_points(cloud, 10, sigma_t).indices.tolist())
        if prev is not None:
            assert feats <= prev
        prev = feats


def test_detect_cube_features_hug_edges():
    # clean 20k cube sampling: selected points lie near the wireframe.  The
    # high-variation band around an edge extends to sqrt(k/pi) sampling
    # pitches on each side, so with k=16 everything selected must fall within
    # two pitches (pitch = sqrt(area / n), about twice the median
    # nearest-neighbor distance for uniform random sampling).
    spec = SyntheticSpec(shape="cube", density=20000 / 6, noise=0.0, seed=5)
    cloud, _ = generate_synthetic(spec)
    feats = detect_feature_points(cloud, 16, 0.04)
    assert len(feats) > 100
    pitch = (6.0 / len(cloud)) ** 0.5
    dists = [cube_wireframe_distance(p) for p in feats.positions(cloud)]
    assert max(dists) <= 2.0 * pitch


def test_variations_stored_exceed_threshold(holey_cube):
    cloud, _ = holey_cube
    feats = detect_feature_points(cloud, 32, 0.04)
    assert np.all(feats.variations > 0.04)
    assert len(np.unique(feats.indices)) == len(feats.indices)
