import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from curvenet.service import SESSIONS, create_app
from curvenet.cloud import save_ply
from curvenet.synthetic import SyntheticSpec, generate_synthetic

from conftest import CUBE_PIPELINE_PARAMS, CUBE_HOLES, DIAG

STAGES = ("detect", "extract", "regularize", "optimize", "complete")


@pytest.fixture()
def client():
    SESSIONS.clear()
    return TestClient(create_app())


@pytest.fixture(scope="module")
def cube_bytes(tmp_path_factory):
    spec = SyntheticSpec(shape="cube", density=20000 / 6, noise=0.003,
                         holes=CUBE_HOLES, seed=0)
    cloud, _ = generate_synthetic(spec)
    path = tmp_path_factory.mktemp("svc") / "cube.ply"
    save_ply(path, cloud)
    return path.read_bytes()


def make_session(client, payload=b"0 0 0\n1 0 0\n0 1 0\n1 1 0\n", name="tiny.xyz"):
    r = client.post("/sessions", files={"cloud": (name, payload)})
    assert r.status_code == 200
    return r.json()["id"]


def post(client, sid, path, body):
    return client.post(f"/sessions/{sid}{path}", content=json.dumps(body))


def test_create_session_and_isolation(client):
    sid1 = make_session(client)
    sid2 = make_session(client)
    assert sid1 != sid2
    assert SESSIONS[sid1].revision == 0


def test_create_session_parse_error(client):
    r = client.post("/sessions", files={"cloud": ("bad.xyz", b"not numbers here\n")})
    assert r.status_code == 400


def test_create_session_empty_file(client):
    r = client.post("/sessions", files={"cloud": ("empty.xyz", b"")})
    assert r.status_code == 400


def test_stage_order_enforced(client):
    sid = make_session(client)
    r = post(client, sid, "/stages/complete", {})
    assert r.status_code == 409


def test_unknown_session_404(client):
    r = client.post("/sessions/nope/stages/detect", content="{}")
    assert r.status_code == 404


def test_detect_on_plane_zero_features(client):
    rng = np.random.default_rng(0)
    lines = "".join(f"{x} {y} 0\n" for x, y in rng.random((3000, 2)))
    sid = make_session(client, lines.encode())
    r = post(client, sid, "/stages/detect", {"params": {"k": 16, "sigma_t": 0.04}})
    assert r.status_code == 200
    assert r.json()["summary"]["count"] == 0


def test_full_session_flow_with_bridge_stroke(client, cube_bytes):
    sid = make_session(client, cube_bytes, "cube.ply")
    params = dict(CUBE_PIPELINE_PARAMS)
    for stage in ("detect", "extract", "regularize"):
        r = post(client, sid, f"/stages/{stage}", {"params": params})
        assert r.status_code == 200, r.text

    # bridge a seeded gap: the edge (x,0,0) has a hole at its middle
    seg_art = client.get(f"/sessions/{sid}/artifacts/extract").json()
    n_before = len(seg_art["curves"])
    stroke = [[0.36, 0.0, 0.0], [0.5, 0.0, 0.0], [0.64, 0.0, 0.0]]
    r = post(client, sid, "/strokes", {"intent": "bridge", "points": stroke})
    assert r.status_code == 200, r.text
    affected = r.json()["affected"]
    assert len(affected) == 1
    seg_art = client.get(f"/sessions/{sid}/artifacts/extract").json()
    assert len(seg_art["curves"]) == n_before - 1   # two curves merged into one
    merged = seg_art["curves"][affected[0]]
    assert "stroke" in merged["provenance"]

    for stage in ("regularize", "optimize", "complete"):
        r = post(client, sid, f"/stages/{stage}", {"params": params})
        assert r.status_code == 200, r.text
    net = client.get(f"/sessions/{sid}/artifacts/complete").json()
    assert len(net["junctions"]) == 8
    assert len(net["curves"]) == 12


def test_optimize_events_non_increasing(client, cube_bytes):
    sid = make_session(client, cube_bytes, "cube.ply")
    params = dict(CUBE_PIPELINE_PARAMS)
    for stage in ("detect", "extract", "regularize", "optimize"):
        assert post(client, sid, f"/stages/{stage}", {"params": params}).status_code == 200
    r = client.get(f"/sessions/{sid}/events")
    events = [json.loads(line[6:]) for line in r.text.splitlines()
              if line.startswith("data: ")]
    progress = [e for e in events if e["type"] == "optimize-progress"]
    assert progress
    for ev in progress:
        totals = [it["total"] for it in ev["payload"]["iterates"]]
        for prev, cur in zip(totals, totals[1:]):
            assert cur <= prev * (1 + 1e-12) + 1e-15
    revisions = [e["revision"] for e in events]
    assert revisions == sorted(revisions)


def test_events_since_filter(client):
    sid = make_session(client)
    post(client, sid, "/stages/detect", {"params": {"k": 2, "sigma_t": 0.04}})
    all_events = client.get(f"/sessions/{sid}/events").text
    later = client.get(f"/sessions/{sid}/events", params={"since": 0}).text
    assert len(later) <= len(all_events)


def test_revision_conflict_rejected(client):
    sid = make_session(client)
    r = post(client, sid, "/stages/detect", {"params": {"k": 2, "sigma_t": 0.04}})
    rev = r.json()["revision"]
    # replay with the stale (pre-request) revision token
    r = post(client, sid, "/stages/detect", {"params": {"k": 2}, "revision": rev - 1})
    assert r.status_code == 409
    # with the current one it re-runs fine
    r = post(client, sid, "/stages/detect", {"params": {"k": 2}, "revision": rev})
    assert r.status_code == 200


def test_erase_stroke_removes_segment(client, cube_bytes):
    sid = make_session(client, cube_bytes, "cube.ply")
    params = dict(CUBE_PIPELINE_PARAMS)
    for stage in ("detect", "extract"):
        post(client, sid, f"/stages/{stage}", {"params": params})
    art = client.get(f"/sessions/{sid}/artifacts/extract").json()
    n_before = len(art["curves"])
    victim = art["curves"][0]["points"]
    r = post(client, sid, "/strokes", {"intent": "erase", "points": victim})
    assert r.status_code == 200
    art = client.get(f"/sessions/{sid}/artifacts/extract").json()
    assert len(art["curves"]) == n_before - 1


def test_new_curve_stroke(client, cube_bytes):
    sid = make_session(client, cube_bytes, "cube.ply")
    params = dict(CUBE_PIPELINE_PARAMS)
    for stage in ("detect", "extract"):
        post(client, sid, f"/stages/{stage}", {"params": params})
    art = client.get(f"/sessions/{sid}/artifacts/extract").json()
    n_before = len(art["curves"])
    r = post(client, sid, "/strokes",
             {"intent": "new-curve",
              "points": [[0.2, 0.5, 0.5], [0.5, 0.5, 0.5], [0.8, 0.5, 0.5]]})
    assert r.status_code == 200
    art = client.get(f"/sessions/{sid}/artifacts/extract").json()
    assert len(art["curves"]) == n_before + 1


def test_bridge_without_snappable_ends_warns(client, cube_bytes):
    sid = make_session(client, cube_bytes, "cube.ply")
    params = dict(CUBE_PIPELINE_PARAMS)
    for stage in ("detect", "extract"):
        post(client, sid, f"/stages/{stage}", {"params": params})
    r = post(client, sid, "/strokes",
             {"intent": "bridge", "points": [[5.0, 5.0, 5.0], [6.0, 6.0, 6.0]]})
    assert r.status_code == 200
    assert r.json()["affected"] == []
    assert "warning" in r.json()


def test_stroke_validation(client, cube_bytes):
    sid = make_session(client, cube_bytes, "cube.ply")
    params = dict(CUBE_PIPELINE_PARAMS)
    for stage in ("detect", "extract"):
        post(client, sid, f"/stages/{stage}", {"params": params})
    assert post(client, sid, "/strokes",
                {"intent": "bridge", "points": [[0, 0, 0]]}).status_code == 400
    assert post(client, sid, "/strokes",
                {"intent": "scribble", "points": [[0, 0, 0], [1, 1, 1]]}).status_code == 400


def test_confirm_labels_flow(client, cube_bytes):
    sid = make_session(client, cube_bytes, "cube.ply")
    params = dict(CUBE_PIPELINE_PARAMS)
    for stage in ("detect", "extract", "regularize"):
        post(client, sid, f"/stages/{stage}", {"params": params})
    labels = client.get(f"/sessions/{sid}/artifacts/regularize").json()["labels"]
    assert labels
    line_ids = [l["id"] for l in labels if l["kind"] == "Line"]
    other_ids = [l["id"] for l in labels if l["kind"] != "Line"]

    # unknown id
    r = post(client, sid, "/labels", {"reject": ["nonexistent-id"]})
    assert r.status_code == 404
    assert "nonexistent-id" in r.text

    # reject everything -> optimization runs with data terms only
    r = post(client, sid, "/labels", {"reject": line_ids + other_ids})
    assert r.status_code == 200
    post(client, sid, "/stages/optimize", {"params": params})
    hist = client.get(f"/sessions/{sid}/artifacts/optimize").json()["history"]
    assert all(h["terms"]["line"] == 0 for h in hist)

    # re-detection keeps rejections: no rejected fingerprint comes back
    # (new labels on the now-optimized curves are allowed)
    rejected_fps = {f"{l['kind']}:{','.join(map(str, sorted(l['members'])))}"
                    for l in labels}
    post(client, sid, "/stages/regularize", {"params": params})
    labels2 = client.get(f"/sessions/{sid}/artifacts/regularize").json()["labels"]
    fps2 = {f"{l['kind']}:{','.join(map(str, sorted(l['members'])))}" for l in labels2}
    assert not (fps2 & rejected_fps)

    # accept a line label again: term becomes active
    # (fresh session to clear persisted rejections)
    sid2 = make_session(client, cube_bytes, "cube.ply")
    for stage in ("detect", "extract", "regularize"):
        post(client, sid2, f"/stages/{stage}", {"params": params})
    post(client, sid2, "/stages/optimize", {"params": params})
    hist = client.get(f"/sessions/{sid2}/artifacts/optimize").json()["history"]
    assert any(h["terms"]["line"] > 0 for h in hist)


def test_symmetry_endpoint(client):
    # half wireframe cloud: band along one edge plus its mirror-missing side
    rng = np.random.default_rng(1)
    spec = SyntheticSpec(shape="cube", density=20000 / 6, noise=0.003,
                         holes=[((1.0, 0.5, 0.5), 0.75)], seed=0)
    cloud, _ = generate_synthetic(spec)
    import io
    from curvenet.cloud import save_ply
    import tempfile, os
    with tempfile.NamedTemporaryFile(suffix=".ply", delete=False) as fh:
        tmp = fh.name
    save_ply(tmp, cloud)
    payload = open(tmp, "rb").read()
    os.unlink(tmp)

    sid = make_session(client, payload, "half.ply")
    params = dict(CUBE_PIPELINE_PARAMS)
    for stage in ("detect", "extract"):
        post(client, sid, f"/stages/{stage}", {"params": params})
    before = len(client.get(f"/sessions/{sid}/artifacts/extract").json()["curves"])

    r = post(client, sid, "/symmetry",
             {"enabled": True, "plane": {"point": [0.5, 0.5, 0.5], "normal": [1, 0, 0]}})
    assert r.status_code == 200
    mirrored = r.json()["mirrored"]
    assert len(mirrored) >= 4   # the four missing face edges
    after = client.get(f"/sessions/{sid}/artifacts/extract").json()["curves"]
    assert len(after) == before + len(mirrored)
    assert all(p == "mirrored" for idx in mirrored for p in after[idx]["provenance"])

    # disabling removes the unaccepted mirrors
    r = post(client, sid, "/symmetry", {"enabled": False})
    assert r.status_code == 200
    after = client.get(f"/sessions/{sid}/artifacts/extract").json()["curves"]
    assert len(after) == before


def test_symmetry_without_plane_or_pairs_fails(client):
    rng = np.random.default_rng(2)
    base = np.column_stack([np.linspace(0, 1, 1500), np.zeros(1500), np.zeros(1500)])
    band = base + rng.normal(0, 0.002, base.shape)
    lines = "".join(f"{p[0]} {p[1]} {p[2]}\n" for p in band)
    sid = make_session(client, lines.encode())
    post(client, sid, "/stages/detect", {"params": {"k": 12, "sigma_t": 0.01}})
    post(client, sid, "/stages/extract", {"params": {}})
    r = post(client, sid, "/symmetry", {"enabled": True})
    assert r.status_code == 422
