"""Driving the session service programmatically: stages, a bridge stroke, labels.

Uses the in-process test client so no server needs to be running; the HTTP
payloads are exactly what the browser UI sends.
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from curvenet import SyntheticSpec, generate_synthetic, save_ply
from curvenet.service import create_app

diag = 3 ** 0.5
holes = [((0.5, 0, 0), 0.08 * diag)]
spec = SyntheticSpec(shape="cube", density=20000 / 6, noise=0.003, holes=holes, seed=0)
cloud, _ = generate_synthetic(spec)
ply = Path(tempfile.mkdtemp(prefix="curvenet-session-")) / "cube.ply"
save_ply(ply, cloud)

client = TestClient(create_app())
r = client.post("/sessions", files={"cloud": ("cube.ply", ply.read_bytes())})
sid = r.json()["id"]
print(f"session {sid}: {r.json()['points']} points")

params = {"k": 32, "sigma_t": 0.04, "regularity_tol": 0.08,
          "growth": {"s_max": 8.0, "min_points": 5, "corner_ratio": 0.6},
          "completion_radius": 0.15 * diag, "alignment_radius": 0.08,
          "weights": "scan", "lambda_merge": 0.9}

for stage in ("detect", "extract", "regularize"):
    r = client.post(f"/sessions/{sid}/stages/{stage}",
                    content=json.dumps({"params": params}))
    print(f"{stage:10s} rev={r.json()['revision']} {r.json()['summary']}")

# sketch a bridge stroke across the seeded hole on the bottom edge
stroke = {"intent": "bridge",
          "points": [[0.36, 0.0, 0.0], [0.5, 0.0, 0.0], [0.64, 0.0, 0.0]]}
r = client.post(f"/sessions/{sid}/strokes", content=json.dumps(stroke))
print(f"bridge stroke -> merged curve ids {r.json()['affected']}")

for stage in ("regularize", "optimize", "complete"):
    r = client.post(f"/sessions/{sid}/stages/{stage}",
                    content=json.dumps({"params": params}))
    print(f"{stage:10s} rev={r.json()['revision']} {r.json()['summary']}")

net = client.get(f"/sessions/{sid}/artifacts/complete").json()
print(f"final network: {len(net['curves'])} curves, {len(net['junctions'])} junctions")

events = client.get(f"/sessions/{sid}/events")
kinds = [line.split()[1] for line in events.text.splitlines() if line.startswith("event:")]
print(f"event stream: {len(kinds)} events ({', '.join(sorted(set(kinds)))})")
