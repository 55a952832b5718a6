"""Reflective symmetry completion on a cube missing an entire face region.

Runs the pipeline twice on the same half-scan, with and without the symmetry
toggle, and compares the recovered networks against the full wireframe.
"""

import json
import tempfile
from pathlib import Path

from curvenet import SyntheticSpec, generate_synthetic, save_ply, network_metrics
from curvenet.pipeline import PipelineConfig, network_from_json, run_pipeline

diag = 3 ** 0.5
spec = SyntheticSpec(shape="cube", density=20000 / 6, noise=0.003,
                     holes=[((1.0, 0.5, 0.5), 0.75)], seed=0)
cloud, wire = generate_synthetic(spec)
print(f"half-scan: {len(cloud)} points (full face region removed)")

workdir = Path(tempfile.mkdtemp(prefix="curvenet-sym-"))
ply = workdir / "half.ply"
save_ply(ply, cloud)

base = {
    "input": str(ply),
    "stages": ["detect", "extract", "regularize", "optimize", "complete"],
    "k": 32, "sigma_t": 0.04, "regularity_tol": 0.08,
    "growth": {"s_max": 8.0, "min_points": 5, "corner_ratio": 0.6},
    "completion_radius": 0.15 * diag, "alignment_radius": 0.08,
    "weights": "scan", "lambda_merge": 0.9, "seed": 0,
}
for name, symmetry in (("without symmetry", {"enabled": False}),
                       ("with symmetry", {"enabled": True,
                                          "plane": {"point": [0.5, 0.5, 0.5],
                                                    "normal": [1, 0, 0]}})):
    cfg = PipelineConfig.from_dict({**base, "symmetry": symmetry,
                                    "output_dir": str(workdir / name.replace(" ", "-"))})
    run_pipeline(cfg)
    net = network_from_json(json.loads(
        (Path(cfg.output_dir) / "network.json").read_text()))
    m = network_metrics(net, wire)
    print(f"{name:18s}: {len(net.curves):2d} curves, {len(net.junctions)} junctions, "
          f"hausdorff {100 * m['hausdorff'] / diag:5.2f}% of diagonal")
