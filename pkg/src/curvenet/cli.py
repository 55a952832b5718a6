"""Command line interface: `curvenet run | synth | metrics`.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .cloud import save_ply, save_xyz
from .metrics import network_metrics
from .pipeline import (ConfigError, PipelineConfig, StageError, dump_json,
                       network_from_json, run_pipeline)
from .synthetic import SHAPES, SyntheticSpec, Wireframe, generate_synthetic


def _parse_hole(text: str):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("hole must be cx,cy,cz,radius")
    return (parts[:3], parts[3])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curvenet",
                                     description="Feature curve network extraction")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the staged pipeline from a JSON config")
    p_run.add_argument("--config", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic scan with ground truth")
    p_synth.add_argument("--shape", required=True, choices=SHAPES)
    p_synth.add_argument("--density", type=float, default=None,
                         help="samples per unit area")
    p_synth.add_argument("--samples", type=int, default=None,
                         help="approximate total sample count (overrides density)")
    p_synth.add_argument("--noise", type=float, default=0.0,
                         help="perpendicular noise stddev, fraction of bbox diagonal")
    p_synth.add_argument("--hole", type=_parse_hole, action="append", default=[],
                         metavar="CX,CY,CZ,R")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True, help="output cloud (.ply or .xyz)")
    p_synth.add_argument("--truth", default=None, help="output wireframe JSON")

    p_metrics = sub.add_parser("metrics", help="compare a network artifact to ground truth")
    p_metrics.add_argument("--network", required=True)
    p_metrics.add_argument("--truth", required=True)

    return parser


_SHAPE_AREAS = {"cube": 6.0, "cylinder": 2 * np.pi * 2 + 2 * np.pi,
                "box-with-slot": None, "two-box-union": None}


def _total_area(shape: str) -> float:
    from . import synthetic
    patches, _ = synthetic._GEOMETRY[shape]()
    return sum(p["area"] for p in patches)


def cmd_synth(args) -> int:
    density = args.density
    if args.samples is not None:
        density = args.samples / _total_area(args.shape)
    if density is None:
        print("error: one of --density or --samples is required", file=sys.stderr)
        return 2
    try:
        spec = SyntheticSpec(shape=args.shape, density=density, noise=args.noise,
                             holes=args.hole, seed=args.seed)
        cloud, wire = generate_synthetic(spec)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out.endswith(".xyz"):
        save_xyz(args.out, cloud)
    else:
        save_ply(args.out, cloud)
    if args.truth:
        dump_json(wire.to_json(), args.truth)
    print(f"wrote {len(cloud)} points to {args.out}")
    return 0


def cmd_run(args) -> int:
    try:
        config = PipelineConfig.from_file(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_pipeline(config)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for entry in report["stages"]:
        extras = {k: v for k, v in entry.items() if k not in ("stage", "seconds", "reused")}
        detail = " ".join(f"{k}={v}" for k, v in extras.items())
        print(f"{entry['stage']}: {entry['seconds']:.2f}s {detail}".rstrip())
    return 0


def cmd_metrics(args) -> int:
    try:
        with open(args.network, "r", encoding="utf-8") as fh:
            network = network_from_json(json.load(fh))
        with open(args.truth, "r", encoding="utf-8") as fh:
            truth = Wireframe.from_json(json.load(fh))
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = network_metrics(network, truth)
    print(json.dumps({k: v for k, v in result.items() if k != "per_curve_assignment"},
                     sort_keys=True, indent=1))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "synth":
        return cmd_synth(args)
    return cmd_metrics(args)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
