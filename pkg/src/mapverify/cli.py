"""Command line interface.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import formats
from .evaluation import existence_scorer, score_dataset, sweep_scores
from .fusion import MODELS, fuse
from .influence import building_field, nearest_road, associate_lane
from .mapmodel import MapError, extract_local, signed_boundary_projection
from .pipeline import FrameError, frame_influences, verify_frame
from .scenario import ScenarioError, ScenarioSpec, generate
from .state import CovarianceError, GlobalTrack

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2

SWEEP_MODELS = (*MODELS, "baseline")
INPUT_ERRORS = (formats.InputError, MapError, FrameError, CovarianceError, ScenarioError, ValueError, KeyError)


def _config(path) -> formats.RunConfig:
    return formats.load_config(path) if path else formats.RunConfig()


def cmd_verify(args) -> int:
    config = _config(args.config)
    world = formats.load_map(args.map)
    frames = formats.load_log(args.log)
    params = config.influence_params()
    fusion = config.fusion_config()
    verified = [verify_frame(f, world, params, fusion, config.theta_eta, config.radius) for f in frames]
    for frame, vf in zip(frames, verified):
        if not {e.label for e in vf.entries} >= {t.label for t in vf.kept}:
            raise AssertionError(f"frame {frame.timestamp!r}: kept labels not a subset of input labels")
    formats.atomic_write(args.out, formats.dump_verified(verified))
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _config(args.config)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    unknown = [m for m in models if m not in SWEEP_MODELS]
    if unknown or not models:
        raise formats.InputError(f"--models: unknown {unknown}; choose from {list(SWEEP_MODELS)}")
    world = formats.load_map(args.map)
    dataset = formats.load_dataset(args.log, args.labels)
    truth = dataset.truth()
    influences = []
    for frame in dataset.frames:
        influences += frame_influences(
            frame, world, config.influence_params(), config.relevant_classes, config.radius
        )
    out_dir = Path(args.out_dir)
    for model in models:
        if model == "baseline":
            scores = score_dataset(dataset, existence_scorer)
        else:
            fusion = config.fusion_config(model)
            scores = np.array([fuse(iv, fusion) for iv in influences])
        curve = sweep_scores(scores, truth)
        if len(curve.points) != 101:
            raise AssertionError("sweep must produce 101 points")
        formats.atomic_write(out_dir / f"roc_{model}.csv", formats.roc_csv(curve))
    return EXIT_OK


def cmd_gen(args) -> int:
    data = formats._read_json(args.spec) if args.spec else {}
    try:
        spec = ScenarioSpec.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise formats.InputError(f"{args.spec}: {exc}") from None
    world, dataset = generate(spec)
    out = Path(args.out_dir)
    formats.save_map(world, out / "map.json")
    formats.save_log(dataset.frames, out / "log.jsonl")
    formats.save_labels(dataset, out / "labels.jsonl")
    formats.atomic_write(out / "spec.json", json.dumps(spec.to_dict(), indent=2) + "\n")
    return EXIT_OK


def _point(text: str) -> np.ndarray:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise formats.InputError(f"--point: expected X,Y, got {text!r}") from None
    return np.array([x, y])


def cmd_inspect(args) -> int:
    config = _config(args.config)
    world = formats.load_map(args.map)
    p = _point(args.point)
    local = extract_local(world, p, config.radius)
    report = {"point": [float(p[0]), float(p[1])], "p_building_field": building_field(p, local.buildings, config.sigma_b)}
    if local.buildings:
        proj = min(
            ((b, signed_boundary_projection(p, b)) for b in local.buildings), key=lambda bp: bp[1].s
        )
        report["nearest_building"] = {
            "id": proj[0].id,
            "signed_distance": proj[1].s,
            "foot": proj[1].foot.tolist(),
            "normal": proj[1].u.tolist(),
        }
    probe = GlobalTrack("probe", p[0], p[1], 0.0, np.zeros((2, 2)), 0.0)
    found = nearest_road(probe, local.roads)
    if found is not None:
        road, proj = found
        report["nearest_road"] = {"id": road.road_id, "width": road.width, "signed_distance": proj.s}
    lane = associate_lane(probe, local.lanes)
    if lane is not None:
        report["nearest_lane"] = {"id": lane[0], "p_lane_pos": lane[1]}
    print(json.dumps(report, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapverify", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="score and filter tracks frame by frame")
    p.add_argument("--map", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="ROC sweep per model against labels")
    p.add_argument("--map", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--config")
    p.add_argument("--models", default=",".join(SWEEP_MODELS))
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen", help="generate a synthetic scenario")
    p.add_argument("--spec")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("inspect", help="map diagnostics at a point")
    p.add_argument("--map", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AssertionError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
