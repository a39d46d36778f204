"""Command-line entry points: simulate, track, eval, stats, pose."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .analytics import heatmap, stats
from .config import RunConfig
from .geometry import CameraModel
from .metrics import evaluate
from .poseprior import (ENTROPY_THRESHOLD, UNSUP_WEIGHTS, gate, l2d, l3d, person_uncertainty,
                        prior_losses, unsup_loss)
from .simulator import (ScenarioConfig, batch_scenario, close_merge_scenario,
                        exit_reentry_scenario, generate, render_detections)
from .tracker import run

log = logging.getLogger("playertrack")

PRESETS = {"exit_reentry": exit_reentry_scenario, "close_merge": close_merge_scenario,
           "batch": batch_scenario}


class UsageError(Exception):
    pass


def _run_config(path) -> RunConfig:
    return RunConfig.load(path) if path else RunConfig()


def cmd_simulate(args) -> int:
    if args.preset:
        cfg = PRESETS[args.preset](args.seed if args.seed is not None else 0)
    elif args.config:
        data = io.read_json(args.config)
        if args.seed is not None:
            data["seed"] = args.seed
        cfg = ScenarioConfig.from_dict(data)
    else:
        raise UsageError("simulate needs --config or --preset")
    gt = generate(cfg)
    frames = render_detections(gt, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_detections(out / "scenario.jsonl", frames)
    io.write_labeled(out / "gt.jsonl", gt.frames)
    io.write_json(out / "config.json", cfg.to_dict())
    log.info("wrote %d frames to %s", len(frames), out)
    return 0


def cmd_track(args) -> int:
    cfg = _run_config(args.config)
    overrides = {}
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if args.no_appearance:
        overrides["alpha"] = 1.0
    if args.no_geometry:
        overrides["alpha"] = 0.0
    if args.no_regain:
        overrides["use_regain"] = False
    if args.no_geometry_constraint:
        overrides["use_geometry_constraint"] = False
    frames = io.read_detections(args.scenario)
    traj = run(cfg, frames, **overrides)
    io.write_trajectories(args.out, traj)
    log.info("%d tracks over %d frames", len(traj), len(traj.frames))
    return 0


def cmd_eval(args) -> int:
    cfg = _run_config(args.config)
    gate_value = args.match_threshold if args.match_threshold is not None else cfg.metric_gate
    rep = evaluate(io.read_labeled(args.gt), io.read_labeled(args.pred), gate_value)
    if args.out:
        io.write_json(args.out, rep.to_dict(per_threshold=True))
    if args.text:
        Path(args.text).write_text(rep.to_text())
    sys.stdout.write(rep.to_text())
    return 0


def _runs(rows):
    """Split ``[(frame, Box3D)]`` into runs of consecutive frames."""
    runs, cur, prev = [], [], None
    for f, b in rows:
        if prev is not None and f != prev + 1:
            runs.append(cur)
            cur = []
        cur.append(b.center[:2])
        prev = f
    if cur:
        runs.append(cur)
    return runs


def cmd_stats(args) -> int:
    cfg = _run_config(args.config)
    rows = [(f, b) for f, objs in io.read_labeled(args.pred) for i, b in objs if i == args.track]
    if not rows:
        raise UsageError(f"track {args.track} has no boxes in {args.pred}")
    total = None
    for seg in _runs(rows):
        s = stats(np.array(seg), cfg.dt, args.window)
        total = s if total is None else total + s
    grid = heatmap(np.array([b.center[:2] for _, b in rows]), cfg.field, args.cell)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "stats.json", {"track": args.track, **total.to_dict(),
                                       "heatmap_spill": grid.spill})
    (out / "stats.txt").write_text(total.to_table(args.track))
    (out / "heatmap.csv").write_text(grid.to_csv())
    (out / "heatmap.pgm").write_bytes(grid.to_pgm())
    sys.stdout.write(total.to_table(args.track))
    return 0


def cmd_pose(args) -> int:
    pred = io.read_pose(args.pred)
    report = {}
    lp = prior_losses(pred, l_min=args.l_min, l_max=args.l_max)
    report.update(L_length=lp.length, L_symm=lp.symm, L_angle=lp.angle, L_prior=lp.prior,
                  degenerate=lp.degenerate)
    value_2d = 0.0
    if args.pseudo2d:
        if not args.cameras:
            raise UsageError("--pseudo2d needs --cameras")
        cams = [CameraModel.from_dict(c) for c in io.read_json(args.cameras)["cameras"]]
        labels = io.read_json(args.pseudo2d)["views"]
        value_2d = l2d(pred, labels, cams)
    value_3d = l3d(pred, io.read_pose(args.pseudo3d)) if args.pseudo3d else 0.0
    accepted = bool(args.pseudo3d)
    if args.heatmaps:
        u = person_uncertainty([io.read_heatmap(p) for p in args.heatmaps])
        accepted = accepted and gate(u, args.lam)
        report["uncertainty"] = u
    report.update(L_2D=value_2d, L_3D=value_3d, accepted=accepted,
                  L_unsup=unsup_loss(value_2d, value_3d, lp.prior, accepted, tuple(args.weights)))
    if args.out:
        io.write_json(args.out, report)
    sys.stdout.write(io.dumps(report) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="playertrack", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic scenario")
    s.add_argument("--config", help="scenario JSON")
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("track", help="track a detection stream")
    t.add_argument("scenario", help="scenario.jsonl")
    t.add_argument("--config", help="run config JSON")
    t.add_argument("--out", required=True, help="trajectories.jsonl")
    t.add_argument("--alpha", type=float)
    t.add_argument("--no-appearance", action="store_true", help="geometry only (alpha = 1)")
    t.add_argument("--no-geometry", action="store_true", help="appearance only (alpha = 0)")
    t.add_argument("--no-regain", action="store_true")
    t.add_argument("--no-geometry-constraint", action="store_true")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="score predictions against ground truth")
    e.add_argument("gt")
    e.add_argument("pred")
    e.add_argument("--config", help="run config JSON (metric gate)")
    e.add_argument("--match-threshold", type=float)
    e.add_argument("--out", help="JSON report")
    e.add_argument("--text", help="text report")
    e.set_defaults(func=cmd_eval)

    st = sub.add_parser("stats", help="player statistics for one track")
    st.add_argument("pred")
    st.add_argument("--track", type=int, required=True)
    st.add_argument("--config", help="run config JSON (field, frame rate)")
    st.add_argument("--window", type=int, default=5)
    st.add_argument("--cell", type=float, default=0.5)
    st.add_argument("--out", required=True, help="output directory")
    st.set_defaults(func=cmd_stats)

    po = sub.add_parser("pose", help="evaluate pose losses")
    po.add_argument("--pred", required=True, help="predicted pose JSON")
    po.add_argument("--pseudo3d", help="pseudo 3D pose JSON")
    po.add_argument("--pseudo2d", help='JSON {"views": [[[u, v], ...], ...]}')
    po.add_argument("--cameras", help='JSON {"cameras": [...]}')
    po.add_argument("--heatmaps", nargs="*", help="heatmap paths (header .json + .bin)")
    po.add_argument("--lam", type=float, default=ENTROPY_THRESHOLD)
    po.add_argument("--weights", type=float, nargs=3, default=list(UNSUP_WEIGHTS))
    po.add_argument("--l-min", type=float, default=0.05)
    po.add_argument("--l-max", type=float, default=0.7)
    po.add_argument("--out", help="JSON report")
    po.set_defaults(func=cmd_pose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError, KeyError, OSError, TypeError) as exc:
        print(f"playertrack {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
