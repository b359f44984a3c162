"""Command line entry point.

Exit codes: 0 success, 1 bad input (missing file, malformed JSON, bad
config), 2 a processing stage failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .ballistics import estimate_speed
from .batglove import attach_tip_base, fuse_bat_track
from .config import PipelineConfig
from .errors import ConfigError, PitchTrackError, ShapeError
from .events import (EventTimeline, detect_batter_first_step, detect_foot_down, detect_leg_raise,
                     detect_pitcher_first_move, refine_first_move)
from .fmoc import detect_sequence
from .gbcv import BallTrack2D, estimate_release_frame, track_ball
from .mccnn import MccnnNet, NetShape, normalize_channels, save_checkpoint, train
from .metrics import cross_validate, load_dataset, save_dataset
from .pipeline import STAGES, PipelineInputs, PlayerInput, run_pipeline
from .trajkit import JointTrajectories, Roi, track_target, traj_index

log = logging.getLogger("pitchtrack")

EXIT_OK, EXIT_INPUT, EXIT_STAGE = 0, 1, 2


class InputError(Exception):
    pass


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg.doc["train"]["seed"] = args.seed
    return cfg


def _traj(path) -> tuple[JointTrajectories, int]:
    doc = io.read_json(path)
    return JointTrajectories.from_json(doc), int(doc.get("start_frame", 0))


# -- subcommands -------------------------------------------------------------

def cmd_track_pose(args, cfg):
    pc = cfg["pose"]
    people, start = io.read_pose(args.pose)
    targets, _ = track_target(people, Roi(*args.roi), pc["min_iou"], pc["max_iou"], tuple(pc["padding"]))
    traj = JointTrajectories.from_targets(targets, pc["fps"])
    if not args.raw:
        traj = traj.smoothed(pc["smoothing"], pc["cutoff_hz"], pc["order"], pc["knot_spacing"])
    io.write_json(args.out, {**traj.to_json(), "start_frame": start})


def cmd_fmoc(args, cfg):
    fc = cfg.fmoc_first_move if args.first_move else cfg.fmoc
    io.write_candidates(args.out, detect_sequence(io.iter_frames(args.frames), fc, args.start))


def cmd_gbcv(args, cfg):
    cands = io.read_candidates(args.candidates)
    tracks = track_ball(((f, cands[f]) for f in sorted(cands)), cfg.gbcv)
    rp = args.release_point or cfg["ball"]["release_point_px"]
    release = estimate_release_frame(tracks[0], rp) if tracks and rp is not None else None
    io.write_json(args.out, {"tracks": [t.to_json(release if i == 0 else None) for i, t in enumerate(tracks)]})
    if not tracks:
        raise PitchTrackError("no ball track found")


def cmd_events(args, cfg):
    tl = EventTimeline(fps=cfg["pose"]["fps"], status={}, release=args.release)
    if args.pitcher:
        sm, start = _traj(args.pitcher)
        if not args.candidates:
            raise InputError("--pitcher needs --candidates from an FMO-C pass with k=3")
        n = detect_pitcher_first_move(io.read_candidates(args.candidates), sm.smoothed("interpolate").coords,
                                      cfg.first_move, start)
        tl.first_movement = n
        if n is not None:
            tl.first_movement_refined = refine_first_move(n, sm.smoothed("interpolate").coords,
                                                          cfg.first_move.refine_halfwidth, start)
    if args.batter:
        if args.release is None:
            raise InputError("--batter needs --release")
        sm, start = _traj(args.batter)
        c = sm.smoothed("interpolate").coords
        tl.first_step = detect_batter_first_step(c, args.release, cfg.first_step, start)
        s = tl.first_step if tl.first_step is not None else args.release + cfg.first_step.window_end
        tl.leg_raise = detect_leg_raise(c, args.release, s, start)
        tl.foot_down, ok = detect_foot_down(c, tl.leg_raise, cfg["foot_down"]["search_range"], start)
        if not ok:
            tl.status["foot_down"] = "low confidence"
    io.write_json(args.out, tl.to_json())


def cmd_speed(args, cfg):
    if cfg.camera is None:
        raise ConfigError("speed needs a camera block in the config")
    doc = io.read_json(args.track)
    tracks = doc["tracks"] if "tracks" in doc else [doc]
    if not tracks:
        raise PitchTrackError("track file holds no tracks")
    est = estimate_speed(BallTrack2D.from_json(tracks[0]), cfg.camera, cfg.plane, cfg["pose"]["fps"])
    io.write_json(args.out, est.to_json())
    print(f"{est.mph:.2f} mph")


def cmd_bat(args, cfg):
    boxes = io.read_detections(args.detections)
    cands = io.read_candidates(args.candidates)
    track = fuse_bat_track(boxes, cands, None, cfg["bat"]["max_dist"], cfg["bat"]["max_dist_factor"])
    if args.batter:
        sm, start = _traj(args.batter)
        wr = sm.smoothed("interpolate").coords[:, traj_index("r_wrist", "l_wrist")].mean(axis=1)
        attach_tip_base(track, {start + t: w for t, w in enumerate(wr)})
    io.write_json(args.out, track.to_json())
    print(f"coverage {track.coverage():.3f}")


def cmd_train(args, cfg):
    X, y, header = load_dataset(args.dataset)
    tc = cfg.train
    if args.epochs is not None:
        tc.epochs = args.epochs
    if args.batch_size is not None:
        tc.batch_size = args.batch_size
    Xn, stats = normalize_channels(X)
    net = MccnnNet(NetShape(X.shape[1], X.shape[2], header["n_classes"]), seed=tc.seed, dtype=tc.dtype)
    res = train(net, Xn, y, tc)
    save_checkpoint(args.out, net, stats, {"class_names": header.get("class_names"), "losses": res.losses})
    print(f"final loss {res.losses[-1]:.5f}")


def cmd_eval(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.task == "classify":
        X, y, header = load_dataset(args.dataset)
        tc = cfg.train
        if args.epochs is not None:
            tc.epochs = args.epochs
        if args.batch_size is not None:
            tc.batch_size = args.batch_size
        rep = cross_validate(X, y, header["n_classes"], tc, args.k)
        io.write_json(out / "report.json", rep.to_json())
        with open(out / "confusion.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(rep.confusion.tolist())
        print(f"accuracy {rep.accuracy:.3f} balanced {rep.balanced_accuracy:.3f}")
        return
    from . import synthgen
    rows = []
    for seed in range(args.seed or 0, (args.seed or 0) + args.n):
        play = synthgen.synth_play(seed, width=args.width, height=args.width * 9 // 16)
        c = PipelineConfig({**cfg.to_json(), "camera": play["camera"].to_json(),
                            "ball": {"release_point_px": play["truth"]["release_px"].tolist()}})
        b = run_pipeline(c, _play_inputs(play), out / f"play_{seed:04d}",
                         stages=None if args.task == "events" else ("fmoc", "gbcv", "speed"))
        t = play["truth"]
        if args.task == "events":
            tl = b.timeline
            for name, est in (("first_movement", tl.first_movement_refined), ("release", tl.release),
                              ("leg_raise", tl.leg_raise), ("foot_down", tl.foot_down),
                              ("first_step", tl.first_step)):
                truth = t["first_move" if name == "first_movement" else name]
                rows.append({"seed": seed, "event": name, "truth": truth, "estimate": est,
                             "error": None if est is None else est - truth})
        else:
            rows.append({"seed": seed, "truth_mph": t["speed_mph"], "estimate_mph": b.speed_mph,
                         "error_mph": None if b.speed_mph is None else b.speed_mph - t["speed_mph"]})
    name = "event_errors.csv" if args.task == "events" else "speed_errors.csv"
    with open(out / name, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {out / name}")


def _play_inputs(play) -> PipelineInputs:
    return PipelineInputs(frames=play["frames"], frame_start=play["frame_start"],
                          pitcher_frames=play["pitcher_frames"], pitcher_frame_start=play["pitcher_frame_start"],
                          pitcher=PlayerInput(play["pitcher_people"], play["pitcher_roi"]),
                          batter=PlayerInput(play["batter_people"], play["batter_roi"]))


def cmd_synth(args, cfg):
    from . import synthgen
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed or 0
    if args.kind == "scene":
        sc = synthgen.pitch_scene(seed, width=args.width, height=args.width * 9 // 16)
        frames, gt = synthgen.render_scene(sc)
        io.write_pgm_dir(out / "frames", frames, sc.start_frame)
        io.write_json(out / "truth.json", gt.to_json())
        io.write_json(out / "camera.json", sc.get_camera().to_json())
    elif args.kind == "play":
        play = synthgen.synth_play(seed, width=args.width, height=args.width * 9 // 16)
        io.write_pgm_dir(out / "frames", play["frames"], play["frame_start"])
        io.write_pgm_dir(out / "pitcher_frames", play["pitcher_frames"], play["pitcher_frame_start"])
        io.write_pose(out / "pitcher_pose.jsonl", play["pitcher_people"])
        io.write_pose(out / "batter_pose.jsonl", play["batter_people"])
        t = play["truth"]
        io.write_json(out / "truth.json", {k: v for k, v in t.items() if k != "ball_px"})
        io.write_json(out / "config.json", {"camera": play["camera"].to_json(),
                                            "ball": {"release_point_px": t["release_px"].tolist()}})
        io.write_json(out / "rois.json", {"pitcher": play["pitcher_roi"].as_list(),
                                          "batter": play["batter_roi"].as_list(),
                                          "frame_start": play["frame_start"],
                                          "pitcher_frame_start": play["pitcher_frame_start"]})
    elif args.kind == "trajectories":
        coords, labels, _ = synthgen.synth_trajectories(n_per_class=args.n, seed=seed, dropout=args.dropout)
        X = np.stack([JointTrajectories(c).smoothed().channels() for c in coords])
        save_dataset(out / "dataset.npz", X, labels, int(labels.max()) + 1)
    elif args.kind == "swing":
        boxes, cands, wrists, truth = synthgen.swing_clip(seed)
        io.write_detections(out / "detections.jsonl", boxes)
        io.write_candidates(out / "candidates.jsonl", sorted(cands.items()))
        io.write_json(out / "truth.json", {"tips": {str(k): v for k, v in truth["tips"].items()},
                                           "bases": {str(k): v for k, v in truth["bases"].items()}})


def cmd_run(args, cfg):
    pitcher = batter = None
    if args.pitcher_pose:
        if not args.pitcher_roi:
            raise InputError("--pitcher-pose needs --pitcher-roi")
        people, start = io.read_pose(args.pitcher_pose)
        pitcher = PlayerInput(people, Roi(*args.pitcher_roi), start)
    if args.batter_pose:
        if not args.batter_roi:
            raise InputError("--batter-pose needs --batter-roi")
        people, start = io.read_pose(args.batter_pose)
        batter = PlayerInput(people, Roi(*args.batter_roi), start)
    for p in (args.frames, args.pitcher_frames):
        if p and not Path(p).exists():
            raise FileNotFoundError(p)
    inputs = PipelineInputs(frames=args.frames, frame_start=args.frame_start,
                            pitcher_frames=args.pitcher_frames, pitcher_frame_start=args.pitcher_frame_start,
                            pitcher=pitcher, batter=batter,
                            detections=io.read_detections(args.detections) if args.detections else None)
    bundle = run_pipeline(cfg, inputs, args.out, args.stage or None)
    for stage, st in bundle.status.items():
        print(f"{stage:16s} {st}")
    if any(st.startswith("failed") for st in bundle.status.values()):
        raise PitchTrackError("one or more stages failed")


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    # accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="pipeline config JSON (merged over defaults)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="pitchtrack", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    s = sub.add_parser("track-pose", help="localize one player and write joint trajectories")
    s.add_argument("--pose", required=True)
    s.add_argument("--roi", type=float, nargs=4, required=True, metavar=("X0", "Y0", "X1", "Y1"))
    s.add_argument("--raw", action="store_true", help="skip gap filling and smoothing")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_track_pose)

    s = sub.add_parser("fmoc", help="motion candidates from a frame stream")
    s.add_argument("--frames", required=True, help="PGM directory or raw stream file")
    s.add_argument("--start", type=int, default=0, help="index of the first frame")
    s.add_argument("--first-move", action="store_true", help="use the first-movement stride")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_fmoc)

    s = sub.add_parser("gbcv", help="ball tracks from motion candidates")
    s.add_argument("--candidates", required=True)
    s.add_argument("--release-point", type=float, nargs=2, metavar=("X", "Y"))
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_gbcv)

    s = sub.add_parser("events", help="event timeline from trajectories")
    s.add_argument("--pitcher", help="pitcher trajectory JSON")
    s.add_argument("--candidates", help="k=3 motion candidates for the pitcher view")
    s.add_argument("--batter", help="batter trajectory JSON")
    s.add_argument("--release", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_events)

    s = sub.add_parser("speed", help="pitch speed from a ball track")
    s.add_argument("--track", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_speed)

    s = sub.add_parser("bat", help="fuse detector boxes and motion candidates into a bat track")
    s.add_argument("--detections", required=True)
    s.add_argument("--candidates", required=True)
    s.add_argument("--batter", help="batter trajectory JSON for tip/base assignment")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_bat)

    s = sub.add_parser("train", help="train MC-CNN on a dataset file")
    s.add_argument("--dataset", required=True)
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("eval", help="k-fold classification report, or event/speed error series on generated plays")
    s.add_argument("--task", choices=("classify", "events", "speed"), default="classify")
    s.add_argument("--dataset")
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--n", type=int, default=20, help="number of generated plays")
    s.add_argument("--width", type=int, default=960)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("synth", help="write generated test inputs with ground truth")
    s.add_argument("kind", choices=("scene", "play", "trajectories", "swing"))
    s.add_argument("--n", type=int, default=40, help="samples per class (trajectories)")
    s.add_argument("--dropout", default="none")
    s.add_argument("--width", type=int, default=960)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("run", help="whole pipeline into a bundle directory")
    s.add_argument("--frames")
    s.add_argument("--frame-start", type=int, default=0)
    s.add_argument("--pitcher-frames")
    s.add_argument("--pitcher-frame-start", type=int, default=0)
    s.add_argument("--pitcher-pose")
    s.add_argument("--pitcher-roi", type=float, nargs=4)
    s.add_argument("--batter-pose")
    s.add_argument("--batter-roi", type=float, nargs=4)
    s.add_argument("--detections")
    s.add_argument("--stage", action="append", choices=STAGES, help="run only these stages (repeatable)")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("config", None), ("seed", None), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "eval" and args.task == "classify" and not args.dataset:
            raise InputError("eval --task classify needs --dataset")
        args.fn(args, cfg)
    except (InputError, ConfigError, ShapeError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PitchTrackError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
