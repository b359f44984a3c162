"""End-to-end play reconstruction writing one bundle directory.

Stage order follows the data flow of a live play: per frame, player
localization and FMO-C; streaming, first movement, ball tracking and bat
fusion; after the play, smoothing, events, speed and classification.  A
failing stage is recorded in the status map and only its dependents are
skipped.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from .ballistics import estimate_speed
from .batglove import DetectorBox, attach_tip_base, fuse_bat_track
from .config import PipelineConfig
from .errors import PitchTrackError
from .events import (EventTimeline, detect_batter_first_step, detect_foot_down, detect_leg_raise,
                     detect_pitcher_first_move, refine_first_move)
from .fmoc import FmocDetector
from .gbcv import BallTracker, estimate_release_frame
from .mccnn import load_checkpoint
from .trajkit import JointTrajectories, PersonDetection, Roi, track_target, traj_index

log = logging.getLogger(__name__)

STAGES = ("localize", "fmoc", "fmoc_first_move", "first_move", "gbcv", "bat", "smooth",
          "events", "speed", "classify")


@dataclass
class PlayerInput:
    people: Sequence[Sequence[PersonDetection]]
    initial_roi: Roi
    start_frame: int = 0


@dataclass
class PipelineInputs:
    frames: Sequence[np.ndarray] | str | Path | None = None
    frame_start: int = 0
    pitcher_frames: Sequence[np.ndarray] | str | Path | None = None  # close view; defaults to frames
    pitcher_frame_start: int = 0
    pitcher: PlayerInput | None = None
    batter: PlayerInput | None = None
    detections: Sequence[DetectorBox] | None = None


@dataclass
class Bundle:
    path: Path
    status: dict
    timeline: EventTimeline
    tracks: list = field(default_factory=list)
    speed_mph: float | None = None
    outputs: dict = field(default_factory=dict)


def _frames(src):
    if src is None:
        return None
    if isinstance(src, (str, Path)):
        return io.iter_frames(src)
    return iter(src)


def _resample(channels: np.ndarray, length: int) -> np.ndarray:
    T = channels.shape[1]
    if T == length:
        return channels
    src = np.linspace(0, T - 1, length)
    return np.stack([np.interp(src, np.arange(T), c) for c in channels])


class _Run:
    def __init__(self, config: PipelineConfig, inputs: PipelineInputs, out: Path, stages):
        self.cfg, self.inp, self.out = config, inputs, out
        self.wanted = set(stages) if stages else set(STAGES)
        self.status: dict[str, str] = {}
        self.seconds: dict[str, float] = {}
        self.data: dict = {}

    def stage(self, name: str, needs: Sequence[str], fn) -> None:
        if name not in self.wanted:
            return
        missing = [n for n in needs if n not in self.data]
        if missing:
            self.status[name] = "skipped: missing " + ", ".join(missing)
            return
        t0 = time.perf_counter()
        try:
            fn()
            self.status[name] = "ok"
        except (PitchTrackError, ValueError, KeyError, OSError) as exc:
            log.warning("stage %s failed: %s", name, exc)
            self.status[name] = f"failed: {type(exc).__name__}: {exc}"
        self.seconds[name] = time.perf_counter() - t0

    # -- per frame ----------------------------------------------------------

    def localize(self):
        pc = self.cfg["pose"]
        for role in ("pitcher", "batter"):
            player: PlayerInput | None = getattr(self.inp, role)
            if player is None:
                continue
            targets, _ = track_target(player.people, player.initial_roi, pc["min_iou"], pc["max_iou"],
                                      tuple(pc["padding"]))
            raw = JointTrajectories.from_targets(targets, pc["fps"])
            self.data[f"{role}_raw"] = (raw, player.start_frame)
            io.write_json(self.out / f"trajectories_{role}_raw.json",
                          {**raw.to_json(), "start_frame": player.start_frame})

    def fmoc_ball(self):
        det = FmocDetector(self.cfg.fmoc, self.inp.frame_start)
        tracker = BallTracker(self.cfg.gbcv) if "gbcv" in self.wanted else None
        stream = []
        for frame in self.data["frames"]:
            out = det.push(frame)
            if out is None:
                continue
            stream.append(out)
            if tracker is not None:
                tracker.push(*out)  # GBCV consumes each candidate set as soon as it exists
        io.write_candidates(self.out / "candidates.jsonl", stream)
        self.data["candidates"] = dict(stream)
        if tracker is not None:
            self.data["tracker"] = tracker

    def fmoc_first_move(self):
        det = FmocDetector(self.cfg.fmoc_first_move, self.inp.pitcher_frame_start)
        stream = [o for o in (det.push(f) for f in self.data["pitcher_frames"]) if o is not None]
        io.write_candidates(self.out / "candidates_first_move.jsonl", stream)
        self.data["candidates_first_move"] = dict(stream)

    # -- streaming ----------------------------------------------------------

    def first_move(self):
        raw, start = self.data["pitcher_raw"]
        coords = raw.smoothed("interpolate").coords
        n = detect_pitcher_first_move(self.data["candidates_first_move"], coords,
                                      self.cfg.first_move, frame_offset=start)
        self.data["first_move_n"] = n

    def gbcv(self):
        tracker: BallTracker = self.data["tracker"]
        tracks = tracker.finish()
        self.data["tracks"] = tracks
        rp = self.cfg["ball"]["release_point_px"]
        release = None
        if tracks and rp is not None:
            release = estimate_release_frame(tracks[0], rp)
        self.data["release"] = release

    def bat(self):
        cands = self.data["candidates"]
        frames = sorted(cands)
        track = fuse_bat_track(self.data["detections"], cands, frames,
                               self.cfg["bat"]["max_dist"], self.cfg["bat"]["max_dist_factor"])
        if "batter_raw" in self.data:
            raw, start = self.data["batter_raw"]
            filled = raw.smoothed("interpolate").coords
            wr = filled[:, traj_index("r_wrist", "l_wrist")].mean(axis=1)
            wrists = {start + t: wr[t] for t in range(len(wr))}
            attach_tip_base(track, wrists)
        io.write_json(self.out / "bat.json", track.to_json())
        self.data["bat"] = track

    # -- post play ----------------------------------------------------------

    def smooth(self):
        pc = self.cfg["pose"]
        for role in ("pitcher", "batter"):
            if f"{role}_raw" not in self.data:
                continue
            raw, start = self.data[f"{role}_raw"]
            sm = raw.smoothed(pc["smoothing"], pc["cutoff_hz"], pc["order"], pc["knot_spacing"])
            self.data[f"{role}_smooth"] = (sm, start)
            io.write_json(self.out / f"trajectories_{role}.json", {**sm.to_json(), "start_frame": start})

    def events(self):
        tl = self.data["timeline"]
        status = tl.status
        if "pitcher_smooth" in self.data and self.data.get("first_move_n") is not None:
            sm, start = self.data["pitcher_smooth"]
            tl.first_movement = self.data["first_move_n"]
            tl.first_movement_refined = refine_first_move(
                tl.first_movement, sm.coords, self.cfg.first_move.refine_halfwidth, start)
        else:
            status["first_movement"] = "not found"
        tl.release = self.data.get("release")
        if tl.release is None:
            status["release"] = "not found"
        if "batter_smooth" not in self.data or tl.release is None:
            status["batter"] = "skipped: needs batter trajectories and release"
            return
        sm, start = self.data["batter_smooth"]
        tl.first_step = detect_batter_first_step(sm.coords, tl.release, self.cfg.first_step, start)
        if tl.first_step is None:
            status["first_step"] = "not found"
        try:
            s = tl.first_step if tl.first_step is not None else tl.release + self.cfg.first_step.window_end
            tl.leg_raise = detect_leg_raise(sm.coords, tl.release, s, start)
            tl.foot_down, confident = detect_foot_down(sm.coords, tl.leg_raise,
                                                       self.cfg["foot_down"]["search_range"], start)
            if not confident:
                status["foot_down"] = "low confidence"
        except PitchTrackError as exc:
            status["leg_raise"] = f"{type(exc).__name__}: {exc}"

    def speed(self):
        tracks = self.data["tracks"]
        if not tracks:
            raise PitchTrackError("no ball track")
        est = estimate_speed(tracks[0], self.cfg.camera, self.cfg.plane, self.cfg["pose"]["fps"])
        self.data["speed"] = est

    def classify(self):
        net, stats, extra = load_checkpoint(self.cfg["classify"]["checkpoint"])
        sm, _ = self.data[self.cfg["classify"]["player"] + "_smooth"]
        x = _resample(sm.channels(), net.shape.length)[None]
        if stats is not None:
            x = stats.apply(x)
        probs = net.forward(x)[0]
        names = extra.get("class_names")
        self.data["classification"] = {
            "probabilities": [float(p) for p in probs], "predicted": int(np.argmax(probs)),
            "class_names": names}
        io.write_json(self.out / "classification.json", self.data["classification"])


def run_pipeline(config: PipelineConfig | dict | None, inputs: PipelineInputs, out_dir,
                 stages: Sequence[str] | None = None) -> Bundle:
    cfg = config if isinstance(config, PipelineConfig) else PipelineConfig(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    unknown = set(stages or ()) - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stages {sorted(unknown)}")
    run = _Run(cfg, inputs, out, stages)
    d = run.data
    d["timeline"] = EventTimeline(fps=cfg["pose"]["fps"], status={})
    if inputs.frames is not None:
        d["frames"] = _frames(inputs.frames)
    pf = inputs.pitcher_frames if inputs.pitcher_frames is not None else None
    if pf is not None:
        d["pitcher_frames"] = _frames(pf)
    elif inputs.frames is not None:
        # one view serves both passes; materialise so it can be read twice
        frames = list(_frames(inputs.frames))
        d["frames"], d["pitcher_frames"] = iter(frames), iter(frames)
        inputs.pitcher_frame_start = inputs.frame_start
    if inputs.detections is not None:
        d["detections"] = list(inputs.detections)
    if cfg["classify"]["checkpoint"] is not None:
        d["checkpoint"] = cfg["classify"]["checkpoint"]
    if cfg.camera is not None:
        d["camera"] = True

    run.stage("localize", [], run.localize)
    run.stage("fmoc", ["frames"], run.fmoc_ball)
    run.stage("fmoc_first_move", ["pitcher_frames"], run.fmoc_first_move)
    run.stage("first_move", ["pitcher_raw", "candidates_first_move"], run.first_move)
    run.stage("gbcv", ["tracker"], run.gbcv)
    run.stage("bat", ["candidates", "detections"], run.bat)
    run.stage("smooth", [], run.smooth)
    run.stage("events", ["timeline"], run.events)
    run.stage("speed", ["tracks", "camera"], run.speed)
    run.stage("classify", ["checkpoint"], run.classify)

    tracks = d.get("tracks", [])
    speed = d.get("speed")
    tl: EventTimeline = d["timeline"]
    if "gbcv" in run.wanted and "tracks" in d:
        doc = {"tracks": [t.to_json(tl.release if i == 0 else None) for i, t in enumerate(tracks)]}
        if speed is not None:
            doc["speed_mph"] = speed.mph
            doc["points_3d"] = speed.to_json()["points_3d"]
        io.write_json(out / "tracks.json", doc)
    if "events" in run.wanted:
        io.write_json(out / "timeline.json", tl.to_json())
    if "speed" in run.wanted and speed is not None:
        io.write_json(out / "speed.json", speed.to_json())
    metrics = {"candidates_per_frame": {str(f): len(c) for f, c in sorted(d.get("candidates", {}).items())},
               "n_tracks": len(tracks),
               "track_lengths": [len(t) for t in tracks]}
    if "bat" in d:
        metrics["bat_coverage"] = d["bat"].coverage()
    io.write_json(out / "metrics.json", metrics)
    outputs = sorted(p.name for p in out.iterdir() if p.name != "manifest.json")
    io.write_json(out / "manifest.json", {
        "created_unix": time.time(), "stage_seconds": run.seconds, "status": run.status,
        "config": cfg.to_json(), "outputs": outputs})
    return Bundle(out, run.status, tl, tracks, None if speed is None else speed.mph,
                  {k: v for k, v in d.items() if k in ("classification", "bat", "first_move_n")})
