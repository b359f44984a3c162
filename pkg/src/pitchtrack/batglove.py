"""Bat tracking by fusing detector boxes with motion candidates, and glove gap filling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InsufficientDetections, NoSeed
from .fmoc import MotionCandidate
from .trajkit import Roi


@dataclass(frozen=True)
class DetectorBox:
    frame: int
    cls: str  # "bat" or "glove"
    aabb: Roi
    score: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must lie in [0, 1]")

    def to_json(self) -> dict:
        x0, y0, x1, y1 = self.aabb.as_list()
        return {"frame": self.frame, "class": self.cls, "x0": x0, "y0": y0, "x1": x1, "y1": y1,
                "score": self.score}

    @classmethod
    def from_json(cls, d: dict) -> "DetectorBox":
        return cls(int(d["frame"]), d["class"], Roi(d["x0"], d["y0"], d["x1"], d["y1"]),
                   float(d.get("score", 1.0)))


@dataclass
class BatFrame:
    frame: int
    aabb: Roi | None
    source: str  # detector | fmo | missing
    tip: np.ndarray | None = None
    base: np.ndarray | None = None

    def to_json(self) -> dict:
        return {"frame": self.frame, "source": self.source,
                "aabb": None if self.aabb is None else self.aabb.as_list(),
                "tip": None if self.tip is None else self.tip.tolist(),
                "base": None if self.base is None else self.base.tolist()}


@dataclass
class BatTrack:
    frames: list

    def coverage(self) -> float:
        if not self.frames:
            return 0.0
        return sum(f.source != "missing" for f in self.frames) / len(self.frames)

    def to_json(self) -> dict:
        return {"coverage": self.coverage(), "frames": [f.to_json() for f in self.frames]}


def fuse_bat_track(detector_boxes: Sequence[DetectorBox],
                   candidates: Mapping[int, Sequence[MotionCandidate]],
                   frames: Sequence[int] | None = None,
                   max_dist: float | None = None, max_dist_factor: float = 1.5) -> BatTrack:
    """Per frame: the detector box if there is one, else the motion candidate
    nearest to the previous bat position if it is close enough, else missing.

    ``max_dist`` fixes the gate in pixels; by default it is ``max_dist_factor``
    times the diagonal of the previous bat box.  Distances are centroid to
    centroid.  Frames before the first detector box stay missing.
    """
    bats: dict[int, DetectorBox] = {}
    for b in detector_boxes:
        if b.cls != "bat":
            continue
        if b.frame not in bats or b.score > bats[b.frame].score:
            bats[b.frame] = b
    if not bats:
        raise NoSeed("no bat detection to start from")
    if frames is None:
        lo = min(min(bats), min(candidates) if candidates else min(bats))
        hi = max(max(bats), max(candidates) if candidates else max(bats))
        frames = range(lo, hi + 1)
    out = []
    prev: Roi | None = None
    for f in frames:
        if f in bats:
            prev = bats[f].aabb
            out.append(BatFrame(f, prev, "detector"))
            continue
        cands = candidates.get(f, ())
        if prev is None or not len(cands):
            out.append(BatFrame(f, None, "missing"))
            continue
        gate = max_dist if max_dist is not None else max_dist_factor * prev.diagonal
        c = np.array([[m.cx, m.cy] for m in cands])
        d = np.linalg.norm(c - prev.center, axis=1)
        i = int(np.argmin(d))
        if d[i] < gate:
            prev = cands[i].aabb
            out.append(BatFrame(f, prev, "fmo"))
        else:
            out.append(BatFrame(f, None, "missing"))
    return BatTrack(out)


def assign_tip_base(aabb: Roi, wrist) -> tuple[np.ndarray, np.ndarray] | None:
    """(tip, base) corners; base is the corner nearest the wrist.

    Equidistant corners resolve to the lower one (larger y).  Returns None
    when the wrist is unknown.
    """
    if wrist is None:
        return None
    w = np.asarray(wrist, dtype=float)
    if np.isnan(w).any():
        return None
    corners = aabb.corners()  # tl, tr, br, bl
    d = np.linalg.norm(corners - w, axis=1)
    best = np.flatnonzero(np.isclose(d, d.min(), rtol=0, atol=1e-9))
    base_i = max(best, key=lambda i: (corners[i, 1], -i))
    tip_i = (base_i + 2) % 4
    return corners[tip_i].copy(), corners[base_i].copy()


def attach_tip_base(track: BatTrack, wrists: Mapping[int, np.ndarray]) -> BatTrack:
    for bf in track.frames:
        if bf.aabb is None:
            continue
        tb = assign_tip_base(bf.aabb, wrists.get(bf.frame))
        if tb is not None:
            bf.tip, bf.base = tb
    return track


def interpolate_glove(glove_boxes: Sequence[DetectorBox], frames: Sequence[int] | None = None) -> dict[int, Roi]:
    """Linearly interpolated glove box for every frame (edge-hold outside detections)."""
    boxes = sorted((b for b in glove_boxes if b.cls == "glove"), key=lambda b: b.frame)
    if len(boxes) < 2:
        raise InsufficientDetections("need at least two glove detections")
    f = np.array([b.frame for b in boxes], dtype=float)
    corners = np.array([b.aabb.as_list() for b in boxes])
    if frames is None:
        frames = range(int(f[0]), int(f[-1]) + 1)
    q = np.asarray(list(frames), dtype=float)
    cols = [np.interp(q, f, corners[:, i]) for i in range(4)]
    return {int(t): Roi(*(float(c[i]) for c in cols)) for i, t in enumerate(q)}
