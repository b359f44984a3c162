"""Game-event frames from joint trajectories and motion candidates.

All leg heights use image y (0 at the top), so a raised leg is a *minimum*.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Mapping, Sequence

import numpy as np

from .errors import InsufficientBaseline, InvalidWindow
from .fmoc import MotionCandidate
from .trajkit import ANKLES, HIPS, KNEES, LEG


@dataclass(frozen=True)
class FirstMoveConfig:
    b: float = 1.0
    min_length: int = 5
    max_apart: int = 10
    refine_halfwidth: int = 5
    k: int = 3

    def __post_init__(self):
        if self.min_length > self.max_apart:
            raise ValueError("min_length must not exceed max_apart")


@dataclass(frozen=True)
class FirstStepConfig:
    window_start: int = 10   # frames after release
    window_end: int = 50
    start_fraction: float = 0.06  # initial |dx|/frame threshold, in body heights
    floor_fraction: float = 0.006
    decay: float = 0.8


@dataclass
class EventTimeline:
    first_movement: int | None = None
    first_movement_refined: int | None = None
    release: int | None = None
    leg_raise: int | None = None
    foot_down: int | None = None
    first_step: int | None = None
    fps: float = 30.0
    status: dict | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        d["status"] = dict(self.status or {})
        return d


def leg_close_to_motion(candidates: Sequence[MotionCandidate], leg_xy: np.ndarray, b: float = 1.0) -> bool:
    """Whether any candidate centroid lies near an ankle or knee.

    ``leg_xy`` is 4 x 2 ordered (r_ankle, l_ankle, r_knee, l_knee).  The
    radius is half of ``b`` times the summed ankle-knee lengths, so it
    scales with the player's apparent size.
    """
    if not len(candidates):
        return False
    leg_xy = np.asarray(leg_xy, dtype=float)
    radius = 0.5 * b * float(np.linalg.norm(leg_xy[:2] - leg_xy[2:], axis=1).sum())
    c = np.array([[m.cx, m.cy] for m in candidates])
    d = np.linalg.norm(c[:, None, :] - leg_xy[None, :, :], axis=2)
    return bool((d < radius).any())


def first_qualifying_run(frames: Sequence[int], min_length: int = 5, max_apart: int = 10) -> int | None:
    """Earliest frame starting a run of >= min_length hits spanning < max_apart frames."""
    f = np.unique(np.asarray(frames, dtype=int))
    for i, start in enumerate(f):
        hits = np.count_nonzero((f[i:] - start) < max_apart)
        if hits >= min_length:
            return int(start)
    return None


def detect_pitcher_first_move(candidates: Mapping[int, Sequence[MotionCandidate]], coords: np.ndarray,
                              config: FirstMoveConfig = FirstMoveConfig(), frame_offset: int = 0) -> int | None:
    """First frame of the earliest qualifying run of leg-near motion, or None.

    ``candidates`` maps frame index to that frame's candidates (from FMO-C with
    stride ``config.k``); ``coords`` is the pitcher's T x 12 x 2 trajectory
    array indexed by ``frame - frame_offset``.
    """
    hits = []
    T = coords.shape[0]
    for frame in sorted(candidates):
        t = frame - frame_offset
        if not 0 <= t < T:
            continue
        leg = coords[t, ANKLES + KNEES]
        if np.isnan(leg).any():
            continue
        if leg_close_to_motion(candidates[frame], leg, config.b):
            hits.append(frame)
    return first_qualifying_run(hits, config.min_length, config.max_apart)


def _argmin_earliest(values: np.ndarray) -> int:
    return int(np.flatnonzero(values == values.min())[0])


def refine_first_move(n: int, coords: np.ndarray, p: int = 5, frame_offset: int = 0) -> int:
    """Frame of the highest leg position within [n - p, n + p] (clipped to the clip)."""
    y = coords[:, LEG, 1].mean(axis=1)
    t = n - frame_offset
    lo, hi = max(t - p, 0), min(t + p, len(y) - 1)
    if lo > hi:
        raise InvalidWindow(f"refine window around {n} lies outside the clip")
    return lo + _argmin_earliest(y[lo:hi + 1]) + frame_offset


def _body_height(coords: np.ndarray) -> float:
    hip = coords[:, HIPS].mean(axis=1)
    ankle = coords[:, ANKLES].mean(axis=1)
    return float(np.nanmedian(np.linalg.norm(hip - ankle, axis=1)))


def detect_batter_first_step(coords: np.ndarray, release: int,
                             config: FirstStepConfig = FirstStepConfig(), frame_offset: int = 0) -> int | None:
    """First frame in [r+10, r+50] where the hips/ankles centre moves sideways fast.

    The sideways speed threshold starts at ``start_fraction`` body heights per
    frame and is lowered geometrically until some frame exceeds it; None when
    the floor is reached without a hit (e.g. a batter who never runs).
    """
    x = coords[:, HIPS + ANKLES, 0].mean(axis=1)
    lo = max(release + config.window_start - frame_offset, 1)
    hi = min(release + config.window_end - frame_offset, len(x) - 1)
    if lo > hi:
        return None
    speed = np.abs(x[lo:hi + 1] - x[lo - 1:hi])
    scale = _body_height(coords)
    if not np.isfinite(scale) or scale <= 0:
        return None
    thr, floor = config.start_fraction * scale, config.floor_fraction * scale
    while thr >= floor:
        hit = np.flatnonzero(speed > thr)
        if len(hit):
            return int(lo + hit[0] + frame_offset)
        thr *= config.decay
    return None


def detect_leg_raise(coords: np.ndarray, release: int, first_step: int, frame_offset: int = 0) -> int:
    """Frame in [r - 20, s - 10] where the mean ankle/knee height is highest."""
    y = coords[:, LEG, 1].mean(axis=1)
    lo = release - 20 - frame_offset
    hi = min(first_step - 10 - frame_offset, len(y) - 1)
    if lo < 0:
        raise InvalidWindow("leg-raise window starts before the clip")
    if hi < lo:
        raise InvalidWindow(f"empty leg-raise window [{release - 20}, {first_step - 10}]")
    return lo + _argmin_earliest(y[lo:hi + 1]) + frame_offset


def detect_foot_down(coords: np.ndarray, leg_raise: int, search_range: int = 15,
                     frame_offset: int = 0) -> tuple[int, bool]:
    """Frame after the leg raise where leg height returns closest to its baseline.

    The baseline is the mean height over frames [0, l - 10].  Returns the
    frame and a flag that is False when the best match sits on the search
    boundary (leg may not have come down yet).
    """
    y = coords[:, LEG, 1].mean(axis=1)
    l = leg_raise - frame_offset
    if l < 11:
        raise InsufficientBaseline(f"leg raise at {leg_raise} leaves no baseline frames")
    m = y[:l - 10 + 1].mean()
    hi = min(l + search_range, len(y) - 1)
    g = l + _argmin_earliest(np.abs(y[l:hi + 1] - m))
    confident = g < l + search_range or hi - l == 0
    return g + frame_offset, bool(confident)
