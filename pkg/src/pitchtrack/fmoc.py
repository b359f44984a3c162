"""Fast-moving-object candidates from thresholded difference-image triples.

For a target frame t and stride k the three frames t-k, t, t+k are differenced
pairwise; pixels that changed against both neighbours but not between the two
neighbours belong to whatever was at that spot only at time t.  Pixels that
already fired in one of the last ``m`` frames are treated as camera jitter and
dropped, and the surviving connected components above a minimum area become
motion candidates.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, asdict
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import ndimage

from .errors import ShapeError
from .trajkit import Roi

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class FmocConfig:
    k: int = 1
    tau_diff: float = 25.0
    m: int = 3
    min_area: int = 10

    def __post_init__(self):
        if self.k < 1 or self.m < 0 or self.min_area < 1:
            raise ValueError(f"invalid FMO-C config {self}")


@dataclass(frozen=True)
class MotionCandidate:
    aabb: Roi  # pixel extents, x1/y1 exclusive
    cx: float
    cy: float
    area: int

    @property
    def centroid(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    def to_json(self) -> dict:
        x0, y0, x1, y1 = self.aabb.as_list()
        return {"x0": x0, "y0": y0, "x1": x1, "y1": y1,
                "cx": float(self.cx), "cy": float(self.cy), "area": int(self.area)}

    @classmethod
    def from_json(cls, d: dict) -> "MotionCandidate":
        return cls(Roi(d["x0"], d["y0"], d["x1"], d["y1"]), float(d["cx"]), float(d["cy"]),
                   int(d["area"]))

    @classmethod
    def at(cls, x: float, y: float, half: float = 2.0, area: int | None = None) -> "MotionCandidate":
        """Square candidate centred on (x, y); handy for fixtures."""
        side = 2 * half
        return cls(Roi(x - half, y - half, x + half, y + half), float(x), float(y),
                   int(area if area is not None else max(side * side, 1)))


def _check(*frames: np.ndarray) -> None:
    shape = frames[0].shape
    for f in frames[1:]:
        if f.shape != shape:
            raise ShapeError(f"frame shapes differ: {shape} vs {f.shape}")


def diff_image(fa: np.ndarray, fb: np.ndarray, tau_diff: float = 25.0) -> np.ndarray:
    """Pixels whose absolute intensity difference exceeds ``tau_diff``."""
    _check(fa, fb)
    return np.abs(fa.astype(np.int16) - fb.astype(np.int16)) > tau_diff


def motion_mask(f_prev: np.ndarray, f_cur: np.ndarray, f_next: np.ndarray,
                tau_diff: float = 25.0) -> np.ndarray:
    _check(f_prev, f_cur, f_next)
    return _combine(diff_image(f_prev, f_cur, tau_diff), diff_image(f_cur, f_next, tau_diff),
                    diff_image(f_prev, f_next, tau_diff))


def _combine(d_pc: np.ndarray, d_cn: np.ndarray, d_pn: np.ndarray) -> np.ndarray:
    return d_pc & d_cn & ~d_pn


def remove_jitter(mask: np.ndarray, history: Sequence[np.ndarray]) -> np.ndarray:
    """Clear every pixel that was already set in one of the ``history`` masks."""
    if not len(history):
        return mask.copy()
    seen = np.zeros_like(mask)
    for h in history:
        _check(mask, h)
        seen |= h
    return mask & ~seen


def extract_candidates(mask: np.ndarray, min_area: int = 10) -> list[MotionCandidate]:
    """8-connected components of at least ``min_area`` pixels, largest first."""
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return []
    ys, xs = np.nonzero(labels)
    lab = labels[ys, xs]
    area = np.bincount(lab, minlength=n + 1)
    keep = np.flatnonzero(area >= min_area)
    keep = keep[keep > 0]
    if not len(keep):
        return []
    sx = np.bincount(lab, weights=xs, minlength=n + 1)
    sy = np.bincount(lab, weights=ys, minlength=n + 1)
    slices = ndimage.find_objects(labels)
    out = []
    for i in keep:
        sl_y, sl_x = slices[i - 1]
        out.append(MotionCandidate(Roi(sl_x.start, sl_y.start, sl_x.stop, sl_y.stop),
                                   sx[i] / area[i], sy[i] / area[i], int(area[i])))
    out.sort(key=lambda c: -c.area)  # stable: equal areas stay in raster order
    return out


class FmocDetector:
    """Streaming FMO-C.

    Frames are pushed in order; each push returns ``(t, candidates)`` for the
    frame ``k`` steps back once its successor ``t + k`` has arrived, otherwise
    None.  The detector never looks further ahead than ``t + k``.
    """

    def __init__(self, config: FmocConfig = FmocConfig(), start_frame: int = 0):
        self.config = config
        self._frames: deque = deque(maxlen=2 * config.k + 1)
        self._diffs: deque = deque(maxlen=config.k + 1)  # d^{i, i+k} for recent i
        self._history: deque = deque(maxlen=config.m if config.m else 1)
        self._next_index = start_frame
        self.last_mask: np.ndarray | None = None

    def push(self, frame: np.ndarray):
        cfg = self.config
        frame = np.asarray(frame)
        if self._frames:
            _check(self._frames[-1], frame)
        self._frames.append(frame)
        idx = self._next_index
        self._next_index += 1
        if len(self._frames) >= cfg.k + 1:
            self._diffs.append(diff_image(self._frames[-cfg.k - 1], frame, cfg.tau_diff))
        if len(self._frames) < 2 * cfg.k + 1:
            return None
        f_prev, f_next = self._frames[0], self._frames[-1]
        d_pc, d_cn = self._diffs[0], self._diffs[-1]
        d_pn = diff_image(f_prev, f_next, cfg.tau_diff)
        raw = _combine(d_pc, d_cn, d_pn)
        hist = list(self._history) if cfg.m else []
        mask = remove_jitter(raw, hist)
        if cfg.m:
            self._history.append(raw)
        self.last_mask = mask
        return idx - cfg.k, extract_candidates(mask, cfg.min_area)


def detect_sequence(frames: Iterable[np.ndarray], config: FmocConfig = FmocConfig(),
                    start_frame: int = 0) -> Iterator[tuple[int, list[MotionCandidate]]]:
    """Run FMO-C over a frame sequence; boundary frames produce no output."""
    det = FmocDetector(config, start_frame)
    for f in frames:
        out = det.push(f)
        if out is not None:
            yield out


def candidates_to_json(frame: int, candidates: Sequence[MotionCandidate]) -> dict:
    return {"frame": int(frame), "candidates": [c.to_json() for c in candidates]}


def config_dict(config: FmocConfig) -> dict:
    return asdict(config)
