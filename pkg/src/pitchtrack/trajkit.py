"""Joint tracking: ROI propagation, target localization, gap filling and smoothing.

Pose input uses the 18-keypoint OpenPose/COCO layout.  Downstream stages work on
the 12 body joints (shoulders, elbows, wrists, hips, knees, ankles); the face
points and the neck are dropped when trajectories are built.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import interpolate, signal

from .errors import AllMissing, InvalidCutoff, NoHistory, ShapeError, Underdetermined

JOINT_NAMES = (
    "nose", "neck",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_hip", "r_knee", "r_ankle",
    "l_hip", "l_knee", "l_ankle",
    "r_eye", "l_eye", "r_ear", "l_ear",
)
N_KEYPOINTS = len(JOINT_NAMES)

# body joints kept in trajectories, in keypoint order 2..13
TRAJ_JOINTS = JOINT_NAMES[2:14]
TRAJ_SLICE = slice(2, 14)
N_JOINTS = len(TRAJ_JOINTS)


def traj_index(*names: str) -> list[int]:
    """Indices of the named joints inside a 12-joint trajectory array."""
    return [TRAJ_JOINTS.index(n) for n in names]


ANKLES = traj_index("r_ankle", "l_ankle")
KNEES = traj_index("r_knee", "l_knee")
HIPS = traj_index("r_hip", "l_hip")
WRISTS = traj_index("r_wrist", "l_wrist")
LEG = ANKLES + KNEES

# keypoint indices used for the localization box
STABLE_KEYPOINTS = tuple(
    JOINT_NAMES.index(n)
    for n in ("r_shoulder", "l_shoulder", "r_hip", "l_hip",
              "r_knee", "l_knee", "r_ankle", "l_ankle")
)


@dataclass(frozen=True)
class Roi:
    """Axis-aligned box spanned by (x0, y0) top-left and (x1, y1) bottom-right."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ShapeError(f"box corners out of order: {self}")

    @property
    def p1(self) -> np.ndarray:
        return np.array([self.x0, self.y0])

    @property
    def p2(self) -> np.ndarray:
        return np.array([self.x1, self.y1])

    @property
    def width(self) -> float:
        return max(self.x1 - self.x0, 0.0)

    @property
    def height(self) -> float:
        return max(self.y1 - self.y0, 0.0)

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2])

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.width, self.height))

    def corners(self) -> np.ndarray:
        """Corners in order top-left, top-right, bottom-right, bottom-left."""
        return np.array([[self.x0, self.y0], [self.x1, self.y0],
                         [self.x1, self.y1], [self.x0, self.y1]], dtype=float)

    def translated(self, dx: float, dy: float) -> "Roi":
        return Roi(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def clip(self, width: float, height: float) -> "Roi":
        return Roi(min(max(self.x0, 0.0), width), min(max(self.y0, 0.0), height),
                   min(max(self.x1, 0.0), width), min(max(self.y1, 0.0), height))

    def as_list(self) -> list[float]:
        return [float(self.x0), float(self.y0), float(self.x1), float(self.y1)]


@dataclass
class PersonDetection:
    """One person's 18 keypoints from a pose estimator.

    ``xy`` holds pixel coordinates (y grows downward); rows where ``present`` is
    False carry no meaning and are zeroed.
    """

    xy: np.ndarray
    present: np.ndarray

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=float).reshape(N_KEYPOINTS, 2).copy()
        self.present = np.asarray(self.present, dtype=bool).reshape(N_KEYPOINTS).copy()
        self.xy[~self.present] = 0.0

    @classmethod
    def from_list(cls, joints: Sequence[Sequence[float]]) -> "PersonDetection":
        arr = np.asarray(joints, dtype=float)
        if arr.shape != (N_KEYPOINTS, 3):
            raise ShapeError(f"expected {N_KEYPOINTS}x3 joints, got {arr.shape}")
        return cls(arr[:, :2], arr[:, 2] > 0)

    @classmethod
    def from_nan(cls, xy: np.ndarray) -> "PersonDetection":
        xy = np.asarray(xy, dtype=float)
        present = ~np.isnan(xy).any(axis=1)
        return cls(np.nan_to_num(xy), present)

    def to_list(self) -> list[list[float]]:
        return [[float(x), float(y), 1.0 if p else 0.0]
                for (x, y), p in zip(self.xy, self.present)]

    def with_nan(self) -> np.ndarray:
        out = self.xy.copy()
        out[~self.present] = np.nan
        return out

    def translated(self, dx: float, dy: float) -> "PersonDetection":
        xy = self.xy + np.array([dx, dy])
        return PersonDetection(xy, self.present)


def update_last_known(last_known: np.ndarray | None, person: PersonDetection) -> np.ndarray:
    """Fold a detection into the per-joint last-seen coordinates (NaN = never seen)."""
    if last_known is None:
        last_known = np.full((N_KEYPOINTS, 2), np.nan)
    out = np.array(last_known, dtype=float, copy=True)
    out[person.present] = person.xy[person.present]
    return out


def compute_roi(prev_target: PersonDetection, padding=(15.0, 15.0), frame_bounds=None,
                last_known: np.ndarray | None = None) -> Roi:
    """Padded box around the previous target, used as next frame's pose ROI.

    Missing joints fall back to ``last_known`` so the box does not collapse
    when a limb drops out for a few frames.  ``frame_bounds`` is (width, height).
    """
    xy = update_last_known(last_known, prev_target)
    ok = ~np.isnan(xy).any(axis=1)
    if not ok.any():
        raise NoHistory("no joint of this player has ever been observed")
    pts = xy[ok]
    a = np.broadcast_to(np.asarray(padding, dtype=float), (2,))
    p1 = pts.min(axis=0) - a
    p2 = pts.max(axis=0) + a
    roi = Roi(p1[0], p1[1], p2[0], p2[1])
    if frame_bounds is not None:
        roi = roi.clip(*frame_bounds)
    return roi


def scaled_padding(frame_height: float, base=(15.0, 15.0)) -> tuple[float, float]:
    """Default padding is tuned for 1080-row frames; scale it to other heights."""
    s = frame_height / 1080.0
    return base[0] * s, base[1] * s


def joint_box(person: PersonDetection, keypoints: Iterable[int] = STABLE_KEYPOINTS) -> Roi | None:
    idx = [i for i in keypoints if person.present[i]]
    if not idx:
        return None
    pts = person.xy[idx]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return Roi(lo[0], lo[1], hi[0], hi[1])


def iou(a: Roi | None, b: Roi | None) -> float:
    if a is None or b is None:
        return 0.0
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def localize_target(people: Sequence[PersonDetection], prev_target: PersonDetection | Roi,
                    min_iou: float = 0.1, max_iou: float = 0.5) -> PersonDetection | None:
    """Pick the detection that overlaps the previous target best.

    Returns None (frame treated as missing) when nobody overlaps more than
    ``min_iou`` or when more than one person overlaps more than ``max_iou``.
    """
    if not people:
        return None
    ref = prev_target if isinstance(prev_target, Roi) else joint_box(prev_target)
    scores = np.array([iou(joint_box(p), ref) for p in people])
    if np.count_nonzero(scores > max_iou) > 1:
        return None
    best = int(np.argmax(scores))
    if scores[best] <= min_iou:
        return None
    return people[best]


def track_target(frames: Sequence[Sequence[PersonDetection]], initial: Roi,
                 min_iou: float = 0.1, max_iou: float = 0.5, padding=(15.0, 15.0),
                 frame_bounds=None):
    """Follow one player through a clip.

    Returns ``(targets, rois)``: the chosen detection per frame (None when
    missing) and the ROI that would be fed to the pose model for each frame.
    After a run of missing frames the search re-anchors on the last resolved
    detection.
    """
    targets: list[PersonDetection | None] = []
    rois: list[Roi | None] = []
    ref: PersonDetection | Roi = initial
    last_known = None
    roi = None
    for people in frames:
        rois.append(roi)
        person = localize_target(people, ref, min_iou, max_iou)
        targets.append(person)
        if person is not None and joint_box(person) is not None:
            ref = person
            last_known = update_last_known(last_known, person)
            roi = compute_roi(person, padding, frame_bounds, last_known)
    return targets, rois


def interpolate_gaps(series) -> np.ndarray:
    """Linear interpolation over NaN gaps; leading/trailing gaps hold the edge value."""
    y = np.asarray(series, dtype=float)
    ok = ~np.isnan(y)
    if not ok.any():
        raise AllMissing("series has no present values")
    if ok.all():
        return y.copy()
    t = np.arange(len(y))
    return np.interp(t, t[ok], y[ok])


def lowpass_filter(series, cutoff_hz: float = 3.0, order: int = 4, fps: float = 30.0) -> np.ndarray:
    """Zero-phase Butterworth low-pass (forward-backward), length preserving."""
    y = np.asarray(series, dtype=float)
    nyq = fps / 2.0
    if not 0 < cutoff_hz < nyq:
        raise InvalidCutoff(f"cutoff {cutoff_hz} Hz outside (0, {nyq})")
    if np.isnan(y).any():
        raise ValueError("lowpass_filter needs a gap-free series; interpolate first")
    if len(y) < 2:
        return y.copy()
    sos = signal.butter(order, cutoff_hz / nyq, output="sos")
    padlen = min(3 * (2 * len(sos) + 1), len(y) - 1)
    return signal.sosfiltfilt(sos, y, padlen=padlen)


def bspline_fit(series, knot_spacing: float = 5.0, degree: int = 3) -> np.ndarray:
    """Least-squares B-spline through the present samples, evaluated on every frame.

    Imputes and smooths in one step.  ``knot_spacing`` (in present samples) is
    the smoothing knob: wider spacing means fewer knots and a stiffer curve.
    Frames before the first / after the last present sample hold the edge value.
    """
    y = np.asarray(series, dtype=float)
    t = np.arange(len(y), dtype=float)
    ok = ~np.isnan(y)
    n = int(ok.sum())
    if n < degree + 1:
        raise Underdetermined(f"{n} present samples, need at least {degree + 1}")
    x, v = t[ok], y[ok]
    # interior knots at present-sample positions so every knot span holds data
    step = max(int(round(knot_spacing)), 1)
    inner = x[step:n - step:step] if n > 2 * step else np.array([])
    inner = inner[(inner > x[0]) & (inner < x[-1])]
    # Schoenberg-Whitney: need more samples than coefficients
    while len(inner) + degree + 1 > n and len(inner):
        inner = inner[::2]
    knots = np.r_[[x[0]] * (degree + 1), inner, [x[-1]] * (degree + 1)]
    spl = interpolate.make_lsq_spline(x, v, knots, k=degree)
    out = spl(np.clip(t, x[0], x[-1]))
    return out


@dataclass
class JointTrajectories:
    """Per-frame coordinates of the 12 body joints of one player.

    ``coords`` is T x 12 x 2 with NaN marking missing values before smoothing.
    """

    coords: np.ndarray
    fps: float = 30.0

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim != 3 or self.coords.shape[1:] != (N_JOINTS, 2):
            raise ShapeError(f"expected T x {N_JOINTS} x 2, got {self.coords.shape}")

    @property
    def n_frames(self) -> int:
        return self.coords.shape[0]

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.coords).any(axis=2)

    @classmethod
    def from_targets(cls, targets: Sequence[PersonDetection | None], fps: float = 30.0):
        coords = np.full((len(targets), N_JOINTS, 2), np.nan)
        for t, p in enumerate(targets):
            if p is not None:
                coords[t] = p.with_nan()[TRAJ_SLICE]
        return cls(coords, fps)

    def map_series(self, fn) -> "JointTrajectories":
        out = np.empty_like(self.coords)
        for j in range(N_JOINTS):
            for c in range(2):
                out[:, j, c] = fn(self.coords[:, j, c])
        return JointTrajectories(out, self.fps)

    def smoothed(self, method: str = "lowpass", cutoff_hz: float = 3.0, order: int = 4,
                 knot_spacing: float = 5.0) -> "JointTrajectories":
        """Gap-free, smoothed copy.  Joints never observed raise AllMissing."""
        if method == "lowpass":
            return self.map_series(
                lambda s: lowpass_filter(interpolate_gaps(s), cutoff_hz, order, self.fps))
        if method == "bspline":
            return self.map_series(lambda s: bspline_fit(s, knot_spacing))
        if method == "interpolate":
            return self.map_series(interpolate_gaps)
        raise ValueError(f"unknown smoothing method {method!r}")

    def leg_height(self) -> np.ndarray:
        """Mean y of both ankles and knees per frame (smaller = higher)."""
        return self.coords[:, LEG, 1].mean(axis=1)

    def channels(self) -> np.ndarray:
        """24 x T array, channel 2j is x of joint j and 2j+1 its y."""
        return self.coords.reshape(self.n_frames, 2 * N_JOINTS).T.copy()

    def to_json(self) -> dict:
        arr = self.coords.tolist()
        for frame in arr:
            for j, (x, y) in enumerate(frame):
                if np.isnan(x) or np.isnan(y):
                    frame[j] = None
        return {"fps": self.fps, "joints": list(TRAJ_JOINTS), "coords": arr}

    @classmethod
    def from_json(cls, doc: dict) -> "JointTrajectories":
        if list(doc.get("joints", TRAJ_JOINTS)) != list(TRAJ_JOINTS):
            raise ShapeError("joint catalog mismatch")
        rows = []
        for frame in doc["coords"]:
            rows.append([[np.nan, np.nan] if xy is None else xy for xy in frame])
        coords = np.array(rows, dtype=float).reshape(-1, N_JOINTS, 2)
        return cls(coords, float(doc.get("fps", 30.0)))
