"""Deterministic synthetic plays with ground truth for every pipeline stage.

Pitcher motion is a scripted 3D stick figure standing in the vertical
mound-plate plane.  It is rendered (together with a motion-blurred ball,
camera jitter, sensor noise and random flying distractors) from a high
side-view camera for ball tracking and from a close camera for the leg-lift
event.  Batter plays, bat swings and classification datasets are produced
as coordinate streams only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .ballistics import MPH, CameraModel, VerticalPlane
from .batglove import DetectorBox
from .fmoc import MotionCandidate
from .trajkit import (JOINT_NAMES, N_JOINTS, N_KEYPOINTS, TRAJ_JOINTS, TRAJ_SLICE,
                      PersonDetection, Roi)

MOUND = np.array([0.0, 0.0, 0.0])
PLATE = np.array([18.44, 0.0, 0.0])
_J = {n: i for i, n in enumerate(JOINT_NAMES)}


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3 - 2 * x)


# ---------------------------------------------------------------------------
# drawing
# ---------------------------------------------------------------------------

def draw_capsule(img: np.ndarray, p, q, radius: float, value: float, alpha: float = 1.0) -> None:
    """Blend an anti-aliased capsule (thick segment p-q) into a float image in place."""
    H, W = img.shape
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    pad = radius + 1.5
    x0 = int(max(np.floor(min(p[0], q[0]) - pad), 0))
    x1 = int(min(np.ceil(max(p[0], q[0]) + pad), W - 1))
    y0 = int(max(np.floor(min(p[1], q[1]) - pad), 0))
    y1 = int(min(np.ceil(max(p[1], q[1]) + pad), H - 1))
    if x1 < x0 or y1 < y0:
        return
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    d = q - p
    L2 = float(d @ d)
    if L2 > 0:
        s = np.clip(((xs - p[0]) * d[0] + (ys - p[1]) * d[1]) / L2, 0.0, 1.0)
    else:
        s = np.zeros_like(xs, dtype=float)
    dist = np.hypot(xs - (p[0] + s * d[0]), ys - (p[1] + s * d[1]))
    cover = np.clip(radius + 0.5 - dist, 0.0, 1.0) * alpha
    patch = img[y0:y1 + 1, x0:x1 + 1]
    patch += cover * (value - patch)


def make_background(height: int, width: int, seed: int, lines: bool = True) -> np.ndarray:
    """Static grass-like field: smooth shading, fine texture and a few chalk marks."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width] / max(height, width)
    bg = 110 + 12 * np.sin(2 * np.pi * (xx * 1.3 + rng.uniform())) * np.cos(2 * np.pi * (yy * 0.9 + rng.uniform()))
    bg += 6 * np.sin(2 * np.pi * xx * 9 + rng.uniform(0, 6))  # mowing stripes
    bg += rng.normal(0, 2.0, size=bg.shape)
    if lines:
        for _ in range(2):
            y = rng.uniform(0.15, 0.95) * height
            draw_capsule(bg, (0, y), (width - 1, y + rng.uniform(-0.1, 0.1) * height), 1.0, 200.0)
    return bg


# ---------------------------------------------------------------------------
# pitcher
# ---------------------------------------------------------------------------

# rest pose in (forward, up) metres, right-handed pitcher facing +x
_REST = {
    "nose": (0.10, 1.65), "neck": (0.0, 1.50),
    "r_shoulder": (-0.04, 1.45), "r_elbow": (-0.05, 1.18), "r_wrist": (0.03, 1.05),
    "l_shoulder": (0.04, 1.45), "l_elbow": (0.15, 1.20), "l_wrist": (0.05, 1.05),
    "r_hip": (-0.03, 0.95), "r_knee": (-0.03, 0.50), "r_ankle": (-0.05, 0.06),
    "l_hip": (0.03, 0.95), "l_knee": (0.05, 0.50), "l_ankle": (0.06, 0.06),
    "r_eye": (0.08, 1.68), "l_eye": (0.09, 1.68), "r_ear": (0.0, 1.66), "l_ear": (0.01, 1.66),
}
_REST_ARR = np.array([_REST[n] for n in JOINT_NAMES])
_LIFT = {"l_knee": (0.25, 0.95), "l_ankle": (0.05, 0.55)}
_STRIDE = {"l_knee": (0.75, 0.50), "l_ankle": (0.90, 0.06)}
_UPPER = [_J[n] for n in ("nose", "neck", "r_shoulder", "l_shoulder", "l_elbow", "l_wrist",
                          "r_eye", "l_eye", "r_ear", "l_ear", "r_hip", "l_hip", "r_elbow", "r_wrist")]
_BONES = [("neck", "r_hip"), ("neck", "l_hip"), ("r_hip", "r_knee"), ("r_knee", "r_ankle"),
          ("l_hip", "l_knee"), ("l_knee", "l_ankle"), ("neck", "nose"),
          ("l_shoulder", "l_elbow"), ("l_elbow", "l_wrist"),
          ("r_shoulder", "r_elbow"), ("r_elbow", "r_wrist")]
_BONE_RADIUS = {"r_hip": 0.09, "l_hip": 0.09, "r_knee": 0.07, "l_knee": 0.07, "r_ankle": 0.06,
                "l_ankle": 0.06, "nose": 0.1, "l_elbow": 0.05, "l_wrist": 0.045, "r_elbow": 0.05,
                "r_wrist": 0.045}


@dataclass(frozen=True)
class PitcherScript:
    """Frame timeline of one delivery.

    The leg starts lifting at ``onset``, peaks ``rise`` frames later, comes
    down over ``fall`` frames while striding forward; the throwing arm
    whips through its arc and lets go of the ball at ``release``.
    """

    onset: int = 60
    rise: int = 5
    fall: int = 10
    release: int = 93
    stride_m: float = 0.35
    arm_m: float = 0.6

    @property
    def apex(self) -> int:
        return self.onset + self.rise

    @property
    def foot_plant(self) -> int:
        return self.apex + self.fall

    @classmethod
    def random(cls, rng: np.random.Generator, release: int = 93) -> "PitcherScript":
        rise = int(rng.integers(4, 7))
        apex = release - int(rng.integers(19, 23))
        return cls(onset=apex - rise, rise=rise, fall=int(rng.integers(8, 12)), release=release)

    def arm_angle(self, t: float) -> float:
        """Throwing-arm angle around the shoulder, degrees (0 forward, 90 up)."""
        keys_t = [self.apex, self.release - 3, self.release, self.release + 3]
        keys_a = [270.0, 150.0, 45.0, -60.0]
        if t <= keys_t[0]:
            return keys_a[0]
        for (t0, a0), (t1, a1) in zip(zip(keys_t, keys_a), zip(keys_t[1:], keys_a[1:])):
            if t <= t1:
                u = (t - t0) / max(t1 - t0, 1e-9)
                if t1 == self.release:
                    u = u * u  # whip accelerates into release
                return a0 + (a1 - a0) * u
        return keys_a[-1]

    def pose_body(self, t: float) -> np.ndarray:
        """18 x 2 (forward, up) metres at (possibly fractional) frame time t."""
        xy = _REST_ARR.copy()
        lift = float(smoothstep((t - self.onset) / self.rise)) if t < self.apex else \
            1.0 - float(smoothstep((t - self.apex) / self.fall))
        stride = float(smoothstep((t - self.apex) / self.fall))
        for name in ("l_knee", "l_ankle"):
            i = _J[name]
            base = np.array(_REST[name]) + stride * (np.array(_STRIDE[name]) - np.array(_REST[name]))
            xy[i] = base + lift * (np.array(_LIFT[name]) - np.array(_REST[name]))
        xy[_UPPER, 0] += self.stride_m * stride
        sh = xy[_J["r_shoulder"]]
        theta = np.radians(self.arm_angle(t))
        direction = np.array([np.cos(theta), np.sin(theta)])
        w = float(smoothstep((t - self.apex) / 3.0))
        arc_elbow = sh + 0.5 * self.arm_m * direction
        arc_wrist = sh + self.arm_m * direction
        xy[_J["r_elbow"]] = (1 - w) * xy[_J["r_elbow"]] + w * arc_elbow
        xy[_J["r_wrist"]] = (1 - w) * xy[_J["r_wrist"]] + w * arc_wrist
        return xy

    def pose_world(self, t: float, mound=MOUND) -> np.ndarray:
        b = self.pose_body(t)
        return np.stack([mound[0] + b[:, 0], np.full(len(b), mound[1]), mound[2] + b[:, 1]], axis=1)

    def release_point_world(self, mound=MOUND) -> np.ndarray:
        return self.pose_world(self.release, mound)[_J["r_wrist"]]


def render_pitcher(img: np.ndarray, camera: CameraModel, joints_world: np.ndarray, value: float = 60.0,
                   offset: float = 0.0) -> None:
    px = camera.project(joints_world) + offset
    depth = float(np.linalg.norm(joints_world[_J["neck"]] - camera.position_m))
    scale = camera.focal_px / depth
    for a, b in _BONES:
        r = max(_BONE_RADIUS.get(b, 0.06) * scale, 0.7)
        draw_capsule(img, px[_J[a]], px[_J[b]], r, value)


# ---------------------------------------------------------------------------
# scenes
# ---------------------------------------------------------------------------

def side_camera(width: int = 960, height: int = 540) -> CameraModel:
    """High side view of the mound-plate line, as used for ball tracking."""
    return CameraModel.look_at((9.2, -40.0, 20.0), (9.2, 0.0, 1.0), 1.2 * width, (width / 2, height / 2))


def pitcher_camera(width: int = 320, height: int = 240) -> CameraModel:
    """Close view of the pitcher, as used for the first-movement event."""
    return CameraModel.look_at((0.3, -7.0, 1.0), (0.3, 0.0, 0.9), 0.9 * width, (width / 2, height / 2))


@dataclass(frozen=True)
class ArcDecoy:
    """A blob moving along a circular arc, e.g. a limb swinging."""

    center: tuple
    radius_px: float
    start_angle: float  # degrees
    step_deg: float  # per frame
    start_frame: int
    n_frames: int
    blob_px: float = 3.0
    value: float = 40.0

    def position(self, t: float):
        if not self.start_frame <= t < self.start_frame + self.n_frames:
            return None
        a = np.radians(self.start_angle + self.step_deg * (t - self.start_frame))
        return np.array(self.center) + self.radius_px * np.array([np.cos(a), -np.sin(a)])


@dataclass(frozen=True)
class SceneScript:
    seed: int = 0
    fps: float = 30.0
    width: int = 960
    height: int = 540
    start_frame: int = 80
    n_frames: int = 40
    speed_mph: float = 90.0
    target_height_m: float = 0.8
    streak_px: float = 3.0  # streak width
    streak_alpha: float = 0.7
    exposure: float = 1.0  # fraction of the frame interval
    gravity: float = 0.0  # m/s^2, 0 keeps the ball on a straight line
    ball_value: float = 235.0
    pitcher: PitcherScript | None = field(default_factory=PitcherScript)
    show_ball: bool = True
    decoys: tuple = ()
    n_distractors: int = 3
    jitter_px: int = 1
    jitter_prob: float = 0.3
    noise: float = 3.0
    camera: CameraModel | None = None
    plane: VerticalPlane | None = None

    def get_camera(self) -> CameraModel:
        return self.camera if self.camera is not None else side_camera(self.width, self.height)

    def get_plane(self) -> VerticalPlane:
        return self.plane if self.plane is not None else VerticalPlane(MOUND, PLATE)

    @property
    def frames(self) -> range:
        return range(self.start_frame, self.start_frame + self.n_frames)


@dataclass
class GroundTruth:
    """Scene truth in the nominal (unshaken) camera.

    A frame shaken by ``jitter[t] = (dx, dy)`` shows everything at
    ``p - (dx, dy)``.
    """

    ball_px: dict = field(default_factory=dict)  # frame -> (x, y) at mid-exposure
    ball_world: dict = field(default_factory=dict)
    release_frame: int | None = None
    release_px: np.ndarray | None = None
    first_move_onset: int | None = None
    first_move: int | None = None  # leg apex
    speed_mph: float | None = None
    pitcher_px: dict = field(default_factory=dict)  # frame -> 18 x 2
    jitter: dict = field(default_factory=dict)  # frame -> (dx, dy)
    ball_leaves_early: bool = False
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "ball_px": {str(k): list(map(float, v)) for k, v in self.ball_px.items()},
            "release_frame": self.release_frame,
            "release_px": None if self.release_px is None else self.release_px.tolist(),
            "first_move_onset": self.first_move_onset, "first_move": self.first_move,
            "speed_mph": self.speed_mph, "ball_leaves_early": self.ball_leaves_early,
            "jitter": {str(k): list(v) for k, v in self.jitter.items()},
            **{k: v for k, v in self.extra.items()},
        }


class BallFlight:
    """Straight (optionally gravity-bent) flight from the release point toward the plate."""

    def __init__(self, script: SceneScript, release_world: np.ndarray, release_frame: float):
        self.t0 = release_frame
        self.p0 = np.asarray(release_world, dtype=float)
        target = PLATE + np.array([0.0, 0.0, script.target_height_m])
        d = target - self.p0
        self.v = script.speed_mph * MPH * d / np.linalg.norm(d)
        self.fps = script.fps
        self.g = script.gravity
        speed = script.speed_mph * MPH
        self.t_end = self.t0 + np.linalg.norm(d) / speed * self.fps if speed > 0 else np.inf

    def at(self, t):
        dt = (np.asarray(t, dtype=float) - self.t0) / self.fps
        p = self.p0 + np.multiply.outer(dt, self.v)
        if self.g:
            p[..., 2] -= 0.5 * self.g * dt ** 2
        return p

    def alive(self, t: float) -> bool:
        return self.t0 <= t <= self.t_end


def render_scene(script: SceneScript) -> tuple[list[np.ndarray], GroundTruth]:
    """Render uint8 frames for ``script.frames`` and the matching ground truth."""
    rng = np.random.default_rng(script.seed)
    cam, H, W = script.get_camera(), script.height, script.width
    pad = script.jitter_px
    bg = make_background(H + 2 * pad, W + 2 * pad, script.seed + 7919)
    gt = GroundTruth()
    ps = script.pitcher
    flight = None
    if ps is not None:
        gt.first_move_onset, gt.first_move = ps.onset, ps.apex
        gt.release_frame = ps.release
        if script.show_ball:
            rp = ps.release_point_world()
            flight = BallFlight(script, rp, ps.release)
            gt.release_px = cam.project(rp)
            gt.speed_mph = script.speed_mph
    distractors = _make_distractors(rng, script)
    frames = []
    visible = 0
    for t in script.frames:
        img = bg.copy()
        if ps is not None:
            joints = ps.pose_world(t)
            gt.pitcher_px[t] = cam.project(joints)
            render_pitcher(img, cam, joints, offset=pad)
        for dec in script.decoys:
            pos = dec.position(t)
            if pos is not None:
                draw_capsule(img, pos + pad, pos + pad, dec.blob_px, dec.value)
        for dist in distractors:
            pos = dist.get(t)
            if pos is not None:
                draw_capsule(img, pos[0] + pad, pos[1] + pad, pos[2], pos[3])
        if flight is not None:
            e = script.exposure / 2
            ta, tb = max(t - e, flight.t0), min(t + e, flight.t_end)
            if tb > ta:
                pa, pb = cam.project(flight.at(ta)), cam.project(flight.at(tb))
                draw_capsule(img, pa + pad, pb + pad, script.streak_px / 2, script.ball_value,
                             script.streak_alpha)
            if flight.alive(t):
                gt.ball_world[t] = flight.at(t)
                px = cam.project(gt.ball_world[t])
                gt.ball_px[t] = px
                if 0 <= px[0] < W and 0 <= px[1] < H:
                    visible += 1
        if pad:
            dx, dy = 0, 0
            if rng.uniform() < script.jitter_prob:
                dx, dy = (int(v) for v in rng.integers(-pad, pad + 1, size=2))
            gt.jitter[t] = (dx, dy)
            img = img[pad + dy:pad + dy + H, pad + dx:pad + dx + W]
        if script.noise:
            img = img + rng.normal(0.0, script.noise, size=img.shape)
        frames.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
    gt.ball_leaves_early = flight is not None and visible < 5
    return frames, gt


def _make_distractors(rng: np.random.Generator, script: SceneScript) -> list[dict]:
    """Erratic flyers (birds, debris): fast but changing direction every frame."""
    out = []
    f0, n = script.start_frame, script.n_frames
    for _ in range(script.n_distractors):
        life = int(rng.integers(4, max(n, 5)))
        start = f0 + int(rng.integers(0, max(n - 3, 1)))
        pos = rng.uniform([0, 0], [script.width, script.height])
        heading = rng.uniform(0, 2 * np.pi)
        radius = rng.uniform(1.5, 3.5)
        value = float(rng.choice([40.0, 200.0]))
        track = {}
        for t in range(start, start + life):
            track[t] = (pos.copy(), pos.copy(), radius, value)
            heading += rng.uniform(-1.6, 1.6)
            pos = pos + rng.uniform(4, 30) * np.array([np.cos(heading), np.sin(heading)])
        out.append(track)
    return out


def pitch_scene(seed: int, width: int = 480, height: int = 270, release: int | None = None,
                n_frames: int = 30, **kw) -> SceneScript:
    """Random aligned pitch clip: release near frame 93, clip from frame 85."""
    rng = np.random.default_rng(seed)
    if release is None:
        release = 93 + int(rng.integers(-2, 3))
    ps = PitcherScript.random(rng, release)
    kw.setdefault("speed_mph", float(rng.uniform(78, 98)))
    return SceneScript(seed=seed, width=width, height=height, start_frame=85, n_frames=n_frames,
                       pitcher=ps, streak_px=max(2.0, 3.0 * width / 960), **kw)


def pitcher_clip(seed: int, width: int = 320, height: int = 240, start_frame: int = 30,
                 n_frames: int = 70, release: int | None = None, **kw) -> SceneScript:
    """Close view of a random delivery for the first-movement event (no ball)."""
    rng = np.random.default_rng(seed)
    if release is None:
        release = 93 + int(rng.integers(-2, 3))
    ps = PitcherScript.random(rng, release)
    kw.setdefault("n_distractors", 1)
    kw.setdefault("jitter_prob", 0.1)
    return SceneScript(seed=seed, width=width, height=height, start_frame=start_frame,
                       n_frames=n_frames, pitcher=ps, show_ball=False,
                       camera=pitcher_camera(width, height), **kw)


# ---------------------------------------------------------------------------
# pose-estimator emulation
# ---------------------------------------------------------------------------

DROPOUT_PRESETS = {
    "none": {},
    # missing rates per joint family: wrists 28%, elbows ~10%, face > 60%
    "realistic": {"wrist": 0.28, "elbow": 0.10, "nose": 0.6, "eye": 0.6, "ear": 0.6,
                  "shoulder": 0.02, "hip": 0.02, "knee": 0.03, "ankle": 0.04, "neck": 0.02},
}


def dropout_rates(preset) -> np.ndarray:
    """Per-keypoint missing probability for a preset name or a {family: rate} dict."""
    table = DROPOUT_PRESETS[preset] if isinstance(preset, str) else dict(preset or {})
    rates = np.zeros(N_KEYPOINTS)
    for i, name in enumerate(JOINT_NAMES):
        fam = name.split("_")[-1]
        rates[i] = table.get(fam, table.get(name, 0.0))
    return rates


def dropout_mask(rng: np.random.Generator, n_frames: int, rates: np.ndarray,
                 mean_gap: float = 3.0) -> np.ndarray:
    """Bursty missing-value mask (T x J) with stationary rate ``rates``.

    Each joint follows a two-state Markov chain whose missing bursts last
    ``mean_gap`` frames on average.
    """
    T, J = n_frames, len(rates)
    miss = np.zeros((T, J), dtype=bool)
    p_recover = 1.0 / mean_gap
    for j, r in enumerate(rates):
        if r <= 0:
            continue
        if r >= 1:
            miss[:, j] = True
            continue
        p_drop = r * p_recover / (1 - r)
        state = rng.uniform() < r
        u = rng.uniform(size=T)
        for t in range(T):
            miss[t, j] = state
            state = (u[t] >= p_recover) if state else (u[t] < p_drop)
    return miss


def emulate_pose(joints_px: Sequence[np.ndarray], rng: np.random.Generator, noise_px: float = 1.0,
                 dropout="none") -> list[PersonDetection]:
    """Noisy detections with bursty missing keypoints from ground-truth pixels."""
    arr = np.asarray(joints_px, dtype=float)
    miss = dropout_mask(rng, len(arr), dropout_rates(dropout))
    noisy = arr + rng.normal(0.0, noise_px, size=arr.shape)
    return [PersonDetection(noisy[t], ~miss[t]) for t in range(len(arr))]


def bystanders(rng: np.random.Generator, n_frames: int, template: np.ndarray, offsets) -> list[list[PersonDetection]]:
    """Static extra people (umpire, catcher, crowd) copied from a template pose."""
    out = []
    for _ in range(n_frames):
        people = []
        for off in offsets:
            xy = template + np.asarray(off) + rng.normal(0, 1.0, size=template.shape)
            people.append(PersonDetection(xy, np.ones(N_KEYPOINTS, bool)))
        out.append(people)
    return out


# ---------------------------------------------------------------------------
# batter
# ---------------------------------------------------------------------------

# batter stance in (lateral, up) metres; lateral +x points toward first base
_BATTER_REST = {
    "nose": (0.0, 1.62), "neck": (0.0, 1.45),
    "r_shoulder": (-0.18, 1.42), "r_elbow": (-0.25, 1.20), "r_wrist": (-0.05, 1.25),
    "l_shoulder": (0.18, 1.42), "l_elbow": (0.15, 1.18), "l_wrist": (-0.02, 1.22),
    "r_hip": (-0.12, 0.92), "r_knee": (-0.20, 0.50), "r_ankle": (-0.25, 0.06),
    "l_hip": (0.12, 0.92), "l_knee": (0.20, 0.50), "l_ankle": (0.25, 0.06),
    "r_eye": (-0.04, 1.65), "l_eye": (0.04, 1.65), "r_ear": (-0.08, 1.62), "l_ear": (0.08, 1.62),
}


@dataclass(frozen=True)
class BatterScript:
    release: int = 90
    lift_apex: int = 86
    lift_rise: int = 6
    lift_down: int = 8
    lift_m: float = 0.16
    swing: bool = True
    run_start: int | None = 120
    run_speed: float = 0.22  # m per frame at full speed
    accel_frames: int = 8
    direction: int = 1  # +1 runs toward +x in the image

    @property
    def foot_down(self) -> int:
        return self.lift_apex + self.lift_down

    def pose_body(self, t: float) -> np.ndarray:
        xy = np.array([_BATTER_REST[n] for n in JOINT_NAMES], dtype=float)
        d = self.direction
        xy[:, 0] *= d
        up = smoothstep((t - (self.lift_apex - self.lift_rise)) / self.lift_rise) if t <= self.lift_apex \
            else 1 - smoothstep((t - self.lift_apex) / self.lift_down)
        plant = smoothstep((t - self.foot_down) / 4.0)
        front = [_J["l_knee"], _J["l_ankle"]] if d > 0 else [_J["r_knee"], _J["r_ankle"]]
        xy[front, 1] += self.lift_m * up
        xy[front, 1] -= 0.08 * plant  # front knee flexes as weight lands
        xy[front[1], 1] += 0.06 * plant  # ankle stays grounded
        if self.swing:
            # hips rotate open a little during the swing
            rot = smoothstep((t - self.release - 2) / 6.0)
            xy[[_J["r_hip"], _J["l_hip"]], 0] += 0.06 * d * rot
            wr = [_J["r_wrist"], _J["l_wrist"]]
            xy[wr, 0] += 0.5 * d * rot
        if self.run_start is not None and t > self.run_start:
            u = t - self.run_start
            # lead foot steps out first, then the whole body accelerates
            step = smoothstep(u / 5.0) * 0.7 * d
            lead = _J["l_ankle"] if d > 0 else _J["r_ankle"]
            xy[lead, 0] += step
            a = self.run_speed / self.accel_frames
            dist = np.where(u < self.accel_frames, 0.5 * a * u ** 2,
                            0.5 * a * self.accel_frames ** 2 + self.run_speed * (u - self.accel_frames))
            xy[:, 0] += d * float(dist)
        return xy

    @classmethod
    def random(cls, rng: np.random.Generator, release: int = 90, run: bool = True) -> "BatterScript":
        return cls(release=release, lift_apex=release - int(rng.integers(2, 7)),
                   lift_rise=int(rng.integers(5, 8)), lift_down=int(rng.integers(7, 10)),
                   lift_m=float(rng.uniform(0.12, 0.2)),
                   run_start=release + int(rng.integers(24, 37)) if run else None,
                   run_speed=float(rng.uniform(0.18, 0.26)), accel_frames=int(rng.integers(6, 10)),
                   direction=int(rng.choice([-1, 1])))


def batter_play(seed: int, n_frames: int = 165, release: int | None = None, run: bool = True,
                scale_px: float | None = None, noise_px: float = 1.0, dropout="none"):
    """Batter pose detections plus event ground truth.

    Returns ``(detections, truth)`` where ``truth`` holds ``joints_px``
    (T x 18 x 2) and the scripted event frames.
    """
    rng = np.random.default_rng(seed)
    release = release if release is not None else 90 + int(rng.integers(-3, 4))
    bs = BatterScript.random(rng, release, run)
    scale = scale_px if scale_px is not None else float(rng.uniform(90, 160))
    origin = np.array([rng.uniform(300, 600), rng.uniform(350, 450)])
    joints = np.array([origin + scale * np.c_[b[:, 0], -b[:, 1]]
                       for b in (bs.pose_body(t) for t in range(n_frames))])
    sway = 0.01 * scale * np.sin(2 * np.pi * np.arange(n_frames) / 47.0 + rng.uniform(0, 6))
    joints[:, :, 0] += sway[:, None]
    dets = emulate_pose(joints, rng, noise_px, dropout)
    truth = {"joints_px": joints, "release": release, "leg_raise": bs.lift_apex,
             "foot_down": bs.foot_down, "first_step": bs.run_start, "script": bs, "scale_px": scale}
    return dets, truth


# ---------------------------------------------------------------------------
# bat swing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SwingScript:
    n_frames: int = 56
    length_px: float = 70.0
    hands_start: tuple = (400.0, 200.0)
    start_deg: float = 120.0  # bat pointing up-back
    end_deg: float = -200.0
    direction: int = 1

    def angle(self, t: float) -> float:
        u = np.clip(t / (self.n_frames - 1), 0, 1)
        # load slowly, whip through the middle, decelerate into follow-through
        prog = 0.5 - 0.5 * np.cos(np.pi * u ** 1.6)
        return float(self.start_deg + (self.end_deg - self.start_deg) * prog)

    def hands(self, t: float) -> np.ndarray:
        u = np.clip(t / (self.n_frames - 1), 0, 1)
        return np.array(self.hands_start) + self.direction * np.array([40.0 * smoothstep(u * 1.5), 15.0 * np.sin(np.pi * u)])

    def endpoints(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        base = self.hands(t)
        a = np.radians(self.angle(t))
        tip = base + self.length_px * np.array([self.direction * np.cos(a), -np.sin(a)])
        return tip, base


def _noisy_box(rng, lo, hi, sigma) -> Roi:
    a = lo + rng.normal(0, sigma, 2)
    b = hi + rng.normal(0, sigma, 2)
    p, q = np.minimum(a, b), np.maximum(a, b)
    return Roi(p[0], p[1], q[0], q[1])


def swing_clip(seed: int, swing: SwingScript | None = None, detector_share: float = 0.223,
               detector_hit: float = 0.9, fmo_hit: float = 0.65, box_noise: float = 2.0,
               n_clutter: float = 0.2):
    """Detector boxes and motion candidates for one scripted swing.

    The detector fires (with probability ``detector_hit``) only during the
    first ``detector_share`` of the swing, while the bat is still sharp;
    afterwards the blurred bat shows up as a motion candidate with
    probability ``fmo_hit``.  Returns ``(boxes, candidates, wrists, truth)``.
    """
    rng = np.random.default_rng(seed)
    sw = swing or SwingScript(length_px=float(rng.uniform(55, 85)),
                              hands_start=(float(rng.uniform(300, 600)), float(rng.uniform(180, 260))),
                              direction=int(rng.choice([-1, 1])))
    boxes, cands, wrists, tips, bases = [], {}, {}, {}, {}
    n_det = int(round(detector_share * sw.n_frames))
    for t in range(sw.n_frames):
        tip, base = sw.endpoints(t)
        tips[t], bases[t] = tip, base
        wrists[t] = base + rng.normal(0, 1.0, 2)
        lo, hi = np.minimum(tip, base), np.maximum(tip, base)
        frame_c = []
        if t < n_det:
            if rng.uniform() < detector_hit:
                boxes.append(DetectorBox(t, "bat", _noisy_box(rng, lo, hi, box_noise),
                                         float(rng.uniform(0.6, 0.99))))
        elif rng.uniform() < fmo_hit:
            box = _noisy_box(rng, lo, hi, box_noise)
            c = box.center
            area = int(max(box.area * 0.3, 10))
            frame_c.append(MotionCandidate(box, float(c[0]), float(c[1]), area))
        for _ in range(rng.poisson(n_clutter)):
            p = rng.uniform([0, 0], [960, 540])
            frame_c.append(MotionCandidate.at(float(p[0]), float(p[1]), 3.0))
        cands[t] = frame_c
    truth = {"tips": tips, "bases": bases, "script": sw}
    return boxes, cands, wrists, truth


# ---------------------------------------------------------------------------
# classification datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MotionClass:
    """Limb oscillation signature: cycles per clip, phase (rad), amplitude (px)."""

    freq: float
    phase: float = 0.0
    amplitude: float = 10.0


DEFAULT_CLASSES = (MotionClass(1.0, 0.0, 10.0), MotionClass(2.0, 1.0, 10.0), MotionClass(3.0, 2.0, 10.0))


def synth_trajectories(classes: Sequence[MotionClass] = DEFAULT_CLASSES, n_per_class: int = 40,
                       length: int = 48, seed: int = 0, noise: float = 1.0, dropout="none",
                       variation: float = 0.2):
    """Labelled 12-joint trajectories with class-specific limb oscillations.

    Returns ``(coords, labels, meta)``: coords is N x T x 12 x 2 (NaN where
    the emulated pose estimator dropped a joint).  Each sample randomises
    amplitude (+/- ``variation``), phase and body placement.
    """
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(seed)
    rest = np.array([_REST[n] for n in TRAJ_JOINTS]) * np.array([1.0, -1.0]) * 100.0
    joint_phase = np.linspace(0, np.pi, N_JOINTS)
    joint_gain = np.r_[np.linspace(0.6, 1.0, 6), np.linspace(0.5, 0.9, 6)]  # arms swing more
    rates = dropout_rates(dropout)[TRAJ_SLICE]
    t = np.arange(length) / length
    coords, labels, meta = [], [], []
    for c, mc in enumerate(classes):
        for _ in range(n_per_class):
            amp = mc.amplitude * (1 + rng.uniform(-variation, variation))
            ph = mc.phase + rng.uniform(-0.3, 0.3)
            origin = rng.uniform([100, 200], [500, 400])
            ang = 2 * np.pi * mc.freq * t[:, None] + ph + joint_phase[None, :]
            x = origin[0] + rest[None, :, 0] + amp * joint_gain * np.sin(ang)
            y = origin[1] + rest[None, :, 1] + 0.5 * amp * joint_gain * np.cos(ang)
            xy = np.stack([x, y], axis=2)
            if noise:
                xy = xy + rng.normal(0, noise, size=xy.shape)
            if rates.any():
                miss = dropout_mask(rng, length, rates)
                xy[miss] = np.nan
            coords.append(xy)
            labels.append(c)
            meta.append({"amplitude": amp, "phase": ph})
    return np.array(coords), np.array(labels), meta


# ---------------------------------------------------------------------------
# whole play
# ---------------------------------------------------------------------------

def synth_play(seed: int, width: int = 960, height: int = 540, pose_noise: float = 1.0,
               dropout="none") -> dict:
    """Everything one play needs: side view, close pitcher view, both players' poses.

    The two views share one scripted delivery, so their event frames agree.
    Pose detections include static bystanders so localization has work to do.
    """
    rng = np.random.default_rng(seed)
    release = 93 + int(rng.integers(-2, 3))
    ps = PitcherScript.random(rng, release)
    side = SceneScript(seed=seed, width=width, height=height, start_frame=85, n_frames=40, pitcher=ps,
                       streak_px=max(2.0, 3.0 * width / 960), speed_mph=float(rng.uniform(80, 96)))
    close = SceneScript(seed=seed + 1, width=320, height=240, start_frame=0, n_frames=120, pitcher=ps,
                        show_ball=False, camera=pitcher_camera(320, 240), n_distractors=1, jitter_prob=0.1)
    frames, gt = render_scene(side)
    pframes, pgt = render_scene(close)
    pitcher_px = np.array([pgt.pitcher_px[t] for t in close.frames])
    pitcher_dets = emulate_pose(pitcher_px, rng, pose_noise, dropout)
    crowd = bystanders(rng, len(pitcher_dets), pitcher_px[0], [(-120.0, -40.0), (130.0, -30.0)])
    pitcher_people = [[d] + extra for d, extra in zip(pitcher_dets, crowd)]
    batter_dets, btruth = batter_play(seed + 2, n_frames=165, release=release, noise_px=pose_noise,
                                      dropout=dropout)
    umpire = bystanders(rng, len(batter_dets), btruth["joints_px"][0], [(0.0, -260.0)])
    batter_people = [[extra[0], d] for d, extra in zip(batter_dets, umpire)]

    def roi_of(xy):
        lo, hi = xy.min(axis=0), xy.max(axis=0)
        return Roi(lo[0] - 10, lo[1] - 10, hi[0] + 10, hi[1] + 10)

    truth = {"release": release, "first_move": ps.apex, "first_move_onset": ps.onset,
             "leg_raise": btruth["leg_raise"], "foot_down": btruth["foot_down"],
             "first_step": btruth["first_step"], "speed_mph": side.speed_mph,
             "ball_px": gt.ball_px, "release_px": gt.release_px}
    return {
        "frames": frames, "frame_start": side.start_frame,
        "pitcher_frames": pframes, "pitcher_frame_start": close.start_frame,
        "pitcher_people": pitcher_people, "pitcher_roi": roi_of(pitcher_px[0]),
        "batter_people": batter_people, "batter_roi": roi_of(btruth["joints_px"][0]),
        "camera": side.get_camera(), "plane": side.get_plane(), "truth": truth,
        "scene": side,
    }
