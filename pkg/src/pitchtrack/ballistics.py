"""3D ball positions from a single view via the vertical mound-plate plane, and speed.

World frame is metric with z pointing up.  Cameras follow the pinhole model
``x_cam = R (X - C)``, with the image x axis to the right, y down and z along
the optical axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientTrack, NoIntersection
from .gbcv import BallTrack2D

MPH = 0.44704  # m/s per mph
_PARALLEL_TOL = 1e-9


@dataclass
class CameraModel:
    focal_px: float
    principal_px: tuple
    position_m: np.ndarray
    rotation: np.ndarray  # world -> camera, rows are camera axes in world coords

    def __post_init__(self):
        self.position_m = np.asarray(self.position_m, dtype=float).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.principal_px = tuple(float(v) for v in self.principal_px)
        if self.focal_px <= 0:
            raise ValueError("focal length must be positive")
        if not np.allclose(self.rotation @ self.rotation.T, np.eye(3), atol=1e-9):
            raise ValueError("rotation is not orthonormal")

    @classmethod
    def look_at(cls, position, target, focal_px: float, principal_px, up=(0.0, 0.0, 1.0)) -> "CameraModel":
        c = np.asarray(position, dtype=float)
        z = np.asarray(target, dtype=float) - c
        z /= np.linalg.norm(z)
        x = np.cross(z, np.asarray(up, dtype=float))
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        return cls(focal_px, principal_px, c, np.vstack([x, y, z]))

    def project(self, points) -> np.ndarray:
        """World points (..., 3) to pixels (..., 2)."""
        p = (np.asarray(points, dtype=float) - self.position_m) @ self.rotation.T
        cx, cy = self.principal_px
        return np.stack([self.focal_px * p[..., 0] / p[..., 2] + cx,
                         self.focal_px * p[..., 1] / p[..., 2] + cy], axis=-1)

    def to_json(self) -> dict:
        return {"focal_px": self.focal_px, "principal_px": list(self.principal_px),
                "position_m": self.position_m.tolist(),
                "rotation": self.rotation.reshape(-1).tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "CameraModel":
        return cls(float(d["focal_px"]), d["principal_px"], d["position_m"],
                   np.asarray(d["rotation"], dtype=float).reshape(3, 3))


@dataclass
class VerticalPlane:
    """Vertical plane through two ground anchors, optionally shifted along its normal."""

    mound_m: np.ndarray
    plate_m: np.ndarray
    offset_m: float = 0.0

    def __post_init__(self):
        self.mound_m = np.asarray(self.mound_m, dtype=float).reshape(3)
        self.plate_m = np.asarray(self.plate_m, dtype=float).reshape(3)
        if np.allclose(self.mound_m[:2], self.plate_m[:2]):
            raise ValueError("plane anchors must be horizontally distinct")

    @property
    def normal(self) -> np.ndarray:
        along = self.plate_m - self.mound_m
        n = np.cross(along, [0.0, 0.0, 1.0])
        return n / np.linalg.norm(n)

    @property
    def point(self) -> np.ndarray:
        return self.mound_m + self.offset_m * self.normal

    def shifted(self, offset_m: float) -> "VerticalPlane":
        return VerticalPlane(self.mound_m, self.plate_m, self.offset_m + offset_m)


@dataclass
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass
class SpeedEstimate:
    mph: float
    points_3d: np.ndarray
    frames: np.ndarray
    method: str = "vertical-plane"
    step_speeds_mps: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_json(self) -> dict:
        return {"speed_mph": self.mph, "method": self.method,
                "points_3d": [{"frame": int(f), "xyz": p.tolist()}
                              for f, p in zip(self.frames, self.points_3d)]}


def project_ray(camera: CameraModel, pixel) -> Ray:
    u, v = np.asarray(pixel, dtype=float)
    cx, cy = camera.principal_px
    d_cam = np.array([(u - cx) / camera.focal_px, (v - cy) / camera.focal_px, 1.0])
    d = camera.rotation.T @ d_cam
    return Ray(camera.position_m.copy(), d / np.linalg.norm(d))


def intersect_plane(ray: Ray, plane: VerticalPlane) -> np.ndarray:
    n = plane.normal
    denom = float(n @ ray.direction)
    if abs(denom) < _PARALLEL_TOL:
        raise NoIntersection("ray parallel to plane")
    t = float(n @ (plane.point - ray.origin)) / denom
    if t <= 0:
        raise NoIntersection("plane lies behind the camera")
    return ray.at(t)


def estimate_speed(track: BallTrack2D, camera: CameraModel, plane: VerticalPlane,
                   fps: float = 30.0) -> SpeedEstimate:
    """Median per-frame 3D displacement of the plane-intersected track, in mph.

    Inferred (gap-bridged) points and points whose ray misses the plane are
    skipped; zero-length steps are discarded.
    """
    frames, pts = [], []
    for f, xy, inf in zip(track.frames, track.xy, track.inferred):
        if inf:
            continue
        try:
            pts.append(intersect_plane(project_ray(camera, xy), plane))
        except NoIntersection:
            continue
        frames.append(int(f))
    if len(pts) < 3:
        raise InsufficientTrack(f"{len(pts)} usable points, need 3")
    frames_a, pts_a = np.asarray(frames), np.asarray(pts)
    dt = np.diff(frames_a)
    step = np.linalg.norm(np.diff(pts_a, axis=0), axis=1) / dt
    step = step[step > 0]
    if len(step) < 2:
        raise InsufficientTrack("fewer than two non-zero steps")
    speeds = step * fps
    return SpeedEstimate(float(np.median(speeds)) / MPH, pts_a, frames_a, step_speeds_mps=speeds)
