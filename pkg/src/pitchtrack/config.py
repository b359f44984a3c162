"""One layered JSON document holding every pipeline threshold.

User documents are merged over :data:`DEFAULTS` section by section; unknown
sections or keys are rejected.  :data:`SOURCES` tags each threshold as
``reference`` (the published default of the method) or ``calibrated``
(chosen on the synthetic generator here).
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import numpy as np

from .ballistics import CameraModel, VerticalPlane
from .errors import ConfigError
from .events import FirstMoveConfig, FirstStepConfig
from .fmoc import FmocConfig
from .gbcv import GbcvConfig
from .mccnn import TrainConfig

DEFAULTS: dict = {
    "pose": {"min_iou": 0.1, "max_iou": 0.5, "padding": [15.0, 15.0], "smoothing": "lowpass",
             "cutoff_hz": 3.0, "order": 4, "knot_spacing": 5.0, "fps": 30.0},
    "fmoc": {"k": 1, "tau_diff": 25.0, "m": 3, "min_area": 10},
    "gbcv": {"theta_dist": 10.0, "weights": [0.5, 0.5], "theta_confidence": 0.8,
             "min_track_len": 5, "gap_merge_max": 5, "max_candidates": 40},
    "first_move": {"b": 1.0, "min_length": 5, "max_apart": 10, "refine_halfwidth": 5, "k": 3, "m": 3},
    "first_step": {"window_start": 10, "window_end": 50, "start_fraction": 0.06,
                   "floor_fraction": 0.006, "decay": 0.8},
    "foot_down": {"search_range": 15},
    "ball": {"release_point_px": None},
    "camera": None,
    "plane": {"mound_m": [0.0, 0.0, 0.0], "plate_m": [18.44, 0.0, 0.0], "offset_m": 0.0},
    "bat": {"max_dist": None, "max_dist_factor": 1.5},
    "train": {"learning_rate": 0.0005, "batch_size": 40, "epochs": 2000, "beta1": 0.9, "beta2": 0.999,
              "eps": 1e-8, "seed": 0, "dtype": "float32"},
    "classify": {"checkpoint": None, "player": "pitcher"},
}

SOURCES: dict = {
    "pose.min_iou": "reference", "pose.max_iou": "reference", "pose.padding": "calibrated",
    "pose.cutoff_hz": "calibrated", "pose.order": "calibrated", "pose.knot_spacing": "calibrated",
    "fmoc.k": "reference", "fmoc.tau_diff": "calibrated", "fmoc.m": "calibrated",
    "fmoc.min_area": "calibrated",
    "gbcv.theta_dist": "reference", "gbcv.weights": "calibrated", "gbcv.theta_confidence": "calibrated",
    "gbcv.min_track_len": "calibrated", "gbcv.gap_merge_max": "calibrated",
    "gbcv.max_candidates": "calibrated",
    "first_move.b": "reference", "first_move.min_length": "reference",
    "first_move.max_apart": "reference", "first_move.refine_halfwidth": "reference",
    "first_move.k": "reference", "first_move.m": "calibrated",
    "first_step.window_start": "reference", "first_step.window_end": "reference",
    "first_step.start_fraction": "calibrated", "first_step.floor_fraction": "calibrated",
    "first_step.decay": "calibrated",
    "foot_down.search_range": "reference",
    "bat.max_dist_factor": "calibrated",
    "train.learning_rate": "reference", "train.batch_size": "reference", "train.epochs": "reference",
    "train.beta1": "reference", "train.beta2": "reference", "train.eps": "reference",
}

_CAMERA_KEYS = {"focal_px", "principal_px", "position_m", "rotation"}


def merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = merge(base[key], val, where + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


class PipelineConfig:
    """Validated view over the layered document."""

    def __init__(self, doc: dict | None = None):
        doc = doc or {}
        cam = doc.get("camera")
        rest = {k: v for k, v in doc.items() if k != "camera"}
        self.doc = merge(DEFAULTS, rest)
        if cam is not None:
            unknown = set(cam) - _CAMERA_KEYS
            if unknown:
                raise ConfigError(f"unknown camera keys {sorted(unknown)}")
            missing = _CAMERA_KEYS - set(cam)
            if missing:
                raise ConfigError(f"camera block lacks {sorted(missing)}")
        self.doc["camera"] = copy.deepcopy(cam)
        try:
            self.fmoc, self.gbcv, self.first_move, self.first_step, self.train
            self.plane
            if cam is not None:
                self.camera
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls(doc)

    def __getitem__(self, section: str):
        return self.doc[section]

    def to_json(self) -> dict:
        return copy.deepcopy(self.doc)

    @property
    def fmoc(self) -> FmocConfig:
        return FmocConfig(**self.doc["fmoc"])

    @property
    def fmoc_first_move(self) -> FmocConfig:
        fm = self.doc["first_move"]
        return FmocConfig(k=fm["k"], tau_diff=self.doc["fmoc"]["tau_diff"], m=fm["m"],
                          min_area=self.doc["fmoc"]["min_area"])

    @property
    def gbcv(self) -> GbcvConfig:
        g = dict(self.doc["gbcv"])
        g["weights"] = tuple(g["weights"])
        return GbcvConfig(**g)

    @property
    def first_move(self) -> FirstMoveConfig:
        fm = {k: v for k, v in self.doc["first_move"].items() if k != "m"}
        return FirstMoveConfig(**fm)

    @property
    def first_step(self) -> FirstStepConfig:
        return FirstStepConfig(**self.doc["first_step"])

    @property
    def train(self) -> TrainConfig:
        return TrainConfig(**self.doc["train"])

    @property
    def camera(self) -> CameraModel | None:
        cam = self.doc["camera"]
        return None if cam is None else CameraModel.from_json(cam)

    @property
    def plane(self) -> VerticalPlane:
        p = self.doc["plane"]
        return VerticalPlane(np.asarray(p["mound_m"]), np.asarray(p["plate_m"]), float(p["offset_m"]))
