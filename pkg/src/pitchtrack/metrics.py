"""Evaluation harness for MC-CNN: folds, confusion matrices, balanced accuracy."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidK
from .mccnn import MccnnNet, NetShape, TrainConfig, normalize_channels, train
from .trajkit import TRAJ_JOINTS

log = logging.getLogger(__name__)

PITCH_TYPES = (
    "Fastball (4-seam)", "Fastball (2-seam)", "Fastball (Cut)", "Fastball (Split-finger)",
    "Sinker", "Curveball", "Slider", "Knuckle curve", "Knuckleball", "Changeup",
)
SUPERCLASSES = ("Fastballs", "Curveballs", "Breaking Balls")
_SUPER = {
    "Fastball (4-seam)": 0, "Fastball (2-seam)": 0, "Fastball (Cut)": 0,
    "Fastball (Split-finger)": 0, "Sinker": 0,
    "Curveball": 1, "Knuckle curve": 1,
    "Slider": 2, "Knuckleball": 2, "Changeup": 2,
}


def pitch_superclass(pitch_type: str) -> int:
    """Index into SUPERCLASSES for a pitch-type name."""
    return _SUPER[pitch_type]


def confusion_matrix(predictions, labels, n_classes: int | None = None,
                     normalize_rows: bool = False) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    p = np.asarray(predictions, dtype=int)
    t = np.asarray(labels, dtype=int)
    n = n_classes if n_classes is not None else int(max(p.max(initial=-1), t.max(initial=-1)) + 1)
    cm = np.zeros((n, n), dtype=float)
    np.add.at(cm, (t, p), 1.0)
    if normalize_rows:
        rows = cm.sum(axis=1, keepdims=True)
        cm = np.divide(cm, rows, out=np.zeros_like(cm), where=rows > 0)
    return cm


def balanced_accuracy(predictions, labels) -> float:
    """Mean per-class recall over the classes that occur in ``labels``."""
    p = np.asarray(predictions, dtype=int)
    t = np.asarray(labels, dtype=int)
    if not len(t):
        raise ValueError("no labels")
    classes = np.unique(t)
    n = int(max(p.max(), t.max()) + 1)
    missing = sorted(set(range(n)) - set(classes.tolist()))
    if missing:
        log.warning("classes %s absent from labels; excluded from balanced accuracy", missing)
    return float(np.mean([np.mean(p[t == c] == c) for c in classes]))


def kfold_split(n_samples: int, k: int = 10, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """k disjoint test folds (sizes differ by at most one) with their train complements."""
    if k < 2 or k > n_samples:
        raise InvalidK(f"k={k} invalid for {n_samples} samples")
    perm = np.random.default_rng(seed).permutation(n_samples)
    folds = np.array_split(perm, k)
    out = []
    for i, test in enumerate(folds):
        tr = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((np.sort(tr), np.sort(test)))
    return out


@dataclass
class CVReport:
    accuracy: float
    balanced_accuracy: float
    confusion: np.ndarray
    fold_accuracy: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {"accuracy": self.accuracy, "balanced_accuracy": self.balanced_accuracy,
                "confusion_matrix": self.confusion.tolist(), "fold_accuracy": self.fold_accuracy,
                "loss_curves": self.losses, "seconds": self.seconds}


def cross_validate(X: np.ndarray, y: np.ndarray, n_classes: int, config: TrainConfig = TrainConfig(),
                   k: int = 10, epochs: int | None = None, net_shape: NetShape | None = None,
                   folds: int | None = None) -> CVReport:
    """Train a fresh net per fold (train-split normalisation only) and pool predictions.

    ``folds`` limits how many of the k folds are actually run.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    shape = net_shape or NetShape(X.shape[1], X.shape[2], n_classes)
    t0 = time.perf_counter()
    preds, truth, accs, curves = [], [], [], []
    for i, (tr, te) in enumerate(kfold_split(len(X), k, config.seed)):
        if folds is not None and i >= folds:
            break
        Xtr, stats = normalize_channels(X[tr])
        Xte, _ = normalize_channels(X[te], stats)
        net = MccnnNet(shape, seed=config.seed + i, dtype=config.dtype)
        res = train(net, Xtr, y[tr], config, epochs=epochs)
        p = net.predict(Xte)
        preds.append(p)
        truth.append(y[te])
        accs.append(float(np.mean(p == y[te])))
        curves.append(res.losses)
        log.info("fold %d: acc %.3f final loss %.4f", i, accs[-1], res.losses[-1])
    p, t = np.concatenate(preds), np.concatenate(truth)
    return CVReport(float(np.mean(p == t)), balanced_accuracy(p, t),
                    confusion_matrix(p, t, n_classes, normalize_rows=True), accs, curves,
                    time.perf_counter() - t0)


def save_dataset(path, X: np.ndarray, y: np.ndarray, n_classes: int, class_names=None) -> None:
    X = np.asarray(X, dtype=np.float32)
    header = {"n_samples": int(X.shape[0]), "length": int(X.shape[2]), "n_channels": int(X.shape[1]),
              "n_classes": int(n_classes), "joints": list(TRAJ_JOINTS),
              "class_names": list(class_names) if class_names is not None else None}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
                 X=X, y=np.asarray(y, dtype=np.int64))


def load_dataset(path) -> tuple[np.ndarray, np.ndarray, dict]:
    with np.load(path) as z:
        header = json.loads(bytes(z["header"]).decode())
        X, y = z["X"].astype(float), z["y"].astype(int)
    if X.shape != (header["n_samples"], header["n_channels"], header["length"]):
        raise ValueError("dataset header does not match payload")
    return X, y, header
