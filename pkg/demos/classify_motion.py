"""Train the multi-channel CNN on synthetic joint trajectories.

Three motion classes differ only in which limb oscillates and how fast.
Pose dropout follows the rates seen for a real pose estimator, so the
trajectories are gap-filled and smoothed before they become 24 channels.
A short 3-fold run keeps this quick; the acceptance suite does 10 folds.
Run: python demos/classify_motion.py [epochs]
"""

import sys

import numpy as np

from pitchtrack.mccnn import TrainConfig
from pitchtrack.metrics import cross_validate
from pitchtrack.synthgen import synth_trajectories
from pitchtrack.trajkit import JointTrajectories

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 60

coords, labels, _ = synth_trajectories(n_per_class=30, seed=1, dropout="realistic")
print(f"{len(coords)} clips, {np.isnan(coords).mean():.1%} of joint coordinates missing")

X = np.stack([JointTrajectories(c).smoothed().channels() for c in coords])
print(f"network input {X.shape[1]} channels x {X.shape[2]} frames")

report = cross_validate(X, labels, 3, TrainConfig(batch_size=30), k=3, epochs=epochs)
print(f"accuracy {report.accuracy:.1%}, balanced accuracy {report.balanced_accuracy:.1%} "
      f"({report.seconds:.0f} s)")
print("row-normalised confusion matrix:")
print(np.array2string(report.confusion, precision=2, suppress_small=True))
