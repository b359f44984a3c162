"""Keep the bat tracked after the object detector loses it.

During a swing the detector only sees the bat while it is sharp.  Once it
blurs, the nearest FMO-C candidate to the previous box takes over, and the
batter's wrist decides which box corner is the handle.
Run: python demos/bat_fusion.py [n_swings]
"""

import sys
from collections import Counter

import numpy as np

from pitchtrack.batglove import attach_tip_base, fuse_bat_track
from pitchtrack.synthgen import swing_clip

n = int(sys.argv[1]) if len(sys.argv) > 1 else 50

sources, tip_err = Counter(), []
for seed in range(n):
    boxes, cands, wrists, truth = swing_clip(seed)
    track = attach_tip_base(fuse_bat_track(boxes, cands, range(truth["script"].n_frames)), wrists)
    sources.update(f.source for f in track.frames)
    tip_err += [np.linalg.norm(f.tip - truth["tips"][f.frame]) for f in track.frames if f.tip is not None]

total = sum(sources.values())
for src in ("detector", "fmo", "missing"):
    print(f"{src:9s} {sources[src] / total:6.1%} of swing frames")
print(f"coverage {1 - sources['missing'] / total:.1%}; median tip error {np.median(tip_err):.1f} px")
