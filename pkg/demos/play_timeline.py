"""Reconstruct a whole play and compare its event timeline with the script.

Generates a play (side view for the ball, close view for the pitcher, pose
detections for pitcher and batter with bystanders mixed in), runs every
pipeline stage into a bundle directory and prints each event next to its
ground truth.  Run: python demos/play_timeline.py [seed] [out_dir]
"""

import sys
import tempfile

from pitchtrack.cli import _play_inputs
from pitchtrack.config import PipelineConfig
from pitchtrack.pipeline import run_pipeline
from pitchtrack.synthgen import synth_play

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
out = sys.argv[2] if len(sys.argv) > 2 else tempfile.mkdtemp(prefix="play_")

play = synth_play(seed)
truth = play["truth"]

# The camera pose and the image position of the pitcher's hand at release are
# per-venue calibration, so they go into the config rather than the inputs.
config = PipelineConfig({"camera": play["camera"].to_json(),
                         "ball": {"release_point_px": truth["release_px"].tolist()}})
bundle = run_pipeline(config, _play_inputs(play), out)

print(f"bundle written to {bundle.path}")
for stage, status in bundle.status.items():
    print(f"  {stage:16s} {status}")

tl = bundle.timeline
rows = [("first movement", tl.first_movement_refined, truth["first_move"]),
        ("batter leg raise", tl.leg_raise, truth["leg_raise"]),
        ("release", tl.release, truth["release"]),
        ("batter foot down", tl.foot_down, truth["foot_down"]),
        ("batter first step", tl.first_step, truth["first_step"])]
print(f"\n{'event':18s} {'estimate':>8s} {'truth':>6s}")
for name, est, ref in sorted(rows, key=lambda r: r[2]):
    print(f"{name:18s} {str(est):>8s} {ref:>6d}")
print(f"{'speed (mph)':18s} {bundle.speed_mph:8.2f} {truth['speed_mph']:6.2f}")
