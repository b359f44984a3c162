import numpy as np
import pytest
from hypothesis import given, strategies as st

from pitchtrack.errors import InsufficientBaseline, InvalidWindow
from pitchtrack.events import (EventTimeline, FirstMoveConfig, detect_batter_first_step,
                               detect_foot_down, detect_leg_raise, detect_pitcher_first_move,
                               first_qualifying_run, leg_close_to_motion, refine_first_move)
from pitchtrack.fmoc import FmocConfig, MotionCandidate, detect_sequence
from pitchtrack.synthgen import BatterScript, PitcherScript, SceneScript, pitcher_camera, render_scene
from pitchtrack.trajkit import ANKLES, KNEES, LEG, N_JOINTS

from oracles import first_run_bruteforce


def batter_coords(script, n=165, scale=120.0, origin=(400.0, 400.0), mirror_width=None):
    """Noise-free 12-joint image trajectories of a scripted batter."""
    J = np.array([np.asarray(origin) + scale * np.c_[b[:, 0], -b[:, 1]]
                  for b in (script.pose_body(t) for t in range(n))])
    if mirror_width is not None:
        J[:, :, 0] = mirror_width - J[:, :, 0]
    return J[:, 2:14]


def flat_coords(T=60, y=300.0):
    c = np.zeros((T, N_JOINTS, 2))
    c[..., 0] = 100.0
    c[..., 1] = y
    c[:, KNEES, 1] = y - 40
    return c


# -- first movement -----------------------------------------------------------

def test_walkthrough_run():
    assert first_qualifying_run([59, 60, 62, 63, 65]) == 59
    assert first_qualifying_run([50, 59, 60, 62, 63, 65]) == 59
    assert first_qualifying_run([56]) is None
    assert first_qualifying_run([]) is None


@given(st.lists(st.integers(0, 60), max_size=20), st.integers(1, 6), st.integers(1, 12))
def test_run_matches_bruteforce(hits, min_length, max_apart):
    assert first_qualifying_run(hits, min_length, max_apart) == first_run_bruteforce(hits, min_length, max_apart)


def test_closeness_radius():
    leg = np.array([[0.0, 100.0], [20.0, 100.0], [0.0, 60.0], [20.0, 60.0]])  # shin length 40
    # radius = 0.5 * b * (40 + 40) = 40 for b=1
    assert leg_close_to_motion([MotionCandidate.at(0, 139.9)], leg)
    assert not leg_close_to_motion([MotionCandidate.at(0, 140.1)], leg)
    assert leg_close_to_motion([MotionCandidate.at(0, 159.9)], leg, b=1.5)
    assert not leg_close_to_motion([], leg)


def _fixture_candidates(coords, frames, offset=0):
    out = {}
    for f in range(offset, offset + len(coords)):
        ankle = coords[f - offset, ANKLES[1]]
        out[f] = [MotionCandidate.at(*(ankle + [5, -3]))] if f in frames else [MotionCandidate.at(900, 900)]
    return out


def test_first_move_on_walkthrough_fixture():
    c = flat_coords(80)
    cands = _fixture_candidates(c, {50, 59, 60, 62, 63, 65})
    assert detect_pitcher_first_move(cands, c) == 59


def test_first_move_not_found():
    c = flat_coords(80)
    assert detect_pitcher_first_move(_fixture_candidates(c, {10, 30, 50}), c) is None


def test_first_move_skips_frames_without_leg_joints():
    c = flat_coords(80)
    c[59, KNEES[0]] = np.nan
    assert detect_pitcher_first_move(_fixture_candidates(c, {59, 60, 62, 63, 65, 66}), c) == 60


@given(st.sets(st.integers(0, 79), max_size=25), st.floats(0.2, 5.0), st.floats(-300, 300))
def test_first_move_scale_invariant(frames, scale, shift):
    c = flat_coords(80)
    cands = _fixture_candidates(c, frames)
    base = detect_pitcher_first_move(cands, c)
    c2 = c * scale + shift
    cands2 = {f: [MotionCandidate.at(m.cx * scale + shift, m.cy * scale + shift) for m in ms]
              for f, ms in cands.items()}
    assert detect_pitcher_first_move(cands2, c2) == base


@pytest.mark.parametrize("seed", range(3))
def test_first_move_on_rendered_delivery(seed):
    # leg lift spans frames 38-42
    ps = PitcherScript(onset=38, rise=4, fall=10, release=62)
    script = SceneScript(seed=seed, width=320, height=240, start_frame=10, n_frames=60, pitcher=ps,
                         show_ball=False, camera=pitcher_camera(320, 240), n_distractors=0, jitter_prob=0.0)
    frames, gt = render_scene(script)
    cands = dict(detect_sequence(frames, FmocConfig(k=3, m=3), start_frame=10))
    coords = np.array([gt.pitcher_px[t][2:14] for t in script.frames])
    n = detect_pitcher_first_move(cands, coords, FirstMoveConfig(k=3), frame_offset=10)
    assert abs(n - 40) <= 2
    assert refine_first_move(n, coords, 5, frame_offset=10) == ps.apex


def test_refine_finds_apex():
    c = flat_coords(80)
    c[44, LEG, 1] -= 30
    c[43, LEG, 1] -= 20
    assert refine_first_move(41, c, 5) == 44


@pytest.mark.property
def test_refine_flat_picks_window_start():
    assert refine_first_move(41, flat_coords(80), 5) == 36


def test_refine_window_clipped():
    c = flat_coords(10)
    assert refine_first_move(2, c, 5) == 0
    with pytest.raises(InvalidWindow):
        refine_first_move(30, c, 5)


@given(st.integers(0, 79), st.integers(0, 8), st.integers(0, 1000))
def test_refine_inside_window(n, p, seed):
    c = flat_coords(80) + np.random.default_rng(seed).normal(0, 5, (80, N_JOINTS, 2))
    h = refine_first_move(n, c, p)
    assert max(n - p, 0) <= h <= min(n + p, 79)


def test_first_move_config_validation():
    with pytest.raises(ValueError):
        FirstMoveConfig(min_length=11, max_apart=10)


# -- batter first step --------------------------------------------------------

def test_first_step_scripted_run():
    c = batter_coords(BatterScript(release=90, run_start=120))
    s = detect_batter_first_step(c, 90)
    assert 117 <= s <= 123


@pytest.mark.parametrize("direction", [1, -1])
def test_first_step_mirror(direction):
    bs = BatterScript(release=90, run_start=120, direction=direction)
    assert detect_batter_first_step(batter_coords(bs), 90) == \
        detect_batter_first_step(batter_coords(bs, mirror_width=960), 90)


def test_first_step_stationary():
    assert detect_batter_first_step(batter_coords(BatterScript(run_start=None, swing=False)), 90) is None
    assert detect_batter_first_step(batter_coords(BatterScript(run_start=None, swing=True)), 90) is None


def test_first_step_inside_window():
    c = batter_coords(BatterScript(release=90, run_start=95))
    s = detect_batter_first_step(c, 90)
    assert s == 100  # window opens at r + 10 and the runner is already moving


@pytest.mark.property
def test_first_step_scale_invariant():
    bs = BatterScript(release=90, run_start=118)
    a = detect_batter_first_step(batter_coords(bs, scale=80), 90)
    b = detect_batter_first_step(batter_coords(bs, scale=160), 90)
    assert a == b


def test_first_step_window_outside_clip():
    c = batter_coords(BatterScript(), n=50)
    assert detect_batter_first_step(c, 90) is None


# -- leg raise / foot down ----------------------------------------------------

def test_leg_raise_scripted():
    bs = BatterScript(release=90, lift_apex=86, run_start=120)
    assert detect_leg_raise(batter_coords(bs), 90, 122) == 86


def test_leg_raise_monotone_rising_hits_window_end():
    c = flat_coords(150)
    c[:, LEG, 1] -= np.arange(150)[:, None]
    assert detect_leg_raise(c, 90, 120) == 110


def test_leg_raise_invalid_windows():
    c = flat_coords(150)
    with pytest.raises(InvalidWindow):
        detect_leg_raise(c, 90, 60)
    with pytest.raises(InvalidWindow):
        detect_leg_raise(c, 10, 60)


def test_foot_down_scripted():
    bs = BatterScript(release=90, lift_apex=86, lift_down=8, run_start=120)
    g, confident = detect_foot_down(batter_coords(bs), 86, 15)
    assert abs(g - 94) <= 1 and confident


def test_foot_down_never_returns():
    c = flat_coords(150)
    c[60:, LEG, 1] -= 50 + np.arange(90)[:, None]
    g, confident = detect_foot_down(c, 60, 15)
    assert g == 60 and confident  # ever-rising leg: closest to baseline is the start
    c = flat_coords(150)
    c[60:, LEG, 1] -= 50 - 0.1 * np.arange(90)[:, None]
    g, confident = detect_foot_down(c, 60, 15)
    assert g == 75 and not confident


@pytest.mark.property
def test_foot_down_constant_height():
    assert detect_foot_down(flat_coords(100), 40, 15) == (40, True)


def test_foot_down_needs_baseline():
    with pytest.raises(InsufficientBaseline):
        detect_foot_down(flat_coords(100), 10, 15)


@given(st.integers(0, 1000), st.integers(11, 80), st.integers(1, 20))
def test_foot_down_inside_window(seed, l, r):
    c = flat_coords(100) + np.random.default_rng(seed).normal(0, 10, (100, N_JOINTS, 2))
    g, _ = detect_foot_down(c, l, r)
    assert l <= g <= min(l + r, 99)


def test_timeline_json():
    tl = EventTimeline(first_movement=70, release=93, status={"first_step": "not found"})
    d = tl.to_json()
    assert d["first_step"] is None and d["release"] == 93 and d["fps"] == 30.0
