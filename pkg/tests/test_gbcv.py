import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from pitchtrack.errors import DegenerateTrack, InvalidMerge
from pitchtrack.fmoc import MotionCandidate, detect_sequence, FmocConfig
from pitchtrack.gbcv import (BallTrack2D, BallTracker, GbcvConfig, build_candidate_graph,
                             detect_ball_tracks, distance_similarity, estimate_release_frame,
                             merge_tracks, slope_similarity, track_ball, triple_confidence, unit_slope)
from pitchtrack.synthgen import ArcDecoy, SceneScript, render_scene, side_camera

C = MotionCandidate.at


def line_track(start, n, p0, step, frames=None):
    xy = np.asarray(p0, float) + np.arange(n)[:, None] * np.asarray(step, float)
    return BallTrack2D(np.arange(start, start + n), xy, np.zeros(n, bool), np.full(n, np.nan))


# -- graph --------------------------------------------------------------------

def test_edge_rule():
    g = build_candidate_graph([(0, [C(0, 0)]), (1, [C(5, 0), C(20, 0)])], theta_dist=10)
    kids = g.children(g.layers[0][0])
    assert [k.candidate.cx for k in kids] == [20.0]


def test_collinear_chain_single_path():
    g = build_candidate_graph([(t, [C(20 * t, 0)]) for t in range(3)])
    paths = [(a, b, c) for a in g.layers[0] for b in g.children(a) for c in g.children(b)]
    assert len(paths) == 1
    assert g.n_edges() == 2


pts = st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)), max_size=6)


@given(st.lists(pts, min_size=2, max_size=4), st.floats(1, 40))
def test_graph_edges_match_pair_enumeration(layers, theta):
    stream = [(t, [C(x, y) for x, y in layer]) for t, layer in enumerate(layers)]
    g = build_candidate_graph(stream, theta)
    want = set()
    for t in range(len(layers) - 1):
        for (i, p), (j, q) in itertools.product(enumerate(layers[t]), enumerate(layers[t + 1])):
            if math.dist(p, q) > theta:
                want.add((t, i, j))
    got = {(f, i, j) for (f, i), kids in g.edges.items() for j in kids}
    assert got == want


# -- similarities -------------------------------------------------------------

def test_slope_examples():
    s = np.array([1.0, 0.0])
    assert slope_similarity(s, s) == 1.0
    assert slope_similarity(s, -s) == 0.0
    assert slope_similarity(s, np.array([0.0, 1.0])) == pytest.approx(1 - math.sqrt(2) / 2)
    assert slope_similarity(None, s) == 0.0
    assert unit_slope((1, 1), (1, 1)) is None


def test_distance_examples():
    assert distance_similarity(7, 7) == 1.0
    assert distance_similarity(10, 20) == 0.5
    assert distance_similarity(12, 18) == pytest.approx(2 / 3)
    assert distance_similarity(0, 5) == 0.0
    assert distance_similarity(-1, 5) == 0.0


angle = st.floats(0, 2 * math.pi)


@given(angle, angle)
def test_slope_properties(a, b):
    s1 = np.array([math.cos(a), math.sin(a)])
    s2 = np.array([math.cos(b), math.sin(b)])
    assert slope_similarity(s1, s1) == pytest.approx(1.0)
    assert slope_similarity(s1, -s1) == pytest.approx(0.0, abs=1e-12)
    v = slope_similarity(s1, s2)
    assert 0.0 <= v <= 1.0
    # chord length between the two directions
    assert v == pytest.approx(1 - abs(math.sin((a - b) / 2)), abs=1e-9)


@given(st.floats(0.01, 1e4), st.floats(0.01, 1e4), st.floats(0.01, 100))
def test_distance_properties(d1, d2, c):
    assert distance_similarity(d1, d2) == distance_similarity(d2, d1)
    assert distance_similarity(c * d1, c * d2) == pytest.approx(distance_similarity(d1, d2))
    assert 0 < distance_similarity(d1, d2) <= 1


def test_triple_examples():
    assert triple_confidence((0, 0), (10, 0), (20, 0)) == pytest.approx(1.0)
    assert triple_confidence((0, 0), (10, 0), (10, 10)) == pytest.approx(0.5 * (1 - math.sqrt(2) / 2) + 0.5)
    assert triple_confidence((0, 0), (10, 0), (0, 0)) == pytest.approx(0.5)


def test_area_term_requires_candidates():
    w = (0.4, 0.4, 0.2)
    assert triple_confidence(C(0, 0, area=9), C(10, 0, area=9), C(20, 0, area=9), w) == pytest.approx(1.0)
    assert triple_confidence(C(0, 0, area=9), C(10, 0, area=18), C(20, 0, area=9), w) == pytest.approx(0.9)
    with pytest.raises(ValueError):
        triple_confidence((0, 0), (10, 0), (20, 0), w)


coord = st.floats(-200, 200)


@given(st.tuples(coord, coord), st.tuples(coord, coord), st.tuples(coord, coord),
       st.floats(-300, 300), st.floats(-300, 300), angle, st.floats(0.1, 10))
def test_triple_similarity_invariance(a, b, c, dx, dy, theta, scale):
    a, b, c = map(np.array, (a, b, c))
    assume(np.linalg.norm(b - a) > 1e-3 and np.linalg.norm(c - b) > 1e-3)
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    T = lambda p: scale * (R @ p) + [dx, dy]
    base = triple_confidence(a, b, c)
    assert 0.0 <= base <= 1.0
    assert triple_confidence(T(a), T(b), T(c)) == pytest.approx(base, abs=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        GbcvConfig(weights=(0.7, 0.7))
    with pytest.raises(ValueError):
        GbcvConfig(theta_confidence=0.0)


# -- tracking -----------------------------------------------------------------

def test_no_candidates():
    assert track_ball([]) == []
    assert track_ball([(t, []) for t in range(10)]) == []


def test_ball_among_decoys():
    rng = np.random.default_rng(0)
    stream = []
    for t in range(12):
        cands = [C(30 + 15 * t, 100 - 4 * t)]
        # limb swinging back and forth plus random clutter
        cands.append(C(200 + 14 * (-1) ** t, 50))
        cands += [C(*rng.uniform(0, 300, 2)) for _ in range(2)]
        stream.append((t, cands))
    tracks = track_ball(stream)
    best = tracks[0]
    assert len(best) == 12
    assert np.allclose(best.xy, [[30 + 15 * t, 100 - 4 * t] for t in range(12)])


def test_short_path_rejected():
    stream = [(t, [C(20 * t, 0)]) for t in range(4)]
    assert track_ball(stream, GbcvConfig(min_track_len=5)) == []
    assert len(track_ball(stream, GbcvConfig(min_track_len=4))) == 1


def _recheck(track, cfg):
    """Independent pass over an emitted track's real (non-inferred) points."""
    real = [i for i in range(len(track)) if not track.inferred[i]]
    assert len(real) >= cfg.min_track_len
    assert np.all(np.diff(track.frames) > 0)
    for i in range(1, len(track) - 1):
        if not track.inferred[i - 1:i + 2].any():
            a, b, c = track.xy[i - 1:i + 2]
            assert np.linalg.norm(b - a) > cfg.theta_dist
            assert triple_confidence(a, b, c, cfg.weights) >= cfg.theta_confidence - 1e-12


@given(st.integers(0, 10_000))
def test_emitted_tracks_satisfy_bounds(seed):
    rng = np.random.default_rng(seed)
    stream = []
    p, v = rng.uniform(0, 50, 2), rng.uniform(12, 25, 2)
    for t in range(10):
        cands = [C(*rng.uniform(0, 400, 2)) for _ in range(int(rng.integers(0, 5)))]
        if rng.uniform() < 0.85:
            cands.append(C(*(p + t * v + rng.normal(0, 0.5, 2))))
        stream.append((t, cands))
    cfg = GbcvConfig()
    for tr in track_ball(stream, cfg):
        _recheck(tr, cfg)


@given(st.booleans(), st.integers(0, 3))
def test_equal_tracks_tie_break(upper_first, shift):
    # two identical straight flights; rank ties go to the earlier start, then the lower layer index
    upper = {t: C(20 * t, 50) for t in range(shift, shift + 8)}
    lower = {t: C(20 * t, 300) for t in range(8)}
    stream = []
    for t in range(shift + 8):
        pair = [upper.get(t), lower.get(t)]
        stream.append((t, [c for c in (pair if upper_first else pair[::-1]) if c is not None]))
    tracks = track_ball(stream)
    assert len(tracks) == 2 and len(tracks[0]) == len(tracks[1]) == 8
    if shift:
        assert tracks[0].start == 0
    else:
        assert (tracks[0].xy[0, 1] == 50) == upper_first
    assert [t.xy.tolist() for t in track_ball(stream)] == [t.xy.tolist() for t in tracks]


def test_detect_ball_tracks_replays_graph():
    stream = [(t, [C(20 * t, 3 * t), C(100, 100)]) for t in range(8)]
    g = build_candidate_graph(stream)
    a = detect_ball_tracks(g)
    b = track_ball(stream)
    assert len(a) == len(b) == 1
    assert np.array_equal(a[0].xy, b[0].xy)


def test_online_tracker_emits_same_tracks_when_fed_incrementally():
    stream = [(t, [C(10 + 18 * t, 40 + 2 * t)]) for t in range(9)]
    tr = BallTracker()
    for f, cands in stream:
        tr.push(f, cands)
    assert len(tr.finish()[0]) == 9


def test_rendered_scene_with_arc_decoy():
    cam = side_camera(480, 270)
    decoy = ArcDecoy(center=(120, 150), radius_px=25, start_angle=90, step_deg=20, start_frame=85,
                     n_frames=30, blob_px=3.0, value=200.0)
    script = SceneScript(seed=3, width=480, height=270, start_frame=85, n_frames=30, camera=cam,
                         streak_px=2.0, decoys=(decoy,), n_distractors=0, jitter_prob=0.0)
    frames, gt = render_scene(script)
    tracks = track_ball(detect_sequence(frames, FmocConfig(), start_frame=85))
    best = tracks[0]
    errs = [np.linalg.norm(best.point_at(f) - gt.ball_px[f]) for f in best.frames if f in gt.ball_px]
    assert len(errs) >= 10 and np.mean(errs) < 3
    for tr in tracks:
        on_decoy = [decoy.position(f) is not None and np.linalg.norm(p - decoy.position(f)) < 30
                    for f, p in zip(tr.frames, tr.xy)]
        assert not all(on_decoy)


# -- merging ------------------------------------------------------------------

def test_merge_same_line_one_frame_gap():
    a = line_track(0, 5, (0, 0), (15, 5))
    b = line_track(6, 5, (90, 30), (15, 5))
    m = merge_tracks(a, b)
    assert m is not None and len(m) == 11
    assert m.inferred.tolist() == [False] * 5 + [True] + [False] * 5
    assert np.allclose(m.xy[5], (75, 25))


def test_merge_perpendicular_rejected():
    a = line_track(0, 5, (0, 0), (15, 0))
    b = line_track(6, 5, (75, 15), (0, 15))
    assert merge_tracks(a, b) is None


def test_merge_overlap_raises():
    a = line_track(0, 5, (0, 0), (15, 0))
    with pytest.raises(InvalidMerge):
        merge_tracks(a, line_track(4, 5, (60, 0), (15, 0)))


def test_merge_gap_too_long():
    a = line_track(0, 5, (0, 0), (15, 0))
    b = line_track(12, 5, (180, 0), (15, 0))
    # frames 5..11 missing
    assert merge_tracks(a, b, GbcvConfig(gap_merge_max=6)) is None
    assert merge_tracks(a, b, GbcvConfig(gap_merge_max=7)) is not None


def test_missed_frame_mid_flight_gives_one_track():
    stream = [(t, [C(10 + 16 * t, 200 - 6 * t)] if t != 7 else []) for t in range(15)]
    tracks = track_ball(stream)
    assert len(tracks) == 1
    assert len(tracks[0]) == 15
    assert tracks[0].inferred.tolist() == [t == 7 for t in range(15)]


def test_track_json_roundtrip():
    t = line_track(3, 4, (1, 2), (10, 0))
    doc = t.to_json(release_frame=1)
    assert doc["mean_step_px"] == pytest.approx(10)
    back = BallTrack2D.from_json(doc)
    assert np.array_equal(back.frames, t.frames) and np.allclose(back.xy, t.xy)


# -- release frame ------------------------------------------------------------

def test_release_examples():
    t = line_track(96, 5, (45, 0), (15, 0))
    assert estimate_release_frame(t, (0, 0)) == 93
    assert estimate_release_frame(t, (45, 0)) == 96


def test_release_degenerate():
    with pytest.raises(DegenerateTrack):
        estimate_release_frame(line_track(0, 1, (0, 0), (1, 0)), (0, 0))
    with pytest.raises(DegenerateTrack):
        estimate_release_frame(line_track(0, 3, (0, 0), (0, 0)), (0, 0))


@given(st.integers(0, 500), st.floats(-500, 500), st.floats(-500, 500), st.floats(1, 40))
def test_release_never_after_first_frame(start, rx, ry, step):
    t = line_track(start, 4, (0, 0), (step, 0))
    assert estimate_release_frame(t, (rx, ry)) <= start
