"""Graph-based classifier voting (GBCV) for ball tracking.

Motion candidates become nodes of a frame-layered DAG; a node links to a node
of the next frame when the two centroids are more than ``theta_dist`` pixels
apart (the ball has a minimum apparent speed).  Every path of three nodes is
scored by how similar its two steps are in direction and length, and paths
whose every triple clears ``theta_confidence`` are grown greedily frame by
frame into ball tracks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateTrack, InvalidMerge
from .fmoc import MotionCandidate


@dataclass(frozen=True)
class GbcvConfig:
    theta_dist: float = 10.0
    weights: tuple = (0.5, 0.5)  # slope, distance[, area]
    theta_confidence: float = 0.8
    min_track_len: int = 5
    gap_merge_max: int = 5
    max_candidates: int = 40  # per frame, largest first; bounds the triple count

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) not in (2, 3) or (w < 0).any() or abs(w.sum() - 1) > 1e-9:
            raise ValueError("weights must be 2 or 3 non-negative values summing to 1")
        if not 0 < self.theta_confidence <= 1:
            raise ValueError("theta_confidence must be in (0, 1]")


@dataclass(frozen=True)
class CandidateNode:
    frame: int
    index: int  # position inside its layer
    candidate: MotionCandidate

    @property
    def xy(self) -> np.ndarray:
        return self.candidate.centroid


@dataclass
class CandidateGraph:
    layers: dict = field(default_factory=dict)  # frame -> list[CandidateNode]
    edges: dict = field(default_factory=dict)   # (frame, index) -> list of child indices

    def children(self, node: CandidateNode) -> list[CandidateNode]:
        nxt = self.layers.get(node.frame + 1, [])
        return [nxt[i] for i in self.edges.get((node.frame, node.index), [])]

    @property
    def frames(self) -> list[int]:
        return sorted(self.layers)

    def n_edges(self) -> int:
        return sum(len(v) for v in self.edges.values())


def _positions(nodes: Sequence[CandidateNode]) -> np.ndarray:
    if not nodes:
        return np.zeros((0, 2))
    return np.array([[n.candidate.cx, n.candidate.cy] for n in nodes])


def _link(parents: Sequence[CandidateNode], kids: Sequence[CandidateNode],
          theta_dist: float) -> np.ndarray:
    """Boolean adjacency parents x kids."""
    p, k = _positions(parents), _positions(kids)
    if not len(p) or not len(k):
        return np.zeros((len(p), len(k)), dtype=bool)
    d = np.linalg.norm(p[:, None, :] - k[None, :, :], axis=2)
    return d > theta_dist


def build_candidate_graph(stream: Iterable[tuple[int, Sequence[MotionCandidate]]],
                          theta_dist: float = 10.0, max_candidates: int | None = None) -> CandidateGraph:
    g = CandidateGraph()
    for frame, cands in stream:
        cands = list(cands)[:max_candidates] if max_candidates else list(cands)
        g.layers[int(frame)] = [CandidateNode(int(frame), i, c) for i, c in enumerate(cands)]
    for frame in g.frames:
        prev = g.layers.get(frame - 1)
        if not prev:
            continue
        adj = _link(prev, g.layers[frame], theta_dist)
        for i, row in enumerate(adj):
            kids = np.flatnonzero(row).tolist()
            if kids:
                g.edges[(frame - 1, i)] = kids
    return g


def unit_slope(p, q) -> np.ndarray | None:
    """Direction from p to q as a unit vector (the normalised complex slope)."""
    v = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    n = np.hypot(v[0], v[1])
    if n == 0:
        return None
    return v / n


def slope_similarity(s1, s2) -> float:
    """1 for equal directions, 0 for opposite ones; 0 if either is undefined."""
    if s1 is None or s2 is None:
        return 0.0
    d = np.hypot(*(np.asarray(s1, dtype=float) - np.asarray(s2, dtype=float)))
    return float(min(max(1.0 - 0.5 * d, 0.0), 1.0))


def distance_similarity(d1: float, d2: float) -> float:
    if d1 <= 0 or d2 <= 0:
        return 0.0
    return float(min(d1 / d2, d2 / d1))


def _xy(n) -> np.ndarray:
    if isinstance(n, CandidateNode):
        return n.xy
    if isinstance(n, MotionCandidate):
        return n.centroid
    return np.asarray(n, dtype=float)


def _area(n) -> float | None:
    if isinstance(n, CandidateNode):
        return float(n.candidate.area)
    if isinstance(n, MotionCandidate):
        return float(n.area)
    return None


def triple_confidence(na, nb, nc, weights=(0.5, 0.5)) -> float:
    """Weighted slope + distance similarity of the steps a->b and b->c.

    Accepts graph nodes, candidates or bare 2-vectors.  A third weight adds
    an area-consistency term (needs candidates).
    """
    a, b, c = _xy(na), _xy(nb), _xy(nc)
    conf = (weights[0] * slope_similarity(unit_slope(a, b), unit_slope(b, c))
            + weights[1] * distance_similarity(float(np.hypot(*(b - a))),
                                               float(np.hypot(*(c - b)))))
    if len(weights) > 2 and weights[2]:
        areas = [_area(n) for n in (na, nb, nc)]
        if None in areas:
            raise ValueError("area term needs candidates, not bare points")
        conf += weights[2] * min(distance_similarity(areas[0], areas[1]),
                                 distance_similarity(areas[1], areas[2]))
    return float(conf)


def _triple_conf_batch(a: np.ndarray, b: np.ndarray, c: np.ndarray, w) -> np.ndarray:
    """Vectorised confidence; a, b, c broadcast to (..., 2)."""
    v1, v2 = b - a, c - b
    d1, d2 = np.linalg.norm(v1, axis=-1), np.linalg.norm(v2, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        s1 = v1 / d1[..., None]
        s2 = v2 / d2[..., None]
        s_slope = np.clip(1.0 - 0.5 * np.linalg.norm(s1 - s2, axis=-1), 0.0, 1.0)
        s_dist = np.minimum(d1 / d2, d2 / d1)
    ok = (d1 > 0) & (d2 > 0)
    s_slope = np.where(ok, s_slope, 0.0)
    s_dist = np.where(ok, s_dist, 0.0)
    return w[0] * s_slope + w[1] * s_dist


@dataclass
class BallTrack2D:
    """Ordered ball positions on consecutive frames.

    ``inferred`` marks points bridged across a detection gap.  ``confidence``
    holds the triple confidence for every interior point (NaN when inferred).
    """

    frames: np.ndarray
    xy: np.ndarray
    inferred: np.ndarray
    confidence: np.ndarray
    nodes: tuple = ()

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=int)
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        self.inferred = np.asarray(self.inferred, dtype=bool)
        self.confidence = np.asarray(self.confidence, dtype=float)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def start(self) -> int:
        return int(self.frames[0])

    @property
    def end(self) -> int:
        return int(self.frames[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.xy, axis=0)

    @property
    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.steps, axis=1)

    @property
    def slopes(self) -> np.ndarray:
        d = self.distances
        return self.steps / np.where(d > 0, d, 1.0)[:, None]

    @property
    def mean_step(self) -> float:
        d = self.distances
        return float(d.mean()) if len(d) else 0.0

    @property
    def mean_slope(self) -> np.ndarray | None:
        s = self.slopes.sum(axis=0)
        n = np.hypot(*s)
        return s / n if n > 0 else None

    @property
    def mean_confidence(self) -> float:
        c = self.confidence[~np.isnan(self.confidence)]
        return float(c.mean()) if len(c) else 0.0

    def point_at(self, frame: int) -> np.ndarray | None:
        i = frame - self.start
        if 0 <= i < len(self):
            return self.xy[i]
        return None

    def to_json(self, release_frame: int | None = None) -> dict:
        return {
            "points": [{"frame": int(f), "x": float(x), "y": float(y), "inferred": bool(i)}
                       for f, (x, y), i in zip(self.frames, self.xy, self.inferred)],
            "mean_step_px": self.mean_step,
            "release_frame": release_frame,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BallTrack2D":
        pts = doc["points"]
        return cls([p["frame"] for p in pts], [[p["x"], p["y"]] for p in pts],
                   [p.get("inferred", False) for p in pts], [np.nan] * len(pts))

    @classmethod
    def from_nodes(cls, nodes: Sequence[CandidateNode], conf: Sequence[float]) -> "BallTrack2D":
        c = np.r_[np.nan, np.asarray(conf, dtype=float), np.nan]
        return cls([n.frame for n in nodes], _positions(nodes), np.zeros(len(nodes), bool), c,
                   tuple(nodes))


class BallTracker:
    """Online GBCV: feed one frame of candidates at a time.

    Active paths are extended with the child that gives the highest triple
    confidence, provided it clears the threshold; new paths are seeded from
    every qualifying triple not already covered.  Paths that cannot grow are
    closed.  Call :meth:`finish` at the end of the stream.
    """

    def __init__(self, config: GbcvConfig = GbcvConfig()):
        self.config = config
        self.graph = CandidateGraph()
        self._w = np.asarray(config.weights, dtype=float)
        self._active: list[tuple[list[CandidateNode], list[float]]] = []
        self._closed: list[tuple[list[CandidateNode], list[float]]] = []
        self._adj_prev: np.ndarray | None = None  # edges (t-2) -> (t-1)
        self._last_frame: int | None = None

    def push(self, frame: int, candidates: Sequence[MotionCandidate]) -> None:
        cfg = self.config
        frame = int(frame)
        cands = list(candidates)[:cfg.max_candidates]
        nodes = [CandidateNode(frame, i, c) for i, c in enumerate(cands)]
        g = self.graph
        g.layers[frame] = nodes
        prev = g.layers.get(frame - 1) if self._last_frame == frame - 1 else None
        self._last_frame = frame
        if not prev:
            self._close_all()
            self._adj_prev = None
            return
        adj = _link(prev, nodes, cfg.theta_dist)
        for i, row in enumerate(adj):
            kids = np.flatnonzero(row).tolist()
            if kids:
                g.edges[(frame - 1, i)] = kids

        grand = g.layers.get(frame - 2)
        P1, P0 = _positions(prev), _positions(nodes)
        extended, ends = [], set()
        for path, conf in self._active:
            a, b = path[-2], path[-1]
            kids = np.flatnonzero(adj[b.index])
            if not len(kids):
                self._closed.append((path, conf))
                continue
            cs = self._confidences(a, b, kids, P0)
            best = int(np.argmax(cs))
            if cs[best] >= cfg.theta_confidence:
                c = nodes[kids[best]]
                extended.append((path + [c], conf + [float(cs[best])]))
                ends.add((b.index, c.index))
            else:
                self._closed.append((path, conf))
        if grand and self._adj_prev is not None:
            P2 = _positions(grand)
            for bi in range(len(prev)):
                parents = np.flatnonzero(self._adj_prev[:, bi])
                kids = np.flatnonzero(adj[bi])
                if not len(parents) or not len(kids):
                    continue
                conf = _triple_conf_batch(P2[parents][:, None, :], P1[bi][None, None, :],
                                          P0[kids][None, :, :], self._w)
                if len(self._w) > 2 and self._w[2]:
                    conf = conf + self._w[2] * self._area_terms(grand, prev[bi], nodes, parents, kids)
                for pa, ki in zip(*np.nonzero(conf >= cfg.theta_confidence)):
                    if (bi, int(kids[ki])) in ends:
                        continue
                    extended.append(([grand[parents[pa]], prev[bi], nodes[kids[ki]]],
                                     [float(conf[pa, ki])]))
        self._active = extended
        self._adj_prev = adj

    def _confidences(self, a, b, kids, P0):
        conf = _triple_conf_batch(a.xy[None, :], b.xy[None, :], P0[kids], self._w)
        if len(self._w) > 2 and self._w[2]:
            conf = conf + self._w[2] * np.array(
                [min(distance_similarity(a.candidate.area, b.candidate.area),
                     distance_similarity(b.candidate.area, self.graph.layers[b.frame + 1][k].candidate.area))
                 for k in kids])
        return conf

    @staticmethod
    def _area_terms(grand, b, nodes, parents, kids):
        ab = np.array([distance_similarity(grand[p].candidate.area, b.candidate.area) for p in parents])
        bc = np.array([distance_similarity(b.candidate.area, nodes[k].candidate.area) for k in kids])
        return np.minimum(ab[:, None], bc[None, :])

    def _close_all(self) -> None:
        self._closed.extend(self._active)
        self._active = []

    def raw_tracks(self) -> list[BallTrack2D]:
        """All closed and still-active paths, unranked and possibly overlapping."""
        return [BallTrack2D.from_nodes(p, c) for p, c in self._closed + self._active]

    def finish(self) -> list[BallTrack2D]:
        self._close_all()
        return select_tracks(self.raw_tracks(), self.config)


def _rank_key(t: BallTrack2D):
    first = t.nodes[0].index if t.nodes else 0
    return (-len(t), -t.mean_confidence, t.start, first)


def select_tracks(raw: Sequence[BallTrack2D], config: GbcvConfig = GbcvConfig()) -> list[BallTrack2D]:
    """Non-overlapping best paths, gap-merged, filtered by length and ranked."""
    chosen: list[BallTrack2D] = []
    used: set = set()
    for t in sorted(raw, key=_rank_key):
        keys = {(n.frame, n.index) for n in t.nodes}
        if keys & used:
            continue
        used |= keys
        chosen.append(t)
    merged = merge_all(chosen, config)
    out = [t for t in merged if int((~t.inferred).sum()) >= config.min_track_len]
    return sorted(out, key=_rank_key)


def detect_ball_tracks(graph: CandidateGraph, config: GbcvConfig = GbcvConfig()) -> list[BallTrack2D]:
    """Replay a built graph through the online tracker; best track first."""
    tracker = BallTracker(config)
    for frame in graph.frames:
        tracker.push(frame, [n.candidate for n in graph.layers[frame]])
    return tracker.finish()


def track_ball(stream: Iterable[tuple[int, Sequence[MotionCandidate]]],
               config: GbcvConfig = GbcvConfig()) -> list[BallTrack2D]:
    tracker = BallTracker(config)
    for frame, cands in stream:
        tracker.push(frame, cands)
    return tracker.finish()


def merge_tracks(earlier: BallTrack2D, later: BallTrack2D,
                 config: GbcvConfig = GbcvConfig()) -> BallTrack2D | None:
    """Join two tracks across a detection gap, or None if they don't continue each other.

    The bridge from the last point of ``earlier`` to the first of ``later`` is
    scored against the average step of each track (and the two averages
    against each other); all three confidences must clear the threshold.
    Gap frames are filled by linear interpolation and flagged as inferred.
    """
    if later.start <= earlier.end:
        raise InvalidMerge(f"tracks overlap: {earlier.start}-{earlier.end} vs {later.start}-{later.end}")
    span = later.start - earlier.end
    if span - 1 > config.gap_merge_max:
        return None
    se, sl = earlier.mean_slope, later.mean_slope
    de, dl = earlier.mean_step, later.mean_step
    gap_vec = later.xy[0] - earlier.xy[-1]
    db = float(np.hypot(*gap_vec)) / span
    sb = unit_slope(earlier.xy[-1], later.xy[0])
    w = config.weights

    def conf(s1, d1, s2, d2):
        return w[0] * slope_similarity(s1, s2) + w[1] * distance_similarity(d1, d2)

    scores = [conf(se, de, sb, db), conf(sb, db, sl, dl), conf(se, de, sl, dl)]
    if min(scores) < config.theta_confidence:
        return None
    fill = np.arange(earlier.end + 1, later.start)
    alpha = (fill - earlier.end)[:, None] / span
    bridge = earlier.xy[-1] + alpha * gap_vec
    return BallTrack2D(
        np.r_[earlier.frames, fill, later.frames],
        np.vstack([earlier.xy, bridge, later.xy]),
        np.r_[earlier.inferred, np.ones(len(fill), bool), later.inferred],
        np.r_[earlier.confidence, np.full(len(fill), np.nan), later.confidence],
        tuple(earlier.nodes) + tuple(later.nodes),
    )


def merge_all(tracks: Sequence[BallTrack2D], config: GbcvConfig = GbcvConfig()) -> list[BallTrack2D]:
    """Greedily chain tracks in start order; each joins the best mergeable chain."""
    chains: list[BallTrack2D] = []
    for t in sorted(tracks, key=lambda t: (t.start, _rank_key(t))):
        best, best_i = None, -1
        for i, ch in enumerate(chains):
            if ch.end >= t.start:
                continue
            m = merge_tracks(ch, t, config)
            if m is not None and (best is None or len(ch) > len(chains[best_i])):
                best, best_i = m, i
        if best is None:
            chains.append(t)
        else:
            chains[best_i] = best
    return chains


def estimate_release_frame(track: BallTrack2D, release_point) -> int:
    """Back-extrapolate the first detection to the release point at the mean step."""
    if len(track) < 2:
        raise DegenerateTrack("track needs at least two points")
    step = track.mean_step
    if step <= 0:
        raise DegenerateTrack("track has zero mean step")
    dist = float(np.hypot(*(track.xy[0] - np.asarray(release_point, dtype=float))))
    return track.start - int(round(dist / step))
