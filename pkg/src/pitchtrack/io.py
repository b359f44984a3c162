"""File formats: grayscale frame streams, pose/candidate/detector JSON lines, result JSON."""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .batglove import DetectorBox
from .errors import ShapeError
from .fmoc import MotionCandidate, candidates_to_json
from .trajkit import PersonDetection

RAW_MAGIC = 0x4D525450  # b"PTRM" read as little-endian uint32
_RAW_HEADER = struct.Struct("<4I")


# -- frames -----------------------------------------------------------------

def write_pgm(path, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ShapeError("PGM frames must be 2-D uint8")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def _pgm_tokens(data: bytes, n: int) -> tuple[list[bytes], int]:
    """First n whitespace-separated header tokens (skipping # comments) and the payload offset."""
    tokens, i = [], 0
    while len(tokens) < n:
        while data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while data[i:i + 1] not in (b"\n", b""):
                i += 1
            continue
        j = i
        while not data[j:j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    return tokens, i + 1  # exactly one whitespace byte before the raster


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (magic, w, h, maxval), off = _pgm_tokens(data, 4)
    if magic != b"P5" or int(maxval) > 255:
        raise ShapeError(f"{path}: only 8-bit binary PGM is supported")
    w, h = int(w), int(h)
    buf = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=off)
    return buf.reshape(h, w).copy()


def write_pgm_dir(directory, frames: Iterable[np.ndarray], start: int = 0) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(frames):
        write_pgm(d / f"frame_{start + i:06d}.pgm", f)


def write_raw_stream(path, frames: Sequence[np.ndarray]) -> None:
    frames = [np.asarray(f) for f in frames]
    if not frames:
        raise ShapeError("no frames to write")
    h, w = frames[0].shape
    with open(path, "wb") as fh:
        fh.write(_RAW_HEADER.pack(RAW_MAGIC, w, h, len(frames)))
        for f in frames:
            if f.shape != (h, w) or f.dtype != np.uint8:
                raise ShapeError("raw stream frames must share one uint8 shape")
            fh.write(np.ascontiguousarray(f).tobytes())


def iter_frames(path) -> Iterator[np.ndarray]:
    """Frames from a directory of numbered PGMs (sorted by name) or a raw stream file."""
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.pgm"))
        if not files:
            raise FileNotFoundError(f"no .pgm files in {p}")
        for f in files:
            yield read_pgm(f)
        return
    with open(p, "rb") as fh:
        head = fh.read(_RAW_HEADER.size)
        if len(head) != _RAW_HEADER.size:
            raise ShapeError(f"{p}: truncated header")
        magic, w, h, n = _RAW_HEADER.unpack(head)
        if magic != RAW_MAGIC:
            raise ShapeError(f"{p}: bad magic {magic:#x}")
        for _ in range(n):
            buf = fh.read(w * h)
            if len(buf) != w * h:
                raise ShapeError(f"{p}: truncated frame data")
            yield np.frombuffer(buf, dtype=np.uint8).reshape(h, w)


def read_frames(path) -> list[np.ndarray]:
    return list(iter_frames(path))


# -- JSON -------------------------------------------------------------------

def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _clean(o):
    # NaN/inf are not valid JSON; write them as null
    if isinstance(o, float) and not np.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def dumps(doc) -> str:
    return json.dumps(_clean(json.loads(json.dumps(doc, default=_default))), sort_keys=True, indent=1)


def write_json(path, doc) -> None:
    Path(path).write_text(dumps(doc) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(_clean(json.loads(json.dumps(r, default=_default))), sort_keys=True) + "\n")


def read_jsonl(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out


# -- pose -------------------------------------------------------------------

def pose_records(frames: Sequence[Sequence[PersonDetection]], start: int = 0) -> list[dict]:
    return [{"frame": start + t, "people": [{"joints": p.to_list()} for p in people]}
            for t, people in enumerate(frames)]


def parse_pose(records: Sequence[dict]) -> tuple[list[list[PersonDetection]], int]:
    """Per-frame people lists (dense from the first frame) and that first frame index."""
    if not records:
        return [], 0
    by_frame = {int(r["frame"]): [PersonDetection.from_list(p["joints"]) for p in r.get("people", [])]
                for r in records}
    first, last = min(by_frame), max(by_frame)
    return [by_frame.get(f, []) for f in range(first, last + 1)], first


def read_pose(path) -> tuple[list[list[PersonDetection]], int]:
    return parse_pose(read_jsonl(path))


def write_pose(path, frames: Sequence[Sequence[PersonDetection]], start: int = 0) -> None:
    write_jsonl(path, pose_records(frames, start))


# -- candidates / detections -----------------------------------------------

def write_candidates(path, stream: Iterable[tuple[int, Sequence[MotionCandidate]]]) -> None:
    write_jsonl(path, (candidates_to_json(f, c) for f, c in stream))


def read_candidates(path) -> dict[int, list[MotionCandidate]]:
    return {int(r["frame"]): [MotionCandidate.from_json(c) for c in r["candidates"]]
            for r in read_jsonl(path)}


def write_detections(path, boxes: Iterable[DetectorBox]) -> None:
    write_jsonl(path, (b.to_json() for b in boxes))


def read_detections(path) -> list[DetectorBox]:
    return [DetectorBox.from_json(r) for r in read_jsonl(path)]
