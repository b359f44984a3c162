"""Slow, obviously-correct reference computations used to check the fast code."""

import itertools

import numpy as np


def raster_iou(a, b, scale=1):
    """IoU by counting unit cells of two integer boxes (x0, y0, x1, y1), half-open."""
    xs = range(min(a[0], b[0]) * scale, max(a[2], b[2]) * scale)
    ys = range(min(a[1], b[1]) * scale, max(a[3], b[3]) * scale)
    inter = union = 0
    for x in xs:
        for y in ys:
            ina = a[0] * scale <= x < a[2] * scale and a[1] * scale <= y < a[3] * scale
            inb = b[0] * scale <= x < b[2] * scale and b[1] * scale <= y < b[3] * scale
            inter += ina and inb
            union += ina or inb
    return inter / union if union else 0.0


def flood_fill_components(mask):
    """8-connected components by explicit stack flood fill: list of pixel lists."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or seen[y, x]:
                continue
            stack, pix = [(y, x)], []
            seen[y, x] = True
            while stack:
                cy, cx = stack.pop()
                pix.append((cy, cx))
                for dy, dx in itertools.product((-1, 0, 1), repeat=2):
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
            comps.append(pix)
    return comps


def pixelwise_motion_mask(fp, fc, fn, tau):
    """D for one frame triple, one pixel at a time."""
    h, w = fc.shape
    out = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            a, b, c = int(fp[y, x]), int(fc[y, x]), int(fn[y, x])
            out[y, x] = abs(a - b) > tau and abs(b - c) > tau and not abs(a - c) > tau
    return out


def conv1d_same_loop(x, W, b, k):
    """x: (T, C); W: (k*C, F) laid out tap-major; 'same' zero padding, explicit loops."""
    T, C = x.shape
    F = W.shape[1]
    left = (k - 1) // 2
    out = np.zeros((T, F))
    for t in range(T):
        for f in range(F):
            acc = b[f]
            for i in range(k):
                src = t + i - left
                if 0 <= src < T:
                    for c in range(C):
                        acc += x[src, c] * W[i * C + c, f]
            out[t, f] = acc
    return out


def mccnn_forward_loop(params, x, kernels):
    """Probabilities for a single (T, C) sample, all loops written out."""
    k1, k2 = kernels
    h1 = np.maximum(conv1d_same_loop(x, params["W1"], params["b1"], k1), 0)
    h2 = np.maximum(conv1d_same_loop(h1, params["W2"], params["b2"], k2), 0)
    flat = h2.reshape(-1)
    h3 = np.zeros(params["W3"].shape[1])
    for j in range(len(h3)):
        h3[j] = max(sum(flat[i] * params["W3"][i, j] for i in range(len(flat))) + params["b3"][j], 0)
    z = np.array([sum(h3[i] * params["W4"][i, j] for i in range(len(h3))) + params["b4"][j]
                  for j in range(params["W4"].shape[1])])
    e = np.exp(z - z.max())
    return e / e.sum()


def ray_plane_solve(C, d, p0, n):
    """Intersection by solving the 4x4 linear system [I, -d; n^T, 0][X; s] = [C; n.p0]."""
    A = np.zeros((4, 4))
    A[:3, :3] = np.eye(3)
    A[:3, 3] = -d
    A[3, :3] = n
    rhs = np.r_[C, n @ p0]
    return np.linalg.solve(A, rhs)[:3]


def first_run_bruteforce(hits, min_length, max_apart):
    """Earliest start s among hit frames such that >= min_length hits lie in [s, s + max_apart)."""
    hs = sorted(set(hits))
    best = None
    for s in hs:
        window = [h for h in hs if s <= h < s + max_apart]
        if len(window) >= min_length and (best is None or s < best):
            best = s
    return best
