"""Independent reference implementations used to check the library.

Kept deliberately naive: plain loops, no shared code with the package.
"""
import math
from collections import deque

import numpy as np

N8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
N4 = [(-1, 0), (0, -1), (0, 1), (1, 0)]


def flood_fill_labels(mask, connectivity=8):
    """Component labels by breadth-first flood fill, numbered in raster order."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int64)
    nbrs = N8 if connectivity == 8 else N4
    n = 0
    for r in range(h):
        for c in range(w):
            if mask[r, c] and labels[r, c] == 0:
                n += 1
                labels[r, c] = n
                q = deque([(r, c)])
                while q:
                    y, x = q.popleft()
                    for dy, dx in nbrs:
                        yy, xx = y + dy, x + dx
                        if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and labels[yy, xx] == 0:
                            labels[yy, xx] = n
                            q.append((yy, xx))
    return labels, n


def same_partition(a, b):
    """True when two label images describe the same set of components."""
    fg = a > 0
    if not np.array_equal(fg, b > 0):
        return False
    pairs = set(zip(a[fg].tolist(), b[fg].tolist()))
    return len(pairs) == len(set(a[fg].tolist())) == len(set(b[fg].tolist()))


def naive_closing(mask, size=3):
    """Dilate then erode with a size x size square; outside the image counts as background."""
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    r = size // 2

    # dilation may grow beyond the frame; pad so erosion sees that growth
    p = r
    big = np.zeros((h + 2 * p, w + 2 * p), dtype=bool)
    big[p:p + h, p:p + w] = m
    H, W = big.shape
    dil = np.zeros_like(big)
    for i in range(H):
        for j in range(W):
            dil[i, j] = any(big[ii, jj] for ii in range(i - r, i + r + 1) for jj in range(j - r, j + r + 1)
                            if 0 <= ii < H and 0 <= jj < W)
    ero = np.zeros_like(big)
    for i in range(H):
        for j in range(W):
            ero[i, j] = all(0 <= ii < H and 0 <= jj < W and dil[ii, jj]
                            for ii in range(i - r, i + r + 1) for jj in range(j - r, j + r + 1))
    return ero[p:p + h, p:p + w]


def point_segment_distance(p, a, b):
    px, py = p
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / L2))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def point_polyline_distance(p, coords):
    return min(point_segment_distance(p, coords[i], coords[i + 1]) for i in range(len(coords) - 1))


def pixels_within(coords_world, transform, shape, radius_m):
    """Brute force: pixel centers within ``radius_m`` of a world-space polyline."""
    h, w = shape
    out = np.zeros((h, w), dtype=bool)
    for r in range(h):
        for c in range(w):
            x = transform.origin_x + (c + 0.5) * transform.pixel_size
            y = transform.origin_y - (r + 0.5) * transform.pixel_size
            out[r, c] = point_polyline_distance((x, y), coords_world) <= radius_m
    return out


def dense_points(coords, step=0.01):
    """Points every ``step`` along a polyline (midpoints of equal sub-steps) with their spacing."""
    pts, weights = [], []
    for i in range(len(coords) - 1):
        a, b = np.asarray(coords[i], float), np.asarray(coords[i + 1], float)
        L = float(np.hypot(*(b - a)))
        n = max(1, int(math.ceil(L / step)))
        t = (np.arange(n) + 0.5) / n
        pts.append(a + t[:, None] * (b - a))
        weights.append(np.full(n, L / n))
    return np.concatenate(pts), np.concatenate(weights)


def naive_confusion(true, pred, n=6):
    cm = [[0] * n for _ in range(n)]
    for t, p in zip(true, pred):
        cm[t][p] += 1
    return cm


def road_like_mask(rng, shape=(96, 96), n_roads=4, max_width=6):
    """Thick random strokes (disk stamps along random lines), a stand-in for segmentation output."""
    h, w = shape
    m = np.zeros(shape, dtype=bool)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(n_roads):
        a = rng.uniform([0, 0], [h, w])
        b = rng.uniform([0, 0], [h, w])
        rad = rng.uniform(1.0, max_width / 2)
        n = int(np.hypot(*(b - a))) + 1
        for t in np.linspace(0, 1, n):
            cy, cx = a + t * (b - a)
            m |= (yy - cy) ** 2 + (xx - cx) ** 2 <= rad * rad
    return m


def distances_to_lines(points, lines):
    """Minimum distance from each point to any segment of any polyline (vectorized brute force)."""
    best = np.full(len(points), np.inf)
    for coords in lines:
        coords = np.asarray(coords, float)
        for a, b in zip(coords[:-1], coords[1:]):
            d = b - a
            L2 = float(d @ d)
            t = np.clip(((points - a) @ d) / L2, 0, 1) if L2 > 0 else np.zeros(len(points))
            proj = a + t[:, None] * d
            best = np.minimum(best, np.hypot(*(points - proj).T))
    return best


def sampled_matched_length(lines, others, buffer, step=0.01):
    """Length of ``lines`` within ``buffer`` of ``others``, by dense sampling."""
    total = matched = 0.0
    for coords in lines:
        pts, w = dense_points(coords, step)
        total += w.sum()
        if others:
            matched += w[distances_to_lines(pts, others) <= buffer].sum()
    return matched, total


def naive_pixel_metrics(probs, labels):
    """Accuracy, per-class precision/recall/F1 and Brier from explicit loops (6 classes, band 5 = no road)."""
    n = labels.size
    y = [5 if v == 0 else int(v) - 1 for v in labels.ravel()]
    flat = probs.reshape(6, -1)
    yhat = [int(np.argmax(flat[:, i])) for i in range(n)]
    cm = naive_confusion(y, yhat)
    brier = 0.0
    for i in range(n):
        for k in range(6):
            brier += (float(flat[k, i]) - (1.0 if y[i] == k else 0.0)) ** 2
    return cm, brier / n
