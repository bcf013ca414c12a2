"""Trace preprocessing: proximity graph, MST ordering, normalization,
resampling, rasterization, and affine augmentation.

All functions are pure; augmentation takes an explicit numpy Generator.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .ink import Trace, bbox_of

# Below this many points per trace pair, brute force beats the kd-tree.
_KDTREE_MIN_POINTS = 64


def min_trace_distance(a: Trace, b: Trace) -> float:
    """Minimal Euclidean distance over point pairs of two traces."""
    pa, pb = a.points, b.points
    if len(pa) * len(pb) <= _KDTREE_MIN_POINTS * _KDTREE_MIN_POINTS:
        diff = pa[:, None, :] - pb[None, :, :]
        return float(np.sqrt((diff * diff).sum(axis=2)).min())
    tree = cKDTree(pb)
    dist, _ = tree.query(pa, k=1)
    return float(dist.min())


@dataclass(frozen=True)
class TraceGraph:
    """Complete undirected graph over trace ids weighted by inter-trace
    distance."""

    vertices: tuple[int, ...]
    weights: dict  # (i, j) with i < j -> float

    def weight(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        key = (i, j) if i < j else (j, i)
        return self.weights[key]

    def n_edges(self) -> int:
        return len(self.weights)


def build_trace_graph(traces) -> TraceGraph:
    traces = list(traces)
    if not traces:
        raise ValueError("no traces")
    ids = [t.id for t in traces]
    weights = {}
    for i in range(len(traces)):
        for j in range(i + 1, len(traces)):
            a, b = traces[i], traces[j]
            key = (a.id, b.id) if a.id < b.id else (b.id, a.id)
            weights[key] = min_trace_distance(a, b)
    return TraceGraph(vertices=tuple(ids), weights=weights)


def mst_sort(graph: TraceGraph, anchor: int, k: int = 20) -> list[int]:
    """First min(k, |V|) vertices in Prim attachment order, grown from
    `anchor`. Ties break toward the smaller vertex id."""
    if anchor not in graph.vertices:
        raise ValueError(f"anchor {anchor} not in graph")
    if k < 1:
        raise ValueError("k must be >= 1")
    order = [anchor]
    if len(graph.vertices) == 1 or k == 1:
        return order
    visited = {anchor}
    heap = []
    for v in graph.vertices:
        if v != anchor:
            heapq.heappush(heap, (graph.weight(anchor, v), v))
    best = {v: graph.weight(anchor, v) for v in graph.vertices if v != anchor}
    while heap and len(order) < min(k, len(graph.vertices)):
        w, v = heapq.heappop(heap)
        if v in visited or w > best[v]:
            continue
        visited.add(v)
        order.append(v)
        for u in graph.vertices:
            if u in visited:
                continue
            wu = graph.weight(v, u)
            if wu < best[u]:
                best[u] = wu
                heapq.heappush(heap, (wu, u))
    return order


def rightmost_trace(traces) -> int:
    """Id of the trace with maximum x; ties go to the later-written trace."""
    traces = list(traces)
    if not traces:
        raise ValueError("no traces")
    best = traces[0]
    for t in traces[1:]:
        if t.max_x >= best.max_x:
            best = t
    return best.id


def arc_lengths(points: np.ndarray) -> np.ndarray:
    """Cumulative arc length per point, starting at 0."""
    seg = np.sqrt(((points[1:] - points[:-1]) ** 2).sum(axis=1))
    return np.concatenate([[0.0], np.cumsum(seg)])


def resample_equidistant(points: np.ndarray, m: int) -> np.ndarray:
    """Resample a polyline to m points equidistant along its arc length,
    by piecewise linear interpolation between original samples."""
    points = np.asarray(points, dtype=float)
    if m < 1:
        raise ValueError("m must be >= 1")
    s = arc_lengths(points)
    total = s[-1]
    if total == 0.0 or len(points) == 1:
        return np.repeat(points[:1], m, axis=0)
    if m == 1:
        return points[:1].copy()
    targets = np.linspace(0.0, total, m)
    out = np.empty((m, 2))
    # index k of the segment with s[k] <= target < s[k+1]
    idx = np.searchsorted(s, targets, side="right") - 1
    idx = np.clip(idx, 0, len(points) - 2)
    span = s[idx + 1] - s[idx]
    frac = np.where(span > 0, (targets - s[idx]) / np.where(span > 0, span, 1.0), 0.0)
    out = points[idx] + frac[:, None] * (points[idx + 1] - points[idx])
    return out


def normalize_window(traces, m: int = 32) -> tuple[list[np.ndarray], bool]:
    """Align, scale, and resample a window of traces.

    The rightmost point of the window moves to the origin, all coordinates
    are mapped into [0,1]^2 preserving aspect ratio (long side spans the
    unit interval, short side centered), and each trace is resampled to m
    equidistant points. Returns (sequences, degenerate_flag).
    """
    traces = list(traces)
    if not traces:
        raise ValueError("empty window")
    all_pts = np.vstack([t.points for t in traces])
    right = all_pts[np.argmax(all_pts[:, 0])]
    aligned = [t.points - right for t in traces]

    stack = np.vstack(aligned)
    mins = stack.min(axis=0)
    maxs = stack.max(axis=0)
    span = maxs - mins
    side = float(span.max())
    if side <= 0.0:
        return [np.zeros((m, 2)) for _ in traces], True
    scale = 1.0 / side
    offset = (1.0 - span * scale) / 2.0  # centers the short side
    out = []
    for pts in aligned:
        norm = (pts - mins) * scale + offset
        out.append(resample_equidistant(norm, m))
    return out, False


def rasterize(primary, context=(), size: int = 100, line_width: float = 2.0,
              margin: int = 4, context_intensity: float = 0.5) -> np.ndarray:
    """Render traces to a grayscale image in [0,1].

    Primary strokes draw at intensity 1.0, context strokes at 0.5.
    The joint bounding box is fit to the canvas with a margin.
    """
    primary = list(primary)
    context = list(context)
    if not primary:
        raise ValueError("no primary traces")
    xmin, ymin, xmax, ymax = bbox_of(primary + context)
    span = max(xmax - xmin, ymax - ymin)
    usable = size - 2 * margin
    scale = usable / span if span > 0 else 1.0

    def to_canvas(pts):
        out = (pts - np.array([xmin, ymin])) * scale
        # center the short side, flip y so "up" is up in the image
        w = (xmax - xmin) * scale
        h = (ymax - ymin) * scale
        out[:, 0] += margin + (usable - w) / 2.0
        out[:, 1] = margin + (usable - h) / 2.0 + (h - out[:, 1])
        return out

    img = np.zeros((size, size))
    radius = line_width / 2.0

    def draw(traces, intensity):
        for t in traces:
            pts = to_canvas(np.asarray(t.points, dtype=float))
            if len(pts) == 1:
                segs = [(pts[0], pts[0])]
            else:
                segs = list(zip(pts[:-1], pts[1:]))
            for p0, p1 in segs:
                _draw_segment(img, p0, p1, radius, intensity)

    draw(context, context_intensity)
    draw(primary, 1.0)
    return img


def _draw_segment(img, p0, p1, radius, intensity):
    size = img.shape[0]
    lo = np.floor(np.minimum(p0, p1) - radius - 1).astype(int)
    hi = np.ceil(np.maximum(p0, p1) + radius + 1).astype(int)
    x0, y0 = np.clip(lo, 0, size - 1)
    x1, y1 = np.clip(hi, 0, size - 1)
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    # pixel (r, c) samples at coordinate (c, r)
    px = np.stack([xs, ys], axis=-1).astype(float)

    d = p1 - p0
    seg_len2 = float(d @ d)
    if seg_len2 == 0.0:
        dist = np.sqrt(((px - p0) ** 2).sum(axis=-1))
    else:
        t = ((px - p0) @ d) / seg_len2
        t = np.clip(t, 0.0, 1.0)
        proj = p0 + t[..., None] * d
        dist = np.sqrt(((px - proj) ** 2).sum(axis=-1))
    # full intensity inside the core, linear falloff over one pixel
    alpha = np.clip(radius + 0.5 - dist, 0.0, 1.0)
    patch = img[y0:y1 + 1, x0:x1 + 1]
    np.maximum(patch, alpha * intensity, out=patch)


def write_pgm(image: np.ndarray, path) -> None:
    """Dump a [0,1] grayscale image as a binary PGM for debugging."""
    img = np.clip(np.asarray(image), 0.0, 1.0)
    data = (img * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices counter-clockwise."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def principal_angle(points: np.ndarray) -> float:
    """Angle of the dominant principal axis, in (-pi/2, pi/2]."""
    pts = np.asarray(points, dtype=float)
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / max(len(pts), 1)
    evals, evecs = np.linalg.eigh(cov)
    if evals[-1] <= 0:
        return 0.0
    # near-isotropic shapes have no meaningful axis
    if evals[-1] - evals[0] < 1e-9 * max(evals[-1], 1e-30):
        return 0.0
    v = evecs[:, -1]
    ang = float(np.arctan2(v[1], v[0]))
    if ang <= -np.pi / 2:
        ang += np.pi
    elif ang > np.pi / 2:
        ang -= np.pi
    return ang


def spatial_normalize_symbol(traces) -> list[np.ndarray]:
    """Centroid to origin, hull-based rotation correction, longest
    bounding-box side scaled to 1. Single points are centered only."""
    traces = list(traces)
    if not traces:
        raise ValueError("no traces")
    seqs = [np.asarray(t.points, dtype=float) for t in traces]
    stack = np.vstack(seqs)
    centroid = stack.mean(axis=0)
    seqs = [s - centroid for s in seqs]
    stack = stack - centroid

    span = stack.max(axis=0) - stack.min(axis=0)
    if float(span.max()) <= 0.0:
        return seqs  # degenerate: center only

    hull = convex_hull(stack)
    ang = principal_angle(hull)
    if ang != 0.0:
        c, s = np.cos(-ang), np.sin(-ang)
        rot = np.array([[c, -s], [s, c]])
        seqs = [p @ rot.T for p in seqs]

    stack = np.vstack(seqs)
    span = stack.max(axis=0) - stack.min(axis=0)
    side = float(span.max())
    if side > 0:
        seqs = [p / side for p in seqs]
    # keep the centroid at the origin after rotation/scaling
    stack = np.vstack(seqs)
    center = stack.mean(axis=0)
    return [p - center for p in seqs]


@dataclass(frozen=True)
class AffineParams:
    """Augmentation noise scales; defaults follow the training recipe."""

    scale_nonuniform_sigma: float = 0.2
    scale_uniform_sigma: float = 0.4
    scale_clamp: tuple[float, float] = (0.2, 5.0)
    shear_sigma_xy: float = 0.1
    rotation_sigma_deg: float = 8.0
    translation_sigma_xy: float = 0.15

    def __post_init__(self):
        lo, hi = self.scale_clamp
        if not (0 < lo < hi):
            raise ValueError(f"bad scale clamp {self.scale_clamp}")


def sample_scale_factors(params: AffineParams, rng) -> tuple[float, float]:
    lo, hi = params.scale_clamp
    u = 1.0 + rng.normal(0.0, params.scale_uniform_sigma)
    sx = np.clip((1.0 + rng.normal(0.0, params.scale_nonuniform_sigma)) * u, lo, hi)
    sy = np.clip((1.0 + rng.normal(0.0, params.scale_nonuniform_sigma)) * u, lo, hi)
    return float(sx), float(sy)


def augment(traces, params: AffineParams, rng) -> list[Trace]:
    """Random affine transform (scale, shear, rotation, translation) applied
    about the joint centroid. Trace and point counts are preserved."""
    traces = list(traces)
    if not traces:
        return []
    sx, sy = sample_scale_factors(params, rng)
    shx = rng.normal(0.0, params.shear_sigma_xy)
    shy = rng.normal(0.0, params.shear_sigma_xy)
    theta = np.deg2rad(rng.normal(0.0, params.rotation_sigma_deg))
    stack = np.vstack([t.points for t in traces])
    centroid = stack.mean(axis=0)
    span = stack.max(axis=0) - stack.min(axis=0)
    unit = max(float(span.max()), 1e-12)
    tx = rng.normal(0.0, params.translation_sigma_xy) * unit
    ty = rng.normal(0.0, params.translation_sigma_xy) * unit

    scale = np.array([[sx, 0.0], [0.0, sy]])
    shear = np.array([[1.0, shx], [shy, 1.0]])
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    mat = rot @ shear @ scale

    if np.array_equal(mat, np.eye(2)) and tx == 0.0 and ty == 0.0:
        return list(traces)

    out = []
    for t in traces:
        pts = (t.points - centroid) @ mat.T + centroid + np.array([tx, ty])
        out.append(Trace(id=t.id, points=pts))
    return out
