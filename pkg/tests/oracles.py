"""Independent oracles shared by unit and acceptance tests. Each one takes
a deliberately different route from the implementation it checks."""
import math

import numpy as np

from inkmath.ink import Trace
from inkmath.relator import PairScores
from inkmath.slg import RELATION_CLASSES


def brute_min_distance(a: Trace, b: Trace) -> float:
    """Scalar double loop over all point pairs."""
    best = math.inf
    for p in a.points:
        for q in b.points:
            d = math.dist(p, q)
            if d < best:
                best = d
    return best


def cdist_min_distance(a: Trace, b: Trace) -> float:
    """Exhaustive pairwise scan through scipy's cdist."""
    from scipy.spatial.distance import cdist
    return float(cdist(a.points, b.points).min())


def prim_order_oracle(vertices, weight, anchor):
    """Naive O(V^2) Prim, ties broken toward the smaller vertex id."""
    order = [anchor]
    dist = {v: weight(anchor, v) for v in vertices if v != anchor}
    while dist:
        v = min(dist, key=lambda u: (dist[u], u))
        order.append(v)
        del dist[v]
        for u in dist:
            w = weight(v, u)
            if w < dist[u]:
                dist[u] = w
    return order


def walk_resample_oracle(pts, m):
    """Scalar walk along the polyline: the point at arc distance d is found
    by consuming segments one at a time."""
    seg_lens = [math.dist(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]
    total = sum(seg_lens)
    out = []
    for i in range(m):
        d = total * i / (m - 1)
        acc = 0.0
        placed = False
        for k, seg in enumerate(seg_lens):
            if acc + seg >= d and seg > 0:
                f = (d - acc) / seg
                out.append((pts[k][0] + f * (pts[k + 1][0] - pts[k][0]),
                            pts[k][1] + f * (pts[k + 1][1] - pts[k][1])))
                placed = True
                break
            acc += seg
        if not placed:
            out.append(tuple(pts[-1]))
    return np.array(out)


def random_traces(rng, n_traces, max_points=20):
    traces = []
    for i in range(n_traces):
        npts = int(rng.integers(1, max_points + 1))
        center = rng.uniform(0, 10, size=2)
        traces.append(Trace(id=i, points=center + rng.normal(0, 0.8, size=(npts, 2))))
    return traces


def random_pair_scores(rng, n) -> PairScores:
    pairs = {}
    for j in range(n):
        for i in range(j):
            v = rng.normal(0, 2, size=len(RELATION_CLASSES))
            pairs[(i, j)] = v - np.log(np.exp(v).sum())
    return PairScores(n=n, pairs=pairs, line_start=rng.normal(0, 1, size=n))
