"""Consensus filtering of gross outliers on each edge of a measurement graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import ProblemGraph
from .liegroups import Pose


@dataclass(frozen=True)
class RansacOptions:
    translation_threshold: float = 0.6
    rotation_threshold: float = 60.0  # degrees
    min_inlier_fraction: float = 1.0 / 3.0
    iterations: int = 200
    # Approximate monocular scale applied to B translations before scoring.
    scale_hint: float = 1.0

    def __post_init__(self):
        if not (self.translation_threshold > 0 and self.rotation_threshold > 0):
            raise ValueError("RANSAC thresholds must be positive")
        if not (0.0 < self.min_inlier_fraction <= 1.0):
            raise ValueError("min_inlier_fraction must lie in (0, 1]")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")


@dataclass
class RansacResult:
    inliers: list
    rejected: bool
    candidate: Pose | None = None
    reason: str = ""


def implied_x(pair, y: Pose, scale_hint: float = 1.0) -> Pose:
    """``A^-1 Y B`` with the B translation divided by ``scale_hint``."""
    b = Pose(pair.b.rotation, pair.b.translation / scale_hint)
    return pair.a.inverse() @ y @ b


def ransac_filter(pairs, y_estimate: Pose, opts: RansacOptions | None = None, rng=None) -> RansacResult:
    """Largest set of pairs that agree on the implied sensor pose.

    Each hypothesis is the X implied by one pair; a pair supports it when its
    own implied X lies within both thresholds.  With at most ``opts.iterations``
    pairs every pair is tried, so the outcome is deterministic; larger edges
    draw hypotheses from ``rng``.
    """
    opts = opts or RansacOptions()
    pairs = list(pairs)
    n = len(pairs)
    if n < 2:
        return RansacResult([], True, None, "fewer than two measurements")
    xs = [implied_x(p, y_estimate, opts.scale_hint) for p in pairs]
    Rs = np.stack([x.rotation for x in xs])
    ts = np.stack([x.translation for x in xs])
    cos_thr = np.cos(np.radians(opts.rotation_threshold))
    if n <= opts.iterations:
        hyps = range(n)
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        hyps = rng.choice(n, size=opts.iterations, replace=False)
    best, best_h = None, None
    for h in hyps:
        # geodesic angle test through the trace: cos(theta) = (tr - 1) / 2
        tr = np.einsum("ij,nij->n", Rs[h], Rs)
        ok_r = (tr - 1.0) / 2.0 >= cos_thr - 1e-12
        ok_t = np.linalg.norm(ts - ts[h], axis=1) <= opts.translation_threshold
        support = np.flatnonzero(ok_r & ok_t)
        if best is None or support.size > best.size:
            best, best_h = support, int(h)
    if best.size < opts.min_inlier_fraction * n:
        return RansacResult([], True, xs[best_h], "consensus below the minimum inlier fraction")
    return RansacResult([int(i) for i in best], False, xs[best_h])


@dataclass
class GraphFilterReport:
    kept: dict = field(default_factory=dict)
    removed: dict = field(default_factory=dict)
    rejected_edges: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kept": {f"{j},{k}": v for (j, k), v in self.kept.items()},
            "removed": {f"{j},{k}": v for (j, k), v in self.removed.items()},
            "rejected_edges": [list(e) for e in self.rejected_edges],
        }


def ransac_graph(graph: ProblemGraph, y_estimates, opts: RansacOptions | None = None, seed: int = 0):
    """Filter every edge and return ``(filtered_graph, report)``."""
    rng = np.random.default_rng(seed)
    out = ProblemGraph(graph.num_x, graph.num_y, {}, graph.monocular, list(graph.x_names), list(graph.y_names))
    rep = GraphFilterReport()
    for (j, k), pairs in graph.sorted_edges():
        res = ransac_filter(pairs, y_estimates[k], opts, rng)
        if res.rejected:
            rep.rejected_edges.append((j, k))
            continue
        keep = set(res.inliers)
        rep.kept[(j, k)] = sorted(keep)
        rep.removed[(j, k)] = [i for i in range(len(pairs)) if i not in keep]
        for i in sorted(keep):
            out.add_measurement(j, k, pairs[i])
    return out, rep
