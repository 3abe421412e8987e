"""Sufficient conditions for a unique calibration, checked on measurement data."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NearPiAngleError, RankDeficientError
from .graph import ProblemGraph
from .liegroups import log_so3

log = logging.getLogger(__name__)

THETA_MIN = 1e-3
PHI_MIN = 1e-3
RANGE_TOL = 1e-6

IDENTIFIABLE = "identifiable"
ROTATION_ONLY = "rotation_only"
UNIDENTIFIABLE = "unidentifiable"


def _relative_axes(pairs, i1: int, theta_min: float):
    """Unit axes of ``R_A(i)^T R_A(i1)`` for every ``i`` whose angle exceeds ``theta_min``."""
    R1 = pairs[i1].a.rotation
    out = []
    for i, p in enumerate(pairs):
        if i == i1:
            continue
        try:
            v = log_so3(p.a.rotation.T @ R1)
        except NearPiAngleError:
            continue
        ang = np.linalg.norm(v)
        if ang > theta_min:
            out.append((i, v / ang))
    return out


def axis_test(pairs, theta_min: float = THETA_MIN, phi_min: float = PHI_MIN):
    """Search for three measurements whose relative rotations turn about distinct axes.

    Args:
        pairs: Measurements of one edge.
        theta_min: Smallest relative rotation angle with a usable axis.
        phi_min: Smallest angle between the two axes, treated as lines.

    Returns:
        A triple ``(i1, i2, i3)`` or ``None``.
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        return None
    cos_max = np.cos(phi_min)
    for i1 in range(len(pairs)):
        axes = _relative_axes(pairs, i1, theta_min)
        if len(axes) < 2:
            continue
        idx = np.array([i for i, _ in axes])
        U = np.array([a for _, a in axes])
        # axes are lines, so compare |cos|
        C = np.abs(U @ U.T)
        hit = np.argwhere(C < cos_max)
        if hit.size:
            a, b = hit[0]
            return (i1, int(idx[a]), int(idx[b]))
    return None


def translation_test(pairs, y_rotation, range_tol: float = RANGE_TOL) -> bool:
    """Rank and range condition on the stacked translation system of one edge.

    Builds the ``(3N, 6)`` matrix of ``[-R_A, I]`` rows and the stacked
    ``R_Y t_B``.  Passes when that matrix has full column rank and the stacked
    vector keeps a residual above ``range_tol`` relative to its norm after
    projection onto the column space.
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        return False
    RY = np.asarray(y_rotation, dtype=float)
    M = np.vstack([np.hstack([-p.a.rotation, np.eye(3)]) for p in pairs])
    t = np.concatenate([RY @ p.b.translation for p in pairs])
    if np.linalg.matrix_rank(M) < 6:
        return False
    tn = np.linalg.norm(t)
    if tn == 0.0:
        return False
    Q, _ = np.linalg.qr(M)
    res = t - Q @ (Q.T @ t)
    return bool(np.linalg.norm(res) > range_tol * tn)


@dataclass
class IdentifiabilityReport:
    weakly_connected: bool
    informative_edges: list
    translation_ok_edges: list
    verdict: str
    witness: dict | None = None
    monocular_warning: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "weakly_connected": self.weakly_connected,
            "informative_edges": [list(e) for e in self.informative_edges],
            "translation_ok_edges": [list(e) for e in self.translation_ok_edges],
            "verdict": self.verdict,
            "witness": self.witness,
            "monocular_warning": self.monocular_warning,
            "notes": list(self.notes),
        }


def _y_rotations(graph: ProblemGraph, y_rotations):
    if y_rotations is not None:
        return [np.asarray(R, dtype=float) for R in y_rotations]
    from .baseline import linear_rotations

    try:
        rots = linear_rotations(graph)
    except RankDeficientError:
        return None
    return rots[graph.num_x :]


def analyze(
    graph: ProblemGraph,
    y_rotations=None,
    theta_min: float = THETA_MIN,
    phi_min: float = PHI_MIN,
    range_tol: float = RANGE_TOL,
) -> IdentifiabilityReport:
    """Graph-level identifiability verdict from single-edge sufficient tests.

    The tests are sufficient, not necessary: a graph whose uniqueness relies
    on combining several edges is reported as unidentifiable.  Without
    ``y_rotations`` the translation test uses the closed-form rotation estimate.
    """
    connected = graph.is_weakly_connected()
    informative, trans_ok, witness = [], [], None
    rotY = None
    notes = []
    for (j, k), pairs in graph.sorted_edges():
        w = axis_test(pairs, theta_min, phi_min)
        if w is None:
            continue
        informative.append((j, k))
        if rotY is None:
            rotY = _y_rotations(graph, y_rotations)
            if rotY is None:
                notes.append("rotation estimate unavailable; translation test skipped")
                rotY = False
        if rotY is not False and translation_test(pairs, rotY[k], range_tol):
            trans_ok.append((j, k))
            if witness is None:
                witness = {"edge": [j, k], "triple": list(w)}
    if connected and witness is not None:
        verdict = IDENTIFIABLE
    elif connected and informative:
        verdict = ROTATION_ONLY
    else:
        verdict = UNIDENTIFIABLE
        witness = None
    if not connected:
        notes.append("graph is not weakly connected")
    mono = bool(graph.monocular)
    if mono:
        notes.append(
            "no sufficient condition is known for the scale; single-sphere style "
            "trajectories can leave it unidentifiable, measurements at two distances are advised"
        )
    return IdentifiabilityReport(connected, informative, trans_ok, verdict, witness, mono, notes)
