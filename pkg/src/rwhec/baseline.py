"""Two-stage closed-form estimator: linear rotations, then linear translations."""

from __future__ import annotations

import numpy as np

from .errors import RankDeficientError
from .graph import ProblemGraph
from .liegroups import Pose, project_to_so3

KERNEL_TOL = 1e-8


def _rotation_system(graph: ProblemGraph) -> np.ndarray:
    n = graph.num_x + graph.num_y
    rows = []
    for (j, k), pairs in graph.sorted_edges():
        y = graph.num_x + k
        for pair in pairs:
            blk = np.zeros((9, 9 * n))
            blk[:, 9 * j : 9 * j + 9] = np.kron(np.eye(3), pair.a.rotation)
            blk[:, 9 * y : 9 * y + 9] = -np.kron(pair.b.rotation.T, np.eye(3))
            rows.append(np.sqrt(pair.kappa) * blk)
    return np.vstack(rows)


def rotation_kernel_dimension(graph: ProblemGraph, tol: float = KERNEL_TOL) -> int:
    """Number of singular values of the stacked rotation system below ``tol * s_max``."""
    s = np.linalg.svd(_rotation_system(graph), compute_uv=False)
    n = 9 * (graph.num_x + graph.num_y)
    s = np.concatenate([s, np.zeros(max(0, n - s.size))])
    return int(np.sum(s < tol * s[0]))


def linear_rotations(graph: ProblemGraph, tol: float = KERNEL_TOL) -> list:
    A = _rotation_system(graph)
    n_rot = graph.num_x + graph.num_y
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    s = np.concatenate([s, np.zeros(max(0, 9 * n_rot - s.size))])
    if s[-2] < tol * s[0]:
        dim = int(np.sum(s < tol * s[0]))
        raise RankDeficientError(f"rotation system has a {dim}-dimensional kernel; rotations are not identifiable")
    v = Vt[-1]
    det = np.linalg.det(v[:9].reshape(3, 3, order="F"))
    v = v * np.sign(det) * abs(det) ** (-1.0 / 3.0)
    return [project_to_so3(v[9 * l : 9 * l + 9].reshape(3, 3, order="F")) for l in range(n_rot)]


def linear_translations(graph: ProblemGraph, rotations: list, estimate_scale: bool = False):
    """Weighted least squares for translations with rotations held fixed.

    With ``estimate_scale`` the unknowns are the scaled translations and the
    scale itself; the returned translations are metric.
    """
    M, P = graph.num_x, graph.num_y
    n = 3 * (M + P) + (1 if estimate_scale else 0)
    H = np.zeros((n, n))
    g = np.zeros(n)
    for (j, k), pairs in graph.sorted_edges():
        RY = rotations[M + k]
        for pair in pairs:
            J = np.zeros((3, n))
            J[:, 3 * j : 3 * j + 3] = pair.a.rotation
            J[:, 3 * (M + k) : 3 * (M + k) + 3] = -np.eye(3)
            rhs = RY @ pair.b.translation
            if estimate_scale:
                J[:, -1] = pair.a.translation
            else:
                rhs = rhs - pair.a.translation
            w = 1.0 / pair.sigma**2
            H += w * J.T @ J
            g += w * J.T @ rhs
    z = np.linalg.lstsq(H, g, rcond=None)[0]
    alpha = float(z[-1]) if estimate_scale else 1.0
    t = z[: 3 * (M + P)] / alpha
    return t, alpha


def solve_linear(graph: ProblemGraph, estimate_scale: bool | None = None):
    """Closed-form two-stage calibration.

    Rotations come from the smallest right singular vector of the stacked
    rotation constraints, scaled to unit determinant on the first block and
    projected blockwise onto SO(3).  Translations then follow from linear least
    squares.  For monocular graphs the scale enters the translation stage as an
    extra linear unknown.

    Raises:
        RankDeficientError: if the rotation system has more than a one-dimensional
            kernel.
    """
    from .solution import CalibrationSolution

    if estimate_scale is None:
        estimate_scale = graph.monocular
    rots = linear_rotations(graph)
    t, alpha = linear_translations(graph, rots, estimate_scale)
    poses = [Pose(R, t[3 * i : 3 * i + 3]) for i, R in enumerate(rots)]
    return CalibrationSolution(poses[: graph.num_x], poses[graph.num_x :], alpha, "linear")
