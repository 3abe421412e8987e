"""Quadratic cost of the calibration problem over the lifted state.

The cost is ``x^T Q x`` with ``x`` laid out by :class:`~rwhec.graph.StateLayout`
and equals one half of the weighted sum of squared chordal rotation residuals
``kappa * |R_A R_X - R_Y R_B|_F^2`` and translation residuals
``|R_A t_X + alpha t_A - t_Y - R_Y t_B|^2 / sigma^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatchError, EmptyEdgeError
from .graph import MeasurementPair, ProblemGraph, StateLayout

I3 = np.eye(3)


def pair_rotation_matrix(pair: MeasurementPair, layout: StateLayout, j: int, k: int) -> sp.csr_matrix:
    """Rows mapping the state to ``vec(R_A R_X - R_Y R_B)``."""
    M = sp.lil_matrix((9, layout.dim))
    M[:, layout.rot_x(j)] = np.kron(I3, pair.a.rotation)
    M[:, layout.rot_y(k)] = -np.kron(pair.b.rotation.T, I3)
    return M.tocsr()


def pair_translation_matrix(pair: MeasurementPair, layout: StateLayout, j: int, k: int) -> sp.csr_matrix:
    """Rows mapping the state to ``R_A t_X + alpha t_A - t_Y - R_Y t_B``."""
    M = sp.lil_matrix((3, layout.dim))
    M[:, layout.trans_x(j)] = pair.a.rotation
    M[:, layout.trans_y(k)] = -I3
    M[:, layout.rot_y(k)] = -np.kron(pair.b.translation[None, :], I3)
    M[:, layout.scale] = pair.a.translation[:, None]
    return M.tocsr()


@dataclass(frozen=True)
class CostBlocks:
    """Sub-blocks of ``2 Q``; see :func:`assemble_full_q` for the arrangement."""

    l_tau: np.ndarray
    l_rho: np.ndarray
    sigma_blk: np.ndarray
    u_mat: np.ndarray
    u_vec: np.ndarray
    v_vec: np.ndarray
    v_scal: float
    num_x: int
    num_y: int
    monocular: bool = False

    @property
    def layout(self) -> StateLayout:
        return StateLayout(self.num_x, self.num_y)


@dataclass(frozen=True)
class FullCost:
    q: np.ndarray
    layout: StateLayout

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.q @ x)


def build_cost_blocks(graph: ProblemGraph) -> CostBlocks:
    """Accumulate the graph-structured cost blocks, edge by edge in sorted order."""
    M, P = graph.num_x, graph.num_y
    n = M + P
    l_tau = np.zeros((3 * n, 3 * n))
    l_rho = np.zeros((9 * n, 9 * n))
    sig = np.zeros((9 * n, 9 * n))
    U = np.zeros((3 * n, 9 * n))
    u = np.zeros(9 * n)
    v = np.zeros(3 * n)
    v_scal = 0.0
    for (j, k), pairs in graph.sorted_edges():
        if not pairs:
            raise EmptyEdgeError(f"edge ({j}, {k}) has no measurements")
        y = M + k  # node number of Y_k
        tj, tk = slice(3 * j, 3 * j + 3), slice(3 * y, 3 * y + 3)
        rj, rk = slice(9 * j, 9 * j + 9), slice(9 * y, 9 * y + 9)
        for pair in pairs:
            w = 1.0 / pair.sigma**2
            kap = pair.kappa
            RA, tA = pair.a.rotation, pair.a.translation
            RB, tB = pair.b.rotation, pair.b.translation
            l_tau[tj, tj] += w * I3
            l_tau[tk, tk] += w * I3
            l_tau[tj, tk] -= w * RA.T
            l_tau[tk, tj] -= w * RA
            v[tj] += w * RA.T @ tA
            v[tk] -= w * tA
            v_scal += w * tA @ tA
            tBrow = tB[None, :]
            U[tj, rk] -= w * np.kron(tBrow, RA.T)
            U[tk, rk] += w * np.kron(tBrow, I3)
            u[rk] -= w * np.kron(tB, tA)
            sig[rk, rk] += w * np.kron(np.outer(tB, tB), I3)
            off = kap * np.kron(RB.T, RA.T)
            l_rho[rj, rj] += kap * np.eye(9)
            l_rho[rk, rk] += kap * np.eye(9)
            l_rho[rj, rk] -= off
            l_rho[rk, rj] -= off.T
    return CostBlocks(l_tau, l_rho, sig, U, u, v, float(v_scal), M, P, graph.monocular)


def assemble_full_q(blocks: CostBlocks, layout: StateLayout | None = None) -> FullCost:
    """``Q = 1/2 [[L_tau, v, U], [v^T, v_scal, u^T], [U^T, u, Sigma + L_rho]]``."""
    if layout is None:
        layout = blocks.layout
    n3 = blocks.l_tau.shape[0]
    if (layout.num_x, layout.num_y) != (blocks.num_x, blocks.num_y) or n3 != 3 * layout.n_nodes:
        raise DimensionMismatchError("cost blocks do not match the state layout")
    Q = np.block(
        [
            [blocks.l_tau, blocks.v_vec[:, None], blocks.u_mat],
            [blocks.v_vec[None, :], np.array([[blocks.v_scal]]), blocks.u_vec[None, :]],
            [blocks.u_mat.T, blocks.u_vec[:, None], blocks.sigma_blk + blocks.l_rho],
        ]
    )
    return FullCost(0.5 * Q, layout)


def gram_oracle_q(graph: ProblemGraph) -> np.ndarray:
    """Reference ``Q`` from the per-pair residual matrices (slow, for checking)."""
    layout = graph.layout()
    Q = sp.csr_matrix((layout.dim, layout.dim))
    for (j, k), pairs in graph.sorted_edges():
        for pair in pairs:
            MR = pair_rotation_matrix(pair, layout, j, k)
            Mt = pair_translation_matrix(pair, layout, j, k)
            Q = Q + 0.5 * pair.kappa * (MR.T @ MR) + (0.5 / pair.sigma**2) * (Mt.T @ Mt)
    return Q.toarray()


def objective_value(graph: ProblemGraph, xs, ys, alpha: float = 1.0) -> float:
    """Direct evaluation of the cost at metric poses ``xs``, ``ys`` and scale ``alpha``."""
    total = 0.0
    for (j, k), pairs in graph.sorted_edges():
        RX, tX = xs[j].rotation, alpha * xs[j].translation
        RY, tY = ys[k].rotation, alpha * ys[k].translation
        for pair in pairs:
            RA, tA = pair.a.rotation, pair.a.translation
            RB, tB = pair.b.rotation, pair.b.translation
            er = RA @ RX - RY @ RB
            et = RA @ tX + alpha * tA - tY - RY @ tB
            total += 0.5 * (pair.kappa * np.sum(er * er) + et @ et / pair.sigma**2)
    return float(total)
