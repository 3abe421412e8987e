"""Elimination of translations (and the monocular scale) from the quadratic cost."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import CostBlocks
from .errors import DimensionMismatchError, ScaleNearZeroError
from .graph import StateLayout

PINV_RCOND = 1e-10
SCALE_MIN = 1e-6


@dataclass(frozen=True)
class ReducedCost:
    """Cost over rotations only, with translations optimized out.

    Monocular mode: ``q_prime`` is ``9n x 9n`` over ``r``.  Standard mode:
    ``q_prime`` is ``(9n + 1) x (9n + 1)`` over ``(r, s)`` where ``s`` is the
    homogenizing coordinate (``s = 1`` at the solution).

    ``recovery_op`` maps the reduced variable to the eliminated ones: ``(t, alpha)``
    for monocular, ``t`` for standard.
    """

    q_prime: np.ndarray
    recovery_op: np.ndarray
    monocular: bool
    layout: StateLayout

    @property
    def rot_dim(self) -> int:
        return self.layout.rot_dim

    def padded(self) -> np.ndarray:
        """``q_prime`` embedded in the ``(9n + 1)`` homogenized space."""
        if not self.monocular:
            return self.q_prime
        n = self.rot_dim
        Q = np.zeros((n + 1, n + 1))
        Q[:n, :n] = self.q_prime
        return Q

    def value(self, r) -> float:
        r = np.asarray(r, dtype=float)
        if not self.monocular and r.size == self.rot_dim:
            r = np.append(r, 1.0)
        return float(r @ self.q_prime @ r)


def schur_reduce(blocks: CostBlocks, monocular: bool | None = None) -> ReducedCost:
    """Generalized Schur complement of the translation (and scale) block.

    Args:
        blocks: Assembled cost blocks.
        monocular: Overrides ``blocks.monocular`` when given.
    """
    mono = blocks.monocular if monocular is None else monocular
    S = blocks.sigma_blk + blocks.l_rho
    if mono:
        K = np.block(
            [
                [blocks.l_tau, blocks.v_vec[:, None]],
                [blocks.v_vec[None, :], np.array([[blocks.v_scal]])],
            ]
        )
        C = np.vstack([blocks.u_mat, blocks.u_vec[None, :]])
        W = S
    else:
        K = blocks.l_tau
        C = np.hstack([blocks.u_mat, blocks.v_vec[:, None]])
        W = np.block(
            [
                [S, blocks.u_vec[:, None]],
                [blocks.u_vec[None, :], np.array([[blocks.v_scal]])],
            ]
        )
    G = np.linalg.pinv(K, rcond=PINV_RCOND, hermitian=True) @ C
    q = 0.5 * (W - C.T @ G)
    q = 0.5 * (q + q.T)
    return ReducedCost(q, -G, mono, blocks.layout)


def recover_translations(reduced: ReducedCost, r_star, return_sign: bool = False):
    """Optimal eliminated variables at the rotation vector ``r_star``.

    Returns ``(t, alpha)`` where ``t`` stacks the (scaled) translations of all
    nodes, X first.  In standard mode ``r_star`` may omit the homogenizing
    coordinate, which then defaults to 1, and ``alpha`` is that coordinate.  In
    monocular mode a negative scale is flipped together with ``t``; the metric
    translations ``t / alpha`` are unaffected.  With ``return_sign`` the sign
    that was applied is returned as a third element.
    """
    r = np.asarray(r_star, dtype=float)
    n = reduced.rot_dim
    if reduced.monocular:
        if r.size != n:
            raise DimensionMismatchError(f"expected {n} rotation entries, got {r.size}")
        z = reduced.recovery_op @ r
        t, alpha = z[:-1], float(z[-1])
        if abs(alpha) < SCALE_MIN:
            raise ScaleNearZeroError(f"recovered scale {alpha:.3e} is numerically zero")
        sign = 1.0 if alpha > 0 else -1.0
        t, alpha = sign * t, sign * alpha
    else:
        if r.size == n:
            r = np.append(r, 1.0)
        if r.size != n + 1:
            raise DimensionMismatchError(f"expected {n} or {n + 1} entries, got {r.size}")
        t, alpha, sign = reduced.recovery_op @ r, float(r[-1]), 1.0
    return (t, alpha, sign) if return_sign else (t, alpha)
