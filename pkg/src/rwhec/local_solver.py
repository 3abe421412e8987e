"""Levenberg-Marquardt refinement on SO(3) x R^3 with analytic Jacobians.

Rotations are updated as ``R <- exp(psi^) R`` and translations additively.
Translations inside :class:`LocalState` are expressed in the units of the B
measurements, i.e. metric translations multiplied by the scale ``alpha``; this
keeps the translation residual linear in every translation and in ``alpha``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergedError, ValidationError
from .graph import MeasurementPair, ProblemGraph
from .liegroups import Pose, exp_so3, hat, is_rotation, log_so3, right_jacobian_inv
from .solution import CalibrationSolution

log = logging.getLogger(__name__)

JACOBIAN_ANGLE_LIMIT = np.pi - 1e-3


@dataclass
class LocalState:
    """Poses being refined; translations are in B-measurement units."""

    xs: list
    ys: list
    alpha: float = 1.0
    fixed_scale: bool = True

    def is_valid(self, tol: float = 1e-10) -> bool:
        return all(is_rotation(p.rotation, tol) for p in self.xs + self.ys)

    @property
    def dim(self) -> int:
        return 6 * (len(self.xs) + len(self.ys)) + (0 if self.fixed_scale else 1)

    def retract(self, delta) -> LocalState:
        delta = np.asarray(delta, dtype=float)
        poses = []
        for i, p in enumerate(self.xs + self.ys):
            d = delta[6 * i : 6 * i + 6]
            poses.append(Pose(exp_so3(d[:3]) @ p.rotation, p.translation + d[3:]))
        m = len(self.xs)
        alpha = self.alpha if self.fixed_scale else self.alpha + float(delta[-1])
        return LocalState(poses[:m], poses[m:], alpha, self.fixed_scale)

    @classmethod
    def from_solution(cls, sol: CalibrationSolution, fixed_scale: bool = True, alpha: float | None = None):
        a = sol.alpha if alpha is None else float(alpha)
        if fixed_scale:
            a = 1.0 if alpha is None else a

        def scaled(p):
            return Pose(p.rotation, a * p.translation)

        return cls([scaled(p) for p in sol.xs], [scaled(p) for p in sol.ys], a, fixed_scale)

    def to_solution(self, method: str = "local", cost: float | None = None, info: dict | None = None):
        a = self.alpha

        def metric(p):
            return Pose(p.rotation, p.translation / a)

        return CalibrationSolution(
            [metric(p) for p in self.xs], [metric(p) for p in self.ys], a, method, cost, dict(info or {})
        )


@dataclass
class ResidualBlock:
    """Residuals of one pair and, optionally, their Jacobians.

    ``jacobians`` maps ``(residual, variable)`` to a dense block, e.g.
    ``("r", "psi_x")`` for the rotation residual against the X rotation
    perturbation or ``("t", "alpha")`` (shape ``(3, 1)``) for the translation
    residual against the scale.
    """

    e_r: np.ndarray
    e_t: np.ndarray
    jacobians: dict = field(default_factory=dict)


def residuals(state: LocalState, pair: MeasurementPair, j: int, k: int) -> ResidualBlock:
    """Geodesic rotation residual and translation residual of one pair."""
    X, Y = state.xs[j], state.ys[k]
    RA, tA = pair.a.rotation, pair.a.translation
    RB, tB = pair.b.rotation, pair.b.translation
    e_r = log_so3(X.rotation.T @ RA.T @ Y.rotation @ RB)
    e_t = RA @ X.translation + state.alpha * tA - Y.rotation @ tB - Y.translation
    return ResidualBlock(e_r, e_t)


def analytic_jacobians(state: LocalState, pair: MeasurementPair, j: int, k: int, exact: bool = True) -> ResidualBlock:
    """Residuals with all six Jacobian blocks.

    With ``exact=False`` the rotation blocks omit the inverse right Jacobian of
    the logarithm, which is accurate only when the rotation residual is small.

    Raises:
        ValueError: if the rotation residual angle is too close to pi for the
            Jacobians to be meaningful.
    """
    blk = residuals(state, pair, j, k)
    if np.linalg.norm(blk.e_r) >= JACOBIAN_ANGLE_LIMIT:
        raise ValueError("rotation residual too close to pi for Jacobian evaluation")
    RA, tA = pair.a.rotation, pair.a.translation
    RB, tB = pair.b.rotation, pair.b.translation
    RY = state.ys[k].rotation
    left = RB.T @ RY.T
    if exact:
        left = right_jacobian_inv(blk.e_r) @ left
    blk.jacobians = {
        ("r", "psi_x"): -left @ RA,
        ("r", "psi_y"): left,
        ("t", "t_x"): RA.copy(),
        ("t", "psi_y"): hat(RY @ tB),
        ("t", "t_y"): -np.eye(3),
        ("t", "alpha"): tA.reshape(3, 1).copy(),
    }
    return blk


def chordal_jacobians(state: LocalState, pair: MeasurementPair, j: int, k: int):
    """Chordal residual ``vec(R_A R_X - R_Y R_B)`` and its rotation Jacobians.

    Returns ``(r, J_x, J_y)`` with ``r`` of length 9 and ``J_*`` of shape ``(9, 3)``.
    """
    RA, RB = pair.a.rotation, pair.b.rotation
    RX, RY = state.xs[j].rotation, state.ys[k].rotation
    r = (RA @ RX - RY @ RB).reshape(-1, order="F")
    E = np.eye(3)
    Jx = np.column_stack([(RA @ hat(E[i]) @ RX).reshape(-1, order="F") for i in range(3)])
    Jy = np.column_stack([-(hat(E[i]) @ RY @ RB).reshape(-1, order="F") for i in range(3)])
    return r, Jx, Jy


@dataclass
class LocalOptions:
    max_iterations: int = 1000
    function_tolerance: float = 1e-15
    gradient_tolerance: float = 1e-12
    step_tolerance: float = 1e-12
    initial_damping: float = 1e-4
    max_rejections: int = 10
    # "geodesic" uses log-map rotation residuals; "chordal" the Frobenius
    # residual whose cost equals the quadratic objective of the relaxation.
    residual: str = "geodesic"
    exact_jacobians: bool = True


def _pairs(graph: ProblemGraph):
    for (j, k), pairs in graph.sorted_edges():
        for pair in pairs:
            yield j, k, pair


def evaluate_cost(graph: ProblemGraph, state: LocalState, residual: str = "geodesic") -> float:
    """Half the weighted sum of squared residuals."""
    total = 0.0
    for j, k, pair in _pairs(graph):
        if residual == "chordal":
            r, _, _ = chordal_jacobians(state, pair, j, k)
            e_t = residuals_translation(state, pair, j, k)
        else:
            blk = residuals(state, pair, j, k)
            r, e_t = blk.e_r, blk.e_t
        total += 0.5 * (pair.kappa * r @ r + e_t @ e_t / pair.sigma**2)
    return float(total)


def residuals_translation(state: LocalState, pair: MeasurementPair, j: int, k: int) -> np.ndarray:
    X, Y = state.xs[j], state.ys[k]
    return (
        pair.a.rotation @ X.translation
        + state.alpha * pair.a.translation
        - Y.rotation @ pair.b.translation
        - Y.translation
    )


def _normal_equations(graph: ProblemGraph, state: LocalState, opts: LocalOptions):
    m = len(state.xs)
    n = state.dim
    H = np.zeros((n, n))
    g = np.zeros(n)
    cost = 0.0
    for j, k, pair in _pairs(graph):
        ix, iy = 6 * j, 6 * (m + k)
        if opts.residual == "chordal":
            r, Jx, Jy = chordal_jacobians(state, pair, j, k)
            e_t = residuals_translation(state, pair, j, k)
            rot_cols = {ix: Jx, iy: Jy}
            Jt = {ix + 3: pair.a.rotation, iy: hat(state.ys[k].rotation @ pair.b.translation), iy + 3: -np.eye(3)}
            alpha_col = pair.a.translation
        else:
            blk = analytic_jacobians(state, pair, j, k, opts.exact_jacobians)
            J = blk.jacobians
            r, e_t = blk.e_r, blk.e_t
            rot_cols = {ix: J[("r", "psi_x")], iy: J[("r", "psi_y")]}
            Jt = {ix + 3: J[("t", "t_x")], iy: J[("t", "psi_y")], iy + 3: J[("t", "t_y")]}
            alpha_col = J[("t", "alpha")][:, 0]
        Jr = np.zeros((r.size, n))
        for c, b in rot_cols.items():
            Jr[:, c : c + 3] = b
        Jtr = np.zeros((3, n))
        for c, b in Jt.items():
            Jtr[:, c : c + 3] += b
        if not state.fixed_scale:
            Jtr[:, -1] = alpha_col
        w = 1.0 / pair.sigma**2
        H += pair.kappa * Jr.T @ Jr + w * Jtr.T @ Jtr
        g += pair.kappa * Jr.T @ r + w * Jtr.T @ e_t
        cost += 0.5 * (pair.kappa * r @ r + w * e_t @ e_t)
    return H, g, cost


@dataclass
class LocalResult:
    state: LocalState
    cost: float
    iterations: int
    initial_cost: float
    converged: bool
    reason: str
    history: list = field(default_factory=list)


def solve_local(graph: ProblemGraph, init: LocalState, opts: LocalOptions | None = None) -> LocalResult:
    """Levenberg-Marquardt with multiplicative damping.

    Raises:
        ValidationError: if the initial state holds invalid rotations or does
            not match the graph.
        DivergedError: if ``max_rejections`` consecutive damped steps fail to
            decrease the cost.
    """
    opts = opts or LocalOptions()
    if len(init.xs) != graph.num_x or len(init.ys) != graph.num_y:
        raise ValidationError("initial state does not match the graph", [len(init.xs), len(init.ys)])
    if not init.is_valid(1e-9):
        raise ValidationError("initial state holds invalid rotations", [])
    state = init
    lam = opts.initial_damping
    H, g, cost = _normal_equations(graph, state, opts)
    initial = cost
    history = [cost]
    reason = "max_iterations"
    it = 0
    for it in range(1, opts.max_iterations + 1):
        if np.linalg.norm(g) < opts.gradient_tolerance * (1.0 + cost):
            reason = "gradient"
            it -= 1
            break
        rejections = 0
        while True:
            A = H + lam * np.diag(np.maximum(np.diag(H), 1e-12))
            try:
                step = -np.linalg.solve(A, g)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(A, g, rcond=None)[0]
            cand = state.retract(step)
            c_new = evaluate_cost(graph, cand, opts.residual)
            if c_new <= cost:
                lam = max(lam / 10.0, 1e-15)
                break
            lam *= 10.0
            rejections += 1
            if rejections >= opts.max_rejections:
                if np.linalg.norm(step) < opts.step_tolerance * (1.0 + _state_norm(state)):
                    reason = "step"
                    return LocalResult(state, cost, it, initial, True, reason, history)
                raise DivergedError(f"cost did not decrease after {rejections} damped retries")
        decrease = cost - c_new
        state = cand
        H, g, cost = _normal_equations(graph, state, opts)
        history.append(cost)
        if np.linalg.norm(step) < opts.step_tolerance * (1.0 + _state_norm(state)):
            reason = "step"
            break
        if decrease <= opts.function_tolerance * max(cost, 1e-300):
            reason = "function"
            break
    converged = reason != "max_iterations"
    return LocalResult(state, cost, it, initial, converged, reason, history)


def _state_norm(state: LocalState) -> float:
    return float(np.sqrt(sum(p.translation @ p.translation for p in state.xs + state.ys) + state.alpha**2))


def refine(graph: ProblemGraph, init: CalibrationSolution, opts: LocalOptions | None = None, fixed_scale=None):
    """Refine a solution and return it as a :class:`CalibrationSolution`.

    Monocular graphs refine the scale unless ``fixed_scale`` is given.  An
    initializer from a scale-free solver starts at ``alpha = 1``.
    """
    if fixed_scale is None:
        fixed_scale = not graph.monocular
    start = LocalState.from_solution(init, fixed_scale, alpha=None if not fixed_scale else 1.0)
    res = solve_local(graph, start, opts)
    info = {
        "initial_cost": res.initial_cost,
        "iterations": res.iterations,
        "converged": res.converged,
        "stop_reason": res.reason,
        "initializer": init.method,
    }
    return res.state.to_solution("local", res.cost, info)
