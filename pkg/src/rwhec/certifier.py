"""Lagrangian dual relaxation, solution extraction and optimality certificates."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import build_cost_blocks, objective_value
from .conic import SolverOptions, solve_lmi
from .errors import DimensionMismatchError, KernelAmbiguousError, SolverFailure
from .graph import ProblemGraph
from .liegroups import Pose, hat, project_to_so3
from .reduction import ReducedCost, recover_translations, schur_reduce
from .solution import CalibrationSolution

log = logging.getLogger(__name__)

KERNEL_GAP_AMBIGUOUS = 1e2
KERNEL_GAP_TIGHT = 1e4
TIGHT_THRESHOLD = 1e-6
DEGENERATE_DUAL = 1e-12
ABS_GAP_THRESHOLD = 1e-9
PSD_TOL = 1e-10

_SYM_IDX = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]
PER_ROTATION = 21


@dataclass
class DualVariables:
    """Multipliers of the homogenized rotation constraints.

    ``big_lambda[2l]`` and ``big_lambda[2l + 1]`` weigh the column and row
    orthogonality constraints of rotation ``l``; ``small_lambda[l]`` stacks the
    three cross-product (handedness) multipliers for ``c1 x c2 = s c3``,
    ``c2 x c3 = s c1`` and ``c3 x c1 = s c2``.
    """

    big_lambda: list
    small_lambda: list
    lambda_s: float

    @property
    def num_rotations(self) -> int:
        return len(self.small_lambda)

    def to_vector(self) -> np.ndarray:
        out = []
        for l in range(self.num_rotations):
            for L in self.big_lambda[2 * l : 2 * l + 2]:
                out += [L[i, j] for i, j in _SYM_IDX]
            out += list(np.asarray(self.small_lambda[l]).ravel())
        out.append(self.lambda_s)
        return np.array(out, dtype=float)

    @classmethod
    def from_vector(cls, vec) -> DualVariables:
        vec = np.asarray(vec, dtype=float)
        n_rot, rem = divmod(vec.size - 1, PER_ROTATION)
        if rem:
            raise DimensionMismatchError(f"multiplier vector of length {vec.size} is not 21n+1")
        bigs, smalls = [], []
        for l in range(n_rot):
            o = PER_ROTATION * l
            for h in range(2):
                L = np.zeros((3, 3))
                for (i, j), val in zip(_SYM_IDX, vec[o + 6 * h : o + 6 * h + 6]):
                    L[i, j] = L[j, i] = val
                bigs.append(L)
            smalls.append(vec[o + 12 : o + 21].copy())
        return cls(bigs, smalls, float(vec[-1]))

    @classmethod
    def zeros(cls, n_rot: int) -> DualVariables:
        return cls.from_vector(np.zeros(PER_ROTATION * n_rot + 1))


def constraint_basis(n_rot: int) -> sp.csr_matrix:
    """Rows are the vectorized matrices multiplying each dual variable in ``Z``.

    ``Z(lam) = Q' + sum_i lam_i A_i`` with ``x^T A_i x`` equal to (a multiple of)
    a constraint residual that vanishes on homogenized rotations ``x = (r, s)``
    with ``s^2 = 1``.  The last row carries ``lambda_s`` with ``A_s = -e_s e_s^T``.
    """
    N = 9 * n_rot + 1
    s = N - 1
    rows, cols, vals = [], [], []
    row = 0

    def put(i, j, v):
        rows.append(row)
        cols.append(i * N + j)
        vals.append(v)

    for l in range(n_rot):
        o = 9 * l
        for col_ortho in (True, False):
            for i, j in _SYM_IDX:
                B = np.zeros((3, 3))
                B[i, j] = B[j, i] = 1.0
                blk = -(np.kron(B, np.eye(3)) if col_ortho else np.kron(np.eye(3), B))
                for a, b_ in zip(*np.nonzero(blk)):
                    put(o + a, o + b_, blk[a, b_])
                if i == j:
                    put(s, s, 1.0)
                row += 1
        # handedness: 2 lam . (c_p x c_q - s c_r) for (p, q, r) cyclic
        for p, q, r in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            for comp in range(3):
                e = np.zeros(3)
                e[comp] = 1.0
                H = hat(e)
                for a in range(3):
                    for b_ in range(3):
                        if H[a, b_] != 0.0:
                            put(o + 3 * p + a, o + 3 * q + b_, -H[a, b_])
                            put(o + 3 * q + b_, o + 3 * p + a, -H[a, b_])
                put(o + 3 * r + comp, s, -1.0)
                put(s, o + 3 * r + comp, -1.0)
                row += 1
    put(s, s, -1.0)
    row += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(row, N * N))


def build_z(q_prime: ReducedCost, lam: DualVariables) -> np.ndarray:
    """Certificate matrix ``Z(lam)`` of size ``9n + 1``."""
    Qp = q_prime.padded()
    n_rot = q_prime.layout.n_nodes
    if lam.num_rotations != n_rot:
        raise DimensionMismatchError(
            f"{lam.num_rotations} multiplier blocks for {n_rot} rotations"
        )
    A = constraint_basis(n_rot)
    N = Qp.shape[0]
    Z = Qp + (A.T @ lam.to_vector()).reshape(N, N)
    return 0.5 * (Z + Z.T)


def _sym_eig(Z):
    return np.linalg.eigh(0.5 * (Z + Z.T))


def kernel_gap(eigenvalues) -> float:
    w = np.sort(np.asarray(eigenvalues))
    if abs(w[0]) == 0.0:
        return float("inf")
    return float(w[1] / abs(w[0]))


@dataclass
class Extraction:
    rotations: list
    r_hat: np.ndarray
    kernel_gap: float
    raw: np.ndarray


def _normalize_kernel_vector(v, n_rot: int) -> np.ndarray:
    first = v[:9].reshape(3, 3, order="F")
    det = np.linalg.det(first)
    if abs(det) < 1e-300:
        raise KernelAmbiguousError("kernel vector has a singular first rotation block")
    eta = np.sign(det) * abs(det) ** (-1.0 / 3.0)
    return eta * v


def extract_solution(z_star, n_rot: int, strict: bool = False) -> Extraction:
    """Rotations from the eigenvector of the smallest eigenvalue of ``Z``.

    The vector is scaled so the first 3x3 block has unit determinant, which also
    fixes its sign, and every block is then projected onto SO(3).

    Raises:
        KernelAmbiguousError: with ``strict`` and a kernel gap below 1e2.
    """
    w, V = _sym_eig(np.asarray(z_star, dtype=float))
    gap = kernel_gap(w)
    if strict and gap < KERNEL_GAP_AMBIGUOUS:
        raise KernelAmbiguousError(f"kernel of Z is not one-dimensional (gap {gap:.3g})")
    v = _normalize_kernel_vector(V[:, 0], n_rot)
    rots = [project_to_so3(v[9 * l : 9 * l + 9].reshape(3, 3, order="F")) for l in range(n_rot)]
    r_hat = np.concatenate([R.reshape(-1, order="F") for R in rots])
    return Extraction(rots, r_hat, gap, v)


@dataclass
class Certificate:
    """Optimality certificate of a primal estimate.

    ``rho_hat`` is ``(p - d_star) / d_star``, except when the dual optimum is
    numerically zero (noiseless data); then ``relative`` is false and
    ``rho_hat`` holds the gap normalized by the cost scale ``|Q'|_F``.
    ``d_rigorous`` is a lower bound that stays valid when ``Z`` is slightly
    indefinite, obtained by charging the most negative eigenvalue against the
    norm of any feasible homogenized point.
    """

    d_star: float
    p: float
    rho_hat: float
    kernel_gap: float
    tight: bool
    relative: bool = True
    d_rigorous: float | None = None
    min_eig: float | None = None

    def to_dict(self) -> dict:
        out = {}
        for k in self.__dataclass_fields__:
            v = getattr(self, k)
            out[k] = v if v is None or isinstance(v, bool) else float(v)
        return out


def certify(
    p: float,
    d_star: float,
    kernel_gap: float = float("inf"),
    scale: float = 1.0,
    threshold: float = TIGHT_THRESHOLD,
    abs_threshold: float = ABS_GAP_THRESHOLD,
    d_rigorous: float | None = None,
    min_eig: float | None = None,
) -> Certificate:
    """Relative suboptimality bound of an estimate with cost ``p``.

    ``scale`` (usually ``|Q'|_F``) makes the degenerate-dual test and the
    absolute fallback scale-aware.
    """
    scale = max(float(scale), 1.0)
    if abs(d_star) < DEGENERATE_DUAL * scale:
        rho = (p - d_star) / scale
        tight = abs(rho) < abs_threshold
        relative = False
    else:
        rho = (p - d_star) / d_star
        tight = abs(rho) < threshold
        relative = True
    if not kernel_gap > KERNEL_GAP_TIGHT:
        tight = False
    return Certificate(float(d_star), float(p), float(rho), float(kernel_gap), bool(tight), relative, d_rigorous, min_eig)


@dataclass
class DualSolution:
    lam: DualVariables
    d_star: float
    z: np.ndarray
    moment: np.ndarray | None
    info: dict = field(default_factory=dict)


def solve_dual(q_prime: ReducedCost, solver_opts: SolverOptions | None = None) -> DualSolution:
    """Maximize ``lambda_s`` subject to ``Z(lambda)`` PSD.

    The cost is normalized by its Frobenius norm before solving and the
    multipliers are scaled back afterwards.

    Raises:
        SolverFailure: if the backend stops short of a tenfold of the requested
            tolerance.
    """
    opts = solver_opts or SolverOptions()
    Qp = q_prime.padded()
    if not np.all(np.isfinite(Qp)):
        raise SolverFailure("reduced cost has non-finite entries")
    n_rot = q_prime.layout.n_nodes
    scale = np.linalg.norm(Qp)
    if scale == 0.0:
        scale = 1.0
    A = constraint_basis(n_rot)
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    res = solve_lmi(Qp / scale, A, b, opts)
    info = {"backend": res.backend, "iterations": res.iterations, "converged": res.converged, **res.residuals}
    if not res.converged:
        worst = max(v for k, v in res.residuals.items() if k in ("primal", "dual") and v is not None)
        if not worst < 10 * opts.tolerance:
            raise SolverFailure(
                f"{res.backend} stopped after {res.iterations} iterations without converging",
                res.residuals,
            )
    lam = DualVariables.from_vector(res.lam * scale)
    return DualSolution(lam, lam.lambda_s, build_z(q_prime, lam), res.moment, info)


def polish_multipliers(q_prime: ReducedCost, lam: DualVariables, x_hat) -> DualVariables:
    """Closest multipliers to ``lam`` that make ``x_hat`` a null vector of ``Z``."""
    Qp = q_prime.padded()
    N = Qp.shape[0]
    A = constraint_basis(q_prime.layout.n_nodes)
    x_hat = np.asarray(x_hat, dtype=float)
    # column i of B is A_i x_hat
    B = np.stack([(A[i].toarray().reshape(N, N)) @ x_hat for i in range(A.shape[0])], axis=1)
    lam0 = lam.to_vector()
    resid = Qp @ x_hat + B @ lam0
    step = np.linalg.lstsq(B, resid, rcond=None)[0]
    return DualVariables.from_vector(lam0 - step)


def _rigorous_bound(lam_s: float, min_eig: float, n_rot: int) -> float:
    # |x|^2 = 3 n_rot + 1 for every homogenized rotation vector
    return float(lam_s + min(0.0, min_eig) * (3 * n_rot + 1))


@dataclass
class CertifierOptions:
    solver: SolverOptions = field(default_factory=lambda: SolverOptions(tolerance=1e-12))
    polish: bool = True
    strict_kernel: bool = False
    tight_threshold: float = TIGHT_THRESHOLD


def _poses_from(rots, t, alpha, n_x):
    poses = [Pose(R, t[3 * i : 3 * i + 3] / alpha) for i, R in enumerate(rots)]
    return poses[:n_x], poses[n_x:]


def certifiable_rwhec(graph: ProblemGraph, opts: CertifierOptions | None = None):
    """Globally optimal calibration with an a-posteriori optimality certificate.

    Returns:
        ``(CalibrationSolution, Certificate)``.
    """
    opts = opts or CertifierOptions()
    t0 = time.perf_counter()
    if not graph.is_weakly_connected():
        log.warning("measurement graph is not weakly connected; the solution is not unique")
    reduced = schur_reduce(build_cost_blocks(graph))
    n_rot = graph.num_x + graph.num_y
    dual = solve_dual(reduced, opts.solver)
    ext = extract_solution(dual.z, n_rot, strict=opts.strict_kernel)
    x_hat = np.append(ext.r_hat, 1.0)
    Qp = reduced.padded()
    p = float(x_hat @ Qp @ x_hat)
    scale = float(np.linalg.norm(Qp)) or 1.0

    lam, z = dual.lam, dual.z
    w = np.linalg.eigvalsh(z)
    polished = False
    if opts.polish:
        # Prefer multipliers for which the estimate is an exact null vector, as
        # long as Z stays PSD to working precision.
        try:
            lam_p = polish_multipliers(reduced, lam, x_hat)
            z_p = build_z(reduced, lam_p)
            w_p = np.linalg.eigvalsh(z_p)
            if w_p[0] >= -PSD_TOL * np.linalg.norm(z_p):
                lam, z, w, polished = lam_p, z_p, w_p, True
        except np.linalg.LinAlgError:
            log.debug("multiplier polish failed; keeping solver multipliers")
    d_rig = _rigorous_bound(lam.lambda_s, w[0], n_rot)

    if reduced.monocular:
        t, alpha, sign = recover_translations(reduced, ext.r_hat, return_sign=True)
    else:
        t, alpha, sign = recover_translations(reduced, x_hat, return_sign=True)
    xs, ys = _poses_from(ext.rotations, t, alpha, graph.num_x)

    cert = certify(
        p,
        lam.lambda_s,
        kernel_gap(w),
        scale,
        threshold=opts.tight_threshold,
        d_rigorous=d_rig,
        min_eig=float(w[0]),
    )
    info = {
        "d_star": cert.d_star,
        "rho_hat": cert.rho_hat,
        "kernel_gap": cert.kernel_gap,
        "tight": cert.tight,
        "solver_iterations": dual.info.get("iterations"),
        "scale_sign": sign,
        "polished": polished,
        "q_scale": scale,
        "seconds": time.perf_counter() - t0,
    }
    if dual.moment is not None:
        mw, mv = np.linalg.eigh(dual.moment)
        top = mv[:, -1] / np.linalg.norm(mv[:, -1])
        kv = ext.raw / np.linalg.norm(ext.raw)
        info["moment_agreement"] = float(abs(top @ kv))
        info["moment_rank_ratio"] = float(mw[-2] / mw[-1]) if mw[-1] > 0 else float("nan")
    alpha = alpha if reduced.monocular else 1.0
    # direct evaluation avoids the cancellation of the reduced form near zero
    cost = objective_value(graph, xs, ys, alpha)
    sol = CalibrationSolution(xs, ys, alpha, "sdp", cost, info)
    return sol, cert


def certify_candidate(graph: ProblemGraph, candidate: CalibrationSolution, opts: CertifierOptions | None = None):
    """Bound the suboptimality of an externally computed estimate.

    The dual bound comes from :func:`certifiable_rwhec`; the primal value is the
    objective at the candidate poses and scale.
    """
    opts = opts or CertifierOptions()
    sol, cert = certifiable_rwhec(graph, opts)
    alpha = candidate.alpha if graph.monocular else 1.0
    p = objective_value(graph, candidate.xs, candidate.ys, alpha)
    return certify(
        p,
        cert.d_star,
        cert.kernel_gap,
        sol.info["q_scale"],
        threshold=opts.tight_threshold,
        d_rigorous=cert.d_rigorous,
        min_eig=cert.min_eig,
    )
