"""Solvers for linear matrix inequality problems of the form

    maximize  b^T lam   subject to   C + sum_i lam_i A_i  is PSD,

where the ``A_i`` are the rows of a sparse ``(m, n*n)`` matrix holding the
row-major vectorizations of symmetric matrices.  Every backend returns the
multipliers, the objective, residual diagnostics and, when available, the
PSD-cone dual matrix (the moment matrix ``X`` with ``<A_i, X> = -b_i``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import SolverFailure

log = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    backend: str = "admm"
    tolerance: float = 1e-9
    max_iterations: int = 1_000_000
    verbose: bool = False
    # ADMM penalty adaptation
    mu0: float = 1.0
    adapt_every: int = 25
    time_limit: float | None = None


@dataclass
class ConicResult:
    lam: np.ndarray
    objective: float
    moment: np.ndarray | None
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    converged: bool = False
    backend: str = ""


def _psd_split(V):
    w, Q = np.linalg.eigh(V)
    pos = np.clip(w, 0.0, None)
    return (Q * pos) @ Q.T


def solve_admm(C, A: sp.spmatrix, b, opts: SolverOptions) -> ConicResult:
    """Alternating-direction augmented Lagrangian method on the dual.

    The iteration is the classic one for standard-form SDPs: a least-squares
    update of the multipliers using the factored Gram matrix ``A A^T``, a
    projection onto the PSD cone, and a moment-matrix update.  The penalty is
    rebalanced from the ratio of primal and dual residuals.
    """
    import time

    n = C.shape[0]
    A = sp.csr_matrix(A)
    m = A.shape[0]
    # Standard form: min <C, X>, A(X) = bp, X PSD, with dual y = -lam.
    bp = -np.asarray(b, dtype=float)
    c = np.asarray(C, dtype=float).reshape(-1)
    gram = (A @ A.T).toarray()
    w, V = np.linalg.eigh(gram)
    keep = w > 1e-12 * w.max()
    gram_pinv = (V[:, keep] / w[keep]) @ V[:, keep].T
    AT = A.T.tocsr()

    X = np.zeros((n, n))
    S = np.zeros((n, n))
    mu = opts.mu0
    nb, nc = 1.0 + np.linalg.norm(bp), 1.0 + np.linalg.norm(c)
    t0 = time.perf_counter()
    pres = dres = np.inf
    it = 0
    hist_p, hist_d = 0.0, 0.0
    for it in range(1, opts.max_iterations + 1):
        x = X.reshape(-1)
        rhs = mu * (bp - A @ x) - A @ (S.reshape(-1) - c)
        y = gram_pinv @ rhs
        Aty = (AT @ y).reshape(n, n)
        Vm = C - Aty - mu * X
        Vm = 0.5 * (Vm + Vm.T)
        S = _psd_split(Vm)
        X = (S - Vm) / mu
        pres = np.linalg.norm(A @ X.reshape(-1) - bp) / nb
        dres = np.linalg.norm(C - Aty - S) / nc
        hist_p += pres
        hist_d += dres
        if max(pres, dres) < opts.tolerance:
            break
        if it % opts.adapt_every == 0:
            ratio = hist_p / max(hist_d, 1e-300)
            # the dual residual scales with mu, the primal one against it
            if ratio > 5.0:
                mu *= 2.0
            elif ratio < 0.2:
                mu /= 2.0
            hist_p = hist_d = 0.0
        if opts.verbose and it % 1000 == 0:
            log.info("admm it=%d pres=%.2e dres=%.2e mu=%.2e", it, pres, dres, mu)
        if opts.time_limit is not None and time.perf_counter() - t0 > opts.time_limit:
            break
    lam = -y
    converged = max(pres, dres) < opts.tolerance
    return ConicResult(
        lam,
        float(np.asarray(b) @ lam),
        X,
        {"primal": float(pres), "dual": float(dres), "mu": mu},
        it,
        converged,
        "admm",
    )


def _independent_rows(A, b, tol: float = 1e-10):
    """Row indices spanning the row space of ``A``, always keeping rows with ``b != 0``."""
    from scipy.linalg import qr

    order = np.concatenate([np.flatnonzero(b != 0), np.flatnonzero(b == 0)])
    _, R, piv = qr(A[order].T, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > tol * d[0]))
    keep = np.sort(order[piv[:rank]])
    if not set(np.flatnonzero(b != 0)) <= set(keep):
        raise SolverFailure("objective direction lies in the span of other constraints")
    return keep


def solve_cvxopt(C, A: sp.spmatrix, b, opts: SolverOptions) -> ConicResult:
    """Interior-point backend via ``cvxopt.solvers.sdp`` (optional dependency)."""
    try:
        import cvxopt
        from cvxopt import solvers
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise SolverFailure("cvxopt backend requested but cvxopt is not installed") from exc
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    # The interior-point KKT system needs linearly independent constraint
    # matrices; keep a pivoted-QR subset and give dropped multipliers zero.
    keep = _independent_rows(A.toarray(), b)
    A_red = A[keep]
    # cvxopt: minimize c^T x  s.t.  sum x_i G_i <= h  (column-major vec).
    # Here: minimize -b^T lam s.t. -sum lam_i A_i <= C.
    G = -A_red.T.toarray()
    solvers.options["show_progress"] = opts.verbose
    solvers.options["abstol"] = max(opts.tolerance, 1e-12)
    solvers.options["reltol"] = max(opts.tolerance, 1e-12)
    solvers.options["feastol"] = max(opts.tolerance, 1e-12)
    solvers.options["maxiters"] = min(opts.max_iterations, 500)
    sol = solvers.sdp(
        cvxopt.matrix(-b[keep]),
        Gs=[cvxopt.matrix(G)],
        hs=[cvxopt.matrix(np.asarray(C, dtype=float))],
    )
    if sol["x"] is None:
        raise SolverFailure(f"cvxopt failed: {sol['status']}", {"status": sol["status"]})
    lam = np.zeros(A.shape[0])
    lam[keep] = np.array(sol["x"]).ravel()
    Xm = np.array(sol["zs"][0])
    return ConicResult(
        lam,
        float(np.asarray(b) @ lam),
        0.5 * (Xm + Xm.T),
        {"primal": sol.get("primal infeasibility"), "dual": sol.get("dual infeasibility"), "gap": sol.get("gap")},
        int(sol.get("iterations", 0)),
        sol["status"] == "optimal",
        "cvxopt",
    )


BACKENDS = {"admm": solve_admm, "cvxopt": solve_cvxopt}


def solve_lmi(C, A, b, opts: SolverOptions | None = None) -> ConicResult:
    opts = opts or SolverOptions()
    try:
        fn = BACKENDS[opts.backend]
    except KeyError:
        raise SolverFailure(f"unknown solver backend {opts.backend!r}") from None
    return fn(np.asarray(C, dtype=float), A, b, opts)
