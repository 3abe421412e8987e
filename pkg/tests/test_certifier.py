from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain_graph
from rwhec.assembly import build_cost_blocks
from rwhec.certifier import (
    KERNEL_GAP_TIGHT,
    PER_ROTATION,
    CertifierOptions,
    DualVariables,
    build_z,
    certifiable_rwhec,
    certify,
    certify_candidate,
    extract_solution,
    kernel_gap,
    solve_dual,
)
from rwhec.conic import SolverOptions
from rwhec.errors import DimensionMismatchError, KernelAmbiguousError
from rwhec.liegroups import random_rotation, rotation_angle
from rwhec.reduction import schur_reduce
from rwhec.solution import CalibrationSolution


def _reduced(graph):
    return schur_reduce(build_cost_blocks(graph))


def _homogenized(rots, s=1.0):
    return np.append(np.concatenate([R.reshape(-1, order="F") for R in rots]), s)


def _rot_err_deg(A, B):
    return np.degrees(rotation_angle(A.T @ B))


class TestCertificateMatrix:
    def test_zero_multipliers_give_padded_cost(self, rng):
        red = _reduced(chain_graph(rng, 1, 1, noise=0.05)[0])
        Z = build_z(red, DualVariables.zeros(2))
        np.testing.assert_array_equal(Z, red.padded())

    def test_size(self, rng):
        red = _reduced(chain_graph(rng)[0])
        assert build_z(red, DualVariables.zeros(2)).shape == (19, 19)

    def test_wrong_block_count(self, rng):
        red = _reduced(chain_graph(rng)[0])
        with pytest.raises(DimensionMismatchError):
            build_z(red, DualVariables.zeros(3))

    def test_vector_round_trip(self, rng):
        v = rng.normal(size=2 * PER_ROTATION + 1)
        assert np.array_equal(DualVariables.from_vector(v).to_vector(), v)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, -1.0]))
    def test_constraints_vanish_on_rotations(self, seed, s):
        # x^T Z x differs from x^T Q' x only through -lambda_s on any feasible point
        rng = np.random.default_rng(seed)
        g, _, _ = chain_graph(rng, 1, 2, noise=0.05)
        red = _reduced(g)
        lam = DualVariables.from_vector(rng.normal(size=3 * PER_ROTATION + 1))
        Z = build_z(red, lam)
        rots = [random_rotation(rng) for _ in range(3)]
        x = _homogenized([s * R for R in rots], s)  # (-R, -1) is the same point up to sign
        Qp = red.padded()
        assert x @ Z @ x == pytest.approx(x @ Qp @ x - lam.lambda_s, rel=1e-10, abs=1e-9)
        np.testing.assert_allclose(Z, Z.T, atol=0)

    def test_constraints_detect_reflection(self, rng):
        red = _reduced(chain_graph(rng)[0])
        lam = DualVariables.from_vector(rng.normal(size=2 * PER_ROTATION + 1))
        Z0 = build_z(red, DualVariables.zeros(2))
        bad = [np.diag([1.0, 1.0, -1.0]), np.eye(3)]
        x = _homogenized(bad)
        # handedness terms no longer cancel for an improper block
        assert abs(x @ build_z(red, lam) @ x - (x @ Z0 @ x - lam.lambda_s)) > 1e-6


class TestExtraction:
    @pytest.mark.parametrize("eta", [3.0, -0.2])
    def test_rank_one_matrix(self, rng, eta):
        rots = [random_rotation(rng) for _ in range(3)]
        v = eta * _homogenized(rots)
        Z = np.eye(v.size) - np.outer(v, v) / (v @ v)
        ext = extract_solution(Z, 3)
        for R, Rh in zip(rots, ext.rotations):
            np.testing.assert_allclose(Rh, R, atol=1e-12)
        assert ext.kernel_gap > 1e12

    def test_strict_rejects_two_dimensional_kernel(self, rng):
        a = _homogenized([random_rotation(rng) for _ in range(2)])
        b = _homogenized([random_rotation(rng) for _ in range(2)])
        Qb, _ = np.linalg.qr(np.stack([a, b], axis=1))
        Z = np.eye(a.size) - Qb @ Qb.T
        with pytest.raises(KernelAmbiguousError):
            extract_solution(Z, 2, strict=True)

    def test_kernel_gap(self):
        assert kernel_gap([1e-8, 1.0, 2.0]) == pytest.approx(1e8)
        assert kernel_gap([0.0, 1.0]) == float("inf")


class TestCertify:
    def test_relative(self):
        c = certify(10.0 * (1 + 1e-8), 10.0)
        assert c.relative and c.tight
        assert c.rho_hat == pytest.approx(1e-8)

    def test_loose(self):
        c = certify(11.0, 10.0)
        assert not c.tight and c.rho_hat == pytest.approx(0.1)

    def test_degenerate_dual(self):
        c = certify(1e-14, 0.0, scale=5.0)
        assert not c.relative and c.tight
        assert c.rho_hat == pytest.approx(2e-15)

    def test_small_kernel_gap_not_tight(self):
        assert not certify(10.0, 10.0, kernel_gap=KERNEL_GAP_TIGHT / 2).tight

    def test_dict_is_plain(self):
        d = certify(np.float64(1.0), np.float64(1.0), d_rigorous=np.float64(0.9)).to_dict()
        assert all(type(v) in (float, bool) or v is None for v in d.values())


class TestEndToEnd:
    def test_noiseless_recovers_truth(self, sphere_noiseless):
        g, truth = sphere_noiseless
        sol, cert = certifiable_rwhec(g)
        assert cert.tight
        assert _rot_err_deg(sol.xs[0].rotation, truth.xs[0].rotation) < 1e-6
        assert np.linalg.norm(sol.xs[0].translation - truth.xs[0].translation) < 1e-6

    def test_noisy_duality_invariants(self, sphere_noisy):
        g, _ = sphere_noisy
        sol, cert = certifiable_rwhec(g)
        scale = sol.info["q_scale"]
        assert cert.p >= cert.d_star - 1e-9 * scale
        assert cert.d_rigorous <= cert.d_star + 1e-12 * scale
        assert cert.min_eig >= -1e-9 * scale
        assert cert.tight and abs(cert.rho_hat) < 1e-6

    def test_complementarity(self, rng):
        g, _, _ = chain_graph(rng, 2, 2, per_edge=8, noise=0.01)
        red = _reduced(g)
        sol, cert = certifiable_rwhec(g)
        x = _homogenized([p.rotation for p in sol.xs + sol.ys])
        dual = solve_dual(red, SolverOptions(tolerance=1e-12))
        Z = build_z(red, dual.lam)
        assert x @ Z @ x <= 1e-6 * np.linalg.norm(Z)

    def test_scale_homogeneity(self, rng):
        g, _, _ = chain_graph(rng, 1, 1, noise=0.02)
        red = _reduced(g)
        big = replace(red, q_prime=10.0 * red.q_prime)
        d1 = solve_dual(red, SolverOptions(tolerance=1e-12)).d_star
        d2 = solve_dual(big, SolverOptions(tolerance=1e-12)).d_star
        assert d2 == pytest.approx(10.0 * d1, rel=1e-6)

    def test_monocular_and_standard_agree_at_unit_scale(self, rng):
        g, xs, ys = chain_graph(rng, 2, 1, per_edge=8)
        h = g.copy()
        h.monocular = True
        s1, _ = certifiable_rwhec(g)
        s2, c2 = certifiable_rwhec(h)
        assert s2.alpha == pytest.approx(1.0, rel=1e-8)
        for a, b in zip(s1.xs + s1.ys, s2.xs + s2.ys):
            assert _rot_err_deg(a.rotation, b.rotation) < 1e-6
            np.testing.assert_allclose(a.translation, b.translation, atol=1e-8)

    def test_backends_agree(self, rng):
        pytest.importorskip("cvxopt")
        g, _, _ = chain_graph(rng, 1, 2, noise=0.02)
        opts = CertifierOptions(solver=SolverOptions(backend="cvxopt", tolerance=1e-9))
        s_admm, c_admm = certifiable_rwhec(g)
        s_cvx, c_cvx = certifiable_rwhec(g, opts)
        assert c_cvx.d_star == pytest.approx(c_admm.d_star, rel=1e-6)
        for a, b in zip(s_admm.xs + s_admm.ys, s_cvx.xs + s_cvx.ys):
            assert _rot_err_deg(a.rotation, b.rotation) < 1e-4

    def test_candidate_certificate(self, sphere_noisy):
        g, truth = sphere_noisy
        sol, cert = certifiable_rwhec(g)
        same = certify_candidate(g, sol)
        assert same.rho_hat == pytest.approx(cert.rho_hat, abs=1e-9)
        worse = certify_candidate(g, CalibrationSolution(truth.xs, truth.ys))
        assert worse.p >= cert.d_star and worse.rho_hat >= same.rho_hat
