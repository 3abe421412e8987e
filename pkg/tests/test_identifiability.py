import numpy as np
import pytest

from conftest import chain_graph, random_pose
from rwhec.baseline import rotation_kernel_dimension
from rwhec.certifier import certifiable_rwhec
from rwhec.graph import MeasurementPair, ProblemGraph
from rwhec.identifiability import (
    IDENTIFIABLE,
    ROTATION_ONLY,
    UNIDENTIFIABLE,
    analyze,
    axis_test,
    translation_test,
)
from rwhec.liegroups import Pose, exp_so3, random_rotation, rotation_angle

# Camera/tag edges of an 8-camera, 16-tag rig; every listed edge is expected to
# pass both single-edge tests.
RIG_EDGES = {
    8: [1, 2, 3, 4, 5, 6, 7],
    6: [1],
    2: [0, 1],
    22: [1, 2, 7],
    23: [0, 1],
    20: [0, 1, 6],
    1: [3, 6],
    19: [5, 6, 7],
    18: [0, 1, 6, 7],
    16: [0, 1, 2, 3, 4, 7],
    15: [0, 1, 3, 5],
    14: [0, 1, 2, 4, 5, 7],
    13: [2],
    12: [2, 4, 5],
    11: [3, 7],
    0: [0, 1, 2, 3, 5, 7],
}


def _pairs_about(axes, X, Y, rng):
    out = []
    for ax in axes:
        b = Pose(exp_so3(ax), rng.normal(size=3))
        out.append(MeasurementPair(Y @ b @ X.inverse(), b))
    return out


def _translation_full_rank(graph):
    """Rank of the stacked translation system, built independently of the library."""
    M, P = graph.num_x, graph.num_y
    rows = []
    for (j, k), pairs in graph.sorted_edges():
        for p in pairs:
            J = np.zeros((3, 3 * (M + P)))
            J[:, 3 * j : 3 * j + 3] = p.a.rotation
            J[:, 3 * (M + k) : 3 * (M + k) + 3] = -np.eye(3)
            rows.append(J)
    return np.linalg.matrix_rank(np.vstack(rows)) == 3 * (M + P)


class TestAxisTest:
    def test_single_axis_fails(self, rng):
        X, Y = random_pose(rng), random_pose(rng)
        pairs = _pairs_about([[0, 0, a] for a in (0.1, 0.5, 1.0, 1.5)], X, Y, rng)
        assert axis_test(pairs) is None

    def test_two_axes_pass(self, rng):
        X, Y = random_pose(rng), random_pose(rng)
        pairs = _pairs_about([[0, 0, 0.1], [0, 0, 0.8], [0.7, 0, 0]], X, Y, rng)
        trip = axis_test(pairs)
        assert trip is not None and len(set(trip)) == 3

    def test_too_few(self, rng):
        X, Y = random_pose(rng), random_pose(rng)
        assert axis_test(_pairs_about([[0, 0, 1], [1, 0, 0]], X, Y, rng)) is None

    def test_angle_threshold(self, rng):
        X, Y = random_pose(rng), random_pose(rng)
        pairs = _pairs_about([[0, 0, 0], [1e-5, 0, 0], [0, 1e-5, 0]], X, Y, rng)
        assert axis_test(pairs) is None
        assert axis_test(pairs, theta_min=1e-6) is not None


class TestTranslationTest:
    def test_generic_data_passes(self):
        passed = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            g, _, ys = chain_graph(rng, 1, 1, per_edge=3)
            passed += translation_test(g.edges[(0, 0)], ys[0].rotation)
        assert passed >= 99

    def test_two_pairs_fail(self, rng):
        g, _, ys = chain_graph(rng, 1, 1, per_edge=2)
        assert not translation_test(g.edges[(0, 0)], ys[0].rotation)

    def test_zero_b_translation_fails(self, rng):
        g = ProblemGraph(1, 1)
        for _ in range(5):
            g.add_measurement(0, 0, MeasurementPair(random_pose(rng), Pose(random_rotation(rng), np.zeros(3))))
        assert not translation_test(g.edges[(0, 0)], np.eye(3))


class TestAnalyze:
    def test_sphere_witness(self, sphere_noisy):
        rep = analyze(sphere_noisy[0])
        assert rep.verdict == IDENTIFIABLE
        assert rep.witness["edge"] == [0, 0] and len(rep.witness["triple"]) == 3

    def test_exact_single_sphere_fails_range_condition(self, sphere_noiseless):
        # Looking at the sphere center makes t_B(i) = -r R_B(i) e_z, so the
        # stacked R_Y t_B equals -R_A(i) (r R_X e_z) and lies in the range.
        g, truth = sphere_noiseless
        rep = analyze(g, y_rotations=[truth.ys[0].rotation])
        assert rep.informative_edges == [(0, 0)]
        assert rep.verdict == ROTATION_ONLY

    def test_two_radii_restore_range_condition(self):
        from dataclasses import replace

        from rwhec.simulation import SCENARIOS, synthesize_dataset

        g, truth = synthesize_dataset(replace(SCENARIOS["two_sphere_k125_s1cm"], noise_free=True))
        assert analyze(g, y_rotations=[truth.ys[0].rotation]).verdict == IDENTIFIABLE

    def test_rig_graph(self):
        rng = np.random.default_rng(7)
        tags = sorted(RIG_EDGES)
        edges = [(cam, tags.index(tag)) for tag in tags for cam in RIG_EDGES[tag]]
        g, _, _ = chain_graph(rng, 8, len(tags), per_edge=4, edges=edges)
        rep = analyze(g)
        assert rep.weakly_connected and rep.verdict == IDENTIFIABLE
        assert sorted(rep.translation_ok_edges) == sorted(edges)

    def test_planar_motion(self, rng):
        X, Y = random_pose(rng), random_pose(rng)
        g = ProblemGraph(1, 1)
        for p in _pairs_about([[0, 0, a] for a in np.linspace(0.1, 2, 8)], X, Y, rng):
            g.add_measurement(0, 0, p)
        assert analyze(g).verdict == UNIDENTIFIABLE

    def test_disconnected(self, rng):
        g, _, _ = chain_graph(rng, 2, 2, edges=[(0, 0), (1, 1)])
        rep = analyze(g)
        assert not rep.weakly_connected and rep.verdict == UNIDENTIFIABLE
        assert rep.witness is None

    def test_rotation_only(self, rng):
        g, _, ys = chain_graph(rng, 1, 1, per_edge=4)
        rep = analyze(g, y_rotations=[ys[0].rotation], range_tol=1e3)
        assert rep.verdict == ROTATION_ONLY

    def test_monocular_warning(self, rng):
        g, _, _ = chain_graph(rng, monocular=True)
        rep = analyze(g)
        assert rep.monocular_warning and rep.notes
        assert rep.to_dict()["verdict"] == IDENTIFIABLE

    def test_sound_on_random_graphs(self):
        # every identifiable verdict comes with a unique solution the SDP finds
        hits = 0
        for seed in range(30):
            rng = np.random.default_rng(1000 + seed)
            m, p = rng.integers(1, 4, size=2)
            edges = [(j, k) for j in range(m) for k in range(p) if rng.random() < 0.6] or [(0, 0)]
            g, xs, ys = chain_graph(rng, int(m), int(p), per_edge=int(rng.integers(2, 5)), edges=edges)
            rep = analyze(g)
            if rep.verdict == IDENTIFIABLE:
                hits += 1
                assert rotation_kernel_dimension(g) == 1
                assert _translation_full_rank(g)
                sol, _ = certifiable_rwhec(g)
                for est, ref in zip(sol.xs + sol.ys, xs + ys):
                    assert rotation_angle(est.rotation.T @ ref.rotation) < 1e-6
                    np.testing.assert_allclose(est.translation, ref.translation, atol=1e-6)
        assert hits >= 5


@pytest.mark.parametrize("n", [0, 1, 2])
def test_short_edges_never_witness(rng, n):
    g, _, ys = chain_graph(rng, 1, 1, per_edge=max(n, 1))
    pairs = g.edges[(0, 0)][:n]
    assert axis_test(pairs) is None
    assert not translation_test(pairs, ys[0].rotation)
