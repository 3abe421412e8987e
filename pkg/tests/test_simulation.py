from dataclasses import replace

import numpy as np
import pytest

from rwhec.assembly import objective_value
from rwhec.baseline import solve_linear
from rwhec.certifier import certifiable_rwhec
from rwhec.errors import VariableMismatchError
from rwhec.identifiability import axis_test
from rwhec.liegroups import Pose, exp_so3, random_rotation
from rwhec.simulation import (
    SCENARIOS,
    ScenarioSpec,
    benchmark_csv,
    compute_errors,
    generate_sphere_trajectory,
    look_at_center,
    run_benchmark,
    synthesize_dataset,
)
from rwhec.solution import CalibrationSolution


def _trace_angle_deg(R):
    return np.degrees(np.arccos(np.clip((np.trace(R) - 1) / 2, -1, 1)))


class TestTrajectory:
    def test_north_pole_frame(self):
        R = look_at_center([0.0, 0.0, 1.0])
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(R[:, 2], [0, 0, -1], atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)

    def test_axes_point_inward_and_down(self):
        p = np.array([0.3, -0.5, 0.6])
        R = look_at_center(p)
        np.testing.assert_allclose(R[:, 2], -p / np.linalg.norm(p), atol=1e-12)
        assert R[2, 1] < 0  # y has a downward component
        np.testing.assert_allclose(np.cross(R[:, 1], R[:, 2]), R[:, 0], atol=1e-12)

    def test_two_radii(self):
        poses = generate_sphere_trajectory(SCENARIOS["two_sphere_k125_s1cm"])
        radii = {round(float(np.linalg.norm(p.translation)), 12) for p in poses}
        assert radii == {1.0, 0.3}
        assert len(poses) == 200

    def test_unit_sphere_and_witness(self, sphere_noiseless):
        poses = generate_sphere_trajectory(SCENARIOS["sphere_k125_s1cm"])
        assert len(poses) == 100
        np.testing.assert_allclose([np.linalg.norm(p.translation) for p in poses], 1.0, atol=1e-12)
        assert axis_test(sphere_noiseless[0].edges[(0, 0)]) is not None

    def test_wrong_kind(self):
        with pytest.raises(ValueError):
            generate_sphere_trajectory(SCENARIOS["multi_camera_k125_s1cm"])

    @pytest.mark.parametrize("kw", [{"num_poses": 2}, {"sigma": 0.0}, {"kind": "torus"}])
    def test_spec_validation(self, kw):
        with pytest.raises(ValueError):
            ScenarioSpec(**kw)


class TestSynthesis:
    @pytest.mark.parametrize("name", ["sphere_noiseless", "two_sphere_noiseless", "multi_camera_noiseless"])
    def test_chain_closes(self, name):
        g, truth = synthesize_dataset(SCENARIOS[name])
        for (j, k), pairs in g.sorted_edges():
            X, Y = truth.xs[j], truth.ys[k]
            for p in pairs:
                b = Pose(p.b.rotation, p.b.translation / truth.alpha)
                np.testing.assert_allclose((p.a @ X).as_matrix(), (Y @ b).as_matrix(), atol=1e-9)
        assert objective_value(g, truth.xs, truth.ys, truth.alpha) < 1e-18

    def test_multi_camera_layout(self, multi_camera_noiseless):
        g, truth = multi_camera_noiseless
        assert (g.num_x, g.num_y) == (4, 1)
        assert all(len(p) == 108 for _, p in g.sorted_edges())
        for cam in truth.xs:
            assert np.hypot(*cam.translation[:2]) == pytest.approx(2.0)

    def test_deterministic(self):
        a = synthesize_dataset(SCENARIOS["sphere_k125_s1cm"])[0]
        b = synthesize_dataset(SCENARIOS["sphere_k125_s1cm"])[0]
        assert a == b
        c = synthesize_dataset(replace(SCENARIOS["sphere_k125_s1cm"], seed=1))[0]
        assert a != c

    def test_translation_noise_std(self):
        spec = replace(SCENARIOS["sphere_k125_s1cm"], num_poses=10_000, sigma=0.02)
        g, truth = synthesize_dataset(spec)
        X, Y = truth.xs[0], truth.ys[0]
        res = np.array([p.b.translation - (Y.inverse() @ p.a @ X).translation for p in g.edges[(0, 0)]])
        assert res.std() == pytest.approx(0.02, rel=0.03)
        assert abs(res.mean()) < 3 * 0.02 / np.sqrt(res.size)

    def test_monocular_measurement_model(self):
        g, truth = synthesize_dataset(SCENARIOS["two_sphere_noiseless"])
        assert g.monocular and truth.alpha == 0.5
        p = g.edges[(0, 0)][0]
        metric = (truth.ys[0].inverse() @ p.a @ truth.xs[0]).translation
        np.testing.assert_allclose(p.b.translation / 0.5, metric, atol=1e-12)


class TestErrors:
    def test_zero_at_truth(self, sphere_noiseless):
        _, truth = sphere_noiseless
        m = compute_errors(CalibrationSolution(truth.xs, truth.ys), truth)
        assert m.summary() == {"t_x_mm": 0.0, "r_x_deg": 0.0, "t_y_mm": 0.0, "r_y_deg": 0.0}

    def test_small_rotation(self, sphere_noiseless):
        _, truth = sphere_noiseless
        X = truth.xs[0]
        bumped = Pose(X.rotation @ exp_so3([0, 0, 0.01]), X.translation)
        m = compute_errors(CalibrationSolution([bumped], truth.ys), truth)
        assert m.r_x[0] == pytest.approx(0.5729577951308232, rel=1e-9)

    def test_trace_formula_oracle(self, rng, sphere_noiseless):
        _, truth = sphere_noiseless
        Rs = [random_rotation(rng) for _ in range(2)]
        est = CalibrationSolution([Pose(Rs[0], np.zeros(3))], [Pose(Rs[1], np.ones(3))])
        m = compute_errors(est, truth)
        assert m.r_x[0] == pytest.approx(_trace_angle_deg(truth.xs[0].rotation.T @ Rs[0]), abs=1e-6)
        assert m.t_y[0] == pytest.approx(np.linalg.norm(truth.ys[0].translation - 1.0))

    def test_alpha_percent(self, sphere_noiseless):
        _, truth = sphere_noiseless
        m = compute_errors(CalibrationSolution(truth.xs, truth.ys, 1.01), truth, monocular=True)
        assert m.alpha_err == pytest.approx(1.0)

    def test_mismatch(self, multi_camera_noiseless, sphere_noiseless):
        with pytest.raises(VariableMismatchError):
            compute_errors(CalibrationSolution(sphere_noiseless[1].xs, sphere_noiseless[1].ys), multi_camera_noiseless[1])


class TestBenchmark:
    def test_noiseless_single_trial_exact(self):
        res = run_benchmark(SCENARIOS["sphere_noiseless"], 1, {"sdp": lambda g: certifiable_rwhec(g)[0], "linear": solve_linear})
        for row in res["rows"].values():
            assert row["n"] == 1
            assert row["t_x_mm"][0] < 1e-6 and row["r_x_deg"][0] < 1e-6

    def test_order_invariant(self):
        spec = SCENARIOS["sphere_k125_s1cm"]
        a = run_benchmark(spec, 2, {"linear": solve_linear, "again": solve_linear})
        b = run_benchmark(spec, 2, {"again": solve_linear, "linear": solve_linear})
        assert a["rows"]["linear"] == b["rows"]["linear"]
        assert a["rows"]["again"] == a["rows"]["linear"]

    def test_failures_recorded(self):
        def boom(g):
            raise RuntimeError("nope")

        res = run_benchmark(SCENARIOS["sphere_k125_s1cm"], 2, {"boom": boom, "linear": solve_linear})
        assert len(res["failures"]) == 2 and res["rows"]["boom"]["n"] == 0
        csv = benchmark_csv(res).splitlines()
        assert csv[0].startswith("method,n,t_x_mm_mean,t_x_mm_std")
        assert csv[2].startswith("linear,2,")

    def test_bad_trial_count(self):
        with pytest.raises(ValueError):
            run_benchmark(SCENARIOS["sphere_k125_s1cm"], 0, {})
