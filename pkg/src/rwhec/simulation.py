"""Synthetic calibration scenes, noise injection, error metrics and benchmarks."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import VariableMismatchError
from .graph import MeasurementPair, ProblemGraph
from .liegroups import Pose, exp_so3, random_rotation, rotation_angle, sample_langevin
from .solution import CalibrationSolution


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one synthetic experiment.

    ``num_poses`` counts poses per sphere for the sphere scenes and robot poses
    for the multi-camera scene.  ``gt_seed`` fixes the ground-truth extrinsics of
    the experiment family while ``seed`` drives trajectory jitter and noise.
    ``noise_free`` skips noise injection entirely.
    """

    kind: str = "sphere"
    num_poses: int = 100
    sigma: float = 0.01
    kappa: float = 125.0
    alpha: float = 1.0
    seed: int = 0
    gt_seed: int = 12345
    noise_free: bool = False
    num_cameras: int = 4
    radii: tuple = (1.0, 0.3)
    langevin_convention: str = "trace"

    def __post_init__(self):
        if self.kind not in ("sphere", "two_sphere", "multi_camera"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.num_poses < 3:
            raise ValueError("num_poses must be at least 3")
        if not (self.sigma > 0 and self.kappa > 0):
            raise ValueError("sigma and kappa must be positive")

    @property
    def monocular(self) -> bool:
        return self.alpha != 1.0 or self.kind == "two_sphere"


SCENARIOS = {
    "sphere_k125_s1cm": ScenarioSpec("sphere", 100, 0.01, 125.0),
    "sphere_noiseless": ScenarioSpec("sphere", 100, 0.01, 125.0, noise_free=True),
    "two_sphere_k125_s1cm": ScenarioSpec("two_sphere", 100, 0.01, 125.0, alpha=0.5),
    "two_sphere_noiseless": ScenarioSpec("two_sphere", 100, 0.01, 125.0, alpha=0.5, noise_free=True),
    "multi_camera_k125_s1cm": ScenarioSpec("multi_camera", 108, 0.01, 125.0),
    "multi_camera_noiseless": ScenarioSpec("multi_camera", 108, 0.01, 125.0, noise_free=True),
}


@dataclass
class GroundTruth:
    xs: list
    ys: list
    alpha: float = 1.0


def look_at_center(position) -> np.ndarray:
    """Camera rotation whose z axis points from ``position`` to the origin.

    The y axis points as closely as possible toward the south pole (-z of the
    target frame) and x completes a right-handed frame.
    """
    p = np.asarray(position, dtype=float)
    z = -p / np.linalg.norm(p)
    down = np.array([0.0, 0.0, -1.0])
    y = down - (down @ z) * z
    if np.linalg.norm(y) < 1e-9:
        # at a pole the "down" direction is along the optical axis
        ref = np.array([0.0, 1.0, 0.0])
        y = ref - (ref @ z) * z
    y /= np.linalg.norm(y)
    x = np.cross(y, z)
    return np.column_stack([x, y, z])


# Polar band of the spiral, measured from the pole above the target, in radians.
SPIRAL_POLAR = (0.38, 0.82)
SPIRAL_TURNS = 4.0


def _spiral(radius: float, n: int, turns: float = SPIRAL_TURNS, polar=SPIRAL_POLAR) -> list:
    out = []
    for i in range(n):
        f = i / max(n - 1, 1)
        phi = polar[0] + f * (polar[1] - polar[0])
        lam = 2 * np.pi * turns * f
        p = radius * np.array([np.sin(phi) * np.cos(lam), np.sin(phi) * np.sin(lam), np.cos(phi)])
        out.append(Pose(look_at_center(p), p))
    return out


def generate_sphere_trajectory(spec: ScenarioSpec) -> list:
    """Camera poses in the target frame on one or two concentric spheres."""
    if spec.kind not in ("sphere", "two_sphere"):
        raise ValueError("sphere trajectories need a sphere scenario")
    radii = spec.radii if spec.kind == "two_sphere" else spec.radii[:1]
    poses = []
    for r in radii:
        poses += _spiral(r, spec.num_poses)
    return poses


def random_ground_truth_pose(rng: np.random.Generator) -> Pose:
    return Pose(random_rotation(rng), rng.uniform(-1.0, 1.0, 3))


# Multi-camera scene: cameras on a horizontal circle above the workspace, and
# target poses tilted up to TARGET_TILT about horizontal axes with any yaw.
CAMERA_RADIUS = 2.0
CAMERA_HEIGHT = 3.0
TARGET_TILT = 1.4
TARGET_OFFSET = 0.2
MIN_VIEW_COSINE = 0.1


def _camera_ring(n: int, radius: float = CAMERA_RADIUS, height: float = CAMERA_HEIGHT) -> list:
    cams = []
    for j in range(n):
        ang = 2 * np.pi * j / n
        p = np.array([radius * np.cos(ang), radius * np.sin(ang), height])
        cams.append(Pose(look_at_center(p), p))
    return cams


def _visible_target_poses(n: int, cams: list, rng: np.random.Generator) -> list:
    """Target poses near the workspace center facing every camera."""
    out = []
    while len(out) < n:
        R = exp_so3(np.array([0.0, 0.0, rng.uniform(-np.pi, np.pi)])) @ exp_so3(
            rng.uniform(-TARGET_TILT, TARGET_TILT, 3) * np.array([1.0, 1.0, 0.0])
        )
        t = rng.uniform(-TARGET_OFFSET, TARGET_OFFSET, 3)
        normal = R[:, 2]
        ok = all(normal @ (c.translation - t) / np.linalg.norm(c.translation - t) > MIN_VIEW_COSINE for c in cams)
        if ok:
            out.append(Pose(R, t))
    return out


def _noisy_b(b: Pose, spec: ScenarioSpec, rng: np.random.Generator) -> Pose:
    t = b.translation
    R = b.rotation
    if not spec.noise_free:
        t = t + rng.normal(scale=spec.sigma, size=3)
        R = sample_langevin(R, spec.kappa, rng, convention=spec.langevin_convention)
    return Pose(R, spec.alpha * t)


def synthesize_dataset(spec: ScenarioSpec):
    """Build a measurement graph and its ground truth.

    ``A`` is noiseless and computed by closing the chain ``A = Y B X^-1``.  ``B``
    gets Gaussian translation noise, then the monocular scale, and a right
    Langevin rotation perturbation.
    """
    gt_rng = np.random.default_rng(spec.gt_seed)
    rng = np.random.default_rng(spec.seed)
    if spec.kind in ("sphere", "two_sphere"):
        X = random_ground_truth_pose(gt_rng)
        Y = random_ground_truth_pose(gt_rng)
        graph = ProblemGraph(1, 1, monocular=spec.monocular)
        Xi = X.inverse()
        for b in generate_sphere_trajectory(spec):
            a = Y @ b @ Xi
            graph.add_measurement(0, 0, MeasurementPair(a, _noisy_b(b, spec, rng), spec.sigma, spec.kappa))
        return graph, GroundTruth([X], [Y], spec.alpha)

    # Multi-camera: X_j places camera j in the robot base frame, Y mounts the
    # target on the hand, A is the inverse forward kinematics and B the camera
    # pose seen from the target.
    cams = _camera_ring(spec.num_cameras)
    Y = random_ground_truth_pose(gt_rng)
    Yi = Y.inverse()
    graph = ProblemGraph(spec.num_cameras, 1, monocular=spec.monocular)
    targets = _visible_target_poses(spec.num_poses, cams, rng)
    for tgt in targets:
        a = (tgt @ Yi).inverse()
        for j, cam in enumerate(cams):
            b = Yi @ a @ cam
            graph.add_measurement(j, 0, MeasurementPair(a, _noisy_b(b, spec, rng), spec.sigma, spec.kappa))
    return graph, GroundTruth(cams, [Y], spec.alpha)


@dataclass
class ErrorMetrics:
    """Per-variable errors; translations in meters, rotations in degrees."""

    t_x: list
    r_x: list
    t_y: list
    r_y: list
    alpha_err: float | None = None

    def summary(self) -> dict:
        out = {
            "t_x_mm": 1e3 * float(np.mean(self.t_x)),
            "r_x_deg": float(np.mean(self.r_x)),
            "t_y_mm": 1e3 * float(np.mean(self.t_y)),
            "r_y_deg": float(np.mean(self.r_y)),
        }
        if self.alpha_err is not None:
            out["alpha_err_pct"] = self.alpha_err
        return out


def compute_errors(solution: CalibrationSolution, truth: GroundTruth, monocular: bool | None = None) -> ErrorMetrics:
    if len(solution.xs) != len(truth.xs) or len(solution.ys) != len(truth.ys):
        raise VariableMismatchError(
            f"solution has {len(solution.xs)}/{len(solution.ys)} X/Y variables, "
            f"ground truth {len(truth.xs)}/{len(truth.ys)}"
        )

    def errs(est, ref):
        t = [float(np.linalg.norm(e.translation - r.translation)) for e, r in zip(est, ref)]
        R = [float(np.degrees(rotation_angle(r.rotation.T @ e.rotation))) for e, r in zip(est, ref)]
        return t, R

    tx, rx = errs(solution.xs, truth.xs)
    ty, ry = errs(solution.ys, truth.ys)
    if monocular is None:
        monocular = truth.alpha != 1.0
    a_err = 100.0 * abs(solution.alpha - truth.alpha) / abs(truth.alpha) if monocular else None
    return ErrorMetrics(tx, rx, ty, ry, a_err)


METRIC_KEYS = ("t_x_mm", "r_x_deg", "t_y_mm", "r_y_deg", "alpha_err_pct")


def run_benchmark(spec: ScenarioSpec, num_trials: int, methods: dict, seed0: int = 0) -> dict:
    """Run ``num_trials`` seeded trials of every method.

    Args:
        spec: Scenario template; the trial index is added to ``seed0`` to form
            each trial's ``seed``.
        methods: Mapping from method name to a callable ``graph -> CalibrationSolution``.

    Returns:
        ``{"rows": {method: {metric: (mean, std)}}, "trials": [...], "failures": [...]}``
    """
    if num_trials < 1:
        raise ValueError("num_trials must be >= 1")
    trials, failures = [], []
    for i in range(num_trials):
        tspec = replace(spec, seed=seed0 + i)
        graph, truth = synthesize_dataset(tspec)
        for name, fn in methods.items():
            t0 = time.perf_counter()
            try:
                sol = fn(graph)
            except Exception as exc:  # recorded, never fatal
                failures.append({"trial": i, "method": name, "error": f"{type(exc).__name__}: {exc}"})
                continue
            rec = compute_errors(sol, truth, tspec.monocular).summary()
            rec.update(trial=i, method=name, seconds=time.perf_counter() - t0)
            rec.update({k: v for k, v in sol.info.items() if isinstance(v, (int, float, bool))})
            trials.append(rec)
    rows = {}
    for name in methods:
        recs = sorted((r for r in trials if r["method"] == name), key=lambda r: r["trial"])
        row = {}
        for key in METRIC_KEYS:
            vals = [r[key] for r in recs if key in r]
            if vals:
                row[key] = (float(np.mean(vals)), float(np.std(vals)))
        row["n"] = len(recs)
        rows[name] = row
    return {"rows": rows, "trials": trials, "failures": failures}


def benchmark_csv(result: dict) -> str:
    lines = ["method,n," + ",".join(f"{k}_mean,{k}_std" for k in METRIC_KEYS)]
    for name, row in result["rows"].items():
        cells = [name, str(row["n"])]
        for k in METRIC_KEYS:
            if k in row:
                cells += [f"{row[k][0]:.6g}", f"{row[k][1]:.6g}"]
            else:
                cells += ["", ""]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
