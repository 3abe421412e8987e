"""Rotation and rigid-pose primitives.

Rotations are plain ``(3, 3)`` float arrays and poses are :class:`Pose`
values.  Rotation vectorization everywhere in the package is column-major,
i.e. ``vec(R) == R.reshape(-1, order="F")``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NearPiAngleError, NotSkewError, RankDeficientError

# Tolerances; the config file may override them.
SKEW_TOL = 1e-9
ORTHO_TOL = 1e-9
NEAR_PI_TOL = 1e-6
RANK_TOL = 1e-12
_SMALL_ANGLE = 1e-6


def hat(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(S, tol: float | None = None) -> np.ndarray:
    tol = SKEW_TOL if tol is None else tol
    S = np.asarray(S, dtype=float)
    if np.linalg.norm(S + S.T) > tol:
        raise NotSkewError(f"matrix is not skew-symmetric (|S + S^T| = {np.linalg.norm(S + S.T):.3e})")
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def exp_so3(v) -> np.ndarray:
    """Rodrigues formula for the exponential map of so(3)."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v)
    K = hat(v)
    if theta < _SMALL_ANGLE:
        # second-order Taylor terms are exact to double precision here
        return np.eye(3) + K + 0.5 * K @ K
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * K + b * K @ K


def rotation_angle(R) -> float:
    """Geodesic angle of ``R`` from the identity, robust over [0, pi]."""
    R = np.asarray(R, dtype=float)
    s = 0.5 * np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    c = 0.5 * (np.trace(R) - 1.0)
    return float(np.arctan2(s, c))


def log_so3(R, near_pi_tol: float | None = None) -> np.ndarray:
    """Inverse of :func:`exp_so3` on rotations with angle below ``pi - near_pi_tol``."""
    near_pi_tol = NEAR_PI_TOL if near_pi_tol is None else near_pi_tol
    R = np.asarray(R, dtype=float)
    theta = rotation_angle(R)
    if np.pi - theta < near_pi_tol:
        raise NearPiAngleError(f"rotation angle {theta:.9f} is within {near_pi_tol:g} of pi")
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < _SMALL_ANGLE:
        return 0.5 * w
    if theta < 0.5 * np.pi:
        return theta / (2.0 * np.sin(theta)) * w
    # Near pi the antisymmetric part vanishes; read the axis off the
    # symmetric part and take only its sign from w.
    c = np.cos(theta)
    B = (0.5 * (R + R.T) - c * np.eye(3)) / (1.0 - c)
    i = int(np.argmax(np.diag(B)))
    axis = B[:, i] / np.sqrt(B[i, i])
    if axis @ w < 0:
        axis = -axis
    return theta * axis


def right_jacobian_inv(phi) -> np.ndarray:
    """Inverse right Jacobian of SO(3): ``log(exp(phi) exp(d)) ~ phi + Jr^-1(phi) d``."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    K = hat(phi)
    if theta < 1e-4:
        return np.eye(3) + 0.5 * K + (1.0 / 12.0) * K @ K
    coef = 1.0 / theta**2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) + 0.5 * K + coef * K @ K


def project_to_so3(M, rank_tol: float | None = None) -> np.ndarray:
    """Closest rotation to ``M`` in Frobenius norm (orthogonal Procrustes)."""
    rank_tol = RANK_TOL if rank_tol is None else rank_tol
    M = np.asarray(M, dtype=float)
    U, s, Vt = np.linalg.svd(M)
    if s[-1] < rank_tol * s[0] or s[0] == 0.0:
        raise RankDeficientError(f"cannot project rank-deficient matrix (singular values {s})")
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(U @ Vt))
    return U @ D @ Vt


def is_rotation(R, tol: float | None = None) -> bool:
    tol = ORTHO_TOL if tol is None else tol
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(
        np.max(np.abs(R.T @ R - np.eye(3))) <= tol and abs(np.linalg.det(R) - 1.0) <= tol
    )


def geodesic_distance(R1, R2) -> float:
    """Angle in radians of ``R1^T R2``."""
    return rotation_angle(np.asarray(R1).T @ np.asarray(R2))


def set_tolerances(skew_tol=None, ortho_tol=None, near_pi_tol=None, rank_tol=None) -> None:
    """Override the module-wide default tolerances; ``None`` keeps the current value."""
    global SKEW_TOL, ORTHO_TOL, NEAR_PI_TOL, RANK_TOL
    if skew_tol is not None:
        SKEW_TOL = float(skew_tol)
    if ortho_tol is not None:
        ORTHO_TOL = float(ortho_tol)
    if near_pi_tol is not None:
        NEAR_PI_TOL = float(near_pi_tol)
    if rank_tol is not None:
        RANK_TOL = float(rank_tol)


def _langevin_angles(kappa: float, n: int, rng: np.random.Generator) -> np.ndarray:
    # Target angle density on [0, pi]: exp(2 kappa cos t) (1 - cos t).
    # Proposal t^2 exp(-k t^2) with k = 4 kappa / pi^2 dominates it up to the
    # constant 1/2 because 1 - cos t >= 2 t^2 / pi^2 on [0, pi].
    k = 4.0 * kappa / np.pi**2
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(2 * (n - filled), 64)
        if k > 1.0:
            t = np.linalg.norm(rng.normal(scale=np.sqrt(0.5 / k), size=(m, 3)), axis=1)
            log_ratio = -2.0 * kappa * (1.0 - np.cos(t)) + k * t**2
        else:
            t = np.pi * rng.random(m) ** (1.0 / 3.0)
            log_ratio = -2.0 * kappa * (1.0 - np.cos(t))
        with np.errstate(divide="ignore", invalid="ignore"):
            shape = np.where(t > 0, 2.0 * (1.0 - np.cos(t)) / t**2, 1.0)
        accept = (t <= np.pi) & (rng.random(m) < shape * np.exp(np.minimum(log_ratio, 0.0)))
        take = t[accept][: n - filled]
        out[filled : filled + take.size] = take
        filled += take.size
    return out


def sample_langevin(
    mode,
    kappa: float,
    rng: np.random.Generator,
    size: int | None = None,
    convention: str = "angular",
) -> np.ndarray:
    """Draw from an isotropic Langevin distribution centred at ``mode``.

    The result is ``mode @ E`` with ``E`` drawn exactly (rejection sampling of
    the angle, uniform axis) from a density proportional to ``exp(c * tr(E))``
    with respect to Haar measure.

    Args:
        mode: Mode of the distribution.
        kappa: Concentration, ``kappa >= 0``; zero gives the Haar distribution.
        rng: Source of randomness.
        size: Number of samples; ``None`` returns a single ``(3, 3)`` matrix.
        convention: ``"angular"`` uses ``c = kappa / 2`` so that each component
            of ``log(E)`` has standard deviation ``1 / sqrt(kappa)`` for large
            ``kappa``; ``"trace"`` uses ``c = kappa``, the density under which
            ``-(kappa / 2) |R1 - R2|_F^2`` is the log-likelihood.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if convention == "angular":
        c = 0.5 * float(kappa)
    elif convention == "trace":
        c = float(kappa)
    else:
        raise ValueError(f"unknown Langevin convention {convention!r}")
    n = 1 if size is None else int(size)
    theta = _langevin_angles(c, n, rng)
    axis = rng.normal(size=(n, 3))
    axis /= np.linalg.norm(axis, axis=1, keepdims=True)
    E = np.stack([exp_so3(t * a) for t, a in zip(theta, axis)])
    out = np.asarray(mode, dtype=float) @ E
    return out[0] if size is None else out


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform rotation."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass(frozen=True)
class Pose:
    """Rigid transform ``T = [[R, t], [0, 1]]``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> Pose:
        return cls()

    @classmethod
    def from_matrix(cls, T) -> Pose:
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> Pose:
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def __matmul__(self, other: Pose) -> Pose:
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def is_valid(self, tol: float = ORTHO_TOL) -> bool:
        return is_rotation(self.rotation, tol) and bool(np.all(np.isfinite(self.translation)))

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))
