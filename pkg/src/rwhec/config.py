"""Versioned JSON configuration carrying every tolerance and solver option."""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .certifier import CertifierOptions
from .conic import SolverOptions
from . import liegroups
from .errors import ParseError
from .local_solver import LocalOptions
from .ransac import RansacOptions

CONFIG_VERSION = "rwhec-config/1"

DEFAULTS = {
    "version": CONFIG_VERSION,
    "liegroups": {"skew_tol": 1e-9, "ortho_tol": 1e-9, "near_pi_tol": 1e-6, "rank_tol": 1e-12},
    "solver": {"backend": "admm", "tolerance": 1e-12, "max_iterations": 1_000_000, "verbose": False},
    "certifier": {"tight_threshold": 1e-6, "polish": True, "strict_kernel": False},
    "local": {
        "max_iterations": 1000,
        "function_tolerance": 1e-15,
        "gradient_tolerance": 1e-12,
        "step_tolerance": 1e-12,
        "initial_damping": 1e-4,
        "residual": "geodesic",
        "exact_jacobians": True,
    },
    "identifiability": {"theta_min": 1e-3, "phi_min": 1e-3, "range_tol": 1e-6},
    "ransac": {
        "translation_threshold": 0.6,
        "rotation_threshold": 60.0,
        "min_inlier_fraction": 1.0 / 3.0,
        "iterations": 200,
        "scale_hint": 1.0,
    },
    "dataset": {"reject_tol": 1e-6, "reproject_tol": 1e-9},
    "simulation": {"langevin_convention": "trace", "gt_seed": 12345},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ParseError(f"unknown configuration key {where!r}", field=where)
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ParseError("expected a table", field=where)
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = val
    return out


class Config:
    """Configuration document with typed accessors for each component."""

    def __init__(self, data: dict | None = None):
        data = dict(data or {})
        version = data.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ParseError(f"unsupported configuration version {version!r}", field="version")
        self.data = _merge(DEFAULTS, data)

    @classmethod
    def load(cls, path) -> Config:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from None
        return cls(doc)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(**self.data["solver"])

    def certifier_options(self) -> CertifierOptions:
        c = self.data["certifier"]
        return CertifierOptions(self.solver_options(), c["polish"], c["strict_kernel"], c["tight_threshold"])

    def local_options(self) -> LocalOptions:
        return LocalOptions(**self.data["local"])

    def ransac_options(self) -> RansacOptions:
        return RansacOptions(**self.data["ransac"])

    def apply_global_tolerances(self) -> None:
        """Install the Lie-group tolerances as process-wide defaults."""
        liegroups.set_tolerances(**self.data["liegroups"])

    @property
    def identifiability(self) -> dict:
        return dict(self.data["identifiability"])
