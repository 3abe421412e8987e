"""Certifiably optimal robot-world and hand-eye calibration on measurement graphs."""

from .baseline import solve_linear
from .certifier import Certificate, CertifierOptions, certifiable_rwhec, certify, certify_candidate
from .conic import SolverOptions
from .dataset import load_dataset, read_dataset, save_dataset
from .graph import MeasurementPair, ProblemGraph, StateLayout
from .identifiability import IdentifiabilityReport, analyze
from .liegroups import Pose, exp_so3, log_so3, project_to_so3, sample_langevin
from .local_solver import LocalOptions, LocalState, refine, solve_local
from .ransac import RansacOptions, ransac_filter, ransac_graph
from .solution import CalibrationSolution

__version__ = "0.1.0"

__all__ = [
    "CalibrationSolution",
    "Certificate",
    "CertifierOptions",
    "IdentifiabilityReport",
    "LocalOptions",
    "LocalState",
    "MeasurementPair",
    "Pose",
    "ProblemGraph",
    "RansacOptions",
    "SolverOptions",
    "StateLayout",
    "analyze",
    "certifiable_rwhec",
    "certify",
    "certify_candidate",
    "exp_so3",
    "load_dataset",
    "log_so3",
    "project_to_so3",
    "ransac_filter",
    "ransac_graph",
    "read_dataset",
    "refine",
    "sample_langevin",
    "save_dataset",
    "solve_linear",
    "solve_local",
]
