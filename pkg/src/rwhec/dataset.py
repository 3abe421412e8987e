"""JSON dataset files.

Layout::

    {
      "version": "rwhec-dataset/1",
      "mode": "standard" | "monocular",
      "nodes": {"X": [names...], "Y": [names...]},
      "edges": [{"x_id": name, "y_id": name,
                 "pairs": [{"A": 4x4, "B": 4x4, "sigma": s, "kappa": k}, ...]}],
      "ground_truth": {"X": [4x4...], "Y": [4x4...], "alpha": a}   # optional
    }

Matrices are nested row-major lists.  Floats are written with Python's
shortest round-trip representation, so save followed by load is bit-exact.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .graph import MeasurementPair, ProblemGraph
from .liegroups import Pose, project_to_so3

log = logging.getLogger(__name__)

FORMAT_VERSION = "rwhec-dataset/1"
REJECT_TOL = 1e-6
REPROJECT_TOL = 1e-9


@dataclass
class DatasetFile:
    graph: ProblemGraph
    ground_truth: object | None = None  # simulation.GroundTruth


def _rotation_residual(R) -> float:
    return max(float(np.abs(R.T @ R - np.eye(3)).max()), abs(float(np.linalg.det(R)) - 1.0))


def _pose(obj, where: str, bad: list, fixed: list, tols=(REJECT_TOL, REPROJECT_TOL)) -> Pose | None:
    try:
        T = np.array(obj, dtype=float)
    except (TypeError, ValueError):
        raise ParseError("matrix entries must be numbers", field=where) from None
    if T.shape != (4, 4):
        raise ParseError(f"expected a 4x4 matrix, got shape {T.shape}", field=where)
    if not np.all(np.isfinite(T)):
        bad.append(where)
        return None
    if not np.array_equal(T[3], [0.0, 0.0, 0.0, 1.0]):
        bad.append(where)
        return None
    R = T[:3, :3]
    res = _rotation_residual(R)
    if res > tols[0]:
        bad.append(where)
        return None
    if res > tols[1]:
        fixed.append(where)
        R = project_to_so3(R)
    return Pose(R, T[:3, 3])


def _require(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ParseError(f"missing key {key!r}", field=f"{where}.{key}" if where else key)
    return d[key]


def parse_dataset(doc: dict, reject_tol: float = REJECT_TOL, reproject_tol: float = REPROJECT_TOL) -> DatasetFile:
    """Build a graph from an already decoded JSON document."""
    tols = (reject_tol, reproject_tol)
    version = _require(doc, "version", "")
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported version {version!r}", field="version")
    mode = _require(doc, "mode", "")
    if mode not in ("standard", "monocular"):
        raise ParseError(f"mode must be 'standard' or 'monocular', got {mode!r}", field="mode")
    nodes = _require(doc, "nodes", "")
    xn = [str(n) for n in _require(nodes, "X", "nodes")]
    yn = [str(n) for n in _require(nodes, "Y", "nodes")]
    if len(set(xn)) != len(xn) or len(set(yn)) != len(yn):
        raise ParseError("node names must be unique", field="nodes")
    if not xn or not yn:
        raise ParseError("need at least one X and one Y node", field="nodes")
    xi = {n: i for i, n in enumerate(xn)}
    yi = {n: i for i, n in enumerate(yn)}
    graph = ProblemGraph(len(xn), len(yn), monocular=(mode == "monocular"), x_names=xn, y_names=yn)
    bad, fixed = [], []
    for e, edge in enumerate(_require(doc, "edges", "")):
        where = f"edges[{e}]"
        xid, yid = _require(edge, "x_id", where), _require(edge, "y_id", where)
        if xid not in xi:
            raise ParseError(f"unknown X node {xid!r}", field=f"{where}.x_id")
        if yid not in yi:
            raise ParseError(f"unknown Y node {yid!r}", field=f"{where}.y_id")
        for i, p in enumerate(_require(edge, "pairs", where)):
            pw = f"{where}.pairs[{i}]"
            a = _pose(_require(p, "A", pw), f"{pw}.A", bad, fixed, tols)
            b = _pose(_require(p, "B", pw), f"{pw}.B", bad, fixed, tols)
            try:
                sigma = float(p.get("sigma", 1.0))
                kappa = float(p.get("kappa", 1.0))
            except (TypeError, ValueError):
                raise ParseError("sigma and kappa must be numbers", field=pw) from None
            if a is None or b is None:
                continue
            try:
                pair = MeasurementPair(a, b, sigma, kappa)
            except ValidationError:
                bad.append(pw)
                continue
            graph.add_measurement(xi[xid], yi[yid], pair)
    if bad:
        raise ValidationError(f"{len(bad)} invalid pose(s) or noise parameters", bad)
    if fixed:
        log.warning("re-projected %d rotation(s) onto SO(3): %s", len(fixed), ", ".join(fixed[:5]))
    truth = None
    if "ground_truth" in doc:
        from .simulation import GroundTruth

        gt = doc["ground_truth"]
        gbad: list = []
        gx = [_pose(T, f"ground_truth.X[{i}]", gbad, fixed, tols) for i, T in enumerate(_require(gt, "X", "ground_truth"))]
        gy = [_pose(T, f"ground_truth.Y[{i}]", gbad, fixed, tols) for i, T in enumerate(_require(gt, "Y", "ground_truth"))]
        if gbad:
            raise ValidationError("invalid ground-truth pose(s)", gbad)
        if len(gx) != len(xn) or len(gy) != len(yn):
            raise ParseError("ground truth does not match the node lists", field="ground_truth")
        truth = GroundTruth(gx, gy, float(gt.get("alpha", 1.0)))
    return DatasetFile(graph, truth)


def read_dataset(path, reject_tol: float = REJECT_TOL, reproject_tol: float = REPROJECT_TOL) -> DatasetFile:
    """Load a dataset file with its optional ground truth.

    Raises:
        ParseError: on malformed JSON or missing or mistyped fields.
        ValidationError: if any pose is not a rigid transform within tolerance;
            ``offending`` lists the pose locations.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    return parse_dataset(doc, reject_tol, reproject_tol)


def load_dataset(path) -> ProblemGraph:
    return read_dataset(path).graph


def _mat(p: Pose) -> list:
    return [[float(v) for v in row] for row in p.as_matrix()]


def dataset_document(graph: ProblemGraph, ground_truth=None) -> dict:
    edges = []
    for (j, k), pairs in graph.sorted_edges():
        edges.append(
            {
                "x_id": graph.x_names[j],
                "y_id": graph.y_names[k],
                "pairs": [
                    {"A": _mat(p.a), "B": _mat(p.b), "sigma": float(p.sigma), "kappa": float(p.kappa)}
                    for p in pairs
                ],
            }
        )
    doc = {
        "version": FORMAT_VERSION,
        "mode": "monocular" if graph.monocular else "standard",
        "nodes": {"X": list(graph.x_names), "Y": list(graph.y_names)},
        "edges": edges,
    }
    if ground_truth is not None:
        doc["ground_truth"] = {
            "X": [_mat(p) for p in ground_truth.xs],
            "Y": [_mat(p) for p in ground_truth.ys],
            "alpha": float(ground_truth.alpha),
        }
    return doc


def save_dataset(graph: ProblemGraph, path, ground_truth=None) -> None:
    Path(path).write_text(json.dumps(dataset_document(graph, ground_truth), indent=1) + "\n")
