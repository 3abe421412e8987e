"""Result container shared by all solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .liegroups import Pose


@dataclass
class CalibrationSolution:
    """Estimated poses with metric translations and the monocular scale.

    ``alpha`` is 1 in standard mode.  ``cost`` is the value of the quadratic
    objective at the estimate, when the producing solver computed it.
    """

    xs: list
    ys: list
    alpha: float = 1.0
    method: str = ""
    cost: float | None = None
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "alpha": self.alpha,
            "cost": self.cost,
            "X": [p.as_matrix().tolist() for p in self.xs],
            "Y": [p.as_matrix().tolist() for p in self.ys],
        }

    @classmethod
    def from_dict(cls, d: dict) -> CalibrationSolution:
        return cls(
            xs=[Pose.from_matrix(np.array(T)) for T in d["X"]],
            ys=[Pose.from_matrix(np.array(T)) for T in d["Y"]],
            alpha=float(d.get("alpha", 1.0)),
            method=d.get("method", ""),
            cost=d.get("cost"),
        )
