"""Bipartite measurement graph and the state-vector layout derived from it."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import IndexOutOfRangeError, ValidationError
from .liegroups import Pose


@dataclass(frozen=True)
class MeasurementPair:
    """One observation ``(A, B)`` on an edge, with the noise parameters of ``B``.

    ``sigma`` is the translation standard deviation in meters and ``kappa`` the
    Langevin concentration of the rotation.
    """

    a: Pose
    b: Pose
    sigma: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if not (self.kappa > 0 and np.isfinite(self.kappa)):
            raise ValidationError(f"kappa must be positive, got {self.kappa}")


@dataclass
class ProblemGraph:
    """Bipartite directed graph with ``num_x`` X-nodes and ``num_y`` Y-nodes.

    ``edges`` maps ``(j, k)`` to the list of pairs measured between ``X_j`` and
    ``Y_k``.  Indices are zero-based.
    """

    num_x: int
    num_y: int
    edges: dict = field(default_factory=dict)
    monocular: bool = False
    x_names: list | None = None
    y_names: list | None = None

    def __post_init__(self):
        if self.num_x < 1 or self.num_y < 1:
            raise ValidationError("a graph needs at least one X-node and one Y-node")
        if self.x_names is None:
            self.x_names = [f"X{j}" for j in range(self.num_x)]
        if self.y_names is None:
            self.y_names = [f"Y{k}" for k in range(self.num_y)]

    def add_measurement(self, j: int, k: int, pair: MeasurementPair) -> ProblemGraph:
        if not (0 <= j < self.num_x) or not (0 <= k < self.num_y):
            raise IndexOutOfRangeError(
                f"edge ({j}, {k}) outside graph with M={self.num_x}, P={self.num_y}"
            )
        self.edges.setdefault((j, k), []).append(pair)
        return self

    def sorted_edges(self):
        """Edges in deterministic ``(j, k)`` order."""
        return [(key, self.edges[key]) for key in sorted(self.edges)]

    @property
    def num_pairs(self) -> int:
        return sum(len(p) for p in self.edges.values())

    def is_weakly_connected(self) -> bool:
        n = self.num_x + self.num_y
        adj = [[] for _ in range(n)]
        for (j, k), pairs in self.edges.items():
            if pairs:
                adj[j].append(self.num_x + k)
                adj[self.num_x + k].append(j)
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == n

    def layout(self) -> StateLayout:
        return StateLayout(self.num_x, self.num_y)

    def copy(self) -> ProblemGraph:
        return ProblemGraph(
            self.num_x,
            self.num_y,
            {key: list(pairs) for key, pairs in self.edges.items()},
            self.monocular,
            list(self.x_names),
            list(self.y_names),
        )

    def __eq__(self, other):
        if not isinstance(other, ProblemGraph):
            return NotImplemented
        return (
            self.num_x == other.num_x
            and self.num_y == other.num_y
            and self.monocular == other.monocular
            and self.x_names == other.x_names
            and self.y_names == other.y_names
            and self.edges == other.edges
        )


@dataclass(frozen=True)
class StateLayout:
    """Offsets into the lifted state ``[t_X.., t_Y.., alpha, r_X.., r_Y..]``.

    Rotations occupy 9 entries each, vectorized column-major.  The layout of the
    rotation-only vector used after translation elimination is the same list of
    ``r`` blocks starting at zero, see :meth:`rot_x` with ``reduced=True``.
    """

    num_x: int
    num_y: int

    @property
    def n_nodes(self) -> int:
        return self.num_x + self.num_y

    @property
    def dim(self) -> int:
        return 12 * self.n_nodes + 1

    @property
    def scale(self) -> int:
        return 3 * self.n_nodes

    @property
    def rot_start(self) -> int:
        return 3 * self.n_nodes + 1

    @property
    def rot_dim(self) -> int:
        return 9 * self.n_nodes

    def trans_x(self, j: int) -> slice:
        self._check(j, self.num_x)
        return slice(3 * j, 3 * j + 3)

    def trans_y(self, k: int) -> slice:
        self._check(k, self.num_y)
        o = 3 * (self.num_x + k)
        return slice(o, o + 3)

    def rot_x(self, j: int, reduced: bool = False) -> slice:
        self._check(j, self.num_x)
        o = (0 if reduced else self.rot_start) + 9 * j
        return slice(o, o + 9)

    def rot_y(self, k: int, reduced: bool = False) -> slice:
        self._check(k, self.num_y)
        o = (0 if reduced else self.rot_start) + 9 * (self.num_x + k)
        return slice(o, o + 9)

    def trans_node(self, n: int) -> slice:
        """Translation block of node ``n`` (X-nodes first, then Y-nodes)."""
        self._check(n, self.n_nodes)
        return slice(3 * n, 3 * n + 3)

    def rot_node(self, n: int, reduced: bool = False) -> slice:
        self._check(n, self.n_nodes)
        o = (0 if reduced else self.rot_start) + 9 * n
        return slice(o, o + 9)

    def blocks(self):
        """``(name, slice)`` for every block of the full state, in order."""
        out = [(f"t_x{j}", self.trans_x(j)) for j in range(self.num_x)]
        out += [(f"t_y{k}", self.trans_y(k)) for k in range(self.num_y)]
        out.append(("alpha", slice(self.scale, self.scale + 1)))
        out += [(f"r_x{j}", self.rot_x(j)) for j in range(self.num_x)]
        out += [(f"r_y{k}", self.rot_y(k)) for k in range(self.num_y)]
        return out

    def lift(self, xs, ys, alpha: float = 1.0) -> np.ndarray:
        """Pack poses (translations already scaled by ``alpha``) into a state vector.

        ``xs`` and ``ys`` are sequences of :class:`Pose`; the stored translations
        are ``alpha * t`` so that the monocular cost is quadratic.
        """
        x = np.zeros(self.dim)
        for j, p in enumerate(xs):
            x[self.trans_x(j)] = alpha * p.translation
            x[self.rot_x(j)] = p.rotation.reshape(-1, order="F")
        for k, p in enumerate(ys):
            x[self.trans_y(k)] = alpha * p.translation
            x[self.rot_y(k)] = p.rotation.reshape(-1, order="F")
        x[self.scale] = alpha
        return x

    def rotations_vector(self, xs, ys) -> np.ndarray:
        """Column-major stack of all rotations, X-nodes first."""
        return np.concatenate(
            [p.rotation.reshape(-1, order="F") for p in list(xs) + list(ys)]
        )

    @staticmethod
    def _check(i, n):
        if not (0 <= i < n):
            raise IndexOutOfRangeError(f"index {i} out of range [0, {n})")
