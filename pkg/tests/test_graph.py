import numpy as np
import pytest

from conftest import chain_graph
from rwhec.errors import IndexOutOfRangeError, ValidationError
from rwhec.graph import MeasurementPair, ProblemGraph, StateLayout
from rwhec.liegroups import Pose


@pytest.mark.parametrize("m,p,dim", [(1, 1, 25), (4, 1, 61), (2, 3, 61)])
def test_layout_dimension(m, p, dim):
    lay = StateLayout(m, p)
    assert lay.dim == dim
    assert lay.rot_dim == 9 * (m + p)


def test_layout_blocks_tile_the_state():
    lay = StateLayout(2, 3)
    covered = np.zeros(lay.dim, dtype=int)
    for _, s in lay.blocks():
        covered[s] += 1
    assert np.all(covered == 1)


def test_layout_order():
    lay = StateLayout(2, 1)
    assert lay.trans_y(0) == slice(6, 9)
    assert lay.scale == 9
    assert lay.rot_x(0) == slice(10, 19)
    assert lay.rot_y(0, reduced=True) == slice(18, 27)


def test_layout_index_errors():
    with pytest.raises(IndexOutOfRangeError):
        StateLayout(1, 1).rot_x(1)


def test_lift_scales_translations(rng):
    g, xs, ys = chain_graph(rng)
    x = g.layout().lift(xs, ys, 0.5)
    np.testing.assert_array_equal(x[0:3], 0.5 * xs[0].translation)
    np.testing.assert_array_equal(x[7:16], xs[0].rotation.reshape(-1, order="F"))


def test_add_measurement_bounds(rng):
    g = ProblemGraph(1, 1)
    with pytest.raises(IndexOutOfRangeError):
        g.add_measurement(1, 0, MeasurementPair(Pose(), Pose()))


def test_pair_validation():
    with pytest.raises(ValidationError):
        MeasurementPair(Pose(), Pose(), sigma=0.0)
    with pytest.raises(ValidationError):
        MeasurementPair(Pose(), Pose(), kappa=-1.0)


def test_connectivity(rng):
    g, _, _ = chain_graph(rng, 2, 2, edges=[(0, 0), (1, 0), (1, 1)])
    assert g.is_weakly_connected()
    g2, _, _ = chain_graph(rng, 2, 2, edges=[(0, 0), (1, 1)])
    assert not g2.is_weakly_connected()


def test_copy_equality(rng):
    g, _, _ = chain_graph(rng, 2, 1)
    h = g.copy()
    assert h == g
    h.add_measurement(0, 0, MeasurementPair(Pose(), Pose()))
    assert h != g
    assert g.num_pairs == 12
