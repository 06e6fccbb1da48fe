import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlocal_isaacs import (ConfigurationError, Grid, SolutionField, interpolate, read_checkpoint, tent_stencil,
                             tent_weight, write_checkpoint)


def test_nodes_and_times_are_exact_multiples():
    g = Grid.create(0.125, 1.0, 2.0, steps=8)
    assert np.array_equal(g.axis(), np.arange(-16, 17) * 0.125)
    assert np.array_equal(g.times(), np.arange(9) * g.dt)


def test_tent_weight_values():
    assert tent_weight(3, 0.3, 0.1) == pytest.approx(1.0)
    assert tent_weight(0, 0.05, 0.1) == pytest.approx(0.5)
    assert tent_weight(1, 0.05, 0.1) == pytest.approx(0.5)
    corners, w = tent_stencil(np.array([[0.05, 0.05]]), 0.1)
    assert np.allclose(w, 0.25)
    assert corners.shape[-2] == 4


@settings(max_examples=50, deadline=None)
@given(x=st.floats(-50, 50), dx=st.floats(1e-3, 1.0))
def test_tent_partition_of_unity(x, dx):
    _, w = tent_stencil(np.array([[x]]), dx)
    assert abs(w.sum() - 1.0) < 1e-12
    assert np.all(w >= 0)


def test_interpolation_is_exact_on_linear_data():
    g = Grid.create(0.25, 1.0, 3.0, steps=1)
    vals = 3 * g.axis() + 1
    x = np.linspace(-2.9, 2.9, 41)[:, None]
    assert np.allclose(interpolate(vals, g, x), 3 * x[:, 0] + 1, atol=1e-13)


def test_interpolation_of_square_at_midpoint():
    dx = 0.2
    g = Grid.create(dx, 1.0, 1.0, steps=1)
    got = interpolate(g.axis() ** 2, g, np.array([[dx / 2]]))
    assert got[0] == pytest.approx(dx**2 / 2)


def test_interpolation_at_nodes_returns_node_values(rng):
    g = Grid.create(0.5, 1.0, 2.0, steps=1)
    vals = rng.normal(size=g.size)
    assert np.allclose(interpolate(vals, g, g.nodes()), vals, atol=0)


def test_solution_csv_and_checkpoint_round_trip(tmp_path, rng):
    g = Grid.create(0.5, 1.0, 1.0, steps=2)
    fld = SolutionField(g, rng.normal(size=(3, g.size)))
    path = tmp_path / "s.csv"
    fld.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x1,value"
    assert len(lines) == 1 + 3 * g.size
    write_checkpoint(tmp_path / "c.csv", fld, 1)
    n, vals = read_checkpoint(tmp_path / "c.csv", g)
    assert n == 1 and np.array_equal(vals, fld.values[1])
    with pytest.raises(ConfigurationError):
        read_checkpoint(tmp_path / "c.csv", Grid.create(0.25, 1.0, 1.0, steps=2))


def test_dt_is_shrunk_to_divide_the_horizon():
    g = Grid.create(0.1, 1.0, 1.0, dt=0.3)
    assert g.steps == 4 and g.dt == 0.25


def test_grid_rejects_bad_geometry():
    with pytest.raises(ConfigurationError):
        Grid.create(0.3, 1.0, 1.0, steps=2)
    with pytest.raises(ConfigurationError):
        Grid.create(-0.1, 1.0, 1.0, steps=2)
