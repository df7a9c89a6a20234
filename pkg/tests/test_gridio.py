import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from rotstokes.gridio import GridData, GridFormatError, format_float, read_grid_file, write_grid_file

reals = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(hnp.arrays(np.float64, st.tuples(st.integers(2, 5), st.integers(1, 4), st.integers(1, 3)), elements=reals))
def test_round_trip_is_exact(tmp_path_factory, vals):
    n0, n1, nc = vals.shape
    g = GridData("polar", (1.0, 3.0, 0.0, 6.0), (n0, n1), tuple(f"c{i}" for i in range(nc)), vals, {"note": "x"})
    path = tmp_path_factory.mktemp("g") / "a.grid"
    write_grid_file(path, g)
    back = read_grid_file(path)
    np.testing.assert_array_equal(back.values, vals)
    assert back.components == g.components and back.metadata == {"note": "x"}


@given(reals)
def test_format_float_round_trips(v):
    assert float(format_float(v)) == v


def test_explicit_nodes(tmp_path):
    vals = np.arange(6.0).reshape(3, 2, 1)
    g = GridData("cartesian", (0, 1, 0, 1), (3, 2), ("f",), vals, nodes0=np.array([0.0, 0.1, 1.0]))
    write_grid_file(tmp_path / "n.grid", g)
    back = read_grid_file(tmp_path / "n.grid")
    np.testing.assert_array_equal(back.axis(0), [0.0, 0.1, 1.0])
    np.testing.assert_array_equal(back.axis(1), [0.0, 1.0])
    assert back.points().shape == (3, 2, 2)


def test_polar_points():
    g = GridData("polar", (1.0, 2.0, 0.0, np.pi / 2), (2, 2), ("u",), np.zeros((2, 2, 1)))
    np.testing.assert_allclose(g.points()[1, 1], [0.0, 2.0], atol=1e-15)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "# other\n",
        "# rotstokes-grid 1\ncoords = cartesian\n",
        "# rotstokes-grid 1\ncoords = cartesian\nbounds = 0 1 0\nresolution = 2 1\ncomponents = f\n[data]\n0\n1\n",
        "# rotstokes-grid 1\ncoords = cartesian\nbounds = 0 1 0 1\nresolution = 2 1\ncomponents = f\n[data]\n0\n",
        "# rotstokes-grid 1\ncoords = cartesian\nbounds = 0 1 0 1\nresolution = 2 1\ncomponents = f\n[data]\n0\nx\n",
        "# rotstokes-grid 1\ncoords = spherical\nbounds = 0 1 0 1\nresolution = 2 1\ncomponents = f\n[data]\n0\n1\n",
        "# rotstokes-grid 1\nno equals here\n",
    ],
)
def test_malformed_files(tmp_path, text):
    p = tmp_path / "bad.grid"
    p.write_text(text)
    with pytest.raises(GridFormatError):
        read_grid_file(p)


def test_metadata_must_be_single_line(tmp_path):
    g = GridData("cartesian", (0, 1, 0, 1), (2, 1), ("f",), np.zeros((2, 1, 1)), {"k": "a\nb"})
    with pytest.raises(GridFormatError):
        write_grid_file(tmp_path / "m.grid", g)


def test_shape_and_node_validation():
    with pytest.raises(GridFormatError):
        GridData("cartesian", (0, 1, 0, 1), (2, 2), ("f",), np.zeros((2, 1, 1)))
    with pytest.raises(GridFormatError):
        GridData("cartesian", (0, 1, 0, 1), (2, 1), ("f",), np.zeros((2, 1, 1)), nodes0=np.array([1.0, 0.0]))
