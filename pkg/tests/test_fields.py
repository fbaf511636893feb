import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pxclda.fields import (Direction, Grid, GridFileError, GridMismatchError, ScalarField,
                           directional_second_derivative, first_derivative, integrate, inner,
                           laplacian, line_cut, read_grid_file, restrict, second_derivative,
                           write_grid_file)


def interior(a, m=2):
    return a[m:-m, m:-m, m:-m]


def test_grid_invariants():
    g = Grid.cube(8.0, 0.25)
    assert g.dims == (65, 65, 65)
    assert g.size == 65**3
    assert g.extents == pytest.approx((65 * 0.25,) * 3)
    assert g.axis_coords("z")[32] == 0.0
    with pytest.raises(ValueError):
        Grid((7, 8, 8), 0.3, (0, 0, 0))
    with pytest.raises(ValueError):
        Grid((8, 8, 8), 0.0, (0, 0, 0))


def test_values_ordered_x_fastest():
    g = Grid((8, 9, 10), 0.5, (0.0, 0.0, 0.0))
    f = ScalarField.from_function(g, lambda x, y, z: x + 100 * y + 10000 * z)
    flat = f.flat()
    assert flat[1] - flat[0] == pytest.approx(0.5)
    assert flat[8] - flat[0] == pytest.approx(50.0)
    assert flat[72] - flat[0] == pytest.approx(5000.0)


def test_scalar_field_validation(small_grid):
    bad = np.zeros(small_grid.shape)
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        ScalarField(small_grid, bad)
    neg = np.zeros(small_grid.shape)
    neg[1, 1, 1] = -1e-6
    with pytest.raises(ValueError):
        ScalarField(small_grid, neg, "density")
    ScalarField(small_grid, neg)
    with pytest.raises(ValueError):
        ScalarField(small_grid, np.zeros(10))


def test_direction():
    assert Direction.parse("z").components == (0.0, 0.0, 1.0)
    d = Direction.parse("1,1,0")
    assert d.components[0] == pytest.approx(1 / math.sqrt(2))
    with pytest.raises(ValueError):
        Direction((1.0, 1.0, 0.0))
    with pytest.warns(UserWarning):
        Direction.from_vector((0, 0, 2))
    with pytest.raises(ValueError):
        Direction.parse("w")


def test_laplacian_constant_and_quadratic(small_grid):
    c = ScalarField(small_grid, np.full(small_grid.shape, 3.0))
    assert np.abs(interior(laplacian(c).values)).max() < 1e-10
    q = ScalarField.from_function(small_grid, lambda x, y, z: x**2)
    assert np.allclose(interior(laplacian(q).values), 2.0, atol=1e-9)


def test_laplacian_gaussian_fourth_order():
    # error ratio between h and h/2 should approach 2^4
    errs = []
    for h in (0.25, 0.125):
        g = Grid.cube(4.0, h)
        f = ScalarField.from_function(g, lambda x, y, z: np.exp(-(x**2 + y**2 + z**2)))
        r2 = g.radius() ** 2
        exact = (4 * r2 - 6) * np.exp(-r2)
        err = np.abs(interior(laplacian(f).values - exact)).max()
        errs.append(err)
    assert errs[0] < 4 * 0.25**4
    assert errs[0] / errs[1] > 12


def test_laplacian_gaussian_relative_error_at_quarter_bohr():
    g = Grid.cube(4.0, 0.25)
    f = ScalarField.from_function(g, lambda x, y, z: np.exp(-(x**2 + y**2 + z**2)))
    r2 = g.radius() ** 2
    exact = (4 * r2 - 6) * np.exp(-r2)
    mask = np.abs(exact) > 1e-3 * np.abs(exact).max()
    mask &= np.abs(r2 - 1.5) > 0.3  # stay away from the node of (4r^2 - 6)
    rel = np.abs(laplacian(f).values - exact)[mask] / np.abs(exact[mask])
    # truncation term is h^4/90 * f^(6) per axis; 5 h^4 bounds it comfortably
    assert rel.max() < 5 * 0.25**4


def test_directional_second_derivative_examples(small_grid):
    z2 = ScalarField.from_function(small_grid, lambda x, y, z: z**2)
    x2 = ScalarField.from_function(small_grid, lambda x, y, z: x**2)
    xy = ScalarField.from_function(small_grid, lambda x, y, z: x * y)
    ez = Direction.parse("z")
    assert np.allclose(interior(directional_second_derivative(z2, ez).values), 2.0, atol=1e-9)
    assert np.abs(interior(directional_second_derivative(x2, ez).values)).max() < 1e-10
    d = Direction.parse("1,1,0")
    assert np.allclose(interior(directional_second_derivative(xy, d).values, 4), 1.0, atol=1e-9)


def test_laplacian_equals_sum_of_axis_directions(gaussian):
    f = gaussian(0.9)
    total = sum(directional_second_derivative(f, Direction.parse(a)).values for a in "xyz")
    assert np.abs(total - laplacian(f).values).max() < 1e-12 * np.abs(total).max() + 1e-12


def test_axis_direction_matches_second_derivative(gaussian):
    f = gaussian()
    for a in "xyz":
        assert np.array_equal(directional_second_derivative(f, Direction.parse(a)).values,
                              second_derivative(f, a).values)


def test_directional_linearity(small_grid):
    rng = np.random.default_rng(4)
    f = ScalarField(small_grid, rng.standard_normal(small_grid.shape))
    g = ScalarField(small_grid, rng.standard_normal(small_grid.shape))
    d = Direction.parse("0.3,-0.4,0.8660254037844386")
    lhs = directional_second_derivative(f * 2.0 + g * -3.0, d).values
    rhs = 2.0 * directional_second_derivative(f, d).values - 3.0 * directional_second_derivative(g, d).values
    assert np.abs(lhs - rhs).max() < 1e-10


def test_directional_integrates_to_zero(gaussian):
    f = gaussian(0.7, grid=Grid.cube(6.0, 0.25))
    d = Direction.parse("1,2,2")
    out = directional_second_derivative(f, d)
    assert abs(integrate(out)) < 1e-8


def test_translation_equivariance():
    g = Grid.cube(4.0, 0.25)
    r = lambda c: g.radius(c)
    f1 = ScalarField(g, np.exp(-r((0, 0, 0)) ** 2))
    f2 = ScalarField(g, np.exp(-r((0.5, 0, 0)) ** 2))
    d = Direction.parse("1,0,1")
    a = directional_second_derivative(f1, d).values
    b = directional_second_derivative(f2, d).values
    assert np.abs(np.roll(a, 2, axis=2)[4:-4, 4:-4, 4:-4] - b[4:-4, 4:-4, 4:-4]).max() < 1e-12


def test_first_derivative_linear(small_grid):
    f = ScalarField.from_function(small_grid, lambda x, y, z: 3 * y)
    assert np.allclose(interior(first_derivative(f, "y").values), 3.0)


def test_integrate_examples():
    g = Grid.cube(2.0, 0.25)
    one = ScalarField(g, np.ones(g.shape))
    vol = np.prod(g.extents)
    assert integrate(one) == pytest.approx(vol, rel=1e-14)
    assert integrate(ScalarField.zeros(g)) == 0.0
    big = Grid.cube(8.0, 0.25)
    r2 = big.radius() ** 2
    gauss = ScalarField(big, (2 * np.pi) ** -1.5 * np.exp(-r2 / 2))
    assert abs(integrate(gauss) - 1.0) < 1e-6


def test_integrate_reproducible(small_grid):
    rng = np.random.default_rng(0)
    f = ScalarField(small_grid, rng.standard_normal(small_grid.shape))
    assert integrate(f) == integrate(ScalarField(small_grid, f.values.copy()))
    assert inner(f, f) == integrate(f * f)


def test_line_cut(small_grid, gaussian):
    zf = ScalarField.from_function(small_grid, lambda x, y, z: z)
    cut = line_cut(zf, "z")
    coords = [c for c, _ in cut]
    assert coords == [v for _, v in cut]
    assert coords == list(small_grid.axis_coords("z"))
    const = ScalarField(small_grid, np.full(small_grid.shape, 2.5))
    assert {v for _, v in line_cut(const, "x", (0.5, -1.0))} == {2.5}
    prof = [v for _, v in line_cut(gaussian(), "y")]
    assert prof == prof[::-1]
    assert int(np.argmax(prof)) == len(prof) // 2
    with pytest.raises(ValueError):
        line_cut(zf, "z", (0.1, 0.0))


def test_restrict_commensurate():
    fine = Grid.cube(4.0, 0.2)
    coarse = Grid.cube(4.0, 0.4)
    f = ScalarField.from_function(fine, lambda x, y, z: x + 2 * y + 3 * z)
    r = restrict(f, coarse)
    expect = ScalarField.from_function(coarse, lambda x, y, z: x + 2 * y + 3 * z)
    assert np.allclose(r.values, expect.values, atol=1e-12)
    with pytest.raises(GridMismatchError):
        restrict(f, Grid.cube(4.2, 0.3))


def test_grid_file_roundtrip(tmp_path, gaussian):
    f = gaussian()
    p = tmp_path / "rho.grid"
    write_grid_file(p, f)
    back = read_grid_file(p, "density")
    assert back.grid.same_as(f.grid)
    assert np.array_equal(back.values, f.values)
    lines = p.read_text().splitlines()
    assert lines[1].startswith("dims ")
    assert lines[2].startswith("spacing ")
    assert lines[3].startswith("origin ")


def test_grid_file_rejects_count_mismatch(tmp_path, gaussian):
    p = tmp_path / "rho.grid"
    write_grid_file(p, gaussian())
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(GridFileError):
        read_grid_file(p)
    p.write_text("c\ndims 8 8\nspacing 1\norigin 0 0 0\n")
    with pytest.raises(GridFileError):
        read_grid_file(p)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_directional_second_derivative_property(a, b, ex, ey, ez):
    # on a quadratic form the stencil is exact: (eps.grad)^2 (x^T M x) = 2 eps^T M eps
    g = Grid((10, 10, 10), 0.3, (-1.35, -1.35, -1.35))
    d = Direction.from_vector((ex, ey, ez)) if abs(math.hypot(ex, ey, ez) - 1) < 1e-12 else None
    if d is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            d = Direction.from_vector((ex, ey, ez))
    f = ScalarField.from_function(g, lambda x, y, z: a * x * z + b * y**2)
    e = d.components
    expect = 2 * (a * e[0] * e[2] + b * e[1] ** 2)
    got = interior(directional_second_derivative(f, d).values, 4)
    assert np.allclose(got, expect, atol=1e-9)
