"""Uniform Cartesian grids, scalar fields, and the discrete operators on them.

Arrays are stored with shape ``(nz, ny, nx)`` in C order so that the
flattened values run x-fastest. Differential operators use 4th-order central
differences with zero-Dirichlet values outside the box.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._backend import kernels

AXES = {"x": 2, "y": 1, "z": 0}
"""Map from Cartesian axis label to array axis."""

_COORD_TOL = 1e-9


class GridMismatchError(ValueError):
    """Two fields (or a field and a grid) do not live on the same grid."""


@dataclass(frozen=True)
class Grid:
    """Cubic-cell Cartesian grid.

    ``dims`` is (nx, ny, nz); ``origin`` is the Cartesian position of the
    first grid point. Each point sits at the centre of its own cubic cell of
    side ``spacing``, so the box extents are ``dims * spacing``.
    """

    dims: tuple[int, int, int]
    spacing: float
    origin: tuple[float, float, float]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) != 3 or any(n < 8 for n in dims):
            raise ValueError(f"grid needs at least 8 points per axis, got {self.dims}")
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise ValueError(f"grid spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @classmethod
    def cube(cls, half_width: float, spacing: float) -> "Grid":
        """Grid symmetric about the coordinate origin with a point at r = 0.

        Points sit at integer multiples of ``spacing`` out to ``half_width``
        (which must be a whole number of spacings), giving an odd point count
        per axis.
        """
        m = half_width / spacing
        n_half = int(round(m))
        if abs(m - n_half) > 1e-6:
            raise ValueError(
                f"half-width {half_width} is not a whole number of spacings {spacing}"
            )
        n = 2 * n_half + 1
        o = -n_half * spacing
        return cls((n, n, n), spacing, (o, o, o))

    @property
    def shape(self) -> tuple[int, int, int]:
        """Array shape (nz, ny, nx)."""
        nx, ny, nz = self.dims
        return (nz, ny, nx)

    @property
    def size(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @property
    def extents(self) -> tuple[float, float, float]:
        return tuple(n * self.spacing for n in self.dims)

    def axis_coords(self, axis: str) -> np.ndarray:
        """1D coordinates of the grid points along ``axis`` ('x', 'y' or 'z')."""
        c = "xyz".index(axis)
        return self.origin[c] + self.spacing * np.arange(self.dims[c])

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable (x, y, z) coordinate arrays in array layout."""
        x = self.axis_coords("x")[None, None, :]
        y = self.axis_coords("y")[None, :, None]
        z = self.axis_coords("z")[:, None, None]
        return x, y, z

    def radius(self, center: Sequence[float] = (0.0, 0.0, 0.0)) -> np.ndarray:
        x, y, z = self.coords()
        return np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2)

    def describe(self) -> str:
        nx, ny, nz = self.dims
        return (
            f"dims={nx}x{ny}x{nz} spacing={self.spacing!r} "
            f"origin=({self.origin[0]!r}, {self.origin[1]!r}, {self.origin[2]!r})"
        )

    def same_as(self, other: "Grid") -> bool:
        if self.dims != other.dims:
            return False
        tol = _COORD_TOL * self.spacing
        return abs(self.spacing - other.spacing) <= tol and all(
            abs(a - b) <= tol for a, b in zip(self.origin, other.origin)
        )


@dataclass(frozen=True)
class Direction:
    """Real unit 3-vector, e.g. a cavity polarization."""

    components: tuple[float, float, float]

    def __post_init__(self):
        comps = tuple(float(c) for c in self.components)
        if len(comps) != 3:
            raise ValueError("direction needs three components")
        norm = math.sqrt(sum(c * c for c in comps))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"direction is not a unit vector (norm {norm!r})")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_vector(cls, vec: Sequence[float]) -> "Direction":
        """Normalize ``vec``; warns when the input was not already unit length."""
        v = np.asarray(vec, dtype=float)
        norm = float(np.linalg.norm(v))
        if norm == 0.0 or not math.isfinite(norm):
            raise ValueError(f"cannot build a direction from {list(vec)}")
        if abs(norm - 1.0) > 1e-12:
            warnings.warn(f"polarization {list(vec)} rescaled to unit length", stacklevel=2)
        return cls(tuple(v / norm))

    @classmethod
    def parse(cls, text: str) -> "Direction":
        """Parse ``x``, ``y``, ``z`` or a comma-separated vector ``cx,cy,cz``."""
        text = text.strip().strip('"').strip("'")
        if text in ("x", "y", "z"):
            v = [0.0, 0.0, 0.0]
            v["xyz".index(text)] = 1.0
            return cls(tuple(v))
        parts = [p for p in text.split(",") if p.strip()]
        if len(parts) != 3:
            raise ValueError(f"bad polarization {text!r}; expected x|y|z or cx,cy,cz")
        return cls.from_vector([float(p) for p in parts])

    def __iter__(self):
        return iter(self.components)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values sampled on a ``Grid``; ``values`` has the grid's array shape."""

    grid: Grid
    values: np.ndarray
    kind: str = field(default="field")

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.size != self.grid.size:
            raise GridMismatchError(
                f"{vals.size} values do not match grid with {self.grid.size} points"
            )
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite values")
        if self.kind == "density" and vals.min() < -1e-12:
            raise ValueError(f"density has negative entries (min {vals.min()!r})")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: Grid, kind: str = "field") -> "ScalarField":
        return cls(grid, np.zeros(grid.shape), kind)

    @classmethod
    def from_function(cls, grid: Grid, func, kind: str = "field") -> "ScalarField":
        """Sample ``func(x, y, z)`` (broadcasting) on every grid point."""
        x, y, z = grid.coords()
        return cls(grid, np.broadcast_to(func(x, y, z), grid.shape), kind)

    def flat(self) -> np.ndarray:
        """Values as a 1D array in x-fastest order."""
        return self.values.ravel()

    def _check(self, other: "ScalarField"):
        if not self.grid.same_as(other.grid):
            raise GridMismatchError(
                f"grid mismatch: {self.grid.describe()} vs {other.grid.describe()}"
            )

    def __add__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            return ScalarField(self.grid, self.values + other.values)
        return ScalarField(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            return ScalarField(self.grid, self.values - other.values)
        return ScalarField(self.grid, self.values - other)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            return ScalarField(self.grid, self.values * other.values)
        return ScalarField(self.grid, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def check_same_grid(*fields_: ScalarField) -> Grid:
    """Return the common grid of ``fields_`` or raise ``GridMismatchError``."""
    first = fields_[0]
    for f in fields_[1:]:
        first._check(f)
    return first.grid


def laplacian(f: ScalarField) -> ScalarField:
    """4th-order finite-difference Laplacian (5 points per axis)."""
    return ScalarField(f.grid, kernels.laplacian(f.values, f.grid.spacing))


def second_derivative(f: ScalarField, axis: str) -> ScalarField:
    return ScalarField(f.grid, kernels.second_diff(f.values, AXES[axis], f.grid.spacing))


def first_derivative(f: ScalarField, axis: str) -> ScalarField:
    return ScalarField(f.grid, kernels.first_diff(f.values, AXES[axis], f.grid.spacing))


def directional_second_derivative_array(values: np.ndarray, eps: Direction, h: float) -> np.ndarray:
    """``sum_ij eps_i eps_j d_i d_j values`` on a raw array.

    Diagonal terms use the pure second-difference stencil; off-diagonal terms
    apply the antisymmetric first-difference stencil along each axis in turn.
    Zero components are skipped, so an axis-aligned ``eps`` reduces exactly to
    the single-axis second difference.
    """
    values = np.ascontiguousarray(values)
    comps = dict(zip("xyz", eps.components))
    out = np.zeros_like(values)
    for a in "xyz":
        if comps[a] != 0.0:
            out += comps[a] ** 2 * kernels.second_diff(values, AXES[a], h)
    firsts = {}
    for a, b in (("x", "y"), ("x", "z"), ("y", "z")):
        if comps[a] == 0.0 or comps[b] == 0.0:
            continue
        if b not in firsts:
            firsts[b] = kernels.first_diff(values, AXES[b], h)
        mixed = kernels.first_diff(firsts[b], AXES[a], h)
        out += 2.0 * comps[a] * comps[b] * mixed
    return out


def directional_second_derivative(f: ScalarField, eps: Direction) -> ScalarField:
    """``(eps . grad)^2 f`` with central differences."""
    return ScalarField(
        f.grid, directional_second_derivative_array(f.values, eps, f.grid.spacing)
    )


def integrate(f: ScalarField) -> float:
    """Riemann sum ``h^3 * sum(values)``.

    The sum runs over the x-fastest flattened values with numpy's pairwise
    summation, whose reduction tree depends only on the array length, so the
    result is bit-reproducible for a given grid.
    """
    return float(np.sum(f.values.ravel()) * f.grid.cell_volume)


def inner(f: ScalarField, g: ScalarField) -> float:
    """Discrete L2 inner product ``integrate(f * g)``."""
    check_same_grid(f, g)
    return float(np.sum((f.values * g.values).ravel()) * f.grid.cell_volume)


def _grid_index(grid: Grid, axis: str, coord: float) -> int:
    c = "xyz".index(axis)
    pos = (coord - grid.origin[c]) / grid.spacing
    idx = int(round(pos))
    if abs(pos - idx) > 1e-6 or not 0 <= idx < grid.dims[c]:
        raise ValueError(f"{axis} = {coord!r} is not a grid coordinate")
    return idx


def line_cut(f: ScalarField, axis: str, offsets: Sequence[float] = (0.0, 0.0)) -> list[tuple[float, float]]:
    """Grid values along a line parallel to ``axis``.

    ``offsets`` are the coordinates of the line in the two remaining axes, in
    x, y, z order (for ``axis='z'`` they are (x0, y0)). No interpolation is
    done; offsets off the grid raise ``ValueError``.
    """
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}")
    others = [a for a in "xyz" if a != axis]
    if len(offsets) != 2:
        raise ValueError("line_cut needs two offsets")
    index: list = [None, None, None]
    for a, off in zip(others, offsets):
        index[AXES[a]] = _grid_index(f.grid, a, off)
    index[AXES[axis]] = slice(None)
    vals = f.values[tuple(index)]
    coords = f.grid.axis_coords(axis)
    return [(float(c), float(v)) for c, v in zip(coords, vals)]


def restrict(f: ScalarField, coarse: Grid) -> ScalarField:
    """Sample ``f`` at the points of a commensurate ``coarse`` grid.

    Every coarse point must coincide with a point of ``f.grid``; anything
    else raises ``GridMismatchError`` (no interpolation).
    """
    if f.grid.same_as(coarse):
        return f
    ratio = coarse.spacing / f.grid.spacing
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > 1e-9:
        raise GridMismatchError(
            f"grids not commensurate: {f.grid.describe()} vs {coarse.describe()}"
        )
    slices = []
    for c, axis in enumerate("xyz"):
        pos = (coarse.origin[c] - f.grid.origin[c]) / f.grid.spacing
        start = int(round(pos))
        stop = start + stride * (coarse.dims[c] - 1)
        if abs(pos - start) > 1e-6 or start < 0 or stop >= f.grid.dims[c]:
            raise GridMismatchError(
                f"grids not commensurate: {f.grid.describe()} vs {coarse.describe()}"
            )
        slices.append(slice(start, stop + 1, stride))
    sx, sy, sz = slices
    return ScalarField(coarse, f.values[sz, sy, sx], f.kind)


def write_grid_file(path, f: ScalarField, comment: str = "pxclda density grid") -> None:
    """Write the ASCII density grid file (17 significant digits per value)."""
    g = f.grid
    lines = [
        comment.replace("\n", " "),
        "dims {} {} {}".format(*g.dims),
        f"spacing {g.spacing:.17g}",
        "origin {:.17g} {:.17g} {:.17g}".format(*g.origin),
    ]
    body = "\n".join(f"{v:.17g}" for v in f.flat())
    Path(path).write_text("\n".join(lines) + "\n" + body + "\n")


class GridFileError(ValueError):
    pass


def read_grid_file(path, kind: str = "field") -> ScalarField:
    """Read a density grid file, rejecting dimension/count mismatches."""
    text = Path(path).read_text().splitlines()
    if len(text) < 4:
        raise GridFileError(f"{path}: truncated header")
    try:
        key, *dims = text[1].split()
        if key != "dims" or len(dims) != 3:
            raise ValueError
        dims = tuple(int(d) for d in dims)
        key, h = text[2].split()
        if key != "spacing":
            raise ValueError
        key, *origin = text[3].split()
        if key != "origin" or len(origin) != 3:
            raise ValueError
        origin = tuple(float(o) for o in origin)
    except ValueError:
        raise GridFileError(f"{path}: malformed header") from None
    grid = Grid(dims, float(h), origin)
    values = np.array([float(t) for t in text[4:] if t.strip()])
    if values.size != grid.size:
        raise GridFileError(
            f"{path}: header declares {grid.size} values, file has {values.size}"
        )
    return ScalarField(grid, values.reshape(grid.shape), kind)
