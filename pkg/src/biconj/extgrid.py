"""Uniform grids and extended-real sampled functions.

Values live in (-inf, +inf]: ``numpy.inf`` is the +infinity sentinel and is
absorbing under max/add; ``-inf`` and NaN are rejected at construction.  A
sampled function must be proper (at least one finite value).

Grids are uniform, closed boxes.  In two dimensions the grid is the square
product of the same axis (same lo/hi/n per axis), and ``values[i, j]``
corresponds to ``(point(i), point(j))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PropernessError, ValidationError

__all__ = [
    "Grid",
    "DualGrid",
    "SampledFunction",
    "make_grid",
    "sample",
    "eval_interp",
]


@dataclass(frozen=True)
class Grid:
    """Uniform 1D or square-product 2D grid on the closed box [lo, hi]^dim.

    Node i sits at ``lo + i * spacing``; the arithmetic reproduces ``hi`` at
    ``i = n - 1`` to within a few units of representable precision (exactly
    for dyadic bounds and counts), which is validated at construction.
    """

    lo: float
    hi: float
    n: int
    dim: int = 1
    _points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dim must be 1 or 2, got {self.dim}", field="dim")
        if not isinstance(self.n, (int, np.integer)) or self.n < 3:
            raise ValidationError(f"n must be an integer >= 3, got {self.n!r}", field="n")
        lo = float(self.lo)
        hi = float(self.hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValidationError("grid bounds must be finite", field="lo")
        if not hi > lo:
            raise ValidationError(f"hi must exceed lo, got lo={lo!r}, hi={hi!r}", field="hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", int(self.n))
        pts = lo + np.arange(self.n, dtype=np.float64) * self.spacing
        err = abs(pts[-1] - hi)
        scale = max(abs(lo), abs(hi), hi - lo)
        if err > 4.0 * np.spacing(scale):
            raise ValidationError(
                f"lo + (n-1)*spacing = {pts[-1]!r} does not reproduce hi = {hi!r} "
                "within rounding; bounds/count are inconsistent at this precision",
                field="hi",
            )
        pts.setflags(write=False)
        object.__setattr__(self, "_points", pts)

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    def axis_points(self) -> np.ndarray:
        """Nodes along one axis (shared by both axes when dim == 2)."""
        return self._points

    def point(self, i) -> float | np.ndarray:
        """Coordinate(s) of node ``i`` (an index, or an index pair in 2D)."""
        if self.dim == 1:
            return float(self._points[i])
        i0, i1 = i
        return np.array([self._points[i0], self._points[i1]])

    def shape(self) -> tuple:
        return (self.n,) if self.dim == 1 else (self.n, self.n)

    def nearest_index(self, x):
        """Index of the node closest to ``x`` (ties go to the lower index)."""
        if self.dim == 1:
            j = int(np.clip(np.round((float(x) - self.lo) / self.spacing), 0, self.n - 1))
            return j
        x = np.asarray(x, dtype=float)
        return tuple(
            int(np.clip(np.round((x[k] - self.lo) / self.spacing), 0, self.n - 1))
            for k in range(2)
        )


class DualGrid(Grid):
    """A grid whose coordinate axis carries slope units (dual variables)."""


@dataclass(frozen=True)
class SampledFunction:
    """Function values on the nodes of a :class:`Grid`.

    values: float64 array, shape (n,) or (n, n); entries in (-inf, +inf],
    at least one finite.  The array is frozen after validation.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape():
            raise ValidationError(
                f"values shape {v.shape} does not match grid shape {self.grid.shape()}",
                field="values",
            )
        if np.isnan(v).any():
            raise ValidationError("values contain NaN", field="values")
        if np.isneginf(v).any():
            raise ValidationError("values contain -inf; only +inf is allowed", field="values")
        if not np.isfinite(v).any():
            raise PropernessError("properness violated: all values are +inf", field="values")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def spacing(self) -> float:
        return self.grid.spacing

    def finite_mask(self) -> np.ndarray:
        return np.isfinite(self.values)


def make_grid(lo: float, hi: float, n: int, dim: int = 1) -> Grid:
    """Construct a validated uniform grid (see :class:`Grid` for contracts)."""
    return Grid(lo, hi, n, dim)


def sample(spec, grid: Grid, check_analytic: bool = True) -> SampledFunction:
    """Evaluate a catalog function on every grid node.

    ``spec`` is a :class:`biconj.funlib.FunctionSpec`.  When the catalog entry
    declares analytic derivatives and ``check_analytic`` is set, the declared
    values are cross-checked against central finite differences at an interior
    probe node (a cheap guard against catalog typos; tolerance scales with
    spacing**2 and the entry's declared roughness).
    """
    from . import funlib

    return funlib._sample_impl(spec, grid, check_analytic)


def eval_interp(f: SampledFunction, x) -> float:
    """Piecewise-linear (1D) / bilinear (2D) interpolation at ``x``.

    +inf at any participating node makes the result +inf.  Queries must lie
    inside the closed domain box.  Exact node hits return the stored value.
    """
    g = f.grid
    if g.dim == 1:
        xq = float(x)
        if not (g.lo <= xq <= g.hi):
            raise ValidationError(f"query {xq!r} outside domain [{g.lo}, {g.hi}]", field="x")
        t = (xq - g.lo) / g.spacing
        i0 = min(int(t), g.n - 2)
        w = t - i0
        v0 = f.values[i0]
        v1 = f.values[i0 + 1]
        if w == 0.0:
            return float(v0)
        if w == 1.0:
            return float(v1)
        if np.isinf(v0) or np.isinf(v1):
            return float("inf")
        return float((1.0 - w) * v0 + w * v1)

    xq = np.asarray(x, dtype=float)
    if xq.shape != (2,):
        raise ValidationError(f"2D query must have two coordinates, got {x!r}", field="x")
    if not ((g.lo <= xq) & (xq <= g.hi)).all():
        raise ValidationError(f"query {x!r} outside domain box", field="x")
    idx = []
    wts = []
    for k in range(2):
        t = (xq[k] - g.lo) / g.spacing
        i0 = min(int(t), g.n - 2)
        idx.append(i0)
        wts.append(t - i0)
    (i, j), (wx, wy) = idx, wts
    corners = f.values[i : i + 2, j : j + 2]
    wmat = np.array([[(1 - wx) * (1 - wy), (1 - wx) * wy], [wx * (1 - wy), wx * wy]])
    active = wmat > 0.0
    if np.isinf(corners[active]).any():
        return float("inf")
    return float(np.sum(wmat[active] * corners[active]))
