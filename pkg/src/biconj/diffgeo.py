"""Finite-difference calculus on sampled functions.

All stencils use the grid spacing as the step and touch existing nodes only,
so every quantity here is reproducible from the stored samples alone.
Central differences are exact (in exact arithmetic) for polynomials of
degree <= 2; on dyadic data the floating-point results are exact too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .extgrid import SampledFunction

__all__ = [
    "HessianAt",
    "SubdiffInterval",
    "grad_fd",
    "hessian_fd",
    "lambda_min",
    "sup_norm",
    "hess_sup_norm",
    "subdifferential_1d",
]


@dataclass(frozen=True)
class HessianAt:
    """Finite-difference Hessian at a node; ``matrix`` is (d, d) and exactly
    symmetric because each off-diagonal entry is computed once."""

    matrix: np.ndarray
    step: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (1, 2):
            raise ValidationError(f"matrix must be 1x1 or 2x2, got shape {m.shape}", field="matrix")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class SubdiffInterval:
    """Subdifferential of the piecewise-linear interpolant at a node: the
    closed slope interval [left_slope, right_slope]."""

    left_slope: float
    right_slope: float

    def __post_init__(self):
        if self.left_slope > self.right_slope:
            raise ValidationError(
                f"empty slope interval: left {self.left_slope} > right {self.right_slope}",
                field="left_slope",
            )

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.left_slope + self.right_slope)

    @property
    def width(self) -> float:
        return self.right_slope - self.left_slope

    def __contains__(self, s) -> bool:
        return self.left_slope <= s <= self.right_slope


def _interior_index(f: SampledFunction, x, opname):
    g = f.grid
    if g.dim == 1:
        i = int(x)
        if not (1 <= i <= g.n - 2):
            raise ValidationError(
                f"{opname} needs an interior node; index {i} touches the boundary of "
                f"a {g.n}-node grid",
                field="x",
            )
        return i
    i, j = int(x[0]), int(x[1])
    if not (1 <= i <= g.n - 2 and 1 <= j <= g.n - 2):
        raise ValidationError(
            f"{opname} needs an interior node; index ({i}, {j}) touches the boundary",
            field="x",
        )
    return i, j


def grad_fd(f: SampledFunction, x):
    """Central-difference gradient at interior node ``x``.

    Returns a float in 1D and a length-2 array in 2D.  Exact for sampled
    affine and quadratic data.
    """
    idx = _interior_index(f, x, "grad_fd")
    d = f.grid.spacing
    v = f.values
    if f.grid.dim == 1:
        i = idx
        return float((v[i + 1] - v[i - 1]) / (2.0 * d))
    i, j = idx
    gx = (v[i + 1, j] - v[i - 1, j]) / (2.0 * d)
    gy = (v[i, j + 1] - v[i, j - 1]) / (2.0 * d)
    return np.array([gx, gy])


def hessian_fd(f: SampledFunction, x) -> HessianAt:
    """Second central differences at interior node ``x``; the 2D cross term
    uses the 4-point corner stencil."""
    idx = _interior_index(f, x, "hessian_fd")
    d = f.grid.spacing
    v = f.values
    if f.grid.dim == 1:
        i = idx
        hxx = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (d * d)
        return HessianAt(matrix=np.array([[hxx]]), step=d)
    i, j = idx
    hxx = (v[i + 1, j] - 2.0 * v[i, j] + v[i - 1, j]) / (d * d)
    hyy = (v[i, j + 1] - 2.0 * v[i, j] + v[i, j - 1]) / (d * d)
    hxy = (v[i + 1, j + 1] + v[i - 1, j - 1] - v[i + 1, j - 1] - v[i - 1, j + 1]) / (4.0 * d * d)
    return HessianAt(matrix=np.array([[hxx, hxy], [hxy, hyy]]), step=d)


def lambda_min(H) -> float:
    """Smallest eigenvalue of a 1x1 or symmetric 2x2 matrix (closed form).

    Accepts a HessianAt or a plain matrix.  May be negative; callers decide
    what nonconvexity means.
    """
    m = np.asarray(H.matrix if isinstance(H, HessianAt) else H, dtype=np.float64)
    if m.shape == (1, 1):
        return float(m[0, 0])
    if m.shape != (2, 2):
        raise ValidationError(f"expected 1x1 or 2x2 matrix, got shape {m.shape}", field="H")
    a, b, c = float(m[0, 0]), float(m[1, 1]), float(m[0, 1])
    return 0.5 * (a + b) - math.hypot(0.5 * (a - b), c)


def sup_norm(f: SampledFunction) -> float:
    """max |f| over all nodes; rejects functions with +inf values."""
    if np.isinf(f.values).any():
        raise ValidationError("sup_norm needs finite values everywhere", field="f")
    return float(np.abs(f.values).max())


def hess_sup_norm(h: SampledFunction) -> float:
    """Largest spectral norm of the FD Hessian over all interior nodes.

    1D: max |second difference| / spacing^2.  2D: the symmetric 2x2 spectral
    norm |(p+q)/2| + sqrt(((p-q)/2)^2 + r^2) evaluated vectorized.
    """
    if np.isinf(h.values).any():
        raise ValidationError("hess_sup_norm needs finite values everywhere", field="h")
    v = h.values
    d = h.grid.spacing
    d2 = d * d
    if h.grid.dim == 1:
        second = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / d2
        return float(np.abs(second).max())
    p = (v[2:, 1:-1] - 2.0 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / d2
    q = (v[1:-1, 2:] - 2.0 * v[1:-1, 1:-1] + v[1:-1, :-2]) / d2
    r = (v[2:, 2:] + v[:-2, :-2] - v[2:, :-2] - v[:-2, 2:]) / (4.0 * d2)
    spec = np.abs(0.5 * (p + q)) + np.hypot(0.5 * (p - q), r)
    return float(spec.max())


def subdifferential_1d(f: SampledFunction, x) -> SubdiffInterval:
    """Slope interval [(f[x]-f[x-1])/spacing, (f[x+1]-f[x])/spacing].

    For the piecewise-linear interpolant of a convex sample this is exactly
    the subdifferential at the node.  Midpoint convexity is checked at the
    node and both neighbors (where the stencil fits); a violation beyond
    rounding noise is an error, and a violation within rounding noise is
    collapsed to a point interval.
    """
    if f.grid.dim != 1:
        raise ValidationError("subdifferential_1d is one-dimensional only", field="f")
    i = _interior_index(f, x, "subdifferential_1d")
    v = f.values
    if not np.isfinite(v[i]):
        raise ValidationError(f"f is +inf at node {i}; subdifferential is empty there", field="x")
    d = f.grid.spacing
    for k in range(max(1, i - 1), min(f.grid.n - 2, i + 1) + 1):
        window = v[k - 1 : k + 2]
        if np.isinf(window).any():
            continue
        bend = (window[0] - window[1]) + (window[2] - window[1])
        tol = 8.0 * np.spacing(max(1.0, float(np.abs(window).max())))
        if bend < -tol:
            raise ValidationError(
                f"midpoint convexity violated at node {k}: "
                f"f[{k - 1}] + f[{k + 1}] - 2 f[{k}] = {bend}",
                field="x",
            )
    left = (v[i] - v[i - 1]) / d
    right = (v[i + 1] - v[i]) / d
    if left > right:
        # survived the bend check, so this is rounding noise; collapse
        left = right = 0.5 * (left + right)
    return SubdiffInterval(left_slope=float(left), right_slope=float(right))
