"""Catalog of test functions with declared analytic data.

Each catalog entry can declare closed-form derivatives and the constants a
verification needs (curvature at a point, sup norms).  Declared analytic
values are cross-checked against finite differences whenever a function is
sampled, so a typo in a formula fails fast rather than corrupting a report.

The bump family is C^2 with compact support:

    h(u) = A * (1 - ||u - c||^2 / rho^2)^3   for ||u - c|| <= rho, else 0

with sup|h| = A and sup|h''| = 6*A/rho^2 (the interior candidate s^2 = 0.6
yields only 4.8*A/rho^2, so the center dominates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ResolutionError, ValidationError
from .extgrid import Grid, SampledFunction

__all__ = [
    "FunctionSpec",
    "spec",
    "catalog",
    "make_bump",
    "analytic_values",
    "CounterexamplePhi",
    "counterexample_phi",
]


class _Entry:
    """Internal catalog record; closures receive the validated params dict."""

    def __init__(
        self,
        doc,
        params_doc,
        validate,
        value1=None,
        value2=None,
        grad1=None,
        grad2=None,
        hess1=None,
        hess2=None,
        lambda_at=None,
        L=None,
        M=None,
        fd_scale=None,
    ):
        self.doc = doc
        self.params_doc = params_doc
        self.validate = validate
        self.value1 = value1
        self.value2 = value2
        self.grad1 = grad1
        self.grad2 = grad2
        self.hess1 = hess1
        self.hess2 = hess2
        self.lambda_at = lambda_at
        self.L = L
        self.M = M
        self.fd_scale = fd_scale or (lambda p, grid: 0.0)

    def dims(self):
        out = []
        if self.value1 is not None:
            out.append(1)
        if self.value2 is not None:
            out.append(2)
        return out


def _need(params, allowed, required=()):
    extra = set(params) - set(allowed)
    if extra:
        raise ValidationError(f"unknown parameter(s) {sorted(extra)}", field="params")
    for r in required:
        if r not in params:
            raise ValidationError(f"missing required parameter {r!r}", field="params")


def _quadratic_validate(p):
    _need(p, {"a"})
    p.setdefault("a", 1.0)
    p["a"] = float(p["a"])


def _quadratic2d_validate(p):
    _need(p, {"a", "b", "c"})
    p.setdefault("a", 1.0)
    p.setdefault("b", 1.0)
    p.setdefault("c", 0.0)
    for k in ("a", "b", "c"):
        p[k] = float(p[k])


def _bump_validate(p):
    _need(p, {"A", "rho", "c"})
    p.setdefault("A", 1.0)
    p.setdefault("rho", 1.0)
    p.setdefault("c", 0.0)
    p["A"] = float(p["A"])
    p["rho"] = float(p["rho"])
    if p["A"] <= 0:
        raise ValidationError(f"bump A must be > 0, got {p['A']}", field="A")
    if p["rho"] <= 0:
        raise ValidationError(f"bump rho must be > 0, got {p['rho']}", field="rho")
    c = p["c"]
    p["c"] = tuple(float(ci) for ci in c) if isinstance(c, (tuple, list)) else float(c)


def _indicator_validate(p):
    _need(p, {"lo", "hi"}, required=("lo", "hi"))
    p["lo"] = float(p["lo"])
    p["hi"] = float(p["hi"])
    if not p["hi"] >= p["lo"]:
        raise ValidationError("indicator needs hi >= lo", field="hi")


def _no_params(p):
    _need(p, set())


def _logcosh(x):
    # log(cosh(x)) = |x| + log1p(exp(-2|x|)) - log(2), stable for large |x|
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


def _sech2(x):
    # sech^2(x) = 4 e^{-2|x|} / (1 + e^{-2|x|})^2, avoids cosh overflow
    e = np.exp(-2.0 * np.abs(x))
    return 4.0 * e / (1.0 + e) ** 2


def _bump_center(p, dim):
    c = p["c"]
    if isinstance(c, tuple):
        if dim == 1:
            raise ValidationError("bump center must be scalar in 1D", field="c")
        return np.asarray(c, dtype=float)
    return np.array([c, c])[:dim] if dim == 2 else c


def _bump_val1(p, x):
    s2 = ((np.asarray(x, dtype=float) - _bump_center(p, 1)) / p["rho"]) ** 2
    core = np.where(s2 < 1.0, 1.0 - s2, 0.0)
    return p["A"] * core**3


def _bump_grad1(p, x):
    rho, A = p["rho"], p["A"]
    u = (np.asarray(x, dtype=float) - _bump_center(p, 1)) / rho
    s2 = u**2
    core = np.where(s2 < 1.0, 1.0 - s2, 0.0)
    return -6.0 * A * u * core**2 / rho


def _bump_hess1(p, x):
    rho, A = p["rho"], p["A"]
    u = (np.asarray(x, dtype=float) - _bump_center(p, 1)) / rho
    s2 = u**2
    inside = s2 < 1.0
    return np.where(inside, A * (1.0 - s2) * (30.0 * s2 - 6.0) / rho**2, 0.0)


def _bump_val2(p, X, Y):
    c = _bump_center(p, 2)
    s2 = ((X - c[0]) ** 2 + (Y - c[1]) ** 2) / p["rho"] ** 2
    core = np.where(s2 < 1.0, 1.0 - s2, 0.0)
    return p["A"] * core**3


def _bump_grad2(p, X, Y):
    rho, A = p["rho"], p["A"]
    c = _bump_center(p, 2)
    ux, uy = (X - c[0]) / rho, (Y - c[1]) / rho
    s2 = ux**2 + uy**2
    core = np.where(s2 < 1.0, 1.0 - s2, 0.0)
    pref = -6.0 * A * core**2 / rho
    return np.stack([pref * ux, pref * uy])


def _bump_hess2(p, X, Y):
    rho, A = p["rho"], p["A"]
    c = _bump_center(p, 2)
    ux, uy = (X - c[0]) / rho, (Y - c[1]) / rho
    s2 = ux**2 + uy**2
    inside = s2 < 1.0
    core = np.where(inside, 1.0 - s2, 0.0)
    # D^2 h = (A/rho^2) * [ -6*core^2 * I + 24*core * u u^T ]
    diag = -6.0 * core**2
    hxx = A * (diag + 24.0 * core * ux * ux) / rho**2
    hyy = A * (diag + 24.0 * core * uy * uy) / rho**2
    hxy = A * (24.0 * core * ux * uy) / rho**2
    return np.stack([hxx, hxy, hxy, hyy])


_CATALOG: dict[str, _Entry] = {
    "quadratic": _Entry(
        "a/2 * ||x||^2 (curvature a everywhere)",
        {"a": "curvature (default 1.0)"},
        _quadratic_validate,
        value1=lambda p, x: 0.5 * p["a"] * np.asarray(x, dtype=float) ** 2,
        value2=lambda p, X, Y: 0.5 * p["a"] * (X**2 + Y**2),
        grad1=lambda p, x: p["a"] * np.asarray(x, dtype=float),
        grad2=lambda p, X, Y: np.stack([p["a"] * X, p["a"] * Y]),
        hess1=lambda p, x: np.full_like(np.asarray(x, dtype=float), p["a"]),
        hess2=lambda p, X, Y: np.stack(
            [np.full_like(X, p["a"]), np.zeros_like(X), np.zeros_like(X), np.full_like(X, p["a"])]
        ),
        lambda_at=lambda p, x: p["a"],
    ),
    "quadratic2d": _Entry(
        "a*x^2 + b*y^2 + c*x*y",
        {"a": "xx coefficient", "b": "yy coefficient", "c": "cross coefficient"},
        _quadratic2d_validate,
        value2=lambda p, X, Y: p["a"] * X**2 + p["b"] * Y**2 + p["c"] * X * Y,
        grad2=lambda p, X, Y: np.stack(
            [2.0 * p["a"] * X + p["c"] * Y, 2.0 * p["b"] * Y + p["c"] * X]
        ),
        hess2=lambda p, X, Y: np.stack(
            [
                np.full_like(X, 2.0 * p["a"]),
                np.full_like(X, p["c"]),
                np.full_like(X, p["c"]),
                np.full_like(X, 2.0 * p["b"]),
            ]
        ),
        lambda_at=lambda p, x: (p["a"] + p["b"])
        - math.sqrt((p["a"] - p["b"]) ** 2 + p["c"] ** 2),
    ),
    "logcosh": _Entry(
        "log(cosh(x)); strictly convex, curvature sech^2(x)",
        {},
        _no_params,
        value1=lambda p, x: _logcosh(np.asarray(x, dtype=float)),
        grad1=lambda p, x: np.tanh(np.asarray(x, dtype=float)),
        hess1=lambda p, x: _sech2(np.asarray(x, dtype=float)),
        lambda_at=lambda p, x: float(_sech2(np.float64(x))),
        fd_scale=lambda p, grid: 2.0,
    ),
    "quartic": _Entry(
        "x^4; convex with vanishing curvature at 0 (negative test)",
        {},
        _no_params,
        value1=lambda p, x: np.asarray(x, dtype=float) ** 4,
        grad1=lambda p, x: 4.0 * np.asarray(x, dtype=float) ** 3,
        hess1=lambda p, x: 12.0 * np.asarray(x, dtype=float) ** 2,
        lambda_at=lambda p, x: float(12.0 * x**2),
        fd_scale=lambda p, grid: 40.0 * max(abs(grid.lo), abs(grid.hi)),
    ),
    "abs": _Entry(
        "|x|; kink at 0 (negative test, no analytic derivatives declared)",
        {},
        _no_params,
        value1=lambda p, x: np.abs(np.asarray(x, dtype=float)),
    ),
    "doublewell": _Entry(
        "(|x| - 1)^2; nonconvex with wells at +-1",
        {},
        _no_params,
        value1=lambda p, x: (np.abs(np.asarray(x, dtype=float)) - 1.0) ** 2,
    ),
    "bump": _Entry(
        "A*(1 - ||u - c||^2/rho^2)^3 on the rho-ball, 0 outside; C^2, compact support",
        {"A": "amplitude > 0", "rho": "support radius > 0", "c": "center (scalar or pair)"},
        _bump_validate,
        value1=_bump_val1,
        value2=_bump_val2,
        grad1=_bump_grad1,
        grad2=_bump_grad2,
        hess1=_bump_hess1,
        hess2=_bump_hess2,
        L=lambda p: 6.0 * p["A"] / p["rho"] ** 2,
        M=lambda p: p["A"],
        fd_scale=lambda p, grid: 100.0 * p["A"] / min(p["rho"] ** 3, p["rho"] ** 4),
    ),
    "zero": _Entry(
        "identically 0 (trivial perturbation)",
        {},
        _no_params,
        value1=lambda p, x: np.zeros_like(np.asarray(x, dtype=float)),
        value2=lambda p, X, Y: np.zeros_like(X),
        grad1=lambda p, x: np.zeros_like(np.asarray(x, dtype=float)),
        grad2=lambda p, X, Y: np.stack([np.zeros_like(X), np.zeros_like(X)]),
        hess1=lambda p, x: np.zeros_like(np.asarray(x, dtype=float)),
        hess2=lambda p, X, Y: np.stack([np.zeros_like(X)] * 4),
        L=lambda p: 0.0,
        M=lambda p: 0.0,
    ),
    "indicator": _Entry(
        "0 on [lo, hi], +inf outside (effective domain declared by lo/hi)",
        {"lo": "left edge", "hi": "right edge"},
        _indicator_validate,
        value1=lambda p, x: np.where(
            (np.asarray(x, dtype=float) >= p["lo"]) & (np.asarray(x, dtype=float) <= p["hi"]),
            0.0,
            np.inf,
        ),
    ),
}


@dataclass(frozen=True)
class FunctionSpec:
    """A resolved catalog function plus validated parameters."""

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in _CATALOG:
            raise ValidationError(
                f"unknown function {self.name!r}; known: {sorted(_CATALOG)}", field="name"
            )
        p = dict(self.params)
        _CATALOG[self.name].validate(p)
        object.__setattr__(self, "params", p)

    @property
    def entry(self) -> _Entry:
        return _CATALOG[self.name]

    def supports_dim(self, dim: int) -> bool:
        return dim in self.entry.dims()


def spec(name: str, **params) -> FunctionSpec:
    """Resolve a catalog function by name with keyword parameters."""
    return FunctionSpec(name, params)


def make_bump(A: float = 1.0, rho: float = 1.0, c=0.0) -> FunctionSpec:
    """Compactly supported C^2 bump; see the module docstring for h and its
    constants sup|h| = A, sup|h''| = 6A/rho^2."""
    return spec("bump", A=A, rho=rho, c=c)


def catalog() -> dict:
    """Names, parameter docs and supported dimensions of every entry."""
    return {
        name: {"doc": e.doc, "params": dict(e.params_doc), "dims": e.dims()}
        for name, e in _CATALOG.items()
    }


def analytic_values(fs: FunctionSpec, x) -> dict:
    """Declared closed-form data of ``fs`` at the point ``x``.

    Returns a dict with ``value`` plus whichever of ``grad``, ``hess``,
    ``lambda``, ``L``, ``M`` the entry declares.  1D points are scalars,
    2D points are pairs.
    """
    e = fs.entry
    p = fs.params
    two_d = isinstance(x, (tuple, list, np.ndarray))
    out = {}
    if two_d:
        if e.value2 is None:
            raise ValidationError(f"{fs.name} does not support 2D", field="name")
        X = np.array([[float(x[0])]])
        Y = np.array([[float(x[1])]])
        out["value"] = float(e.value2(p, X, Y)[0, 0])
        if e.grad2 is not None:
            out["grad"] = e.grad2(p, X, Y)[:, 0, 0].copy()
        if e.hess2 is not None:
            h = e.hess2(p, X, Y)[:, 0, 0]
            out["hess"] = np.array([[h[0], h[1]], [h[2], h[3]]])
    else:
        if e.value1 is None:
            raise ValidationError(f"{fs.name} does not support 1D", field="name")
        xa = np.array([float(x)])
        out["value"] = float(e.value1(p, xa)[0])
        if e.grad1 is not None:
            out["grad"] = float(e.grad1(p, xa)[0])
        if e.hess1 is not None:
            out["hess"] = float(e.hess1(p, xa)[0])
    if e.lambda_at is not None:
        out["lambda"] = float(e.lambda_at(p, x if not two_d else tuple(x)))
    if e.L is not None:
        out["L"] = float(e.L(p))
    if e.M is not None:
        out["M"] = float(e.M(p))
    return out


def _sample_impl(fs: FunctionSpec, grid: Grid, check_analytic: bool) -> SampledFunction:
    e = fs.entry
    p = fs.params
    if grid.dim == 1:
        if e.value1 is None:
            raise ValidationError(f"{fs.name} does not support 1D grids", field="name")
        vals = np.asarray(e.value1(p, grid.axis_points()), dtype=np.float64)
    else:
        if e.value2 is None:
            raise ValidationError(f"{fs.name} does not support 2D grids", field="name")
        ax = grid.axis_points()
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        vals = np.asarray(e.value2(p, X, Y), dtype=np.float64)
    f = SampledFunction(grid, vals)
    if check_analytic:
        _cross_check(fs, f)
    return f


def _cross_check(fs: FunctionSpec, f: SampledFunction):
    """Compare declared derivatives with central differences at a probe node."""
    e, p, grid = fs.entry, fs.params, f.grid
    if e.grad1 is None and e.grad2 is None:
        return
    d = grid.spacing
    tol = e.fd_scale(p, grid) * d * d + 1e-8
    i = max(1, min(grid.n - 2, grid.n // 4))
    if grid.dim == 1:
        if not np.isfinite(f.values[i - 1 : i + 2]).all():
            return
        x = grid.point(i)
        fd_g = (f.values[i + 1] - f.values[i - 1]) / (2 * d)
        an_g = float(e.grad1(p, np.array([x]))[0])
        if abs(fd_g - an_g) > tol * (1.0 + abs(an_g)):
            raise ValidationError(
                f"declared gradient of {fs.name} at x={x} is {an_g}, finite difference "
                f"gives {fd_g} (tolerance {tol * (1 + abs(an_g)):.3g})",
                field="grad",
            )
        if e.hess1 is not None:
            fd_h = (f.values[i + 1] - 2 * f.values[i] + f.values[i - 1]) / (d * d)
            an_h = float(e.hess1(p, np.array([x]))[0])
            # entries are only C^2: third derivatives may jump, so second
            # differences are merely first-order accurate at isolated points
            tol_h = e.fd_scale(p, grid) * d + 1e-8
            if abs(fd_h - an_h) > tol_h * (1.0 + abs(an_h)):
                raise ValidationError(
                    f"declared hessian of {fs.name} at x={x} is {an_h}, finite difference "
                    f"gives {fd_h}",
                    field="hess",
                )
    else:
        x = grid.point((i, i))
        sub = f.values[i - 1 : i + 2, i - 1 : i + 2]
        if not np.isfinite(sub).all():
            return
        fd_gx = (f.values[i + 1, i] - f.values[i - 1, i]) / (2 * d)
        fd_gy = (f.values[i, i + 1] - f.values[i, i - 1]) / (2 * d)
        X = np.array([[x[0]]])
        Y = np.array([[x[1]]])
        an = e.grad2(p, X, Y)[:, 0, 0]
        if max(abs(fd_gx - an[0]), abs(fd_gy - an[1])) > tol * (1.0 + np.abs(an).max()):
            raise ValidationError(
                f"declared 2D gradient of {fs.name} at {tuple(x)} disagrees with "
                f"finite differences",
                field="grad",
            )


# ---------------------------------------------------------------------------
# Flat-set counterexample
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CounterexamplePhi:
    """phi built from a density that vanishes on a sparse union of intervals.

    E = union over k = 1..K of +-[2^-k, 2^-k * (1 + 4^-k)], g = 0 on E and 1
    elsewhere, phi(x) = int_0^x int_0^s g(t) dt ds.  phi is convex, has a
    second derivative 1 at 0 in the Lebesgue sense, yet every neighborhood of
    0 contains intervals where the density vanishes.

    Node values are exact: with the interval endpoints grid-aligned, phi on
    each cell is a polynomial of degree <= 2 and the double cumulative sum is
    integer arithmetic scaled by spacing^2 / 2 (all exact in float64 for the
    supported resolutions).
    """

    fn: SampledFunction
    intervals: tuple
    K: int
    p: int

    def q(self, rho: float) -> float:
        """Symmetric second difference quotient (phi(rho)+phi(-rho)-2 phi(0))/rho^2.

        ``rho`` must be a grid node coordinate (multiples of spacing).
        """
        g = self.fn.grid
        d = g.spacing
        j = int(round(rho / d))
        if not (0 < j <= (g.n - 1) // 2) or rho != j * d:
            raise ValidationError(
                f"rho={rho!r} is not a positive grid radius (spacing {d})", field="rho"
            )
        mid = (g.n - 1) // 2
        v = self.fn.values
        return float((v[mid + j] + v[mid - j] - 2.0 * v[mid]) / (rho * rho))

    def flat_measure(self, rho: float) -> float:
        """Lebesgue measure of E intersected with (-rho, rho)."""
        if rho <= 0:
            raise ValidationError("rho must be positive", field="rho")
        total = 0.0
        for a, b in self.intervals:
            total += max(0.0, min(b, rho) - a)
        return 2.0 * total


_MAX_P = 25  # keeps the double cumulative sum below 2^53 (exact in float64)


def counterexample_phi(K: int, p: int | None = None) -> CounterexamplePhi:
    """Construct the flat-set counterexample on [-1, 1].

    ``p`` sets the resolution (spacing 2^-p); it must satisfy p >= 3K + 1 so
    the innermost interval spans at least two grid cells, and defaults to
    exactly that.  K is capped so all arithmetic stays exact.
    """
    if not isinstance(K, int) or K < 4:
        raise ValidationError(f"K must be an integer >= 4, got {K!r}", field="K")
    needed = 3 * K + 1
    if p is None:
        p = needed
    if p < needed:
        raise ResolutionError(
            f"resolution 2^-{p} too coarse for K={K}: the innermost flat interval has "
            f"length 8^-{K}; need p >= {needed}",
            field="p",
        )
    if p > _MAX_P:
        raise ResolutionError(
            f"p={p} exceeds the supported maximum {_MAX_P} (exactness bound); "
            f"largest supported K is {( _MAX_P - 1) // 3}",
            field="K",
        )
    N = 1 << p  # cells on [0, 1]
    g = np.ones(N, dtype=np.int64)
    intervals = []
    for k in range(1, K + 1):
        lo_idx = 1 << (p - k)
        hi_idx = lo_idx + (1 << (p - 3 * k))
        g[lo_idx:hi_idx] = 0
        intervals.append((2.0**-k, 2.0**-k + 2.0 ** (-3 * k)))

    # F(node i) = spacing * C_i with C_i = number of density-1 cells below i;
    # phi(node i) = (spacing^2 / 2) * T_i with T_i = sum_{c < i} (2*C_c + g_c).
    cum = np.cumsum(g)  # cum[c] = C_{c+1}
    A = 2 * cum - g  # A_c = 2*C_c + g_c since C_c = cum[c] - g[c]
    T = np.empty(N + 1, dtype=np.int64)
    T[0] = 0
    np.cumsum(A, out=T[1:])
    del cum, A
    d = 2.0**-p
    phi_half = T.astype(np.float64) * (d * d * 0.5)
    del T
    full = np.concatenate([phi_half[:0:-1], phi_half])
    del phi_half
    grid = Grid(-1.0, 1.0, 2 * N + 1)
    fn = SampledFunction(grid, full)
    return CounterexamplePhi(fn=fn, intervals=tuple(intervals), K=K, p=p)
