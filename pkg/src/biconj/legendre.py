"""Discrete Legendre-Fenchel conjugation and lower convex envelopes.

Two engines compute the conjugate

    f*(y_j) = max_i  x_i * y_j - f[i]

over the grid nodes: a quadratic-cost brute force and a linear-time merge
over the lower convex hull of the sampled points.  Both evaluate candidates
with the *same* floating-point expression fl(fl(x*y) - f) and both resolve
argmax ties to the smallest node index, so their outputs can be compared
bitwise.  +inf samples drop out of every max; -inf and NaN are excluded at
construction time.

Hull orientation tests are certified: a floating-point filter decides the
sign of the cross product when its magnitude is safely above the rounding
error bound, and exact rational arithmetic decides the remaining cases.
Collinear points are kept as vertices — that is what makes smallest-index
tie resolution work on data with exact affine runs.

``biconjugate`` (1D) evaluates the lower convex envelope of the sampled
points directly from the certified hull: hull vertices keep their sample
value bitwise, bridged nodes get the chord value clamped under f, and a
stabilization pass re-scans until the output is convex as sampled.  The
construction makes the advertised identities exact: biconjugate <= f at
every node, biconjugate == f for convex-as-sampled input, and applying
biconjugate twice reproduces the first output bit for bit.  In 2D the
envelope is computed by double conjugation through an auto-derived dual
grid (per-axis factorization); its values are exact only up to the dual
resolution, and only the clamped inequality biconjugate <= f is exact.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import PropernessError, ValidationError
from .extgrid import DualGrid, Grid, SampledFunction

__all__ = [
    "ActivityMask",
    "conjugate_bruteforce",
    "conjugate_llt",
    "derive_dual_grid",
    "biconjugate",
    "biconjugate_via_conjugation",
    "activity_map",
    "lower_hull_indices",
]

_EPS = sys.float_info.epsilon
_FILTER = 16.0 * _EPS  # fp cross products larger than this (relative) keep their sign


def _cross_sign(xa, fa, xb, fb, xc, fc) -> int:
    """Sign of (fc-fa)*(xb-xa) - (fb-fa)*(xc-xa); negative means b lies
    strictly above the a--c chord.  Exact: falls back to rational arithmetic
    whenever the floating-point filter cannot certify the sign."""
    t1 = (fc - fa) * (xb - xa)
    t2 = (fb - fa) * (xc - xa)
    cross = t1 - t2
    bound = _FILTER * (abs(t1) + abs(t2))
    if cross > bound:
        return 1
    if cross < -bound:
        return -1
    e = (Fraction(fc) - Fraction(fa)) * (Fraction(xb) - Fraction(xa)) - (
        Fraction(fb) - Fraction(fa)
    ) * (Fraction(xc) - Fraction(xa))
    if e > 0:
        return 1
    if e < 0:
        return -1
    return 0


def lower_hull_indices(xs, fs) -> list:
    """Indices of the lower convex hull vertices of (xs[i], fs[i]).

    xs must be strictly increasing.  Non-finite fs entries are skipped.
    Strictly-above points are popped; collinear points are kept, so every
    point lying exactly on the envelope is a vertex.
    """
    hull: list = []
    append = hull.append
    pop = hull.pop
    inf = math.inf
    for i in range(len(xs)):
        fi = fs[i]
        if fi == inf:
            continue
        xi = xs[i]
        while len(hull) >= 2:
            b = hull[-1]
            a = hull[-2]
            if _cross_sign(xs[a], fs[a], xs[b], fs[b], xi, fi) < 0:
                pop()
            else:
                break
        append(i)
    return hull


def _as_dual(dual) -> Grid:
    if not isinstance(dual, Grid):
        raise ValidationError(f"dual grid expected, got {type(dual).__name__}", field="dual")
    return dual


def _check_proper(f: SampledFunction):
    if not np.isfinite(f.values).any():
        raise PropernessError("properness violated: every value is +inf", field="f")


# ---------------------------------------------------------------------------
# 1D kernels (shared by both dimensions; 2D factorizes into 1D passes)
# ---------------------------------------------------------------------------

_CHUNK = 1 << 22  # elements per brute-force block


def _conj1d_brute(x: np.ndarray, vals: np.ndarray, y: np.ndarray, want_argmax: bool):
    """max_i fl(fl(x*y_j) - vals_i) per dual node; -inf if vals is all +inf."""
    m = y.size
    out = np.empty(m, dtype=np.float64)
    arg = np.empty(m, dtype=np.int64) if want_argmax else None
    block = max(1, _CHUNK // max(1, x.size))
    for s in range(0, m, block):
        yb = y[s : s + block]
        cand = yb[:, None] * x[None, :]
        cand -= vals[None, :]
        out[s : s + block] = cand.max(axis=1)
        if want_argmax:
            arg[s : s + block] = cand.argmax(axis=1)
    return out, arg


def _conj1d_llt(x: np.ndarray, vals: np.ndarray, y: np.ndarray, want_argmax: bool):
    """Hull-merge conjugate; bitwise-compatible with _conj1d_brute."""
    finite = np.flatnonzero(np.isfinite(vals))
    if finite.size == 0:
        out = np.full(y.size, -np.inf)
        return out, (np.zeros(y.size, dtype=np.int64) if want_argmax else None)
    xs = x[finite]
    fs = vals[finite]
    hull = lower_hull_indices(xs.tolist(), fs.tolist())
    hv = np.asarray(hull, dtype=np.int64)
    xv = xs[hv]
    fv = fs[hv]
    slopes = (fv[1:] - fv[:-1]) / (xv[1:] - xv[:-1])
    pos = np.searchsorted(slopes, y, side="left")
    out = xv[pos] * y - fv[pos]
    arg = finite[hv[pos]] if want_argmax else None
    return out, arg


def _conj2d(f: SampledFunction, dual: Grid, kernel, want_argmax: bool):
    if want_argmax:
        raise ValidationError("argmax reporting is 1D-only", field="return_argmax")
    x = f.grid.axis_points()
    y = dual.axis_points()
    n = f.grid.n
    m = dual.n
    # pass 1: conjugate each row in the second coordinate
    g1 = np.empty((n, m), dtype=np.float64)
    for i1 in range(n):
        g1[i1], _ = kernel(x, f.values[i1], y, False)
    # pass 2: for each dual column, conjugate -g1 in the first coordinate;
    # fl(x*y - (-g)) == fl(x*y + g) bit for bit, and +inf (from improper
    # rows, i.e. rows of f with no finite entry) drops out of the max.
    out = np.empty((m, m), dtype=np.float64)
    col = np.empty(n, dtype=np.float64)
    for j2 in range(m):
        np.negative(g1[:, j2], out=col)
        out[:, j2], _ = kernel(x, col, y, False)
    return out


def conjugate_bruteforce(f: SampledFunction, dual, return_argmax: bool = False):
    """Conjugate by exhaustive enumeration: result[j] = max_i x_i*y_j - f[i].

    Ties take the smallest node index.  O(n*m) per 1D pass; 2D factorizes
    the sup per axis.  With ``return_argmax`` (1D) also returns the chosen
    node index per dual node.
    """
    dual = _as_dual(dual)
    _check_proper(f)
    if f.grid.dim != dual.dim:
        raise ValidationError(
            f"dual dimension {dual.dim} does not match primal {f.grid.dim}", field="dual"
        )
    if f.grid.dim == 1:
        out, arg = _conj1d_brute(f.grid.axis_points(), f.values, dual.axis_points(), return_argmax)
        res = SampledFunction(dual, out)
        return (res, arg) if return_argmax else res
    out = _conj2d(f, dual, _conj1d_brute, return_argmax)
    return SampledFunction(dual, out)


def conjugate_llt(f: SampledFunction, dual, return_argmax: bool = False):
    """Conjugate via the lower convex hull in O(n + m) per 1D pass.

    Output is bit-identical to conjugate_bruteforce: both engines evaluate
    candidates as fl(fl(x*y) - f) and resolve ties to the smallest index
    (collinear hull points are kept, and slope ties select the leftmost
    vertex).
    """
    dual = _as_dual(dual)
    _check_proper(f)
    if f.grid.dim != dual.dim:
        raise ValidationError(
            f"dual dimension {dual.dim} does not match primal {f.grid.dim}", field="dual"
        )
    if f.grid.dim == 1:
        out, arg = _conj1d_llt(f.grid.axis_points(), f.values, dual.axis_points(), return_argmax)
        res = SampledFunction(dual, out)
        return (res, arg) if return_argmax else res
    out = _conj2d(f, dual, _conj1d_llt, return_argmax)
    return SampledFunction(dual, out)


def derive_dual_grid(f: SampledFunction, count: int | None = None) -> DualGrid:
    """Dual grid bracketing all adjacent-node slopes of f.

    Bounds are [smin - sp, smax + sp] where smin/smax range over the
    finite-pair slopes (f[i+1]-f[i])/spacing (both axes pooled in 2D) and
    sp = (smax - smin)/(count - 1); the one-spacing margin adds a node on
    each side, so the grid has count + 2 nodes at spacing sp.  ``count``
    defaults to the primal node count.  Degenerate slope ranges (affine f,
    single finite node) fall back to unit spacing.
    """
    _check_proper(f)
    if count is None:
        count = f.grid.n
    if count < 3:
        raise ValidationError(f"dual node count must be >= 3, got {count}", field="count")
    v = f.values
    d = f.grid.spacing
    if f.grid.dim == 1:
        pairs = [(v[:-1], v[1:])]
    else:
        pairs = [(v[:-1, :], v[1:, :]), (v[:, :-1], v[:, 1:])]
    smin = math.inf
    smax = -math.inf
    for lo_vals, hi_vals in pairs:
        mask = np.isfinite(lo_vals) & np.isfinite(hi_vals)
        if mask.any():
            s = (hi_vals[mask] - lo_vals[mask]) / d
            smin = min(smin, float(s.min()))
            smax = max(smax, float(s.max()))
    if not math.isfinite(smin):
        smin = smax = 0.0
    sp = (smax - smin) / (count - 1)
    if sp == 0.0:
        sp = 1.0
    return DualGrid(smin - sp, smax + sp, count + 2, dim=f.grid.dim)


# ---------------------------------------------------------------------------
# Biconjugate (lower convex envelope)
# ---------------------------------------------------------------------------


def _envelope_values(xs: np.ndarray, vals: np.ndarray, hull: list) -> np.ndarray:
    """PL evaluation of the hull through (xs, vals): vertices keep their
    value bitwise, other nodes get the chord value clamped under vals."""
    out = vals.copy()
    for k in range(len(hull) - 1):
        a = hull[k]
        b = hull[k + 1]
        if b - a <= 1:
            continue
        xa = xs[a]
        s = (vals[b] - vals[a]) / (xs[b] - xa)
        seg = vals[a] + (xs[a + 1 : b] - xa) * s
        out[a + 1 : b] = np.minimum(seg, vals[a + 1 : b])
    return out


def _envelope_1d(xs: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Lower convex envelope of (xs, vals) with bitwise-stable output.

    Iterates hull-scan + chord-bridge passes until the VALUES stop changing.
    Each pass can only lower values (hull nodes keep theirs; bridged nodes
    take min(chord, current)), and floats are a discrete lattice bounded
    below by the smallest sample, so a fixed point is always reached.  The
    fixed point makes a second application reproduce the output bitwise:
    its first bridge pass returns the input unchanged.  Chord rounding may
    leave sub-ulp convexity wiggles in bridged runs; hull vertices of the
    input — every node the exact scan keeps — are never reassigned.
    """
    cur = vals
    for _ in range(10_000):
        hull = lower_hull_indices(xs.tolist(), cur.tolist())
        if len(hull) == cur.size:
            return cur
        nxt = _envelope_values(xs, cur, hull)
        if np.array_equal(nxt, cur):
            return cur
        cur = nxt
    raise RuntimeError("envelope stabilization did not converge")  # pragma: no cover


def biconjugate(f: SampledFunction) -> SampledFunction:
    """Lower convex envelope of the sampled points, on the same grid.

    1D: exact hull construction — output <= f nodewise, output == f wherever
    f is convex as sampled (bitwise), and the map is idempotent bit for bit.
    Nodes where f = +inf get the envelope value if they lie between finite
    nodes and stay +inf outside the finite span.

    2D: double conjugation through an auto-derived dual grid (per-axis
    factorized sups), clamped under f; exact only up to dual resolution.
    """
    _check_proper(f)
    if f.grid.dim == 2:
        dual = derive_dual_grid(f)
        fstar = conjugate_llt(f, dual)
        back = DualGrid(f.grid.lo, f.grid.hi, f.grid.n, dim=2)
        second = conjugate_llt(fstar, back)
        return SampledFunction(f.grid, np.minimum(f.values, second.values))
    v = f.values
    finite = np.flatnonzero(np.isfinite(v))
    lo = int(finite[0])
    hi = int(finite[-1])
    xs = f.grid.axis_points()[lo : hi + 1]
    vals = _envelope_1d(xs, v[lo : hi + 1])
    out = np.full(f.grid.n, np.inf)
    out[lo : hi + 1] = vals
    return SampledFunction(f.grid, out)


def biconjugate_via_conjugation(f: SampledFunction, count: int | None = None) -> SampledFunction:
    """Double conjugation through an auto-derived dual grid, without the
    envelope construction or any clamping.

    This is the raw transform route in every dimension; it agrees with
    ``biconjugate`` up to the dual grid's resolution and is exposed for
    cross-route comparisons.
    """
    _check_proper(f)
    dual = derive_dual_grid(f, count)
    fstar = conjugate_llt(f, dual)
    back = DualGrid(f.grid.lo, f.grid.hi, f.grid.n, dim=f.grid.dim)
    return SampledFunction(f.grid, conjugate_llt(fstar, back).values)


@dataclass(frozen=True)
class ActivityMask:
    """Where convexification changes f: gap = f - biconjugate (>= 0), and
    active <=> gap > 0, compared exactly (both values come from the same
    finite arithmetic; no tolerance is involved)."""

    grid: Grid
    active: np.ndarray
    gap: np.ndarray

    def __post_init__(self):
        active = np.asarray(self.active, dtype=bool)
        gap = np.asarray(self.gap, dtype=np.float64)
        if active.shape != gap.shape:
            raise ValidationError(
                f"active shape {active.shape} != gap shape {gap.shape}", field="active"
            )
        if np.isnan(gap).any():
            raise ValidationError("gap contains NaN", field="gap")
        if (gap < 0).any():
            raise ValidationError("negative gap entries", field="gap")
        if not np.array_equal(active, gap > 0):
            raise ValidationError("active mask must equal (gap > 0) exactly", field="active")
        active.setflags(write=False)
        gap.setflags(write=False)
        object.__setattr__(self, "active", active)
        object.__setattr__(self, "gap", gap)

    @property
    def active_count(self) -> int:
        return int(self.active.sum())


def activity_map(f: SampledFunction) -> ActivityMask:
    """Nodewise convexification gap f - biconjugate(f) and its support.

    Nodes where both values are +inf count as gap 0 (nothing changed);
    nodes where f = +inf but the envelope is finite get gap +inf.
    """
    b = biconjugate(f)
    both_inf = np.isinf(f.values) & np.isinf(b.values)
    gap = np.zeros(f.values.shape)
    gap[~both_inf] = f.values[~both_inf] - b.values[~both_inf]
    return ActivityMask(grid=f.grid, active=gap > 0, gap=gap)
