"""Pointwise verification of biconjugation locality.

For a sampled base function phi that is strictly convex at an anchor node x
(curvature lambda > 0) and a C^2 compactly supported perturbation h, the
claim under test is: with

    t_x = min( lambda / (4 L),  lambda delta^2 / (64 M) ),
    L = sup |hess h|,  M = sup |h|,

every |t| < t_x leaves f = phi + t*h untouched by convexification at x
(zero gap between f and its lower convex envelope) and keeps the envelope's
slope interval centered on the gradient of f.  The checks here replay the
supporting inequalities step by step — on a ball around x, on the sphere
bounding it, and outside — each as a worst-case margin over grid nodes that
must come out nonnegative.

Index convention: every ``x`` argument below is a node index (an integer in
1D, an index pair in 2D), as in :mod:`biconj.diffgeo`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import funlib
from .diffgeo import grad_fd, hessian_fd, hess_sup_norm, lambda_min, subdifferential_1d, sup_norm
from .errors import HypothesisFailure, TruncationError, ValidationError
from .extgrid import Grid, SampledFunction, sample
from .legendre import activity_map, biconjugate, conjugate_llt, derive_dual_grid

__all__ = [
    "PropositionConstants",
    "AffineMinorant",
    "TangentCertificate",
    "OutsideBallMargins",
    "PerTRecord",
    "PropositionReport",
    "VelocityEstimate",
    "ThresholdBracket",
    "find_delta",
    "compute_tx",
    "check_on_ball",
    "check_sphere_margin",
    "check_outside_ball",
    "check_tangent_global",
    "verify_gradient_equality",
    "sweep_t",
    "default_schedule",
    "activation_threshold",
    "gangbo_remainder",
    "velocity_at_zero",
    "resolve_constants",
    "run_verification",
]


def compute_tx(lam: float, delta: float, L: float, M: float, cap: float = 1.0) -> float:
    """min(lam/(4 L), lam*delta^2/(64 M)) with zero-denominator conventions:
    M = 0 drops the second branch, L = 0 drops the first, and both zero
    yield the configured cap (h is then identically zero and any t works)."""
    if lam <= 0:
        raise ValidationError(f"lambda must be > 0, got {lam}", field="lambda")
    if delta <= 0:
        raise ValidationError(f"delta must be > 0, got {delta}", field="delta")
    if L < 0 or M < 0:
        raise ValidationError("L and M must be >= 0", field="L")
    branch1 = lam / (4.0 * L) if L > 0 else math.inf
    branch2 = lam * delta * delta / (64.0 * M) if M > 0 else math.inf
    tx = min(branch1, branch2)
    return cap if tx == math.inf else tx


@dataclass(frozen=True)
class PropositionConstants:
    """Constants of one verification anchor; t_x is revalidated against its
    defining formula on construction."""

    x: object  # anchor coordinate (float in 1D, length-2 array in 2D)
    lam: float
    delta: float
    L: float
    M: float
    t_x: float
    tx_cap: float = 1.0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValidationError(f"lam must be > 0, got {self.lam}", field="lam")
        if self.delta <= 0:
            raise ValidationError(f"delta must be > 0, got {self.delta}", field="delta")
        expected = compute_tx(self.lam, self.delta, self.L, self.M, self.tx_cap)
        if self.t_x != expected:
            raise ValidationError(
                f"t_x = {self.t_x!r} does not match its formula value {expected!r}",
                field="t_x",
            )


@dataclass(frozen=True)
class AffineMinorant:
    """a(y) = base_value + <slope, y - anchor>; a(anchor) == base_value
    exactly (the inner product term vanishes identically)."""

    base_value: float
    slope: object
    anchor: object

    def evaluate(self, y):
        if np.ndim(self.slope) == 0:
            return self.base_value + self.slope * (np.asarray(y) - self.anchor)
        diff = np.asarray(y) - np.asarray(self.anchor)
        return self.base_value + float(np.dot(np.asarray(self.slope), diff))


@dataclass(frozen=True)
class TangentCertificate:
    certified: bool
    worst_violation: float
    strict_away: bool
    minorant: AffineMinorant


@dataclass(frozen=True)
class OutsideBallMargins:
    """Worst margins over the exterior nodes ||u|| >= delta.

    ``margin`` is the conclusion bound: f(x+u) - f(x) - <grad f(x), u> -
    (lam/32) delta^2.  ``phi_support_margin`` replays the separate ray
    argument: phi(x+u) must dominate the support line phi(x) +
    <grad f(x), u> + (lam/16) delta^2 on the same nodes."""

    margin: float
    phi_support_margin: float


def _node_index(f: SampledFunction, x):
    """Snap an anchor coordinate to its nearest node index (per axis in 2D)."""
    return f.grid.nearest_index(x)


def _offsets_1d(f: SampledFunction, i: int):
    pts = f.grid.axis_points()
    return pts - pts[i]


def _offsets_2d(f: SampledFunction, idx):
    pts = f.grid.axis_points()
    u1 = (pts - pts[idx[0]])[:, None]
    u2 = (pts - pts[idx[1]])[None, :]
    return u1, u2


def find_delta(phi: SampledFunction, x, lam: float) -> float:
    """Largest grid-aligned radius k*spacing such that every node u with
    0 < ||u|| <= k*spacing satisfies

        phi(x+u) >= phi(x) + <grad phi(x), u> + (lam/4) ||u||^2,

    capped so the ball stays strictly inside the grid.  Raises when not even
    the first ring certifies (quadratic growth fails at x numerically)."""
    if lam <= 0:
        raise ValidationError(f"lambda must be > 0, got {lam}", field="lambda")
    idx = _node_index(phi, x)
    d = phi.grid.spacing
    n = phi.grid.n
    g = grad_fd(phi, idx)  # also enforces interior x
    if phi.grid.dim == 1:
        i = idx
        kmax = min(i, n - 1 - i) - 1
        if kmax < 1:
            raise HypothesisFailure(f"node {i} has no interior neighborhood to certify")
        u = _offsets_1d(phi, i)
        margin = phi.values - (phi.values[i] + g * u + 0.25 * lam * u * u)
        ok_plus = margin[i + 1 : i + kmax + 1] >= 0
        ok_minus = margin[i - kmax : i][::-1] >= 0
        ok = ok_plus & ok_minus
    else:
        i, j = idx
        kmax = min(i, n - 1 - i, j, n - 1 - j) - 1
        if kmax < 1:
            raise HypothesisFailure(f"node ({i}, {j}) has no interior neighborhood to certify")
        u1, u2 = _offsets_2d(phi, idx)
        r2 = u1 * u1 + u2 * u2
        margin = phi.values - (phi.values[i, j] + g[0] * u1 + g[1] * u2 + 0.25 * lam * r2)
        good = margin >= 0
        ok = np.empty(kmax, dtype=bool)
        for k in range(1, kmax + 1):
            ring = (r2 > 0) & (r2 <= (k * d) ** 2)
            ok[k - 1] = bool(good[ring].all())
    certified = 0
    for k in range(ok.size):
        if not ok[k]:
            break
        certified = k + 1
    if certified == 0:
        raise HypothesisFailure(
            "no certifiable radius: the quadratic lower bound fails at the first ring"
        )
    return certified * d


def _ball_mask(f: SampledFunction, idx, r_lo: float, r_hi: float):
    """Boolean mask of nodes with r_lo <= ||u|| <= r_hi, excluding u = 0."""
    if f.grid.dim == 1:
        u = _offsets_1d(f, idx)
        r = np.abs(u)
    else:
        u1, u2 = _offsets_2d(f, idx)
        r = np.sqrt(u1 * u1 + u2 * u2)
    return (r > 0) & (r >= r_lo) & (r <= r_hi)


def _linear_part(f: SampledFunction, idx, g):
    if f.grid.dim == 1:
        return g * _offsets_1d(f, idx)
    u1, u2 = _offsets_2d(f, idx)
    return g[0] * u1 + g[1] * u2


def _radius_sq(f: SampledFunction, idx):
    if f.grid.dim == 1:
        u = _offsets_1d(f, idx)
        return u * u
    u1, u2 = _offsets_2d(f, idx)
    return u1 * u1 + u2 * u2


def check_on_ball(
    f: SampledFunction, x, lam: float, delta: float, t: float, L: float
) -> float:
    """Worst margin of f(x+u) - f(x) - <grad f(x), u> - (lam/8)||u||^2 over
    0 < ||u|| <= delta.  Requires |t| < lam/(4 L) (vacuous when L = 0)."""
    if L > 0 and not abs(t) < lam / (4.0 * L):
        raise ValidationError(
            f"|t| = {abs(t)} is not below lambda/(4 L) = {lam / (4.0 * L)}", field="t"
        )
    idx = _node_index(f, x)
    g = grad_fd(f, idx)
    fx = f.values[idx] if f.grid.dim == 1 else f.values[idx[0], idx[1]]
    margin = f.values - (fx + _linear_part(f, idx, g) + 0.125 * lam * _radius_sq(f, idx))
    mask = _ball_mask(f, idx, 0.0, delta)
    if not mask.any():
        raise ValidationError("no nodes inside the ball", field="delta")
    return float(margin[mask].min())


def check_sphere_margin(
    phi: SampledFunction, h: SampledFunction, x, delta: float, t: float, lam: float,
    M: float | None = None,
) -> float:
    """Worst margin of phi(x+u) - phi(x) - <grad f(x), u> - (lam/16) delta^2
    over the shell delta - spacing <= ||u|| <= delta, where f = phi + t*h.
    Requires |t| < lam*delta^2/(32 M)."""
    if M is None:
        M = sup_norm(h)
    if M > 0 and not abs(t) < lam * delta * delta / (32.0 * M):
        raise ValidationError(
            f"|t| = {abs(t)} is not below lambda*delta^2/(32 M) "
            f"= {lam * delta * delta / (32.0 * M)}",
            field="t",
        )
    idx = _node_index(phi, x)
    f = SampledFunction(phi.grid, phi.values + t * h.values)
    g = grad_fd(f, idx)
    d = phi.grid.spacing
    mask = _ball_mask(phi, idx, max(0.0, delta - d), delta)
    if not mask.any():
        raise ValidationError("discrete sphere shell contains no nodes", field="delta")
    phix = phi.values[idx] if phi.grid.dim == 1 else phi.values[idx[0], idx[1]]
    margin = phi.values - (phix + _linear_part(phi, idx, g) + lam * delta * delta / 16.0)
    return float(margin[mask].min())


def check_outside_ball(
    f: SampledFunction, phi: SampledFunction, h: SampledFunction, x, delta: float,
    t: float, lam: float, M: float | None = None,
) -> OutsideBallMargins:
    """Worst exterior margins (see OutsideBallMargins) over ||u|| >= delta.
    Requires |t| < lam*delta^2/(64 M); the sphere check is assumed to have
    passed."""
    if M is None:
        M = sup_norm(h)
    if M > 0 and not abs(t) < lam * delta * delta / (64.0 * M):
        raise ValidationError(
            f"|t| = {abs(t)} is not below lambda*delta^2/(64 M) "
            f"= {lam * delta * delta / (64.0 * M)}",
            field="t",
        )
    idx = _node_index(f, x)
    g = grad_fd(f, idx)
    mask = _ball_mask(f, idx, delta, math.inf)
    if not mask.any():
        raise ValidationError("no nodes outside the ball", field="delta")
    fx = f.values[idx] if f.grid.dim == 1 else f.values[idx[0], idx[1]]
    phix = phi.values[idx] if phi.grid.dim == 1 else phi.values[idx[0], idx[1]]
    lin = _linear_part(f, idx, g)
    margin = f.values - (fx + lin + lam * delta * delta / 32.0)
    support = phi.values - (phix + lin + lam * delta * delta / 16.0)
    return OutsideBallMargins(
        margin=float(margin[mask].min()),
        phi_support_margin=float(support[mask].min()),
    )


def check_tangent_global(f: SampledFunction, x) -> TangentCertificate:
    """Does the tangent line/plane of f at x minorize f over every node?

    certified means no violation anywhere; strict_away means the inequality
    is strict at every node other than x.  The returned minorant witnesses
    f(x) as an affine-envelope value when certified."""
    idx = _node_index(f, x)
    g = grad_fd(f, idx)
    fx = f.values[idx] if f.grid.dim == 1 else f.values[idx[0], idx[1]]
    if not np.isfinite(fx):
        raise ValidationError("f is not finite at the anchor", field="x")
    viol = f.values - (fx + _linear_part(f, idx, g))
    away = np.ones(f.grid.shape(), dtype=bool)
    away[idx] = False
    worst = float(viol[away].min())
    anchor = f.grid.point(idx)
    return TangentCertificate(
        certified=worst >= 0.0,
        worst_violation=min(worst, 0.0),
        strict_away=worst > 0.0,
        minorant=AffineMinorant(base_value=float(fx), slope=g, anchor=anchor),
    )


def _axis_interval(values_1d: np.ndarray, i: int, d: float):
    left = (values_1d[i] - values_1d[i - 1]) / d
    right = (values_1d[i + 1] - values_1d[i]) / d
    if left > right:  # rounding noise on a flat stretch
        left = right = 0.5 * (left + right)
    return left, right


def _gradient_distance(b: SampledFunction, idx, g) -> float:
    """Distance from the gradient estimate g to the envelope's slope
    interval (1D) or per-axis slope box (2D, sup-norm)."""
    d = b.grid.spacing
    if b.grid.dim == 1:
        iv = subdifferential_1d(b, idx)
        return max(0.0, iv.left_slope - g, g - iv.right_slope)
    i, j = idx
    l1, r1 = _axis_interval(b.values[:, j], i, d)
    l2, r2 = _axis_interval(b.values[i, :], j, d)
    d1 = max(0.0, l1 - g[0], g[0] - r1)
    d2 = max(0.0, l2 - g[1], g[1] - r2)
    return max(d1, d2)


def verify_gradient_equality(f: SampledFunction, x, tangent: TangentCertificate | None = None) -> float:
    """Distance from grad f(x) to the slope interval of the lower convex
    envelope at x; requires the global tangent certificate."""
    idx = _node_index(f, x)
    cert = tangent if tangent is not None else check_tangent_global(f, x)
    if not cert.certified:
        raise ValidationError(
            "tangent minorant not certified at x; gradient comparison undefined", field="x"
        )
    b = biconjugate(f)
    return _gradient_distance(b, idx, grad_fd(f, idx))


# ---------------------------------------------------------------------------
# Schedules, sweeps, reports
# ---------------------------------------------------------------------------


def default_schedule(t_x: float, halvings: int = 6, probe_cap: float = 0.25) -> list:
    """Geometric halvings {±t_x/2^k, k = 1..halvings} inside the guaranteed
    window, plus doubling probes {±2 t_x, ±4 t_x, ...} up to probe_cap."""
    if t_x <= 0:
        raise ValidationError(f"t_x must be > 0, got {t_x}", field="t_x")
    ts = [t_x / (1 << k) for k in range(1, halvings + 1)]
    probe = 2.0 * t_x
    while probe <= probe_cap:
        ts.append(probe)
        probe *= 2.0
    ts = sorted(ts)
    return [-t for t in reversed(ts)] + ts


@dataclass(frozen=True)
class PerTRecord:
    t: float
    equality_gap: float
    gradient_error: float
    minorant_certified: bool
    worst_violation: float
    active_count: int
    checks_applicable: bool = False
    on_ball_margin: float | None = None
    sphere_margin: float | None = None
    outside_margin: float | None = None
    outside_phi_support_margin: float | None = None

    def __post_init__(self):
        if not self.equality_gap >= 0.0:
            raise ValidationError(
                f"equality gap must be >= 0, got {self.equality_gap}", field="equality_gap"
            )


@dataclass(frozen=True)
class PropositionReport:
    constants: PropositionConstants
    per_t: list
    activation_threshold: float | None
    activation_at_least_tx: bool
    provenance: dict = field(default_factory=dict)

    def inside_records(self) -> list:
        return [r for r in self.per_t if abs(r.t) < self.constants.t_x]

    @property
    def all_inside_certified(self) -> bool:
        """Zero gap and zero gradient distance at every |t| < t_x."""
        return all(
            r.equality_gap == 0.0 and r.gradient_error == 0.0 and r.minorant_certified
            for r in self.inside_records()
        )


def _assemble(phi: SampledFunction, h: SampledFunction, t: float) -> SampledFunction:
    return SampledFunction(phi.grid, phi.values + t * h.values)


def _per_t_record(
    phi: SampledFunction, h: SampledFunction, idx, t: float, constants: PropositionConstants
) -> PerTRecord:
    f = _assemble(phi, h, t)
    x_pt = phi.grid.point(idx)
    amap = activity_map(f)
    gap = float(amap.gap[idx] if f.grid.dim == 1 else amap.gap[idx[0], idx[1]])
    cert = check_tangent_global(f, x_pt)
    b = biconjugate(f)
    gdist = _gradient_distance(b, idx, grad_fd(f, idx))
    inside = abs(t) < constants.t_x
    extras = {}
    if inside:
        extras = {
            "checks_applicable": True,
            "on_ball_margin": check_on_ball(
                f, x_pt, constants.lam, constants.delta, t, constants.L
            ),
            "sphere_margin": check_sphere_margin(
                phi, h, x_pt, constants.delta, t, constants.lam, constants.M
            ),
        }
        outside = check_outside_ball(
            f, phi, h, x_pt, constants.delta, t, constants.lam, constants.M
        )
        extras["outside_margin"] = outside.margin
        extras["outside_phi_support_margin"] = outside.phi_support_margin
    return PerTRecord(
        t=t,
        equality_gap=gap,
        gradient_error=gdist,
        minorant_certified=cert.certified,
        worst_violation=cert.worst_violation,
        active_count=amap.active_count,
        **extras,
    )


def _fd_constants(phi: SampledFunction, h: SampledFunction, idx, tx_cap: float):
    lam = lambda_min(hessian_fd(phi, idx))
    if lam <= 0:
        raise HypothesisFailure(f"curvature at the anchor is {lam} <= 0")
    L = hess_sup_norm(h)
    M = sup_norm(h)
    x_pt = phi.grid.point(idx)
    delta = find_delta(phi, x_pt, lam)
    t_x = compute_tx(lam, delta, L, M, tx_cap)
    return PropositionConstants(
        x=x_pt, lam=lam, delta=delta, L=L, M=M, t_x=t_x, tx_cap=tx_cap
    )


def sweep_t(
    phi: SampledFunction,
    h: SampledFunction,
    x,
    schedule,
    constants: PropositionConstants | None = None,
) -> PropositionReport:
    """Per-t verification records over a schedule, plus the empirical
    activation threshold (smallest |t| whose gap at x is positive) and
    whether it stays above t_x.  Constants are measured from the samples
    when not supplied."""
    idx = _node_index(phi, x)
    if constants is None:
        constants = _fd_constants(phi, h, idx, tx_cap=1.0)
    records = [_per_t_record(phi, h, idx, t, constants) for t in sorted(schedule)]
    activated = sorted(abs(r.t) for r in records if r.equality_gap > 0.0)
    threshold = activated[0] if activated else None
    return PropositionReport(
        constants=constants,
        per_t=records,
        activation_threshold=threshold,
        activation_at_least_tx=(threshold is None or threshold >= constants.t_x),
    )


@dataclass(frozen=True)
class ThresholdBracket:
    lo: float  # largest tested t with zero gap
    hi: float  # smallest tested t with positive gap

    @property
    def estimate(self) -> float:
        return 0.5 * (self.lo + self.hi)


def activation_threshold(
    phi: SampledFunction, h: SampledFunction, x, lo: float, hi: float, tol: float = 1e-4
) -> ThresholdBracket:
    """Bisect the smallest t in [lo, hi] with a positive convexification gap
    at x.  Requires gap(lo) = 0 and gap(hi) > 0; gap comparisons are exact."""
    idx = _node_index(phi, x)

    def gap(t: float) -> float:
        f = _assemble(phi, h, t)
        b = biconjugate(f)
        fx = f.values[idx] if f.grid.dim == 1 else f.values[idx[0], idx[1]]
        bx = b.values[idx] if f.grid.dim == 1 else b.values[idx[0], idx[1]]
        return float(fx - bx)

    if not (0 <= lo < hi):
        raise ValidationError(f"need 0 <= lo < hi, got [{lo}, {hi}]", field="lo")
    if gap(lo) > 0:
        raise ValidationError(f"gap already positive at t = {lo}", field="lo")
    if gap(hi) == 0:
        raise ValidationError(f"gap still zero at t = {hi}", field="hi")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0:
            hi = mid
        else:
            lo = mid
    return ThresholdBracket(lo=lo, hi=hi)


def gangbo_remainder(phi: SampledFunction, h: SampledFunction, x, t: float) -> float:
    """Remainder R(t) = (phi* + t*h on the dual axis)*(x) - phi(x)
    + t*h(grad phi(x)).

    phi* is computed on the auto-derived dual grid; h is transported to dual
    nodes by piecewise-linear interpolation (constant beyond its grid, which
    is exact for compactly supported h).  The back transform is evaluated at
    the single anchor node.  Raises when the back-transform maximizer hits
    the dual boundary (the result would be truncation noise)."""
    idx = _node_index(phi, x)
    if phi.grid.dim != 1:
        raise ValidationError("remainder estimation is one-dimensional", field="phi")
    gphi = grad_fd(phi, idx)
    dual = derive_dual_grid(phi)
    if not (dual.lo < gphi < dual.hi):
        raise ValidationError(
            f"grad phi(x) = {gphi} lies outside the dual interior ({dual.lo}, {dual.hi})",
            field="x",
        )
    fstar = conjugate_llt(phi, dual)
    y = dual.axis_points()
    xs = phi.grid.axis_points()
    psi = fstar.values + t * np.interp(y, xs, h.values)
    cand = y * xs[idx] - psi
    j = int(np.argmax(cand))
    if j == 0 or j == y.size - 1:
        raise TruncationError(
            "back-transform maximizer sits on the dual boundary; increase the dual range"
        )
    h_at_grad = float(np.interp(gphi, xs, h.values))
    return float(cand[j]) - float(phi.values[idx]) + t * h_at_grad


@dataclass(frozen=True)
class VelocityEstimate:
    """D(t) = (slope-interval midpoint of (phi + t h)** minus that of phi**)
    divided by t, per scheduled t (sorted by |t|, smallest first)."""

    ts: list
    derivatives: list
    interval_halfwidths: list

    @property
    def limit(self):
        return self.derivatives[0]

    @property
    def spread(self) -> float:
        arr = np.asarray(self.derivatives, dtype=np.float64)
        if arr.ndim == 1:
            return float(arr.max() - arr.min())
        return float((arr.max(axis=0) - arr.min(axis=0)).max())


def velocity_at_zero(
    phi: SampledFunction,
    h: SampledFunction,
    x,
    t_schedule,
    t_x: float | None = None,
) -> VelocityEstimate:
    """Difference-quotient estimate of the envelope-gradient velocity in t.

    Every scheduled t must be nonzero with |t| < t_x (measured from the
    samples when not supplied), so the envelope equals the function near x
    and the quotient isolates the perturbation's contribution."""
    idx = _node_index(phi, x)
    if t_x is None:
        t_x = _fd_constants(phi, h, idx, tx_cap=1.0).t_x
    ts = sorted(t_schedule, key=abs)
    if not ts:
        raise ValidationError("empty t schedule", field="t_schedule")
    for t in ts:
        if t == 0 or not abs(t) < t_x:
            raise ValidationError(
                f"schedule entry t = {t} is zero or outside (-t_x, t_x), t_x = {t_x}",
                field="t_schedule",
            )
    d = phi.grid.spacing
    b0 = biconjugate(phi)
    if phi.grid.dim == 1:
        iv0 = subdifferential_1d(b0, idx)
        mid0 = iv0.midpoint
    else:
        l1, r1 = _axis_interval(b0.values[:, idx[1]], idx[0], d)
        l2, r2 = _axis_interval(b0.values[idx[0], :], idx[1], d)
        mid0 = np.array([0.5 * (l1 + r1), 0.5 * (l2 + r2)])
    derivs = []
    widths = []
    for t in ts:
        b = biconjugate(_assemble(phi, h, t))
        if phi.grid.dim == 1:
            iv = subdifferential_1d(b, idx)
            derivs.append((iv.midpoint - mid0) / t)
            widths.append(0.5 * iv.width)
        else:
            l1, r1 = _axis_interval(b.values[:, idx[1]], idx[0], d)
            l2, r2 = _axis_interval(b.values[idx[0], :], idx[1], d)
            mid = np.array([0.5 * (l1 + r1), 0.5 * (l2 + r2)])
            derivs.append((mid - mid0) / t)
            widths.append(0.5 * max(r1 - l1, r2 - l2))
    return VelocityEstimate(ts=ts, derivatives=derivs, interval_halfwidths=widths)


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerificationResult:
    report: PropositionReport
    x_requested: object
    x_snapped: object
    grid: Grid
    delta_uncapped: float

    @property
    def exit_ok(self) -> bool:
        return self.report.all_inside_certified


def resolve_constants(
    phi_spec: "funlib.FunctionSpec",
    h_spec: "funlib.FunctionSpec",
    phi: SampledFunction,
    h: SampledFunction,
    idx,
    delta_cap: float | None = None,
    tx_cap: float = 1.0,
):
    """Resolve (lambda, L, M, delta, t_x) at node ``idx``, preferring
    analytic catalog values and falling back to finite differences; both
    routes are recorded.  Returns (constants, provenance, delta_scan) where
    delta_scan is the certified radius before the optional cap."""
    x_pt = phi.grid.point(idx)
    provenance = {}

    lam_fd = lambda_min(hessian_fd(phi, idx))
    av = funlib.analytic_values(phi_spec, x_pt)
    if "lambda" in av:
        lam = av["lambda"]
        provenance["lambda"] = {"source": "analytic", "value": lam, "fd": lam_fd}
    else:
        lam = lam_fd
        provenance["lambda"] = {"source": "fd", "value": lam}
    if lam <= 0:
        raise HypothesisFailure(
            f"curvature at x = {x_pt} is {lam} <= 0; the locality hypothesis fails"
        )

    ah = funlib.analytic_values(h_spec, x_pt)
    if "L" in ah:
        L = ah["L"]
        provenance["L"] = {"source": "analytic", "value": L, "fd": hess_sup_norm(h)}
    else:
        L = hess_sup_norm(h)
        provenance["L"] = {"source": "fd", "value": L}
    if "M" in ah:
        M = ah["M"]
        provenance["M"] = {"source": "analytic", "value": M, "fd": sup_norm(h)}
    else:
        M = sup_norm(h)
        provenance["M"] = {"source": "fd", "value": M}

    delta_scan = find_delta(phi, x_pt, lam)
    delta = delta_scan
    if delta_cap is not None:
        delta = min(delta, delta_cap)
    provenance["delta"] = {
        "source": "certified scan",
        "scan": delta_scan,
        "cap": delta_cap,
        "value": delta,
    }

    t_x = compute_tx(lam, delta, L, M, tx_cap)
    constants = PropositionConstants(
        x=x_pt, lam=lam, delta=delta, L=L, M=M, t_x=t_x, tx_cap=tx_cap
    )
    return constants, provenance, delta_scan


def run_verification(
    phi_spec: "funlib.FunctionSpec",
    h_spec: "funlib.FunctionSpec",
    grid: Grid,
    x,
    schedule=None,
    delta_cap: float | None = None,
    tx_cap: float = 1.0,
    halvings: int = 6,
    probe_cap: float = 0.25,
) -> VerificationResult:
    """Sample phi and h, resolve constants (analytic where declared, finite
    differences otherwise), certify delta, and sweep the t schedule.

    ``x`` is a coordinate; it snaps to the nearest node and the snapped
    value is reported.  ``delta_cap`` optionally truncates the certified
    radius.  Raises HypothesisFailure when the curvature at x is not
    positive."""
    phi = sample(phi_spec, grid)
    h = sample(h_spec, grid)
    idx = grid.nearest_index(x)
    x_pt = grid.point(idx)
    constants, provenance, delta_scan = resolve_constants(
        phi_spec, h_spec, phi, h, idx, delta_cap=delta_cap, tx_cap=tx_cap
    )
    if schedule is None:
        schedule = default_schedule(constants.t_x, halvings=halvings, probe_cap=probe_cap)
    report = sweep_t(phi, h, x_pt, schedule, constants=constants)
    report = PropositionReport(
        constants=report.constants,
        per_t=report.per_t,
        activation_threshold=report.activation_threshold,
        activation_at_least_tx=report.activation_at_least_tx,
        provenance=provenance,
    )
    return VerificationResult(
        report=report,
        x_requested=x,
        x_snapped=x_pt,
        grid=grid,
        delta_uncapped=delta_scan,
    )
