"""Sampled sufficient-condition checks for finite shadowing.

Every check in this module samples an inequality over a deterministic
grid and reports the minimal slack (the *margin*) together with the
witness sample where it is attained.  A report passes iff its margin
is strictly positive.  Checks are diagnostics: the ground truth for
shadowing claims is the independent solver oracle, so sampling density
is a tunable, and an aliasing guard field flags reports whose margin
is small compared to the sampling mesh.

Numerical care: the inequalities compare quantities that agree to many
digits (for gauge level 1e-3 the honest slack can be ~2.5e-10), so all
map increments are evaluated through power-sum difference forms
``p^j - q^j = (p - q) * sum_i p^i q^(j-1-i)`` instead of subtracting
nearly equal map values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ConvergenceError, UsageError
from .lyapunov import (
    GaugePair,
    Region,
    RegionPart,
    max_gauge,
    pair_name,
    sample_part,
)
from .maps import (
    Expanding1D,
    MapSpec,
    Monomial,
    Neighborhood,
    PlanarSaddle,
    apply,
    apply_inverse,
    jacobian,
)

__all__ = [
    "CheckParams",
    "ConditionReport",
    "power_sum",
    "odd_power_secant_slope",
    "expansion_gap_coefficient",
    "check_monotone_expansion_1d",
    "check_perturbation_smallness_1d",
    "shrink_to_valid_box",
    "check_planar_displacement_bounds",
    "check_slope_dominance",
    "check_transition_battery",
    "estimate_step_error_budget",
    "AdmissibilityKind",
    "AdmissibilityVerdict",
    "classify_monomial_perturbation",
    "monomial_slope_slack",
    "find_failing_witness",
]


@dataclass(frozen=True)
class CheckParams:
    """Gauge levels and sampling densities shared by the planar checks.

    ``delta`` is the inner gauge level, ``Delta`` the outer one; the
    checks require 0 < delta < Delta.  ``nu_samples`` discretizes the
    direction-coupling coefficient on [-1, 1]; the checked expressions
    are affine in it, so endpoint-only sampling (nu_samples=2) is exact.
    """

    delta: float
    Delta: float
    boundary_samples: int = 256
    grid_per_axis: int = 64
    nu_samples: int = 33

    def __post_init__(self):
        if not (0 < self.delta < self.Delta):
            raise UsageError(
                f"need 0 < delta < Delta, got delta={self.delta}, Delta={self.Delta}"
            )
        if self.boundary_samples < 16:
            raise UsageError("boundary_samples must be >= 16")
        if self.grid_per_axis < 2:
            raise UsageError("grid_per_axis must be >= 2")
        if self.nu_samples < 2:
            raise UsageError("nu_samples must be >= 2")

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "Delta": self.Delta,
            "boundary_samples": self.boundary_samples,
            "grid_per_axis": self.grid_per_axis,
            "nu_samples": self.nu_samples,
        }


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one sampled check: passed iff margin > 0."""

    condition: str
    passed: bool
    margin: float
    witness: Optional[dict]
    samples_used: int
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.passed != (self.margin > 0):
            raise UsageError("report invariant violated: passed <=> margin > 0")

    def to_json(self) -> dict:
        return {
            "condition": self.condition,
            "passed": self.passed,
            "margin": self.margin,
            "witness": self.witness,
            "samples_used": self.samples_used,
            "params": self.details.get("params"),
            "details": {k: v for k, v in self.details.items() if k != "params"},
        }


def _report(condition, margin, witness, samples, details) -> ConditionReport:
    margin = float(margin)
    return ConditionReport(
        condition=condition,
        passed=bool(margin > 0),
        margin=margin,
        witness=witness,
        samples_used=int(samples),
        details=details,
    )


# ---------------------------------------------------------------------------
# power-sum building blocks
# ---------------------------------------------------------------------------

def power_sum(p, q, j: int):
    """sum_{i=0}^{j-1} p^i q^(j-1-i), so that p^j - q^j = (p-q) * power_sum."""
    if j < 0:
        raise UsageError("power_sum needs j >= 0")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    total = np.zeros(np.broadcast(p, q).shape)
    for i in range(j):
        total = total + p**i * q**(j - 1 - i)
    return total


def _slope_excess_1d(spec: Expanding1D, x1, x0):
    """(f(x1) - f(x0)) / (x1 - x0) - 1, evaluated without cancellation.

    Keeping the identity part out of the sum matters: near the origin
    the nonlinear contribution can sit far below the rounding floor of
    1.0, and forming slope - 1 afterwards would return exactly zero.
    """
    s = power_sum(x1, x0, 2 * spec.n + 1)
    for t in spec.x_terms:
        s = s + t.coeff * power_sum(x1, x0, t.x_deg)
    return s


def _monomial_increment(t: Monomial, x0, y0, v, w):
    """a*(x1^k y1^l - x0^k y0^l) for x1 = x0+v, y1 = y0+w, cancellation-free."""
    x1 = x0 + v
    y1 = y0 + w
    out = 0.0
    if t.y_deg:
        out = out + (x1**t.x_deg) * w * power_sum(y1, y0, t.y_deg)
    if t.x_deg:
        out = out + (y0**t.y_deg if t.y_deg else 1.0) * v * power_sum(
            x1, x0, t.x_deg
        )
    return t.coeff * out


def _saddle_increments(spec: PlanarSaddle, px, py, v, w):
    """Exact-form component increments of the saddle map over a step (v, w)."""
    x1 = px + v
    y1 = py + w
    dg = v * (1.0 - power_sum(x1, px, 2 * spec.n + 1))
    for t in spec.x_terms:
        dg = dg + _monomial_increment(t, px, py, v, w)
    dh = w * (1.0 + power_sum(y1, py, 2 * spec.m + 1))
    for t in spec.y_terms:
        dh = dh + _monomial_increment(t, px, py, v, w)
    return dg, dh


def odd_power_secant_slope(x, step, n: int):
    """((x+step)^(2n+1) - x^(2n+1)) / step, via the power-sum form."""
    if n < 1:
        raise UsageError("n must be >= 1")
    x = np.asarray(x, dtype=float)
    step = np.asarray(step, dtype=float)
    return power_sum(x + step, x, 2 * n + 1)


@lru_cache(maxsize=32)
def expansion_gap_coefficient(n: int) -> float:
    """Largest safe coefficient in the homogeneous expansion-gap bound.

    Returns 0.99 times the minimum over a dense grid of
    ``(slope(u,1) - 1/(1+4^n)) / (u^(2n) + 1)``; by homogeneity of
    degree 2n this certifies
    ``slope(x,s) - s^(2n)/(1+4^n) >= coeff * (x^(2n) + s^(2n))``
    for every step s > 0.
    """
    if n < 1:
        raise UsageError("n must be >= 1")
    u = np.linspace(-10.0, 10.0, 400_001)
    ratio = (odd_power_secant_slope(u, 1.0, n) - 1.0 / (1.0 + 4.0**n)) / (
        u ** (2 * n) + 1.0
    )
    return 0.99 * float(np.min(ratio))


# ---------------------------------------------------------------------------
# one-dimensional checks
# ---------------------------------------------------------------------------

def _grid_1d(A: float, a: float, params: Optional[CheckParams]):
    bs = params.boundary_samples if params else 256
    gpa = params.grid_per_axis if params else 64
    xs = np.linspace(-A, A, 8 * gpa + 1)
    vs = np.geomspace(a * 1e-6, a, bs)
    return xs, vs


def check_monotone_expansion_1d(
    spec: Expanding1D, A: float, a: float, params: Optional[CheckParams] = None
) -> ConditionReport:
    """Check that steps of size v expand: f(x+v)-f(x) > v and
    f(x-v)-f(x) < -v, for |x| <= A and 0 < v <= a.

    The margin is the smallest of the two slack values over the grid.
    """
    if not (A > 0 and a > 0):
        raise UsageError("A and a must be positive")
    xs, vs = _grid_1d(A, a, params)
    X, V = np.meshgrid(xs, vs, indexing="ij")
    up = V * _slope_excess_1d(spec, X + V, X)
    down = V * _slope_excess_1d(spec, X, X - V)
    both = np.minimum(up, down)
    idx = np.unravel_index(np.argmin(both), both.shape)
    margin = both[idx]
    witness = {
        "x": float(X[idx]),
        "v": float(V[idx]),
        "side": "forward" if up[idx] <= down[idx] else "backward",
    }
    details = {
        "params": {"A": A, "a": a},
        "x_samples": len(xs),
        "v_samples": len(vs),
    }
    _attach_aliasing_guard_1d(details, spec, xs, float(margin))
    return _report(
        "monotone-expansion", margin, witness, both.size * 2, details
    )


def check_perturbation_smallness_1d(
    spec: Expanding1D,
    A: float,
    a: float,
    gap_coeff: Optional[float] = None,
    params: Optional[CheckParams] = None,
) -> ConditionReport:
    """Check |X(x+v) - X(x)| <= (coeff*v/2) (x^(2n) + v^(2n)) on the box.

    ``gap_coeff`` defaults to ``expansion_gap_coefficient(spec.n)``.
    Passing this check on (A, a) is what licenses the guaranteed
    per-step error budget of the constructive 1D solver.
    """
    if not (A > 0 and a > 0):
        raise UsageError("A and a must be positive")
    coeff = expansion_gap_coefficient(spec.n) if gap_coeff is None else gap_coeff
    if coeff <= 0:
        raise UsageError("gap coefficient must be positive")
    xs, vs = _grid_1d(A, a, params)
    X, V = np.meshgrid(xs, vs, indexing="ij")
    pert = np.zeros_like(X)
    for t in spec.x_terms:
        pert = pert + t.coeff * power_sum(X + V, X, t.x_deg)
    lhs = np.abs(V * pert)
    rhs = (coeff * V / 2.0) * (X ** (2 * spec.n) + V ** (2 * spec.n))
    slack = rhs - lhs
    idx = np.unravel_index(np.argmin(slack), slack.shape)
    witness = {"x": float(X[idx]), "v": float(V[idx])}
    details = {
        "params": {"A": A, "a": a, "gap_coeff": coeff},
        "x_samples": len(xs),
        "v_samples": len(vs),
    }
    return _report(
        "perturbation-smallness", slack[idx], witness, slack.size, details
    )


def shrink_to_valid_box(
    spec: Expanding1D,
    A0: float = 0.5,
    a0: float = 0.25,
    gap_coeff: Optional[float] = None,
    max_halvings: int = 40,
    params: Optional[CheckParams] = None,
) -> ConditionReport:
    """Halve (A, a) from (A0, a0) until the smallness check passes.

    Returns the first passing report, whose details carry the final
    box and the number of halvings taken.  Raises ConvergenceError if
    the budget of halvings is exhausted (the perturbation then fails
    the smallness requirement on every tested box).
    """
    coeff = expansion_gap_coefficient(spec.n) if gap_coeff is None else gap_coeff
    A, a = float(A0), float(a0)
    for halvings in range(max_halvings + 1):
        rep = check_perturbation_smallness_1d(spec, A, a, coeff, params)
        if rep.passed:
            details = dict(rep.details)
            details["A"] = A
            details["a"] = a
            details["halvings"] = halvings
            return ConditionReport(
                condition=rep.condition,
                passed=True,
                margin=rep.margin,
                witness=rep.witness,
                samples_used=rep.samples_used,
                details=details,
            )
        A /= 2.0
        a /= 2.0
    raise ConvergenceError(
        f"smallness check still failing after {max_halvings} halvings",
        rep.margin,
    )


def _attach_aliasing_guard_1d(details, spec, xs, margin):
    J = jacobian(spec, xs)[..., 0, 0]
    lip = float(np.max(np.abs(J)))
    mesh = float(xs[1] - xs[0])
    details["mesh"] = mesh
    details["lipschitz_estimate"] = lip
    details["aliasing_margin_floor"] = 10.0 * mesh * lip
    details["aliasing_guard_ok"] = bool(margin > 10.0 * mesh * lip)


# ---------------------------------------------------------------------------
# planar sampled inequalities
# ---------------------------------------------------------------------------

def _planar_grid(K: Neighborhood, count: int, include_axes: bool) -> np.ndarray:
    hw = K.half_width
    if include_axes:
        n = count + (1 - count % 2)  # odd so the axes are on the grid
        g = np.linspace(-hw, hw, n)
    else:
        n = count + (count % 2)  # even cell-centered grid avoids the axes
        edges = np.linspace(-hw, hw, n + 1)
        g = 0.5 * (edges[:-1] + edges[1:])
    gx, gy = np.meshgrid(g, g, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=-1)


def check_planar_displacement_bounds(
    spec: PlanarSaddle, K: Neighborhood, params: CheckParams
) -> ConditionReport:
    """Sampled displacement bounds driving the planar shadowing argument.

    For every center p in K and gauge level delta (with window Delta):

    * horizontal-bound: |g(p + (v,w)) - g(p)| < delta whenever
      (v, w) lies on the cross {|v| <= delta, w = 0} or the vertical
      edges {|v| = delta, |w| <= delta};
    * flat-step-bound: |h(p + (v,0)) - h(p)| < delta for |v| <= Delta;
    * vertical-escape: |h(p + (v,w)) - h(p)| > delta whenever
      |v| <= delta and |w| = delta.

    The margin aggregates the three inequalities (min slack).
    """
    if not isinstance(spec, PlanarSaddle):
        raise UsageError("planar displacement bounds need a PlanarSaddle spec")
    d, D, bs = params.delta, params.Delta, params.boundary_samples
    pts = _planar_grid(K, params.grid_per_axis, include_axes=True)
    px = pts[:, 0][:, None]
    py = pts[:, 1][:, None]

    def g_abs(v, w):
        dg, _ = _saddle_increments(spec, px, py, v, w)
        return np.abs(dg)

    def h_abs(v, w):
        _, dh = _saddle_increments(spec, px, py, v, w)
        return np.abs(dh)

    families = []  # (name, v-array, w-array, slack-array)
    v_line = np.linspace(-d, d, bs)[None, :]
    families.append(("horizontal-bound", v_line, np.zeros_like(v_line),
                     d - g_abs(v_line, np.zeros_like(v_line))))
    w_edge = np.linspace(-d, d, bs)[None, :]
    for s in (-d, d):
        v_edge = np.full_like(w_edge, s)
        families.append(("horizontal-bound", v_edge, w_edge,
                         d - g_abs(v_edge, w_edge)))
    v_flat = np.linspace(-D, D, bs)[None, :]
    families.append(("flat-step-bound", v_flat, np.zeros_like(v_flat),
                     d - h_abs(v_flat, np.zeros_like(v_flat))))
    v_esc = np.linspace(-d, d, bs)[None, :]
    for s in (-d, d):
        w_esc = np.full_like(v_esc, s)
        families.append(("vertical-escape", v_esc, w_esc,
                         h_abs(v_esc, w_esc) - d))

    margin = np.inf
    witness = None
    samples = 0
    sub_margins: dict[str, float] = {}
    for name, v, w, slack in families:
        samples += slack.size
        k = np.unravel_index(np.argmin(slack), slack.shape)
        m = float(slack[k])
        sub_margins[name] = min(sub_margins.get(name, np.inf), m)
        if m < margin:
            margin = m
            witness = {
                "p": [float(px[k[0], 0]), float(py[k[0], 0])],
                "v": float(np.broadcast_to(v, slack.shape)[k]),
                "w": float(np.broadcast_to(w, slack.shape)[k]),
                "inequality": name,
            }
    J = jacobian(spec, pts)
    lip = float(np.max(np.sum(np.abs(J), axis=-1)))
    mesh = max(2 * K.half_width / max(len(np.unique(px)) - 1, 1), 2 * d / (bs - 1))
    details = {
        "params": params.to_json() | {"K_half_width": K.half_width},
        "sub_margins": sub_margins,
        "mesh": mesh,
        "lipschitz_estimate": lip,
        "aliasing_margin_floor": 10.0 * mesh * lip,
        "aliasing_guard_ok": bool(margin > 10.0 * mesh * lip),
    }
    return _report("planar-displacement", margin, witness, samples, details)


def check_slope_dominance(
    spec: PlanarSaddle, K: Neighborhood, params: CheckParams
) -> ConditionReport:
    """Check the two directional-derivative dominance inequalities.

    Off the respective axes, for every coupling coefficient nu in
    [-1, 1]:

    * contraction slope: (2n+1) p_x^(2n) - dX/dx - nu * dX/dy > 0
    * expansion slope:   (2m+1) p_y^(2m) + dY/dy + nu * dY/dx > 0

    Both expressions are affine in nu, so the minimum over nu is
    attained at an endpoint; the sampled nu-grid always contains both
    endpoints.  The margin is the minimal normalized slack
    (expression divided by one plus the sum of its term magnitudes).
    """
    if not isinstance(spec, PlanarSaddle):
        raise UsageError("slope dominance needs a PlanarSaddle spec")
    if not K.half_width < 1:
        raise UsageError("neighborhood half-width must be < 1")
    pts = _planar_grid(K, params.grid_per_axis, include_axes=False)
    x = pts[:, 0]
    y = pts[:, 1]
    if params.nu_samples == 2:
        nus = np.array([-1.0, 1.0])
    else:
        nus = np.linspace(-1.0, 1.0, params.nu_samples)

    Xx = np.zeros_like(x)
    Xy = np.zeros_like(x)
    for t in spec.x_terms:
        Xx = Xx + t.dx(x, y)
        Xy = Xy + t.dy(x, y)
    Yx = np.zeros_like(x)
    Yy = np.zeros_like(x)
    for t in spec.y_terms:
        Yx = Yx + t.dx(x, y)
        Yy = Yy + t.dy(x, y)

    lead_x = (2 * spec.n + 1) * x ** (2 * spec.n)
    lead_y = (2 * spec.m + 1) * y ** (2 * spec.m)

    expr_c = lead_x[:, None] - Xx[:, None] - nus[None, :] * Xy[:, None]
    den_c = 1.0 + np.abs(lead_x)[:, None] + np.abs(Xx)[:, None] + np.abs(
        nus[None, :] * Xy[:, None]
    )
    expr_e = lead_y[:, None] + Yy[:, None] + nus[None, :] * Yx[:, None]
    den_e = 1.0 + np.abs(lead_y)[:, None] + np.abs(Yy)[:, None] + np.abs(
        nus[None, :] * Yx[:, None]
    )

    slack_c = expr_c / den_c
    slack_e = expr_e / den_e
    kc = np.unravel_index(np.argmin(slack_c), slack_c.shape)
    ke = np.unravel_index(np.argmin(slack_e), slack_e.shape)
    mc, me = float(slack_c[kc]), float(slack_e[ke])
    if mc <= me:
        margin, k, which = mc, kc, "contraction-slope"
    else:
        margin, k, which = me, ke, "expansion-slope"
    witness = {
        "p": [float(x[k[0]]), float(y[k[0]])],
        "nu": float(nus[k[1]]),
        "inequality": which,
    }
    details = {
        "params": params.to_json() | {"K_half_width": K.half_width},
        "sub_margins": {"contraction-slope": mc, "expansion-slope": me},
        "raw_min_lead_x": float(np.min(lead_x)),
        "raw_min_lead_y": float(np.min(lead_y)),
    }
    return _report(
        "slope-dominance", margin, witness,
        slack_c.size + slack_e.size, details,
    )


# ---------------------------------------------------------------------------
# the five-part transition battery
# ---------------------------------------------------------------------------

def _segment_crosses_hline(a: np.ndarray, b: np.ndarray, y: float,
                           x_lo: float, x_hi: float) -> bool:
    """Does any segment a[i] -> b[i] cross the horizontal segment
    [x_lo, x_hi] x {y}?  Conservative (endpoint touches count)."""
    ay, by = a[:, 1] - y, b[:, 1] - y
    straddle = (ay <= 0) & (by >= 0) | (ay >= 0) & (by <= 0)
    if not np.any(straddle):
        return False
    ai, bi = a[straddle], b[straddle]
    denom = bi[:, 1] - ai[:, 1]
    t = np.where(np.abs(denom) > 0, (y - ai[:, 1]) / np.where(denom == 0, 1, denom), 0.0)
    xs = ai[:, 0] + t * (bi[:, 0] - ai[:, 0])
    # degenerate (horizontal-on-line) segments: test both endpoints
    flat = np.abs(denom) == 0
    hit = (xs >= x_lo) & (xs <= x_hi) & ~flat
    if np.any(flat):
        fx_lo = np.minimum(ai[flat, 0], bi[flat, 0])
        fx_hi = np.maximum(ai[flat, 0], bi[flat, 0])
        hit_flat = (fx_hi >= x_lo) & (fx_lo <= x_hi)
        return bool(np.any(hit) or np.any(hit_flat))
    return bool(np.any(hit))


def _segment_crosses_box(a: np.ndarray, b: np.ndarray,
                         lo: np.ndarray, hi: np.ndarray) -> bool:
    """Liang-Barsky: does any segment a[i] -> b[i] meet the box [lo, hi]?"""
    d = b - a
    t0 = np.zeros(len(a))
    t1 = np.ones(len(a))
    ok = np.ones(len(a), dtype=bool)
    for axis in range(2):
        p = d[:, axis]
        q_lo = lo[axis] - a[:, axis]
        q_hi = hi[axis] - a[:, axis]
        parallel = p == 0
        ok &= ~(parallel & ((q_lo > 0) | (q_hi < 0)))
        with np.errstate(divide="ignore", invalid="ignore"):
            r_lo = np.where(parallel, -np.inf, q_lo / np.where(p == 0, 1, p))
            r_hi = np.where(parallel, np.inf, q_hi / np.where(p == 0, 1, p))
        enter = np.where(p >= 0, r_lo, r_hi)
        leave = np.where(p >= 0, r_hi, r_lo)
        t0 = np.maximum(t0, np.where(parallel, t0, enter))
        t1 = np.minimum(t1, np.where(parallel, t1, leave))
    return bool(np.any(ok & (t0 <= t1)))


def check_transition_battery(
    spec: MapSpec,
    pair: GaugePair,
    p,
    q,
    params: CheckParams,
) -> ConditionReport:
    """Check the five-part region-transition battery between p and q.

    With the inner rectangle at level delta around p and the outer one
    at level Delta around q (delta < Delta), the battery demands:

    * forward-inclusion: the image of the inner rectangle at p lands
      strictly inside the outer rectangle at q (and symmetrically, the
      preimage of the inner rectangle at q lands strictly inside the
      outer rectangle at p);
    * core-contraction: the image of the horizontal core at p lands
      strictly inside the inner rectangle at q;
    * wide-core-clearance: the image of the Delta-level core at p
      misses the horizontal faces of the inner rectangle at q;
    * slab-avoidance: the image of the inner rectangle's boundary at p
      misses the slab {|x - q_x| >= width(delta, q), |y - q_y| <= delta}
      (with the image connected, this keeps the whole image clear of
      the vertical faces at q);
    * face-escape: the image of the horizontal faces at p exits the
      inner rectangle at q entirely.

    Consecutive-sample segment guards make the disjointness checks
    conservative: a sampled polyline crossing the forbidden set forces
    a failure even when every sample individually clears it.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d, D, bs = params.delta, params.Delta, params.boundary_samples

    P_d_p = Region(tuple(p), d, pair)
    P_d_q = Region(tuple(q), d, pair)
    P_D_p = Region(tuple(p), D, pair)
    P_D_q = Region(tuple(q), D, pair)

    sub: dict[str, float] = {}
    witness_by: dict[str, dict] = {}
    samples = 0

    def track(name, slack, pts, imgs):
        nonlocal samples
        samples += len(slack)
        i = int(np.argmin(slack))
        sub[name] = float(slack[i])
        witness_by[name] = {
            "source": [float(pts[i, 0]), float(pts[i, 1])],
            "image": [float(imgs[i, 0]), float(imgs[i, 1])],
        }

    # forward-inclusion, outgoing half: boundary and center of the
    # inner rectangle at p, pushed forward, gauged against Delta at q.
    half = bs // 2
    bd_p = np.concatenate([
        sample_part(P_d_p, RegionPart.Q_FACE, bs),
        sample_part(P_d_p, RegionPart.R_FACE, half),
        p[None, :],
    ])
    img = apply(spec, bd_p)
    track("forward-inclusion", D - max_gauge(pair, q, img), bd_p, img)

    bd_q = np.concatenate([
        sample_part(P_d_q, RegionPart.Q_FACE, bs),
        sample_part(P_d_q, RegionPart.R_FACE, half),
        q[None, :],
    ])
    pre = apply_inverse(spec, bd_q)
    track("backward-inclusion", D - max_gauge(pair, p, pre), bd_q, pre)

    core = sample_part(P_d_p, RegionPart.T_CORE, bs)
    core_img = apply(spec, core)
    track("core-contraction", d - max_gauge(pair, q, core_img), core, core_img)

    wide = sample_part(P_D_p, RegionPart.T_CORE, bs)
    wide_img = apply(spec, wide)
    wq = P_d_q.x_half_width
    v_img = pair.v(q, wide_img)
    w_img = pair.w(q, wide_img)
    clearance = np.maximum(np.abs(v_img - d), w_img - d)
    track("wide-core-clearance", clearance, wide, wide_img)
    # polyline guard: a segment crossing either horizontal face of the
    # inner rectangle at q defeats the pointwise clearance
    for y_face in (q[1] - d, q[1] + d):
        if _segment_crosses_hline(
            wide_img[:-1], wide_img[1:], y_face, q[0] - wq, q[0] + wq
        ):
            sub["wide-core-clearance"] = min(
                sub["wide-core-clearance"], -abs(d)
            )
            witness_by["wide-core-clearance"]["polyline_crossing"] = y_face

    # slab-avoidance: images of the full inner boundary at p vs the
    # vertical slab at q
    ring = np.concatenate([
        sample_part(P_d_p, RegionPart.Q_FACE, bs),
        sample_part(P_d_p, RegionPart.R_FACE, bs),
    ])
    ring_img = apply(spec, ring)
    dx = np.abs(ring_img[:, 0] - q[0])
    dy = np.abs(ring_img[:, 1] - q[1])
    slab_clear = np.maximum(wq - dx, dy - d)
    track("slab-avoidance", slab_clear, ring, ring_img)
    span = 10.0 * (np.max(dx) + wq + 1.0)
    for sgn in (-1.0, 1.0):
        lo = np.array([q[0] + (wq if sgn > 0 else -span), q[1] - d])
        hi = np.array([q[0] + (span if sgn > 0 else -wq), q[1] + d])
        # guard each face's polyline separately; the two faces of the
        # ring are not adjacent samples
        for seg in (ring_img[:bs], ring_img[bs:]):
            if _segment_crosses_box(seg[:-1], seg[1:], lo, hi):
                sub["slab-avoidance"] = min(sub["slab-avoidance"], -abs(d))
                witness_by["slab-avoidance"]["polyline_crossing"] = sgn

    faces = sample_part(P_d_p, RegionPart.Q_FACE, bs)
    faces_img = apply(spec, faces)
    escape = max_gauge(pair, q, faces_img) - d
    track("face-escape", escape, faces, faces_img)
    lo_q, hi_q = P_d_q.bounds()
    for seg in (faces_img[: (bs + 1) // 2], faces_img[(bs + 1) // 2:]):
        if len(seg) >= 2 and _segment_crosses_box(seg[:-1], seg[1:], lo_q, hi_q):
            sub["face-escape"] = min(sub["face-escape"], -abs(d))
            witness_by["face-escape"]["polyline_crossing"] = True

    worst = min(sub, key=lambda k: sub[k])
    margin = sub[worst]
    witness = dict(witness_by[worst])
    witness["sub_condition"] = worst
    details = {
        "params": params.to_json() | {
            "pair": pair_name(pair),
            "p": [float(p[0]), float(p[1])],
            "q": [float(q[0]), float(q[1])],
        },
        "sub_margins": sub,
    }
    return _report("transition-battery", margin, witness, samples, details)


def estimate_step_error_budget(
    spec: MapSpec,
    pair: GaugePair,
    K: Neighborhood,
    params: CheckParams,
    grid_per_axis: int = 7,
    probe_decades: int = 14,
    refine_steps: int = 12,
) -> tuple[float, dict]:
    """Largest per-step error d (conservative) keeping the battery true.

    Over a cell-centered grid of centers p in K, perturbs the target to
    the eight compass points of the max-norm d-sphere around the exact
    image f(p) and requires the transition battery to pass for every
    (p, q) pair.  Searches d by decade probing down from delta, then
    geometric bisection; returns the largest confirmed-feasible d and
    a diagnostics dict.

    Raises ConvergenceError if the battery fails even at q = f(p)
    (kept exact), or at the smallest probed d.
    """
    centers = _planar_grid(K, grid_per_axis, include_axes=False)
    compass = np.array(
        [[1, 0], [1, 1], [0, 1], [-1, 1], [-1, 0], [-1, -1], [0, -1], [1, -1]],
        dtype=float,
    )

    def feasible(dd: float) -> bool:
        for p in centers:
            fp = apply(spec, p)
            targets = fp[None, :] + dd * compass if dd > 0 else fp[None, :]
            for q in targets:
                rep = check_transition_battery(spec, pair, p, q, params)
                if not rep.passed:
                    return False
        return True

    if not feasible(0.0):
        raise ConvergenceError(
            "transition battery fails even with exact targets", float("nan")
        )
    lo = None
    hi = params.delta
    for j in range(probe_decades + 1):
        dd = params.delta * 10.0 ** (-j)
        if feasible(dd):
            lo = dd
            break
        hi = dd
    if lo is None:
        raise ConvergenceError(
            f"battery infeasible down to d = {hi}", float("nan")
        )
    if lo < hi:
        for _ in range(refine_steps):
            mid = math.sqrt(lo * hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
    diagnostics = {
        "grid_points": len(centers),
        "confirmed_feasible": lo,
        "first_infeasible": hi if hi > lo else None,
        "probe_decades": probe_decades,
        "refine_steps": refine_steps,
    }
    return float(lo), diagnostics


# ---------------------------------------------------------------------------
# monomial perturbation admissibility
# ---------------------------------------------------------------------------

class AdmissibilityKind(enum.Enum):
    ADMISSIBLE_SMALL_NBHD = "admissible_small_nbhd"
    ADMISSIBLE_IF_SMALL_COEFF = "admissible_if_small_coeff"
    INADMISSIBLE = "inadmissible"


@dataclass(frozen=True)
class AdmissibilityVerdict:
    kind: AdmissibilityKind
    reason: Optional[str] = None

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "reason": self.reason}


def classify_monomial_perturbation(m: int, mono: Monomial) -> AdmissibilityVerdict:
    """Decide whether a vertical perturbation ``a x^k y^l`` keeps the
    expansion-slope inequality satisfiable near the origin.

    Decision tree (for the vertical component of a saddle with
    expansion power 2m+1):

    * l >= 2m+2                -> admissible in a small neighborhood;
    * l == 2m+1 and k >= 1     -> admissible in a small neighborhood;
    * l == 2m+1 and k == 0     -> admissible only for small |a|;
    * l <= 2m: requires a > 0, k even, l odd, and k + l >= 2m+1, in
      that order; the first violated clause is reported.

    The perturbation family under study has l >= 1; l = 0 is rejected.
    """
    if m < 1:
        raise UsageError("m must be >= 1")
    k, l, a = mono.x_deg, mono.y_deg, mono.coeff
    if l < 1:
        raise UsageError("admissibility analysis needs y-degree >= 1")
    if l >= 2 * m + 2:
        return AdmissibilityVerdict(AdmissibilityKind.ADMISSIBLE_SMALL_NBHD)
    if l == 2 * m + 1:
        if k >= 1:
            return AdmissibilityVerdict(AdmissibilityKind.ADMISSIBLE_SMALL_NBHD)
        return AdmissibilityVerdict(AdmissibilityKind.ADMISSIBLE_IF_SMALL_COEFF)
    if not a > 0:
        return AdmissibilityVerdict(AdmissibilityKind.INADMISSIBLE, "a > 0")
    if k % 2 != 0:
        return AdmissibilityVerdict(AdmissibilityKind.INADMISSIBLE, "k even")
    if l % 2 != 1:
        return AdmissibilityVerdict(AdmissibilityKind.INADMISSIBLE, "l odd")
    if k + l < 2 * m + 1:
        return AdmissibilityVerdict(
            AdmissibilityKind.INADMISSIBLE, "k+l >= 2m+1"
        )
    return AdmissibilityVerdict(AdmissibilityKind.ADMISSIBLE_SMALL_NBHD)


def monomial_slope_slack(m: int, mono: Monomial, x, y):
    """Slack of the expansion-slope inequality for Y = a x^k y^l:
    (2m+1) y^(2m) + a l x^k y^(l-1) - |a k x^(k-1) y^l|."""
    if m < 1:
        raise UsageError("m must be >= 1")
    k, l, a = mono.x_deg, mono.y_deg, mono.coeff
    if l < 1:
        raise UsageError("slope slack needs y-degree >= 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lead = (2 * m + 1) * y ** (2 * m)
    drive = a * l * x**k * y ** (l - 1)
    cross = np.abs(a * k * x ** (k - 1) * y**l) if k >= 1 else 0.0
    return lead + drive - cross


def find_failing_witness(
    m: int, mono: Monomial, b_max: float = 0.1
) -> Optional[dict]:
    """Search for a nearby point where the slope slack goes negative.

    Tries the pattern point (x, y) = (k*b/(2l), b) for shrinking b,
    plus a small family of diagonal probes.  Returns the first witness
    as a dict, or None when none is found (as for admissible monomials
    or the vacuous zero-coefficient case).
    """
    k, l = mono.x_deg, mono.y_deg
    pattern_x = k / (2.0 * l)
    scales = np.geomspace(b_max, 1e-6, 25)
    # the canonical pattern point is scanned across every scale before
    # the probe family widens the net, so a returned witness reports it
    for b in scales:
        slack = float(monomial_slope_slack(m, mono, pattern_x * b, b))
        if slack < 0:
            return {
                "x": float(pattern_x * b), "y": float(b),
                "slack": slack, "b": float(b),
            }
    probes = [pattern_x]
    probes += [t for t in (0.0, 0.5, 1.0, -0.5, -1.0) if t != pattern_x]
    for b in scales:
        for t in probes:
            for ys in (b, -b):
                x = t * b
                slack = float(monomial_slope_slack(m, mono, x, ys))
                if slack < 0:
                    return {
                        "x": float(x), "y": float(ys),
                        "slack": slack, "b": float(b),
                    }
    return None
