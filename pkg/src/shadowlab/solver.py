"""Finding and certifying points whose true orbit tracks a pseudotrajectory.

Three strategies, each returning a :class:`ShadowResult`:

* ``shadow_1d_constructive`` -- for one-dimensional expanding maps, pulls
  the tolerance windows backward through the inverse map and intersects
  them; the surviving start-interval is the certificate.
* ``shadow_2d_search`` -- for planar maps, refines a cell grid over the
  gauge rectangle around the first point, keeping cells whose center
  orbit stays gauge-close to every trajectory point.
* ``shadow_weighted`` -- for the half-contracting skew map, pins the
  start x by backward interval intersection (x halves deterministically
  up to errors) and solves the start y by forward interval propagation.

All distances are sup-norm.  Every positive answer is re-verified by
iterating the returned point forward from scratch; ``found`` is never
reported on the strength of the construction alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import DomainError, UsageError
from .lyapunov import BoxPair, GaugePair, Region, max_gauge
from .maps import (
    Expanding1D,
    MapSpec,
    NonisolatedSkew,
    apply,
    apply_inverse,
    orbit,
)
from .pseudo import Pseudotrajectory

__all__ = [
    "ShadowResult",
    "verify_shadowing",
    "shadow_1d_constructive",
    "shadow_2d_search",
    "shadow_weighted",
]

# Orbits are declared divergent past this magnitude; forward images of
# such points only grow, so nothing is lost by cutting the iteration.
_ESCAPE_LIMIT = 1e9

# Pullback interval endpoints are widened by this much to absorb the
# inverse-map Newton tolerance; the final verification pass is the
# arbiter, so widening cannot manufacture a false positive.
_INTERVAL_SLACK = 1e-11

DEFAULT_CELLS_PER_SIDE = 32
DEFAULT_DEPTH = 6
DEFAULT_SURVIVOR_CAP = 16


def _norm_point(p) -> Union[None, float, tuple]:
    if p is None:
        return None
    a = np.asarray(p, dtype=float)
    if a.ndim == 0:
        return float(a)
    return (float(a[0]), float(a[1]))


@dataclass(frozen=True)
class ShadowResult:
    """Outcome of one search or verification.

    ``max_dist`` is the sup-norm distance between the forward orbit of
    ``point`` and the trajectory, maximized over steps (``inf`` when no
    candidate exists).  ``certificate`` is the construction's surviving
    object: the start interval ``[lo, hi]`` for the 1D solver, a cell
    record for the planar search, an interval pair for the weighted
    solver, ``None`` for bare verification.
    """

    found: bool
    point: Union[None, float, tuple]
    max_dist: float
    certificate: object = None

    def to_json(self) -> dict:
        md = float(self.max_dist)
        r = self.point
        if r is not None and not np.isscalar(r):
            r = [float(v) for v in r]
        return {
            "found": bool(self.found),
            "r": r,
            "max_dist": md if math.isfinite(md) else None,
            "certificate": self.certificate,
        }


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not (eps > 0.0 and math.isfinite(eps)):
        raise UsageError("tolerance must be positive and finite")
    return eps


def verify_shadowing(
    spec: MapSpec, traj: Pseudotrajectory, point, eps: float
) -> ShadowResult:
    """Iterate ``point`` forward and compare against the trajectory.

    ``found`` iff the sup-norm distance stays within ``eps`` at every
    step.  A diverging orbit is reported as not found with a diagnostic
    in the certificate.
    """
    eps = _check_eps(eps)
    pts = traj.points
    cur = np.asarray(point, dtype=float)
    if not np.all(np.isfinite(cur)):
        raise UsageError("candidate point must be finite")
    if (traj.dim == 1) != (cur.ndim == 0) or (cur.ndim == 1 and cur.shape != (2,)):
        raise UsageError("candidate point dimension does not match trajectory")

    ob = orbit(spec, cur, len(pts) - 1, escape_limit=_ESCAPE_LIMIT)
    if len(ob) < len(pts):
        return ShadowResult(
            False,
            _norm_point(point),
            math.inf,
            {"diagnostic": f"orbit diverged at step {len(ob)}"},
        )
    dists = np.abs(ob - pts)
    if pts.ndim == 2:
        dists = np.max(dists, axis=-1)
    worst = float(np.max(dists))
    return ShadowResult(worst <= eps, _norm_point(point), worst, None)


def shadow_1d_constructive(
    spec: Expanding1D, traj: Pseudotrajectory, eps: float
) -> ShadowResult:
    """Backward interval intersection for 1D expanding maps.

    Walks the tolerance windows ``[p_k - eps, p_k + eps]`` from the last
    step to the first, replacing each by its intersection with the
    inverse image of its successor.  Assumes the map is strictly
    increasing on the window spanned by the trajectory (the caller's
    monotone-expansion contract), so interval preimages are intervals.

    The exact intersection is bracketed two-sidedly: an *outer* interval
    (inverse-image endpoints pushed outward to absorb Newton rounding)
    decides feasibility without ever losing a razor-thin intersection,
    while an *inner* interval (endpoints pulled inward by the same
    amount) is the reported certificate — every point of it genuinely
    threads all the windows, not just up to accumulated rounding.  When
    the intersection is too thin for the inner bracket to survive, the
    certificate degenerates to the verified answer point alone.

    An empty outer intersection means no true orbit threads every
    window: the per-step error was too large for this tolerance.
    """
    eps = _check_eps(eps)
    if not isinstance(spec, Expanding1D):
        raise UsageError("constructive interval solver needs a 1D expanding map")
    if traj.dim != 1:
        raise UsageError("constructive interval solver needs a 1D trajectory")
    pts = traj.points

    lo = float(pts[-1]) - eps
    hi = float(pts[-1]) + eps
    in_lo, in_hi = lo, hi
    inner_alive = True
    for k in range(len(pts) - 2, -1, -1):
        c_lo = float(pts[k]) - eps
        c_hi = float(pts[k]) + eps
        # one batched inversion per step: outer endpoints, and the
        # inner ones as long as the inner bracket is alive
        if inner_alive:
            pre = apply_inverse(spec, np.array([lo, hi, in_lo, in_hi]))
        else:
            pre = apply_inverse(spec, np.array([lo, hi]))
        lo = max(c_lo, float(pre[0]) - _INTERVAL_SLACK)
        hi = min(c_hi, float(pre[1]) + _INTERVAL_SLACK)
        if lo > hi:
            return ShadowResult(False, None, math.inf, None)
        if inner_alive:
            in_lo = max(c_lo, float(pre[2]) + _INTERVAL_SLACK)
            in_hi = min(c_hi, float(pre[3]) - _INTERVAL_SLACK)
            inner_alive = in_lo <= in_hi

    r = 0.5 * (in_lo + in_hi) if inner_alive else 0.5 * (lo + hi)
    check = verify_shadowing(spec, traj, r, eps)
    cert = [in_lo, in_hi] if inner_alive else [r, r]
    return ShadowResult(check.found, r, check.max_dist, cert)


def _subdivide(rects: np.ndarray, cells: int):
    """Split each rect (x_lo, y_lo, x_hi, y_hi) into a cells x cells grid.

    Returns (centers, row_col, cell_rects), enumerated rect-major then
    row-major with row 0 at the lowest y.
    """
    frac = (np.arange(cells) + 0.5) / cells
    row_idx, col_idx = np.meshgrid(
        np.arange(cells), np.arange(cells), indexing="ij"
    )
    centers, rcs, sub = [], [], []
    for x_lo, y_lo, x_hi, y_hi in rects:
        xs = x_lo + frac * (x_hi - x_lo)
        ys = y_lo + frac * (y_hi - y_lo)
        cy, cx = np.meshgrid(ys, xs, indexing="ij")
        centers.append(np.stack([cx.ravel(), cy.ravel()], axis=-1))
        rcs.append(np.stack([row_idx.ravel(), col_idx.ravel()], axis=-1))
        wx = (x_hi - x_lo) / cells
        wy = (y_hi - y_lo) / cells
        x0 = x_lo + col_idx.ravel() * wx
        y0 = y_lo + row_idx.ravel() * wy
        sub.append(np.stack([x0, y0, x0 + wx, y0 + wy], axis=-1))
    return np.concatenate(centers), np.concatenate(rcs), np.concatenate(sub)


def _orbit_scores(spec, pair, delta0, pts, centers):
    """Per-center (max sup-norm distance, max gauge excess) over the orbit.

    Centers whose orbit diverges score inf on both; their row is frozen
    at the current trajectory point so the gauge stays evaluable.
    """
    n = len(centers)
    cur = np.array(centers, dtype=float)
    dist = np.zeros(n)
    excess = np.full(n, -np.inf)
    dead = np.zeros(n, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(len(pts)):
            dead |= ~np.all(np.isfinite(cur), axis=1)
            dead |= np.any(np.abs(cur) > _ESCAPE_LIMIT, axis=1)
            cur[dead] = pts[k]
            dist = np.maximum(dist, np.max(np.abs(cur - pts[k]), axis=1))
            excess = np.maximum(excess, max_gauge(pair, pts[k], cur) - delta0)
            if k + 1 < len(pts):
                cur = np.asarray(apply(spec, cur), dtype=float)
    dist[dead] = np.inf
    excess[dead] = np.inf
    return dist, excess


def shadow_2d_search(
    spec: MapSpec,
    traj: Pseudotrajectory,
    eps: float,
    pair: Optional[GaugePair] = None,
    depth: int = DEFAULT_DEPTH,
    cells_per_side: int = DEFAULT_CELLS_PER_SIDE,
    max_survivors: int = DEFAULT_SURVIVOR_CAP,
) -> ShadowResult:
    """Refining cell search over the gauge rectangle around the start point.

    At each level every survivor rectangle is split ``cells_per_side``
    squared ways; a cell survives when its center's orbit keeps the
    gauge within the base level plus one cell diagonal of slack.  The
    answer is the best evaluated center by orbital sup-norm distance
    (ties: first in rect-major, row-major order), re-verified from
    scratch; ``found=False`` at a finite depth is exhaustion, not proof
    of absence.
    """
    eps = _check_eps(eps)
    if traj.dim != 2:
        raise UsageError("planar cell search needs a 2D trajectory")
    if depth < 0 or cells_per_side < 2 or max_survivors < 1:
        raise UsageError("need depth >= 0, cells_per_side >= 2, max_survivors >= 1")
    if pair is None:
        pair = BoxPair()
    pts = traj.points
    delta0 = pair.delta0(eps)
    p0 = pts[0]

    region = Region(center=(p0[0], p0[1]), level=delta0, pair=pair)
    lo, hi = region.bounds()

    def _finish(center, cell):
        check = verify_shadowing(spec, traj, center, eps)
        cert = dict(cell)
        if isinstance(check.certificate, dict):
            cert.update(check.certificate)
        return ShadowResult(check.found, center, check.max_dist, cert)

    dist0, _ = _orbit_scores(spec, pair, delta0, pts, p0[None, :])
    best_dist = float(dist0[0])
    best_center = (float(p0[0]), float(p0[1]))
    best_cell = {
        "center": [float(p0[0]), float(p0[1])],
        "half_widths": [float(region.x_half_width), float(delta0)],
        "level": 0,
        "index": [0, 0],
    }
    # a best candidate already inside the tolerance ends the search: the
    # question is existence, and verification is the arbiter either way
    if best_dist <= eps:
        early = _finish(best_center, best_cell)
        if early.found:
            return early

    rects = np.array([[lo[0], lo[1], hi[0], hi[1]]])
    for level in range(1, depth + 1):
        centers, row_col, cell_rects = _subdivide(rects, cells_per_side)
        wx = (rects[0, 2] - rects[0, 0]) / cells_per_side
        wy = (rects[0, 3] - rects[0, 1]) / cells_per_side
        slack = math.hypot(wx, wy)

        dist, excess = _orbit_scores(spec, pair, delta0, pts, centers)
        i_best = int(np.argmin(dist))
        if dist[i_best] < best_dist:
            best_dist = float(dist[i_best])
            best_center = (float(centers[i_best, 0]), float(centers[i_best, 1]))
            best_cell = {
                "center": [best_center[0], best_center[1]],
                "half_widths": [wx / 2.0, wy / 2.0],
                "level": level,
                "index": [int(row_col[i_best, 0]), int(row_col[i_best, 1])],
            }
            if best_dist <= eps:
                early = _finish(best_center, best_cell)
                if early.found:
                    return early

        surviving = np.flatnonzero(excess <= slack)
        if len(surviving) == 0:
            break
        if len(surviving) > max_survivors:
            order = np.lexsort((surviving, excess[surviving]))
            surviving = np.sort(surviving[order[:max_survivors]])
        rects = cell_rects[surviving]

    return _finish(best_center, best_cell)


def shadow_weighted(
    spec: NonisolatedSkew,
    traj: Pseudotrajectory,
    eps: float,
    level_divisor: int = 4,
) -> ShadowResult:
    """Interval solver for the skew map under the weighted gauge.

    Works at gauge level ``eps / (2 * level_divisor)``: the accuracy
    level ``eps / 2`` is divided so a single map step has room to grow
    the gauge ``level_divisor``-fold without leaving the guarantee.  The start
    x-coordinate must satisfy ``|r_x / 2^k - x_k| <= level * weight_k``
    for every step, giving one interval per step whose intersection pins
    ``r_x``; the start y then satisfies a product-weighted interval for
    every step (forward y-growth is the cumulative product of
    ``1 + x^2`` along the pinned x-orbit), and those intersect to pin
    ``r_y``.  Certificate carries both intervals plus a chain diagnostic
    reporting whether one map step indeed keeps region images within
    ``level_divisor`` working levels of the next point (reported, never
    enforced).
    """
    eps = _check_eps(eps)
    if not isinstance(spec, NonisolatedSkew):
        raise UsageError("weighted interval solver is specific to the skew map")
    if traj.dim != 2:
        raise UsageError("weighted interval solver needs a 2D trajectory")
    if not isinstance(level_divisor, int) or level_divisor < 1:
        raise UsageError("level_divisor must be a positive integer")
    pts = traj.points
    xs = pts[:, 0]
    ys = pts[:, 1]
    if np.any(xs == 0.0) or np.any(np.abs(xs) >= 1.0):
        raise DomainError("every trajectory point needs 0 < |x| < 1")

    delta = eps / (2.0 * level_divisor)
    weights = np.abs(xs) * (1.0 - np.abs(xs))
    steps = np.arange(len(xs))
    pow2 = np.ldexp(np.ones(len(xs)), steps)

    cert: dict = {"delta": float(delta), "level_divisor": level_divisor}
    x_lo = float(np.max(pow2 * (xs - delta * weights)))
    x_hi = float(np.min(pow2 * (xs + delta * weights)))
    if x_lo > x_hi:
        cert.update(x_interval=None, y_interval=None, empty_axis="x")
        return ShadowResult(False, None, math.inf, cert)
    rx = 0.5 * (x_lo + x_hi)
    cert["x_interval"] = [x_lo, x_hi]

    orbit_x = rx * np.ldexp(np.ones(len(xs)), -steps)
    growth = 1.0 + orbit_x * orbit_x
    products = np.concatenate([[1.0], np.cumprod(growth[:-1])])
    y_lo = float(np.max((ys - delta) / products))
    y_hi = float(np.min((ys + delta) / products))
    if y_lo > y_hi:
        cert.update(y_interval=None, empty_axis="y")
        return ShadowResult(False, None, math.inf, cert)
    ry = 0.5 * (y_lo + y_hi)
    cert["y_interval"] = [y_lo, y_hi]

    if len(xs) > 1:
        sign_x = np.array([-1.0, -1.0, 1.0, 1.0])
        sign_y = np.array([-1.0, 1.0, -1.0, 1.0])
        corner_x = xs[:-1, None] + sign_x * (delta * weights[:-1, None])
        corner_y = ys[:-1, None] + sign_y * delta
        img_x = 0.5 * corner_x
        img_y = corner_y * (1.0 + corner_x * corner_x)
        v = np.abs(img_y - ys[1:, None])
        w = np.abs(img_x - xs[1:, None]) / weights[1:, None]
        ratio = float(np.max(np.maximum(v, w)) / (level_divisor * delta))
    else:
        ratio = 0.0
    cert.update(chain_ratio=ratio, chain_ok=bool(ratio <= 1.0))

    check = verify_shadowing(spec, traj, (rx, ry), eps)
    return ShadowResult(check.found, (rx, ry), check.max_dist, cert)
