"""Displacement gauges and the rectangle regions they induce.

A *gauge pair* assigns to a center ``p`` and a nearby point ``q`` two
nonnegative numbers measuring the vertical and horizontal displacement
of ``q`` from ``p``:

* ``BoxPair``:      V = |q_y - p_y|,  W = |q_x - p_x|
* ``WeightedPair``: V = |q_y - p_y|,  W = |q_x - p_x| / (|p_x| (1 - |p_x|))

The weighted gauge is only defined for centers with 0 < |p_x| < 1; its
horizontal unit shrinks as the center approaches the line of fixed
points at x = 0, so a fixed gauge level buys less literal width there.

The sublevel set ``{q : V <= level, W <= level}`` is an axis-aligned
rectangle centered at ``p`` with y-half-height ``level`` and x-half-width
``pair.x_half_width(level, p)``.  Its boundary decomposes into parts
used by the sampled sufficient-condition battery:

* ``Q_FACE``     -- top and bottom edges, corners included (V = level)
* ``R_FACE``     -- left and right edges, corners included (W = level)
* ``T_CORE``     -- the horizontal mid-segment (V = 0, W <= level)
* ``INT_Q_FACE`` -- top and bottom edges, corners excluded

``classify`` maps a point to a single part with the precedence
OUTSIDE > T_CORE > Q_FACE > R_FACE > INTERIOR (it never answers
INT_Q_FACE, whose points label as Q_FACE); ``in_part`` answers the
overlapping membership questions directly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, UsageError

__all__ = [
    "BoxPair",
    "WeightedPair",
    "GaugePair",
    "Region",
    "RegionPart",
    "classify",
    "in_part",
    "face_tol",
    "max_gauge",
    "sample_part",
    "pair_from_name",
    "pair_name",
]


def _split_q(p, q):
    pa = np.asarray(p, dtype=float)
    qa = np.asarray(q, dtype=float)
    if pa.shape != (2,):
        raise UsageError("gauge center must be a single 2D point")
    if qa.ndim == 0 or qa.shape[-1] != 2:
        raise UsageError("gauge argument must have trailing dimension 2")
    return pa, qa


@dataclass(frozen=True)
class BoxPair:
    """Plain max-norm gauges: both units are literal coordinates."""

    def v(self, p, q):
        pa, qa = _split_q(p, q)
        return np.abs(qa[..., 1] - pa[1])

    def w(self, p, q):
        pa, qa = _split_q(p, q)
        return np.abs(qa[..., 0] - pa[0])

    def x_half_width(self, level: float, p) -> float:
        return float(level)

    def delta0(self, eps: float) -> float:
        """Largest gauge level guaranteeing literal distance <= eps."""
        return float(eps)


@dataclass(frozen=True)
class WeightedPair:
    """Horizontal gauge in units of |p_x| (1 - |p_x|); needs 0 < |p_x| < 1."""

    def _weight(self, pa) -> float:
        ax = abs(float(pa[0]))
        if not 0.0 < ax < 1.0:
            raise DomainError(
                f"weighted gauge needs 0 < |center_x| < 1, got {pa[0]!r}"
            )
        return ax * (1.0 - ax)

    def v(self, p, q):
        pa, qa = _split_q(p, q)
        return np.abs(qa[..., 1] - pa[1])

    def w(self, p, q):
        pa, qa = _split_q(p, q)
        return np.abs(qa[..., 0] - pa[0]) / self._weight(pa)

    def x_half_width(self, level: float, p) -> float:
        pa = np.asarray(p, dtype=float)
        return float(level) * self._weight(pa)

    def delta0(self, eps: float) -> float:
        """Largest safe gauge level for literal accuracy eps.

        The weight |p_x|(1 - |p_x|) never exceeds 1/4, so a gauge level
        of eps/2 keeps the literal x-displacement below eps/8 and the
        y-displacement below eps/2; the halved level leaves headroom
        for centers drifting during a search.
        """
        return float(eps) / 2.0


GaugePair = Union[BoxPair, WeightedPair]

_PAIR_NAMES = {"box": BoxPair, "weighted": WeightedPair}


def pair_from_name(name: str) -> GaugePair:
    try:
        return _PAIR_NAMES[name]()
    except KeyError:
        raise UsageError(
            f"unknown gauge pair {name!r}; choose from {sorted(_PAIR_NAMES)}"
        ) from None


def pair_name(pair: GaugePair) -> str:
    for k, cls in _PAIR_NAMES.items():
        if isinstance(pair, cls):
            return k
    raise UsageError(f"unnamed gauge pair: {pair!r}")


def max_gauge(pair: GaugePair, p, q):
    """max(V, W) — the quantity the region sublevel sets are built from."""
    return np.maximum(pair.v(p, q), pair.w(p, q))


def face_tol(level: float) -> float:
    """Float-comparison tolerance for deciding face membership."""
    return 1e-9 * (1.0 + float(level))


class RegionPart(enum.Enum):
    INTERIOR = "interior"
    Q_FACE = "q_face"
    R_FACE = "r_face"
    T_CORE = "t_core"
    INT_Q_FACE = "int_q_face"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class Region:
    """Axis-aligned gauge-sublevel rectangle around ``center``."""

    center: tuple[float, float]
    level: float
    pair: GaugePair

    def __post_init__(self):
        if not (self.level > 0 and np.isfinite(self.level)):
            raise UsageError("region level must be positive and finite")
        object.__setattr__(
            self, "center", (float(self.center[0]), float(self.center[1]))
        )

    @property
    def x_half_width(self) -> float:
        return self.pair.x_half_width(self.level, np.asarray(self.center))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        cx, cy = self.center
        w = self.x_half_width
        return (
            np.array([cx - w, cy - self.level]),
            np.array([cx + w, cy + self.level]),
        )

    def contains(self, q, tol: float = 0.0):
        g = max_gauge(self.pair, np.asarray(self.center), q)
        return g <= self.level + tol


def classify(pair: GaugePair, p, q, level: float) -> RegionPart:
    """Single-label classification of q relative to the level-rectangle at p."""
    v = float(pair.v(p, q))
    w = float(pair.w(p, q))
    tol = face_tol(level)
    if v > level + tol or w > level + tol:
        return RegionPart.OUTSIDE
    if v <= tol:
        return RegionPart.T_CORE
    if abs(v - level) <= tol:
        return RegionPart.Q_FACE
    if abs(w - level) <= tol:
        return RegionPart.R_FACE
    return RegionPart.INTERIOR


def in_part(pair: GaugePair, part: RegionPart, p, q, level: float):
    """Set membership for each (possibly overlapping) boundary part."""
    v = pair.v(p, q)
    w = pair.w(p, q)
    tol = face_tol(level)
    on_v = np.abs(v - level) <= tol
    on_w = np.abs(w - level) <= tol
    if part is RegionPart.OUTSIDE:
        return (v > level + tol) | (w > level + tol)
    if part is RegionPart.T_CORE:
        return (v <= tol) & (w <= level + tol)
    if part is RegionPart.Q_FACE:
        return on_v & (w <= level + tol)
    if part is RegionPart.R_FACE:
        return on_w & (v <= level + tol)
    if part is RegionPart.INT_Q_FACE:
        return on_v & (w < level - tol)
    if part is RegionPart.INTERIOR:
        return (v < level - tol) & (w < level - tol)
    raise UsageError(f"unknown region part: {part!r}")


def _face_points(xs, y) -> np.ndarray:
    return np.stack([xs, np.full_like(xs, y)], axis=-1)


def _linspace_inclusive(lo: float, hi: float, n: int) -> np.ndarray:
    if n == 1:
        return np.array([(lo + hi) / 2.0])
    return np.linspace(lo, hi, n)


def sample_part(region: Region, part: RegionPart, count: int) -> np.ndarray:
    """Deterministic sample points on one part of the region boundary.

    Returns an (count, 2) array.  Horizontal faces are sampled top
    first, then bottom; vertical faces right first, then left; uneven
    counts give the extra point to the first face.  ``count == 4`` on
    Q_FACE returns exactly the four corners.
    """
    if count < 1:
        raise UsageError("sample count must be >= 1")
    cx, cy = region.center
    d = region.level
    w = region.x_half_width

    if part is RegionPart.Q_FACE or part is RegionPart.INT_Q_FACE:
        n_top = (count + 1) // 2
        n_bot = count - n_top
        if part is RegionPart.Q_FACE:
            xs_top = _linspace_inclusive(cx - w, cx + w, n_top)
            xs_bot = _linspace_inclusive(cx - w, cx + w, max(n_bot, 0))
        else:
            # strictly inside the face: drop the corner endpoints
            xs_top = np.linspace(cx - w, cx + w, n_top + 2)[1:-1]
            xs_bot = np.linspace(cx - w, cx + w, n_bot + 2)[1:-1]
        top = _face_points(xs_top, cy + d)
        bot = _face_points(xs_bot, cy - d)
        return np.concatenate([top, bot])[:count]

    if part is RegionPart.R_FACE:
        n_r = (count + 1) // 2
        n_l = count - n_r
        ys_r = _linspace_inclusive(cy - d, cy + d, n_r)
        ys_l = _linspace_inclusive(cy - d, cy + d, max(n_l, 0))
        right = np.stack([np.full_like(ys_r, cx + w), ys_r], axis=-1)
        left = np.stack([np.full_like(ys_l, cx - w), ys_l], axis=-1)
        return np.concatenate([right, left])[:count]

    if part is RegionPart.T_CORE:
        xs = _linspace_inclusive(cx - w, cx + w, count)
        return _face_points(xs, cy)

    if part is RegionPart.INTERIOR:
        t = np.linspace(0.0, 1.0, count + 2)[1:-1]
        xs = cx + (2.0 * t - 1.0) * 0.9 * w
        ys = cy + (1.0 - 2.0 * t) * 0.9 * d
        return np.stack([xs, ys], axis=-1)

    raise UsageError(f"cannot sample part {part!r}")
