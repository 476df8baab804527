"""Map families for the shadowing laboratory.

Three families of discrete dynamical systems around a nonhyperbolic
fixed point at the origin, all measured in the max-norm:

* ``Expanding1D(n, x_terms)``:   f(x) = x + x^(2n+1) + X(x)
* ``PlanarSaddle(n, m, ...)``:   f(x, y) = (x - x^(2n+1) + X(x, y),
                                            y + y^(2m+1) + Y(x, y))
* ``NonisolatedSkew()``:         f(x, y) = (x/2, y * (1 + x^2))

X and Y are finite sums of real monomials ``coeff * x^xdeg * y^ydeg``.
The skew family fixes every point of the y-axis (a line of fixed
points), and has the closed-form inverse (2x, y / (1 + 4 x^2)).

Points
------
1D points are floats (or 1-d arrays for batches); 2D points are
array-likes of shape (2,) (or (N, 2) for batches).  All operations
broadcast over leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .errors import ConvergenceError, UsageError

__all__ = [
    "Monomial",
    "Expanding1D",
    "PlanarSaddle",
    "NonisolatedSkew",
    "CustomMap",
    "MapSpec",
    "Neighborhood",
    "apply",
    "apply_inverse",
    "jacobian",
    "map_dim",
    "orbit",
    "spec_to_json",
    "spec_from_json",
]

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 64
# Newton aborts when |det J| drops below this: the iterate is
# approaching a fold of the polynomial map, outside the branch where
# inversion is well posed.
NEWTON_DET_FLOOR = 0.05


@dataclass(frozen=True)
class Monomial:
    """One perturbation term ``coeff * x**x_deg * y**y_deg``.

    For 1D maps ``y_deg`` must be 0.  Terms of total degree 0 are
    rejected: they would move the fixed point away from the origin.
    """

    coeff: float
    x_deg: int
    y_deg: int = 0

    def __post_init__(self):
        if self.x_deg < 0 or self.y_deg < 0:
            raise UsageError("monomial degrees must be nonnegative")
        if self.x_deg + self.y_deg == 0:
            raise UsageError("constant perturbation terms are not allowed")

    def value(self, x, y=None):
        v = self.coeff * np.power(x, self.x_deg)
        if self.y_deg:
            v = v * np.power(y, self.y_deg)
        return v

    def dx(self, x, y=None):
        if self.x_deg == 0:
            return np.zeros_like(np.asarray(x, dtype=float))
        v = self.coeff * self.x_deg * np.power(x, self.x_deg - 1)
        if self.y_deg:
            v = v * np.power(y, self.y_deg)
        return v

    def dy(self, x, y):
        if self.y_deg == 0:
            return np.zeros_like(np.asarray(x, dtype=float))
        return (
            self.coeff
            * self.y_deg
            * np.power(x, self.x_deg)
            * np.power(y, self.y_deg - 1)
        )


def _as_monomials(terms) -> tuple[Monomial, ...]:
    out = []
    for t in terms:
        if isinstance(t, Monomial):
            out.append(t)
        else:
            out.append(Monomial(*t))
    return tuple(out)


@dataclass(frozen=True)
class Expanding1D:
    """f(x) = x + x^(2n+1) + sum of pure-x perturbation terms."""

    n: int
    x_terms: tuple[Monomial, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise UsageError("n must be a positive integer")
        object.__setattr__(self, "x_terms", _as_monomials(self.x_terms))
        for t in self.x_terms:
            if t.y_deg != 0:
                raise UsageError("1D perturbation terms must have y_deg == 0")


@dataclass(frozen=True)
class PlanarSaddle:
    """f(x, y) = (x - x^(2n+1) + X(x,y), y + y^(2m+1) + Y(x,y))."""

    n: int
    m: int
    x_terms: tuple[Monomial, ...] = ()
    y_terms: tuple[Monomial, ...] = ()

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise UsageError("n and m must be positive integers")
        object.__setattr__(self, "x_terms", _as_monomials(self.x_terms))
        object.__setattr__(self, "y_terms", _as_monomials(self.y_terms))


@dataclass(frozen=True)
class NonisolatedSkew:
    """f(x, y) = (x/2, y(1 + x^2)); every point (0, y) is fixed."""


@dataclass(frozen=True)
class CustomMap:
    """Escape hatch for tests and oracles: user-supplied callables.

    Not part of the JSON interchange schema.  ``forward`` and
    ``inverse`` take and return (..., dim) arrays; ``jac`` returns
    (..., dim, dim).
    """

    dim: int
    forward: Callable = field(compare=False)
    inverse: Callable | None = field(default=None, compare=False)
    jac: Callable | None = field(default=None, compare=False)


MapSpec = Union[Expanding1D, PlanarSaddle, NonisolatedSkew, CustomMap]


@dataclass(frozen=True)
class Neighborhood:
    """Max-norm box ``|x_i| <= half_width`` (optionally minus the y-axis).

    ``exclude_x_zero`` marks neighborhoods on which the weighted
    machinery lives: membership additionally requires x != 0.
    """

    half_width: float
    exclude_x_zero: bool = False

    def __post_init__(self):
        if not (self.half_width > 0 and np.isfinite(self.half_width)):
            raise UsageError("half_width must be positive and finite")

    def contains(self, p) -> np.ndarray | bool:
        a = np.asarray(p, dtype=float)
        if a.ndim == 0:
            inside = abs(float(a)) <= self.half_width
            if self.exclude_x_zero:
                inside = inside and float(a) != 0.0
            return inside
        inside = np.max(np.abs(a), axis=-1) <= self.half_width
        if self.exclude_x_zero:
            inside = inside & (a[..., 0] != 0.0)
        return inside


def map_dim(spec: MapSpec) -> int:
    if isinstance(spec, Expanding1D):
        return 1
    if isinstance(spec, (PlanarSaddle, NonisolatedSkew)):
        return 2
    if isinstance(spec, CustomMap):
        return spec.dim
    raise UsageError(f"unknown map spec: {spec!r}")


def _check_point(spec: MapSpec, p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    dim = map_dim(spec)
    if dim == 1:
        if a.ndim > 1:
            raise UsageError("1D map applied to a point of wrong shape")
    else:
        if a.ndim == 0 or a.shape[-1] != dim:
            raise UsageError(
                f"{dim}D map applied to a point of shape {a.shape}"
            )
    if not np.all(np.isfinite(a)):
        raise UsageError("point coordinates must be finite")
    return a


@lru_cache(maxsize=256)
@lru_cache(maxsize=128)
def _poly1d_pair(spec: Expanding1D) -> tuple:
    """Cached (coefficients, derivative coefficients), both ascending.

    The arrays are shared across calls and marked read-only; callers
    must treat them as immutable.
    """
    deg = max([2 * spec.n + 1] + [t.x_deg for t in spec.x_terms])
    c = np.zeros(deg + 1)
    c[1] = 1.0
    c[2 * spec.n + 1] += 1.0
    for t in spec.x_terms:
        c[t.x_deg] += t.coeff
    dc = np.polynomial.polynomial.polyder(c)
    c.flags.writeable = False
    dc.flags.writeable = False
    return c, dc


def _poly1d_coeffs(spec: Expanding1D) -> np.ndarray:
    """Dense coefficient vector c with f(x) = sum c[j] x^j (ascending)."""
    return _poly1d_pair(spec)[0]


def apply(spec: MapSpec, p):
    """Forward image f(p).  Accepts single points or (N, ...) batches."""
    a = _check_point(spec, p)
    if isinstance(spec, Expanding1D):
        c = _poly1d_coeffs(spec)
        out = np.polynomial.polynomial.polyval(a, c)
        return float(out) if a.ndim == 0 else out
    if isinstance(spec, PlanarSaddle):
        x, y = a[..., 0], a[..., 1]
        gx = x - np.power(x, 2 * spec.n + 1)
        for t in spec.x_terms:
            gx = gx + t.value(x, y)
        hy = y + np.power(y, 2 * spec.m + 1)
        for t in spec.y_terms:
            hy = hy + t.value(x, y)
        return np.stack([gx, hy], axis=-1)
    if isinstance(spec, NonisolatedSkew):
        x, y = a[..., 0], a[..., 1]
        return np.stack([0.5 * x, y * (1.0 + x * x)], axis=-1)
    if isinstance(spec, CustomMap):
        return spec.forward(a)
    raise UsageError(f"unknown map spec: {spec!r}")


def jacobian(spec: MapSpec, p) -> np.ndarray:
    """Analytic Jacobi matrix at p, shape (..., dim, dim)."""
    a = _check_point(spec, p)
    if isinstance(spec, Expanding1D):
        dc = _poly1d_pair(spec)[1]
        d = np.polynomial.polynomial.polyval(a, dc)
        return np.asarray(d, dtype=float)[..., None, None]
    if isinstance(spec, PlanarSaddle):
        x, y = a[..., 0], a[..., 1]
        gxx = 1.0 - (2 * spec.n + 1) * np.power(x, 2 * spec.n)
        gxy = np.zeros_like(x)
        for t in spec.x_terms:
            gxx = gxx + t.dx(x, y)
            gxy = gxy + t.dy(x, y)
        hyx = np.zeros_like(x)
        hyy = 1.0 + (2 * spec.m + 1) * np.power(y, 2 * spec.m)
        for t in spec.y_terms:
            hyx = hyx + t.dx(x, y)
            hyy = hyy + t.dy(x, y)
        rows = np.stack(
            [np.stack([gxx, gxy], axis=-1), np.stack([hyx, hyy], axis=-1)],
            axis=-2,
        )
        return rows
    if isinstance(spec, NonisolatedSkew):
        x, y = a[..., 0], a[..., 1]
        z = np.zeros_like(x)
        return np.stack(
            [
                np.stack([np.full_like(x, 0.5), z], axis=-1),
                np.stack([2.0 * x * y, 1.0 + x * x], axis=-1),
            ],
            axis=-2,
        )
    if isinstance(spec, CustomMap):
        if spec.jac is None:
            raise UsageError("CustomMap has no jacobian callable")
        return spec.jac(a)
    raise UsageError(f"unknown map spec: {spec!r}")


def _newton_inverse_1d(spec: Expanding1D, q: np.ndarray, tol: float) -> np.ndarray:
    c, dc = _poly1d_pair(spec)
    x = np.array(q, dtype=float, copy=True)
    resid = np.inf
    for _ in range(NEWTON_MAX_ITER):
        fx = np.polynomial.polynomial.polyval(x, c) - q
        resid = float(np.max(np.abs(fx)))
        if resid <= tol:
            return x
        d = np.polynomial.polynomial.polyval(x, dc)
        if np.any(np.abs(d) < NEWTON_DET_FLOOR):
            raise ConvergenceError(
                "derivative fell below the invertibility floor", resid
            )
        x = x - fx / d
    raise ConvergenceError("Newton iteration did not converge", resid)


def _newton_inverse_2d(spec: PlanarSaddle, q: np.ndarray, tol: float) -> np.ndarray:
    p = np.array(q, dtype=float, copy=True)
    resid = np.inf
    for _ in range(NEWTON_MAX_ITER):
        fp = apply(spec, p) - q
        resid = float(np.max(np.abs(fp)))
        if resid <= tol:
            return p
        J = jacobian(spec, p)
        a, b = J[..., 0, 0], J[..., 0, 1]
        cc, d = J[..., 1, 0], J[..., 1, 1]
        det = a * d - b * cc
        if np.any(np.abs(det) < NEWTON_DET_FLOOR):
            raise ConvergenceError(
                "Jacobian determinant fell below the invertibility floor", resid
            )
        # 2x2 solve via the adjugate; cheaper than np.linalg.solve here.
        rx, ry = fp[..., 0], fp[..., 1]
        p = p - np.stack([(d * rx - b * ry) / det, (a * ry - cc * rx) / det], axis=-1)
    raise ConvergenceError("Newton iteration did not converge", resid)


def apply_inverse(spec: MapSpec, q, tol: float = NEWTON_TOL):
    """Preimage f^{-1}(q).

    Closed form for the skew family; Newton iteration seeded at q for
    the polynomial families (residual tolerance ``tol`` in max-norm,
    at most 64 iterations, aborting if the Jacobian determinant drops
    below 0.05 in absolute value).  Only the branch through the origin
    is inverted: q must lie in the image of the region where the map
    is a diffeomorphism.
    """
    a = _check_point(spec, q)
    if isinstance(spec, NonisolatedSkew):
        x, y = a[..., 0], a[..., 1]
        return np.stack([2.0 * x, y / (1.0 + 4.0 * x * x)], axis=-1)
    if isinstance(spec, Expanding1D):
        out = _newton_inverse_1d(spec, a, tol)
        return float(out) if a.ndim == 0 else out
    if isinstance(spec, PlanarSaddle):
        return _newton_inverse_2d(spec, a, tol)
    if isinstance(spec, CustomMap):
        if spec.inverse is None:
            raise UsageError("CustomMap has no inverse callable")
        return spec.inverse(a)
    raise UsageError(f"unknown map spec: {spec!r}")


def orbit(spec: MapSpec, p0, steps: int, escape_limit: float = 1e9) -> np.ndarray:
    """Forward orbit [p0, f(p0), ..., f^steps(p0)] as one array.

    Stops early as soon as the next point overflows, goes non-finite,
    or leaves the max-norm ball of radius ``escape_limit``; the array
    then holds only the valid prefix.  The built-in families iterate
    in plain floats — this is the hot loop of orbit verification, and
    per-step array dispatch would dominate the arithmetic.
    """
    if steps < 0:
        raise UsageError("steps must be >= 0")
    a = _check_point(spec, p0)
    if isinstance(spec, Expanding1D):
        descending = _poly1d_pair(spec)[0][::-1].tolist()
        x = float(a)
        out = [x]
        for _ in range(steps):
            y = 0.0
            try:
                for coeff in descending:
                    y = y * x + coeff
            except OverflowError:
                break
            if not abs(y) <= escape_limit:  # False for nan as well
                break
            x = y
            out.append(x)
        return np.array(out)
    if isinstance(spec, PlanarSaddle):
        xp = 2 * spec.n + 1
        yp = 2 * spec.m + 1
        xt = [(t.coeff, t.x_deg, t.y_deg) for t in spec.x_terms]
        yt = [(t.coeff, t.x_deg, t.y_deg) for t in spec.y_terms]
        x, y = float(a[0]), float(a[1])
        out = [(x, y)]
        for _ in range(steps):
            try:
                gx = x - x**xp
                for coeff, k, l in xt:
                    gx += coeff * x**k * y**l
                hy = y + y**yp
                for coeff, k, l in yt:
                    hy += coeff * x**k * y**l
            except OverflowError:
                break
            if not (abs(gx) <= escape_limit and abs(hy) <= escape_limit):
                break
            x, y = gx, hy
            out.append((x, y))
        return np.array(out)
    if isinstance(spec, NonisolatedSkew):
        x, y = float(a[0]), float(a[1])
        out = [(x, y)]
        for _ in range(steps):
            gx = 0.5 * x
            hy = y * (1.0 + x * x)
            if not (abs(gx) <= escape_limit and abs(hy) <= escape_limit):
                break
            x, y = gx, hy
            out.append((x, y))
        return np.array(out)
    cur = np.asarray(a, dtype=float)
    out = [cur]
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            cur = np.asarray(apply(spec, cur), dtype=float)
            if not np.all(np.isfinite(cur)) or np.any(np.abs(cur) > escape_limit):
                break
            out.append(cur)
    return np.stack(out)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

def _terms_to_json(terms: tuple[Monomial, ...]) -> list[dict]:
    return [{"a": t.coeff, "k": t.x_deg, "l": t.y_deg} for t in terms]


def _terms_from_json(items) -> tuple[Monomial, ...]:
    return tuple(
        Monomial(float(d["a"]), int(d["k"]), int(d.get("l", 0))) for d in items
    )


def spec_to_json(spec: MapSpec) -> dict:
    """Serialize to the interchange schema (CustomMap is not serializable)."""
    if isinstance(spec, Expanding1D):
        return {
            "variant": "expanding1d",
            "n": spec.n,
            "X": _terms_to_json(spec.x_terms),
        }
    if isinstance(spec, PlanarSaddle):
        return {
            "variant": "planar_saddle",
            "n": spec.n,
            "m": spec.m,
            "X": _terms_to_json(spec.x_terms),
            "Y": _terms_to_json(spec.y_terms),
        }
    if isinstance(spec, NonisolatedSkew):
        return {"variant": "nonisolated_skew"}
    raise UsageError(f"spec is not serializable: {spec!r}")


def spec_from_json(obj: dict) -> MapSpec:
    try:
        variant = obj["variant"]
    except (KeyError, TypeError):
        raise UsageError("map spec JSON must carry a 'variant' field") from None
    if variant == "expanding1d":
        return Expanding1D(int(obj["n"]), _terms_from_json(obj.get("X", [])))
    if variant == "planar_saddle":
        return PlanarSaddle(
            int(obj["n"]),
            int(obj["m"]),
            _terms_from_json(obj.get("X", [])),
            _terms_from_json(obj.get("Y", [])),
        )
    if variant == "nonisolated_skew":
        return NonisolatedSkew()
    raise UsageError(f"unknown map variant: {variant!r}")
