"""Finite pseudotrajectories and their per-step error models.

A pseudotrajectory is a finite point sequence p_0, ..., p_m whose
steps approximately follow a map: ||f(p_k) - p_{k+1}||_inf stays
within a per-step budget.  Two budgets are supported:

* ``uniform``:  budget d at every step;
* ``weighted``: budget d * (p_k)_x^2, shrinking near the line of
  fixed points of the skew family (and undefined at x = 0).

``exact`` (budget 0) marks true orbits.  Errors are drawn uniformly
from the admissible max-norm box, deterministically from a 64-bit
seed via the package's counter-based generator, so identical inputs
reproduce bit-identical trajectories regardless of thread count.
Generation stops early (and flags the trajectory as truncated) when
the next point would leave the declared neighborhood.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, UsageError
from .maps import (
    MapSpec,
    Neighborhood,
    apply,
    map_dim,
    spec_from_json,
    spec_to_json,
)
from .rng import Stream, derive

__all__ = [
    "ErrorModel",
    "Pseudotrajectory",
    "PushDirection",
    "ErrorValidation",
    "generate",
    "generate_adversarial",
    "validate_errors",
    "format_trajectory_csv",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

_KINDS = ("exact", "uniform", "weighted")


@dataclass(frozen=True)
class ErrorModel:
    """Per-step error budget: 'exact' (0), 'uniform' (d), or
    'weighted' (d * x^2, requiring x != 0)."""

    kind: str
    d: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise UsageError(f"unknown error model kind: {self.kind!r}")
        if self.kind == "exact":
            if self.d != 0.0:
                raise UsageError("exact model carries no error budget")
        elif not (self.d >= 0 and np.isfinite(self.d)):
            raise UsageError("error budget d must be finite and >= 0")

    def bound(self, p):
        """Admissible max-norm error at the point(s) p.

        Constant-budget kinds return a scalar (it broadcasts); the
        weighted kind needs 2D points and returns one budget per point.
        """
        if self.kind == "exact":
            return 0.0
        if self.kind == "uniform":
            return self.d
        a = np.asarray(p, dtype=float)
        if a.ndim == 0 or a.shape[-1] != 2:
            raise UsageError("weighted budget needs 2D points")
        x = a[..., 0]
        if np.any(x == 0.0):
            raise DomainError("weighted budget undefined at x = 0")
        return self.d * x * x

    def to_json(self) -> dict:
        return {"kind": self.kind, "d": self.d}

    @staticmethod
    def from_json(obj: dict) -> "ErrorModel":
        return ErrorModel(str(obj["kind"]), float(obj.get("d", 0.0)))


class PushDirection(enum.Enum):
    PUSH_Y_UP = "push_y_up"
    PUSH_Y_DOWN = "push_y_down"
    PUSH_X_OUT = "push_x_out"


@dataclass(frozen=True)
class Pseudotrajectory:
    """Point sequence with its error model and provenance."""

    points: np.ndarray
    model: ErrorModel
    seed: Optional[int] = None
    truncated: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim not in (1, 2) or len(pts) < 1:
            raise UsageError("trajectory needs a nonempty 1D or 2D point array")
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return len(self.points) - 1

    @property
    def dim(self) -> int:
        return 1 if self.points.ndim == 1 else self.points.shape[-1]


def _draw_error(stream: Stream, k: int, dim: int, budget: float) -> np.ndarray:
    u = np.array([stream.uniform(k * dim + c) for c in range(dim)])
    return (2.0 * u - 1.0) * budget


def _push_error(direction: PushDirection, p, dim: int, budget: float) -> np.ndarray:
    if dim == 1:
        if direction is not PushDirection.PUSH_X_OUT:
            raise UsageError("1D maps support only the outward x push")
        sgn = 1.0 if float(np.asarray(p).ravel()[0]) >= 0 else -1.0
        return np.array([sgn * budget])
    if direction is PushDirection.PUSH_Y_UP:
        return np.array([0.0, budget])
    if direction is PushDirection.PUSH_Y_DOWN:
        return np.array([0.0, -budget])
    if direction is PushDirection.PUSH_X_OUT:
        sgn = 1.0 if float(np.asarray(p)[0]) >= 0 else -1.0
        return np.array([sgn * budget, 0.0])
    raise UsageError(f"unknown push direction: {direction!r}")


def _generate(spec, p0, m, model, K, seed, direction) -> Pseudotrajectory:
    if m < 1:
        raise UsageError("m must be >= 1")
    dim = map_dim(spec)
    if model.kind == "weighted" and dim != 2:
        raise UsageError("weighted budget needs a 2D map")
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    if p0.shape != (dim,):
        raise UsageError(f"p0 must be a {dim}D point")
    K_arg = float(p0[0]) if dim == 1 else p0
    if not K.contains(K_arg):
        raise UsageError("p0 must lie inside the neighborhood K")
    stream = Stream(derive(0 if seed is None else int(seed)))
    pts = [p0.copy()]
    truncated = False
    for k in range(m):
        pk = pts[-1]
        budget = float(model.bound(pk)) if model.kind == "weighted" else (
            model.d if model.kind == "uniform" else 0.0
        )
        img = apply(spec, pk if dim == 2 else float(pk[0]))
        img = np.atleast_1d(np.asarray(img, dtype=float))
        if direction is None:
            e = _draw_error(stream, k, dim, budget)
        else:
            e = _push_error(direction, pk, dim, budget)
        nxt = img + e
        # the rounded sum can overshoot the budget by an ulp of the
        # image coordinate; nudge offenders back so the stored doubles
        # satisfy the bound exactly as stored
        for _ in range(3):
            over = np.abs(nxt - img) > budget
            if not np.any(over):
                break
            nxt = np.where(over, np.nextafter(nxt, img), nxt)
        inside = K.contains(nxt if dim == 2 else float(nxt[0]))
        if not inside:
            truncated = True
            break
        pts.append(nxt)
    arr = np.stack(pts)
    if dim == 1:
        arr = arr[:, 0]
    return Pseudotrajectory(
        points=arr, model=model, seed=seed, truncated=truncated
    )


def generate(
    spec: MapSpec,
    p0,
    m: int,
    model: ErrorModel,
    K: Neighborhood,
    seed: Optional[int] = 0,
) -> Pseudotrajectory:
    """Seeded pseudotrajectory: each step adds an error drawn uniformly
    from the admissible max-norm box around the exact image."""
    return _generate(spec, p0, m, model, K, seed, direction=None)


def generate_adversarial(
    spec: MapSpec,
    p0,
    m: int,
    model: ErrorModel,
    K: Neighborhood,
    direction: PushDirection,
) -> Pseudotrajectory:
    """Worst-case pseudotrajectory: every step spends the full budget
    as a push in one fixed coordinate direction."""
    return _generate(spec, p0, m, model, K, seed=None, direction=direction)


@dataclass(frozen=True)
class ErrorValidation:
    max_violation: float
    worst_index: int


def validate_errors(spec: MapSpec, traj: Pseudotrajectory) -> ErrorValidation:
    """Largest excess of the step errors over the model budget.

    max over k of ||f(p_k) - p_{k+1}||_inf - budget(p_k); a value <= 0
    means every step respects the model.
    """
    pts = traj.points
    if traj.m < 1:
        return ErrorValidation(max_violation=float("-inf"), worst_index=0)
    cur = pts[:-1]
    nxt = pts[1:]
    img = apply(spec, cur)
    if pts.ndim == 1:
        if traj.model.kind == "weighted":
            raise UsageError("weighted budget needs 2D points")
        err = np.abs(np.asarray(img) - nxt)
    else:
        err = np.max(np.abs(img - nxt), axis=-1)
    budgets = np.broadcast_to(
        np.asarray(traj.model.bound(cur), dtype=float), err.shape
    )
    excess = err - budgets
    worst = int(np.argmax(excess))
    return ErrorValidation(max_violation=float(excess[worst]), worst_index=worst)


# ---------------------------------------------------------------------------
# CSV interchange: one JSON header line, then k,x[,y] rows
# ---------------------------------------------------------------------------

def format_trajectory_csv(traj: Pseudotrajectory, spec: MapSpec) -> str:
    meta = {
        "spec": spec_to_json(spec),
        "model": traj.model.to_json(),
        "seed": traj.seed,
        "truncated": traj.truncated,
    }
    pts = traj.points
    two_d = pts.ndim == 2
    lines = ["# " + json.dumps(meta, separators=(",", ":"))]
    lines.append("k,x,y" if two_d else "k,x")
    for k, p in enumerate(pts):
        if two_d:
            lines.append(f"{k},{p[0]:.17g},{p[1]:.17g}")
        else:
            lines.append(f"{k},{p:.17g}")
    return "\n".join(lines) + "\n"


def write_trajectory_csv(path, traj: Pseudotrajectory, spec: MapSpec) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_trajectory_csv(traj, spec))


def read_trajectory_csv(path) -> tuple[Pseudotrajectory, MapSpec]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("# "):
            raise UsageError("trajectory CSV must start with a JSON header line")
        meta = json.loads(header[2:])
        columns = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    spec = spec_from_json(meta["spec"])
    model = ErrorModel.from_json(meta["model"])
    if columns == ["k", "x", "y"]:
        pts = np.array([[float(r[1]), float(r[2])] for r in rows])
    elif columns == ["k", "x"]:
        pts = np.array([float(r[1]) for r in rows])
    else:
        raise UsageError(f"unrecognized trajectory CSV columns: {columns}")
    traj = Pseudotrajectory(
        points=pts,
        model=model,
        seed=meta.get("seed"),
        truncated=bool(meta.get("truncated", False)),
    )
    return traj, spec
