"""Empirical step-error thresholds, scaling exponents, and the drift demo.

``estimate_max_d`` bisects on the per-step error level: a level is
*feasible* when every seeded random pseudotrajectory at that level is
traced within tolerance, and — because tracing must survive the worst
case, not the average one — when the deterministic worst-case probes
(full budget spent pushing one coordinate every step) are traced too.
Random errors cancel like a random walk and would overstate the
threshold by orders of magnitude without the probes.

Trajectory length matters for the same reason: a push needs enough
steps to drive the orbit across the tolerance tube.  Callers pass a
per-tolerance length list so each tolerance gets the runway its tube
width demands.

``fit_exponent`` turns (tolerance, threshold) rows into a power law by
least squares on logs.  ``nonshadowing_demo`` packages the skew-map
counterexample: a flat-size upward push accumulates more vertical drift
than any true orbit can produce, which upgrades a failed grid search to
a conclusive negative.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DomainError, UsageError
from .lyapunov import BoxPair, GaugePair, pair_from_name, pair_name
from .maps import (
    Expanding1D,
    MapSpec,
    Neighborhood,
    NonisolatedSkew,
    PlanarSaddle,
    apply_inverse,
    map_dim,
    spec_from_json,
    spec_to_json,
)
from .pseudo import (
    ErrorModel,
    PushDirection,
    Pseudotrajectory,
    generate,
    generate_adversarial,
)
from .rng import derive
from .solver import shadow_1d_constructive, shadow_2d_search, shadow_weighted

__all__ = [
    "ScalingConfig",
    "ScalingResult",
    "config_from_json",
    "evaluate_level",
    "estimate_max_d",
    "fit_exponent",
    "run_scaling",
    "nonshadowing_demo",
    "write_scaling_csv",
]

# Bisection bracket: thresholds are sought between eps * 1e-6 and eps.
_BRACKET_FLOOR_FACTOR = 1e-6

# Coupled planar maps (cross terms present) fall back to the generic
# cell search with a budget sized for threshold measurement, where the
# verdicts near the boundary are sharp rather than marginal.
_COUPLED_SEARCH_DEPTH = 5
_COUPLED_SEARCH_CELLS = 8

# Interval slack mirroring the constructive 1D solver.
_INTERVAL_SLACK = 1e-11

_MODEL_KINDS = ("uniform", "weighted")


@dataclass(frozen=True)
class ScalingConfig:
    """Reproducible description of one threshold-measurement campaign.

    ``m`` is either one trajectory length for all tolerances or a
    sequence giving each entry of ``eps_list`` its own length.
    ``adversarial_probes`` keeps the worst-case pushes in the
    feasibility predicate; disabling them measures the random-walk
    threshold instead (diagnostics only — the traced guarantee is
    universally quantified).
    """

    spec: MapSpec
    eps_list: tuple = (0.025, 0.05, 0.1, 0.2)
    trials_per_d: int = 50
    m: Union[int, tuple] = 100
    K: Neighborhood = field(default_factory=lambda: Neighborhood(0.5))
    model_kind: str = "uniform"
    bisection_steps: int = 20
    seed: int = 0
    pair: GaugePair = field(default_factory=BoxPair)
    adversarial_probes: bool = True
    p0: Optional[tuple] = None

    def __post_init__(self):
        eps = tuple(float(e) for e in np.atleast_1d(self.eps_list))
        if not eps or any(e <= 0 or not math.isfinite(e) for e in eps):
            raise UsageError("eps_list must contain positive finite values")
        if list(eps) != sorted(eps):
            raise UsageError("eps_list must be sorted ascending")
        object.__setattr__(self, "eps_list", eps)
        if self.trials_per_d < 10:
            raise UsageError("trials_per_d must be at least 10")
        if isinstance(self.m, (int, np.integer)):
            if self.m < 1:
                raise UsageError("trajectory length must be positive")
        else:
            ms = tuple(int(v) for v in self.m)
            if len(ms) != len(eps) or any(v < 1 for v in ms):
                raise UsageError(
                    "per-tolerance lengths need one positive entry per eps"
                )
            object.__setattr__(self, "m", ms)
        if self.model_kind not in _MODEL_KINDS:
            raise UsageError(f"model_kind must be one of {_MODEL_KINDS}")
        if self.bisection_steps < 4:
            raise UsageError("bisection_steps must be at least 4")
        if self.p0 is not None:
            object.__setattr__(
                self, "p0", tuple(float(v) for v in np.atleast_1d(self.p0))
            )

    def length_for(self, eps_index: int) -> int:
        if isinstance(self.m, tuple):
            return self.m[eps_index]
        return int(self.m)

    def start_point(self):
        if self.p0 is not None:
            return self.p0[0] if map_dim(self.spec) == 1 else self.p0
        if isinstance(self.spec, NonisolatedSkew):
            # the weighted gauge degenerates on the fixed line x = 0
            return (0.1, 0.0)
        return 0.0 if map_dim(self.spec) == 1 else (0.0, 0.0)

    def to_json(self) -> dict:
        return {
            "spec": spec_to_json(self.spec),
            "eps_list": list(self.eps_list),
            "trials_per_d": self.trials_per_d,
            "m": list(self.m) if isinstance(self.m, tuple) else self.m,
            "K": {
                "half_width": self.K.half_width,
                "exclude_x_zero": self.K.exclude_x_zero,
            },
            "model_kind": self.model_kind,
            "bisection_steps": self.bisection_steps,
            "seed": self.seed,
            "pair": pair_name(self.pair),
            "adversarial_probes": self.adversarial_probes,
            "p0": list(self.p0) if self.p0 is not None else None,
        }


def config_from_json(obj: dict) -> ScalingConfig:
    """Inverse of :meth:`ScalingConfig.to_json`; unknown keys are rejected."""
    if not isinstance(obj, dict):
        raise UsageError("scaling config must be a JSON object")
    known = {
        "spec", "eps_list", "trials_per_d", "m", "K", "model_kind",
        "bisection_steps", "seed", "pair", "adversarial_probes", "p0",
    }
    extra = set(obj) - known
    if extra:
        raise UsageError(f"unknown scaling config keys: {sorted(extra)}")
    if "spec" not in obj:
        raise UsageError("scaling config needs a 'spec' entry")
    kwargs = {"spec": spec_from_json(obj["spec"])}
    if "eps_list" in obj:
        kwargs["eps_list"] = tuple(obj["eps_list"])
    for key in ("trials_per_d", "bisection_steps", "seed"):
        if key in obj:
            kwargs[key] = int(obj[key])
    if "m" in obj:
        m = obj["m"]
        kwargs["m"] = tuple(int(v) for v in m) if isinstance(m, list) else int(m)
    if "K" in obj:
        k = obj["K"]
        kwargs["K"] = Neighborhood(
            float(k["half_width"]), bool(k.get("exclude_x_zero", False))
        )
    if "model_kind" in obj:
        kwargs["model_kind"] = str(obj["model_kind"])
    if "pair" in obj:
        kwargs["pair"] = pair_from_name(obj["pair"])
    if "adversarial_probes" in obj:
        kwargs["adversarial_probes"] = bool(obj["adversarial_probes"])
    if obj.get("p0") is not None:
        kwargs["p0"] = tuple(float(v) for v in obj["p0"])
    return ScalingConfig(**kwargs)


@dataclass(frozen=True)
class ScalingResult:
    """Rows of (eps, d_max_estimate, success_rate) plus the log-log fit."""

    rows: tuple
    fit_c: float
    fit_p: float
    residual: float

    def __post_init__(self):
        rows = tuple((float(e), float(d), float(s)) for e, d, s in self.rows)
        if any(d <= 0 for _, d, _ in rows):
            raise UsageError("threshold estimates must be positive")
        object.__setattr__(self, "rows", rows)

    def to_json(self) -> dict:
        return {
            "rows": [
                {"eps": e, "d_max": d, "success_rate": s} for e, d, s in self.rows
            ],
            "fit_c": self.fit_c,
            "fit_p": self.fit_p,
            "residual": self.residual,
        }


def _probe_directions(spec: MapSpec):
    if map_dim(spec) == 1:
        return (PushDirection.PUSH_X_OUT,)
    return (PushDirection.PUSH_Y_UP, PushDirection.PUSH_Y_DOWN)


def _is_product_saddle(spec: MapSpec) -> bool:
    return isinstance(spec, PlanarSaddle) and not spec.x_terms and not spec.y_terms


def _product_saddle_found(spec: PlanarSaddle, pts: np.ndarray, eps: float) -> bool:
    """Exact feasibility for cross-term-free planar saddles.

    The two coordinates evolve independently, so a tracing orbit exists
    iff a start interval survives forward interval propagation through
    the contracting x-map and, separately, backward propagation through
    the expanding y-map.
    """
    # forward through x -> x - x^(2n+1), increasing while (2n+1) x^(2n) < 1
    mono = (1.0 / (2 * spec.n + 1)) ** (1.0 / (2 * spec.n)) * 0.98
    lo = float(pts[0, 0]) - eps
    hi = float(pts[0, 0]) + eps
    for k in range(1, len(pts)):
        if max(abs(lo), abs(hi)) > mono:
            return False  # outside the monotone window: give up, count infeasible
        lo, hi = lo - lo ** (2 * spec.n + 1), hi - hi ** (2 * spec.n + 1)
        lo = max(lo, float(pts[k, 0]) - eps)
        hi = min(hi, float(pts[k, 0]) + eps)
        if lo > hi:
            return False

    vertical = Expanding1D(n=spec.m)
    lo = float(pts[-1, 1]) - eps
    hi = float(pts[-1, 1]) + eps
    for k in range(len(pts) - 2, -1, -1):
        lo = max(float(pts[k, 1]) - eps, float(apply_inverse(vertical, lo)) - _INTERVAL_SLACK)
        hi = min(float(pts[k, 1]) + eps, float(apply_inverse(vertical, hi)) + _INTERVAL_SLACK)
        if lo > hi:
            return False
    return True


def _traced(config: ScalingConfig, traj: Pseudotrajectory, eps: float) -> bool:
    """One trial verdict; truncation and solver errors count as failures."""
    if traj.truncated:
        return False
    spec = config.spec
    try:
        if isinstance(spec, Expanding1D):
            return shadow_1d_constructive(spec, traj, eps).found
        if isinstance(spec, NonisolatedSkew):
            return shadow_weighted(spec, traj, eps).found
        if _is_product_saddle(spec):
            return _product_saddle_found(spec, traj.points, eps)
        return shadow_2d_search(
            spec,
            traj,
            eps,
            pair=config.pair,
            depth=_COUPLED_SEARCH_DEPTH,
            cells_per_side=_COUPLED_SEARCH_CELLS,
        ).found
    except (DomainError, UsageError, RuntimeError):
        return False


def evaluate_level(
    config: ScalingConfig,
    eps: float,
    d: float,
    early_exit: bool = False,
) -> tuple:
    """All-trials verdict and success rate at one per-step error level.

    Runs ``trials_per_d`` seeded random trajectories plus (by default)
    the deterministic worst-case probes; every one must be traced within
    ``eps``.  The rate counts both kinds of check.
    """
    eps_index = _eps_index(config, eps)
    m = config.length_for(eps_index)
    model = ErrorModel(config.model_kind, float(d))
    p0 = config.start_point()

    passed = 0
    total = 0
    all_ok = True
    for trial in range(config.trials_per_d):
        total += 1
        seed = derive(config.seed, eps_index, trial)
        traj = generate(config.spec, p0, m, model, config.K, seed=seed)
        if _traced(config, traj, eps):
            passed += 1
        else:
            all_ok = False
            if early_exit:
                return False, passed / total
    if config.adversarial_probes:
        for direction in _probe_directions(config.spec):
            total += 1
            traj = generate_adversarial(config.spec, p0, m, model, config.K, direction)
            if _traced(config, traj, eps):
                passed += 1
            else:
                all_ok = False
                if early_exit:
                    return False, passed / total
    return all_ok, passed / total


def _eps_index(config: ScalingConfig, eps: float) -> int:
    for i, e in enumerate(config.eps_list):
        if math.isclose(e, eps, rel_tol=1e-12):
            return i
    raise UsageError(f"eps {eps!r} is not in the configured eps_list")


def estimate_max_d(config: ScalingConfig, eps: float) -> tuple:
    """Bisect for the largest feasible per-step error level at ``eps``.

    Brackets between ``eps * 1e-6`` and ``eps``; the lower end is
    assumed feasible (the guaranteed regime), the upper end is refuted
    or accepted by trial.  Returns the final bracket midpoint and the
    success rate measured at it.
    """
    eps = float(eps)
    _eps_index(config, eps)  # validates membership
    lo = eps * _BRACKET_FLOOR_FACTOR
    hi = eps
    if evaluate_level(config, eps, hi, early_exit=True)[0]:
        lo = hi
    else:
        for _ in range(config.bisection_steps):
            mid = 0.5 * (lo + hi)
            if evaluate_level(config, eps, mid, early_exit=True)[0]:
                lo = mid
            else:
                hi = mid
    d_est = 0.5 * (lo + hi)
    _, rate = evaluate_level(config, eps, d_est, early_exit=False)
    return d_est, rate


def fit_exponent(rows) -> tuple:
    """Least-squares power law through (eps, d_max) rows.

    Returns (c, p, residual) for d_max ~ c * eps**p, residual being the
    RMS misfit of log d_max.
    """
    rows = list(rows)
    if len(rows) < 3:
        raise UsageError("need at least 3 rows to fit an exponent")
    eps = np.array([r[0] for r in rows], dtype=float)
    dmax = np.array([r[1] for r in rows], dtype=float)
    if np.any(dmax <= 0) or np.any(eps <= 0):
        raise UsageError("rows must have positive eps and d_max")
    slope, intercept = np.polyfit(np.log(eps), np.log(dmax), 1)
    pred = intercept + slope * np.log(eps)
    residual = float(np.sqrt(np.mean((np.log(dmax) - pred) ** 2)))
    return float(np.exp(intercept)), float(slope), residual


def run_scaling(config: ScalingConfig) -> ScalingResult:
    """Measure every configured tolerance and fit the power law."""
    rows = []
    for eps in config.eps_list:
        d_est, rate = estimate_max_d(config, eps)
        rows.append((eps, d_est, rate))
    c, p, residual = fit_exponent(rows)
    return ScalingResult(tuple(rows), c, p, residual)


def write_scaling_csv(path, result: ScalingResult, config: ScalingConfig) -> None:
    """Delimited rows with a one-line JSON provenance header."""
    meta = {"config": config.to_json(), "fit": {
        "fit_c": result.fit_c, "fit_p": result.fit_p, "residual": result.residual,
    }}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(meta) + "\n")
        fh.write("eps,d_max,success_rate\n")
        for e, d, s in result.rows:
            fh.write(f"{e:.17g},{d:.17g},{s:.17g}\n")


# --------------------------------------------------------------- drift demo

_DRIFT_MARGIN_FACTOR = 2.2


def nonshadowing_demo(eps: float, d: float, m: int) -> dict:
    """Conclusive negative: flat-size upward pushes on the skew map.

    From (0.1, 0) every step spends its full budget pushing y upward,
    accumulating drift m*d.  Any true orbit's y-coordinate can grow only
    by the product of (1 + x^2) along its x-orbit, which is bounded by
    exp(4 x_start^2 / 3) since x halves every step — about 1.05 even
    letting the orbit start anywhere within the tolerance of (0.1, 0).
    Once the drift exceeds 2.2 * eps the tube escape is analytic, so the
    (depth-8) failed grid search is a verified negative, not exhaustion.
    """
    eps = float(eps)
    d = float(d)
    m = int(m)
    if not (eps > 0 and d > 0 and m >= 1):
        raise UsageError("need positive eps, d, and at least one step")
    drift = m * d
    threshold = _DRIFT_MARGIN_FACTOR * eps
    if drift <= threshold:
        raise UsageError(
            f"drift {drift:g} does not clear the conclusiveness margin "
            f"{threshold:g}; raise d or m"
        )

    spec = NonisolatedSkew()
    x0 = 0.1
    K = Neighborhood(max(0.75, drift * 1.5))
    traj = generate_adversarial(
        spec, (x0, 0.0), m, ErrorModel("uniform", d), K, PushDirection.PUSH_Y_UP
    )
    search = shadow_2d_search(spec, traj, eps, depth=8)
    if search.found:
        raise RuntimeError(
            "grid search produced a tracing point despite the analytic "
            "drift obstruction; this indicates a defect"
        )
    variation = math.exp(4.0 * (x0 + eps) ** 2 / 3.0)
    return {
        "eps": eps,
        "d": d,
        "m": m,
        "drift": drift,
        "threshold": threshold,
        "orbit_variation_factor": variation,
        "sharp_threshold": eps * (1.0 + variation),
        "conclusive": drift > threshold,
        "found": search.found,
        "search": search.to_json(),
    }
