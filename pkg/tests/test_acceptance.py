"""Acceptance gate: ten end-to-end criteria, one printed verdict each.

Run with ``pytest tests/test_acceptance.py -s`` to see the verdict
lines as they complete (the suite takes a few minutes; the slowest
pieces are the two threshold-scaling campaigns).
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from shadowlab.conditions import (
    CheckParams,
    check_planar_displacement_bounds,
    check_slope_dominance,
    classify_monomial_perturbation,
    estimate_step_error_budget,
    expansion_gap_coefficient,
    find_failing_witness,
    odd_power_secant_slope,
    shrink_to_valid_box,
)
from shadowlab.lyapunov import BoxPair
from shadowlab.maps import (
    Expanding1D,
    Monomial,
    Neighborhood,
    NonisolatedSkew,
    PlanarSaddle,
    apply,
    apply_inverse,
    jacobian,
    map_dim,
)
from shadowlab.pseudo import ErrorModel, generate
from shadowlab.rng import derive
from shadowlab.scaling import ScalingConfig, nonshadowing_demo, run_scaling
from shadowlab.solver import (
    shadow_1d_constructive,
    shadow_2d_search,
    shadow_weighted,
    verify_shadowing,
)

SEED = 20260815


def _verdict(num: int, ok: bool, label: str, extra: str = "") -> None:
    tail = f"  [{extra}]" if extra else ""
    print(f"criterion {num:02d} {'PASS' if ok else 'FAIL'} - {label}{tail}",
          flush=True)
    assert ok, f"criterion {num:02d} failed: {label}"


def _trace_many_1d(spec, eps_values, trials, m, salt):
    """Count constructive-solver failures over seeded random trajectories."""
    K = Neighborhood(0.5)
    failures = 0
    for i, eps in enumerate(eps_values):
        model = ErrorModel("uniform", eps**3 / 5.0)
        for trial in range(trials):
            traj = generate(spec, 0.0, m, model, K,
                            seed=derive(salt, i, trial))
            res = shadow_1d_constructive(spec, traj, eps)
            if not res.found:
                failures += 1
                continue
            if not verify_shadowing(spec, traj, res.point, eps).found:
                failures += 1
    return failures


def test_criterion_01_cubic_guaranteed_level_always_traces():
    t0 = time.perf_counter()
    failures = _trace_many_1d(
        Expanding1D(1), (0.05, 0.1, 0.2), trials=1000, m=200, salt=SEED
    )
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed <= 60.0
    _verdict(1, ok, "cubic map, 3000 seeded runs at the guaranteed error "
                    "level, all traced and re-verified",
             f"failures={failures}, {elapsed:.1f}s <= 60s")


def test_criterion_02_quartic_perturbation_smallness_and_tracing():
    spec = Expanding1D(1, x_terms=(Monomial(1.0, 4),))
    box = shrink_to_valid_box(spec, 0.5, 0.25)
    box_ok = box.passed and box.details["A"] <= 0.5
    failures = _trace_many_1d(
        spec, (0.05, 0.1, 0.2), trials=1000, m=200, salt=SEED + 1
    )
    ok = box_ok and failures == 0
    _verdict(2, ok, "quartic perturbation: smallness box found by halving, "
                    "tracing suite repeats clean",
             f"A={box.details['A']}, a={box.details['a']}, "
             f"halvings={box.details['halvings']}, failures={failures}")


def test_criterion_03_cubic_threshold_scaling_exponent():
    t0 = time.perf_counter()
    config = ScalingConfig(
        spec=Expanding1D(1),
        eps_list=(0.025, 0.05, 0.1, 0.2),
        trials_per_d=10,
        m=(960, 240, 60, 15),
        K=Neighborhood(0.5),
        bisection_steps=20,
        seed=0,
    )
    result = run_scaling(config)
    elapsed = time.perf_counter() - t0
    floor_ok = all(d >= e**3 / 5.0 for e, d, _ in result.rows)
    ok = (2.5 <= result.fit_p <= 3.5 and floor_ok
          and result.residual <= 0.15 and elapsed <= 300.0)
    _verdict(3, ok, "cubic threshold scaling: cubic-law exponent, floor "
                    "respected at every tolerance",
             f"p={result.fit_p:.4f}, residual={result.residual:.4f}, "
             f"{elapsed:.1f}s <= 300s")


def test_criterion_04_saddle_checks_then_budgeted_tracing():
    spec = PlanarSaddle(1, 1)
    K = Neighborhood(0.1)
    params = CheckParams(delta=1e-3, Delta=2e-3)
    disp = check_planar_displacement_bounds(spec, K, params)
    slope = check_slope_dominance(spec, K, params)
    d, _ = estimate_step_error_budget(spec, BoxPair(), K, params)
    failures = 0
    model = ErrorModel("uniform", d)
    for trial in range(200):
        traj = generate(spec, (0.0, 0.0), 50, model, K,
                        seed=derive(SEED + 4, trial))
        res = shadow_2d_search(spec, traj, 0.05)
        if not (res.found and res.max_dist <= 0.05):
            failures += 1
    ok = disp.passed and slope.passed and d > 0 and failures == 0
    _verdict(4, ok, "planar saddle: displacement and slope checks pass, "
                    "200 runs at the estimated budget all traced",
             f"d={d:.3g}, failures={failures}")


def test_criterion_05_monomial_admissibility_table():
    # (m, monomial, expected verdict kind, expected reason)
    table = [
        (1, Monomial(1.0, 2, 1), "admissible_small_nbhd", None),
        (1, Monomial(-5.0, 1, 3), "admissible_small_nbhd", None),
        (2, Monomial(1.0, 2, 1), "inadmissible", "k+l >= 2m+1"),
        (1, Monomial(-2.0, 2, 1), "inadmissible", "a > 0"),
        (1, Monomial(1.0, 1, 1), "inadmissible", "k even"),
        (2, Monomial(1.0, 2, 2), "inadmissible", "l odd"),
        (1, Monomial(0.5, 0, 3), "admissible_if_small_coeff", None),
        (2, Monomial(1.0, 0, 6), "admissible_small_nbhd", None),
    ]
    mismatches = []
    for m, mono, kind, reason in table:
        verdict = classify_monomial_perturbation(m, mono)
        if verdict.kind.value != kind or verdict.reason != reason:
            mismatches.append((m, mono, verdict.to_json()))
            continue
        if kind == "inadmissible":
            w = find_failing_witness(m, mono)
            pattern_x = mono.x_deg * w["b"] / (2.0 * mono.y_deg) if w else None
            if (w is None or w["b"] > 0.1 or w["slack"] >= 0
                    or w["y"] != w["b"] or w["x"] != pattern_x):
                mismatches.append((m, mono, w))
    ok = not mismatches
    _verdict(5, ok, "monomial admissibility: 8-case table exact, every "
                    "inadmissible case carries a pattern witness",
             f"mismatches={mismatches if mismatches else 0}")


def test_criterion_06_quintic_saddle_scaling_exponent():
    config = ScalingConfig(
        spec=PlanarSaddle(1, 2),
        eps_list=(0.1, 0.141, 0.2, 0.283),
        trials_per_d=10,
        m=(1200, 304, 75, 19),
        K=Neighborhood(0.6),
        bisection_steps=20,
        seed=0,
    )
    result = run_scaling(config)
    ok = 4.3 <= result.fit_p <= 5.7
    _verdict(6, ok, "mixed-power saddle: threshold exponent matches the "
                    "larger expansion power",
             f"p={result.fit_p:.4f}, residual={result.residual:.4f}")


def test_criterion_07_skew_weighted_tracing_all_found():
    spec = NonisolatedSkew()
    K = Neighborhood(0.5)
    failures = 0
    for i, eps in enumerate((0.05, 0.1)):
        model = ErrorModel("weighted", 0.05 * eps)
        for trial in range(200):
            traj = generate(spec, (0.1, 0.05), 100, model, K,
                            seed=derive(SEED + 7, i, trial))
            res = shadow_weighted(spec, traj, eps)
            if not (res.found and res.max_dist <= eps):
                failures += 1
    _verdict(7, failures == 0, "skew map: 400 seeded runs under the "
                               "state-weighted error model all traced",
             f"failures={failures}")


def test_criterion_08_uniform_errors_drift_past_any_orbit():
    t0 = time.perf_counter()
    report = nonshadowing_demo(eps=0.1, d=0.01, m=50)
    elapsed = time.perf_counter() - t0
    ok = (report["found"] is False
          and report["conclusive"] is True
          and report["drift"] > report["threshold"]
          and report["drift"] == pytest.approx(0.5)
          and report["threshold"] == pytest.approx(0.22)
          and elapsed <= 10.0)
    _verdict(8, ok, "skew map: flat errors drift farther than any true "
                    "orbit allows; grid search agrees",
             f"drift={report['drift']:.3f} > {report['threshold']:.3f}, "
             f"{elapsed:.1f}s <= 10s")


def test_criterion_09_numerical_hygiene():
    rng = np.random.default_rng(SEED)
    problems = []

    # inverse roundtrips, 1e4 points per family
    families = [
        Expanding1D(1),
        Expanding1D(2),
        Expanding1D(1, x_terms=(Monomial(1.0, 4),)),
        PlanarSaddle(1, 1),
        PlanarSaddle(1, 2),
        NonisolatedSkew(),
    ]
    for spec in families:
        dim = map_dim(spec)
        pts = rng.uniform(-0.4, 0.4, size=(10_000, dim))
        pts = pts[:, 0] if dim == 1 else pts
        back = apply_inverse(spec, apply(spec, pts))
        err = float(np.max(np.abs(back - pts)))
        if err > 1e-10:
            problems.append(f"roundtrip {spec}: {err:.3g}")

    # analytic Jacobi matrices against central differences, 1e3 points
    h = 1e-6
    for spec in families:
        dim = map_dim(spec)
        pts = rng.uniform(-0.3, 0.3, size=(1_000, dim))
        J = jacobian(spec, pts[:, 0] if dim == 1 else pts)
        for axis in range(dim):
            e = np.zeros(dim)
            e[axis] = h
            up = apply(spec, (pts + e)[:, 0] if dim == 1 else pts + e)
            dn = apply(spec, (pts - e)[:, 0] if dim == 1 else pts - e)
            fd = (np.asarray(up) - np.asarray(dn)) / (2 * h)
            col = J[..., 0, axis] if dim == 1 else J[..., :, axis]
            denom = 1.0 + np.abs(col)
            err = float(np.max(np.abs(fd.reshape(col.shape) - col) / denom))
            if err > 1e-6:
                problems.append(f"jacobian {spec} axis {axis}: {err:.3g}")

    # gap coefficient inequality on 1e5 samples per power
    for n in (1, 2, 3):
        alpha = expansion_gap_coefficient(n)
        x = rng.uniform(-1.0, 1.0, size=100_000)
        v = rng.uniform(1e-12, 1.0, size=100_000)
        lhs = odd_power_secant_slope(x, v, n) - v ** (2 * n) / (1 + 4.0**n)
        rhs = alpha * (x ** (2 * n) + v ** (2 * n))
        worst = float(np.min(lhs - rhs))
        if worst < -1e-12:
            problems.append(f"gap inequality n={n}: {worst:.3g}")

    # unit-step secant slope minimum at 1/2^(2n)
    from scipy.optimize import minimize_scalar

    for n in (1, 2, 3):
        res = minimize_scalar(
            lambda x: odd_power_secant_slope(x, 1.0, n),
            bounds=(-2.0, 1.0), method="bounded",
            options={"xatol": 1e-12},
        )
        target = 0.25**n
        if abs(res.fun - target) > 1e-9:
            problems.append(f"secant minimum n={n}: {res.fun!r}")

    _verdict(9, not problems, "numerical hygiene: inverses, derivative "
                              "matrices, gap coefficient, secant minimum",
             f"problems={problems if problems else 0}")


def test_criterion_10_constructive_solver_matches_brute_force():
    from test_solver import brute_force_1d

    spec = Expanding1D(1)
    K = Neighborhood(0.5)
    rng = np.random.default_rng(SEED + 10)
    mismatches = 0
    for case in range(200):
        eps = float(rng.uniform(0.05, 0.3))
        d = float(eps ** rng.uniform(1.0, 3.0))
        m = int(rng.integers(2, 11))
        traj = generate(spec, 0.0, m, ErrorModel("uniform", d), K,
                        seed=derive(SEED + 10, case))
        res = shadow_1d_constructive(spec, traj, eps)
        brute_found, _, _ = brute_force_1d(spec, traj.points, eps,
                                           candidates=100_000)
        if res.found != brute_found:
            mismatches += 1
    _verdict(10, mismatches == 0, "constructive solver agrees with the "
                                  "brute-force scan on 200 random instances",
             f"mismatches={mismatches}")
