"""Command-line front end.

Four subcommands: ``check`` runs one analytic condition check and
reports pass/fail, ``shadow`` generates (or loads) a pseudotrajectory
and runs the matching solver, ``scaling`` runs a threshold-measurement
campaign from a JSON config, and ``gen`` emits a pseudotrajectory CSV
for later consumption.

Conventions shared by all subcommands:

* exit code 0 = affirmative, 1 = legitimate negative (check failed,
  not shadowed, budget search exhausted), 2 = usage/config error;
* ``--out PREFIX`` writes the artifacts as PREFIX.* and a run manifest
  PREFIX.manifest.json next to them; without ``--out`` the result JSON
  goes to stdout and nothing is written;
* commands that write delimited output also render a PNG figure next
  to it (suppress with ``--no-figures``);
* the default seed comes from $SHADOWLAB_SEED when set, else 0;
* outputs are deterministic given the manifest: re-running the
  recorded command reproduces every artifact byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import (
    CheckParams,
    check_monotone_expansion_1d,
    check_perturbation_smallness_1d,
    check_planar_displacement_bounds,
    check_slope_dominance,
    check_transition_battery,
    classify_monomial_perturbation,
    find_failing_witness,
)
from .errors import ConvergenceError, DomainError, UsageError
from .lyapunov import pair_from_name
from .maps import (
    Expanding1D,
    Monomial,
    Neighborhood,
    NonisolatedSkew,
    apply,
    map_dim,
    spec_from_json,
)
from .pseudo import (
    ErrorModel,
    PushDirection,
    format_trajectory_csv,
    generate,
    generate_adversarial,
    read_trajectory_csv,
    write_trajectory_csv,
)
from .scaling import config_from_json, nonshadowing_demo, run_scaling, write_scaling_csv
from .solver import shadow_1d_constructive, shadow_2d_search, shadow_weighted

__all__ = ["main"]

_PUSH_TOKENS = {
    "y-up": PushDirection.PUSH_Y_UP,
    "y-down": PushDirection.PUSH_Y_DOWN,
    "x-out": PushDirection.PUSH_X_OUT,
}


# ---------------------------------------------------------------------------
# small argument parsers
# ---------------------------------------------------------------------------

def _load_json_arg(text: str, what: str) -> dict:
    """Accept either inline JSON (starts with '{') or a file path."""
    try:
        if text.lstrip().startswith("{"):
            return json.loads(text)
        return json.loads(Path(text).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"{what} file not found: {text}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} is not valid JSON: {exc}")


def _parse_point(text: str):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"point must be comma-separated numbers, got {text!r}")
    if len(vals) == 1:
        return vals[0]
    if len(vals) == 2:
        return (vals[0], vals[1])
    raise UsageError("point must have one or two coordinates")


def _parse_model(text: str) -> ErrorModel:
    if text == "exact":
        return ErrorModel("exact")
    kind, sep, level = text.partition(":")
    if sep != ":" or kind not in ("uniform", "weighted"):
        raise UsageError(
            f"model must be exact, uniform:d, or weighted:d, got {text!r}"
        )
    try:
        return ErrorModel(kind, float(level))
    except ValueError:
        raise UsageError(f"model level must be a number, got {level!r}")


def _parse_mono(text: str) -> Monomial:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"--mono takes coeff,x_deg,y_deg, got {text!r}")
    try:
        return Monomial(float(parts[0]), int(parts[1]), int(parts[2]))
    except ValueError:
        raise UsageError(f"--mono takes coeff,x_deg,y_deg, got {text!r}")


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("SHADOWLAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"SHADOWLAB_SEED must be an integer, got {env!r}")
    return 0


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default)


def _emit(payload: dict, path) -> None:
    """Write JSON to a file, or to stdout when no prefix was given."""
    text = _dump_json(payload)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def _write_manifest(prefix: str, command: str, config: dict, seed,
                    started: float, artifacts: list) -> str:
    path = f"{prefix}.manifest.json"
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "wall_time_s": time.perf_counter() - started,
        "artifacts": sorted(str(a) for a in artifacts),
    }
    Path(path).write_text(_dump_json(manifest) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def _check_params(args) -> CheckParams:
    delta = args.delta
    Delta = args.Delta if args.Delta is not None else 2.0 * delta
    return CheckParams(delta=delta, Delta=Delta)


def cmd_check(args) -> int:
    started = time.perf_counter()
    token = args.condition

    if token == "monomial":
        if args.m is None or args.mono is None:
            raise UsageError("--condition monomial needs --m and --mono")
        mono = _parse_mono(args.mono)
        verdict = classify_monomial_perturbation(args.m, mono)
        witness = None
        if verdict.kind.value == "inadmissible":
            witness = find_failing_witness(args.m, mono)
        payload = {
            "token": token,
            "condition": "monomial",
            "m": args.m,
            "mono": {"coeff": mono.coeff, "x_deg": mono.x_deg,
                     "y_deg": mono.y_deg},
            "verdict": verdict.to_json(),
            "failing_witness": witness,
            "passed": verdict.kind.value != "inadmissible",
        }
        code = 0 if payload["passed"] else 1
    else:
        if args.spec is None:
            raise UsageError(f"--condition {token} needs --spec")
        spec = spec_from_json(_load_json_arg(args.spec, "--spec"))
        if token == "1":
            if not isinstance(spec, Expanding1D):
                raise UsageError("--condition 1 needs a one-dimensional spec")
            reports = [check_monotone_expansion_1d(spec, args.A, args.a)]
            if spec.x_terms:
                reports.append(
                    check_perturbation_smallness_1d(spec, args.A, args.a)
                )
            payload = {
                "token": token,
                "condition": "1d-expansion",
                "passed": all(r.passed for r in reports),
                "reports": [r.to_json() for r in reports],
            }
            code = 0 if payload["passed"] else 1
        else:
            params = _check_params(args)
            K = Neighborhood(args.K)
            if token == "2":
                report = check_planar_displacement_bounds(spec, K, params)
            elif token == "derivative":
                report = check_slope_dominance(spec, K, params)
            elif token == "W":
                pair = pair_from_name(args.pair)
                p = _parse_point(args.p) if args.p is not None else (0.05, 0.05)
                if not isinstance(p, tuple):
                    raise UsageError("--p must be a planar point")
                q = _parse_point(args.q) if args.q is not None else \
                    tuple(float(v) for v in apply(spec, p))
                report = check_transition_battery(spec, pair, p, q, params)
            else:  # pragma: no cover - argparse choices guard this
                raise UsageError(f"unknown condition token {token!r}")
            payload = {"token": token} | report.to_json()
            code = 0 if report.passed else 1

    artifacts = []
    out_json = None
    if args.out:
        out_json = f"{args.out}.report.json"
        artifacts.append(out_json)
    _emit(payload, out_json)
    if args.out:
        _write_manifest(args.out, "check", _resolved_config(args), None,
                        started, artifacts)
    return code


# ---------------------------------------------------------------------------
# gen / shadow
# ---------------------------------------------------------------------------

def _build_trajectory(args, seed):
    spec = spec_from_json(_load_json_arg(args.spec, "--spec"))
    model = _parse_model(args.model)
    p0 = _parse_point(args.p0)
    if map_dim(spec) != (2 if isinstance(p0, tuple) else 1):
        raise UsageError("--p0 dimension does not match the map spec")
    K = Neighborhood(args.K)
    if args.adversarial is not None:
        direction = _PUSH_TOKENS[args.adversarial]
        traj = generate_adversarial(spec, p0, args.m, model, K, direction)
    else:
        traj = generate(spec, p0, args.m, model, K, seed=seed)
    return spec, traj


def cmd_gen(args) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args)
    spec, traj = _build_trajectory(args, seed)
    if args.out:
        csv_path = f"{args.out}.traj.csv"
        write_trajectory_csv(csv_path, traj, spec)
        artifacts = [csv_path]
        if args.figures:
            from .report import trajectory_figure

            artifacts.append(
                trajectory_figure(traj, spec, f"{args.out}.png")
            )
        _write_manifest(args.out, "gen", _resolved_config(args), seed,
                        started, artifacts)
    else:
        sys.stdout.write(format_trajectory_csv(traj, spec))
    return 0


def _run_solver(args, spec, traj, eps):
    if map_dim(spec) == 1:
        return "constructive-1d", shadow_1d_constructive(spec, traj, eps)
    if isinstance(spec, NonisolatedSkew) and traj.model.kind == "weighted":
        return "weighted-skew", shadow_weighted(spec, traj, eps)
    pair = pair_from_name(args.pair)
    return "cell-search-2d", shadow_2d_search(
        spec, traj, eps, pair=pair, depth=args.depth,
        cells_per_side=args.cells,
    )


def cmd_shadow(args) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args)
    if args.traj is not None:
        traj, spec = read_trajectory_csv(args.traj)
    else:
        if args.spec is None:
            raise UsageError("shadow needs --spec (or --traj)")
        spec, traj = _build_trajectory(args, seed)
    solver_name, result = _run_solver(args, spec, traj, args.eps)

    payload = {
        "solver": solver_name,
        "eps": args.eps,
        "truncated": traj.truncated,
        "result": result.to_json(),
    }
    artifacts = []
    out_json = None
    if args.out:
        csv_path = f"{args.out}.traj.csv"
        write_trajectory_csv(csv_path, traj, spec)
        out_json = f"{args.out}.result.json"
        artifacts += [csv_path, out_json]
    _emit(payload, out_json)
    if args.out:
        if args.figures:
            from .report import trajectory_figure

            artifacts.append(trajectory_figure(
                traj, spec, f"{args.out}.png", eps=args.eps,
                shadow_point=result.point if result.found else None,
            ))
        _write_manifest(args.out, "shadow", _resolved_config(args), seed,
                        started, artifacts)
    return 0 if result.found else 1


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------

def cmd_scaling(args) -> int:
    started = time.perf_counter()
    if args.demo is not None:
        eps, d = args.demo
        report = nonshadowing_demo(eps, d, args.m)
        artifacts = []
        out_json = None
        if args.out:
            out_json = f"{args.out}.demo.json"
            artifacts.append(out_json)
        _emit(report, out_json)
        if args.out:
            _write_manifest(args.out, "scaling", _resolved_config(args),
                            None, started, artifacts)
        return 0 if report["conclusive"] else 1

    if args.config is None:
        raise UsageError("scaling needs --config (or --demo)")
    config = config_from_json(_load_json_arg(args.config, "--config"))
    result = run_scaling(config)
    summary = {"config": config.to_json(), "fit": {
        "c": result.fit_c, "p": result.fit_p, "residual": result.residual,
    }, "rows": result.to_json()["rows"]}

    artifacts = []
    out_json = None
    if args.out:
        csv_path = f"{args.out}.csv"
        write_scaling_csv(csv_path, result, config)
        out_json = f"{args.out}.summary.json"
        artifacts += [csv_path, out_json]
    _emit(summary, out_json)
    if args.out:
        if args.figures:
            from .report import scaling_figure

            artifacts.append(scaling_figure(result, config, f"{args.out}.png"))
        _write_manifest(args.out, "scaling", _resolved_config(args),
                        config.seed, started, artifacts)
    return 0


# ---------------------------------------------------------------------------
# parser plumbing
# ---------------------------------------------------------------------------

def _resolved_config(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _add_common_gen_flags(sub):
    sub.add_argument("--spec", help="map spec: JSON file path or inline JSON")
    sub.add_argument("--p0", default="0.0",
                     help="start point, e.g. 0.05 or 0.1,0.0")
    sub.add_argument("--m", type=int, default=100,
                     help="number of steps (points = m + 1)")
    sub.add_argument("--model", default="exact",
                     help="error model: exact | uniform:d | weighted:d")
    sub.add_argument("--K", type=float, default=0.5,
                     help="half-width of the working neighborhood")
    sub.add_argument("--seed", type=int, default=None,
                     help="RNG seed (default: $SHADOWLAB_SEED or 0)")
    sub.add_argument("--adversarial", choices=sorted(_PUSH_TOKENS),
                     default=None,
                     help="spend the full budget pushing one coordinate")


def _add_output_flags(sub):
    sub.add_argument("--out", default=None,
                     help="output prefix; omit to print JSON to stdout")
    sub.add_argument("--no-figures", dest="figures", action="store_false",
                     help="skip PNG rendering next to delimited outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shadowlab",
        description="finite-shadowing laboratory: condition checks, "
                    "tracing solvers, threshold scaling",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None,
                        help="reserved; computation is vectorized in-process "
                             "and output never depends on this value")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_check = sub.add_parser(
        "check", help="run one analytic condition check")
    p_check.add_argument("--condition", required=True,
                         choices=["1", "2", "W", "derivative", "monomial"],
                         help="1: 1D expansion; 2: planar displacement "
                              "bounds; W: region-transition battery; "
                              "derivative: slope dominance; monomial: "
                              "perturbation admissibility")
    p_check.add_argument("--spec", help="map spec: JSON file path or inline")
    p_check.add_argument("--A", type=float, default=0.5,
                         help="1D box half-width (condition 1)")
    p_check.add_argument("--a", type=float, default=0.25,
                         help="1D max step size (condition 1)")
    p_check.add_argument("--delta", type=float, default=1e-3,
                         help="inner gauge level (planar checks)")
    p_check.add_argument("--Delta", type=float, default=None,
                         help="outer gauge level (default: 2*delta)")
    p_check.add_argument("--K", type=float, default=0.1,
                         help="neighborhood half-width (planar checks)")
    p_check.add_argument("--pair", default="box", choices=["box", "weighted"],
                         help="gauge pair for the transition battery")
    p_check.add_argument("--p", default=None,
                         help="battery source center, e.g. 0.05,0.05")
    p_check.add_argument("--q", default=None,
                         help="battery target center (default: image of --p)")
    p_check.add_argument("--m", type=int, default=None,
                         help="expansion power index (monomial check)")
    p_check.add_argument("--mono", default=None,
                         help="monomial as coeff,x_deg,y_deg (e.g. 1,2,1)")
    _add_output_flags(p_check)
    p_check.set_defaults(func=cmd_check)

    p_shadow = sub.add_parser(
        "shadow", help="generate or load a pseudotrajectory and trace it")
    _add_common_gen_flags(p_shadow)
    p_shadow.add_argument("--eps", type=float, required=True,
                          help="tracing tolerance")
    p_shadow.add_argument("--traj", default=None,
                          help="read this trajectory CSV instead of "
                               "generating one")
    p_shadow.add_argument("--pair", default="box",
                          choices=["box", "weighted"],
                          help="gauge pair for the planar cell search")
    p_shadow.add_argument("--depth", type=int, default=6,
                          help="refinement depth of the planar cell search")
    p_shadow.add_argument("--cells", type=int, default=32,
                          help="cells per side per refinement level")
    _add_output_flags(p_shadow)
    p_shadow.set_defaults(func=cmd_shadow)

    p_scaling = sub.add_parser(
        "scaling", help="threshold campaign from a JSON config, or the "
                        "drift counterexample demo")
    p_scaling.add_argument("--config", default=None,
                           help="campaign config: JSON file path or inline")
    p_scaling.add_argument("--demo", type=float, nargs=2, default=None,
                           metavar=("EPS", "D"),
                           help="run the uniform-error drift demo instead")
    p_scaling.add_argument("--m", type=int, default=50,
                           help="steps for --demo")
    _add_output_flags(p_scaling)
    p_scaling.set_defaults(func=cmd_scaling)

    p_gen = sub.add_parser(
        "gen", help="emit a pseudotrajectory CSV")
    _add_common_gen_flags(p_gen)
    _add_output_flags(p_gen)
    p_gen.set_defaults(func=cmd_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"negative: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
