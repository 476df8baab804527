"""Exit-code contract, artifact layout, and reproducibility of the CLI."""

from __future__ import annotations

import filecmp
import json

import numpy as np
import pytest

from shadowlab.cli import main
from shadowlab.pseudo import read_trajectory_csv

CUBIC = '{"variant":"expanding1d","n":1}'
SKEW = '{"variant":"nonisolated_skew"}'
SADDLE = '{"variant":"planar_saddle","n":1,"m":1}'


def run_json(capsys, argv):
    code = main(argv)
    return code, json.loads(capsys.readouterr().out)


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def test_check_condition_1_unperturbed_cubic_passes(capsys, tmp_path):
    spec_file = tmp_path / "cubic.json"
    spec_file.write_text(CUBIC)
    code, payload = run_json(capsys, [
        "check", "--condition", "1", "--spec", str(spec_file),
        "--A", "0.5", "--a", "0.25",
    ])
    assert code == 0
    assert payload["passed"] is True
    assert len(payload["reports"]) == 1


def test_check_condition_1_with_quartic_term_adds_smallness_report(capsys):
    spec = '{"variant":"expanding1d","n":1,"X":[{"a":1.0,"k":4}]}'
    code, payload = run_json(capsys, [
        "check", "--condition", "1", "--spec", spec,
        "--A", "0.001953125", "--a", "0.0009765625",
    ])
    assert code == 0
    names = [r["condition"] for r in payload["reports"]]
    assert names == ["monotone-expansion", "perturbation-smallness"]


def test_check_monomial_inadmissible_reason_and_exit_1(capsys):
    code, payload = run_json(capsys, [
        "check", "--condition", "monomial", "--m", "2", "--mono", "1,2,1",
    ])
    assert code == 1
    assert payload["verdict"]["reason"] == "k+l >= 2m+1"
    w = payload["failing_witness"]
    assert w["y"] == w["b"] and w["b"] <= 0.1


def test_check_monomial_admissible_exit_0(capsys):
    code, payload = run_json(capsys, [
        "check", "--condition", "monomial", "--m", "1", "--mono", "0.5,2,1",
    ])
    assert code == 0
    assert payload["failing_witness"] is None


@pytest.mark.parametrize("token,name", [
    ("2", "planar-displacement"),
    ("derivative", "slope-dominance"),
    ("W", "transition-battery"),
])
def test_check_planar_tokens_pass_on_small_saddle(capsys, token, name):
    code, payload = run_json(capsys, [
        "check", "--condition", token, "--spec", SADDLE,
        "--delta", "1e-3", "--Delta", "2e-3", "--K", "0.1",
    ])
    assert code == 0
    assert payload["condition"] == name
    assert payload["token"] == token


def test_check_missing_spec_is_usage_error():
    assert main(["check", "--condition", "1"]) == 2


def test_check_bad_inline_json_is_usage_error():
    assert main(["check", "--condition", "1", "--spec", "{broken"]) == 2


def test_check_writes_report_and_manifest(tmp_path):
    out = tmp_path / "c1"
    code = main([
        "check", "--condition", "1", "--spec", CUBIC, "--out", str(out),
    ])
    assert code == 0
    report = json.loads((tmp_path / "c1.report.json").read_text())
    assert report["passed"] is True
    manifest = json.loads((tmp_path / "c1.manifest.json").read_text())
    assert manifest["command"] == "check"
    assert str(tmp_path / "c1.report.json") in manifest["artifacts"]


# ---------------------------------------------------------------------------
# shadow: the three fixture behaviors
# ---------------------------------------------------------------------------

def test_shadow_cubic_small_uniform_errors_found(tmp_path):
    code = main([
        "shadow", "--spec", CUBIC, "--p0", "0.0", "--m", "100",
        "--model", "uniform:2e-4", "--eps", "0.1", "--seed", "7",
        "--out", str(tmp_path / "run"),
    ])
    assert code == 0
    payload = json.loads((tmp_path / "run.result.json").read_text())
    assert payload["solver"] == "constructive-1d"
    assert payload["result"]["found"] is True
    assert payload["result"]["max_dist"] <= 0.1
    assert (tmp_path / "run.traj.csv").exists()
    assert (tmp_path / "run.png").exists()


def test_shadow_skew_adversarial_drift_not_found(capsys):
    code, payload = run_json(capsys, [
        "shadow", "--spec", SKEW, "--p0", "0.1,0.0", "--m", "50",
        "--model", "uniform:0.01", "--eps", "0.1",
        "--adversarial", "y-up", "--K", "0.75",
    ])
    assert code == 1
    assert payload["solver"] == "cell-search-2d"
    assert payload["result"]["found"] is False


def test_shadow_skew_weighted_small_errors_found(capsys):
    code, payload = run_json(capsys, [
        "shadow", "--spec", SKEW, "--p0", "0.1,0.0", "--m", "100",
        "--model", "weighted:0.005", "--eps", "0.1", "--seed", "3",
    ])
    assert code == 0
    assert payload["solver"] == "weighted-skew"
    assert payload["result"]["max_dist"] <= 0.1


def test_shadow_seventeen_digit_precision_roundtrip(tmp_path):
    out = tmp_path / "p"
    main([
        "shadow", "--spec", CUBIC, "--p0", "0.0", "--m", "20",
        "--model", "uniform:1e-4", "--eps", "0.1", "--seed", "5",
        "--out", str(out), "--no-figures",
    ])
    traj, _ = read_trajectory_csv(tmp_path / "p.traj.csv")
    payload = json.loads((tmp_path / "p.result.json").read_text())
    # stored text reproduces the binary doubles exactly
    from shadowlab.maps import Expanding1D
    from shadowlab.solver import verify_shadowing

    res = verify_shadowing(Expanding1D(1), traj, payload["result"]["r"], 0.1)
    assert res.max_dist == payload["result"]["max_dist"]


def test_shadow_reads_generated_trajectory(tmp_path, capsys):
    gen_out = tmp_path / "g"
    assert main([
        "gen", "--spec", CUBIC, "--p0", "0.0", "--m", "50",
        "--model", "uniform:2e-4", "--seed", "21", "--out", str(gen_out),
        "--no-figures",
    ]) == 0
    code, payload = run_json(capsys, [
        "shadow", "--traj", str(tmp_path / "g.traj.csv"), "--eps", "0.1",
    ])
    assert code == 0
    assert payload["result"]["found"] is True


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def test_gen_stdout_matches_file_format(tmp_path, capsys):
    argv_tail = [
        "--spec", CUBIC, "--p0", "0.0", "--m", "5",
        "--model", "uniform:1e-4", "--seed", "11",
    ]
    assert main(["gen"] + argv_tail) == 0
    stdout_text = capsys.readouterr().out
    assert main(["gen"] + argv_tail + ["--out", str(tmp_path / "t"),
                                       "--no-figures"]) == 0
    file_text = (tmp_path / "t.traj.csv").read_text()
    assert stdout_text == file_text
    assert stdout_text.startswith("# {")
    assert stdout_text.splitlines()[1] == "k,x"


def test_gen_seed_env_default(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SHADOWLAB_SEED", "99")
    assert main(["gen", "--spec", CUBIC, "--p0", "0.0", "--m", "3",
                 "--model", "uniform:1e-4"]) == 0
    meta = json.loads(capsys.readouterr().out.splitlines()[0][2:])
    assert meta["seed"] == 99


def test_gen_bad_env_seed_is_usage_error(monkeypatch):
    monkeypatch.setenv("SHADOWLAB_SEED", "not-a-number")
    assert main(["gen", "--spec", CUBIC, "--p0", "0.0", "--m", "3",
                 "--model", "uniform:1e-4"]) == 2


def test_gen_adversarial_directions(capsys):
    assert main(["gen", "--spec", SKEW, "--p0", "0.1,0.0", "--m", "10",
                 "--model", "uniform:0.01", "--adversarial", "y-down",
                 "--K", "0.75"]) == 0
    rows = capsys.readouterr().out.splitlines()[2:]
    ys = np.array([float(r.split(",")[2]) for r in rows])
    assert np.all(np.diff(ys) < 0)


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------

def small_config(tmp_path):
    cfg = {
        "spec": {"variant": "expanding1d", "n": 1},
        "eps_list": [0.05, 0.1, 0.2],
        "trials_per_d": 10,
        "m": [240, 60, 15],
        "K": {"half_width": 0.5},
        "bisection_steps": 6,
        "seed": 0,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_scaling_campaign_artifacts_and_fit_band(tmp_path):
    code = main(["scaling", "--config", str(small_config(tmp_path)),
                 "--out", str(tmp_path / "sc")])
    assert code == 0
    summary = json.loads((tmp_path / "sc.summary.json").read_text())
    assert 2.5 <= summary["fit"]["p"] <= 3.5
    assert len(summary["rows"]) == 3
    assert (tmp_path / "sc.csv").exists()
    assert (tmp_path / "sc.png").exists()
    manifest = json.loads((tmp_path / "sc.manifest.json").read_text())
    assert manifest["seed"] == 0
    assert len(manifest["artifacts"]) == 3


def test_scaling_empty_eps_list_is_config_error():
    cfg = '{"spec":{"variant":"expanding1d","n":1},"eps_list":[]}'
    assert main(["scaling", "--config", cfg]) == 2


def test_scaling_unknown_key_is_config_error():
    cfg = '{"spec":{"variant":"expanding1d","n":1},"bogus":1}'
    assert main(["scaling", "--config", cfg]) == 2


def test_scaling_demo_conclusive(capsys):
    code, report = run_json(capsys, ["scaling", "--demo", "0.1", "0.01",
                                     "--m", "50"])
    assert code == 0
    assert report["conclusive"] is True
    assert report["found"] is False


def test_scaling_demo_insufficient_drift_is_usage_error():
    assert main(["scaling", "--demo", "0.1", "0.001", "--m", "10"]) == 2


# ---------------------------------------------------------------------------
# reproducibility and parser plumbing
# ---------------------------------------------------------------------------

def test_rerun_reproduces_artifacts_bit_identically(tmp_path):
    argv_tail = [
        "--spec", SKEW, "--p0", "0.1,0.0", "--m", "40",
        "--model", "weighted:0.005", "--eps", "0.1", "--seed", "3",
    ]
    for sub in ("a", "b"):
        d = tmp_path / sub
        d.mkdir()
        assert main(["shadow"] + argv_tail + ["--out", str(d / "run")]) == 0
    for name in ("run.traj.csv", "run.result.json", "run.png"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name,
                           shallow=False), name


def test_manifest_carries_version_and_resolved_config(tmp_path):
    out = tmp_path / "m"
    main(["shadow", "--spec", CUBIC, "--p0", "0.0", "--m", "10",
          "--model", "exact", "--eps", "0.05", "--out", str(out),
          "--no-figures"])
    manifest = json.loads((tmp_path / "m.manifest.json").read_text())
    import shadowlab

    assert manifest["version"] == shadowlab.__version__
    assert manifest["config"]["eps"] == 0.05
    assert manifest["config"]["model"] == "exact"
    assert manifest["wall_time_s"] >= 0


def test_threads_flag_accepted_and_output_unchanged(capsys):
    base = ["shadow", "--spec", CUBIC, "--p0", "0.0", "--m", "20",
            "--model", "uniform:1e-4", "--eps", "0.1", "--seed", "4"]
    code1, payload1 = run_json(capsys, base)
    code2, payload2 = run_json(capsys, ["--threads", "8"] + base)
    assert (code1, payload1["result"]) == (code2, payload2["result"])


def test_missing_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_unknown_model_token_is_usage_error():
    assert main(["shadow", "--spec", CUBIC, "--p0", "0.0", "--m", "5",
                 "--model", "gaussian:0.1", "--eps", "0.1"]) == 2


def test_p0_dimension_mismatch_is_usage_error():
    assert main(["shadow", "--spec", CUBIC, "--p0", "0.1,0.2", "--m", "5",
                 "--model", "exact", "--eps", "0.1"]) == 2
