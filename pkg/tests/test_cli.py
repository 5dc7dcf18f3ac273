import json

import pytest

from cul.cli import EXIT_CONFIG, EXIT_CONSTRAINT, EXIT_NUMERIC, EXIT_OK, run_command
from cul.objective import QuadraticPair, quadratic_front_oracle
from cul.persistence import read_results


def run_in(tmp_path, monkeypatch, *argv):
    monkeypatch.chdir(tmp_path)
    return run_command(list(argv))


def test_sweep_writes_front(tmp_path, monkeypatch):
    code = run_in(tmp_path, monkeypatch, "sweep", "--problem", "quad", "--fractions", "0.25,0.5,0.75",
                  "--seed", "1", "--out", "front.csv")
    assert code == EXIT_OK
    rows = read_results(tmp_path / "front.csv")
    assert [r.phase for r in rows] == ["boundary-high", "sweep", "sweep", "sweep", "boundary-low"]
    pair = QuadraticPair([0, 0], [1, 0])
    for r in rows[1:4]:
        assert abs(r.f1 - r.epsilon) < 1e-3
        assert abs(r.f2 - quadratic_front_oracle(pair, r.f1)) < 1e-2


def test_rates_writes_table(tmp_path, monkeypatch):
    code = run_in(tmp_path, monkeypatch, "rates", "--problem", "quad", "--delta", "1,2,3,4", "--out", "rates.csv")
    assert code == EXIT_OK
    lines = (tmp_path / "rates.csv").read_text().splitlines()
    assert lines[0].startswith("delta,slope_grad_f1,target_grad_f1")
    assert len(lines) == 5


def test_missing_out_writes_nothing(tmp_path, monkeypatch):
    assert run_in(tmp_path, monkeypatch, "sweep", "--problem", "quad") == EXIT_CONFIG
    assert list(tmp_path.iterdir()) == []


@pytest.mark.parametrize(
    "argv",
    [
        ["sweep", "--set", "bogus.key=1", "--out", "x.csv"],
        ["sweep", "--mu", "abc", "--out", "x.csv"],
        ["sweep", "--phase2-delta", "2", "--out", "x.csv"],
        ["sweep", "--fractions", "0.5,0.25", "--out", "x.csv"],
        ["sweep", "--problem", "nope", "--out", "x.csv"],
        ["frobnicate"],
    ],
)
def test_config_errors(tmp_path, monkeypatch, argv, capsys):
    assert run_in(tmp_path, monkeypatch, *argv) == EXIT_CONFIG
    assert not (tmp_path / "x.csv").exists()


def test_error_message_names_key(tmp_path, monkeypatch, capsys):
    run_in(tmp_path, monkeypatch, "sweep", "--set", "bogus.key=1", "--out", "x.csv")
    assert "bogus.key" in capsys.readouterr().err


def test_unknown_key_in_config_file(tmp_path, monkeypatch):
    (tmp_path / "c.json").write_text(json.dumps({"step.muu": 0.1}))
    assert run_in(tmp_path, monkeypatch, "sweep", "--config", "c.json", "--out", "x.csv") == EXIT_CONFIG


def test_numeric_failure_exit_code(tmp_path, monkeypatch, capsys):
    # a huge step on the quadratic blows up within a few iterations
    code = run_in(tmp_path, monkeypatch, "solve-boundaries", "--mu", "10", "--out", "b.csv")
    assert code == EXIT_NUMERIC
    assert "iteration" in capsys.readouterr().err


def test_constraint_violation_exit_code(tmp_path, monkeypatch):
    # a weak Phase II pull started far outside the constraint cannot reach it in 60 steps
    (tmp_path / "c.json").write_text(json.dumps({"quad.theta0": [2.0, 0.0], "step.max_iters": 60}))
    code = run_in(tmp_path, monkeypatch, "sweep", "--config", "c.json", "--cold-start", "--beta", "0.01",
                  "--out", "f.csv")
    assert code == EXIT_CONSTRAINT
    assert not (tmp_path / "f.csv").exists()


def test_byte_identical_reruns(tmp_path, monkeypatch):
    for name in ("a", "b"):
        run_in(tmp_path, monkeypatch, "sweep", "--seed", "3", "--out", f"{name}.csv", "--trajectory", f"{name}.json")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_flags_override_config_file(tmp_path, monkeypatch, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"step.mu": 0.02, "seed": 4}))
    run_in(tmp_path, monkeypatch, "report", "--config", "c.json", "--mu", "0.03", "--show-config")
    shown = json.loads(capsys.readouterr().out)
    assert shown["step.mu"] == 0.03 and shown["seed"] == 4


def test_problem_defaults_apply(tmp_path, monkeypatch, capsys):
    run_in(tmp_path, monkeypatch, "report", "--problem", "unlearn-toy", "--show-config")
    shown = json.loads(capsys.readouterr().out)
    assert shown["step.mu"] == 1e-4 and shown["phase1.alpha"] == 5.0 and shown["step.epochs"] == 5


def test_show_config_round_trip(tmp_path, monkeypatch, capsys):
    run_in(tmp_path, monkeypatch, "report", "--seed", "2", "--fractions", "0.3,0.6", "--show-config")
    (tmp_path / "echo.json").write_text(capsys.readouterr().out)
    assert run_in(tmp_path, monkeypatch, "sweep", "--config", "echo.json", "--out", "a.csv") == EXIT_OK
    assert run_in(tmp_path, monkeypatch, "sweep", "--seed", "2", "--fractions", "0.3,0.6", "--out", "b.csv") == EXIT_OK
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_report_exports_columns(tmp_path, monkeypatch):
    run_in(tmp_path, monkeypatch, "sweep", "--out", "front.csv", "--trajectory", "traj.csv")
    assert run_in(tmp_path, monkeypatch, "report", "--input", "front.csv", "--out-dir", "plots") == EXIT_OK
    lines = (tmp_path / "plots" / "eps_f2.dat").read_text().splitlines()
    assert len(lines) == 3 and all(len(x.split()) == 2 for x in lines)
    assert run_in(tmp_path, monkeypatch, "report", "--input", "traj.csv", "--out-dir", "plots2") == EXIT_OK
    assert (tmp_path / "plots2" / "loglog_boundary-high.dat").exists()


def test_report_without_inputs_is_config_error(tmp_path, monkeypatch):
    assert run_in(tmp_path, monkeypatch, "report") == EXIT_CONFIG


def test_threads_env_keeps_results(tmp_path, monkeypatch):
    args = ["sweep", "--cold-start", "--theta0", "0.5,0.1", "--max-iters", "3000"]
    run_in(tmp_path, monkeypatch, *args, "--out", "serial.csv")
    monkeypatch.setenv("CUL_THREADS", "3")
    run_in(tmp_path, monkeypatch, *args, "--out", "threads.csv")
    assert (tmp_path / "serial.csv").read_bytes() == (tmp_path / "threads.csv").read_bytes()
    monkeypatch.setenv("CUL_THREADS", "zero")
    assert run_in(tmp_path, monkeypatch, *args, "--out", "bad.csv") == EXIT_CONFIG


@pytest.mark.slow
def test_toy_pretrain_and_baselines(tmp_path, monkeypatch):
    common = ["--problem", "unlearn-toy", "--pretrain-epochs", "100"]
    assert run_in(tmp_path, monkeypatch, "pretrain", *common, "--out", "orig.ckpt") == EXIT_OK
    code = run_in(tmp_path, monkeypatch, "baselines", *common, "--checkpoint", "orig.ckpt", "--epochs", "1",
                  "--out", "cmp.csv")
    assert code == EXIT_OK
    lines = (tmp_path / "cmp.csv").read_text().splitlines()
    assert lines[0] == "method,forget_err,retain_err,noise_prox,retain_degradation,forget_err_gain"
    assert [ln.split(",")[0] for ln in lines[1:]] == [
        "Original", "MaxLoss", "RetainLabel", "NoisyLabel", "CompositeLoss", "Ours (Phase I)"
    ]


def test_baselines_need_toy_problem(tmp_path, monkeypatch):
    assert run_in(tmp_path, monkeypatch, "baselines", "--problem", "quad", "--out", "c.csv") == EXIT_CONFIG
    assert not (tmp_path / "c.csv").exists()
