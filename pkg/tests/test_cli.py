import io
import json

import pytest

from App.command_router import CommandResult, CommandRouter
from App.error_handler import ErrorHandler
from App.init import AppCore


@pytest.fixture(autouse=True)
def _no_env_seed(monkeypatch):
    monkeypatch.delenv("TORUSLAB_SEED", raising=False)


def _run(argv, out_dir, router=None):
    stderr, stdout = io.StringIO(), io.StringIO()
    app = AppCore(router=router, error_handler=ErrorHandler(stream=stderr), stdout=stdout)
    code = app.cli([*argv, "--out-dir", str(out_dir)])
    return code, stdout.getvalue(), stderr.getvalue()


def _manifest(out_dir, command):
    path = out_dir / f"{command.replace('-', '_')}.manifest.json"
    return json.loads(path.read_text(encoding="utf-8"))


def test_equiv_check_passes(tmp_path):
    code, stdout, _ = _run(["equiv-check", "--n", "3"], tmp_path)
    assert code == 0
    assert json.loads(stdout)["discrepancy"] == "0"
    manifest = _manifest(tmp_path, "equiv-check")
    assert manifest["status"] == "ok" and manifest["exit_code"] == 0
    assert manifest["config"]["n"] == 3


def test_gamma_check_covers_every_pair(tmp_path):
    code, stdout, _ = _run(["gamma-check", "--n", "5"], tmp_path)
    assert code == 0
    assert json.loads(stdout)["cases"] == 100
    lines = (tmp_path / "gamma_check.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 101


def test_negative_steps_is_usage_error(tmp_path):
    code, _, stderr = _run(["simulate", "--n", "3", "--steps", "-1"], tmp_path)
    assert code == 2
    assert json.loads(stderr)["error"] == "Validation Error"


def test_unknown_config_key_is_usage_error(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"trialz": 10}), encoding="utf-8")
    code, _, stderr = _run(["simulate", "--config", str(config)], tmp_path / "out")
    assert code == 2
    assert "trialz" in stderr


def test_unknown_flag_exits_with_usage(tmp_path, capsys):
    code, _, _ = _run(["simulate", "--bogus", "1"], tmp_path)
    assert code == 2
    assert "usage" in capsys.readouterr().err


def test_failed_check_writes_failed_manifest(tmp_path):
    async def failing(config, runner, args):
        return CommandResult([], {"note": "x"}, passed=False, failure="не сошлось")

    router = CommandRouter()
    router.add_command("simulate", failing, "всегда проваливается")
    code, _, stderr = _run(["simulate", "--n", "3"], tmp_path, router=router)
    assert code == 1
    assert json.loads(stderr)["message"] == "не сошлось"
    assert _manifest(tmp_path, "simulate")["status"] == "failed"


def test_json_format_puts_rows_in_summary(tmp_path):
    code, _, _ = _run(["simulate", "--n", "3", "--trials", "5", "--steps", "10", "--format", "json"],
                      tmp_path)
    assert code == 0
    summary = json.loads((tmp_path / "simulate.summary.json").read_text(encoding="utf-8"))
    assert len(summary["rows"]) == 5
    assert all(row["sign"] == 1 for row in summary["rows"])
    assert not (tmp_path / "simulate.csv").exists()


def test_simulate_resolves_default_steps(tmp_path):
    code, stdout, _ = _run(["simulate", "--n", "3", "--trials", "3"], tmp_path)
    assert code == 0
    assert json.loads(stdout)["steps"] == 27
    assert _manifest(tmp_path, "simulate")["config"]["steps"] == 27


def test_simulate_output_independent_of_threads(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"batch_size": 10}), encoding="utf-8")
    outputs = []
    for threads in ("1", "2"):
        out_dir = tmp_path / f"threads{threads}"
        code, _, _ = _run(["simulate", "--n", "4", "--trials", "35", "--steps", "40", "--seed", "9",
                           "--threads", threads, "--config", str(config)], out_dir)
        assert code == 0
        outputs.append((out_dir / "simulate.csv").read_bytes())
    assert outputs[0] == outputs[1]


def _triple_config(tmp_path, **values):
    config = tmp_path / "triple.json"
    config.write_text(json.dumps(values), encoding="utf-8")
    return str(config)


def test_triple_prob_fails_when_interval_touches_zero(tmp_path):
    config = _triple_config(tmp_path, focus=[1, 2, 3], targets=[2, 3, 4])
    code, stdout, _ = _run(["triple-prob", "--n", "4", "--l", "2", "--steps", "0", "--trials", "50",
                            "--config", config], tmp_path / "out")
    assert code == 1
    summary = json.loads(stdout)
    assert summary["estimate"] == 0.0
    assert summary["ci_low"] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("n", [2, 4])
def test_triple_prob_passes_when_interval_excludes_zero(tmp_path, n):
    config = _triple_config(tmp_path, focus=[1, 2, 3], targets=[1, 2, 3])
    code, stdout, _ = _run(["triple-prob", "--n", str(n), "--l", "2", "--steps", "0", "--trials", "50",
                            "--config", config], tmp_path / "out")
    assert code == 0
    summary = json.loads(stdout)
    assert summary["ci_low"] > 0
    assert (summary["exact"] == 1.0) if n == 2 else summary["exact"] is None


def test_triple_prob_sweep_layout(tmp_path):
    config = _triple_config(tmp_path, sextuples=3, scaled_n=4)
    out_dir = tmp_path / "out"
    code, stdout, _ = _run(["triple-prob", "--n", "4", "--l", "2", "--trials", "200", "--seed", "3",
                            "--config", config], out_dir)
    assert code in (0, 1)
    summary = json.loads(stdout)
    assert summary["sextuples"] == 3
    assert summary["excluding_zero"] + len(summary["failed_sextuples"]) == 3
    assert summary["scaled_ratio"] >= 1.0
    lines = (out_dir / "triple_prob.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("kind,n,l,steps")
    kinds = [line.split(",")[0] for line in lines[1:]]
    assert kinds == ["sextuple"] * 3 + ["scaled"] * 2


def test_triple_prob_sweep_needs_room_for_next_l(tmp_path):
    config = _triple_config(tmp_path, scaled_n=3)
    code, _, stderr = _run(["triple-prob", "--n", "4", "--l", "3", "--trials", "10",
                            "--config", config], tmp_path / "out")
    assert code == 2
    assert "scaled_n" in stderr


@pytest.mark.parametrize("power, expected", [(2, 1), (3, 0)])
def test_mix_scaling_requires_cubic_slope(tmp_path, monkeypatch, power, expected):
    monkeypatch.setattr("App.exact_oracles.single_tile_mixing", lambda n: n ** power)
    config = _triple_config(tmp_path, sizes=[3, 5, 7])
    code, stdout, _ = _run(["mix-scaling", "--config", config], tmp_path / "out")
    assert code == expected
    summary = json.loads(stdout)
    assert summary["slope"] == pytest.approx(power)
    assert summary["slope_ok"] is (power == 3)
