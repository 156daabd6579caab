import json
import os
import subprocess
import sys

import pytest

from radius_lab import cli, manifold

CAT = '[system]\nkind = "Linear"\n'
SHEAR = '[system]\nkind = "ShearPerturbed"\neps = 0.05\n'


@pytest.fixture
def configs(tmp_path):
    (tmp_path / "cat.toml").write_text(CAT)
    (tmp_path / "shear.toml").write_text(SHEAR)
    return tmp_path


def run_cli(args, capsys):
    status = cli.main([str(a) for a in args])
    out, err = capsys.readouterr()
    return status, out, err


@pytest.mark.parametrize("command", sorted(cli.COMMANDS))
def test_help_lists_defaults_and_units(command, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main([command, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for prm in cli.COMMANDS[command][1]:
        assert f"--{prm.name}" in text
    assert text.count("(default:") >= len(cli.COMMANDS[command][1])


def test_every_param_help_names_a_unit_or_choice():
    for _, params in cli.COMMANDS.values():
        for prm in params:
            assert "(" in prm.help or ":" in prm.help or "|" in prm.help or prm.flag, prm.name


def test_lyapunov_json(configs, capsys):
    status, out, _ = run_cli(["lyapunov", "--config", configs / "cat.toml", "--n", 2000, "--samples", 2], capsys)
    assert status == 0
    doc = json.loads(out)
    assert {"mean", "stddev", "tail_oscillation"} <= set(doc)
    assert doc["header"]["config"]["run"]["n"] == 2000
    assert doc["header"]["config"]["system"]["kind"] == "Linear"
    assert abs(doc["mean"] - 0.9624236501192069) < 1e-9


def test_radii_csv_header_and_columns(configs, capsys):
    status, out, _ = run_cli(["radii", "--config", configs / "shear.toml", "--r0", "1e-4", "--n", 50,
                              "--mode", "ball"], capsys)
    assert status == 0
    lines = out.splitlines()
    head = [l for l in lines if l.startswith("#")]
    assert head[0].startswith("# radius-lab ")
    assert '# run.r0 = 0.0001' in head and '# system.eps = 0.05' in head
    body = [l for l in lines if not l.startswith("#")]
    assert body[0] == "k,r_k,m_k,log_r_k" and len(body) == 52


def test_seventeen_digits(configs, capsys):
    _, out, _ = run_cli(["radii", "--config", configs / "cat.toml", "--r0", 0.1, "--n", 1,
                         "--x", 0.1, "--y", 0.2], capsys)
    row = out.splitlines()[-2].split(",")  # k = 0; the k = N row has no m_k
    m = float(row[2])
    assert "%.17g" % m == row[2]
    assert abs(m - (3 + 5 ** 0.5) / 2) < 1e-14


def test_out_file_and_layering(configs, capsys):
    cfg = configs / "layered.toml"
    cfg.write_text(SHEAR + "[run]\nseed = 5\n[grow]\ngenerations = 2\nh = 2e-5\n")
    out = configs / "seg.csv"
    status, stdout, _ = run_cli(["grow", "--config", cfg, "--h", "1e-5", "--out", out], capsys)
    assert status == 0 and stdout == ""
    text = out.read_text()
    assert "# run.seed = 5" in text and "# run.generations = 2" in text and "# run.h = 1e-05" in text


def testparse_system(capsys):
    status, out, _ = run_cli(["domination", "--system", "shear:0.05", "--gamma", 0.1, "--grid", 32], capsys)
    assert status == 0 and json.loads(out)["holds"] is True


@pytest.mark.parametrize("args", [
    ["kac"],
    ["kac", "--system", "cat", "--region", "ball:0.5,0.5,0.9"],
    ["kac", "--system", "da:0.7"],
    ["radii", "--system", "cat", "--mode", "sideways"],
    ["radii", "--system", "cat", "--seed", -1],
    ["radii", "--system", "cat", "--seed", 2 ** 64],
    ["radii", "--system", "cat", "--n", "many"],
    ["grow", "--system", "shear:-1"],
])
def test_config_errors_exit_1(args, capsys):
    status, out, err = run_cli(args, capsys)
    assert status == 1 and out == "" and err


def test_unknown_key_in_command_table(configs, capsys):
    cfg = configs / "bad.toml"
    cfg.write_text(CAT + "[radii]\nbogus = 1\n")
    status, _, err = run_cli(["radii", "--config", cfg], capsys)
    assert status == 1 and "bogus" in err


def test_nonconvergence_exit_2(capsys):
    status, _, err = run_cli(["measurable-radius", "--system", "cat", "--region", "ball:0.5,0.5,1e-7",
                              "--certify", "false", "--orbit-cap", 10, "--samples", 3], capsys)
    assert status == 2 and "non-convergence" in err


def test_violation_exit_3(capsys, monkeypatch):
    monkeypatch.setattr(manifold, "SLACK", -10.0)
    status, out, err = run_cli(["lemaures", "--system", "shear:0.05", "--samples", 3], capsys)
    assert status == 3 and "violation" in err
    assert out.splitlines()[-1].endswith("false")


def test_lemaures_clean_run(capsys):
    status, out, _ = run_cli(["lemaures", "--system", "shear:0.05", "--samples", 5], capsys)
    assert status == 0
    assert all(l.endswith("true") for l in out.splitlines()[-5:])


@pytest.mark.parametrize("args", [
    ["kac", "--region", "ball:0.5,0.5,0.1", "--samples", 2000],
    ["lyapunov", "--n", 1000, "--samples", 6],
    ["measurable-radius", "--samples", 50, "--r0", 0.01, "--certify", "false"],
])
def test_byte_identical_across_threads(configs, args, tmp_path):
    outputs = []
    for threads in ("1", "4"):
        env = dict(os.environ, RADIUS_LAB_THREADS=threads)
        path = tmp_path / f"out{threads}"
        subprocess.run([sys.executable, "-m", "radius_lab.cli", *map(str, args),
                        "--config", str(configs / "shear.toml"), "--seed", "11", "--out", str(path)],
                       check=True, env=env)
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]
