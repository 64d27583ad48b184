import json
import subprocess
import sys

import pytest

from corrtensor import cli, prob, twoway


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, obj in [("pb", prob.perfectly_correlated_bits()), ("d", prob.dsbs(0.1)),
                      ("pr06", twoway.pr_box(0.6)), ("pr09", twoway.pr_box(0.9))]:
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(obj.to_json()))
        paths[name] = str(p)
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    paths["bad"] = str(bad)
    return paths


def run(capsys, *argv):
    code = cli.main(list(argv))
    return code, capsys.readouterr()


def test_compute_rho_perfect_bits(files, capsys):
    code, out = run(capsys, "compute", "rho", "--dist", files["pb"])
    assert code == 0
    assert out.out.strip() == "1.0"


def test_compute_json_and_g(files, capsys):
    code, out = run(capsys, "compute", "ghelper", "--dist", files["d"], "--lambdas", "2", "--json")
    assert code == 0
    assert json.loads(out.out)["value"] > 0
    code, out = run(capsys, "compute", "gz", "--channel", files["pr09"], "--lambdas", "0.6,0.6")
    assert code == 0 and float(out.out) > 1e-3


def test_exit_codes(files, capsys):
    assert run(capsys, "compute", "rho", "--dist", files["bad"])[0] == cli.EXIT_PARSE
    assert run(capsys, "compute", "rho", "--dist", "/nonexistent.json")[0] == cli.EXIT_FILE
    assert run(capsys, "compute", "bogus")[0] == cli.EXIT_USAGE
    assert run(capsys, "compute", "gfork", "--dist", files["d"], "--lambdas", "1,1")[0] == cli.EXIT_DOMAIN
    assert run(capsys, "region", "hc", "--dist", files["d"], "--resolution", "-1")[0] == cli.EXIT_USAGE


def test_thread_env_validated(files, capsys, monkeypatch):
    monkeypatch.setenv("CORRTENSOR_THREADS", "zero")
    assert run(capsys, "compute", "rho", "--dist", files["d"])[0] == cli.EXIT_USAGE
    monkeypatch.setenv("CORRTENSOR_THREADS", "4")
    assert run(capsys, "compute", "rho", "--dist", files["d"])[0] == 0


def test_check_tensorization_rho(files, capsys):
    code, out = run(capsys, "check", "tensorization", "--measure", "rho", "--dist", files["d"],
                    "--samples", "16")
    assert code == 0
    assert json.loads(out.out)["passed"] is True


def test_region_csv_deterministic(files, capsys):
    a = run(capsys, "region", "lambda", "--dist", files["d"], "--directions", "3")[1].out
    b = run(capsys, "region", "lambda", "--dist", files["d"], "--directions", "3", "--seed", "0")[1].out
    assert a == b
    lines = a.strip().splitlines()
    assert lines[0].startswith("d1,t")
    assert float(lines[1].split(",")[1]) == pytest.approx(1 / 0.64, abs=1e-12)


def test_prbox_output(capsys):
    code, out = run(capsys, "twoway", "prbox", "--eta", "0.5")
    assert code == 0
    ch = prob.channel_from_json(json.loads(out.out))
    assert ch.tensor[1, 1, 0, 1] == pytest.approx(0.375)


def test_entry_point_module(files):
    r = subprocess.run([sys.executable, "-m", "corrtensor", "compute", "rho", "--dist", files["pb"]],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "1.0"


def test_simcheck_pr_boxes(files, capsys):
    code, out = run(capsys, "twoway", "simcheck", "--from", files["pr06"], "--to", files["pr09"],
                    "--grid-resolution", "21")
    assert code == 0
    assert out.out.startswith("witness lambda: ")
