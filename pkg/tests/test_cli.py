import json
import subprocess
import sys

import pytest

from kglab import __version__, cli
from kglab.covariance import cov_critical


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("KGLAB_OUT", str(tmp_path))
    return tmp_path


def run(argv, capsys):
    code = cli.main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_cov_wave_value(out, capsys):
    code, stdout, _ = run(["cov", "--a", "0", "--m", "0", "--p", "1,0", "--q", "1,0"], capsys)
    assert code == 0 and stdout.strip() == "0.25"


def test_negative_T_is_config_error(out, capsys):
    code, _, err = run(["cov", "--T", "-1"], capsys)
    assert code == 2 and "'T'" in err


@pytest.mark.parametrize("argv,key", [
    (["cov", "--bogus", "1"], "bogus"),
    (["cov", "--a", "x"], "a"),
    (["sample", "--method", "fft"], "method"),
    (["lil", "--n_min", "3"], "n_min"),
    (["scan", "--m", "0.3"], "m"),
    (["propagate", "--w_values", "1.0"], "w_values"),
    (["mc", "--replicas", "0"], "replicas"),
])
def test_config_errors_name_the_key(out, capsys, argv, key):
    code, _, err = run(argv, capsys)
    assert code == 2 and f"'{key}'" in err


def test_config_file_and_override(out, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# wave case\na = 0   # damping\nm = 0\n\np = 1,0\nq = 1,0.5\n")
    code, stdout, _ = run(["cov", "--config", str(cfg)], capsys)
    assert code == 0 and float(stdout) == pytest.approx(cov_critical((1, 0), (1, 0.5), 0.0), rel=1e-14)
    code, stdout, _ = run(["cov", "--config", str(cfg), "--q", "1,0"], capsys)
    assert float(stdout) == pytest.approx(0.25)


def test_bad_config_line(out, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("a 2\n")
    code, _, err = run(["cov", "--config", str(cfg)], capsys)
    assert code == 2 and "line 1" in err


def test_validate_passes(out, capsys):
    code, stdout, _ = run(["validate", "--workers", "1"], capsys)
    assert code == 0
    from kglab.validation import CHECKS
    for name, _ in CHECKS:
        assert name in stdout
    summary = json.loads((out / "validate_summary.json").read_text())
    assert all(c["passed"] for c in summary["results"]["checks"])


def test_validate_failure_exit_code(out, capsys, monkeypatch):
    from kglab import validation
    monkeypatch.setattr(validation, "CHECKS", validation.CHECKS + [("broken", lambda: (False, "forced"))])
    code, stdout, _ = run(["validate"], capsys)
    assert code == 4 and "FAIL  broken" in stdout


def test_numerical_failure_exit_code(out, capsys):
    code, _, err = run(["picard", "--max_iter", "1", "--step", "0.0625"], capsys)
    assert code == 3 and "converge" in err


def test_factorization_failure_exit_code(out, capsys, monkeypatch):
    from kglab import sampler

    def boom(C):
        raise sampler.FactorizationError(-1.0, 0.0)

    monkeypatch.setattr(sampler, "jittered_cholesky", boom)
    code, _, err = run(["sample", "--replicas", "2"], capsys)
    assert code == 3 and "smallest eigenvalue" in err


def test_artifacts_are_reproducible(tmp_path, monkeypatch, capsys):
    runs = []
    for k, workers in enumerate(("1", "2")):
        d = tmp_path / f"run{k}"
        monkeypatch.setenv("KGLAB_OUT", str(d))
        for argv in (["sample", "--replicas", "6"], ["lil", "--replicas", "8", "--n_max", "10"],
                     ["mc", "--replicas", "4", "--n_max", "13"], ["scan", "--replicas", "2", "--null_runs", "10",
                                                                 "--n_star", "10"]):
            assert cli.main(argv + ["--workers", workers]) == 0
        runs.append(d)
    capsys.readouterr()
    for name in ("samples.csv", "lil.csv", "mc.csv", "scan.csv"):
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()
    summary = json.loads((runs[0] / "lil_summary.json").read_text())
    assert summary["version"] == __version__
    assert summary["config"]["replicas"] == 8 and summary["seed"] == 0
    assert {"started", "finished"} <= set(summary)


def test_every_subcommand_runs(out, capsys):
    cmds = [
        ["sample", "--method", "walsh", "--step", "0.0625", "--replicas", "3",
         "--points", "0.5,0;0.25,0.125"],
        ["picard", "--step", "0.0625", "--T", "1.0"],
        ["simlil", "--replicas", "5", "--n_max", "13", "--w_count", "3"],
        ["propagate", "--replicas", "2", "--null_runs", "10", "--n_star", "10"],
        ["cov", "--points", "1,0;0.5,0.1;0.7,-0.2"],
        ["mc", "--process", "Y", "--replicas", "3", "--n_max", "13"],
    ]
    for argv in cmds:
        assert cli.main(argv + ["--workers", "1"]) == 0, argv
    capsys.readouterr()
    for name in ("samples.csv", "picard_u.csv", "picard_u.bin", "simlil.csv", "propagate.csv", "covariance.csv"):
        assert (out / name).exists()
    mc = json.loads((out / "mc_summary.json").read_text())
    assert "levy_limit" in mc["results"]


def test_console_script(tmp_path):
    env = {"KGLAB_OUT": str(tmp_path), "PATH": "/usr/bin:/bin"}
    proc = subprocess.run([sys.executable, "-m", "kglab.cli", "cov", "--a", "0", "--m", "0", "--p", "1,0",
                           "--q", "1,0"], capture_output=True, text=True, env=env)
    assert proc.returncode == 0 and proc.stdout.strip() == "0.25"
