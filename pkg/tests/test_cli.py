import numpy as np
import pytest

from radialmix import cli
from radialmix.ledger import EnergyLedger


def run(capsys, *argv):
    code = cli.dispatch(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_constants_p1(capsys):
    code, out, err = run(capsys, "constants", "--p", "1")
    assert code == 0 and err == ""
    values = dict(line.split("=", 1) for line in out.splitlines() if "=" in line)
    assert float(values["c1"]) == 10
    assert float(values["c3"]) == 4
    assert abs(float(values["eps0"]) - 0.02055) < 5e-6
    assert "constraints: 5/5 pass" in out


def test_constants_with_rates(capsys):
    code, out, _ = run(capsys, "constants", "--p", "2", "--nu", "1e-3")
    assert code == 0 and "T_nuk_ln=" in out


def test_simulate_writes_monotone_ledger(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--p", "1", "--nu", "1e-3", "--ell", "1",
                       "--cells", "256", "--tmax", "20", "--out", str(tmp_path))
    assert code == 0
    ledger = EnergyLedger.read_csv(tmp_path / "ledger.csv")
    assert ledger["t"][-1] == pytest.approx(20)
    l2 = ledger["l2_sq"]
    assert np.all(np.diff(l2) <= 1e-12 * l2[0])


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# trajectory\np = 2\nnu = 1e-2   # diffusivity\ncells = 128\ntmax = 1\ndt = 0.05\n")
    code, _, _ = run(capsys, "simulate", "--config", str(cfg), "--tmax", "0.5", "--out", str(tmp_path))
    assert code == 0
    ledger = EnergyLedger.read_csv(tmp_path / "ledger.csv")
    assert ledger["t"][-1] == pytest.approx(0.5)


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--p", "0.5"],
        ["simulate", "--nu", "2"],
        ["simulate", "--cells", "many"],
        ["simulate", "--width", "5"],
        ["simulate", "--unknown", "1"],
        ["frobnicate"],
        ["sweep", "--plan", ""],
        ["sweep", "--plan", "1:1e-3"],
        ["snapshot", "--ell", "1,1"],
        ["verify-lemmas", "--p", "0.9"],
        ["verify-balances", "--tmax", "0.01"],
    ],
)
def test_invalid_input_is_a_usage_error_without_output(tmp_path, capsys, argv):
    out_dir = tmp_path / "out"
    code, _, err = run(capsys, *argv, "--out", str(out_dir))
    assert code == 2
    assert err.count("\n") == 1 and err.startswith("radialmix: error=usage reason=")
    assert not out_dir.exists()


def test_bad_config_files(tmp_path, capsys):
    for text in ("p 2\n", "colour = red\n", "p = 1\np = 2\n"):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(text)
        code, _, err = run(capsys, "constants", "--config", str(cfg))
        assert code == 2 and "error=usage" in err
    code, _, _ = run(capsys, "constants", "--config", str(tmp_path / "missing.cfg"))
    assert code == 2


def test_verify_lemmas_is_deterministic(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        code, out, _ = run(capsys, "verify-lemmas", "--p", "2", "--seed", "0", "--samples", "10",
                           "--out", str(tmp_path / name))
        assert code == 0
        outs.append(out)
    assert outs[0].splitlines()[0] == "lemma,total,passed,min_relative_margin"
    assert (tmp_path / "a" / "lemmas.csv").read_bytes() == (tmp_path / "b" / "lemmas.csv").read_bytes()


def test_verify_balances_pass_and_fail(tmp_path, capsys):
    code, out, _ = run(capsys, "verify-balances", "--p", "1", "--cells", "192", "--tmax", "2",
                       "--dt", "0.02", "--out", str(tmp_path / "ok"))
    assert code == 0
    assert (tmp_path / "ok" / "balances.csv").read_text().count("true") == 4
    # a coarse time step leaves residuals above the 1e-2 bar
    code, _, err = run(capsys, "verify-balances", "--p", "2", "--cells", "64", "--tmax", "4",
                       "--dt", "0.5", "--record-every", "1", "--out", str(tmp_path / "bad"))
    assert code == 3 and "error=check" in err


def test_numerical_failure_exit_code(tmp_path, capsys, monkeypatch):
    real = cli.evolve

    def broken(*args, **kwargs):
        ledger = real(*args, **kwargs)
        ledger.failed, ledger.message = True, "singular implicit matrix"
        return ledger

    monkeypatch.setattr(cli, "evolve", broken)
    code, _, err = run(capsys, "simulate", "--cells", "64", "--tmax", "0.1", "--out", str(tmp_path))
    assert code == 4 and "error=numerical" in err


def test_sweep_writes_csv(tmp_path, capsys):
    code, out, _ = run(capsys, "sweep", "--plan", "1:1e-2:1; 1:1e-2:2", "--cells", "256",
                       "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("p,nu,k,lambda_fit")
    assert "runs=2 ok=2" in out


def test_snapshot_frames(tmp_path, capsys):
    code, _, _ = run(capsys, "snapshot", "--ell", "0,1", "--cells", "64", "--ntheta", "8",
                     "--frames", "3", "--tmax", "1", "--dt", "0.1", "--out", str(tmp_path))
    assert code == 0
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["frame_0000.csv", "frame_0001.csv", "frame_0002.csv"]
    first = (tmp_path / "frame_0002.csv").read_text().splitlines()
    assert len(first) == 65 and float(first[0].split(",")[0]) == pytest.approx(1.0)
