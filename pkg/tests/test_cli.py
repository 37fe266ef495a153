import csv
import subprocess
import sys

import numpy as np
import pytest

from crossdiff.cli import ConfigError, eval_expression, load_config, main, parse_epsilons

SMALL = """
[grid]
N = 16
[scheme]
T_final = 0.02
tau = 1e-3
[output]
stride = 5
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_expression_grammar():
    x = np.array([0.0, 0.5, 1.0])
    np.testing.assert_allclose(eval_expression("1 + 0.5*sin(pi*x)^2", x), 1 + 0.5 * np.sin(np.pi * x) ** 2)
    np.testing.assert_allclose(eval_expression("-2^2 + exp(x)/2 - cos(x)", x), -4 + np.exp(x) / 2 - np.cos(x))
    np.testing.assert_allclose(eval_expression("3", x), 3.0)


@pytest.mark.parametrize("expr", ["__import__('os')", "x.real", "log(x)", "x if x else 1", "1/(x-x)", "sin(x, x)"])
def test_expression_rejects(expr):
    with pytest.raises(ConfigError):
        eval_expression(expr, np.array([0.0, 1.0]))


def test_parse_epsilons():
    assert parse_epsilons("0.1, 1e-2;1e-3") == [0.1, 0.01, 0.001]
    for bad in ("0.1,0.1", "", "a", "-1"):
        with pytest.raises(ConfigError):
            parse_epsilons(bad)


def test_defaults_are_reference():
    cfg = load_config(None)
    assert (cfg.grid.N, cfg.grid.L, cfg.T_final, cfg.scheme.tau, cfg.scheme.eta) == (128, 1.0, 0.5, 1e-3, 0.0)
    assert cfg.epsilons == [0.1, 0.01, 0.001]


@pytest.mark.parametrize("text,key", [
    ("[scheme]\ntau = -1\n", "tau"),
    ("[grid]\nN = many\n", "N"),
    ("[model]\npreset = other\n", "preset"),
    ("[scheme]\nbogus = 1\n", "bogus"),
    ("[nope]\n", "nope"),
    ("[model]\nalpha = 0.1\ncertified = true\n", "certified"),
    ("[scheme]\neta = 0.1\ntau = 1\nstrict_tau = true\n", "strict_tau"),
])
def test_config_errors_name_the_key(tmp_path, capsys, text, key):
    assert main(["simulate", "--config", write(tmp_path, text), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert key in err


def test_simulate_writes_csv(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["simulate", "--config", write(tmp_path, SMALL), "--out", str(out)]) == 0
    head, fields = read_csv(out / "fields.csv")
    assert head == ["t", "x", "u1", "u2", "u3"]
    assert fields.shape == (16 * 5, 5)  # levels 0, 5, 10, 15, 20
    head, ent = read_csv(out / "entropy.csv")
    assert head == ["step", "t", "h_eta", "D_grad", "D_reac", "mass12", "mass13", "defect_L1", "min_u"]
    assert ent.shape[0] == 21
    assert np.all(np.diff(ent[:, 2]) <= 1e-8)
    assert np.all(ent[:, 4] >= -1e-14)


def test_simulate_equilibrium_constant_entropy(tmp_path):
    text = SMALL + "[init]\nu2 = 1.3\nu3 = 0.7\n"
    assert main(["simulate", "--config", write(tmp_path, text), "--out", str(tmp_path)]) == 0
    _, ent = read_csv(tmp_path / "entropy.csv")
    assert np.ptp(ent[:, 2]) == 0.0


def test_simulate_is_deterministic(tmp_path):
    cfg = write(tmp_path, SMALL)
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "b")])
    for name in ("fields.csv", "entropy.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_not_well_prepared(tmp_path):
    text = SMALL + "[init]\nwell_prepared = false\nu1 = 2 + x\n"
    assert main(["simulate", "--config", write(tmp_path, text), "--out", str(tmp_path)]) == 0
    _, f = read_csv(tmp_path / "fields.csv")
    np.testing.assert_allclose(f[:16, 2], 2 + f[:16, 1])


def test_simulate_divergence_exit_code(tmp_path, monkeypatch):
    import crossdiff.cli as cli
    from crossdiff.stepper import RunDivergence, RunResult

    def boom(init, T, p, funcs, monitors=True):
        partial = RunResult(np.array([0.0]), init.u[None], init.grid, p, [], [])
        raise RunDivergence("forced", 1, partial)

    monkeypatch.setattr(cli, "run", boom)
    assert main(["simulate", "--config", write(tmp_path, SMALL), "--out", str(tmp_path)]) == 2
    assert (tmp_path / "fields.csv").exists()


def test_sweep_cli(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path), "--epsilons", "1e-1,1e-2,1e-3"]) == 0
    head, rows = read_csv(tmp_path / "sweep.csv")
    assert head == ["epsilon", "defect_L1_QT", "gap_v", "gap_w", "ratio_sqrt_eps"]
    np.testing.assert_array_equal(rows[:, 0], [0.1, 0.01, 0.001])
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path), "--epsilons", "1e-2,1e-2"]) == 1


def test_sweep_single_eps(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path), "--epsilons", "0.01"]) == 0
    _, rows = read_csv(tmp_path / "sweep.csv")
    assert rows.shape == (1, 5)


def test_limit_cli(tmp_path):
    assert main(["limit", "--config", write(tmp_path, SMALL), "--out", str(tmp_path)]) == 0
    head, f = read_csv(tmp_path / "limit_fields.csv")
    assert head == ["t", "x", "v", "w", "u1", "u2", "u3"]
    np.testing.assert_allclose(f[:, 2], f[:, 4] + f[:, 5], rtol=1e-12)
    head, e = read_csv(tmp_path / "limit_entropy.csv")
    assert head == ["step", "t", "h0", "mass_v", "mass_w"]
    assert np.all(np.diff(e[:, 2]) <= 1e-8)


def test_check_certified(capsys):
    assert main(["check"]) == 0
    assert "check: PASS" in capsys.readouterr().out


def test_check_alpha_fails_with_witness(tmp_path, capsys):
    assert main(["check", "--config", write(tmp_path, "[model]\nalpha = 0.1\n")]) == 3
    out = capsys.readouterr().out
    assert "witness" in out and "10.24" in out


def test_check_identity(tmp_path, capsys):
    assert main(["check", "--config", write(tmp_path, "[model]\npreset = identity\n"), "--seed", "7"]) == 0
    line = [ln for ln in capsys.readouterr().out.splitlines() if "g_closed_vs_newton" in ln][0]
    assert float(line.split("max error")[1].split()[0]) <= 1e-10


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "crossdiff", "check", "--config",
                           write(tmp_path, "[model]\ndelta = 4\n")], capture_output=True, text=True)
    assert proc.returncode == 3
    assert "delta >= 1 + 4*max(beta, gamma-1)" in proc.stdout
