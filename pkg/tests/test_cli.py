import numpy as np
import pytest

from efgsolve.cli import main, read_config, ConfigError


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    return np.genfromtxt(path, delimiter=",", names=True)


def test_describe(capsys):
    code, out, _ = run_cli(capsys, "describe", "--game", "kuhn")
    assert code == 0
    assert "M 13" in out and "N 13" in out and "x infosets 6" in out


def test_run_single_step(tmp_path, capsys):
    path = tmp_path / "t1.csv"
    code, out, _ = run_cli(capsys, "run", "--game", "kuhn", "--algorithm", "domwu", "--eta", "0.05", "-T", "1", "-o", str(path))
    assert code == 0
    lines = path.read_text().splitlines()
    assert lines[0] == "t,gap,l2_to_ref,theta"
    assert len(lines) == 3
    assert "final_gap=" in out and "wall=" in out


def test_rps_cfr_last_iterate_divergence(tmp_path, capsys):
    path = tmp_path / "div.csv"
    code, _, _ = run_cli(
        capsys, "run", "--game", "rps", "--algorithm", "cfr", "--averaging", "last",
        "-T", "10000", "--init", "first", "-o", str(path),
    )
    assert code == 0
    d = read_csv(path)
    assert len(d) == 10001
    assert d["gap"][d["t"] > 100].min() >= 0.5
    assert np.isfinite(d["l2_to_ref"]).all()


def test_kuhn_cfr_plus_trend(tmp_path, capsys):
    path = tmp_path / "cfrp.csv"
    assert run_cli(capsys, "run", "--game", "kuhn", "--algorithm", "cfr+", "--averaging", "linear", "-T", "1000", "-o", str(path))[0] == 0
    gap = read_csv(path)["gap"]
    blocks = gap[1:].reshape(10, 100).mean(axis=1)
    assert blocks[-1] < blocks[0] / 10
    assert gap[-1] < 1e-2


def test_rejects_incompatible_flags(capsys):
    code, _, err = run_cli(capsys, "run", "--game", "kuhn", "--algorithm", "cfr+", "--eta", "0.1", "-T", "5")
    assert code == 1 and "eta" in err
    code, _, err = run_cli(capsys, "run", "--game", "kuhn", "--algorithm", "domwu", "--scheme", "alternating", "-T", "5")
    assert code == 1 and "scheme" in err
    code, _, err = run_cli(capsys, "run", "--game", "chess", "-T", "5")
    assert code == 1 and "unknown game" in err


def test_unwritable_output(tmp_path, capsys):
    code, _, err = run_cli(capsys, "run", "--game", "rps", "-T", "2", "-o", str(tmp_path / "no" / "such" / "x.csv"))
    assert code == 1 and "cannot write" in err


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    out = tmp_path / "c.csv"
    cfg.write_text(f"# experiment\ngame = kuhn\nalgorithm = dogda\neta = 0.5\nT = 30\nmetric-every = 10\noutput = {out}\n")
    assert run_cli(capsys, "run", "--config", str(cfg))[0] == 0
    assert len(out.read_text().splitlines()) == 1 + 4
    assert run_cli(capsys, "run", "--config", str(cfg), "-T", "50")[0] == 0
    assert len(out.read_text().splitlines()) == 1 + 6
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    with pytest.raises(ConfigError, match="unknown key"):
        read_config(str(bad))


def test_row_count(tmp_path, capsys):
    path = tmp_path / "r.csv"
    run_cli(capsys, "run", "--game", "rps", "--algorithm", "vogda", "-T", "57", "--metric-every", "5", "-o", str(path))
    assert len(path.read_text().splitlines()) == 1 + 57 // 5 + 1


def test_theta_column_for_rps(tmp_path, capsys):
    path = tmp_path / "th.csv"
    start = tmp_path / "start.txt"
    start.write_text("0.5\n0.3\n0.2\n0.5\n0.3\n0.2\n")
    run_cli(capsys, "run", "--game", "rps", "--algorithm", "vomwu", "-T", "100", "--init", str(start), "-o", str(path))
    theta = read_csv(path)["theta"]
    assert np.isfinite(theta).all()
    assert np.all(np.diff(theta) <= 1e-10)


def test_sweep(tmp_path, capsys):
    code, _, err = run_cli(capsys, "sweep", "--game", "kuhn", "--algorithm", "domwu", "--etas", "", "--outdir", str(tmp_path / "s0"))
    assert code == 1 and "at least one eta" in err
    code, _, err = run_cli(capsys, "sweep", "--game", "kuhn", "--algorithm", "cfr", "--etas", "1", "--outdir", str(tmp_path / "s1"))
    assert code == 1
    out = tmp_path / "s2"
    code, _, _ = run_cli(
        capsys, "sweep", "--game", "kuhn", "--algorithm", "domwu", "--etas", "0.5,2",
        "-T", "2000", "--metric-every", "100", "--outdir", str(out), "--threads", "2",
    )
    assert code == 0
    index = (out / "index.csv").read_text().splitlines()
    assert index[0] == "eta,path" and len(index) == 3
    small, large = (read_csv(out / line.split(",")[1])["gap"] for line in index[1:])
    assert large[-1] < small[-1]


def test_gap_verb(tmp_path, capsys):
    final = tmp_path / "final.txt"
    run_cli(capsys, "run", "--game", "kuhn", "--algorithm", "cfr+", "-T", "200", "--final", str(final), "-o", str(tmp_path / "x.csv"))
    code, out, _ = run_cli(capsys, "gap", "--game", "kuhn", str(final))
    assert code == 0 and 0 <= float(out) < 0.05
    bad = tmp_path / "bad.txt"
    bad.write_text("1\n0\n0\n")
    code, _, err = run_cli(capsys, "gap", "--game", "rps", str(bad))
    assert code == 1 and "P=6" in err
    bad.write_text("0.6\n0.6\n0\n0.5\n0.5\n0\n")
    code, _, err = run_cli(capsys, "gap", "--game", "rps", str(bad))
    assert code == 1 and "not a valid" in err


def test_custom_game(tmp_path, capsys):
    from efgsolve.games import build_kuhn, save_game

    path = tmp_path / "k.txt"
    save_game(build_kuhn(), path)
    code, out, _ = run_cli(capsys, "describe", "--game", f"custom:{path}")
    assert code == 0 and "M 13" in out


@pytest.mark.parametrize("alg", ["domwu", "vomwu", "cfr+", "opt-cfr"])
def test_deterministic_bytes(tmp_path, capsys, alg):
    paths = [tmp_path / f"{alg}{k}.csv" for k in range(2)]
    for p in paths:
        run_cli(capsys, "run", "--game", "kuhn", "--algorithm", alg, "-T", "300", "--metric-every", "7", "-o", str(p))
    assert paths[0].read_bytes() == paths[1].read_bytes()
