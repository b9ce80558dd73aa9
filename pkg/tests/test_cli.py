import subprocess
import sys

import pytest

from hdpcc.cli import main

DIMS = "J=2,L=6,N0=6,N1=6,M=5"
CONFIG = "M = 5\niterations = 400\nburnin = 100\nseed = 3\n"


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(CONFIG)
    return str(p)


def _fit(data, out, cfg, *extra):
    return main(["fit", "--geno", str(data / "genotypes.tsv"), "--env",
                 str(data / "environment.csv"), "--config", cfg, "--out", str(out), *extra])


def test_full_pipeline_regime_two(tmp_path, cfg, capsys):
    data, run, cal, rep, dpl = (tmp_path / x for x in ("data", "run", "cal", "rep", "dpl"))
    assert main(["simulate", "--regime", "2", "--dims", DIMS, "--seed", "3", "--config", cfg,
                 "--out", str(data)]) == 0
    assert (data / "truth.csv").exists()
    assert main(["calibrate", "--dims", DIMS, "--config", cfg, "--out", str(cal)]) == 0
    assert _fit(data, run, cfg) == 0
    assert (run / "final.snap").exists()
    capsys.readouterr()
    assert main(["test", "--traces", str(run), "--epsilons", str(cal / "epsilons.csv"),
                 "--out", str(rep)]) == 0
    summary = capsys.readouterr().out
    assert "interpretation:" in summary
    rows = [line.split(",") for line in (rep / "report.csv").read_text().splitlines()[1:]]
    genetic = {r[1]: float(r[3]) for r in rows if r[1] in ("d_star", "d_star_E")}
    assert set(genetic) == {"d_star", "d_star_E"}
    for p in genetic.values():
        assert abs(p - 0.55) <= 0.02
    assert main(["dpl", "--traces", str(run), "--out", str(dpl)]) == 0
    lines = (dpl / "dpl.csv").read_text().splitlines()
    assert lines[0] == "gene_id,locus_index,distance,flag" and len(lines) == 1 + 12


def test_fit_twice_identical(tmp_path, cfg):
    main(["simulate", "--regime", "4", "--dims", DIMS, "--seed", "1", "--out",
          str(tmp_path / "d")])
    assert _fit(tmp_path / "d", tmp_path / "a", cfg) == 0
    assert _fit(tmp_path / "d", tmp_path / "b", cfg, "--workers", "3") == 0
    a = (tmp_path / "a" / "trace.tsv").read_bytes()
    assert a and a == (tmp_path / "b" / "trace.tsv").read_bytes()
    assert _fit(tmp_path / "d", tmp_path / "a", cfg) == 0
    assert (tmp_path / "a" / "trace.tsv").read_bytes() == a


def test_resume_from_snapshot(tmp_path, cfg):
    main(["simulate", "--regime", "3", "--dims", DIMS, "--out", str(tmp_path / "d")])
    assert _fit(tmp_path / "d", tmp_path / "a", cfg) == 0
    assert _fit(tmp_path / "d", tmp_path / "b", cfg, "--iterations", "250") == 0
    assert _fit(tmp_path / "d", tmp_path / "b", cfg, "--resume",
                str(tmp_path / "b" / "final.snap")) == 0
    assert ((tmp_path / "a" / "trace.tsv").read_bytes()
            == (tmp_path / "b" / "trace.tsv").read_bytes())


def test_missing_statistic_in_epsilons(tmp_path, cfg, capsys):
    main(["simulate", "--regime", "2", "--dims", DIMS, "--out", str(tmp_path / "d")])
    _fit(tmp_path / "d", tmp_path / "r", cfg)
    eps = tmp_path / "eps.csv"
    eps.write_text("statistic,indices,epsilon,tie_weight\nd_star,-,0.5,0.0\n")
    code = main(["test", "--traces", str(tmp_path / "r"), "--epsilons", str(eps),
                 "--out", str(tmp_path / "o")])
    assert code == 3
    assert "no threshold for statistic" in capsys.readouterr().err


def test_missing_input_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["fit", "--geno", str(tmp_path / "nope.tsv"), "--env", str(tmp_path / "e.csv"),
              "--out", str(tmp_path / "o")])
    assert e.value.code == 2


def test_config_violation_lists_keys(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("M = 1\nthin = 0\n")
    code = main(["calibrate", "--dims", DIMS, "--config", str(bad), "--out", str(tmp_path)])
    assert code == 3
    err = capsys.readouterr().err
    assert "M" in err and "thin" in err
    bad.write_text("mystery = 4\n")
    assert main(["calibrate", "--dims", DIMS, "--config", str(bad), "--out", str(tmp_path)]) == 3
    assert "mystery" in capsys.readouterr().err


def test_corrupt_snapshot_exit_code(tmp_path, cfg):
    main(["simulate", "--regime", "2", "--dims", DIMS, "--out", str(tmp_path / "d")])
    snap = tmp_path / "broken.snap"
    snap.write_bytes(b"HDPCCSNP" + b"\0" * 40)
    assert _fit(tmp_path / "d", tmp_path / "r", cfg, "--resume", str(snap)) == 5


def test_simulate_bad_dims(tmp_path):
    assert main(["simulate", "--regime", "1", "--dims", "J=2", "--out", str(tmp_path)]) == 3


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "hdpcc.cli", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "simulate" in r.stdout
    r = subprocess.run([sys.executable, "-m", "hdpcc.cli", "simulate", "--regime", "2", "--dims",
                        "J=1,L=3,N0=2,N1=2", "--out", str(tmp_path)], capture_output=True)
    assert r.returncode == 0
