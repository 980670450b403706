import json

import numpy as np

from nogaps import cli


def write_config(tmp_path, **kw):
    d = dict(kind="null_vector_tail", n=10, k_list=[1], t_grid=[0.5, 1.0, 2.0, 4.0], trials=20)
    d.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(d))
    return p


def test_run_ok(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(write_config(tmp_path)), "--out", str(out), "--seed", "4"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["master_seed"] == 4
    assert (out / "summary.csv").exists() and (out / "null_vector_tail_tail.svg").exists()


def test_run_threads_identical(tmp_path):
    cfg = write_config(tmp_path, chunk_size=3)
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "--threads", "1"])
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--threads", "4"])
    a = json.loads((tmp_path / "a" / "summary.json").read_text())
    b = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert a == b


def test_run_config_errors(tmp_path):
    assert cli.main(["run", "--config", str(write_config(tmp_path, trials=0))]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", "--config", str(bad)]) == 1
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 3
    assert cli.main(["frobnicate"]) == 1


def test_run_partial_failure(tmp_path, monkeypatch):
    from nogaps import harness
    from nogaps.errors import RankDeficient

    def broken(B):
        raise RankDeficient("forced")

    monkeypatch.setattr(harness, "null_vector", broken)
    assert cli.main(["run", "--config", str(write_config(tmp_path)), "--out", str(tmp_path / "o")]) == 2
    assert (tmp_path / "o" / "summary.json").exists()


def test_run_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["run", "--config", str(write_config(tmp_path)), "--out", str(blocker / "sub")]) == 3


def test_certify(capsys):
    assert cli.main(["certify", "--trials", "3"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 9


def test_plot(tmp_path, capsys):
    cli.main(["run", "--config", str(write_config(tmp_path)), "--out", str(tmp_path)])
    capsys.readouterr()
    assert cli.main(["plot", "--summary", str(tmp_path / "summary.json"), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "null_vector_tail_tail.svg").exists()
    assert cli.main(["plot", "--summary", str(tmp_path / "nope.json")]) == 3
    (tmp_path / "junk.json").write_text("[1, 2]")
    assert cli.main(["plot", "--summary", str(tmp_path / "junk.json")]) == 1


def test_lcd(tmp_path, capsys):
    v = tmp_path / "v.csv"
    np.savetxt(v, [0.6, 0.8], delimiter=",")
    assert cli.main(["lcd", "--vector", str(v), "--alpha", "0.1", "--gamma", "0.1", "--cap", "10"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert 0 < res["lower"] <= res["upper"] <= 10
    assert cli.main(["lcd", "--vector", str(v), "--alpha", "0.1", "--gamma", "2", "--cap", "10"]) == 1
    assert cli.main(["lcd", "--vector", str(tmp_path / "none.csv"), "--alpha", "1", "--gamma", "0.1", "--cap", "1"]) == 3
