import json

import pytest

from dgease import cli
from dgease import experiments as E

CONFIG = """
[problem]
builtin = "polynomial"
[mesh]
background = "rect:6,6"
ladder = [4, 9]
seed = 2
[run]
degrees = [2]
output = "{out}"
plots = false
"""


def run(argv):
    return cli.main([str(a) for a in argv])


def test_mesh_solve_constants(tmp_path, capsys):
    mesh = tmp_path / "m.json"
    assert run(["mesh", "--bg", "rect:8,8", "--agglomerate", 6, "--seed", 1, "-o", mesh]) == 0
    data = json.loads(mesh.read_text())
    assert len(data["elements"]) == 6
    report = tmp_path / "r.csv"
    assert run(["solve", mesh, "--problem", "polynomial", "-p", 2, "--report", report,
                "--dump-system", tmp_path / "A.mtx"]) == 0
    assert report.read_text().startswith("run_id,p,n_elem")
    assert (tmp_path / "A.mtx").exists()
    consts = tmp_path / "c.csv"
    assert run(["constants", mesh, "-p", 2, "--report", consts]) == 0
    assert consts.read_text().splitlines()[0].startswith("kind,element,group")


def test_mesh_levelset_and_degree(tmp_path):
    out = tmp_path / "d.json"
    assert run(["mesh", "--bg", "rect:4,4,-0.7,0.7,-0.7,0.7", "--levelset", "unit_disc", "-p", 3, "-o", out]) == 0
    data = json.loads(out.read_text())
    assert data["elements"][0]["p"] == 3
    assert all(e["levelset_id"] == 0 for e in data["boundary"])


def test_verify(tmp_path, capsys):
    rep = tmp_path / "v.csv"
    assert run(["verify", "--battery", "standard", "--pmax", 2, "--report", rep]) == 0
    assert "worst ratio" in capsys.readouterr().out
    assert run(["verify", "--battery", "other"]) == 2


def test_converge_and_rerun_identical(tmp_path):
    outs = []
    for tag in ("a", "b"):
        cfg = tmp_path / f"{tag}.toml"
        cfg.write_text(CONFIG.format(out=tmp_path / tag))
        assert run(["converge", cfg]) == 0
        outs.append((tmp_path / tag / "polynomial-h.csv").read_bytes())
        summary = json.loads((tmp_path / tag / "polynomial-summary.json").read_text())
        assert {c["measured"] for c in summary["criteria"]} == {"exact"}
    assert outs[0] == outs[1]


def test_pstudy(tmp_path):
    cfg = tmp_path / "p.toml"
    cfg.write_text(CONFIG.format(out=tmp_path / "p").replace('builtin = "polynomial"', 'builtin = "example2"'))
    assert run(["pstudy", cfg, "--pmax", 3]) == 0
    rows = (tmp_path / "p" / "example2-p.csv").read_text().splitlines()
    assert len(rows) == 4


@pytest.mark.parametrize("body,msg", [
    ("[mesh]\nladder=[2]\nbackground='rect'\n", "problem"),
    ("[problem]\nbuiltin='example1'\n[mesh]\nladder=[]\nbackground='rect'\n", "ladder"),
    ("[problem]\nbuiltin='example1'\n[mesh]\nladder=[2]\nbackground='rect'\n[run]\ndegrees=[0]\n", "degrees"),
    ("[problem]\nbuiltin='example1'\n[mesh]\nladder=[2]\n", "background"),
    ("[problem]\nbuiltin='example1'\n[mesh]\nladder=[2]\nbackground='moon'\n", "generators"),
])
def test_config_errors(tmp_path, capsys, body, msg):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(body)
    assert run(["converge", cfg]) == 2
    assert msg in capsys.readouterr().err


def test_example_failure_exit_code(tmp_path, monkeypatch, capsys):
    bad = E.Bundle("example9", criteria=[E.Criterion("C0 demo", "> 1", 0.5, False)])
    monkeypatch.setattr(E, "run_example", lambda n, scale="desk": bad)
    assert run(["example", 3, "-o", tmp_path]) == 1
    assert "C0 demo" in capsys.readouterr().err


def test_thread_count(monkeypatch):
    monkeypatch.delenv("DGEASE_THREADS", raising=False)
    assert cli.thread_count(3) == 3
    monkeypatch.setenv("DGEASE_THREADS", "2")
    assert cli.thread_count(3) == 2


def test_background_spec_file(tmp_path):
    from dgease.geometry.io import save_background
    from dgease.geometry.meshes import structured_rectangle

    path = tmp_path / "bg.json"
    save_background(structured_rectangle(3, 3), path)
    bg, labels = cli.background_from_spec(str(path))
    assert bg.n_cells == 18 and labels is None
    bg, labels = cli.background_from_spec("interface:8,0.025,16")
    assert labels is not None and bg.levelsets[0].freq == 16.0
