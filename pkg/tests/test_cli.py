import json

import numpy as np
import pytest

from psrank.cli import main
from psrank.dataset import write_csv
from factories import E1

Q = "0"


@pytest.fixture
def e1(tmp_path):
    path = tmp_path / "e1.csv"
    write_csv(E1, path)
    return str(path)


def _config(err):
    line = next(l for l in err.splitlines() if l.startswith("config "))
    return json.loads(line[len("config "):])


def test_rank_object_level(e1, capsys):
    assert main(["rank", "--data", e1, "--query", Q, "--k", "2", "--level", "object"]) == 0
    out, err = capsys.readouterr()
    lines = out.strip().splitlines()
    assert lines[0] == "object_id,p_rank_1,p_rank_2"
    vals = np.array([[float(x) for x in l.split(",")] for l in lines[1:]])
    np.testing.assert_allclose(vals, [[0, 0.6, 0.4], [1, 0.4, 0.6]], atol=1e-15)
    cfg = _config(err)
    assert cfg["k"] == 2 and len(cfg["data_sha256"]) == 64 and "backend_in_use" in cfg
    assert "rows=3" in err


def test_rank_instance_level_to_file(e1, tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["rank", "--data", e1, "--query", Q, "--k", "2", "--out", str(out), "--engine", "ylks"]) == 0
    text = out.read_text().splitlines()
    assert text[0].startswith("row,object_id,instance_id,distance") and len(text) == 4


def test_dimension_mismatch(e1, capsys):
    assert main(["rank", "--data", e1, "--query", "0,0", "--k", "2"]) == 2
    assert "dimension" in capsys.readouterr().err


def test_missing_file_is_data_error(tmp_path, capsys):
    assert main(["rank", "--data", str(tmp_path / "nope.csv"), "--query", Q, "--k", "1"]) == 2


def test_usage_errors(e1):
    with pytest.raises(SystemExit) as exc:
        main(["rank", "--data", e1])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["rank", "--data", e1, "--query", Q, "--k", "0"])
    assert exc.value.code == 1
    assert main(["semantics", "--data", e1, "--query", Q, "--method", "ptk"]) == 1


@pytest.mark.parametrize("ref", ["worlds", "ylks"])
def test_verify_pass(e1, ref, capsys):
    assert main(["verify", "--data", e1, "--query", Q, "--reference", ref]) == 0
    out = capsys.readouterr().out
    assert out.startswith("max_abs_diff=") and out.strip().endswith("PASS")


def test_verify_guard(e1, capsys):
    assert main(["verify", "--data", e1, "--query", Q, "--world-limit", "1"]) == 4


def test_verify_failure(e1, monkeypatch, capsys):
    import psrank.cli as cli
    monkeypatch.setattr(cli, "max_abs_diff", lambda a, b: 1.0)
    assert main(["verify", "--data", e1, "--query", Q]) == 3
    assert capsys.readouterr().out.strip().endswith("FAIL")


@pytest.mark.parametrize("method,extra,ranking", [
    ("ukranks", [], [0, 1]),
    ("ptk", ["--threshold", "0.5", "--k", "1"], [0]),
    ("globaltopk", ["--k", "1"], [0]),
    ("expectedrank", [], [0, 1]),
])
def test_semantics(e1, capsys, method, extra, ranking):
    assert main(["semantics", "--data", e1, "--query", Q, "--method", method] + extra) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["method"] == method and d["ranking"] == ranking
    if method == "expectedrank":
        np.testing.assert_allclose(d["scores"], [1.4, 1.6])


def test_semantics_from_table(e1, tmp_path, capsys):
    t = tmp_path / "t.csv"
    main(["rank", "--data", e1, "--query", Q, "--k", "2", "--out", str(t)])
    capsys.readouterr()
    assert main(["semantics", "--table", str(t), "--level", "instance", "--method", "ukranks"]) == 0
    assert json.loads(capsys.readouterr().out)["ranking"] == [[0, 0], [0, 1]]
    assert main(["semantics", "--table", str(t), "--method", "ukranks"]) == 2


def test_gen(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert main(["gen", "--objects", "1", "--instances", "1", "--dims", "2", "--ud", "0", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and lines[1].split(",")[1] == "1.0"
    assert main(["gen", "--objects", "2", "--instances", "1", "--existential", "1", "--out", str(out)]) == 2


def test_bench(tmp_path, capsys):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"objects": [20, 40], "instances": 3, "dims": 2, "k": 4}))
    assert main(["bench", "--grid", str(grid), "--repeats", "1"]) == 0
    recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert len(recs) == 4 and {r["engine"] for r in recs} == {"psr", "ylks"}
    out = tmp_path / "res.jsonl"
    assert main(["bench", "--grid", str(grid), "--repeats", "1", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 4
    assert (tmp_path / "res.summary.json").exists() and (tmp_path / "res.csv").exists()
    grid.write_text("{not json")
    assert main(["bench", "--grid", str(grid)]) == 2
