import json

import numpy as np
import pytest

from netmatch import io as nio
from netmatch.cli import main
from netmatch.distance import CodegreeMatrix

from oracles import codegree_bruteforce


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_simulate_is_deterministic(tmp_path):
    assert main(["simulate", "--n", "100", "--link", "beta", "--seed", "7", "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--n", "100", "--link", "beta", "--seed", "7", "--out", str(tmp_path / "b")]) == 0
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert set(a) == {"edges.csv", "covariates.csv", "latent.json"}
    assert a == b


def test_simulate_rejects_unknown_link(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--n", "10", "--link", "bogus"])
    assert exc.value.code == 2
    err = capsys.readouterr().err
    for name in ("blockmodel", "beta", "homophily", "grid"):
        assert name in err


def test_simulate_output_loads_back(tmp_path):
    assert main(["simulate", "--n", "50", "--link", "blockmodel", "--seed", "1", "--out", str(tmp_path)]) == 0
    s = nio.load_sample(tmp_path / "edges.csv", tmp_path / "covariates.csv")
    bundle = nio.loads_sample((tmp_path / "latent.json").read_text())
    assert s.n == 50
    np.testing.assert_array_equal(s.D, bundle.D)
    np.testing.assert_array_equal(s.X, bundle.X)


def test_simulate_grid(tmp_path):
    (tmp_path / "g.csv").write_text("0.1,0.5\n0.5,0.9\n")
    rc = main(["simulate", "--n", "20", "--link", "grid", "--grid", str(tmp_path / "g.csv"), "--out", str(tmp_path)])
    assert rc == 0
    assert main(["simulate", "--n", "20", "--link", "grid", "--out", str(tmp_path)]) == 2


def test_distance_empty_graph(tmp_path):
    (tmp_path / "e.csv").write_text("i,j\n")
    (tmp_path / "c.csv").write_text("id,y,x1\n0,1,0.1\n1,0,0.2\n2,1,0.3\n3,0,0.0\n")
    out = tmp_path / "d.csv"
    assert main(["distance", "--edges", str(tmp_path / "e.csv"), "--covariates", str(tmp_path / "c.csv"),
                 "--out", str(out)]) == 0
    C = CodegreeMatrix.from_csv(out.read_text())
    assert C.values.shape == (4, 4) and np.all(C.values == 0)


def test_distance_path_fixture(tmp_path, path3):
    (tmp_path / "e.csv").write_text("i,j\n0,1\n1,2\n")
    out = tmp_path / "d.bin"
    assert main(["distance", "--edges", str(tmp_path / "e.csv"), "--n", "3", "--format", "binary",
                 "--out", str(out)]) == 0
    C = CodegreeMatrix.from_bytes(out.read_bytes())
    np.testing.assert_allclose(C.values, codegree_bruteforce(path3), atol=1e-12)


def test_distance_rejects_self_link(tmp_path, capsys):
    (tmp_path / "e.csv").write_text("i,j\n0,1\n2,2\n")
    out = tmp_path / "d.csv"
    assert main(["distance", "--edges", str(tmp_path / "e.csv"), "--n", "3", "--out", str(out)]) == 3
    assert "e.csv:3" in capsys.readouterr().err
    assert not out.exists()


def test_distance_reports_bad_cell(tmp_path, capsys):
    (tmp_path / "e.csv").write_text("i,j\n0,1\n1,q\n")
    assert main(["distance", "--edges", str(tmp_path / "e.csv"), "--n", "3"]) == 3
    assert "e.csv:3:2" in capsys.readouterr().err


@pytest.fixture(scope="module")
def sim500(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim500")
    assert main(["simulate", "--n", "500", "--link", "blockmodel", "--seed", "0", "--out", str(d)]) == 0
    return d


def test_estimate_pipeline(sim500, tmp_path):
    out, lam = tmp_path / "r.json", tmp_path / "lam.csv"
    rc = main(["estimate", "--edges", str(sim500 / "edges.csv"), "--covariates", str(sim500 / "covariates.csv"),
               "--out", str(out), "--lambda-out", str(lam)])
    assert rc == 0
    res = json.loads(out.read_text())
    assert res["converged"] and abs(res["beta_hat"][0] - 1) < 0.25
    assert len(res["lambda_hat"]) == 500
    assert lam.read_text().splitlines()[0] == "id,lambda_hat"


def test_estimate_missing_id(tmp_path, capsys):
    (tmp_path / "e.csv").write_text("i,j\n0,1\n1,5\n")
    (tmp_path / "c.csv").write_text("id,y,x1\n0,1,0.1\n1,0,0.2\n2,1,0.3\n")
    rc = main(["estimate", "--edges", str(tmp_path / "e.csv"), "--covariates", str(tmp_path / "c.csv")])
    assert rc == 3
    assert "id 5" in capsys.readouterr().err


def test_estimate_degenerate_bandwidth(tmp_path):
    assert main(["simulate", "--n", "50", "--seed", "2", "--out", str(tmp_path)]) == 0
    out = tmp_path / "r.json"
    rc = main(["estimate", "--edges", str(tmp_path / "edges.csv"), "--covariates", str(tmp_path / "covariates.csv"),
               "--bandwidth", "1e-9", "--out", str(out)])
    assert rc == 4
    assert not out.exists()


def test_estimate_nonconvergence_exit(tmp_path):
    (tmp_path / "e.csv").write_text("i,j\n0,1\n")
    (tmp_path / "c.csv").write_text("id,y,x1\n0,1,0.0\n1,0,1.0\n")
    out = tmp_path / "r.json"
    rc = main(["estimate", "--edges", str(tmp_path / "e.csv"), "--covariates", str(tmp_path / "c.csv"),
               "--bandwidth", "1.0", "--out", str(out)])
    assert rc == 5
    assert json.loads(out.read_text())["converged"] is False


def test_mc_smoke_and_determinism(tmp_path):
    design = tmp_path / "design.txt"
    design.write_text("sample_sizes = 50, 100\nreplications = 2\nlink = blockmodel\nseed = 1\n")
    assert main(["mc", str(design), "--out", str(tmp_path / "r1")]) == 0
    assert main(["mc", str(design), "--out", str(tmp_path / "r2"), "--jobs", "2"]) == 0
    r1, r2 = _files(tmp_path / "r1"), _files(tmp_path / "r2")
    assert set(r1) == {"report.csv", "report.json", "report.md"}
    assert r1 == r2
    assert len(r1["report.md"].decode().splitlines()) == 2 + 2


def test_mc_default_design(tmp_path):
    design = tmp_path / "design.txt"
    design.write_text("replications = 1\n")
    assert main(["mc", str(design), "--out", str(tmp_path), "--format", "markdown"]) == 0
    rows = (tmp_path / "report.md").read_text().splitlines()[2:]
    assert [r.split("|")[1].strip() for r in rows] == ["50", "100", "150", "200", "250", "500"]


def test_mc_bad_key(tmp_path, capsys):
    design = tmp_path / "design.txt"
    design.write_text("reps = 2\n")
    assert main(["mc", str(design), "--out", str(tmp_path)]) == 2
    assert "valid keys" in capsys.readouterr().err


def test_jobs_env(monkeypatch, tmp_path):
    from netmatch.montecarlo import default_jobs
    monkeypatch.setenv("NETMATCH_JOBS", "3")
    assert default_jobs() == 3
