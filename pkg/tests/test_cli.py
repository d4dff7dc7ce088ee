import json

import pytest

from hbmlab import cli
from hbmlab.inequality_lab import InequalityReport


def _body(tmp_path, name, definition):
    path = tmp_path / name
    path.write_text(json.dumps(definition))
    return str(path)


@pytest.fixture
def bodies(tmp_path):
    return (
        _body(tmp_path, "ball.json", {"dim": 3, "kind": "ball", "lmax": 8}),
        _body(tmp_path, "pert.json", {"dim": 3, "kind": "perturbed_ball", "lmax": 8,
                                      "terms": [{"degree": 2, "order": 1, "amplitude": 0.1}]}),
    )


def test_spectrum_json_and_figure(tmp_path, bodies):
    out = tmp_path / "eigs.json"
    assert cli.main(["spectrum", bodies[0], "-k", "9", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["eigenvalues"][4:9] == pytest.approx([3.0] * 5, abs=1e-8)
    assert out.with_suffix(".png").exists()


def test_no_plot(tmp_path, bodies):
    out = tmp_path / "eigs.json"
    assert cli.main(["spectrum", bodies[1], "--out", str(out), "--no-plot"]) == 0
    assert not out.with_suffix(".png").exists()


def test_check_stdout_csv(capsys, bodies):
    assert cli.main(["check", "minkowski-second", *bodies, "--format", "csv"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("name,lhs")
    # a degree-2 perturbation of the ball is extremal for this bound
    assert lines[1].endswith("equality")


def test_usage_errors(bodies):
    assert cli.main(["check", "xk", *bodies]) == 1
    assert cli.main(["spectrum", bodies[0], "--lmax", "2"]) == 1
    assert cli.main(["bogus"]) == 1


def test_input_errors(tmp_path, bodies):
    assert cli.main(["spectrum", str(tmp_path / "missing.json")]) == 2
    bad = _body(tmp_path, "bad.json", {"dim": 3, "kind": "ellipsoid", "axes": [1, -1, 1]})
    assert cli.main(["spectrum", bad]) == 2
    assert cli.main(["check", "heintze-karcher", *bodies]) == 2
    assert cli.main(["classify", "-1"]) == 2


def test_violation_exit_code(monkeypatch, bodies):
    fake = InequalityReport.make("fake", 0.0, 1.0)
    monkeypatch.setitem(cli.CHECKS, "xk", ((1,), lambda b, t: [fake]))
    assert cli.main(["check", "xk", bodies[0]]) == 4


def test_classify_outputs(tmp_path, capsys):
    out = tmp_path / "cls.json"
    assert cli.main(["classify", "-10", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["found"] == [3]
    assert (tmp_path / "cls_profile_k3.csv").exists()
    assert (tmp_path / "cls.png").exists()
    assert "found" in capsys.readouterr().err


def test_solve_and_isotropize(tmp_path, bodies):
    out = tmp_path / "sol.json"
    assert cli.main(["solve", "-2", "--dim", "3", "--lmax", "8", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["pde_residual"] < 1e-10
    iso = tmp_path / "iso.json"
    assert cli.main(["isotropize", bodies[1], "--out", str(iso), "--no-plot"]) == 0


def test_corpus_csv_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["corpus", "--dim", "2", "--size", "4", "--seed", "3", "--workers", "1"]
    assert cli.main([*args, "--out", str(a)]) == 0
    assert cli.main([*args, "--out", str(b), "--no-plot"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".png").exists()
