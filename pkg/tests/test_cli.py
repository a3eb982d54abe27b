import csv
import json

import pytest

from movingclt.cli import SUBCOMMANDS, main

IID = {"kind": "independent", "family": "normal", "variance": {"rule": "constant", "scale": 1}}
AR1 = {"kind": "gaussian-assoc", "covariance": {"rule": "ar1", "phi": 0.5, "innovation_variance": 1}}
SCENARIO = {"u": 5, "c": 1.2, "t0": 1, "claim_mean": 1,
            "claims": {"kind": "independent", "family": "uniform", "variance": {"rule": "constant", "scale": 0.25}},
            "count": {"process": "poisson", "rate": 1}, "horizon": 10}


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, doc in (("iid", IID), ("ar1", AR1), ("scenario", SCENARIO)):
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(doc, indent=2))
        paths[name] = str(p)
    return paths


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_conditions_has_lindeberg_row(files, tmp_path):
    out = tmp_path / "o"
    assert main(["conditions", "--model", files["iid"], "--n", "100", "--out", str(out)]) == 0
    rows = read_rows(out / "report.csv")
    assert rows[0][:2] == ["statistic", "n"]
    names = [r[0] for r in rows[1:]]
    assert "lindeberg" in names and "lindeberg:trend" in names
    for name in ("H0", "Hab", "Hb", "BN-RS", "Lyap-RS", "Lynder-O-2", "C2"):
        assert name in names
    body = json.loads((out / "report.json").read_text())
    assert body["config"]["seed"] == 0 and body["config"]["n"] == 100
    assert body["model"] == json.loads(json.dumps(body["model"]))


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_every_subcommand_runs_and_is_deterministic(cmd, files, tmp_path):
    model = files["scenario"] if cmd == "ruin" else files["ar1"] if cmd == "newman" else files["iid"]
    args = [cmd, "--model", model, "--n", "4" if cmd == "newman" else "64", "--R", "300",
            "--seed", "17", "--mode", "monte-carlo"]
    bodies = []
    for k, workers in enumerate(("1", "3")):
        out = tmp_path / "out"
        assert main(args + ["--out", str(out), "--workers", workers]) == 0
        bodies.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    a, b = bodies
    # only the echoed worker count differs between the two runs
    assert a.keys() == b.keys() and "report.csv" in a and "report.json" in a
    for name in a:
        if name == "report.json":
            ja, jb = json.loads(a[name]), json.loads(b[name])
            ja["config"].pop("workers"), jb["config"].pop("workers")
            assert ja == jb
        else:
            assert a[name] == b[name]


def test_repeat_is_byte_identical(files, tmp_path):
    out = tmp_path / "o"
    args = ["clt", "--model", files["iid"], "--n", "50", "--R", "500", "--out", str(out)]
    main(args)
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    main(args)
    assert first == {p.name: p.read_bytes() for p in out.iterdir()}


def test_unknown_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    err = capsys.readouterr().err
    assert len(err.strip().splitlines()) == 1
    assert all(c in err for c in SUBCOMMANDS)


def test_config_file_and_flag_precedence(files, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": files["iid"], "n": 30, "seed": 5, "out": str(tmp_path / "c")}))
    assert main(["variance", "--config", str(cfg), "--n", "40"]) == 0
    body = json.loads((tmp_path / "c" / "report.json").read_text())
    assert body["config"]["n"] == 40 and body["config"]["seed"] == 5
    assert body["results"][0]["value"] == 40.0


def test_exit_codes(files, tmp_path, capsys):
    out = str(tmp_path / "o")
    assert main(["clt", "--model", str(tmp_path / "missing.json"), "--out", out]) == 4
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "kind": "independent",\n  "family": "zeta"\n}')
    assert main(["clt", "--model", str(bad), "--out", out]) == 2
    assert "line 3" in capsys.readouterr().err
    assert main(["clt", "--model", files["iid"], "--n", "0", "--out", out]) == 3
    assert main(["newman", "--model", files["iid"], "--n", "3", "--R", "10", "--out", out]) == 0
    neg = tmp_path / "neg.json"
    neg.write_text(json.dumps({"kind": "gaussian-assoc", "covariance": {"rule": "ar1", "phi": -0.4}}))
    assert main(["newman", "--model", str(neg), "--n", "3", "--out", out]) == 3
    assert main(["clt", "--n", "10", "--out", out]) == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"wat": 1}')
    assert main(["clt", "--config", str(cfg)]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["variance", "--model", files["iid"], "--out", str(blocker / "sub")]) == 4
    err = capsys.readouterr().err.strip().splitlines()
    assert all(line.startswith("movingclt") for line in err)


def test_writes_only_inside_out(files, tmp_path):
    out = tmp_path / "only"
    before = set(tmp_path.iterdir())
    assert main(["generate", "--model", files["iid"], "--n", "30", "--ell", "4", "--out", str(out)]) == 0
    assert set(tmp_path.iterdir()) - before == {out}
    assert sorted(p.name for p in out.iterdir()) == ["blocks.csv", "path.csv", "report.csv", "report.json"]
    assert len(read_rows(out / "blocks.csv")) == 1 + 7
    assert len(read_rows(out / "path.csv")) == 1 + 30
