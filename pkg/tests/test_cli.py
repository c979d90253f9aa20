import csv

import numpy as np
import pytest

from poisonctl.cli import main
from poisonctl.datastream import load_csv

FAST = ["T=10", "horizon=5", "max_iters=50"]


def _run(tmp_path, *extra, out="out"):
    argv = ["run", "--config", "synthetic_1d.cfg", "--out", str(tmp_path / out)]
    for ov in FAST:
        argv += ["--override", ov]
    return main(argv + list(extra))


def test_run_bundled_config(tmp_path, capsys):
    assert _run(tmp_path) == 0
    rows = list(csv.DictReader((tmp_path / "out" / "summary.csv").open()))
    assert [r["policy"] for r in rows] == ["null", "greedy", "nlp", "clairvoyant"]
    assert all(r["T"] == "10" and r["wall_seconds"] == "" for r in rows)
    assert (tmp_path / "out" / "traces" / "nlp_seed0.csv").is_file()
    assert (tmp_path / "out" / "manifest.cfg").is_file()
    assert "clairvoyant" in capsys.readouterr().out


def test_manifest_rerun_is_bitwise(tmp_path):
    assert _run(tmp_path, "--override", "seeds=0,1", "--parallelism", "1") == 0
    manifest = tmp_path / "out" / "manifest.cfg"
    assert main(["run", "--config", str(manifest), "--out", str(tmp_path / "again"), "--parallelism", "2"]) == 0
    a, b = tmp_path / "out", tmp_path / "again"
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
    for f in sorted((a / "traces").iterdir()):
        assert f.read_bytes() == (b / "traces" / f.name).read_bytes()


def test_run_config_errors(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("[victim]\nflavour = sour\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert "unknown key victim.flavour" in capsys.readouterr().err
    assert _run(tmp_path, "--override", "nonsense=1") == 2


def test_run_reports_failed_episode(tmp_path):
    assert _run(tmp_path, "--override", "eta=1e308", "--override", "policies=null") == 1


def test_theory_defaults(capsys):
    assert main(["theory", "--trials", "60", "--coverage-trials", "2000"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and all(line.startswith("PASS") for line in lines)


def test_theory_writes_reports(tmp_path):
    assert main(["theory", "--trials", "5", "--coverage-trials", "50", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "simulation_bound.csv").is_file() and (tmp_path / "concentration.csv").is_file()


def test_theory_same_seed_same_reports(tmp_path):
    for name in ("a", "b"):
        assert main(["theory", "--trials", "10", "--coverage-trials", "200", "--seed", "4",
                     "--out", str(tmp_path / name)]) == 0
    for f in ("simulation_bound.csv", "concentration.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


@pytest.mark.parametrize("args", [["--trials", "0"], ["--N", "1"], ["--delta", "1.5"]])
def test_theory_rejects_bad_values(args):
    assert main(["theory"] + args) == 2


def test_ingest(tmp_path):
    src = tmp_path / "in.csv"
    g = np.random.default_rng(0)
    rows = ["f1,f2,cls"] + [f"{a},{b},{i % 2}" for i, (a, b) in enumerate(g.normal(size=(20, 2)))]
    src.write_text("\n".join(rows) + "\n")
    out = tmp_path / "out.csv"
    assert main(["ingest", "--csv", str(src), "--header", "--label-column", "cls",
                 "--label-map", "0:-1,1:1", "--out", str(out)]) == 0
    pts = load_csv(out, "label", header=True)
    X = np.stack([p.features for p in pts])
    assert X.shape == (20, 2)
    assert np.max(np.abs(X.mean(axis=0))) <= 1e-10
    assert np.max(np.abs(X.std(axis=0) - 1)) <= 1e-8
    assert [p.label for p in pts] == [-1.0 if i % 2 == 0 else 1.0 for i in range(20)]
    # already normalised data passes through unchanged
    out2 = tmp_path / "out2.csv"
    assert main(["ingest", "--csv", str(out), "--header", "--label-column", "label", "--out", str(out2)]) == 0
    X2 = np.stack([p.features for p in load_csv(out2, "label", header=True)])
    assert np.max(np.abs(X2 - X)) <= 1e-10


def test_ingest_errors(tmp_path, capsys):
    src = tmp_path / "in.csv"
    src.write_text("1,2\n3,x\n")
    assert main(["ingest", "--csv", str(src), "--out", str(tmp_path / "o.csv")]) == 2
    assert "row 2" in capsys.readouterr().err
    assert main(["ingest", "--csv", str(tmp_path / "none.csv"), "--out", str(tmp_path / "o.csv")]) == 2
