import csv
import json

import pytest

from lobound.cli import main


def test_eval_exact_kernel(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main([
        "eval", "--mu", "ball", "--nu", "ball", "--exact-kernel",
        "-M", "100", "-R", "10", "--out", str(out),
    ])
    assert code == 0
    text = capsys.readouterr().out
    assert "constant          : 1.604" in text
    doc = json.loads(out.read_text())
    assert doc["report"]["feasible"] is True
    assert doc["report"]["constant"] == pytest.approx(1.604358, abs=5e-5)
    assert doc["manifest"]["subcommand"] == "eval"
    assert doc["manifest"]["artifact_version"]


def test_eval_exact_kernel_rejects_files(tmp_path):
    code = main([
        "eval", "--mu", str(tmp_path / "nope.json"), "--nu", "ball",
        "--exact-kernel", "-M", "20", "-R", "2",
    ])
    assert code == 2


def test_eval_expansion_path(capsys):
    code = main(["eval", "--mu", "ball", "--nu", "delta", "-K", "20",
                 "-M", "50", "-R", "4"])
    assert code == 0
    assert "feasible          : True" in capsys.readouterr().out


def test_optimize_eval_round_trip(tmp_path, capsys):
    mu_file = tmp_path / "mu.json"
    nu_file = tmp_path / "nu.json"
    traj = tmp_path / "traj.csv"
    summary = tmp_path / "opt.json"
    code = main([
        "optimize", "-K", "5", "-M", "40", "-R", "4", "--max-evals", "90",
        "--restarts", "1", "--seed", "3", "--out-mu", str(mu_file),
        "--out-nu", str(nu_file), "--trajectory", str(traj),
        "--out", str(summary),
    ])
    assert code == 0
    capsys.readouterr()
    best = json.loads(summary.read_text())["report"]["constant"]

    report_file = tmp_path / "recheck.json"
    code = main([
        "eval", "--mu", str(mu_file), "--nu", str(nu_file),
        "-M", "40", "-R", "4", "--out", str(report_file),
    ])
    assert code == 0
    capsys.readouterr()
    redone = json.loads(report_file.read_text())["report"]["constant"]
    assert redone == pytest.approx(best, abs=1e-10)

    with open(traj) as fh:
        comment = fh.readline()
        assert comment.startswith("#")
        rows = list(csv.reader(fh))
    assert rows[0] == ["evaluation_index", "constant"]
    assert len(rows) > 10


def test_reproduce_table2_small(tmp_path, capsys):
    out = tmp_path / "t2.csv"
    code = main(["reproduce", "--table", "2", "--budget", "small",
                 "--out", str(out)])
    assert code == 0
    capsys.readouterr()
    with open(out) as fh:
        assert fh.readline().startswith("#")
        rows = list(csv.DictReader(fh))
    assert len(rows) == 8  # M in {100, 200} x R in {10, 20, 30, 40}
    for row in rows:
        assert float(row["abs_deviation"]) < 1e-4


def test_exchange_command(tmp_path, capsys):
    out = tmp_path / "exchange.json"
    curve = tmp_path / "curve.csv"
    code = main(["exchange", "--out", str(out), "--csv", str(curve)])
    assert code == 0
    text = capsys.readouterr().out
    assert "1.248" in text and "1.208" in text
    doc = json.loads(out.read_text())
    assert doc["report"]["J_value"] == pytest.approx(0.2887, abs=1e-4)
    with open(curve) as fh:
        fh.readline()
        rows = list(csv.DictReader(fh))
    assert rows[0].keys() == {"a", "b_opt", "g"}
    assert float(rows[-1]["g"]) == pytest.approx(0.0, abs=1e-10)


def test_classic_command(tmp_path, capsys):
    out = tmp_path / "classic.json"
    curve = tmp_path / "majorants.csv"
    code = main(["classic", "--mu", "ball", "-K", "200", "--variant", "xi",
                 "--grid-points", "20000", "--out", str(out),
                 "--csv", str(curve)])
    assert code == 0
    assert "1.67" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["constant"] == pytest.approx(1.68, abs=1e-2)
    with open(curve) as fh:
        fh.readline()
        rows = list(csv.DictReader(fh))
    assert rows[0].keys() == {"a", "chi", "zeta", "xi"}


def test_reproduce_table4_with_stored_measures(tmp_path, capsys):
    # table 4 re-certifies stored optimal measures across the (M, R) grid;
    # use small stand-in measures so the run stays cheap
    import numpy as np

    from lobound.measures import RadialMeasure
    from lobound.storage import save_measure

    mu_file = tmp_path / "mu.json"
    nu_file = tmp_path / "nu.json"
    save_measure(mu_file, RadialMeasure(K=5, delta_weight=0.0,
                                        weights=np.array([0.5, 1.0, 1.5, 1.0, 1.0])))
    save_measure(nu_file, RadialMeasure(K=5, delta_weight=0.2,
                                        weights=np.array([0.4, 0.8, 1.2, 0.8, 0.8])))
    out = tmp_path / "t4.csv"
    code = main(["reproduce", "--table", "4", "--budget", "small",
                 "--mu-file", str(mu_file), "--nu-file", str(nu_file),
                 "--out", str(out)])
    assert code == 0
    capsys.readouterr()
    with open(out) as fh:
        fh.readline()
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4  # M in {100, 200} x R in {10, 20}
    assert all(r["reference"] for r in rows)
    assert all(float(r["computed"]) > 1.5 for r in rows)


def test_eval_delta_charge_rejected(tmp_path):
    with pytest.raises(ValueError, match="point mass"):
        main(["eval", "--mu", "delta", "--nu", "ball", "-M", "20", "-R", "2"])
