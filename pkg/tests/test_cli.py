import json
import subprocess
import sys

import pytest

from mapverify import formats
from mapverify.cli import main
from mapverify.evaluation import dominance
from mapverify.pipeline import Frame

from conftest import make_ego, make_track

SMALL = {"seed": 3, "style": "city", "n_frames": 4}


@pytest.fixture
def scenario_dir(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SMALL))
    assert main(["gen", "--spec", str(spec), "--out-dir", str(tmp_path / "gen")]) == 0
    return tmp_path / "gen"


def test_gen_writes_all_files(scenario_dir):
    names = sorted(p.name for p in scenario_dir.iterdir())
    assert names == ["labels.jsonl", "log.jsonl", "map.json", "spec.json"]
    spec = json.loads((scenario_dir / "spec.json").read_text())
    assert spec["seed"] == 3 and spec["n_frames"] == 4
    assert len(formats.load_log(scenario_dir / "log.jsonl")) == 4


def test_verify_neutral_log(tmp_path, capsys):
    (tmp_path / "map.json").write_text(json.dumps({"buildings": [], "lanes": []}))
    frames = [Frame(float(k), make_ego(), [make_track(f"t{k}{i}", i * 3.0, 1.0) for i in range(3)]) for k in range(2)]
    formats.save_log(frames, tmp_path / "log.jsonl")
    code = main(["verify", "--map", str(tmp_path / "map.json"), "--log", str(tmp_path / "log.jsonl"), "--out", str(tmp_path / "out.jsonl")])
    assert code == 0
    records = [json.loads(l) for l in (tmp_path / "out.jsonl").read_text().splitlines()]
    assert len(records) == 2
    for rec in records:
        assert all(e["eta"] == 0.5 and e["kept"] for e in rec["entries"])
        assert rec["kept"] == [e["label"] for e in rec["entries"]]
        assert set(rec["entries"][0]["influences"]) >= {"p_building", "p_on_road", "associated_lane_id"}


def test_sweep_iim_and_bn_agree(scenario_dir, tmp_path):
    out = tmp_path / "roc"
    args = ["sweep", "--map", str(scenario_dir / "map.json"), "--log", str(scenario_dir / "log.jsonl"),
            "--labels", str(scenario_dir / "labels.jsonl"), "--out-dir", str(out)]
    assert main(args) == 0
    assert sorted(p.name for p in out.iterdir()) == ["roc_baseline.csv", "roc_bn.csv", "roc_bne.csv", "roc_iim.csv"]
    iim = formats.read_roc_csv(out / "roc_iim.csv")
    bn = formats.read_roc_csv(out / "roc_bn.csv")
    assert len(iim) == len(bn) == 101
    for a, b in zip(iim, bn):
        for key in a:
            assert a[key] == pytest.approx(b[key], abs=1e-9)


def _curve_from_rows(rows):
    from mapverify.evaluation import Metrics, RocCurve

    return RocCurve(tuple(Metrics(**row) for row in rows))


def test_gen_then_sweep_dominates_baseline(tmp_path):
    assert main(["gen", "--out-dir", str(tmp_path / "g")]) == 0
    g = tmp_path / "g"
    assert main(["sweep", "--map", str(g / "map.json"), "--log", str(g / "log.jsonl"), "--labels",
                 str(g / "labels.jsonl"), "--models", "iim,baseline", "--out-dir", str(tmp_path / "r")]) == 0
    eta = _curve_from_rows(formats.read_roc_csv(tmp_path / "r" / "roc_iim.csv"))
    base = _curve_from_rows(formats.read_roc_csv(tmp_path / "r" / "roc_baseline.csv"))
    assert dominance(eta, base) >= 0.9


def test_sweep_rejects_unknown_model(scenario_dir, tmp_path, capsys):
    args = ["sweep", "--map", str(scenario_dir / "map.json"), "--log", str(scenario_dir / "log.jsonl"),
            "--labels", str(scenario_dir / "labels.jsonl"), "--models", "iim,oracle", "--out-dir", str(tmp_path)]
    assert main(args) == 1
    assert "oracle" in capsys.readouterr().err


def test_inspect(scenario_dir, capsys):
    assert main(["inspect", "--map", str(scenario_dir / "map.json"), "--point", "0,-1.75"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["p_building_field"] < 1e-6
    assert report["nearest_road"]["signed_distance"] < 0
    assert report["nearest_lane"]["p_lane_pos"] == pytest.approx(1.0, abs=1e-3)
    assert "nearest_building" in report


def test_inspect_bad_point(scenario_dir, capsys):
    assert main(["inspect", "--map", str(scenario_dir / "map.json"), "--point", "zero"]) == 1
    assert "--point" in capsys.readouterr().err


def test_input_errors_exit_1(tmp_path, capsys):
    (tmp_path / "map.json").write_text(json.dumps({"buildings": [], "lanes": [{"id": "x", "road_id": "r", "width": 0, "centerline": [[0, 0], [1, 0]]}]}))
    (tmp_path / "log.jsonl").write_text("")
    code = main(["verify", "--map", str(tmp_path / "map.json"), "--log", str(tmp_path / "log.jsonl"), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "map.lanes[0]" in capsys.readouterr().err
    assert main(["verify", "--map", str(tmp_path / "missing.json"), "--log", "x", "--out", "y"]) == 1
    (tmp_path / "spec.json").write_text(json.dumps({"n_frames": -1}))
    assert main(["gen", "--spec", str(tmp_path / "spec.json"), "--out-dir", str(tmp_path / "g")]) == 1


def test_internal_error_exit_2(monkeypatch, tmp_path, capsys):
    import mapverify.cli as cli

    def broken(args):
        raise AssertionError("invariant")

    monkeypatch.setattr(cli, "cmd_gen", broken)
    assert cli.main(["gen", "--out-dir", str(tmp_path)]) == 2
    assert "internal error: invariant" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mapverify", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "verify" in proc.stdout and "sweep" in proc.stdout


def test_pipeline_is_deterministic(tmp_path):
    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps(SMALL))
        assert main(["gen", "--spec", str(spec), "--out-dir", str(d)]) == 0
        assert main(["verify", "--map", str(d / "map.json"), "--log", str(d / "log.jsonl"), "--out", str(d / "verified.jsonl")]) == 0
        assert main(["sweep", "--map", str(d / "map.json"), "--log", str(d / "log.jsonl"), "--labels",
                     str(d / "labels.jsonl"), "--out-dir", str(d)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outputs[0] == outputs[1]
    assert len(outputs[0]) == 9
