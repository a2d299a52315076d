import json
import xml.etree.ElementTree as ET

import pytest

from botlens import reports
from botlens.cli import run
from botlens.errors import DataError

EPOCH = "1700000000"


@pytest.fixture
def epoch(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", EPOCH)


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "d.csv"
    assert run(["synth", "--seed", "5", "--n", "600", "-o", str(path)]) == 0
    return path


def test_timestamps_follow_source_date_epoch(epoch):
    assert reports.now() == "2023-11-14T22:13:20Z"
    doc = reports.stamp({"a": 1}, reports.now())
    assert doc["timestamps"] == {"started": "2023-11-14T22:13:20Z", "finished": "2023-11-14T22:13:20Z"}


def test_dumps_refuses_nan():
    with pytest.raises(ValueError):
        reports.dumps({"x": float("nan")})


def test_read_json_error_codes(tmp_path):
    with pytest.raises(DataError) as e:
        reports.read_json(tmp_path / "nope.json")
    assert e.value.code == "missing_file"
    bad = tmp_path / "bad.json"
    bad.write_text("[1,")
    with pytest.raises(DataError) as e:
        reports.read_json(bad)
    assert e.value.code == "bad_report"


def test_bar_chart_is_wellformed_svg():
    svg = reports.bar_chart_svg(["a", "b<c", "d"], [0.3, 0.1, 0.6], "weights & more", top=2)
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    text = " ".join(t.text or "" for t in root.iter() if t.tag.endswith("text"))
    assert "d" in text and "b<c" not in text  # only the top two bars are drawn


def test_grouped_chart_is_wellformed_svg():
    svg = reports.grouped_bar_svg(["accuracy", "false positives"], ["binary", "three-class"],
                                  [[0.95, 0.97], [12, 7]], "refinement")
    ET.fromstring(svg)


def test_text_rendering_lists_ranking():
    doc = {"method": "fi", "weights": [{"feature": "a", "value": 0.7, "raw": 0.7},
                                       {"feature": "b", "value": 0.3, "raw": 0.3}],
           "ranking": ["a", "b"]}
    out = reports.render_text(doc)
    assert out.index("a") < out.index("b")
    ET.fromstring(reports.render_svg(doc))


# -- command line ----------------------------------------------------------


def test_usage_errors_exit_1(tmp_path):
    assert run(["train", "--data", "x.csv", "-o", str(tmp_path / "m.json")]) == 1  # no --seed
    assert run(["synth", "--seed", "1", "--bogus", "-o", str(tmp_path / "d.csv")]) == 1
    assert run([]) == 1


def test_lime_without_instance_is_usage_error(data_csv, tmp_path):
    assert run(["explain", "--seed", "1", "--data", str(data_csv), "--method", "lime",
                "-o", str(tmp_path / "e.json")]) == 1


def test_data_errors_exit_2(tmp_path):
    assert run(["train", "--seed", "1", "--data", str(tmp_path / "missing.csv"), "-o", str(tmp_path / "m.json")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("player_id,label\nr0,human\n")
    assert run(["train", "--seed", "1", "--data", str(bad), "-o", str(tmp_path / "m.json")]) == 2
    assert run(["report", str(tmp_path / "missing.json"), "--text", str(tmp_path / "t.txt")]) == 2


def test_numerical_errors_exit_3(data_csv, tmp_path):
    argv = ["train", "--seed", "1", "--data", str(data_csv), "--model", "mlp", "--optimizer", "sgd",
            "--lr", "1e200", "--epochs", "3", "-o", str(tmp_path / "m.json")]
    assert run(argv) == 3


def _pipeline(data_csv, out, seed="3"):
    model = out / "m.json"
    assert run(["train", "--seed", seed, "--data", str(data_csv), "--trees", "5", "-o", str(model),
                "--metrics", str(out / "metrics.json")]) == 0
    assert run(["explain", "--seed", seed, "--data", str(data_csv), "--method", "fi", "--model-file", str(model),
                "-o", str(out / "fi.json"), "--svg", str(out / "fi.svg")]) == 0
    assert run(["ablate", "--seed", seed, "--data", str(data_csv), "--method", "fi", "--trees", "5",
                "-o", str(out / "ablate.json")]) == 0
    assert run(["refine", "--seed", seed, "--data", str(data_csv), "--trees", "5", "--max-fps", "5",
                "--samples", "300", "-o", str(out / "refine.json"), "--svg", str(out / "refine.svg")]) == 0
    assert run(["report", str(out / "refine.json"), "--text", str(out / "refine.txt")]) == 0
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_pipeline_is_byte_identical(data_csv, tmp_path, epoch):
    # same output paths both times, since reports echo their arguments
    a = _pipeline(data_csv, tmp_path)
    b = _pipeline(data_csv, tmp_path)
    assert a.keys() == b.keys()
    for name in a:
        assert a[name] == b[name], name
    refine = json.loads(a["refine.json"])
    assert refine["timestamps"]["started"] == "2023-11-14T22:13:20Z"
    assert refine["seed"] == 3
    assert {"baseline", "treatment", "delta", "config"} <= refine.keys()
    ET.fromstring(a["fi.svg"])
    ET.fromstring(a["refine.svg"])
