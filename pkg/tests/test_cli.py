import json
import re
import subprocess
import sys

import pytest

from glucosindy.cli import main
from glucosindy.ingest import format_timestamp

START = 1577836800.0


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert run("synth", "--out", out) == 0
    return out


def equation_terms(line):
    rhs = line.split("=", 1)[1]
    return set(re.findall(r"·([^\s]+)", rhs))


def test_synth_then_fit_recovers_support(synth_dir, tmp_path, capsys):
    capsys.readouterr()
    assert run("fit", synth_dir / "synth.csv", "--model-out", tmp_path / "m.json") == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("dG/dt")]
    assert len(lines) == 1
    assert equation_terms(lines[0]) == {"1", "G", "I_act", "C_act"}
    model = json.loads((tmp_path / "m.json").read_text())
    assert model["states"] == ["G"] and model["controls"] == ["I_act", "C_act"]


def test_fit_empty_csv(tmp_path, capsys):
    data = tmp_path / "empty.csv"
    data.write_text("")
    assert run("fit", data, "--model-out", tmp_path / "m.json") != 0
    assert "error" in capsys.readouterr().err
    assert sorted(p.name for p in tmp_path.iterdir()) == ["empty.csv"]


def test_fit_header_only(tmp_path):
    data = tmp_path / "h.csv"
    data.write_text("timestamp,kind,value\n")
    assert run("fit", data, "--model-out", tmp_path / "m.json") == 3
    assert not (tmp_path / "m.json").exists()


def test_fit_degenerate_exit_code(tmp_path, capsys):
    rows = [f"{format_timestamp(START + 300 * k)},glucose,100" for k in range(100)]
    data = tmp_path / "flat.csv"
    data.write_text("timestamp,kind,value\n" + "\n".join(rows) + "\n")
    assert run("fit", data, "--model-out", tmp_path / "m.json") == 2
    captured = capsys.readouterr()
    assert "dG/dt = 0" in captured.out
    assert "empty support" in captured.err


def test_predict_writes_forecast(synth_dir, tmp_path):
    run("fit", synth_dir / "synth.csv", "--model-out", tmp_path / "m.json")
    origin = format_timestamp(START + 36 * 3600)
    assert run("predict", tmp_path / "m.json", synth_dir / "synth.csv", "--origin", origin,
               "--out", tmp_path / "f.csv") == 0
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "t_iso,G,G_observed"
    assert lines[1].startswith(origin)
    assert len(lines) == 1 + 73 + 1
    assert lines[-1] == "# status: completed"
    pred, obs = map(float, lines[-2].split(",")[1:])
    assert abs(pred - obs) < 1.0


def test_predict_past_end(synth_dir, tmp_path, capsys):
    run("fit", synth_dir / "synth.csv", "--model-out", tmp_path / "m.json")
    origin = format_timestamp(START + 44 * 3600)
    code = run("predict", tmp_path / "m.json", synth_dir / "synth.csv", "--origin", origin,
               "--out", tmp_path / "f.csv")
    assert code == 1
    assert "extends past the end of the data" in capsys.readouterr().err
    assert not (tmp_path / "f.csv").exists()


def test_evaluate_outputs(synth_dir, tmp_path, capsys):
    run("fit", synth_dir / "synth.csv", "--model-out", tmp_path / "m.json", "--fit.train_fraction", "0.75")
    capsys.readouterr()
    assert run("evaluate", tmp_path / "m.json", synth_dir / "synth.csv", "--report-out", tmp_path / "r.json") == 0
    out = capsys.readouterr().out
    assert "model RMSE" in out and "baseline RMSE" in out
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["n_origins"] == 6
    assert report["rmse"] < report["baseline_rmse"]
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 7


def test_every_command_is_byte_reproducible(tmp_path):
    def pipeline(d):
        d.mkdir()
        assert run("synth", "--out", d, "--synth.noise_sd", "2", "--synth.seed", "3") == 0
        data = d / "synth.csv"
        assert run("fit", data, "--model-out", d / "m.json", "--report", d / "ingest.json") == 0
        assert run("predict", d / "m.json", data, "--origin", format_timestamp(START + 40 * 3600),
                   "--out", d / "f.csv") == 0
        assert run("evaluate", d / "m.json", data, "--report-out", d / "r.json") == 0
        return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    first, second = pipeline(tmp_path / "a"), pipeline(tmp_path / "b")
    assert sorted(first) == ["f.csv", "ingest.json", "m.json", "r.csv", "r.json", "synth.csv", "true_model.json"]
    assert first == second


@pytest.mark.parametrize("argv", [
    ["fit", "x.csv", "--model-out", "m.json", "--stlsq.lambda", "0.1"],
    ["synth", "--out", ".", "--synth.p1=-1"],
    ["synth", "--out", ".", "--synth.seed"],
    ["fit", "x.csv"],
    ["launch"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1


def test_missing_input_file(tmp_path, capsys):
    assert run("fit", tmp_path / "nope.csv", "--model-out", tmp_path / "m.json") == 3


def test_config_file_and_print(tmp_path, capsys):
    assert run("config") == 0
    text = capsys.readouterr().out
    assert "[stlsq]" in text and "threshold = 0.15" in text
    cfg = tmp_path / "run.ini"
    cfg.write_text(text.replace("duration_hours = 48.0", "duration_hours = 6.0"))
    assert run("synth", "--out", tmp_path / "o", "--config", cfg) == 0
    assert len((tmp_path / "o" / "synth.csv").read_text().splitlines()) > 72


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "glucosindy", "synth", "--out", str(tmp_path), "--synth.duration_hours", "4"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "true_model.json").exists()
