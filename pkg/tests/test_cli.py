import csv
import io
import json
import subprocess
import sys

import pytest

from hiddensplit import LEFT, RnTParams, rnt_joint
from hiddensplit.cli import main
from hiddensplit.figures import FIGURES


def write_cfg(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


RNT = {"model": "rnt", "params": {"nu": 1.0, "alpha": 2.0, "D": 0.1, "L": 1.0},
       "sweep": {"var": "x0", "start": -0.5, "stop": 0.5, "num": 11}}


def test_compute_rnt_columns_and_values(tmp_path, capsys):
    assert main(["compute", "--config", write_cfg(tmp_path, RNT)]) == 0
    rows = read_csv(capsys.readouterr().out)
    assert len(rows) == 11
    assert list(rows[0]) == ["x0", "pi_minus_from_plus", "pi_minus_from_minus", "pi_plus_from_plus",
                             "pi_plus_from_minus", "pi_sum_from_plus", "pi_sum_from_minus"]
    p = RnTParams(1.0, 2.0, 0.1, 1.0)
    mid = rows[5]
    assert float(mid["x0"]) == 0.0
    assert float(mid["pi_minus_from_plus"]) == pytest.approx(rnt_joint(p, 0.0, 1, LEFT, -1), abs=1e-15)


def test_compute_is_byte_stable(tmp_path):
    cfg = write_cfg(tmp_path, RNT)
    outs = []
    for i, threads in enumerate(("1", "3")):
        out = tmp_path / f"o{i}.csv"
        assert main(["compute", "--config", cfg, "--out", str(out), "--threads", threads]) == 0
        outs.append(out.read_bytes())
    # threads appear in the recorded config; the data rows must not differ
    strip = [b"\n".join(line for line in o.splitlines() if not line.startswith(b"#")) for o in outs]
    assert strip[0] == strip[1]


@pytest.mark.parametrize("model,params,cols", [
    ("ratchet", {"h": 2.0, "a": 1.0, "r": 1.0, "D": 1.0, "L": 4.0}, 7),
    ("resetting", {"D": 1.0, "r": 2.0, "L": 1.0, "reset": {"type": "uniform", "lo": -0.2, "hi": 0.3}}, 6),
    ("ripening", {"r": 1.0, "s": 10.0, "D": 0.3, "L": 1.0, "kappa_right": 5.0}, 7),
    ("ou", {"mu": 1.0, "D_Y": 1.0, "D": 1.0, "L": 2.0}, 5),
])
def test_compute_other_models(tmp_path, capsys, model, params, cols):
    cfg = {"model": model, "params": params, "sweep": {"var": "x0", "values": [-0.2, 0.0, 0.3]}}
    assert main(["compute", "--config", write_cfg(tmp_path, cfg)]) == 0
    rows = read_csv(capsys.readouterr().out)
    assert len(rows) == 3 and len(rows[0]) == cols


def test_parameter_sweep_json(tmp_path, capsys):
    cfg = {"model": "rnt", "params": {"nu": 1.0, "alpha": 1.0, "D": 1.0}, "x0": 0.0,
           "sweep": {"var": "L", "start": 0.1, "stop": 10, "num": 5, "log": True}}
    assert main(["compute", "--config", write_cfg(tmp_path, cfg), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc is not None


@pytest.mark.parametrize("cfg,field", [
    ({"model": "rnt", "params": {"nu": 1.0}, "bogus": 1}, "bogus"),
    ({"model": "rnt", "params": {"nu": 1.0, "speed": 2}}, "params.speed"),
    ({"model": "ratchet", "params": {"h": 1.0, "a": 4.0, "r": 1.0, "D": 1.0, "L": 4.0}}, "|a| < L/2"),
    ({"model": "ripening", "params": {"L": 1.0, "kappa_left": 0, "kappa_right": 0}}, "params"),
    ({"model": "quantum"}, "model"),
    ({"model": "rnt", "params": {"nu": 1.0, "alpha": 1.0, "D": 1.0}, "mc": {"dt": -1}}, "mc"),
])
def test_config_errors(tmp_path, capsys, cfg, field):
    assert main(["compute", "--config", write_cfg(tmp_path, cfg)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("config error:") and field in err


def test_invalid_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{model: rnt")
    assert main(["compute", "--config", str(path)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_missing_config(capsys):
    assert main(["compute"]) == 2


@pytest.mark.parametrize("fig_id", sorted(FIGURES))
def test_figure_ids(tmp_path, fig_id):
    out = tmp_path / f"{fig_id}.csv"
    assert main(["figure", fig_id, "--out", str(out)]) == 0
    rows = read_csv(out.read_text())
    assert rows and all(v != "" for v in rows[0].values())


def test_unknown_figure(capsys):
    assert main(["figure", "fig99"]) == 2
    assert "fig99" in capsys.readouterr().err


def test_figure_with_markers(tmp_path):
    out = tmp_path / "f.csv"
    assert main(["figure", "fig7", "--trials", "500", "--dt", "1e-3", "--seed", "3", "--out", str(out)]) == 0
    text = out.read_text()
    assert "_se" in text.splitlines()[[i for i, l in enumerate(text.splitlines()) if not l.startswith("#")][0]]


def test_simulate(tmp_path, capsys):
    cfg = dict(RNT, x0=0.0, y0=-1)
    del cfg["sweep"]
    assert main(["simulate", "--config", write_cfg(tmp_path, cfg), "--trials", "2000", "--dt", "1e-3",
                 "--seed", "4"]) == 0
    out = capsys.readouterr().out
    rows = read_csv(out)
    assert sum(int(r["count"]) for r in rows) == 2000
    assert "# seed=4" in out


def test_validate_quick(capsys):
    assert main(["validate", "rnt", "--budget", "quick"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_validate_json(tmp_path):
    out = tmp_path / "v.json"
    assert main(["validate", "resetting", "--budget", "quick", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["passed"] and rep["comparisons"]


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "hiddensplit.cli", "figure", "fig4a"], capture_output=True, text=True)
    assert r.returncode == 0 and "L" in r.stdout
