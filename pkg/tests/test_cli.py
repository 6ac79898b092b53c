import csv
import json
from pathlib import Path

import pytest

from hagprop.cli import EXIT_CODES, main

SMALL = str(Path(__file__).parent / "data" / "small.cfg")


def _rows(path):
    with open(path) as fh:
        return [{k: v for k, v in r.items() if k != "runtime"} for r in csv.DictReader(fh)]


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["bogus"])
    assert err.value.code == 2


def test_exit_codes_documented():
    assert set(EXIT_CODES) == set(range(9))


def test_missing_config_exits_3(tmp_path):
    assert main(["run", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 3
    assert main(["run", "--scenario", "no_such_scenario", "--out", str(tmp_path)]) == 3


def test_incompatible_packet_exits_4(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text(Path(SMALL).read_text().replace("c0 = ground", "A = 2\nB = 1\nc0 = ground"))
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 4
    assert "compatibility condition" in capsys.readouterr().err


def test_unknown_key_exits_4_with_line(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[scenario]\nname = x\nfoo = 1\n")
    assert main(["sweep-orders", "--config", str(bad), "--out", str(tmp_path / "o")]) == 4
    assert "bad.cfg:3" in capsys.readouterr().err


def test_run_small_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    assert main(["run", SMALL, "--out", str(out)]) == 0
    for name in ("sweep.csv", "summary.json", "manifest.json", "trajectory.csv"):
        assert (out / name).is_file()
    rows = _rows(out / "sweep.csv")
    assert [int(r["N"]) for r in rows] == [0, 1, 2]
    for r in rows:
        assert float(r["error"]) <= float(r["bound"]) + 2 * float(r["floor"])
    man = json.loads((out / "manifest.json").read_text())
    assert "tolerances" in man and "reference_halving_tol" in man["tolerances"]
    assert man["config_sha256"] and man["threads"] == 1
    for name, digest in man["files"].items():
        assert len(digest) == 64


def test_sweep_orders_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sweep-orders", SMALL, "--no-residual", "--out", str(a)]) == 0
    assert main(["sweep-orders", SMALL, "--no-residual", "--out", str(b)]) == 0
    assert _rows(a / "orders_eps0.3.csv") == _rows(b / "orders_eps0.3.csv")


def test_threads_do_not_change_results(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["sweep-epsilon", SMALL, "--eps", "0.3", "0.25", "--no-residual"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--threads", "2"]) == 0
    assert _rows(a / "sweep.csv") == _rows(b / "sweep.csv")


def test_emit_plot_data(tmp_path):
    src = tmp_path / "sweep.csv"
    src.write_text("scenario,eps,N,error,bound,floor,runtime\n"
                   "x,0.3,0,0.1,1,0,0\nx,0.3,1,0.01,1,0,0\nx,0.2,0,0.05,1,0,0\nx,0.2,1,0.001,1,0,0\n")
    assert main(["emit-plot-data", "--input", str(src), "--out", str(tmp_path / "plot")]) == 0
    lines = (tmp_path / "plot" / "min_error_vs_inv_eps2.dat").read_text().split("\n")
    assert [float(v) for v in lines[1].split()] == pytest.approx([25.0, 0.001])
    assert main(["emit-plot-data", "--input", str(tmp_path / "missing.csv")]) == 3


def test_localization(tmp_path, capsys):
    assert main(["localization", SMALL, "--b", "0.5", "--eps", "0.3", "0.2", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "localization.csv")
    assert len(rows) == 2
    for r in rows:
        assert 0.5 <= float(r["mass"]) / float(r["oracle"]) <= 2.0


@pytest.mark.slow
def test_validate_and_injected_failure(tmp_path, capsys):
    assert main(["validate", "--out", str(tmp_path)]) == 0
    assert main(["validate", "--inject", "cond1"]) == 1
    report = capsys.readouterr().out
    failed = [ln for ln in report.splitlines() if ln.startswith("FAIL")]
    assert failed and all("[wavepacket]" in ln for ln in failed)
