import subprocess
import sys

import numpy as np
import pytest

from conftest import ENVELOPE, POTASSIUM, THREE
from monoport.cli import EXIT_IO, EXIT_NOCONV, EXIT_OK, EXIT_STRUCT, _grid, main


@pytest.fixture
def netlist(tmp_path):
    def make(text, name="c.net"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return make


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def test_solve_writes_waveform(netlist, tmp_path, capsys):
    out, trace = tmp_path / "o.csv", tmp_path / "t.csv"
    code = main(["solve", "--netlist", netlist(ENVELOPE), "--algorithm", "fb", "--alpha", "1",
                 "--tol", "1e-8", "--steps", "100", "--out", str(out), "--trace", str(trace)])
    assert code == EXIT_OK
    header, data = read_csv(out)
    assert header == ["t", "input", "output"] and data.shape == (100, 3)
    np.testing.assert_allclose(data[:, 1], np.sin(2 * np.pi * data[:, 0]), atol=1e-15)
    err = capsys.readouterr().err
    assert "converged" in err and "iterations=" in err and "wall_time=" in err
    assert trace.read_text().startswith("k,max_update,residual")


def test_solve_is_byte_identical(netlist, tmp_path):
    args = ["solve", "--netlist", netlist(THREE), "--alpha", "0.27", "--tol", "1e-9", "--steps", "64"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_solve_full_precision(netlist, tmp_path):
    out = tmp_path / "o.csv"
    main(["solve", "--netlist", netlist("series(resistor(R=3), resistor(R=4))"), "--steps", "8",
          "--drive", "sine:1,1,0,0", "--out", str(out)])
    _, data = read_csv(out)
    from monoport.signal import Sine, sample_waveform

    np.testing.assert_array_equal(data[:, 1], sample_waveform(Sine(), 8).values)
    np.testing.assert_allclose(data[:, 2], data[:, 1] / 7.0, atol=1e-6)


def test_non_convergence_still_writes(netlist, tmp_path):
    out, trace = tmp_path / "o.csv", tmp_path / "t.csv"
    code = main(["solve", "--netlist", netlist(ENVELOPE), "--algorithm", "dr", "--alpha", "0.01",
                 "--max-iter", "5", "--steps", "50", "--out", str(out), "--trace", str(trace)])
    assert code == EXIT_NOCONV
    assert read_csv(out)[1].shape == (50, 3)
    assert len(trace.read_text().splitlines()) == 6


def test_csv_drive(netlist, tmp_path):
    drive = tmp_path / "u.csv"
    t = np.arange(16) / 16
    drive.write_text("t,value\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(t, np.cos(2 * np.pi * t))))
    out = tmp_path / "o.csv"
    code = main(["solve", "--netlist", netlist("series(resistor(R=1), resistor(R=1))"), "--steps", "16",
                 "--drive", f"csv:{drive}", "--out", str(out)])
    assert code == EXIT_OK
    np.testing.assert_allclose(read_csv(out)[1][:, 2], 0.5 * np.cos(2 * np.pi * t), atol=1e-6)


def test_tune(netlist, tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["tune", "--netlist", netlist(THREE), "--out", str(out)]) == EXIT_OK
    header, data = read_csv(out)
    assert header == ["alpha", "rho"]
    best = data[np.argmin(data[:, 1]), 0]
    assert 0.22 <= best <= 0.32
    assert "best alpha=0.27" in capsys.readouterr().err


def test_srg(netlist, tmp_path, capsys):
    out = tmp_path / "s.csv"
    code = main(["srg", "--netlist", netlist("memristor()"), "--count", "200", "--out", str(out)])
    assert code == EXIT_OK
    header, data = read_csv(out)
    assert header[:7] == ["re", "im", "gain", "angle", "alpha", "gamma", "delta"]
    assert data.shape[0] == 200
    assert "mu_hat=" in capsys.readouterr().err


def test_check(netlist, capsys):
    assert main(["check", "--netlist", netlist(THREE), "--steps", "256", "--alpha", "0.25"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "series(resistor(R=1.0)" in text
    assert "R0: mu=1 lambda=2" in text
    assert "contraction spectral radius: 0.915959" in text


def test_check_two_element_ranges(netlist, capsys):
    main(["check", "--netlist", netlist(POTASSIUM), "--steps", "64"])
    text = capsys.readouterr().out
    assert "fb step range" in text and "dr step range" in text


def test_empty_netlist(netlist, capsys):
    assert main(["solve", "--netlist", netlist("")]) == EXIT_STRUCT
    assert "line 1, column 1" in capsys.readouterr().err


def test_structural_error(netlist):
    text = "series(parallel(diode(), resistor(R=1)), parallel(diode(), resistor(R=2)))"
    assert main(["solve", "--netlist", netlist(text)]) == EXIT_STRUCT
    assert main(["tune", "--netlist", netlist("resistor(R=1)")]) == EXIT_STRUCT


def test_drive_kind_mismatch(netlist):
    assert main(["solve", "--netlist", netlist(ENVELOPE), "--drive-kind", "current"]) == EXIT_STRUCT


def test_missing_file(tmp_path):
    assert main(["solve", "--netlist", str(tmp_path / "nope.net")]) == EXIT_IO


def test_unwritable_output(netlist, tmp_path):
    out = tmp_path / "missing" / "o.csv"
    assert main(["solve", "--netlist", netlist("resistor(R=1)"), "--out", str(out)]) == EXIT_IO


@pytest.mark.parametrize("bad", [["solve"], ["solve", "--netlist", "x", "--steps", "0"],
                                 ["solve", "--netlist", "x", "--tol", "-1"], ["frobnicate"],
                                 ["tune", "--netlist", "x", "--alpha-grid", "0:1:0"]])
def test_usage_errors(bad):
    with pytest.raises(SystemExit) as info:
        main(bad)
    assert info.value.code == 2


def test_grid():
    g = _grid("0:0.6:0.005")
    assert len(g) == 121 and g[-1] == pytest.approx(0.6)
    assert _grid("0.1,0.2") == [0.1, 0.2]


def test_module_entry_point(netlist):
    proc = subprocess.run([sys.executable, "-m", "monoport", "check", "--netlist", netlist(ENVELOPE), "--steps", "32"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "ladder with 1 backward element" in proc.stdout
