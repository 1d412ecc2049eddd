import csv

import numpy as np
import pytest

from fracrk.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main, read_vector, write_vector
from fracrk.poles import load_poles, zolotarev


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestPoles:
    def test_print(self, capsys):
        code, out, _ = run(capsys, "poles", "--interval", "19,348475", "--k", "4")
        assert code == EXIT_OK
        got = [float(x) for x in out.split()]
        np.testing.assert_allclose(sorted(got, reverse=True), zolotarev((19, 348475), 4).poles, rtol=1e-15)

    def test_file(self, capsys, tmp_path):
        path = tmp_path / "p.txt"
        code, _, _ = run(capsys, "poles", "--strategy", "A", "--interval", "1,1000", "--k", "5", "--out", str(path))
        assert code == EXIT_OK
        assert load_poles(path).k == 5

    def test_operator_based(self, capsys):
        code, out, _ = run(capsys, "poles", "--strategy", "F", "--operator", "fem1d", "--size", "30", "--k", "4")
        assert code == EXIT_OK and len(out.split()) == 4

    def test_bad_strategy(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["poles", "--strategy", "Q"])
        assert exc.value.code == EXIT_USAGE

    def test_bad_interval(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["poles", "--interval", "5,1"])
        assert exc.value.code == EXIT_USAGE


class TestCertify:
    def test_csv(self, capsys, tmp_path):
        path = tmp_path / "p.txt"
        run(capsys, "poles", "--interval", "19,348475", "--k", "4", "--out", str(path))
        code, out, _ = run(capsys, "certify", "--poles", str(path), "--interval", "19,348475", "--function", "pow:-0.5")
        assert code == EXIT_OK
        rows = list(csv.DictReader(out.splitlines()))
        kinds = [r["kind"] for r in rows]
        assert kinds.count("extremum") == 3 and kinds.count("endpoint") == 2
        delta = float(rows[0]["value"])
        assert delta == max(float(r["value"]) for r in rows if r["kind"] in ("extremum", "endpoint"))
        assert float(rows[-1]["value"]) == pytest.approx(2 * delta)


class TestApply:
    def test_check(self, capsys, tmp_path):
        out = tmp_path / "u.txt"
        code, _, err = run(
            capsys, "apply", "--operator", "fem1d", "--size", "40", "--function", "pow:+0.5",
            "--k", "8", "--out", str(out), "--check",
        )
        assert code == EXIT_OK
        assert "error" in err and read_vector(out).shape == (40,)

    def test_vector_length(self, capsys, tmp_path):
        vec = tmp_path / "b.txt"
        write_vector(np.ones(3), vec)
        code, _, err = run(capsys, "apply", "--operator", "fem1d", "--size", "5", "--function", "pow:+0.5", "--vector", str(vec))
        assert code == EXIT_USAGE and "length" in err

    def test_bad_function(self, capsys):
        code, _, err = run(capsys, "apply", "--function", "sin:1")
        assert code == EXIT_USAGE


class TestFode:
    def test_modes_agree(self, capsys, tmp_path):
        vec = tmp_path / "v.mtx"
        write_vector(np.ones(30), vec)
        outs = []
        for mode in ("exact", "rkm"):
            path = tmp_path / f"{mode}.txt"
            code, _, _ = run(
                capsys, "fode", "--operator", "fem1d", "--size", "30", "--alpha", "0.7", "--s", "0.6",
                "--t", "0.5", "--forcing", f"0:{vec}", "--mode", mode, "--k", "12", "--out", str(path),
            )
            assert code == EXIT_OK
            outs.append(read_vector(path))
        np.testing.assert_allclose(outs[0], outs[1], rtol=1e-6, atol=1e-8)

    def test_bad_forcing(self, capsys):
        code, _, err = run(capsys, "fode", "--alpha", "0.5", "--s", "0.5", "--t", "1", "--forcing", "oops")
        assert code == EXIT_USAGE


class TestSweeps:
    def test_converge(self, capsys, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[operator]\nsize = 8\n[poles]\nstrategies = Z, A\nk = 2:5\n")
        out = tmp_path / "c.csv"
        code, _, _ = run(capsys, "converge", "--config", str(cfg), "--out", str(out))
        assert code == EXIT_OK
        assert out.read_text().startswith("# schema=fracrk.converge/1\n")

    def test_stdout(self, capsys, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[operator]\ninterval = 1, 1000\n[poles]\nstrategies = Z, E\nk = 1:3\n")
        code, out, _ = run(capsys, "certcmp", "--config", str(cfg))
        assert code == EXIT_OK and out.startswith("# schema=fracrk.certcmp/1")

    def test_config_error(self, capsys, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[poles]\nstrategy = Z\n")
        code, _, err = run(capsys, "paramstudy", "--config", str(cfg))
        assert code == EXIT_USAGE and "unknown key 'strategy'" in err

    def test_violation_exit(self, capsys, tmp_path, monkeypatch):
        import fracrk.experiments as ex

        cfg = tmp_path / "c.ini"
        cfg.write_text("[operator]\nsize = 6\n[poles]\nk = 2\n")
        monkeypatch.setattr(ex, "error_bound", lambda *a, **kw: 0.0)
        code, _, err = run(capsys, "converge", "--config", str(cfg))
        assert code == EXIT_FAILURE and "exceed" in err


def test_vector_round_trip(tmp_path):
    v = np.array([1.0, -2.5, 1e-300])
    for name in ("v.txt", "v.mtx"):
        write_vector(v, tmp_path / name)
        np.testing.assert_array_equal(read_vector(tmp_path / name), v)
