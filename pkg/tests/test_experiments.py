import csv
import math

import numpy as np
import pytest

from fracrk import experiments as ex
from fracrk.experiments import (
    SCHEMAS,
    ConfigError,
    SweepConfig,
    bound_violations,
    parse_config,
    parse_grid,
    run_certificates,
    run_convergence,
    run_paramstudy,
    worker_count,
    write_csv,
)


def write(tmp_path, text, name="sweep.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


SMALL = """
[operator]
kind = fd2d
size = 9

[function]
family = ml
alpha = 0.5, 1
t = 1.5
s = 0.5:0.25:1

[poles]
strategies = Z, E, A
k = 1:6
"""


def read_rows(text):
    lines = text.splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


class TestParseGrid:
    def test_range(self):
        assert parse_grid("0:0.25:1") == (0.0, 0.25, 0.5, 0.75, 1.0)

    def test_unit_step_and_list(self):
        assert parse_grid("1:3, 7", integer=True) == (1, 2, 3, 7)

    def test_clean_rounding(self):
        assert parse_grid("0:0.1:0.3") == (0.0, 0.1, 0.2, 0.3)

    @pytest.mark.parametrize("bad", ["1:0", "0:-1:3", "1:2:3:4", "x"])
    def test_bad(self, bad):
        with pytest.raises(ValueError):
            parse_grid(bad)

    def test_integer(self):
        with pytest.raises(ValueError):
            parse_grid("1.5", integer=True)


class TestParseConfig:
    def test_minimal(self, tmp_path):
        cfg = parse_config(write(tmp_path, "[poles]\nk = 3\n"))
        assert cfg == SweepConfig(k=(3,))

    def test_full(self, tmp_path):
        cfg = parse_config(write(tmp_path, SMALL + "\n[output]\npath = out.csv\nseed = 4\n"))
        assert cfg.size == 9 and cfg.alpha == (0.5, 1.0) and cfg.s == (0.5, 0.75, 1.0)
        assert cfg.strategies == ("Z", "E", "A") and cfg.k == tuple(range(1, 7))
        assert cfg.out == tmp_path / "out.csv" and cfg.seed == 4

    def test_bad_strategy(self, tmp_path):
        with pytest.raises(ConfigError, match=r"\[poles\] strategies.*'B'"):
            parse_config(write(tmp_path, "[poles]\nstrategies = Z, B\n"))

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError, match=r"\[function\] unknown key 'gamma'"):
            parse_config(write(tmp_path, "[function]\ngamma = 1\n"))

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config(write(tmp_path, "[plot]\nx = 1\n"))

    def test_k_range(self, tmp_path):
        with pytest.raises(ConfigError, match="outside"):
            parse_config(write(tmp_path, "[poles]\nk = 61\n"))

    def test_bad_number_names_field(self, tmp_path):
        with pytest.raises(ConfigError, match=r"\[function\] alpha"):
            parse_config(write(tmp_path, "[function]\nalpha = half\n"))

    def test_parameter_domain(self, tmp_path):
        with pytest.raises(ConfigError, match="alpha"):
            parse_config(write(tmp_path, "[function]\nalpha = 1.5\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(tmp_path / "nope.ini")

    def test_functions_order(self):
        cfg = SweepConfig(alpha=(0.5, 1.0), t=(1.0, 2.0), s=(0.5,))
        assert [(f.alpha, f.t) for f in cfg.functions()] == [(0.5, 1.0), (0.5, 2.0), (1.0, 1.0), (1.0, 2.0)]


class TestWorkers:
    def test_env(self, monkeypatch):
        monkeypatch.setenv(ex.WORKERS_ENV, "3")
        assert worker_count() == 3

    @pytest.mark.parametrize("raw", ["0", "many"])
    def test_bad_env(self, monkeypatch, raw):
        monkeypatch.setenv(ex.WORKERS_ENV, raw)
        with pytest.raises(ConfigError):
            worker_count()


@pytest.fixture(scope="module")
def cfg(tmp_path_factory):
    return parse_config(write(tmp_path_factory.mktemp("cfg"), SMALL))


class TestSweeps:
    def test_convergence_rows(self, cfg):
        rows = run_convergence(cfg)
        # A skips k = 1
        assert len(rows) == len(cfg.functions()) * (6 + 6 + 5)
        assert not bound_violations(rows)
        assert all(r["error"] <= r["bound"] for r in rows)

    def test_paramstudy_reference(self, cfg):
        rows = run_paramstudy(cfg)
        r = rows[0]
        assert set(r) == set(SCHEMAS["paramstudy"][1])
        assert 0 < r["reference"] < 1

    def test_deterministic_csv(self, cfg, tmp_path, monkeypatch):
        first = write_csv(run_convergence(cfg), "converge")
        monkeypatch.setenv(ex.WORKERS_ENV, "1")
        second = write_csv(run_convergence(cfg), "converge", tmp_path / "c.csv")
        assert first == second == (tmp_path / "c.csv").read_text()

    def test_schema_header(self, cfg):
        header, rows = read_rows(write_csv(run_convergence(cfg), "converge"))
        assert header == "# schema=fracrk.converge/1"
        assert tuple(rows[0]) == SCHEMAS["converge"][1]
        assert float(rows[0]["error"]) <= float(rows[0]["bound"])

    def test_certificates(self, tmp_path):
        cfg = parse_config(
            write(tmp_path, "[operator]\ninterval = 19, 348475\n[poles]\nstrategies = Z, E, A\nk = 2:12\n")
        )
        rows = run_certificates(cfg)
        by = {(r["strategy"], r["k"]): r["delta"] for r in rows}
        for k in range(2, 13):
            assert by["Z", k] <= min(by["E", k], by["A", k])
            assert by["Z", k] <= 2 * math.exp(-0.44048238581571814 * k) * (1 + 1e-12)

    def test_pow_families(self, tmp_path):
        cfg = parse_config(
            write(tmp_path, "[operator]\nsize = 8\n[function]\nfamily = pow-\ns = 0:0.5:1\n[poles]\nk = 1:4\n")
        )
        rows = run_convergence(cfg)
        assert {r["family"] for r in rows} == {"pow-"}
        assert all(math.isnan(r["alpha"]) for r in rows)
        assert not bound_violations(rows)


def test_bound_violations():
    rows = [{"error": 1.0, "bound": 2.0}, {"error": 3.0, "bound": 2.0}, {"delta": 0.1}]
    assert bound_violations(rows) == [rows[1]]


def test_write_csv_repr_floats():
    text = write_csv([{"strategy": "Z", "k": 3, "delta": 0.1 + 0.2, "zolotarev_bound": 1.0}], "certcmp")
    assert "0.30000000000000004" in text
    assert np.isclose(float(read_rows(text)[1][0]["delta"]), 0.3)
